"""Integration and decision layers.

Reports are aligned to one (ticker, as-of) frame, screened for
high-confidence contradictions, and fused with a confidence-weighted
linear opinion pool:

    weighted_score = sum(w_k * conf_k * value_k) / sum(w_k * conf_k)

over kinds with confidence > 0, where value maps bullish -> +1,
neutral -> 0, bearish -> -1. Scores are scale-free in the weights by
construction. The decision applies symmetric thresholds, except under
escalation on long horizons where the fundamental report's stance wins
outright.

The final Decision deliberately carries no numeric confidence; its
transparency lives in the rationale text and the per-agent reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime

from .agents import AgentReport, BULLISH, BEARISH
from .baselines import Action

CANONICAL_ORDER = ("fundamental", "technical", "news", "sector", "revenue_forecast")

# Base kind weights; revenue_forecast rides at 20% of the fundamental weight.
DEFAULT_WEIGHTS = {
    "fundamental": 0.35,
    "technical": 0.35,
    "news": 0.20,
    "sector": 0.10,
    "revenue_forecast": 0.35 * 0.20,
}

STANCE_VALUE = {BULLISH: 1.0, "neutral": 0.0, BEARISH: -1.0}


class MixedReportsError(ValueError):
    """Reports disagree on ticker or as-of frame."""


class NoEvidenceError(ValueError):
    """No usable report survived alignment."""


@dataclass
class IntegratedView:
    ticker: str
    as_of: datetime
    reports: list[AgentReport]
    weighted_score: float
    conflicts: list[tuple[str, str]]
    weights_used: dict[str, float]
    notes: list[str] = field(default_factory=list)

    def report_of(self, kind: str) -> AgentReport | None:
        for r in self.reports:
            if r.agent_kind == kind:
                return r
        return None

    def to_dict(self) -> dict:
        return {
            "ticker": self.ticker,
            "as_of": self.as_of.isoformat(),
            "weighted_score": self.weighted_score,
            "conflicts": [list(c) for c in self.conflicts],
            "weights_used": self.weights_used,
            "notes": self.notes,
            "reports": [r.to_dict() for r in self.reports],
        }


@dataclass
class Decision:
    ticker: str
    date: str
    action: Action
    rationale: str
    contributing: list[str]
    overridden: tuple[str, str, str] | None = None  # (human_action, operator_id, note)

    def __post_init__(self):
        if not self.rationale:
            raise ValueError("rationale must be non-empty")

    def to_dict(self) -> dict:
        return {
            "ticker": self.ticker,
            "date": self.date,
            "action": self.action.value,
            "rationale": self.rationale,
            "contributing": self.contributing,
            "overridden": list(self.overridden) if self.overridden else None,
        }


def align_reports(reports: list[AgentReport]) -> tuple[list[AgentReport], list[str]]:
    """Drop failed reports, collapse kind duplicates (latest round wins),
    order canonically. Returns (aligned, notes)."""
    if not reports:
        raise NoEvidenceError("no reports to align")
    frames = {(r.ticker, r.as_of) for r in reports}
    if len(frames) > 1:
        raise MixedReportsError(f"reports span multiple (ticker, as_of) frames: {sorted(str(f) for f in frames)}")

    notes = []
    by_kind: dict[str, AgentReport] = {}
    for r in reports:
        if r.failed:
            notes.append(f"dropped failed {r.agent_kind} report: {r.failure_reason}")
            continue
        cur = by_kind.get(r.agent_kind)
        if cur is None or r.round >= cur.round:
            by_kind[r.agent_kind] = r
    if not by_kind:
        raise NoEvidenceError("all reports failed")

    order = {k: i for i, k in enumerate(CANONICAL_ORDER)}
    aligned = sorted(by_kind.values(), key=lambda r: order.get(r.agent_kind, len(order)))
    return aligned, notes


def detect_conflicts(reports: list[AgentReport], conf_floor: float = 0.6) -> list[tuple[str, str]]:
    """Pairs of kinds with strictly opposite stances, both at/above the floor."""
    strong = [
        r for r in reports
        if r.stance in (BULLISH, BEARISH) and r.confidence >= conf_floor
    ]
    order = {k: i for i, k in enumerate(CANONICAL_ORDER)}
    pairs = []
    for i, a in enumerate(strong):
        for b in strong[i + 1 :]:
            if a.stance != b.stance:
                pair = sorted((a.agent_kind, b.agent_kind), key=lambda k: order.get(k, len(order)))
                pairs.append(tuple(pair))
    return sorted(pairs, key=lambda p: (order.get(p[0], 99), order.get(p[1], 99)))


def fuse(
    reports: list[AgentReport],
    weights: dict[str, float] | None = None,
    horizon: str = "medium",
    conf_floor: float = 0.6,
) -> IntegratedView:
    """Confidence-weighted opinion pool over aligned reports."""
    weights = dict(DEFAULT_WEIGHTS if weights is None else weights)
    for r in reports:
        w = weights.get(r.agent_kind, 0.0)
        if w <= 0:
            raise ValueError(f"weight for present kind {r.agent_kind!r} must be positive")

    contributing = [r for r in reports if r.confidence > 0]
    denom = sum(weights[r.agent_kind] * r.confidence for r in contributing)
    if denom > 0:
        score = sum(
            weights[r.agent_kind] * r.confidence * STANCE_VALUE[r.stance]
            for r in contributing
        ) / denom
    else:
        score = 0.0

    wsum = sum(weights[r.agent_kind] for r in contributing)
    weights_used = {
        r.agent_kind: weights[r.agent_kind] / wsum for r in contributing
    } if wsum > 0 else {}

    if not reports:
        raise NoEvidenceError("cannot fuse zero reports")
    return IntegratedView(
        ticker=reports[0].ticker,
        as_of=reports[0].as_of,
        reports=list(reports),
        weighted_score=score,
        conflicts=detect_conflicts(reports, conf_floor=conf_floor),
        weights_used=weights_used,
    )


# Threshold comparisons absorb accumulated float rounding so the action is
# scale-free in the weights, as the score is by construction.
_THRESHOLD_EPS = 1e-9


def decide(
    view: IntegratedView,
    buy_threshold: float = 0.15,
    sell_threshold: float = -0.15,
    escalated: bool = False,
    horizon: str = "medium",
) -> Decision:
    """Threshold rule on the fused score; fundamental priority on escalated
    long-horizon conflicts."""
    fundamental = view.report_of("fundamental")
    if escalated and horizon == "long" and fundamental is not None:
        action = {
            BULLISH: Action.BUY,
            BEARISH: Action.SELL,
            "neutral": Action.HOLD,
        }[fundamental.stance]
        basis = (
            f"Escalated conflict on a long horizon: fundamental analysis takes "
            f"priority and reads {fundamental.stance}."
        )
    elif view.weighted_score >= buy_threshold - _THRESHOLD_EPS:
        action = Action.BUY
        basis = f"Weighted score {view.weighted_score:+.3f} >= buy threshold {buy_threshold:+.2f}."
    elif view.weighted_score <= sell_threshold + _THRESHOLD_EPS:
        action = Action.SELL
        basis = f"Weighted score {view.weighted_score:+.3f} <= sell threshold {sell_threshold:+.2f}."
    else:
        action = Action.HOLD
        basis = (
            f"Weighted score {view.weighted_score:+.3f} inside "
            f"({sell_threshold:+.2f}, {buy_threshold:+.2f})."
        )

    lines = [
        f"- {r.agent_kind}: {r.stance} (confidence {r.confidence:.2f})"
        for r in view.reports
    ]
    if view.conflicts:
        lines.append(
            "Conflicts: " + "; ".join(f"{a} vs {b}" for a, b in view.conflicts)
        )
    rationale = "\n".join(lines + [basis])

    return Decision(
        ticker=view.ticker,
        date=view.as_of.date().isoformat(),
        action=action,
        rationale=rationale,
        contributing=[r.agent_kind for r in view.reports],
    )


_SECTION_TITLES = {
    "technical": "Technical",
    "fundamental": "Fundamental",
    "news": "News",
    "sector": "Sector",
    "revenue_forecast": "Revenue Outlook",
}
_SECTION_ORDER = ("technical", "fundamental", "news", "sector", "revenue_forecast")


def render_report(view: IntegratedView, decision: Decision) -> str:
    """Investment report document: per-agent sections, integration summary,
    recommendation. Deterministic byte-for-byte under identical inputs."""
    width = 72
    out = []
    out.append("=" * width)
    out.append(f"INVESTMENT REPORT  {view.ticker}  {view.as_of.date().isoformat()}")
    out.append("=" * width)
    for kind in _SECTION_ORDER:
        r = view.report_of(kind)
        if r is None:
            continue
        out.append("")
        out.append(f"## {_SECTION_TITLES[kind]}")
        out.append(f"Stance: {r.stance}  (confidence {r.confidence:.2f})")
        for f in r.key_findings:
            out.append(f"  - {f}")
        if r.rationale:
            out.append(f"  {r.rationale}")
    out.append("")
    out.append("## Integration")
    out.append(f"Weighted score: {view.weighted_score:+.4f}")
    if view.weights_used:
        pretty = ", ".join(f"{k}={view.weights_used[k]:.3f}" for k in sorted(view.weights_used))
        out.append(f"Weights used: {pretty}")
    if view.conflicts:
        out.append("Conflicts: " + "; ".join(f"{a} vs {b}" for a, b in view.conflicts))
    else:
        out.append("Conflicts: none")
    for note in view.notes:
        out.append(f"Note: {note}")
    out.append("")
    out.append("## Recommendation")
    out.append(f"Action: {decision.action.value}")
    out.append(decision.rationale)
    if decision.overridden:
        human_action, operator_id, note = decision.overridden
        out.append("")
        out.append(f"OVERRIDE: {operator_id} set {human_action} ({note})")
    out.append("=" * width)
    return "\n".join(out) + "\n"
