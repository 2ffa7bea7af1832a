"""Query parsing, task planning and plan execution.

The input layer turns a natural-language query into a ParsedQuery via
deterministic keyword rules and an editable alias table. The planning
layer expands a query into a TaskPlan: one analysis node per applicable
(kind, ticker) pair, an integration node depending on all of them, and
a single decision node depending on integration.

``execute_plan`` drives a plan to completion against an agent registry:
analysis nodes run agents, the integration node aligns and fuses their
reports, and conflicts trigger bounded re-analysis rounds before the
decision falls back to the escalation rule.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum
from importlib import resources

from . import fusion as fusion_mod
from .agents import AgentContext, AgentReport, check_evidence_bound
from .marketdata import Snapshot


class Intent(str, Enum):
    TRADE_DECISION = "trade_decision"
    ANALYSIS_ONLY = "analysis_only"


class Horizon(str, Enum):
    SHORT = "short"
    MEDIUM = "medium"
    LONG = "long"


class TaskStatus(str, Enum):
    PENDING = "pending"
    READY = "ready"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


ANALYSIS_KINDS = ("fundamental", "technical", "news", "sector", "search", "revenue_forecast")
TERMINAL = (TaskStatus.DONE, TaskStatus.FAILED)


class UnresolvedEntityError(ValueError):
    """No ticker recognized in the query; carries the unmatched candidates."""

    def __init__(self, candidates):
        self.candidates = list(candidates)
        super().__init__(f"no ticker recognized; candidates: {', '.join(self.candidates) or '(none)'}")


class EmptyPlanError(ValueError):
    """No data modality available for any analysis kind."""


class EscalationSignal(Exception):
    """Conflict persists at the round budget; decide via the priority rule."""


@dataclass
class ParsedQuery:
    intent: Intent
    tickers: list[str]
    horizon: Horizon
    as_of: datetime
    raw_text: str


@dataclass
class TaskNode:
    id: str
    kind: str
    ticker: str
    depends_on: set[str] = field(default_factory=set)
    status: TaskStatus = TaskStatus.PENDING
    enrichment: str | None = None


@dataclass
class TaskPlan:
    nodes: dict[str, TaskNode]
    round: int = 1
    max_rounds: int = 2
    notes: list[str] = field(default_factory=list)

    def analysis_nodes(self) -> list[TaskNode]:
        return [n for n in self.nodes.values() if n.kind in ANALYSIS_KINDS]

    def node_of_kind(self, kind: str) -> TaskNode:
        return next(n for n in self.nodes.values() if n.kind == kind)


# -- input layer -------------------------------------------------------------

_TRADE_VERBS = {"buy", "sell", "hold", "trade", "position"}
_TOKEN_RE = re.compile(r"[A-Za-z][A-Za-z0-9.\-']*")
_CANDIDATE_RE = re.compile(r"^[A-Z][A-Z0-9]{1,9}$")
_CANDIDATE_STOPWORDS = {
    "I", "A", "OR", "AND", "THE", "TO", "OF", "IN", "ON", "IS", "IT", "MY",
    "WE", "FOR", "BUY", "SELL", "HOLD", "TRADE", "SHOULD", "GIVEN", "TODAY",
    "MARKET", "WHAT", "HOW", "US", "AI", "CEO", "ETF", "USD",
}

_default_aliases: dict[str, str] | None = None


def load_aliases(path=None) -> dict[str, str]:
    """ALIAS -> TICKER table from a tab-separated file (bundled by default)."""
    if path is None:
        text = (resources.files("p1gpt") / "data" / "ticker_aliases.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    table: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        alias, _, ticker = line.partition("\t")
        table[alias.strip().upper()] = ticker.strip().upper()
    return table


def parse_query(text: str, as_of: datetime, aliases: dict[str, str] | None = None) -> ParsedQuery:
    """Classify intent, extract tickers and horizon by deterministic rules."""
    global _default_aliases
    if not text or not text.strip():
        raise ValueError("empty query")
    if aliases is None:
        if _default_aliases is None:
            _default_aliases = load_aliases()
        aliases = _default_aliases

    tokens = _TOKEN_RE.findall(text)
    lower = text.lower()

    tickers: list[str] = []
    for tok in tokens:
        ticker = aliases.get(tok.upper())
        if ticker and ticker not in tickers:
            tickers.append(ticker)
    if not tickers:
        candidates = [
            t for t in tokens
            if _CANDIDATE_RE.match(t) and t not in _CANDIDATE_STOPWORDS
        ]
        raise UnresolvedEntityError(candidates)

    words = {t.lower() for t in tokens}
    intent = Intent.TRADE_DECISION if words & _TRADE_VERBS else Intent.ANALYSIS_ONLY

    horizon = Horizon.MEDIUM
    if "long-term" in lower or "long term" in lower:
        horizon = Horizon.LONG
    elif "short-term" in lower or "short term" in lower:
        horizon = Horizon.SHORT

    return ParsedQuery(intent=intent, tickers=tickers, horizon=horizon, as_of=as_of, raw_text=text)


# -- planning layer ----------------------------------------------------------

_KIND_REQUIRES = {
    "technical": "bars",
    "fundamental": "fundamentals",
    "news": "news",
    "sector": "news",
    "revenue_forecast": "fundamentals",
}


def build_plan(
    q: ParsedQuery,
    available_modalities: set[str],
    max_rounds: int = 2,
    include_revenue_forecast: bool = False,
) -> TaskPlan:
    """One analysis node per applicable kind, plus integration and decision.

    Kinds whose required modality is missing are omitted and recorded in
    the plan notes. One plan covers one ticker (the query's first).
    """
    ticker = q.tickers[0]
    kinds = ["fundamental", "technical", "news", "sector"]
    if include_revenue_forecast:
        kinds.append("revenue_forecast")

    nodes: dict[str, TaskNode] = {}
    notes: list[str] = []
    analysis_ids: list[str] = []
    for kind in kinds:
        needs = _KIND_REQUIRES[kind]
        if needs not in available_modalities:
            notes.append(f"omitted {kind}: no {needs} data available")
            continue
        nid = f"{kind}:{ticker}"
        nodes[nid] = TaskNode(id=nid, kind=kind, ticker=ticker)
        analysis_ids.append(nid)
    if not analysis_ids:
        raise EmptyPlanError(f"no data modality available for {ticker}")

    integ_id = f"integration:{ticker}"
    nodes[integ_id] = TaskNode(
        id=integ_id, kind="integration", ticker=ticker, depends_on=set(analysis_ids)
    )
    dec_id = f"decision:{ticker}"
    nodes[dec_id] = TaskNode(
        id=dec_id, kind="decision", ticker=ticker, depends_on={integ_id}
    )
    return TaskPlan(nodes=nodes, round=1, max_rounds=max_rounds, notes=notes)


def ready_tasks(plan: TaskPlan) -> list[TaskNode]:
    """Pending nodes whose dependencies have all reached a terminal state.

    Failed dependencies count as satisfied: a missing opinion is handled
    downstream (alignment drops failed reports), it must not deadlock the
    plan. Order is deterministic (lexicographic id).
    """
    out = []
    for node in plan.nodes.values():
        if node.status != TaskStatus.PENDING:
            continue
        if all(plan.nodes[d].status in TERMINAL for d in node.depends_on):
            out.append(node)
    return sorted(out, key=lambda n: n.id)


def adapt_plan(plan: TaskPlan, trigger: list[tuple[str, str]]) -> TaskPlan:
    """Re-open the conflicting analysis kinds for one more round.

    Returns a new plan with round+1; the conflicting kinds and the
    integration/decision nodes are pending again, everything else keeps
    its status. Raises EscalationSignal at the round budget.
    """
    if plan.round >= plan.max_rounds:
        raise EscalationSignal(f"round budget {plan.max_rounds} exhausted; conflicts: {trigger}")
    conflict_kinds = sorted({k for pair in trigger for k in pair})
    marker = f"conflict:{'~'.join(conflict_kinds)}:round{plan.round + 1}"
    nodes: dict[str, TaskNode] = {}
    for nid, node in plan.nodes.items():
        node = replace(node, depends_on=set(node.depends_on))
        if node.kind in conflict_kinds:
            node.status = TaskStatus.PENDING
            node.enrichment = marker
        elif node.kind in ("integration", "decision"):
            node.status = TaskStatus.PENDING
        nodes[nid] = node
    return TaskPlan(
        nodes=nodes, round=plan.round + 1, max_rounds=plan.max_rounds, notes=list(plan.notes)
    )


# -- execution ---------------------------------------------------------------

@dataclass
class PlanOutcome:
    """Result of driving one plan to completion."""

    decision: "fusion_mod.Decision | None"
    view: "fusion_mod.IntegratedView | None"
    escalated: bool
    executions: int
    adaptations: int
    notes: list[str]

    @property
    def failed(self) -> bool:
        return self.decision is None


def execute_plan(
    plan: TaskPlan,
    snapshot: Snapshot,
    registry: dict,
    horizon: Horizon = Horizon.MEDIUM,
    weights: dict[str, float] | None = None,
    conf_floor: float = 0.6,
    buy_threshold: float = 0.15,
    sell_threshold: float = -0.15,
) -> PlanOutcome:
    """Run agents per the plan, fuse reports, emit exactly one decision.

    Serial executor: deterministic given the plan and agent outcomes.
    Agent exceptions degrade to failed reports; zero surviving reports
    yield a failed outcome (the caller records Hold).
    """
    reports: dict[str, AgentReport] = {}
    notes = list(plan.notes)
    escalated = False
    executions = 0
    adaptations = 0
    view = None
    decision = None

    while True:
        ready = ready_tasks(plan)
        if not ready:
            break
        for node in ready:
            if node.kind in ANALYSIS_KINDS:
                node.status = TaskStatus.RUNNING
                ctx = AgentContext(snapshot=snapshot, task=node, enrichment=node.enrichment)
                agent = registry.get(node.kind)
                if agent is None:
                    notes.append(f"no agent registered for {node.kind}")
                    node.status = TaskStatus.FAILED
                    continue
                try:
                    report = agent(ctx)
                except Exception as exc:  # fail-safe: a crash is a missing opinion
                    report = AgentReport.failure(node.kind, node.ticker, snapshot.as_of, str(exc))
                executions += 1
                if check_evidence_bound(report, snapshot.as_of):
                    report = AgentReport.failure(
                        node.kind, node.ticker, snapshot.as_of, "evidence after as-of bound"
                    )
                report.round = plan.round
                reports[node.kind] = report
                node.status = TaskStatus.FAILED if report.failed else TaskStatus.DONE
                if report.failed:
                    notes.append(f"{node.kind} failed: {report.failure_reason}")
            elif node.kind == "integration":
                try:
                    aligned, align_notes = fusion_mod.align_reports(list(reports.values()))
                except fusion_mod.NoEvidenceError as exc:
                    notes.append(f"integration failed: {exc}")
                    return PlanOutcome(None, None, escalated, executions, adaptations, notes)
                notes.extend(align_notes)
                conflicts = fusion_mod.detect_conflicts(aligned, conf_floor=conf_floor)
                if conflicts and not escalated:
                    try:
                        plan = adapt_plan(plan, conflicts)
                        adaptations += 1
                        break  # restart scheduling on the adapted plan
                    except EscalationSignal:
                        escalated = True
                        notes.append(f"escalated after {plan.max_rounds} rounds: {conflicts}")
                view = fusion_mod.fuse(aligned, weights=weights, horizon=horizon.value, conf_floor=conf_floor)
                node.status = TaskStatus.DONE
            elif node.kind == "decision":
                decision = fusion_mod.decide(
                    view,
                    buy_threshold=buy_threshold,
                    sell_threshold=sell_threshold,
                    escalated=escalated,
                    horizon=horizon.value,
                )
                node.status = TaskStatus.DONE

    return PlanOutcome(decision, view, escalated, executions, adaptations, notes)
