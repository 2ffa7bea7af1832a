"""Analysis-layer agents.

Reference agents are deterministic scoring rules over a point-in-time
snapshot: identical inputs produce byte-identical reports, so backtests
replay exactly and need no network. The LLM adapter is strictly
additive: it speaks a small HTTP protocol (one POST per task, JSON
report back, schema-validated, bounded retries, one repair reprompt)
and can stand in for any reference agent when configured.

Every agent returns an AgentReport; hard failures return a failed
report (no stance, confidence 0) rather than raising.
"""

from __future__ import annotations

import json
import os
import threading
import time as time_mod
from dataclasses import dataclass, field, asdict
from datetime import datetime, timedelta
from importlib import resources
from statistics import fmean

import jsonschema
import requests

from . import indicators
from .marketdata import (
    NewsItem,
    Snapshot,
    end_of_day,
    lexicon_sentiment,
    _parse_timestamp,
)

BULLISH, BEARISH, NEUTRAL = "bullish", "bearish", "neutral"
REPORT_SCHEMA_VERSION = "1"


@dataclass
class Evidence:
    source_id: str
    timestamp: datetime
    excerpt: str


@dataclass
class AgentReport:
    """Standardized structured output of any agent."""

    agent_kind: str
    ticker: str
    as_of: datetime
    stance: str | None
    confidence: float
    key_findings: list[str] = field(default_factory=list)
    evidence: list[Evidence] = field(default_factory=list)
    rationale: str = ""
    metrics: dict[str, float] = field(default_factory=dict)
    round: int = 1
    failed: bool = False
    failure_reason: str = ""

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of [0, 1]: {self.confidence}")
        if self.stance is not None and self.stance not in (BULLISH, BEARISH, NEUTRAL):
            raise ValueError(f"invalid stance: {self.stance}")
        if self.failed and self.stance is not None:
            raise ValueError("failed reports carry no stance")

    @classmethod
    def failure(cls, agent_kind: str, ticker: str, as_of: datetime, reason: str) -> "AgentReport":
        return cls(
            agent_kind=agent_kind,
            ticker=ticker,
            as_of=as_of,
            stance=None,
            confidence=0.0,
            rationale=f"agent failed: {reason}",
            failed=True,
            failure_reason=reason,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["as_of"] = self.as_of.isoformat()
        d["evidence"] = [
            {"source_id": e.source_id, "timestamp": e.timestamp.isoformat(), "excerpt": e.excerpt}
            for e in self.evidence
        ]
        return d


@dataclass
class AgentContext:
    """What an agent sees: the sealed snapshot plus its task assignment."""

    snapshot: Snapshot
    task: object  # TaskNode; duck-typed to avoid a circular import
    enrichment: str | None = None

    @property
    def ticker(self) -> str:
        return self.task.ticker

    @property
    def as_of(self) -> datetime:
        return self.snapshot.as_of


def check_evidence_bound(report: AgentReport, as_of: datetime) -> list[str]:
    """Evidence timestamps later than the as-of bound, as violation strings."""
    return [
        f"{e.source_id} at {e.timestamp.isoformat()}"
        for e in report.evidence
        if e.timestamp > as_of
    ]


# -- reference ISAs ----------------------------------------------------------

def technical_isa(ctx: AgentContext, min_bars: int = 30) -> AgentReport:
    """Trend scoring from SMA 10/20, RSI 14 and MACD(12, 26, 9).

    Components: close vs SMA20 (+1 above / -1 below / 0 at), MACD
    histogram sign, RSI oversold(+1 below 30)/overbought(-1 above 70).
    Stance: score >= +1 bullish, <= -1 bearish; confidence = |score|/3.
    """
    bars = ctx.snapshot.bars_for(ctx.ticker)
    if len(bars) < min_bars:
        return AgentReport.failure(
            "technical", ctx.ticker, ctx.as_of, f"needs >= {min_bars} bars, have {len(bars)}"
        )
    closes = [b.close for b in bars]
    sma10 = indicators.sma(closes, 10).last()
    sma20 = indicators.sma(closes, 20).last()
    rsi14 = indicators.rsi(closes, 14).last()
    macd_line, macd_sig, macd_hist = (s.last() for s in indicators.macd(closes))
    close = closes[-1]

    trend = 1 if close > sma20 else (-1 if close < sma20 else 0)
    momentum = 1 if macd_hist > 0 else (-1 if macd_hist < 0 else 0)
    if rsi14 == rsi14:  # defined
        osc = 1 if rsi14 < 30 else (-1 if rsi14 > 70 else 0)
    else:
        osc = 0
    score = trend + momentum + osc
    stance = BULLISH if score >= 1 else (BEARISH if score <= -1 else NEUTRAL)

    findings = [
        f"close {close:.2f} vs 20-day SMA {sma20:.2f}",
        f"MACD histogram {macd_hist:+.4f}",
        f"RSI(14) {'undefined' if rsi14 != rsi14 else format(rsi14, '.1f')}",
    ]
    last_bar = bars[-1]
    return AgentReport(
        agent_kind="technical",
        ticker=ctx.ticker,
        as_of=ctx.as_of,
        stance=stance,
        confidence=abs(score) / 3.0,
        key_findings=findings,
        evidence=[
            Evidence(
                source_id=f"bars:{ctx.ticker}:{last_bar.date.isoformat()}",
                timestamp=end_of_day(last_bar.date),
                excerpt=f"close={last_bar.close} volume={last_bar.volume}",
            )
        ],
        rationale=(
            f"Trend {trend:+d}, momentum {momentum:+d}, oscillator {osc:+d} "
            f"combine to score {score:+d} over {len(bars)} bars."
        ),
        metrics={
            "close": close,
            "sma10": sma10,
            "sma20": sma20,
            **({"rsi14": rsi14} if rsi14 == rsi14 else {}),
            "macd": macd_line,
            "macd_signal": macd_sig,
            "macd_hist": macd_hist,
            "score": float(score),
        },
    )


def fundamental_isa(
    ctx: AgentContext,
    pe_high: float = 35.0,
    dte_high: float = 150.0,
    margin_good: float = 0.2,
) -> AgentReport:
    """Valuation/solvency scoring over the latest admissible snapshot.

    Each populated field votes: trailing P/E above pe_high is rich (-1),
    debt-to-equity above dte_high is levered (-1), operating margin at or
    above margin_good is healthy (+1), positive free cash flow is +1.
    Confidence = |score| / populated field count.
    """
    snaps = ctx.snapshot.fundamentals_for(ctx.ticker)
    if not snaps:
        return AgentReport.failure("fundamental", ctx.ticker, ctx.as_of, "no fundamentals as of date")
    snap = snaps[-1]

    votes: list[tuple[str, int, str]] = []
    if snap.trailing_pe is not None:
        v = -1 if snap.trailing_pe > pe_high else 1
        votes.append(("trailing_pe", v, f"trailing P/E {snap.trailing_pe:.1f} vs {pe_high:.0f}"))
    if snap.debt_to_equity is not None:
        v = -1 if snap.debt_to_equity > dte_high else 1
        votes.append(("debt_to_equity", v, f"debt-to-equity {snap.debt_to_equity:.1f} vs {dte_high:.0f}"))
    if snap.operating_margin is not None:
        v = 1 if snap.operating_margin >= margin_good else -1
        votes.append(("operating_margin", v, f"operating margin {snap.operating_margin:.1%}"))
    if snap.free_cash_flow is not None:
        v = 1 if snap.free_cash_flow > 0 else -1
        votes.append(("free_cash_flow", v, f"free cash flow {snap.free_cash_flow:,.0f}"))

    score = sum(v for _, v, _ in votes)
    populated = len(votes)
    stance = BULLISH if score > 0 else (BEARISH if score < 0 else NEUTRAL)
    confidence = abs(score) / populated if populated else 0.0

    metrics = {"score": float(score), "populated_fields": float(populated)}
    for name in ("trailing_pe", "debt_to_equity", "operating_margin", "free_cash_flow", "revenue", "eps"):
        val = getattr(snap, name)
        if val is not None:
            metrics[name] = float(val)

    return AgentReport(
        agent_kind="fundamental",
        ticker=ctx.ticker,
        as_of=ctx.as_of,
        stance=stance,
        confidence=confidence,
        key_findings=[text for _, _, text in votes],
        evidence=[
            Evidence(
                source_id=f"fundamentals:{ctx.ticker}:{snap.as_of.isoformat()}",
                timestamp=end_of_day(snap.as_of),
                excerpt=f"snapshot as of {snap.as_of.isoformat()}",
            )
        ],
        rationale=(
            f"{populated} populated fields vote {score:+d} on financial health "
            f"(filing as of {snap.as_of.isoformat()})."
        ),
        metrics=metrics,
    )


def _item_sentiment(item: NewsItem) -> float:
    if item.sentiment is not None:
        return item.sentiment
    return lexicon_sentiment(f"{item.headline} {item.body}")


def _sentiment_report(
    kind: str, ctx: AgentContext, items: list[NewsItem], window_days: int
) -> AgentReport:
    scored = sorted(
        ((_item_sentiment(n), n) for n in items),
        key=lambda sn: (-abs(sn[0]), sn[1].published_at, sn[1].id),
    )
    if scored:
        s = fmean(sv for sv, _ in scored)
        coverage = min(1.0, len(scored) / 5.0)
        confidence = min(1.0, abs(s) * 2.0) * coverage
        stance = BULLISH if s > 0.15 else (BEARISH if s < -0.15 else NEUTRAL)
    else:
        s, coverage, confidence, stance = 0.0, 0.0, 0.0, NEUTRAL

    top = scored[:5]
    return AgentReport(
        agent_kind=kind,
        ticker=ctx.ticker,
        as_of=ctx.as_of,
        stance=stance,
        confidence=confidence,
        key_findings=[f"{sv:+.2f} {n.headline}" for sv, n in top],
        evidence=[
            Evidence(source_id=f"news:{n.id[:12]}", timestamp=n.published_at, excerpt=n.headline)
            for _, n in top
        ],
        rationale=(
            f"Mean sentiment {s:+.3f} over {len(scored)} item(s) in the "
            f"trailing {window_days}-day window."
        ),
        metrics={"mean_sentiment": s, "item_count": float(len(scored)), "coverage": coverage},
    )


def news_isa(ctx: AgentContext, window_days: int = 7) -> AgentReport:
    """Mean sentiment over ticker-tagged items in the trailing window."""
    since = ctx.as_of - timedelta(days=window_days)
    items = ctx.snapshot.news_for(ctx.ticker, since=since)
    return _sentiment_report("news", ctx, items, window_days)


_default_sector_keywords: list[str] | None = None


def load_sector_keywords(path=None) -> list[str]:
    if path is None:
        text = (resources.files("p1gpt") / "data" / "sector_keywords.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return [
        line.strip().lower()
        for line in text.splitlines()
        if line.strip() and not line.startswith("#")
    ]


def sector_isa(
    ctx: AgentContext, window_days: int = 7, keywords: list[str] | None = None
) -> AgentReport:
    """News scoring restricted to sector/supply-chain keyword matches."""
    global _default_sector_keywords
    if keywords is None:
        if _default_sector_keywords is None:
            _default_sector_keywords = load_sector_keywords()
        keywords = _default_sector_keywords
    since = ctx.as_of - timedelta(days=window_days)
    items = [
        n
        for n in ctx.snapshot.news_for(ctx.ticker, since=since)
        if any(kw in f"{n.headline} {n.body}".lower() for kw in keywords)
    ]
    report = _sentiment_report("sector", ctx, items, window_days)
    return report


def revenue_forecast(ctx: AgentContext, lookback_quarters: int = 4) -> AgentReport:
    """Naive drift forecast over the revenue history (supporting signal)."""
    revenues = [
        (s.as_of, s.revenue)
        for s in ctx.snapshot.fundamentals_for(ctx.ticker)
        if s.revenue is not None
    ]
    if len(revenues) < 2:
        return AgentReport.failure(
            "revenue_forecast", ctx.ticker, ctx.as_of,
            f"needs >= 2 revenue observations, have {len(revenues)}",
        )
    values = [v for _, v in revenues]
    diffs = [b - a for a, b in zip(values[:-1], values[1:])][-lookback_quarters:]
    drift = fmean(diffs)
    forecast = values[-1] + drift
    stance = BULLISH if drift > 0 else (BEARISH if drift < 0 else NEUTRAL)
    last_date = revenues[-1][0]
    return AgentReport(
        agent_kind="revenue_forecast",
        ticker=ctx.ticker,
        as_of=ctx.as_of,
        stance=stance,
        confidence=0.3,
        key_findings=[f"drift {drift:+,.0f} per period", f"next revenue ~ {forecast:,.0f}"],
        evidence=[
            Evidence(
                source_id=f"fundamentals:{ctx.ticker}:{last_date.isoformat()}",
                timestamp=end_of_day(last_date),
                excerpt=f"revenue history of {len(values)} observations",
            )
        ],
        rationale=f"Mean successive revenue change {drift:+,.0f} extrapolated one period ahead.",
        metrics={"forecast": forecast, "drift": drift, "observations": float(len(values))},
    )


# -- external search (interface + fixture stub) -------------------------------

class SearchAgent:
    """Interface for real-time retrieval; production clients are out of scope."""

    def search(self, query: str, as_of: datetime) -> list[dict]:
        raise NotImplementedError


class FixtureSearchAgent(SearchAgent):
    """Serves canned results from a JSON fixture, filtered by the as-of bound."""

    def __init__(self, path):
        with open(path, encoding="utf-8") as fh:
            self._rows = json.load(fh)

    def search(self, query: str, as_of: datetime) -> list[dict]:
        q = query.lower()
        out = []
        for row in self._rows:
            ts = _parse_timestamp(row["timestamp"])
            if ts > as_of:
                continue
            if any(tok in row["text"].lower() for tok in q.split()):
                out.append({"timestamp": ts.isoformat(), "text": row["text"], "source": row.get("source", "fixture")})
        return out


# -- LLM adapter ---------------------------------------------------------------

REPORT_WIRE_SCHEMA = {
    "type": "object",
    "required": [
        "agent_kind", "ticker", "as_of", "stance", "confidence",
        "key_findings", "evidence", "rationale", "metrics",
    ],
    "properties": {
        "agent_kind": {"type": "string"},
        "ticker": {"type": "string"},
        "as_of": {"type": "string"},
        "stance": {"enum": [BULLISH, BEARISH, NEUTRAL]},
        "confidence": {"type": "number", "minimum": 0, "maximum": 1},
        "key_findings": {"type": "array", "items": {"type": "string"}},
        "evidence": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["source_id", "timestamp", "excerpt"],
                "properties": {
                    "source_id": {"type": "string"},
                    "timestamp": {"type": "string"},
                    "excerpt": {"type": "string"},
                },
            },
        },
        "rationale": {"type": "string"},
        "metrics": {"type": "object", "additionalProperties": {"type": "number"}},
        "round": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}


@dataclass
class LLMEndpointConfig:
    url: str
    token_env: str = "P1_LLM_TOKEN"
    timeout: float = 30.0
    max_retries: int = 2
    backoff_base: float = 0.5
    max_concurrency: int = 4


_sem_guard = threading.Lock()


def _concurrency_gate(cfg: LLMEndpointConfig) -> threading.BoundedSemaphore:
    """At most max_concurrency requests in flight per endpoint config."""
    with _sem_guard:
        sem = getattr(cfg, "_gate", None)
        if sem is None:
            sem = threading.BoundedSemaphore(cfg.max_concurrency)
            cfg._gate = sem
        return sem


class TransportError(RuntimeError):
    pass


def _http_transport(cfg: LLMEndpointConfig, body: dict) -> str:
    headers = {"Content-Type": "application/json"}
    token = os.environ.get(cfg.token_env, "")
    if token:
        headers["Authorization"] = f"Bearer {token}"
    try:
        resp = requests.post(cfg.url, json=body, headers=headers, timeout=cfg.timeout)
        resp.raise_for_status()
        return resp.text
    except requests.RequestException as exc:
        raise TransportError(str(exc)) from exc


def render_prompt(task_kind: str, ctx: AgentContext, template_dir=None) -> str:
    """Fill the task-kind template with ticker/as-of/enrichment placeholders."""
    name = f"{task_kind}.txt"
    if template_dir is None:
        template = (resources.files("p1gpt") / "data" / "prompts" / name).read_text("utf-8")
    else:
        with open(os.path.join(template_dir, name), encoding="utf-8") as fh:
            template = fh.read()
    return template.format(
        ticker=ctx.ticker,
        as_of=ctx.as_of.isoformat(),
        enrichment=ctx.enrichment or "none",
    )


def snapshot_excerpts(ctx: AgentContext, max_bars: int = 20, max_news: int = 10) -> list[str]:
    """Compact, deterministic slices of the snapshot for the request body."""
    out = []
    bars = ctx.snapshot.bars_for(ctx.ticker)[-max_bars:]
    if bars:
        rows = "; ".join(f"{b.date.isoformat()} c={b.close}" for b in bars)
        out.append(f"bars: {rows}")
    for n in ctx.snapshot.news_for(ctx.ticker)[-max_news:]:
        out.append(f"news[{n.published_at.isoformat()}]: {n.headline}")
    for s in ctx.snapshot.fundamentals_for(ctx.ticker)[-2:]:
        out.append(
            f"fundamentals[{s.as_of.isoformat()}]: pe={s.trailing_pe} dte={s.debt_to_equity} "
            f"margin={s.operating_margin} fcf={s.free_cash_flow} revenue={s.revenue}"
        )
    return out


def _parse_wire_report(text: str, ctx: AgentContext) -> AgentReport:
    """Decode + schema-validate a wire report; raises ValueError on any defect."""
    raw = json.loads(text)
    jsonschema.validate(raw, REPORT_WIRE_SCHEMA)
    evidence = [
        Evidence(
            source_id=e["source_id"],
            timestamp=_parse_timestamp(e["timestamp"]),
            excerpt=e["excerpt"],
        )
        for e in raw["evidence"]
    ]
    report = AgentReport(
        agent_kind=raw["agent_kind"],
        ticker=raw["ticker"],
        as_of=_parse_timestamp(raw["as_of"]),
        stance=raw["stance"],
        confidence=float(raw["confidence"]),
        key_findings=list(raw["key_findings"]),
        evidence=evidence,
        rationale=raw["rationale"],
        metrics={k: float(v) for k, v in raw["metrics"].items()},
        round=int(raw.get("round", 1)),
    )
    violations = check_evidence_bound(report, ctx.as_of)
    if violations:
        raise ValueError(f"evidence after as-of bound: {', '.join(violations)}")
    return report


def llm_agent(
    ctx: AgentContext,
    endpoint_config: LLMEndpointConfig,
    transport=None,
    sleep=time_mod.sleep,
) -> AgentReport:
    """One agent task over the wire.

    Transport failures retry up to max_retries with exponential backoff;
    a schema-invalid response earns exactly one repair reprompt quoting
    the validation error. Anything beyond that is a failed report. The
    returned report carries the attempt count in metrics["llm_attempts"].
    """
    transport = transport or (lambda body: _http_transport(endpoint_config, body))
    body = {
        "task_kind": ctx.task.kind,
        "ticker": ctx.ticker,
        "as_of": ctx.as_of.isoformat(),
        "context_excerpts": [render_prompt(ctx.task.kind, ctx)] + snapshot_excerpts(ctx),
        "report_schema_version": REPORT_SCHEMA_VERSION,
    }

    gate = _concurrency_gate(endpoint_config)
    attempts = 0
    repaired = False
    request = body
    while True:
        text = None
        for retry in range(endpoint_config.max_retries + 1):
            try:
                attempts += 1
                with gate:
                    text = transport(request)
                break
            except TransportError as exc:
                if retry == endpoint_config.max_retries:
                    return AgentReport.failure(
                        ctx.task.kind, ctx.ticker, ctx.as_of, f"transport failure: {exc}"
                    )
                sleep(endpoint_config.backoff_base * (2 ** retry))
        try:
            report = _parse_wire_report(text, ctx)
            report.metrics["llm_attempts"] = float(attempts)
            return report
        except (ValueError, jsonschema.ValidationError) as exc:
            if repaired:
                return AgentReport.failure(
                    ctx.task.kind, ctx.ticker, ctx.as_of, f"schema-invalid response: {exc}"
                )
            repaired = True
            request = dict(body)
            request["context_excerpts"] = body["context_excerpts"] + [
                f"REPAIR: your previous response failed validation: {exc}. "
                f"Reply with a single JSON object matching the report schema."
            ]
