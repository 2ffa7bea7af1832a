"""Daily backtest loop.

For each trading day in range: build the as-of snapshot (or take the
pre-generated baseline signal), obtain one requested action, push it
through the long-only execution policy at the same day's closing price,
and mark equity. No transaction costs, no leverage, one position.

The multi-agent mode re-runs the full layer chain every day against a
snapshot sealed at that day's close, so decisions are lookahead-free by
construction and replays are byte-identical with the reference agents.

Run directory layout:

    runs/<run_id>/
        config.snapshot     resolved configuration (canonical JSON)
        tradelog.jsonl      one entry per day
        equity.csv          date,value
        metrics.json        CR/AR/SR/MDD
        reports/<date>.txt  per-day investment report (agent modes)
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from datetime import date as Date, datetime, timezone

from . import baselines, fusion as fusion_mod, metrics as metrics_mod, pipeline
from .agents import (
    fundamental_isa,
    news_isa,
    revenue_forecast,
    sector_isa,
    technical_isa,
)
from .baselines import Action, Signal, StrategyConfig
from .marketdata import PointInTimeStore, end_of_day
from .metrics import EquityCurve, MetricsReport


class GapError(ValueError):
    """Bars missing inside the requested range."""

    def __init__(self, ticker, missing):
        self.missing = list(missing)
        days = ", ".join(d.isoformat() for d in self.missing)
        super().__init__(f"{ticker}: no bar for expected trading day(s): {days}")


REFERENCE_REGISTRY = {
    "technical": technical_isa,
    "fundamental": fundamental_isa,
    "news": news_isa,
    "sector": sector_isa,
    "revenue_forecast": revenue_forecast,
}


@dataclass
class PortfolioState:
    cash: float
    shares: float = 0.0

    @property
    def position(self) -> str:
        return "long" if self.shares > 0 else "flat"

    def equity(self, close: float) -> float:
        return self.cash + self.shares * close


def execute_policy(state: PortfolioState, action: Action, close_price: float):
    """Long-only single-position state machine at the closing price.

    Buy while flat invests all cash; Sell while long liquidates; anything
    else is a no-op executed as Hold. Returns (new_state, executed).
    """
    if close_price <= 0:
        raise ValueError(f"close price must be positive, got {close_price}")
    if action == Action.BUY and state.position == "flat" and state.cash > 0:
        return PortfolioState(cash=0.0, shares=state.cash / close_price), Action.BUY
    if action == Action.SELL and state.position == "long":
        return PortfolioState(cash=state.shares * close_price, shares=0.0), Action.SELL
    return PortfolioState(cash=state.cash, shares=state.shares), Action.HOLD


@dataclass
class TradeEntry:
    date: Date
    requested: Action
    executed: Action
    price: float
    shares: float
    equity_after: float
    rationale_ref: str = ""

    def to_dict(self) -> dict:
        return {
            "date": self.date.isoformat(),
            "requested": self.requested.value,
            "executed": self.executed.value,
            "price": self.price,
            "shares": self.shares,
            "equity_after": self.equity_after,
            "rationale_ref": self.rationale_ref,
        }


@dataclass
class TradeLog:
    entries: list[TradeEntry] = field(default_factory=list)

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(e.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"
            for e in self.entries
        )

    def executed_trades(self) -> list[TradeEntry]:
        return [e for e in self.entries if e.executed != Action.HOLD]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class AgentModeConfig:
    """Configuration for the multi-agent decision mode."""

    registry: dict = field(default_factory=lambda: dict(REFERENCE_REGISTRY))
    horizon: pipeline.Horizon = pipeline.Horizon.MEDIUM
    weights: dict | None = None
    conf_floor: float = 0.6
    buy_threshold: float = 0.15
    sell_threshold: float = -0.15
    max_rounds: int = 2
    include_revenue_forecast: bool = False
    exclude_decision_day_close: bool = False
    query_template: str = "Given today's market conditions, should I buy, sell, or hold {ticker}?"
    aliases: dict | None = None  # custom ALIAS -> TICKER table
    # Optional narrative hook: fn(view, decision) -> paragraph. Appended to
    # the rationale only; the action always comes from the deterministic rule.
    synthesis_agent: object | None = None


@dataclass
class BacktestResult:
    run_id: str
    ticker: str
    tradelog: TradeLog
    curve: EquityCurve
    metrics: MetricsReport
    config_snapshot: dict
    reports: dict[str, str] = field(default_factory=dict)  # date iso -> document
    notes: list[str] = field(default_factory=list)


def _trading_days(store: PointInTimeStore, ticker: str, start: Date, end: Date) -> list[Date]:
    bars = store.bars.get(ticker.upper(), [])
    if not bars:
        raise GapError(ticker, [start])
    first, last = bars[0].date, bars[-1].date
    if start < first or end > last:
        raise ValueError(
            f"{ticker}: bars cover {first.isoformat()}..{last.isoformat()}, "
            f"requested {start.isoformat()}..{end.isoformat()}"
        )
    days = [b.date for b in bars if start <= b.date <= end]
    expected = [d for d in store.all_trading_days() if start <= d <= end]
    missing = sorted(set(expected) - set(days))
    if missing:
        raise GapError(ticker, missing)
    return days


def _available_modalities(snapshot, ticker: str) -> set[str]:
    mods = set()
    if snapshot.bars_for(ticker):
        mods.add("bars")
    if snapshot.news:
        mods.add("news")
    if snapshot.fundamentals_for(ticker):
        mods.add("fundamentals")
    return mods


def _agent_mode_action(store, ticker, day, cfg: AgentModeConfig):
    """One day through the layer chain; degrades to Hold on hard failure.

    Returns (requested_action, view, decision, failure_note); view and
    decision are None on the fail-safe path.
    """
    as_of = end_of_day(day)
    snapshot = store.as_of(as_of, exclude_decision_day_close=cfg.exclude_decision_day_close)
    try:
        query = pipeline.parse_query(
            cfg.query_template.format(ticker=ticker), as_of, aliases=cfg.aliases
        )
        plan = pipeline.build_plan(
            query,
            _available_modalities(snapshot, ticker),
            max_rounds=cfg.max_rounds,
            include_revenue_forecast=cfg.include_revenue_forecast,
        )
        outcome = pipeline.execute_plan(
            plan,
            snapshot,
            cfg.registry,
            horizon=cfg.horizon,
            weights=cfg.weights,
            conf_floor=cfg.conf_floor,
            buy_threshold=cfg.buy_threshold,
            sell_threshold=cfg.sell_threshold,
        )
    except (pipeline.EmptyPlanError, pipeline.UnresolvedEntityError) as exc:
        return Action.HOLD, None, None, f"fail-safe Hold: {exc}"
    if outcome.failed:
        reason = "; ".join(outcome.notes) or "no decision produced"
        return Action.HOLD, None, None, f"fail-safe Hold: {reason}"
    if cfg.synthesis_agent is not None:
        try:
            paragraph = cfg.synthesis_agent(outcome.view, outcome.decision)
            if paragraph:
                outcome.decision.rationale += f"\nSynthesis: {paragraph}"
        except Exception:
            pass  # narrative only; never blocks the decision
    return outcome.decision.action, outcome.view, outcome.decision, None


def run_backtest(
    store: PointInTimeStore,
    ticker: str,
    start: Date,
    end: Date,
    strategy: "StrategyConfig | AgentModeConfig",
    initial_cash: float,
    annual_rf: float = 0.0,
    annualize: bool = True,
    run_id: str | None = None,
    config_snapshot: dict | None = None,
    decision_queue=None,
    pending_timeout: float | None = None,
) -> BacktestResult:
    """Simulate one (ticker, strategy) pair over [start, end].

    With a decision_queue the run is interactive: each day's action is
    enqueued and the loop blocks until an operator resolves it (approve,
    override, or expiry -> Hold).
    """
    if initial_cash <= 0:
        raise ValueError(f"initial_cash must be positive, got {initial_cash}")
    ticker = ticker.upper()
    days = _trading_days(store, ticker, start, end)
    bars_by_date = {b.date: b for b in store.bars[ticker]}

    signal_by_date: dict[Date, Action] = {}
    agent_cfg = None
    if isinstance(strategy, StrategyConfig):
        range_bars = [bars_by_date[d] for d in days]
        for sig in baselines.generate_signals(range_bars, strategy):
            signal_by_date[sig.date] = sig.action
        strategy_name = strategy.name
    elif isinstance(strategy, AgentModeConfig):
        agent_cfg = strategy
        strategy_name = "P1GPT"
    else:
        raise TypeError(f"unsupported strategy spec: {type(strategy).__name__}")

    snapshot_cfg = dict(config_snapshot or {})
    snapshot_cfg.setdefault("ticker", ticker)
    snapshot_cfg.setdefault("start", start.isoformat())
    snapshot_cfg.setdefault("end", end.isoformat())
    snapshot_cfg.setdefault("strategy", strategy_name)
    snapshot_cfg.setdefault("initial_cash", initial_cash)
    if run_id is None:
        run_id = make_run_id(snapshot_cfg)

    state = PortfolioState(cash=float(initial_cash))
    log = TradeLog()
    curve_points = []
    reports: dict[str, str] = {}
    notes: list[str] = []

    for day in days:
        bar = bars_by_date[day]
        rationale_ref = ""
        view = decision = None
        if agent_cfg is not None:
            requested, view, decision, failure = _agent_mode_action(store, ticker, day, agent_cfg)
            if decision is not None:
                rationale_ref = f"reports/{day.isoformat()}.txt"
            if failure is not None:
                notes.append(f"{day.isoformat()}: {failure}")
                rationale_ref = failure
        else:
            requested = signal_by_date.get(day, Action.HOLD)
            rationale_ref = f"signal:{strategy_name}"

        to_execute = requested
        if decision_queue is not None:
            # Interactive: the log keeps the original proposal as `requested`,
            # the operator's resolution is what reaches the policy.
            to_execute, resolution = _resolve_interactively(
                decision_queue, run_id, ticker, day, requested, rationale_ref, pending_timeout
            )
            if decision is not None and resolution is not None and resolution.kind == "override":
                decision.overridden = (resolution.action, resolution.operator_id, resolution.note)

        if decision is not None:
            reports[day.isoformat()] = fusion_mod.render_report(view, decision)

        state, executed = execute_policy(state, to_execute, bar.close)
        equity = state.equity(bar.close)
        log.entries.append(
            TradeEntry(
                date=day,
                requested=requested,
                executed=executed,
                price=bar.close,
                shares=state.shares,
                equity_after=equity,
                rationale_ref=rationale_ref,
            )
        )
        curve_points.append((day, equity))

    curve = EquityCurve(curve_points)
    report = metrics_mod.compute_all(curve, annual_rf=annual_rf, annualize=annualize)
    return BacktestResult(
        run_id=run_id,
        ticker=ticker,
        tradelog=log,
        curve=curve,
        metrics=report,
        config_snapshot=snapshot_cfg,
        reports=reports,
        notes=notes,
    )


def _resolve_interactively(queue, run_id, ticker, day, requested, rationale_ref, timeout):
    """Enqueue the day's proposal and block until resolved or expired.

    Returns (action_to_execute, resolution_or_None).
    """
    proposed = {
        "ticker": ticker,
        "date": day.isoformat(),
        "action": requested.value,
        "rationale_ref": rationale_ref,
    }
    pid = queue.enqueue(proposed, run_id)
    resolved = queue.wait_for(pid, timeout=timeout)
    if resolved is None:
        # Deadline passed (or explicit expiry); the queue state is the truth
        # in case a resolution slipped in just before the expire event.
        item = queue.expire(pid)
        if item.status in ("approved", "overridden"):
            return Action(item.resolution.action), item.resolution
        return Action.HOLD, item.resolution
    return Action(resolved.resolution.action), resolved.resolution


def make_run_id(config_snapshot: dict, now: datetime | None = None) -> str:
    """Timestamp plus a short hash of the resolved configuration."""
    now = now or datetime.now(timezone.utc)
    digest = hashlib.sha256(
        json.dumps(config_snapshot, sort_keys=True, separators=(",", ":"), default=str).encode()
    ).hexdigest()[:8]
    return f"{now.strftime('%Y%m%dT%H%M%SZ')}-{digest}"


# -- run directory -------------------------------------------------------------

def equity_csv(curve: EquityCurve) -> str:
    lines = ["date,value"]
    lines += [f"{d.isoformat()},{v!r}" for d, v in curve]
    return "\n".join(lines) + "\n"


def signals_csv(log: TradeLog) -> str:
    """Non-Hold executed entries: the chart marker source."""
    lines = ["date,action,price"]
    lines += [
        f"{e.date.isoformat()},{e.executed.value},{e.price!r}"
        for e in log.executed_trades()
    ]
    return "\n".join(lines) + "\n"


def position_csv(log: TradeLog) -> str:
    lines = ["date,position,shares"]
    lines += [
        f"{e.date.isoformat()},{'long' if e.shares > 0 else 'flat'},{e.shares!r}"
        for e in log.entries
    ]
    return "\n".join(lines) + "\n"


def metrics_json(report: MetricsReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"


def read_tradelog(path) -> TradeLog:
    """Parse a tradelog.jsonl back into a TradeLog."""
    log = TradeLog()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            log.entries.append(
                TradeEntry(
                    date=Date.fromisoformat(raw["date"]),
                    requested=Action(raw["requested"]),
                    executed=Action(raw["executed"]),
                    price=float(raw["price"]),
                    shares=float(raw["shares"]),
                    equity_after=float(raw["equity_after"]),
                    rationale_ref=raw.get("rationale_ref", ""),
                )
            )
    return log


def write_run_dir(result: BacktestResult, runs_root) -> str:
    """Persist a completed run; returns the run directory path."""
    run_dir = os.path.join(str(runs_root), result.run_id)
    os.makedirs(os.path.join(run_dir, "reports"), exist_ok=True)
    with open(os.path.join(run_dir, "config.snapshot"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(result.config_snapshot, sort_keys=True, indent=2, default=str) + "\n")
    with open(os.path.join(run_dir, "tradelog.jsonl"), "w", encoding="utf-8") as fh:
        fh.write(result.tradelog.to_jsonl())
    with open(os.path.join(run_dir, "equity.csv"), "w", encoding="utf-8") as fh:
        fh.write(equity_csv(result.curve))
    with open(os.path.join(run_dir, "metrics.json"), "w", encoding="utf-8") as fh:
        fh.write(metrics_json(result.metrics))
    for date_iso, document in result.reports.items():
        with open(os.path.join(run_dir, "reports", f"{date_iso}.txt"), "w", encoding="utf-8") as fh:
            fh.write(document)
    if result.notes:
        with open(os.path.join(run_dir, "notes.txt"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(result.notes) + "\n")
    return run_dir


# -- strategy comparison --------------------------------------------------------

@dataclass
class ComparisonRow:
    name: str
    metrics: MetricsReport | None
    error: str | None = None
    flags: set[str] = field(default_factory=set)


def compare_strategies(
    store: PointInTimeStore,
    ticker: str,
    start: Date,
    end: Date,
    strategies: list[tuple[str, "StrategyConfig | AgentModeConfig"]],
    initial_cash: float,
    annual_rf: float = 0.0,
    annualize: bool = True,
) -> list[ComparisonRow]:
    """One row per strategy; best CR/AR/SR (max) and MDD (min) flagged."""
    rows = []
    for name, spec in strategies:
        try:
            result = run_backtest(
                store, ticker, start, end, spec, initial_cash,
                annual_rf=annual_rf, annualize=annualize,
            )
            rows.append(ComparisonRow(name=name, metrics=result.metrics))
        except Exception as exc:
            rows.append(ComparisonRow(name=name, metrics=None, error=str(exc)))

    def flag(metric: str, key, best):
        scored = [(key(r.metrics), r) for r in rows if r.metrics is not None]
        scored = [(v, r) for v, r in scored if v is not None]
        if scored:
            target = best(v for v, _ in scored)
            for v, r in scored:
                if v == target:
                    r.flags.add(metric)

    flag("cr", lambda m: m.cr_pct, max)
    flag("ar", lambda m: m.ar_pct, max)
    flag("sr", lambda m: m.sharpe, max)
    flag("mdd", lambda m: m.mdd_pct, min)
    return rows


def comparison_to_dict(ticker: str, start: Date, end: Date, rows: list[ComparisonRow]) -> dict:
    return {
        "ticker": ticker,
        "start": start.isoformat(),
        "end": end.isoformat(),
        "rows": [
            {
                "strategy": r.name,
                "cr_pct": None if r.metrics is None else r.metrics.cr_pct,
                "ar_pct": None if r.metrics is None else r.metrics.ar_pct,
                "sharpe": None if r.metrics is None else r.metrics.sharpe,
                "mdd_pct": None if r.metrics is None else r.metrics.mdd_pct,
                "best": sorted(r.flags),
                "error": r.error,
            }
            for r in rows
        ],
    }


def render_comparison(ticker: str, rows: list[ComparisonRow]) -> str:
    """Aligned text table; *best* markers on CR/AR/SR max and MDD min."""

    def cell(value, flagged):
        if value is None:
            return "-"
        text = f"{value:.2f}"
        return f"*{text}*" if flagged else text

    header = ["Strategy", "CR%", "AR%", "SR", "MDD%"]
    body = []
    for r in rows:
        if r.metrics is None:
            body.append([r.name, "-", "-", "-", "-"])
            continue
        m = r.metrics
        body.append(
            [
                r.name,
                cell(m.cr_pct, "cr" in r.flags),
                cell(m.ar_pct, "ar" in r.flags),
                cell(m.sharpe, "sr" in r.flags),
                cell(m.mdd_pct, "mdd" in r.flags),
            ]
        )
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = [f"Performance comparison: {ticker} (lower is better for MDD)"]
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"
