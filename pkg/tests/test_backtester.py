"""Execution policy, daily loop, run directories and strategy comparison."""

import json
import threading
from datetime import date

import numpy as np
import pytest

from p1gpt.backtester import (
    AgentModeConfig,
    GapError,
    PortfolioState,
    compare_strategies,
    equity_csv,
    execute_policy,
    position_csv,
    read_tradelog,
    run_backtest,
    signals_csv,
    write_run_dir,
)
from p1gpt.baselines import Action, StrategyConfig
from p1gpt.marketdata import Bar

from helpers import make_bars, random_store, store_with_bars


# -- execute_policy ---------------------------------------------------------------

def test_buy_while_flat_invests_all_cash():
    state, executed = execute_policy(PortfolioState(cash=100.0), Action.BUY, 25.0)
    assert executed == Action.BUY
    assert state.shares == 4.0 and state.cash == 0.0
    assert state.position == "long"


def test_sell_while_long_liquidates():
    state, executed = execute_policy(PortfolioState(cash=0.0, shares=4.0), Action.SELL, 30.0)
    assert executed == Action.SELL
    assert state.cash == 120.0 and state.shares == 0.0


def test_sell_while_flat_is_hold():
    before = PortfolioState(cash=50.0)
    state, executed = execute_policy(before, Action.SELL, 10.0)
    assert executed == Action.HOLD
    assert state.cash == before.cash and state.shares == 0.0


def test_buy_while_long_is_hold():
    state, executed = execute_policy(PortfolioState(cash=0.0, shares=2.0), Action.BUY, 10.0)
    assert executed == Action.HOLD and state.shares == 2.0


def test_close_price_must_be_positive():
    with pytest.raises(ValueError):
        execute_policy(PortfolioState(cash=1.0), Action.BUY, 0.0)


# -- baseline runs -----------------------------------------------------------------

def rw_store(n=120, seed=61):
    rng = np.random.default_rng(seed)
    closes = 100 * np.exp(np.cumsum(rng.normal(0.0005, 0.015, n)))
    return store_with_bars(closes)


def span(store, ticker="SYN"):
    days = store.trading_days(ticker)
    return days[0], days[-1]


def test_bh_cr_matches_asset_return_closed_form():
    store = rw_store()
    start, end = span(store)
    result = run_backtest(store, "SYN", start, end, StrategyConfig("BH"), 10_000.0)
    closes = [b.close for b in store.bars["SYN"]]
    want = (closes[-1] - closes[0]) / closes[0] * 100
    assert result.metrics.cr_pct == pytest.approx(want, abs=1e-9)


def test_all_hold_keeps_equity_constant():
    store = store_with_bars([100.0 + (i % 7) for i in range(60)])
    start, end = span(store)
    # ZMR never fires inside its bands on this gentle pattern with a huge entry bar
    result = run_backtest(store, "SYN", start, end, StrategyConfig("ZMR", {"entry_z": -50.0}), 5_000.0)
    assert all(v == 5_000.0 for _, v in result.curve)
    assert result.metrics.mdd_pct == 0.0
    assert result.tradelog.executed_trades() == []


def test_cash_and_shares_never_negative():
    store = rw_store(seed=62)
    start, end = span(store)
    result = run_backtest(store, "SYN", start, end, StrategyConfig("SMA", {"fast": 5, "slow": 15}), 1_000.0)
    closes = {b.date: b.close for b in store.bars["SYN"]}
    cash = 1_000.0
    for e in result.tradelog.entries:
        assert e.shares >= 0.0
        assert e.equity_after > 0.0
        if e.executed == Action.BUY:
            cash = 0.0
        elif e.executed == Action.SELL:
            cash = e.equity_after
        assert cash >= 0.0


def test_equity_changes_only_while_long():
    store = rw_store(seed=63)
    start, end = span(store)
    result = run_backtest(store, "SYN", start, end, StrategyConfig("MACD"), 2_000.0)
    prev_equity = 2_000.0
    prev_long = False
    for e in result.tradelog.entries:
        if not prev_long and e.executed != Action.BUY:
            assert e.equity_after == prev_equity
        prev_long = e.shares > 0
        prev_equity = e.equity_after


def test_range_not_covered_raises():
    store = store_with_bars([100.0] * 10)
    days = store.trading_days("SYN")
    with pytest.raises(ValueError):
        run_backtest(store, "SYN", days[0], date(2030, 1, 1), StrategyConfig("BH"), 1_000.0)


def test_gap_inside_range_raises_with_dates():
    store = store_with_bars([100.0] * 10)
    other = store_with_bars([50.0] * 10, ticker="OTH")
    store.bars["OTH"] = other.bars["OTH"]
    removed = store.bars["SYN"].pop(5)
    days = store.trading_days("SYN")
    with pytest.raises(GapError) as err:
        run_backtest(store, "SYN", days[0], days[-1], StrategyConfig("BH"), 1_000.0)
    assert removed.date in err.value.missing


def test_requested_vs_executed_recorded():
    store = store_with_bars([100.0] * 40 + [110.0] * 10)
    start, end = span(store)
    result = run_backtest(store, "SYN", start, end, StrategyConfig("SMA"), 1_000.0)
    buys = [e for e in result.tradelog.entries if e.requested == Action.BUY]
    assert len(buys) == 1
    assert buys[0].executed == Action.BUY


# -- agent-mode runs ------------------------------------------------------------------

def test_agent_mode_replays_byte_identically():
    rng = np.random.default_rng(64)
    store = random_store(rng, n_days=70)
    days = store.trading_days("SYN")
    start, end = days[40], days[-1]
    a = run_backtest(store, "SYN", start, end, AgentModeConfig(), 10_000.0, run_id="fixed")
    b = run_backtest(store, "SYN", start, end, AgentModeConfig(), 10_000.0, run_id="fixed")
    assert a.tradelog.to_jsonl() == b.tradelog.to_jsonl()
    assert a.reports == b.reports


def test_agent_mode_writes_reports_and_rationale_refs():
    rng = np.random.default_rng(65)
    store = random_store(rng, n_days=70)
    days = store.trading_days("SYN")
    result = run_backtest(store, "SYN", days[45], days[50], AgentModeConfig(), 10_000.0)
    for e in result.tradelog.entries:
        assert e.rationale_ref.startswith("reports/")
        assert e.date.isoformat() in result.reports


def test_agent_mode_lookahead_immune_to_future_mutations():
    rng = np.random.default_rng(66)
    store = random_store(rng, n_days=70)
    days = store.trading_days("SYN")
    day = days[50]
    base = run_backtest(store, "SYN", days[45], day, AgentModeConfig(), 10_000.0, run_id="x")
    # rewrite everything after `day`
    store.bars["SYN"] = [
        b if b.date <= day else Bar(b.ticker, b.date, b.open, b.high * 2, b.low / 2, b.close * 1.5, 1)
        for b in store.bars["SYN"]
    ]
    from p1gpt.marketdata import end_of_day

    store.news = [n for n in store.news if n.published_at <= end_of_day(day)]
    again = run_backtest(store, "SYN", days[45], day, AgentModeConfig(), 10_000.0, run_id="x")
    assert again.tradelog.to_jsonl() == base.tradelog.to_jsonl()


def test_agent_mode_synthesis_hook_extends_rationale_only():
    rng = np.random.default_rng(75)
    store = random_store(rng, n_days=70)
    days = store.trading_days("SYN")
    plain = run_backtest(store, "SYN", days[45], days[48], AgentModeConfig(), 10_000.0, run_id="s")
    cfg = AgentModeConfig(synthesis_agent=lambda view, decision: "narrative paragraph")
    styled = run_backtest(store, "SYN", days[45], days[48], cfg, 10_000.0, run_id="s")
    # the action stream is untouched; the reports carry the extra paragraph
    assert [e.executed for e in styled.tradelog.entries] == [e.executed for e in plain.tradelog.entries]
    assert all("Synthesis: narrative paragraph" in doc for doc in styled.reports.values())
    assert all("Synthesis" not in doc for doc in plain.reports.values())


def test_agent_mode_custom_alias_table():
    rng = np.random.default_rng(76)
    store = random_store(rng, n_days=70, ticker="ZZZQ")
    days = store.trading_days("ZZZQ")
    cfg = AgentModeConfig(aliases={"ZZZQ": "ZZZQ"})
    result = run_backtest(store, "ZZZQ", days[45], days[47], cfg, 10_000.0)
    assert len(result.tradelog.entries) == 3
    assert not result.notes  # the query resolved against the custom table


def test_agent_mode_insufficient_history_degrades_to_hold():
    store = store_with_bars([100.0] * 10)  # far below the technical minimum
    days = store.trading_days("SYN")
    result = run_backtest(store, "SYN", days[0], days[-1], AgentModeConfig(), 1_000.0)
    assert all(e.executed == Action.HOLD for e in result.tradelog.entries)
    assert result.notes  # every day recorded a fail-safe note


# -- interactive runs -----------------------------------------------------------------

def auto_approver(queue, stop):
    while not stop.is_set():
        for item in queue.pending():
            try:
                queue.resolve(item.id, "approve", operator_id="script")
            except Exception:
                pass
        stop.wait(0.005)


def test_interactive_auto_approve_equals_non_interactive(tmp_path):
    from p1gpt.service import DecisionQueue

    rng = np.random.default_rng(67)
    store = random_store(rng, n_days=70)
    days = store.trading_days("SYN")
    start, end = days[40], days[55]

    plain = run_backtest(store, "SYN", start, end, AgentModeConfig(), 10_000.0, run_id="r1")

    queue = DecisionQueue(tmp_path / "journal.jsonl")
    stop = threading.Event()
    approver = threading.Thread(target=auto_approver, args=(queue, stop), daemon=True)
    approver.start()
    try:
        interactive = run_backtest(
            store, "SYN", start, end, AgentModeConfig(), 10_000.0,
            run_id="r1", decision_queue=queue, pending_timeout=10.0,
        )
    finally:
        stop.set()
        approver.join()
    assert interactive.tradelog.to_jsonl() == plain.tradelog.to_jsonl()


def test_interactive_override_records_requested_and_executed(tmp_path):
    from p1gpt.service import DecisionQueue

    store = store_with_bars([100.0] * 40 + [110.0] * 10)
    start, end = span(store)

    queue = DecisionQueue(tmp_path / "journal.jsonl")
    stop = threading.Event()

    def overrider():
        while not stop.is_set():
            for item in queue.pending():
                if item.proposed["action"] == "Buy":
                    queue.resolve(item.id, "override", "ops", new_action="Hold", note="hold the line")
                else:
                    queue.resolve(item.id, "approve", "ops")
            stop.wait(0.005)

    t = threading.Thread(target=overrider, daemon=True)
    t.start()
    try:
        result = run_backtest(
            store, "SYN", start, end, StrategyConfig("SMA"), 1_000.0,
            decision_queue=queue, pending_timeout=10.0,
        )
    finally:
        stop.set()
        t.join()
    requested_buys = [e for e in result.tradelog.entries if e.requested == Action.BUY]
    assert requested_buys and all(e.executed == Action.HOLD for e in requested_buys)
    assert result.tradelog.executed_trades() == []
    # metrics computed from executed actions only: flat equity
    assert result.metrics.cr_pct == 0.0


def test_interactive_override_appends_note_to_report(tmp_path):
    from p1gpt.service import DecisionQueue

    rng = np.random.default_rng(74)
    store = random_store(rng, n_days=70)
    days = store.trading_days("SYN")
    queue = DecisionQueue(tmp_path / "journal.jsonl")
    stop = threading.Event()

    def overrider():
        while not stop.is_set():
            for item in queue.pending():
                new_action = "Hold" if item.proposed["action"] != "Hold" else "Buy"
                queue.resolve(item.id, "override", "ops-7", new_action=new_action, note="risk freeze")
            stop.wait(0.005)

    t = threading.Thread(target=overrider, daemon=True)
    t.start()
    try:
        result = run_backtest(
            store, "SYN", days[45], days[50], AgentModeConfig(), 10_000.0,
            decision_queue=queue, pending_timeout=10.0,
        )
    finally:
        stop.set()
        t.join()
    assert result.reports
    assert all("OVERRIDE: ops-7" in doc for doc in result.reports.values())
    assert all("risk freeze" in doc for doc in result.reports.values())


def test_interactive_expiry_degrades_to_hold(tmp_path):
    from p1gpt.service import DecisionQueue

    store = store_with_bars([100.0] * 40 + [110.0] * 10)
    start, end = span(store)
    queue = DecisionQueue(tmp_path / "journal.jsonl")
    result = run_backtest(
        store, "SYN", start, end, StrategyConfig("SMA"), 1_000.0,
        decision_queue=queue, pending_timeout=0.01,
    )
    assert result.tradelog.executed_trades() == []
    statuses = {i.status for i in queue.all_items()}
    assert statuses == {"expired"}


# -- run directory ---------------------------------------------------------------------

def test_write_run_dir_layout(tmp_path):
    rng = np.random.default_rng(68)
    store = random_store(rng, n_days=70)
    days = store.trading_days("SYN")
    result = run_backtest(store, "SYN", days[45], days[55], AgentModeConfig(), 10_000.0, run_id="runA")
    run_dir = write_run_dir(result, tmp_path / "runs")
    base = tmp_path / "runs" / "runA"

    assert (base / "config.snapshot").is_file()
    assert (base / "tradelog.jsonl").is_file()
    assert (base / "equity.csv").is_file()
    assert (base / "metrics.json").is_file()
    assert sorted(p.name for p in (base / "reports").iterdir())

    metrics = json.loads((base / "metrics.json").read_text())
    assert metrics["cr_pct"] == result.metrics.cr_pct

    log = read_tradelog(base / "tradelog.jsonl")
    assert log.to_jsonl() == result.tradelog.to_jsonl()


def test_plot_csvs_consistent(tmp_path):
    store = rw_store(seed=69)
    start, end = span(store)
    result = run_backtest(store, "SYN", start, end, StrategyConfig("SMA", {"fast": 5, "slow": 15}), 1_000.0)
    eq = equity_csv(result.curve).strip().splitlines()
    pos = position_csv(result.tradelog).strip().splitlines()
    sig = signals_csv(result.tradelog).strip().splitlines()
    assert len(eq) == len(pos)  # shared daily date spine
    assert [l.split(",")[0] for l in eq[1:]] == [l.split(",")[0] for l in pos[1:]]
    assert len(sig) - 1 == len(result.tradelog.executed_trades())


def test_signals_csv_empty_body_when_no_trades():
    store = store_with_bars([100.0] * 30)
    start, end = span(store)
    result = run_backtest(store, "SYN", start, end, StrategyConfig("MACD"), 1_000.0)
    assert signals_csv(result.tradelog) == "date,action,price\n"


# -- comparison ----------------------------------------------------------------------------

def test_compare_single_strategy_takes_all_flags():
    store = rw_store(seed=70)
    start, end = span(store)
    rows = compare_strategies(store, "SYN", start, end, [("BH", StrategyConfig("BH"))], 1_000.0)
    assert rows[0].flags == {"cr", "ar", "sr", "mdd"}


def test_compare_all_hold_wins_mdd():
    store = rw_store(seed=71)
    start, end = span(store)
    rows = compare_strategies(
        store, "SYN", start, end,
        [
            ("BH", StrategyConfig("BH")),
            ("IDLE", StrategyConfig("ZMR", {"entry_z": -50.0})),
        ],
        1_000.0,
    )
    idle = next(r for r in rows if r.name == "IDLE")
    assert idle.metrics.mdd_pct == 0.0
    assert "mdd" in idle.flags


def test_compare_rows_equal_independent_runs():
    store = rw_store(seed=72)
    start, end = span(store)
    specs = [
        ("BH", StrategyConfig("BH")),
        ("MACD", StrategyConfig("MACD")),
        ("KDJ_RSI", StrategyConfig("KDJ_RSI")),
        ("ZMR", StrategyConfig("ZMR")),
        ("SMA", StrategyConfig("SMA")),
        ("P1GPT", AgentModeConfig()),
    ]
    rows = compare_strategies(store, "SYN", start, end, specs, 1_000.0)
    assert len(rows) == 6
    for name, spec in specs:
        row = next(r for r in rows if r.name == name)
        solo = run_backtest(store, "SYN", start, end, spec, 1_000.0)
        assert row.metrics.cr_pct == solo.metrics.cr_pct
        assert row.metrics.mdd_pct == solo.metrics.mdd_pct


def test_compare_failed_strategy_renders_dashed_row():
    from p1gpt.backtester import render_comparison

    store = rw_store(seed=73)
    start, end = span(store)
    rows = compare_strategies(
        store, "SYN", start, end,
        [("BH", StrategyConfig("BH")), ("BAD", StrategyConfig("SMA", {"fast": 30, "slow": 10}))],
        1_000.0,
    )
    bad = next(r for r in rows if r.name == "BAD")
    assert bad.error is not None
    table = render_comparison("SYN", rows)
    bad_line = next(l for l in table.splitlines() if l.startswith("BAD"))
    assert "-" in bad_line
