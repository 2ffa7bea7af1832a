"""Full daily backtest of the multi-agent workflow vs the five baselines."""

from pathlib import Path

from p1gpt.backtester import (
    AgentModeConfig,
    compare_strategies,
    render_comparison,
    run_backtest,
)
from p1gpt.baselines import StrategyConfig
from p1gpt.marketdata import PointInTimeStore

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures" / "synthetic"

store = PointInTimeStore()
store.ingest_bars(FIXTURES / "syn_bars.csv", "SYN")
store.ingest_news(FIXTURES / "syn_news.jsonl")
store.ingest_fundamentals(FIXTURES / "syn_fundamentals.jsonl")
days = store.trading_days("SYN")
start, end = days[40], days[-1]

result = run_backtest(store, "SYN", start, end, AgentModeConfig(), 100_000.0)
print(f"agent-mode run {start} .. {end}: "
      f"CR {result.metrics.cr_pct:.2f}%  AR {result.metrics.ar_pct:.2f}%  "
      f"SR {result.metrics.sharpe:.2f}  MDD {result.metrics.mdd_pct:.2f}%")
trades = result.tradelog.executed_trades()
print(f"executed trades: {[(e.date.isoformat(), e.executed.value, e.price) for e in trades]}")

rows = compare_strategies(
    store, "SYN", start, end,
    [
        ("BH", StrategyConfig("BH")),
        ("MACD", StrategyConfig("MACD")),
        ("KDJ_RSI", StrategyConfig("KDJ_RSI")),
        ("ZMR", StrategyConfig("ZMR")),
        ("SMA", StrategyConfig("SMA")),
        ("P1GPT", AgentModeConfig()),
    ],
    initial_cash=100_000.0,
)
print()
print(render_comparison("SYN", rows))
