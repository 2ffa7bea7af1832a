"""One trading day through the full layer chain, with the printed report.

Input layer parses the daily query, planning builds the task DAG, the
four reference agents analyze the snapshot, and integration fuses their
stances into a single Buy/Sell/Hold with a textual rationale.
"""

from pathlib import Path

from p1gpt.backtester import REFERENCE_REGISTRY
from p1gpt.fusion import render_report
from p1gpt.marketdata import PointInTimeStore, end_of_day
from p1gpt.pipeline import build_plan, execute_plan, parse_query, ready_tasks

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures" / "synthetic"

store = PointInTimeStore()
store.ingest_bars(FIXTURES / "syn_bars.csv", "SYN")
store.ingest_news(FIXTURES / "syn_news.jsonl")
store.ingest_fundamentals(FIXTURES / "syn_fundamentals.jsonl")

day = store.trading_days("SYN")[90]
as_of = end_of_day(day)
query = parse_query(f"Given today's market conditions, should I buy, sell, or hold SYN?", as_of)
print(f"query parsed: intent={query.intent.value} tickers={query.tickers} horizon={query.horizon.value}")

snapshot = store.as_of(as_of)
plan = build_plan(query, {"bars", "news", "fundamentals"})
print(f"plan: {len(plan.nodes)} nodes; ready first wave = "
      f"{[n.kind for n in ready_tasks(plan)]}")

outcome = execute_plan(plan, snapshot, REFERENCE_REGISTRY)
print(f"agent executions: {outcome.executions}, adaptations: {outcome.adaptations}, "
      f"escalated: {outcome.escalated}")
print()
print(render_report(outcome.view, outcome.decision))
