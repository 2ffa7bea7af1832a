"""Human-in-the-loop review: enqueue, override, crash-replay the journal.

The queue persists every event to an append-only JSON-lines journal
before acknowledging it, so a process crash loses nothing: reopening the
journal reconstructs the exact pending set and resolutions.
"""

import tempfile
from pathlib import Path

from p1gpt.service import DecisionQueue

workdir = Path(tempfile.mkdtemp(prefix="p1-demo-"))
journal = workdir / "pending_journal.jsonl"

queue = DecisionQueue(journal)
ids = [
    queue.enqueue({"ticker": "SYN", "date": d, "action": a, "rationale_ref": ""}, "demo-run")
    for d, a in (("2025-06-02", "Buy"), ("2025-06-03", "Hold"), ("2025-06-04", "Sell"))
]
print(f"enqueued {len(ids)} pending decisions")

queue.resolve(ids[0], "approve", operator_id="demo-operator")
queue.resolve(ids[2], "override", operator_id="demo-operator", new_action="Hold",
              note="awaiting earnings call")
print("resolved two of them (one approve, one override)")

# simulate a crash: no clean shutdown, just reopen the journal
recovered = DecisionQueue(journal)
print(f"\nafter replaying {journal.name}:")
for item in recovered.all_items():
    line = f"  {item.date} proposed={item.proposed['action']:4s} status={item.status}"
    if item.resolution:
        line += f" -> executed {item.resolution.action} ({item.resolution.kind} by {item.resolution.operator_id})"
    print(line)
print(f"pending still open: {[i.date for i in recovered.pending()]}")
