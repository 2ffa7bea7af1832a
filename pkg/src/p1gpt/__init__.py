"""Layered multi-agent trading workflow.

Subpackages by layer: marketdata (point-in-time store), indicators,
baselines, metrics, pipeline (input/planning), agents (analysis),
fusion (integration/decision), backtester, service (human review),
cli.
"""

__version__ = "0.1.0"
