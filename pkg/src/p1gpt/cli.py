"""Operator CLI.

    p1 ingest   --config cfg.toml            build the normalized store
    p1 backtest --config cfg.toml            run one strategy, print run_id
    p1 compare  --config cfg.toml            run all configured strategies
    p1 serve    --config cfg.toml            review service (+ optional replay)
    p1 plot     --config cfg.toml --run ID   emit plot-ready CSVs for a run

All commands accept repeated `--set section.key=value` overrides. Exit
codes: 0 success, 1 runtime failure, 2 configuration/usage error.
"""

from __future__ import annotations

import functools
import json
import os
import sys
import threading

import click

from . import backtester, marketdata, pipeline, service as service_mod
from .agents import LLMEndpointConfig, llm_agent
from .baselines import STRATEGY_NAMES, StrategyConfig
from .config import ConfigError, load_config, parse_day, require


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def with_config(fn):
    @click.option("--config", "config_path", required=True, type=click.Path(), help="TOML config file")
    @click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="override a config entry")
    @functools.wraps(fn)
    def wrapper(config_path, overrides, **kwargs):
        try:
            cfg = load_config(config_path, list(overrides))
        except ConfigError as exc:
            _fail(str(exc), 2)
        try:
            return fn(cfg, **kwargs)
        except ConfigError as exc:
            _fail(str(exc), 2)
        except Exception as exc:
            _fail(str(exc), 1)

    return wrapper


@click.group()
def main():
    """Layered multi-agent trading workflow."""


# -- store construction --------------------------------------------------------

def build_store(cfg: dict) -> tuple[marketdata.PointInTimeStore, list[str]]:
    """Store from store_dir when populated, else from the [data] file lists.

    Returns (store, errors); a missing input file is reported by name and
    the remaining files still ingest.
    """
    data = cfg["data"]
    store_dir = data.get("store_dir") or ""
    if store_dir and os.path.isdir(store_dir) and os.listdir(store_dir):
        return marketdata.load_store(store_dir), []

    store = marketdata.PointInTimeStore()
    errors = []
    for ticker, path in sorted(dict(data.get("bars", {})).items()):
        try:
            store.ingest_bars(path, ticker)
        except marketdata.IngestError as exc:
            errors.append(str(exc))
    for path in data.get("news", []):
        try:
            store.ingest_news(path)
        except marketdata.IngestError as exc:
            errors.append(str(exc))
    for path in data.get("fundamentals", []):
        try:
            store.ingest_fundamentals(path)
        except marketdata.IngestError as exc:
            errors.append(str(exc))
    return store, errors


@main.command()
@with_config
def ingest(cfg):
    """Ingest the configured files into a normalized store directory."""
    store, errors = build_store(cfg)
    for report in store.reports:
        click.echo(f"{report.path}: {report.accepted} accepted, {len(report.rejected)} rejected")
        for lineno, reason in report.rejected:
            click.echo(f"  line {lineno}: {reason}")
    store_dir = require(cfg, "data.store_dir")
    written = marketdata.save_store(store, store_dir)
    click.echo(f"store written to {store_dir}: {', '.join(written) or '(empty)'}")
    if errors:
        for err in errors:
            click.echo(f"error: {err}", err=True)
        sys.exit(1)


# -- strategy construction -------------------------------------------------------

def agent_mode_config(cfg: dict, llm: bool = False) -> backtester.AgentModeConfig:
    fus = cfg["fusion"]
    weights = dict(fus.get("weights") or {}) or None
    registry = dict(backtester.REFERENCE_REGISTRY)
    if llm:
        endpoint = LLMEndpointConfig(
            url=require(cfg, "llm.url"),
            token_env=cfg["llm"]["token_env"],
            timeout=float(cfg["llm"]["timeout"]),
            max_retries=int(cfg["llm"]["max_retries"]),
            max_concurrency=int(cfg["llm"]["max_concurrency"]),
        )
        registry = {kind: functools.partial(llm_agent, endpoint_config=endpoint) for kind in registry}
    aliases = None
    alias_path = cfg["pipeline"].get("alias_table") or ""
    if alias_path:
        aliases = pipeline.load_aliases(alias_path)
    return backtester.AgentModeConfig(
        registry=registry,
        horizon=pipeline.Horizon(fus.get("horizon", "medium")),
        weights=weights,
        conf_floor=float(fus["conf_floor"]),
        buy_threshold=float(fus["buy_threshold"]),
        sell_threshold=float(fus["sell_threshold"]),
        max_rounds=int(fus["max_rounds"]),
        include_revenue_forecast=bool(cfg["pipeline"]["include_revenue_forecast"]),
        exclude_decision_day_close=bool(cfg["marketdata"]["as_of_excludes_decision_day_close"]),
        aliases=aliases,
    )


def strategy_from_config(cfg: dict):
    mode = cfg["backtest"]["mode"]
    if mode == "baseline":
        name = require(cfg, "strategy.name")
        if name not in STRATEGY_NAMES:
            raise ConfigError(
                f"config field strategy.name: unknown strategy {name!r} "
                f"(expected one of {', '.join(STRATEGY_NAMES)})"
            )
        return StrategyConfig(name=name, parameters=dict(cfg["strategy"].get("parameters", {})))
    if mode == "p1gpt-reference":
        return agent_mode_config(cfg, llm=False)
    if mode == "p1gpt-llm":
        return agent_mode_config(cfg, llm=True)
    raise ConfigError(f"config field backtest.mode: unknown mode {mode!r}")


def _run_backtest(cfg: dict, strategy, decision_queue=None, pending_timeout=None):
    store, errors = build_store(cfg)
    if errors:
        raise ConfigError("; ".join(errors))
    return backtester.run_backtest(
        store,
        ticker=require(cfg, "backtest.ticker"),
        start=parse_day(cfg, "backtest.start"),
        end=parse_day(cfg, "backtest.end"),
        strategy=strategy,
        initial_cash=float(cfg["backtest"]["initial_cash"]),
        annual_rf=float(cfg["metrics"]["annual_rf"]),
        annualize=bool(cfg["metrics"]["annualize"]),
        config_snapshot=_resolved_snapshot(cfg),
        decision_queue=decision_queue,
        pending_timeout=pending_timeout,
    )


def _resolved_snapshot(cfg: dict) -> dict:
    keep = ("data", "backtest", "strategy", "fusion", "pipeline", "marketdata", "metrics")
    return {k: cfg[k] for k in keep}


@main.command()
@with_config
def backtest(cfg):
    """Run one backtest and write its run directory."""
    result = _run_backtest(cfg, strategy_from_config(cfg))
    run_dir = backtester.write_run_dir(result, cfg["backtest"]["runs_dir"])
    click.echo(result.run_id)
    click.echo(f"run directory: {run_dir}", err=True)


@main.command()
@with_config
def compare(cfg):
    """Run every configured strategy and render the comparison table."""
    names = cfg["compare"]["strategies"]
    if not names:
        raise ConfigError("config field compare.strategies must list at least one strategy")
    specs = []
    for name in names:
        if name == "P1GPT":
            specs.append((name, agent_mode_config(cfg, llm=False)))
        elif name in STRATEGY_NAMES:
            specs.append((name, StrategyConfig(name=name)))
        else:
            raise ConfigError(f"config field compare.strategies: unknown strategy {name!r}")
    store, errors = build_store(cfg)
    if errors:
        raise ConfigError("; ".join(errors))
    ticker = require(cfg, "backtest.ticker")
    start = parse_day(cfg, "backtest.start")
    end = parse_day(cfg, "backtest.end")
    rows = backtester.compare_strategies(
        store, ticker, start, end, specs,
        initial_cash=float(cfg["backtest"]["initial_cash"]),
        annual_rf=float(cfg["metrics"]["annual_rf"]),
        annualize=bool(cfg["metrics"]["annualize"]),
    )
    table = backtester.render_comparison(ticker, rows)
    payload = backtester.comparison_to_dict(ticker, start, end, rows)
    run_id = backtester.make_run_id({"compare": names, **_resolved_snapshot(cfg)})
    out_dir = os.path.join(cfg["backtest"]["runs_dir"], run_id)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "comparison.json"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    with open(os.path.join(out_dir, "comparison.txt"), "w", encoding="utf-8") as fh:
        fh.write(table)
    click.echo(table, nl=False)
    click.echo(run_id)


@main.command()
@with_config
def serve(cfg):
    """Serve the review API; optionally host an interactive replay."""
    runs_dir = cfg["backtest"]["runs_dir"]
    os.makedirs(runs_dir, exist_ok=True)
    journal = os.path.join(runs_dir, cfg["service"]["journal"])
    queue = service_mod.DecisionQueue(journal)
    app = service_mod.ReviewApp(runs_dir, queue)
    host, port = cfg["service"]["host"], int(cfg["service"]["port"])
    try:
        server = service_mod.make_server(host, port, app)
    except OSError as exc:
        _fail(f"cannot listen on {host}:{port}: {exc}", 1)

    replay_thread = None
    if cfg["service"].get("replay") or cfg["backtest"].get("interactive"):
        timeout = float(cfg["service"]["pending_timeout"]) or None

        def _replay():
            result = _run_backtest(
                cfg, strategy_from_config(cfg), decision_queue=queue, pending_timeout=timeout
            )
            backtester.write_run_dir(result, runs_dir)
            click.echo(f"replay complete: {result.run_id}", err=True)

        replay_thread = threading.Thread(target=_replay, daemon=True, name="replay")
        replay_thread.start()

    click.echo(f"serving on http://{host}:{port} (runs: {runs_dir})", err=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        server.server_close()
        queue.close()


@main.command()
@click.option("--run", "run_id", required=True, help="run id under the runs directory")
@with_config
def plot(cfg, run_id):
    """Emit plot-ready CSVs (equity, signals, position) for a run."""
    run_dir = os.path.join(cfg["backtest"]["runs_dir"], run_id)
    log_path = os.path.join(run_dir, "tradelog.jsonl")
    if not os.path.isdir(run_dir) or not os.path.isfile(log_path):
        _fail(f"run not found: {run_id}", 1)
    log = backtester.read_tradelog(log_path)
    with open(os.path.join(run_dir, "signals.csv"), "w", encoding="utf-8") as fh:
        fh.write(backtester.signals_csv(log))
    with open(os.path.join(run_dir, "position.csv"), "w", encoding="utf-8") as fh:
        fh.write(backtester.position_csv(log))
    for name in ("equity.csv", "signals.csv", "position.csv"):
        click.echo(os.path.join(run_dir, name))


if __name__ == "__main__":
    main()
