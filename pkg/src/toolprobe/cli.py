"""Command-line entry point orchestrating campaigns.

Exit codes: 0 success; 1 findings present under --fail-on-findings;
2 configuration error. All randomness flows from the single --seed via
named sub-streams, so identical configs with replay cassettes produce
byte-identical campaign directories (timestamps live only in
metadata.json).
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import click

from . import autofix as autofix_mod
from . import bench as bench_mod
from . import reporting
from .baselines import BaselineConfig, run_baseline_campaign
from .correctness import CorrectnessParams, run_correctness_campaign
from .fuzz import FuzzConfig
from .gateway import GatewayError, open_gateway
from .runtime import RuntimeConfig, detect_runtime_failures, write_findings
from .seeds import derive_seed
from .tools import ManifestError, load_and_validate

log = logging.getLogger(__name__)

LLM_MODES = ("live", "record", "replay")


class ConfigError(click.ClickException):
    exit_code = 2


def common_options(fn):
    @click.option("--campaign-dir", required=True, type=click.Path(path_type=Path),
                  help="Directory receiving campaign artifacts.")
    @click.option("--llm", "llm_mode", type=click.Choice(LLM_MODES), default="replay",
                  show_default=True, help="Language-model access mode.")
    @click.option("--cassette-dir", type=click.Path(path_type=Path), default=None,
                  help="Cassette directory for record/replay (default: <campaign-dir>/cassettes).")
    @click.option("--parallelism", type=click.IntRange(min=1), default=1, show_default=True,
                  help="Worker bound for per-tool pipelines.")
    @click.option("--fail-on-findings", is_flag=True, help="Exit 1 when findings are present.")
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        return fn(*args, **kwargs)
    return wrapper


def _gateway(llm_mode: str, campaign_dir: Path, cassette_dir: Path | None):
    cassettes = cassette_dir or campaign_dir / "cassettes"
    try:
        return open_gateway(llm_mode, cassettes)
    except GatewayError as exc:
        raise ConfigError(str(exc)) from exc


def _registry(manifest: Path):
    try:
        return load_and_validate(manifest)
    except (ManifestError, ValueError, OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"invalid manifest {manifest}: {exc}") from exc


def _write_metadata(campaign_dir: Path, **fields) -> None:
    """The only campaign file carrying timestamps."""
    campaign_dir.mkdir(parents=True, exist_ok=True)
    payload = {"created_at": datetime.now(timezone.utc).isoformat(), **fields}
    (campaign_dir / "metadata.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _map_tools(registry, parallelism: int, fn):
    specs = sorted(registry, key=lambda s: s.name)
    if parallelism <= 1:
        return [fn(spec) for spec in specs]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, specs))


@click.group()
def main():
    """Automated testing of agent tools and their documentation."""
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr)


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--seed", required=True, type=int, help="Campaign seed (required).")
@click.option("--budget", type=click.IntRange(min=1), default=500, show_default=True)
@click.option("--prompts-per-input", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--no-infer", is_flag=True, help="Skip probe-based constraint inference.")
@common_options
def fuzz(manifest, seed, budget, prompts_per_input, no_infer,
         campaign_dir, llm_mode, cassette_dir, parallelism, fail_on_findings):
    """Runtime pipeline: fuzz tools, synthesize prompts, capture agent errors."""
    registry = _registry(manifest)
    gateway = _gateway(llm_mode, campaign_dir, cassette_dir)

    def run_one(spec):
        config = RuntimeConfig(
            fuzz=FuzzConfig(seed=derive_seed(seed, f"fuzz:{spec.name}"), budget=budget),
            prompts_per_input=prompts_per_input,
            infer=not no_infer,
        )
        findings, counters = detect_runtime_failures(spec, config, registry, gateway)
        write_findings(campaign_dir / spec.name, findings, counters)
        return len(findings)

    totals = _map_tools(registry, parallelism, run_one)
    _write_metadata(campaign_dir, subcommand="fuzz", seed=seed, llm=llm_mode)
    total = sum(totals)
    click.echo(f"fuzz: {total} finding(s) across {len(totals)} tool(s)")
    if fail_on_findings and total:
        sys.exit(1)


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--seed", required=True, type=int, help="Campaign seed (required).")
@click.option("--prompts-per-set", "-n", type=click.IntRange(min=2), default=5, show_default=True)
@click.option("--templates-per-tool", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--oracle-votes", "-k", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--humanize", is_flag=True, help="Rephrase prompts for naturalness before running.")
@click.option("--context", default=None, help="Optional scenario context for template generation.")
@common_options
def correctness(manifest, seed, prompts_per_set, templates_per_tool, oracle_votes, humanize, context,
                campaign_dir, llm_mode, cassette_dir, parallelism, fail_on_findings):
    """Correctness pipeline: synonymous prompt sets, consistency checks, oracle."""
    registry = _registry(manifest)
    gateway = _gateway(llm_mode, campaign_dir, cassette_dir)

    def run_one(spec):
        params = CorrectnessParams(
            seed=derive_seed(seed, f"correctness:{spec.name}"),
            prompts_per_set=prompts_per_set,
            templates_per_tool=templates_per_tool,
            oracle_votes=oracle_votes,
            humanize=humanize,
            context=context,
        )
        results = run_correctness_campaign(spec, registry, params, gateway, campaign_dir / spec.name)
        return sum(1 for r in results if r.flag.flagged)

    flagged = _map_tools(registry, parallelism, run_one)
    _write_metadata(campaign_dir, subcommand="correctness", seed=seed, llm=llm_mode)
    total = sum(flagged)
    click.echo(f"correctness: {total} flagged prompt set(s) across {len(flagged)} tool(s)")
    if fail_on_findings and total:
        sys.exit(1)


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--mode", type=click.Choice(("gray", "white")), required=True)
@click.option("--goal", type=click.Choice(("crash", "incorrect")), required=True)
@click.option("--prompts-per-tool", type=click.IntRange(min=0), default=20, show_default=True)
@common_options
def baseline(manifest, mode, goal, prompts_per_tool,
             campaign_dir, llm_mode, cassette_dir, parallelism, fail_on_findings):
    """Prompt-engineering baselines (gray-box or white-box) with LLM judge."""
    registry = _registry(manifest)
    gateway = _gateway(llm_mode, campaign_dir, cassette_dir)
    try:
        config = BaselineConfig(mode=mode, goal=goal, prompts_per_tool=prompts_per_tool)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    def run_one(spec):
        summary = run_baseline_campaign(spec, config, registry, gateway, campaign_dir / spec.name)
        return summary["erroneous"]

    erroneous = _map_tools(registry, parallelism, run_one)
    _write_metadata(campaign_dir, subcommand="baseline", llm=llm_mode,
                    method=config.method, goal=goal)
    total = sum(erroneous)
    click.echo(f"baseline {config.method}/{goal}: {total} erroneous prompt(s)")
    if fail_on_findings and total:
        sys.exit(1)


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--tool", "tool_name", required=True, help="Tool whose documentation to repair.")
@click.option("--mode", type=click.Choice(autofix_mod.MODES), default="informed", show_default=True)
@click.option("--output", type=click.Path(path_type=Path), default=None,
              help="Revision file (default: <campaign-dir>/revision_<tool>.json).")
@common_options
def autofix(manifest, tool_name, mode, output,
            campaign_dir, llm_mode, cassette_dir, parallelism, fail_on_findings):
    """Repair a tool's documentation from campaign evidence."""
    del parallelism, fail_on_findings
    registry = _registry(manifest)
    gateway = _gateway(llm_mode, campaign_dir, cassette_dir)
    if tool_name not in registry:
        raise ConfigError(f"tool {tool_name!r} not in manifest")
    spec = registry.get(tool_name)
    evidence = _collect_evidence(campaign_dir, tool_name)
    if mode == "informed" and not evidence:
        raise ConfigError(f"informed mode needs findings for {tool_name!r} under {campaign_dir}")
    try:
        revision = autofix_mod.improve_documentation(spec, mode, evidence, gateway)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    target = output or campaign_dir / f"revision_{tool_name}.json"
    autofix_mod.write_revision(target, revision)
    click.echo(f"autofix: wrote {target}")


def _collect_evidence(campaign_dir: Path, tool_name: str) -> list[dict]:
    records: list[dict] = []
    for findings_file in sorted(campaign_dir.rglob("findings.jsonl")):
        for line in findings_file.read_text(encoding="utf-8").splitlines():
            entry = json.loads(line)
            if entry.get("tool_name") == tool_name:
                records.append(entry)
    for set_file in sorted(campaign_dir.rglob("sets/set_*.json")):
        entry = json.loads(set_file.read_text(encoding="utf-8"))
        if entry.get("tool_name") == tool_name and entry.get("flagged"):
            records.append(entry)
    return records


@main.command()
@click.option("--tasks", "tasks_path", type=click.Path(exists=True, path_type=Path), default=None,
              help="Task suite file (default: bundled mini suite).")
@click.option("--split", type=click.Choice(bench_mod.SPLITS), default=None,
              help="Restrict to one split.")
@click.option("--max-steps", type=click.IntRange(min=1), default=8, show_default=True)
@common_options
def bench(tasks_path, split, max_steps,
          campaign_dir, llm_mode, cassette_dir, parallelism, fail_on_findings):
    """File-management benchmark with exact-diff grading."""
    del parallelism
    gateway = _gateway(llm_mode, campaign_dir, cassette_dir)
    try:
        tasks = bench_mod.load_tasks(tasks_path) if tasks_path else bench_mod.load_mini_suite()
    except (bench_mod.TaskError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"invalid task suite: {exc}") from exc
    if split:
        tasks = [t for t in tasks if t.split == split]
    results = bench_mod.run_suite(tasks, gateway, max_steps=max_steps)
    pairs = [(task, ok) for task, ok, _ in results]
    rates = {s: bench_mod.compute_pass_rate(pairs, s) for s in bench_mod.SPLITS}
    overall = bench_mod.compute_pass_rate(pairs)
    payload = {
        "tasks": [{"id": t.id, "split": t.split, "passed": ok,
                   "observed_diff": [c.__dict__ for c in diff]} for t, ok, diff in results],
        "pass_rates": {
            "overall": overall.rate,
            **{s: rates[s].rate for s in bench_mod.SPLITS},
        },
    }
    campaign_dir.mkdir(parents=True, exist_ok=True)
    (campaign_dir / "bench_results.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    _write_metadata(campaign_dir, subcommand="bench", llm=llm_mode)
    click.echo(f"bench: {overall.passed}/{overall.total} passed ({overall.rate * 100:.2f}%)")
    if fail_on_findings and overall.passed < overall.total:
        sys.exit(1)


@main.command()
@click.option("--campaign-dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--labels", "labels_path", type=click.Path(exists=True, path_type=Path), default=None,
              help="Manual TP/FP label file (sidecar; never inferred).")
@click.option("--require-labels", is_flag=True,
              help="Fail when any flagged finding lacks a manual label.")
@click.option("--format", "fmt", type=click.Choice(reporting.FORMATS), default="structured-text",
              show_default=True)
@click.option("--output", type=click.Path(path_type=Path), default=None,
              help="Report file (default: <campaign-dir>/report.<ext>).")
def report(campaign_dir, labels_path, require_labels, fmt, output):
    """Aggregate campaign artifacts into a metrics report."""
    records, finding_ids = _load_campaign_records(campaign_dir)
    labels = None
    if labels_path:
        try:
            labels = reporting.LabelFile.load(labels_path)
            labels.validate_against(finding_ids)
        except (reporting.LabelError, json.JSONDecodeError) as exc:
            raise ConfigError(f"invalid label file: {exc}") from exc
    if require_labels:
        missing = (labels.missing_for(finding_ids) if labels else sorted(finding_ids))
        if missing:
            click.echo(f"report: {len(missing)} flagged finding(s) lack labels: {missing[:5]}", err=True)
            sys.exit(1)
    metrics = reporting.aggregate_campaign(records, labels)
    pass_rates = _bench_rates(campaign_dir)
    if pass_rates:
        metrics = reporting.MetricsReport(
            tested=metrics.tested, erroneous=metrics.erroneous, unique_errors=metrics.unique_errors,
            tp=metrics.tp, fp=metrics.fp, by_method=metrics.by_method,
            by_taxonomy=metrics.by_taxonomy, pass_rates=pass_rates)
    ext = "json" if fmt == "structured-text" else "txt"
    target = output or campaign_dir / f"report.{ext}"
    reporting.emit_report(metrics, fmt, target)
    click.echo(f"report: wrote {target}")


def _bench_rates(campaign_dir: Path) -> dict[str, float]:
    path = campaign_dir / "bench_results.json"
    if not path.exists():
        return {}
    return dict(json.loads(path.read_text(encoding="utf-8")).get("pass_rates", {}))


def _load_campaign_records(campaign_dir: Path) -> tuple[list[dict], set[str]]:
    """Records for aggregation plus the ids of flagged findings needing labels."""
    records: list[dict] = []
    finding_ids: set[str] = set()
    for counters_file in sorted(campaign_dir.rglob("counters.json")):
        records.append(json.loads(counters_file.read_text(encoding="utf-8")))
    for findings_file in sorted(campaign_dir.rglob("findings.jsonl")):
        for index, line in enumerate(findings_file.read_text(encoding="utf-8").splitlines()):
            entry = json.loads(line)
            entry.setdefault("taxonomy", None)
            finding_ids.add(reporting.finding_id(entry, index))
            records.append({k: v for k, v in entry.items() if k not in ("tested",)})
    for baseline_file in sorted(campaign_dir.rglob("baseline_*.jsonl")):
        for line in baseline_file.read_text(encoding="utf-8").splitlines():
            records.append(json.loads(line))
    for set_file in sorted(campaign_dir.rglob("sets/set_*.json")):
        entry = json.loads(set_file.read_text(encoding="utf-8"))
        record = {"method": "TF", "flagged": entry.get("flagged", False), "tool_name": entry.get("tool_name")}
        if entry.get("flagged"):
            finding_ids.add(f"{entry.get('tool_name', 'tool')}:{set_file.stem}")
        records.append(record)
    return records, finding_ids


@main.command("cross-tool")
@click.option("--manifest", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--prompts", "prompts_path", required=True, type=click.Path(exists=True, path_type=Path),
              help="File mapping category -> list of prompts.")
@common_options
def cross_tool(manifest, prompts_path,
               campaign_dir, llm_mode, cassette_dir, parallelism, fail_on_findings):
    """Count unplanned cross-category tool usages."""
    del parallelism
    registry = _registry(manifest)
    gateway = _gateway(llm_mode, campaign_dir, cassette_dir)
    try:
        prompts_by_category = {str(k): [str(p) for p in v]
                               for k, v in json.loads(Path(prompts_path).read_text(encoding="utf-8")).items()}
    except (json.JSONDecodeError, AttributeError) as exc:
        raise ConfigError(f"invalid prompts file: {exc}") from exc
    try:
        result = reporting.cross_tool_eval(registry, prompts_by_category, gateway)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    campaign_dir.mkdir(parents=True, exist_ok=True)
    (campaign_dir / "cross_tool.json").write_text(
        json.dumps({"unplanned": result.unplanned, "per_tool": dict(sorted(result.per_tool.items())),
                    "records": list(result.records)},
                   indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    _write_metadata(campaign_dir, subcommand="cross-tool", llm=llm_mode)
    click.echo(f"cross-tool: {result.unplanned} unplanned usage(s)")
    if fail_on_findings and result.unplanned:
        sys.exit(1)


if __name__ == "__main__":
    main()
