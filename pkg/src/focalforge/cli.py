"""``focalforge`` command line.

Every subcommand reads and writes files named by its flags; nothing but
``--stdout`` output goes to standard output. Failures exit nonzero with a
one-line JSON error object on standard error.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import sys
from pathlib import Path

import click

from . import __version__
from .config import ConfigError, PipelineConfig, load_config, parse_levels
from .context import render_context
from .corpus import JsonlError, SplitError, deduplicate, read_jsonl, split_by_repo, write_jsonl
from .harness import (
    CoverageError,
    FocalTarget,
    RunnerConfig,
    RunnerConfigError,
    Verdict,
    aggregate,
    evaluate_candidates,
    format_table,
)
from .ingredients import overlap_distribution
from .miner import mine_repositories
from .records import to_record
from .validator import DEFAULT_APIS, Candidate, api_profile, compare_profiles, load_api_lists, validate_candidate

PAIR_SCHEMA = """\b
Pair rows (JSON Lines, one object per line):
  {schema_version, pair_id, repo_id, test_class_path, test_class,
   test_case{name, body}, focal_class_path,
   focal_class{name, qualified_name, package, constructor_signatures,
               method_signatures, field_declarations, type_parameters},
   focal_method{name, signature, body, param_types, type_parameters},
   class_match: path|name, method_match: name|unique_call,
   context{level, text, token_count, truncated}  (optional)}"""

CANDIDATE_SCHEMA = """\b
Candidate rows: {id, focal_pair_id, text, generator}"""

VERDICT_SCHEMA = """\b
Verdict rows: {schema_version, candidate_id, focal_pair_id, focal_key,
  project, category: SyntaxError|BuildError|FailingTest|PassingTest,
  correct, reason, warnings[], repaired}"""


def _write_json(data, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fractions(ctx, param, value):
    if value is None:
        return None
    try:
        parts = tuple(float(x) for x in value.split(","))
    except ValueError:
        raise click.BadParameter("expected comma-separated numbers") from None
    if len(parts) != 3:
        raise click.BadParameter(f"3 fractions required (train,validation,test), got {len(parts)}")
    return parts


def _settings(ctx: click.Context, **flags) -> PipelineConfig:
    return ctx.obj.override(**flags)


@click.group()
@click.version_option(__version__)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="TOML file with pipeline settings.")
@click.option("-v", "--verbose", count=True, help="Log progress to stderr (-vv for debug).")
@click.pass_context
def cli(ctx, config_path, verbose):
    """Mine Java test/focal-method pairs and grade generated tests."""
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(verbose, 2)],
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = load_config(config_path)


@cli.command(epilog=PAIR_SCHEMA)
@click.argument("roots", nargs=-1, required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", default="pairs.jsonl", show_default=True, type=click.Path(dir_okay=False))
@click.option("--report", "report_path", type=click.Path(dir_okay=False), help="Mining report (JSON).")
@click.option("--each", is_flag=True, help="Treat every subdirectory of each ROOT as a repository.")
@click.option("--jobs", type=int, help="Repositories mined in parallel.")
@click.pass_context
def mine(ctx, roots, out, report_path, each, jobs):
    """Map test cases to focal methods in one or more repositories."""
    cfg = _settings(ctx, jobs=jobs)
    repos = []
    for root in roots:
        if each:
            repos += sorted(str(p) for p in Path(root).iterdir() if p.is_dir() and not p.name.startswith("."))
        else:
            repos.append(root)
    pairs, report = mine_repositories(repos, jobs=cfg.jobs)
    write_jsonl((to_record(p) for p in pairs), out)
    if report_path:
        _write_json(report.to_dict(), report_path)


@cli.command(epilog=PAIR_SCHEMA)
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--level", "levels", multiple=True,
              help="fm, fm+fc, fm+fc+c, fm+fc+c+m, fm+fc+c+m+f or all (repeatable).")
@click.option("--budget", type=int, help="Token budget per rendering (default 1024).")
@click.pass_context
def render(ctx, pairs_path, out, levels, budget):
    """Render focal context for every pair; writes one row per pair and level."""
    cfg = _settings(ctx, budget=budget, levels=parse_levels(levels) if levels else None)
    rows = []
    for record in read_jsonl(pairs_path):
        for level in cfg.levels:
            info = render_context(record, level, cfg.budget).info()
            rows.append(dataclasses.replace(record, context=info))
    write_jsonl(rows, out)


@cli.command(epilog=PAIR_SCHEMA)
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--fractions", callback=_fractions, help="train,validation,test (default 0.8,0.1,0.1).")
@click.option("--seed", type=int)
@click.option("--dedup", type=click.Choice(["whitespace", "exact", "none"]))
@click.option("--report", "report_path", type=click.Path(dir_okay=False))
@click.pass_context
def split(ctx, pairs_path, out_dir, fractions, seed, dedup, report_path):
    """Deduplicate pairs and split them so no repository spans two sets.

    Writes train.jsonl, validation.jsonl and test.jsonl into OUT_DIR.
    """
    cfg = _settings(ctx, fractions=fractions, seed=seed, dedup=dedup)
    records = read_jsonl(pairs_path)
    unique = deduplicate(records, cfg.dedup)
    parts = split_by_repo(unique, cfg.fractions, cfg.seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in parts.parts().items():
        write_jsonl(part, out / f"{name}.jsonl")
    if report_path:
        _write_json({"input_pairs": len(records), "unique_pairs": len(unique), "dedup": cfg.dedup,
                     "seed": cfg.seed, "splits": parts.summary()}, report_path)


@cli.command(epilog=PAIR_SCHEMA)
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--levels", "levels", default=None, help="Comma-separated level ids or 'all'.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Summary statistics (JSON).")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), help="Per-pair counts (pair_id,level,shared_tokens).")
@click.option("--budget", type=int, help="Measure truncated renderings instead of full ones.")
@click.option("--multiset", is_flag=True, help="Count repeated tokens up to their multiplicity.")
@click.option("--stdout", "to_stdout", is_flag=True, help="Also print the summary.")
@click.pass_context
def analyze(ctx, pairs_path, levels, out, csv_path, budget, multiset, to_stdout):
    """Shared-token counts between each context level and the target test."""
    cfg = _settings(ctx, levels=parse_levels(levels.split(",")) if levels else None)
    stats = overlap_distribution(read_jsonl(pairs_path), cfg.levels, budget=budget, multiset=multiset)
    stats.write_json(out)
    if csv_path:
        stats.write_csv(csv_path)
    if to_stdout:
        click.echo(json.dumps(stats.summary(), indent=2, sort_keys=True))


def _pairs_by_id(path) -> dict:
    return {r.pair_id: r for r in read_jsonl(path)} if path else {}


@cli.command(epilog=CANDIDATE_SCHEMA)
@click.option("--candidates", "cands_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--pairs", "pairs_path", type=click.Path(exists=True, dir_okay=False),
              help="Pairs the candidates' focal_pair_id refer to.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Per-candidate results (JSON Lines).")
@click.option("--profile", "profile_path", type=click.Path(dir_okay=False),
              help="Testing-API comparison of original tests vs candidates (JSON).")
@click.option("--api-lists", type=click.Path(exists=True, dir_okay=False), help="Extra API names (JSON/TOML).")
@click.pass_context
def validate(ctx, cands_path, pairs_path, out, profile_path, api_lists):
    """Syntax, repair, @Test, focal-call and testing-API checks per candidate."""
    cfg = _settings(ctx, api_lists=api_lists)
    apis = load_api_lists(cfg.api_lists) if cfg.api_lists else DEFAULT_APIS
    pairs = _pairs_by_id(pairs_path)
    candidates = read_jsonl(cands_path, Candidate.from_dict)
    results = []
    for cand in candidates:
        record = pairs.get(cand.focal_pair_id)
        results.append(validate_candidate(cand, record.focal_method.name if record else None, apis))
    write_jsonl(results, out)
    if profile_path:
        referenced = dict.fromkeys(c.focal_pair_id for c in candidates if c.focal_pair_id in pairs)
        original = [api_profile(pairs[pid].test_case.body, apis) for pid in referenced]
        generated = [api_profile(r.text, apis) for r in results if r.parseable]
        _write_json(compare_profiles(original, generated), profile_path)


@cli.command(epilog=CANDIDATE_SCHEMA + "\n\n" + VERDICT_SCHEMA)
@click.option("--candidates", "cands_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--project", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--runner", "runner_path", type=click.Path(exists=True, dir_okay=False),
              help="Runner TOML with compile_cmd, test_cmd, timeout, ...")
@click.option("--pairs", "pairs_path", type=click.Path(exists=True, dir_okay=False),
              help="Pairs giving each candidate's focal method (needed for correctness).")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--summary", "summary_path", type=click.Path(dir_okay=False))
@click.option("--runs-dir", type=click.Path(file_okay=False), help="Keep per-candidate work directories here.")
@click.option("--jobs", type=int)
@click.pass_context
def evaluate(ctx, cands_path, project, runner_path, pairs_path, out, summary_path, runs_dir, jobs):
    """Compile and run candidates, classifying each into one verdict category."""
    cfg = _settings(ctx, runner=runner_path, jobs=jobs)
    if not cfg.runner:
        raise click.UsageError("a runner config is required (--runner or 'runner' in --config)")
    runner = RunnerConfig.load(cfg.runner)
    targets = {pid: FocalTarget.from_record(r) for pid, r in _pairs_by_id(pairs_path).items()}
    candidates = read_jsonl(cands_path, Candidate.from_dict)
    verdicts = evaluate_candidates(candidates, runner, targets, project=project, jobs=cfg.jobs,
                                   runs_dir=runs_dir)
    write_jsonl(verdicts, out)
    if summary_path:
        _write_json(aggregate(verdicts), summary_path)


@cli.command(epilog=VERDICT_SCHEMA)
@click.option("--verdicts", "verdicts_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--pairs", "pairs_path", type=click.Path(exists=True, dir_okay=False),
              help="Focal methods expected to have candidates; missing ones are reported.")
@click.option("--out", type=click.Path(dir_okay=False), help="Summary (JSON).")
@click.option("--table", "table_path", type=click.Path(dir_okay=False), help="Plain-text results table.")
@click.option("--stdout", "to_stdout", is_flag=True, help="Print the table.")
def report(verdicts_path, pairs_path, out, table_path, to_stdout):
    """Tally verdicts per project and per focal method."""
    verdicts = read_jsonl(verdicts_path, Verdict.from_dict)
    universe = [FocalTarget.from_record(r).key for r in _pairs_by_id(pairs_path).values()]
    summary = aggregate(verdicts, dict.fromkeys(universe))
    if out:
        _write_json(summary, out)
    table = format_table(summary)
    if table_path:
        Path(table_path).write_text(table, encoding="utf-8")
    if to_stdout:
        click.echo(table, nl=False)


_HANDLED = (ConfigError, JsonlError, SplitError, RunnerConfigError, CoverageError, OSError, ValueError)


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="focalforge", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        return _fail("Aborted", "aborted", 1)
    except click.ClickException as exc:
        return _fail(type(exc).__name__, exc.format_message(), exc.exit_code)
    except _HANDLED as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
