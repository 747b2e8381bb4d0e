"""Command-line front end.

``compose`` runs the optimiser for every seed and writes a run archive,
``analyze`` turns one archive into CSV/Newick/Markdown/PNG reports and
``report`` compares several archives in one set of tables.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from mcps_forge import archive as arch
from mcps_forge import reporting
from mcps_forge.analyze import AnalysisError
from mcps_forge.components import catalogue_json
from mcps_forge.data import DataError, load_csv, split_holdout, write_csv
from mcps_forge.evaluate import Budget
from mcps_forge.optimize import STRATEGIES, run
from mcps_forge.optimize.run import check_overrides
from mcps_forge.space import build_space
from mcps_forge.synthetic import make_blobs, make_planted

WORKERS_ENV = "MCPS_FORGE_WORKERS"
EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE = 0, 1, 2


@dataclass
class RunConfig:
    dataset: str
    out: str
    space: str = "full"
    optimizer: str = "tpe"
    seeds: list[int] = field(default_factory=lambda: list(range(25)))
    budget_evals: int = 500
    budget_seconds: float = 300.0
    eval_timeout: float = 10.0
    eval_memory: int | None = 3 * 1024**3
    schema: str | None = None
    test: str | None = None
    missing_marker: str = "?"
    train_fraction: float = 0.7
    split_seed: int = 0
    folds: int = 10
    analysis_seed: int = 0
    set: dict = field(default_factory=dict)

    def budget(self) -> Budget:
        return Budget(self.budget_seconds, self.budget_evals, self.eval_timeout, self.eval_memory)

    def validate(self) -> None:
        if not self.seeds:
            raise ValueError("the seed list is empty")
        if self.space.lower() not in ("new", "full"):
            raise ValueError(f"unknown space {self.space!r}")
        if self.optimizer not in STRATEGIES:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        for p in (self.dataset, self.schema, self.test):
            if p is not None and not Path(p).exists():
                raise FileNotFoundError(f"{p} does not exist")
        check_overrides(self.set)
        self.budget()


def parse_seeds(text) -> list[int]:
    """``N`` means seeds 0..N-1; a comma list is taken literally."""
    if isinstance(text, int):
        return list(range(text))
    if isinstance(text, list):
        return [int(s) for s in text]
    text = str(text).strip()
    if "," in text:
        seeds = [int(s) for s in text.split(",") if s.strip()]
        if len(set(seeds)) != len(seeds):
            raise ValueError("duplicate seeds")
        return seeds
    n = int(text)
    if n < 1:
        raise ValueError("seed count must be positive")
    return list(range(n))


def _scalar(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_sets(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = _scalar(value.strip())
    return out


FLAG_FIELDS = {
    "dataset": "dataset", "out": "out", "space": "space", "optimizer": "optimizer", "seeds": "seeds",
    "budget_evals": "budget_evals", "budget_seconds": "budget_seconds", "eval_timeout": "eval_timeout",
    "schema": "schema", "test": "test", "missing_marker": "missing_marker", "train_fraction": "train_fraction",
    "split_seed": "split_seed", "folds": "folds",
}


def run_config_from_args(args) -> RunConfig:
    doc = {}
    if getattr(args, "config", None):
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        unknown = set(doc) - set(RunConfig.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown run configuration keys: {sorted(unknown)}")
    for flag, key in FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            doc[key] = value
    if getattr(args, "set", None):
        doc["set"] = {**doc.get("set", {}), **parse_sets(args.set)}
    if "seeds" in doc:
        doc["seeds"] = parse_seeds(doc["seeds"])
    if "dataset" not in doc:
        raise ValueError("--dataset is required")
    if "out" not in doc:
        stem = Path(doc["dataset"]).stem
        doc["out"] = f"runs/{stem}-{doc.get('space', 'full')}-{doc.get('optimizer', 'tpe')}"
    cfg = RunConfig(**doc)
    cfg.space = cfg.space.lower()
    return cfg


def _load_data(cfg: RunConfig):
    schema = cfg.schema or "auto"
    data = load_csv(cfg.dataset, schema, cfg.missing_marker)
    if cfg.test:
        test = load_csv(cfg.test, schema, cfg.missing_marker, name=data.name)
        if test.columns != data.columns or test.classes != data.classes:
            raise DataError("test file does not share the training file's columns and classes")
        return data, data, test
    train, test = split_holdout(data, cfg.train_fraction, cfg.split_seed)
    return data, train, test


def _seed_job(root: str, cfg: RunConfig, train, test, seed: int, dataset_name: str) -> dict:
    space = build_space(cfg.space)
    log_path = arch.seed_dir(Path(root), seed) / "log.jsonl"
    with arch.RunLog(log_path) as log:
        result = run(cfg.optimizer, space, train, test, cfg.budget(), seed, cfg.set, cfg.folds, log=log)
    arch.write_result(Path(root), result, space, dataset_name)
    return {
        "seed": seed,
        "feasible": result.feasible,
        "cv_error": result.incumbent.cv_error if result.feasible else None,
        "holdout_error": result.holdout_error,
        "evaluations": len(result.history),
        "message": result.final_message,
    }


def compose(cfg: RunConfig, overwrite: bool = False, quiet: bool = False) -> tuple[int, list[dict]]:
    cfg.validate()
    data, train, test = _load_data(cfg)
    root = Path(cfg.out)
    if (root / arch.MANIFEST).exists():
        if not overwrite:
            raise FileExistsError(f"{root} already holds an archive (use --overwrite)")
        shutil.rmtree(root / "runs", ignore_errors=True)
        shutil.rmtree(root / "report", ignore_errors=True)
    doc = asdict(cfg)
    doc["out"] = str(root)
    arch.write_manifest(root, doc, Path(cfg.dataset), data.name, data.n_rows, cfg.analysis_seed)
    workers = max(1, int(os.environ.get(WORKERS_ENV, "1") or 1))
    if workers == 1 or len(cfg.seeds) == 1:
        summaries = [_seed_job(str(root), cfg, train, test, s, data.name) for s in cfg.seeds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_seed_job, str(root), cfg, train, test, s, data.name) for s in cfg.seeds]
            summaries = [f.result() for f in futures]
    if not quiet:
        for s in summaries:
            cv = "infeasible" if not s["feasible"] else f"cv={s['cv_error']:.4f}"
            hold = "" if s["holdout_error"] is None else f" holdout={s['holdout_error']:.4f}"
            print(f"seed {s['seed']:>4}: {s['evaluations']} evaluations, {cv}{hold}")
    feasible = sum(s["feasible"] for s in summaries)
    if not quiet:
        print(f"archive: {root} ({feasible}/{len(summaries)} runs feasible)")
    return (EXIT_OK if feasible else EXIT_INFEASIBLE), summaries


# --- subcommands ----------------------------------------------------------

def _fail(msg: str, code: int = EXIT_USAGE) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def cmd_compose(args) -> int:
    try:
        cfg = run_config_from_args(args)
        code, _ = compose(cfg, overwrite=args.overwrite)
        return code
    except (FileNotFoundError, FileExistsError, DataError, ValueError, KeyError) as exc:
        return _fail(str(exc))


def cmd_analyze(args) -> int:
    try:
        a = arch.load_archive(args.archive)
        a.verify_dataset()
        explicit = args.analyses is not None
        analyses = [s.strip() for s in args.analyses.split(",")] if explicit else list(reporting.ANALYSES)
        paths = reporting.analyze_archive(a, analyses, args.pick, args.samples, not args.without_replacement,
                                          plots=not args.no_plots, strict=explicit)
    except (arch.ArchiveError, AnalysisError, ValueError) as exc:
        return _fail(str(exc))
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        archives = [arch.load_archive(p) for p in args.archives]
        md, rows, est = reporting.comparison_report(archives, args.pick, args.samples, args.seed,
                                                    not args.without_replacement)
    except (arch.ArchiveError, AnalysisError, ValueError) as exc:
        return _fail(str(exc))
    print(md)
    if args.out:
        for p in reporting.write_comparison(Path(args.out), md, rows, est, plots=not args.no_plots):
            print(p)
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    """Many seeds with half the budget against half the seeds with the full budget."""
    try:
        base = run_config_from_args(args)
        root = Path(base.out)
        wide = RunConfig(**{**asdict(base), "seeds": list(range(args.seeds_wide)), "out": str(root / "wide"),
                            "budget_evals": max(1, base.budget_evals // 2), "budget_seconds": base.budget_seconds / 2})
        deep = RunConfig(**{**asdict(base), "seeds": list(range(args.seeds_deep)), "out": str(root / "deep")})
        for c in (wide, deep):
            compose(c, overwrite=args.overwrite, quiet=True)
        archives = [arch.load_archive(wide.out), arch.load_archive(deep.out)]
        labels = [f"{args.seeds_wide} seeds x T/2", f"{args.seeds_deep} seeds x T"]
        md, rows, est = reporting.comparison_report(archives, args.pick, args.samples, base.analysis_seed,
                                                    labels=labels)
        reporting.write_comparison(root, md, rows, est, name="sensitivity", plots=not args.no_plots)
    except (FileNotFoundError, FileExistsError, DataError, ValueError, KeyError, arch.ArchiveError) as exc:
        return _fail(str(exc))
    print(md)
    return EXIT_OK


def cmd_catalogue(args) -> int:
    print(catalogue_json())
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.kind == "planted":
        d = make_planted(n_rows=args.rows, seed=args.seed)
    else:
        d = make_blobs(n_rows=args.rows, seed=args.seed, missing_fraction=args.missing)
    print(write_csv(d, args.out))
    return EXIT_OK


# --- parser ---------------------------------------------------------------

def _run_flags(p: argparse.ArgumentParser, seeds_flag: bool = True) -> None:
    p.add_argument("--dataset", help="training CSV (header row, class label in the last column)")
    p.add_argument("--schema", help="sidecar schema file: one 'column = continuous|categorical' per line")
    p.add_argument("--test", help="separate test CSV instead of a 70/30 split")
    p.add_argument("--space", choices=["new", "full"], type=str.lower)
    p.add_argument("--optimizer", choices=list(STRATEGIES))
    if seeds_flag:
        p.add_argument("--seeds", help="seed count N (seeds 0..N-1) or comma list")
    p.add_argument("--budget-evals", dest="budget_evals", type=int)
    p.add_argument("--budget-seconds", dest="budget_seconds", type=float)
    p.add_argument("--eval-timeout", dest="eval_timeout", type=float)
    p.add_argument("--folds", type=int)
    p.add_argument("--split-seed", dest="split_seed", type=int)
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--missing-marker", dest="missing_marker")
    p.add_argument("--out", help="archive directory")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="strategy override: tpe.gamma, tpe.candidates, smac.trees, smac.interleave, intensify.ladder")
    p.add_argument("--config", help="JSON run configuration; flags override its values")
    p.add_argument("--overwrite", action="store_true", help="replace an existing archive")


def _bootstrap_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pick", type=int, default=4, help="runs per bootstrap draw (default 4)")
    p.add_argument("--samples", type=int, default=100_000, help="bootstrap draws B (default 100000)")
    p.add_argument("--without-replacement", action="store_true")
    p.add_argument("--no-plots", action="store_true", help="skip PNG figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcps-forge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compose", help="optimise pipelines for each seed and write a run archive")
    _run_flags(p)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("analyze", help="similarity, clustering, bootstrap and trajectories for one archive")
    p.add_argument("archive")
    p.add_argument("--analyses", help="comma list from similarity,cluster,bootstrap,trajectories (default all)")
    _bootstrap_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="compare archives in CV/holdout tables")
    p.add_argument("archives", nargs="*")
    p.add_argument("--out", help="directory for report.md, report.csv and report.png")
    p.add_argument("--seed", type=int, default=0, help="bootstrap seed")
    _bootstrap_flags(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sensitivity", help="many short runs against fewer long runs at equal total budget")
    _run_flags(p, seeds_flag=False)
    p.add_argument("--seeds-wide", type=int, default=50, help="seed count for the half-budget arm")
    p.add_argument("--seeds-deep", type=int, default=25, help="seed count for the full-budget arm")
    _bootstrap_flags(p)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("catalogue", help="print the component catalogue as JSON")
    p.set_defaults(func=cmd_catalogue)

    p = sub.add_parser("synth", help="write a synthetic dataset to CSV")
    p.add_argument("kind", choices=["planted", "blobs"])
    p.add_argument("--out", required=True)
    p.add_argument("--rows", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--missing", type=float, default=0.0, help="missing-cell fraction (blobs only)")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "report" and not args.archives:
        parser.error("report needs at least one archive")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
