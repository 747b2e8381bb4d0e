"""On-disk layout of a multi-seed run archive.

::

    <out>/manifest.json
    <out>/runs/seed_0003/log.jsonl        one evaluation record per line
    <out>/runs/seed_0003/incumbent.json   net serialisation (absent if infeasible)
    <out>/runs/seed_0003/incumbent.dot
    <out>/runs/seed_0003/trajectory.csv
    <out>/runs/seed_0003/result.json
    <out>/report/                         analysis output
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from mcps_forge import __version__, mcps
from mcps_forge.analyze import RunSummary
from mcps_forge.data import file_checksum
from mcps_forge.evaluate import EvaluationRecord
from mcps_forge.optimize import RunResult
from mcps_forge.space import SearchSpace

MANIFEST = "manifest.json"
FORMAT = 1


class ArchiveError(RuntimeError):
    pass


def _dump(doc, path: Path) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def seed_dir(root: Path, seed: int) -> Path:
    return Path(root) / "runs" / f"seed_{seed:04d}"


def write_manifest(root: Path, run_config: dict, dataset_path: Path, dataset_name: str, n_rows: int,
                   analysis_seed: int = 0) -> dict:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    doc = {
        "format": FORMAT,
        "version": __version__,
        "run_config": run_config,
        "dataset": {
            "path": str(Path(dataset_path).resolve()),
            "name": dataset_name,
            "rows": n_rows,
            "sha256": file_checksum(dataset_path),
        },
        "analysis_seed": analysis_seed,
    }
    _dump(doc, root / MANIFEST)
    return doc


class RunLog:
    """Append-only line log; every record is flushed as it is written."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8")

    def __call__(self, record: EvaluationRecord) -> None:
        self._fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_log(path: Path) -> list[EvaluationRecord]:
    """Parse a run log, ignoring a truncated final line."""
    out = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for k, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            out.append(EvaluationRecord.from_dict(json.loads(line)))
        except json.JSONDecodeError:
            if k == len(lines) - 1:
                break
            raise ArchiveError(f"{path}: corrupt record on line {k + 1}") from None
    return out


def write_result(root: Path, result: RunResult, space: SearchSpace, dataset_name: str) -> Path:
    d = seed_dir(root, result.seed)
    d.mkdir(parents=True, exist_ok=True)
    methods = None
    if result.feasible:
        net = space.instantiate(result.config) if space.components else None
        if net is not None:
            (d / "incumbent.json").write_text(mcps.to_json(net) + "\n", encoding="utf-8")
            (d / "incumbent.dot").write_text(mcps.to_dot(net, f"seed_{result.seed}"), encoding="utf-8")
            methods = mcps.flatten(net, space.slot_names)
        else:
            methods = space.slot_methods(result.config)
    with open(d / "trajectory.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["elapsed_seconds", "best_cv_error"])
        for t, v in result.trajectory.points:
            w.writerow([repr(t), repr(v)])
    statuses = {}
    for r in result.history:
        statuses[r.status] = statuses.get(r.status, 0) + 1
    doc = {
        "seed": result.seed,
        "strategy": result.strategy,
        "space": result.space,
        "dataset": dataset_name,
        "feasible": result.feasible,
        "n_evaluations": len(result.history),
        "status_counts": statuses,
        "cv_error": result.incumbent.cv_error if result.feasible else None,
        "incumbent_index": result.incumbent.eval_index if result.feasible else None,
        "config": result.config.to_dict() if result.feasible else None,
        "methods": methods,
        "holdout_error": result.holdout_error,
        "message": result.final_message,
        "elapsed_seconds": result.elapsed,
    }
    _dump(doc, d / "result.json")
    return d


def _read_trajectory(path: Path) -> tuple[tuple[float, float], ...]:
    if not path.exists():
        return ()
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))[1:]
    return tuple((float(t), float(v)) for t, v in rows)


@dataclass
class Archive:
    root: Path
    manifest: dict
    runs: list[RunSummary]

    @property
    def dataset_name(self) -> str:
        return self.manifest["dataset"]["name"]

    @property
    def checksum(self) -> str:
        return self.manifest["dataset"]["sha256"]

    @property
    def strategy(self) -> str:
        return self.manifest["run_config"]["optimizer"]

    @property
    def space(self) -> str:
        return self.manifest["run_config"]["space"].upper()

    @property
    def report_dir(self) -> Path:
        return self.root / "report"

    def verify_dataset(self) -> None:
        path = Path(self.manifest["dataset"]["path"])
        if not path.exists():
            raise ArchiveError(f"dataset {path} recorded in the manifest no longer exists")
        actual = file_checksum(path)
        if actual != self.checksum:
            raise ArchiveError(
                f"dataset checksum mismatch for {path}: manifest has {self.checksum[:12]}..., "
                f"file has {actual[:12]}...; the archive is stale"
            )

    def log(self, seed: int) -> list[EvaluationRecord]:
        return read_log(seed_dir(self.root, seed) / "log.jsonl")


def load_archive(root) -> Archive:
    root = Path(root)
    mpath = root / MANIFEST
    if not mpath.exists():
        raise ArchiveError(f"{root} is not a run archive (no {MANIFEST})")
    manifest = json.loads(mpath.read_text(encoding="utf-8"))
    runs = []
    for d in sorted((root / "runs").glob("seed_*")):
        rpath = d / "result.json"
        if not rpath.exists():
            continue
        doc = json.loads(rpath.read_text(encoding="utf-8"))
        runs.append(
            RunSummary(
                run_id=f"{doc['strategy']}-s{doc['seed']}",
                seed=doc["seed"],
                strategy=doc["strategy"],
                space=doc["space"],
                dataset=doc["dataset"],
                feasible=doc["feasible"],
                methods=tuple(doc["methods"]) if doc.get("methods") else None,
                cv_error=doc["cv_error"],
                holdout_error=doc["holdout_error"],
                trajectory=_read_trajectory(d / "trajectory.csv"),
                config=doc.get("config"),
            )
        )
    return Archive(root, manifest, runs)
