"""CSV, Newick and Markdown artefacts for archives and archive comparisons."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

from mcps_forge import analyze, plotting
from mcps_forge.archive import Archive, ArchiveError
from mcps_forge.components import NONE_ID, STAGES

ANALYSES = ("similarity", "cluster", "bootstrap", "trajectories")
STAGE_HEADERS = ("MV", "OU", "TR", "DR", "SA", "predictor", "meta-predictor")


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def _write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def _md_table(header, rows) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return "\n".join(lines)


def _fmt(est: analyze.BootstrapEstimate | None) -> str:
    return "n/a" if est is None else est.formatted()


def stage_row(space: str, methods: Sequence[str] | None) -> list[str]:
    """Seven stage cells; stages outside the space are shown as '-'."""
    if methods is None:
        return ["-"] * len(STAGES)
    if space.upper() == "FULL":
        return [m if m != NONE_ID else "none" for m in methods]
    return ["-"] * 5 + list(methods)


def analyze_archive(archive: Archive, analyses: Sequence[str] = ANALYSES, pick: int = 4, B: int = 100_000,
                    replace: bool = True, plots: bool = True, strict: bool = False) -> list[Path]:
    """Write the selected analyses into ``<archive>/report``.

    With ``strict`` every requested analysis must be possible; otherwise
    clustering is skipped (and noted) when fewer than two feasible runs
    exist.
    """
    unknown = set(analyses) - set(ANALYSES)
    if unknown:
        raise ValueError(f"unknown analyses: {sorted(unknown)}")
    out = archive.report_dir
    out.mkdir(parents=True, exist_ok=True)
    seed = int(archive.manifest.get("analysis_seed", 0))
    runs = archive.runs
    feasible = [r for r in runs if r.feasible]
    written: list[Path] = []
    notes: list[str] = []
    summary = [
        f"# Analysis of {archive.dataset_name} / {archive.space} / {archive.strategy}",
        "",
        f"runs: {len(runs)}, feasible: {len(feasible)}",
    ]
    infeasible = [r.run_id for r in runs if not r.feasible]
    if infeasible:
        summary.append(f"excluded (infeasible): {', '.join(infeasible)}")

    matrix = None
    if "similarity" in analyses or "cluster" in analyses:
        matrix = analyze.similarity_matrix(runs, archive.space)
    if "similarity" in analyses:
        rows = [[rid] + [_num(v) for v in row] for rid, row in zip(matrix.run_ids, matrix.values)]
        written.append(_write_csv(out / "similarity.csv", ["run"] + matrix.run_ids, rows))
        summary += [
            "",
            "## Similarity",
            "",
            f"weights: {list(matrix.weights)}",
            f"mean pairwise similarity: {matrix.mean_similarity:.6f}",
            f"variance of CV error: {matrix.performance_variance:.6g}",
        ]
        if plots and matrix.run_ids:
            written.append(plotting.plot_similarity(matrix, out / "similarity.png"))
    if "cluster" in analyses:
        if len(matrix.run_ids) < 2:
            if strict:
                raise analyze.AnalysisError(f"clustering needs at least 2 feasible runs, archive has {len(matrix.run_ids)}")
            notes.append("clustering skipped: fewer than 2 feasible runs")
        else:
            tree = analyze.cluster(matrix)
            (out / "dendrogram.nwk").write_text(tree.to_newick() + "\n", encoding="utf-8")
            written.append(out / "dendrogram.nwk")
            n = len(tree.leaves)
            rows = [
                [n + j, m.left, m.right, _num(m.distance), m.size, _num(m.mean_cv), _num(m.std_cv)]
                for j, m in enumerate(tree.merges)
            ]
            written.append(_write_csv(out / "clusters.csv",
                                      ["cluster", "left", "right", "distance", "size", "mean_cv_error", "std_cv_error"], rows))
            order = [tree.leaves[i] for i in tree.leaf_order()]
            summary += ["", "## Clusters", "", f"leaf order: {', '.join(order)}"]
            if plots:
                written.append(plotting.plot_dendrogram(tree, out / "dendrogram.png"))
    if "bootstrap" in analyses:
        cv_est, hold_est = analyze.estimate_pair(runs, pick, B, seed, replace)
        rows = []
        for name, est in (("cv_error", cv_est), ("holdout_error", hold_est)):
            if est is not None:
                rows.append([name, _num(est.mean), _num(est.ci_low), _num(est.ci_high), est.B, est.pick, est.replace])
        written.append(_write_csv(out / "bootstrap.csv", ["metric", "mean", "ci_low", "ci_high", "B", "pick", "replace"], rows))
        summary += [
            "",
            "## Bootstrap",
            "",
            f"B = {B}, pick = {pick}, {'with' if replace else 'without'} replacement, seed = {seed}",
            "",
            _md_table(["metric", "mean [2.5%, 97.5%]"], [["CV error", _fmt(cv_est)], ["holdout error", _fmt(hold_est)]]),
        ]
        if plots:
            written.append(plotting.plot_estimates(["CV", "holdout"], [cv_est, hold_est], out / "bootstrap.png", "error"))
    if "trajectories" in analyses:
        ts = analyze.trajectories(runs)
        header = ["elapsed_seconds"] + ts.run_ids + ["min", "median", "max"]
        rows = [
            [_num(t)] + [_num(v) for v in ts.values[:, j]] + [_num(ts.minimum[j]), _num(ts.median[j]), _num(ts.maximum[j])]
            for j, t in enumerate(ts.grid)
        ]
        written.append(_write_csv(out / "trajectories.csv", header, rows))
        if plots:
            written.append(plotting.plot_trajectories(ts, out / "trajectories.png"))
    best = min(feasible, key=lambda r: (r.cv_error, r.seed), default=None)
    if best is not None:
        summary += [
            "",
            "## Best incumbent",
            "",
            _md_table(["run", *STAGE_HEADERS, "CV error", "holdout error"],
                      [[best.run_id, *stage_row(best.space, best.methods), f"{best.cv_error:.4f}",
                        "n/a" if best.holdout_error is None else f"{best.holdout_error:.4f}"]]),
        ]
    if notes:
        summary += ["", "## Notes", ""] + [f"- {n}" for n in notes]
    (out / "summary.md").write_text("\n".join(summary) + "\n", encoding="utf-8")
    written.append(out / "summary.md")
    return written


def group_by_dataset(archives: Sequence[Archive]) -> dict[str, list[Archive]]:
    groups: dict[str, list[Archive]] = {}
    for a in archives:
        groups.setdefault(a.dataset_name, []).append(a)
    for name, group in groups.items():
        sums = {a.checksum for a in group}
        if len(sums) > 1:
            raise ArchiveError(f"archives named {name!r} were run on different data (checksums differ); "
                               "refusing to put them in one table")
    return groups


def column_label(archive: Archive, group: Sequence[Archive]) -> str:
    spaces = {a.space for a in group}
    return archive.strategy if len(spaces) == 1 else f"{archive.strategy} ({archive.space})"


def comparison_report(archives: Sequence[Archive], pick: int = 4, B: int = 100_000, seed: int = 0,
                      replace: bool = True, labels: Sequence[str] | None = None) -> tuple[str, list[list[str]], dict]:
    """Markdown tables, CSV rows and raw estimates comparing archives.

    One table per dataset with one column per archive; then one best
    incumbent row per archive.
    """
    if not archives:
        raise ValueError("no archives given")
    groups = group_by_dataset(archives)
    md: list[str] = []
    csv_rows: list[list[str]] = []
    estimates: dict = {}
    label_of = {id(a): (labels[k] if labels else None) for k, a in enumerate(archives)}
    for name, group in groups.items():
        cols = [label_of[id(a)] or column_label(a, group) for a in group]
        cv_cells, hold_cells = [], []
        for a, col in zip(group, cols):
            cv_est, hold_est = analyze.estimate_pair(a.runs, pick, B, seed, replace)
            estimates[(name, col)] = (cv_est, hold_est)
            cv_cells.append(_fmt(cv_est))
            hold_cells.append(_fmt(hold_est))
            for metric, est in (("cv_error", cv_est), ("holdout_error", hold_est)):
                csv_rows.append([name, col, metric,
                                 *(["", "", ""] if est is None else [_num(est.mean), _num(est.ci_low), _num(est.ci_high)]),
                                 str(sum(r.feasible for r in a.runs)), str(len(a.runs))])
        md += [
            f"## {name}",
            "",
            f"Bootstrap over best-of-{pick} runs, B = {B}; mean [2.5%, 97.5%].",
            "",
            _md_table(["metric", *cols], [["10-fold CV error", *cv_cells], ["holdout error", *hold_cells]]),
            "",
        ]
    rows = []
    for a in archives:
        col = label_of[id(a)] or column_label(a, groups[a.dataset_name])
        best = min((r for r in a.runs if r.feasible), key=lambda r: (r.cv_error, r.seed), default=None)
        if best is None:
            rows.append([a.dataset_name, col, *(["-"] * len(STAGES)), "infeasible"])
        else:
            hold = "n/a" if best.holdout_error is None else f"{best.holdout_error:.4f}"
            rows.append([a.dataset_name, col, *stage_row(best.space, best.methods), hold])
    md += ["## Best configurations", "", _md_table(["dataset", "strategy", *STAGE_HEADERS, "holdout error"], rows), ""]
    return "\n".join(md), csv_rows, estimates


COMPARISON_HEADER = ["dataset", "column", "metric", "mean", "ci_low", "ci_high", "feasible_runs", "runs"]


def write_comparison(out: Path, markdown: str, rows, estimates, name: str = "report", plots: bool = True) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}.md").write_text(markdown, encoding="utf-8")
    written = [out / f"{name}.md", _write_csv(out / f"{name}.csv", COMPARISON_HEADER, rows)]
    if plots and estimates:
        labels = [f"{d}\n{c}" for d, c in estimates]
        written.append(plotting.plot_estimates(labels, [e[1] for e in estimates.values()], out / f"{name}.png"))
    return written

