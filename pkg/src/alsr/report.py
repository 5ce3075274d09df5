"""Consolidate finished run directories into one comparison table and summary."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .ablation import mean_std
from .evaluation import METRIC_NOTE, METRICS
from .manifest import write_manifest
from .telemetry import HEATMAP_COLUMNS, fmt


def run_label(metrics: dict) -> str:
    if not metrics.get("weighting_active", metrics.get("alpha", 0) > 0):
        return "baseline"
    return f"adaptive ({metrics['kernel']}, alpha={fmt(metrics['alpha'])})"


def _final_concentration(metrics):
    conc = metrics.get("variance_concentration") or {}
    if not conc:
        return None
    last = max(conc, key=int)
    return conc[last]


def _load(run_dir: Path):
    metrics = json.loads((run_dir / "metrics.json").read_text())
    for m in METRICS:
        float(metrics["final"][m])
    return metrics


def assemble_report(run_dirs, out_dir):
    """Merge per-run outputs under ``out_dir``. Returns ``(groups, errors)``.

    Unreadable runs are reported in ``errors`` and skipped; everything else is
    still written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    groups = {}
    errors = []
    heat_rows = []
    for d in map(Path, run_dirs):
        try:
            metrics = _load(d)
        except (OSError, ValueError, KeyError, TypeError) as e:
            errors.append({"run": d.as_posix(), "error": f"{type(e).__name__}: {e}"})
            continue
        label = run_label(metrics)
        groups.setdefault(label, []).append((d, metrics))
        heat = d / "heatmap.csv"
        if heat.exists():
            with heat.open(newline="") as fh:
                for r in csv.DictReader(fh):
                    heat_rows.append([d.as_posix(), label] + [r[c] for c in HEATMAP_COLUMNS])

    # baseline first, then adaptive groups in name order
    order = sorted(groups, key=lambda g: (g != "baseline", g))
    cols = ["method", "n_runs", "seeds"]
    for m in METRICS + ("variance_concentration",):
        cols += [f"{m}_mean", f"{m}_std"]
    table = []
    for g in order:
        runs = groups[g]
        row = {"method": g, "n_runs": len(runs), "seeds": " ".join(str(m["seed"]) for _, m in sorted(runs, key=lambda r: r[1]["seed"]))}
        for m in METRICS:
            row[f"{m}_mean"], row[f"{m}_std"] = mean_std([r[1]["final"][m] for r in runs])
        conc = [c for c in (_final_concentration(r[1]) for r in runs) if c is not None]
        row["variance_concentration_mean"], row["variance_concentration_std"] = mean_std(conc)
        table.append(row)

    with (out / "comparison.csv").open("w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in table:
            cells = [row["method"], str(row["n_runs"]), row["seeds"]]
            cells += ["" if row[c] is None else fmt(row[c]) for c in cols[3:]]
            fh.write(",".join(f'"{c}"' if "," in c else c for c in cells) + "\n")

    with (out / "heatmaps.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "method", *HEATMAP_COLUMNS])
        w.writerows(heat_rows)

    (out / "errors.json").write_text(json.dumps(errors, indent=2) + "\n")
    (out / "summary.md").write_text(_markdown(table, errors, [Path(d).as_posix() for d in run_dirs]))
    write_manifest(out)
    return table, errors


def _pm(mu, sd):
    if mu is None:
        return "n/a"
    return fmt(mu) if sd is None else f"{fmt(mu)} ± {fmt(sd)}"


def _markdown(table, errors, run_dirs):
    lines = [
        "# Run comparison",
        "",
        f"Metrics: {METRIC_NOTE}. ± is the sample standard deviation over seeds.",
        "",
        "| method | runs | energy distance | sliced W1 | variance concentration |",
        "|---|---|---|---|---|",
    ]
    for r in table:
        lines.append(
            f"| {r['method']} | {r['n_runs']} | {_pm(r['energy_distance_mean'], r['energy_distance_std'])} "
            f"| {_pm(r['sliced_wasserstein_mean'], r['sliced_wasserstein_std'])} "
            f"| {_pm(r['variance_concentration_mean'], r['variance_concentration_std'])} |"
        )
    lines += ["", "## Inputs", ""] + [f"- `{d}`" for d in run_dirs]
    if errors:
        lines += ["", "## Errors", ""] + [f"- `{e['run']}`: {e['error']}" for e in errors]
    lines += [
        "", "## Files", "",
        "- `comparison.csv`: one row per method, mean and std over seeds",
        "- `heatmaps.csv`: every run's per-bin loss statistics, labelled by run and method",
        "- `errors.json`: runs that could not be read",
        "- `summary.md`: this file",
        "- `manifest.json`: SHA-256 of every file above",
        "",
    ]
    return "\n".join(lines)
