"""Files written for runs and sweeps.

Run directory layout::

    summary.json              aggregate metrics and the config that produced them
    episodes.csv              one row per episode
    episodes/episode_NNNN.csv one row per control step
    plot_data.csv             (x, y, series) triples

Per-step columns: ``t, s0.., a0.., u_s0.., c0.., V, viol, sat, residual``.
A sweep writes ``sweep.json`` plus one run directory per cell under
``cells/`` and a combined ``plot_data.csv`` with one series per cell.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

from .runner import ExperimentResult, SweepCell, summary_json

EPISODE_COLUMNS = ("episode", "seed", "success", "steps", "return", "violation", "fault")


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    return repr(float(x))


def step_header(record) -> list[str]:
    return (
        ["t"]
        + [f"s{i}" for i in range(record.state.shape[1])]
        + [f"a{i}" for i in range(record.action.shape[1])]
        + [f"u_s{i}" for i in range(record.u_s.shape[1])]
        + [f"c{i}" for i in range(record.c.shape[1] if record.c.ndim == 2 else 0)]
        + ["V", "viol", "sat", "residual"]
    )


def write_episode_csv(record, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(step_header(record))
        for i in range(record.steps):
            w.writerow(
                [_fmt(record.t[i])]
                + [_fmt(v) for v in record.state[i]]
                + [_fmt(v) for v in record.action[i]]
                + [_fmt(v) for v in record.u_s[i]]
                + [_fmt(v) for v in record.c[i]]
                + [_fmt(record.V[i]), _fmt(record.viol[i]), _fmt(bool(record.sat[i])), _fmt(record.residual[i])]
            )


def write_episode_index(records, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EPISODE_COLUMNS)
        for r in records:
            w.writerow([r.index, r.seed, _fmt(r.success), r.steps, _fmt(r.ret), _fmt(r.violation), r.fault or ""])


def read_episode_index(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_plot_data(triples, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "series"])
        for x, y, series in triples:
            w.writerow([_fmt(x), _fmt(y), series])


def run_plot_triples(out_dir: Path) -> list:
    """Per-episode returns plus each episode's planar trajectory."""
    triples = [(int(row["episode"]), float(row["return"]), "return")
               for row in read_episode_index(out_dir / "episodes.csv")]
    for path in sorted((out_dir / "episodes").glob("episode_*.csv")):
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                if "s1" in row:
                    triples.append((float(row["s0"]), float(row["s1"]), f"trajectory:{path.stem}"))
    return triples


def emit_outputs(result: ExperimentResult, out_dir, step_logs: bool = True) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "summary.json").write_text(result.summary_json())
    write_episode_index(result.records, out_dir / "episodes.csv")
    if step_logs:
        (out_dir / "episodes").mkdir(exist_ok=True)
        for r in result.records:
            write_episode_csv(r, out_dir / "episodes" / f"episode_{r.index:04d}.csv")
    write_plot_data(run_plot_triples(out_dir), out_dir / "plot_data.csv")
    return out_dir


def sweep_plot_triples(out_dir: Path) -> list:
    """Return per episode, one series per sweep cell."""
    listing = json.loads((out_dir / "sweep.json").read_text())
    triples = []
    for cell in listing:
        for row in read_episode_index(out_dir / cell["dir"] / "episodes.csv"):
            triples.append((int(row["episode"]), float(row["return"]), cell["label"]))
    return triples


def emit_sweep(cells: list[SweepCell], out_dir, step_logs: bool = False) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    listing = []
    for i, cell in enumerate(cells):
        rel = f"cells/cell_{i:03d}"
        emit_outputs(cell.result, out_dir / rel, step_logs=step_logs)
        listing.append({"label": cell.label, "overrides": cell.overrides, "dir": rel, "summary": cell.result.summary})
    (out_dir / "sweep.json").write_text(summary_json(listing))
    write_plot_data(sweep_plot_triples(out_dir), out_dir / "plot_data.csv")
    return out_dir


def emit_plots(out_dir) -> Path:
    """Rebuild ``plot_data.csv`` from a finished run or sweep directory."""
    out_dir = Path(out_dir)
    if (out_dir / "sweep.json").exists():
        triples = sweep_plot_triples(out_dir)
    elif (out_dir / "episodes.csv").exists():
        triples = run_plot_triples(out_dir)
    else:
        raise FileNotFoundError(f"{out_dir} holds neither a run nor a sweep")
    path = out_dir / "plot_data.csv"
    write_plot_data(triples, path)
    return path
