"""Render rate-region figures and rate-comparison tables from CSV reports.

Consumes the delimited outputs of the ``macpolar`` CLI:

* region reports with header ``order_id,budget1,budget2,R1,R2,P1,P2,N,trials,seed``
  and an optional ``# sum_capacity=<float>`` comment line,
* compound tables with header ``N,rate_2N,rate_N,rate_compound``.

Rendering is read-only and deterministic: byte-identical inputs produce
identical image files.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["FigureSpec", "render_region", "render_table", "read_csv", "main"]

REGION_HEADER = ["order_id", "budget1", "budget2", "R1", "R2", "P1", "P2",
                 "N", "trials", "seed"]
TABLE_HEADER = ["N", "rate_2N", "rate_N", "rate_compound"]

# reference values for the sigma=1 baseline (average 2N rate, average N
# rate, compound rate), used by --compare-paper
BASELINE_RATES = {
    512: (0.378, 0.357, 0.374),
    1024: (0.400, 0.378, 0.396),
    2048: (0.418, 0.400, 0.415),
}


class MalformedCsvError(ValueError):
    pass


@dataclass
class FigureSpec:
    inputs: list[str]
    kind: str                      # "region" | "table"
    out: str
    xlabel: str = "R1 (bits/use)"
    ylabel: str = "R2 (bits/use)"
    capacity_overlay: bool = True
    capacity: float | None = None  # override; default comes from the CSV
    compare_paper: bool = False
    meta: dict = field(default_factory=dict)


def read_csv(path: str, expected_header: list[str]):
    """Read one report file; returns (rows, meta) where meta holds the
    ``key=value`` pairs found in leading comment lines."""
    meta = {}
    rows = []
    header = None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, _, v = tok.partition("=")
                        meta[k] = v
                continue
            cells = line.split(",")
            if header is None:
                header = cells
                if header != expected_header:
                    raise MalformedCsvError(
                        f"{path}: expected header {expected_header}, "
                        f"got {header}")
                continue
            if len(cells) != len(header):
                raise MalformedCsvError(f"{path}: ragged row {line!r}")
            rows.append(dict(zip(header, cells)))
    if header is None:
        raise MalformedCsvError(f"{path}: no header row")
    return rows, meta


def _pareto_staircase(points: np.ndarray) -> np.ndarray:
    """Staircase through the upper-right frontier of a point cloud."""
    order = np.lexsort((-points[:, 1], points[:, 0]))
    pts = points[order]
    front = []
    best = -np.inf
    for x, y in pts[::-1]:
        if y > best:
            front.append((x, y))
            best = y
    front = np.array(front[::-1])
    steps = [front[0]]
    for (x0, y0), (x1, y1) in zip(front[:-1], front[1:]):
        steps.append((x1, y0))
        steps.append((x1, y1))
    return np.array(steps)


def render_region(spec: FigureSpec) -> str:
    """Scatter plus per-length Pareto staircase of the achieved rate pairs,
    with the sum-capacity line overlaid."""
    all_rows = []
    capacity = spec.capacity
    for path in spec.inputs:
        rows, meta = read_csv(path, REGION_HEADER)
        all_rows.extend(rows)
        if capacity is None and "sum_capacity" in meta:
            capacity = float(meta["sum_capacity"])
        spec.meta.update(meta)
    fig, ax = plt.subplots(figsize=(5.2, 5.2))
    lengths = sorted({int(r["N"]) for r in all_rows})
    for N in lengths:
        pts = np.array([[float(r["R1"]), float(r["R2"])]
                        for r in all_rows if int(r["N"]) == N])
        ax.plot(pts[:, 0], pts[:, 1], ".", ms=4, alpha=0.6)
        stair = _pareto_staircase(pts)
        ax.plot(stair[:, 0], stair[:, 1], lw=1.2, label=f"N = {N}")
    if spec.capacity_overlay and capacity is not None:
        xs = np.linspace(0.0, capacity, 64)
        ax.plot(xs, capacity - xs, "k--", lw=1.0,
                label=f"R1+R2 = {capacity:.4g}")
        ax.set_xlim(0.0, capacity * 0.75)
        ax.set_ylim(0.0, capacity * 0.75)
    ax.set_xlabel(spec.xlabel)
    ax.set_ylabel(spec.ylabel)
    ax.grid(alpha=0.25, lw=0.4)
    ax.legend(fontsize=8, loc="upper right")
    fig.tight_layout()
    fig.savefig(spec.out, dpi=150, metadata={"Software": "macpolar-render"})
    plt.close(fig)
    return spec.out


def render_table(spec: FigureSpec) -> str:
    """Markdown table mirroring the three-column rate comparison."""
    rows = []
    for path in spec.inputs:
        got, meta = read_csv(path, TABLE_HEADER)
        rows.extend(got)
        spec.meta.update(meta)
    lines = []
    if spec.compare_paper:
        lines.append("| N | length 2N | length N | compound rate | max |delta| |")
        lines.append("|---|-----------|----------|---------------|------------|")
    else:
        lines.append("| N | length 2N | length N | compound rate |")
        lines.append("|---|-----------|----------|---------------|")
    for r in rows:
        N = int(r["N"])
        vals = (float(r["rate_2N"]), float(r["rate_N"]),
                float(r["rate_compound"]))
        cells = [str(N)] + [f"{v:.3f}" for v in vals]
        if spec.compare_paper:
            ref = BASELINE_RATES.get(N)
            delta = (max(abs(a - b) for a, b in zip(vals, ref))
                     if ref else float("nan"))
            cells.append(f"{delta:.4f}" if ref else "n/a")
        lines.append("| " + " | ".join(cells) + " |")
    text = "\n".join(lines) + "\n"
    with open(spec.out, "w") as fh:
        fh.write(text)
    return spec.out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="macpolar-render", description=__doc__)
    p.add_argument("--kind", required=True, choices=["region", "table"])
    p.add_argument("--in", dest="inputs", action="append", required=True,
                   help="input CSV (repeatable)")
    p.add_argument("--out", required=True)
    p.add_argument("--capacity", type=float, default=None,
                   help="sum-capacity override for the overlay line")
    p.add_argument("--no-capacity", action="store_true")
    p.add_argument("--compare-paper", action="store_true",
                   help="add a deviation column against the published "
                        "sigma=1 baseline rates")
    p.add_argument("--xlabel", default="R1 (bits/use)")
    p.add_argument("--ylabel", default="R2 (bits/use)")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(inputs=args.inputs, kind=args.kind, out=args.out,
                      xlabel=args.xlabel, ylabel=args.ylabel,
                      capacity_overlay=not args.no_capacity,
                      capacity=args.capacity,
                      compare_paper=args.compare_paper)
    try:
        if args.kind == "region":
            render_region(spec)
        else:
            render_table(spec)
    except (MalformedCsvError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {spec.out}")
    return 0


def main() -> None:
    sys.exit(run())
