"""Render violin / MSE / MAD figures from experiment result directories.

Inputs are the harness CSV files plus meta.json (for the per-parameter
truths); nothing is ever written back to them. Rendering is a pure function
of the inputs and the spec: the scatter jitter uses a fixed seed and the PNG
metadata is pinned, so the same inputs produce identical bytes.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["FigureKind", "FigureSpec", "SchemaError", "build_figure", "render"]

JITTER_SEED = 0
LOG_SCALE_DECADES = 3.0

ESTIMATE_COLUMNS = ["family", "param", "estimator", "replication", "estimate"]
SUMMARY_COLUMNS = ["family", "param", "estimator", "mse", "mad"]


class SchemaError(ValueError):
    """An input CSV is missing a required column."""


class FigureKind(enum.Enum):
    VIOLIN = "violin"
    MSE = "mse"
    MAD = "mad"


@dataclass(frozen=True)
class FigureSpec:
    estimates_path: Path
    summary_path: Path
    meta_path: Path
    kind: FigureKind
    out_path: Path
    y_clip: Optional[float] = None

    @classmethod
    def for_directory(
        cls,
        directory: str | Path,
        kind: FigureKind | str,
        out_path: str | Path,
        y_clip: Optional[float] = None,
    ) -> "FigureSpec":
        directory = Path(directory)
        return cls(
            estimates_path=directory / "estimates.csv",
            summary_path=directory / "summary.csv",
            meta_path=directory / "meta.json",
            kind=FigureKind(kind) if isinstance(kind, str) else kind,
            out_path=Path(out_path),
            y_clip=y_clip,
        )


def _read_rows(path: Path, required: list[str]) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [column for column in required if column not in header]
        if missing:
            raise SchemaError(f"{path}: missing column {missing[0]!r}")
        return list(reader)


def _truths(meta_path: Path) -> dict[float, float]:
    meta = json.loads(Path(meta_path).read_text(encoding="utf-8"))
    return {float(k): float(v) for k, v in meta.get("truths", {}).items()}


def _should_use_log_scale(values: list[float]) -> bool:
    positive = [v for v in values if v > 0]
    if len(positive) < 2:
        return False
    return math.log10(max(positive) / min(positive)) > LOG_SCALE_DECADES


def _estimator_order(rows: list[dict]) -> list[str]:
    seen: list[str] = []
    for row in rows:
        if row["estimator"] not in seen:
            seen.append(row["estimator"])
    return seen


def _build_violin(spec: FigureSpec, fig, ax) -> None:
    rows = _read_rows(spec.estimates_path, ESTIMATE_COLUMNS)
    truths = _truths(spec.meta_path)
    ax.set_ylabel("estimate - truth")
    ax.set_xlabel("parameter")
    if not rows:
        ax.set_title("no data")
        return
    params = sorted({float(row["param"]) for row in rows})
    estimators = _estimator_order(rows)
    groups: dict[tuple[float, str], list[float]] = {}
    for row in rows:
        param = float(row["param"])
        centered = float(row["estimate"]) - truths.get(param, 0.0)
        groups.setdefault((param, row["estimator"]), []).append(centered)

    jitter = np.random.default_rng(JITTER_SEED)
    width = 0.8 / max(len(estimators), 1)
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for ei, estimator in enumerate(estimators):
        positions = []
        data = []
        for pi, param in enumerate(params):
            values = groups.get((param, estimator))
            if not values:
                continue
            positions.append(pi + (ei - (len(estimators) - 1) / 2) * width)
            data.append(values)
        if not data:
            continue
        color = colors[ei % len(colors)]
        parts = ax.violinplot(
            data, positions=positions, widths=width * 0.9, showmedians=True
        )
        for body in parts["bodies"]:
            body.set_facecolor(color)
            body.set_alpha(0.45)
        for key in ("cmedians", "cbars", "cmins", "cmaxes"):
            parts[key].set_color(color)
        for pos, values in zip(positions, data):
            xs = pos + (jitter.random(len(values)) - 0.5) * width * 0.5
            ax.plot(xs, values, ".", color=color, markersize=2, alpha=0.5)
        ax.plot([], [], color=color, label=estimator)
    ax.axhline(0.0, color="black", linewidth=0.8, linestyle=":")
    ax.set_xticks(range(len(params)))
    ax.set_xticklabels([f"{p:g}" for p in params])
    ax.legend(loc="best", fontsize=8)
    if spec.y_clip is not None:
        ax.set_ylim(-spec.y_clip, spec.y_clip)


def _build_error_curve(spec: FigureSpec, fig, ax, column: str) -> None:
    rows = _read_rows(spec.summary_path, SUMMARY_COLUMNS)
    ax.set_ylabel(column.upper())
    ax.set_xlabel("parameter")
    if not rows:
        ax.set_title("no data")
        return
    params = sorted({float(row["param"]) for row in rows})
    estimators = _estimator_order(rows)
    values = {
        (float(row["param"]), row["estimator"]): float(row[column]) for row in rows
    }
    for estimator in estimators:
        ys = [values.get((param, estimator), math.nan) for param in params]
        ax.plot(params, ys, marker="o", label=estimator)
    if _should_use_log_scale([v for v in values.values()]):
        ax.set_yscale("log")
    if spec.y_clip is not None:
        ax.set_ylim(top=spec.y_clip)
    ax.legend(loc="best", fontsize=8)


def build_figure(spec: FigureSpec):
    """Build the matplotlib figure for a spec without writing anything."""
    fig, ax = plt.subplots(figsize=(7.5, 4.5), dpi=120)
    try:
        if spec.kind is FigureKind.VIOLIN:
            _build_violin(spec, fig, ax)
        elif spec.kind is FigureKind.MSE:
            _build_error_curve(spec, fig, ax, "mse")
        else:
            _build_error_curve(spec, fig, ax, "mad")
        fig.tight_layout()
    except Exception:
        plt.close(fig)
        raise
    return fig


def render(spec: FigureSpec) -> Path:
    """Render a spec to its output image; returns the written path."""
    fig = build_figure(spec)
    try:
        spec.out_path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(
            spec.out_path,
            format="png",
            metadata={"Software": "render-figures"},
        )
    finally:
        plt.close(fig)
    return spec.out_path
