"""Plain and winsorized importance-sampling estimators and their sample statistics.

A batch of importance weights is held in a `Sample`. The winsorized mean and
spread at a clamping level M are computed by `winsor_summary`; the spread uses
divisor n (no Bessel correction) because the selector's guarantee constants
are derived for that definition. All sums go through `math.fsum`: the weights
in the walk-counting experiment span ~25 orders of magnitude and naive
accumulation loses the small ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
import numpy as np

__all__ = [
    "Sample",
    "WinsorSummary",
    "winsorize",
    "is_estimate",
    "winsor_summary",
    "load_weights",
]


@dataclass(frozen=True)
class Sample:
    """A batch of real importance weights.

    Non-finite weights are rejected outright: an infinite weight signals a
    broken proposal, not a heavy tail.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("sample must contain at least one weight")
        if not np.isfinite(arr).all():
            raise ValueError("sample contains non-finite weights (NaN or inf)")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class WinsorSummary:
    """Winsorized mean, spread and scaled spread of a sample at one level.

    `sigma_hat` is the population-style standard deviation (divisor n) of the
    clamped values; `s_hat = t * sigma_hat / (sqrt(n) - t)` is the spread term
    the threshold selector compares means against.
    """

    level: float
    mean: float
    sigma_hat: float
    s_hat: float


def winsorize(y: float, level: float) -> float:
    """Clamp y into [-level, level]."""
    if not (level > 0) or not math.isfinite(level):
        raise ValueError(f"winsorization level must be a positive real, got {level}")
    y = float(y)
    if not math.isfinite(y):
        raise ValueError(f"cannot winsorize non-finite value {y}")
    return max(-level, min(y, level))


def is_estimate(sample: Sample) -> float:
    """Plain importance-sampling estimate: the arithmetic mean of the weights."""
    return math.fsum(sample.values) / sample.n


def winsor_summary(sample: Sample, level: float, t: float) -> WinsorSummary:
    """Mean and spread of the sample after clamping at `level`.

    Requires 0 < t < sqrt(n); otherwise s_hat would be negative or undefined.
    """
    if not (level > 0) or not math.isfinite(level):
        raise ValueError(f"winsorization level must be a positive real, got {level}")
    root_n = math.sqrt(sample.n)
    if not (0 < t < root_n):
        raise ValueError(f"t must satisfy 0 < t < sqrt(n) = {root_n}, got {t}")
    clipped = np.clip(sample.values, -level, level)
    mean = math.fsum(clipped) / sample.n
    var = math.fsum((clipped - mean) ** 2) / sample.n
    sigma_hat = math.sqrt(var)
    s_hat = t * sigma_hat / (root_n - t)
    return WinsorSummary(level=float(level), mean=mean, sigma_hat=sigma_hat, s_hat=s_hat)


def load_weights(path: str | Path) -> Sample:
    """Read a one-weight-per-line text file (decimal or scientific notation)."""
    values: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                values.append(float(text))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: not a number: {text!r}") from exc
    if not values:
        raise ValueError(f"{path}: no weights found")
    return Sample(np.array(values))
