"""Cross-validated winsorization-threshold baseline.

For each candidate level, each held-out fold scores the squared deviation of
the winsorized training mean from the fold's plain (unwinsorized) mean; the
level minimizing the fold-averaged score wins, ties broken toward the larger
level (less winsorization). The held-out plain mean is the only unbiased
reference available without knowing the truth, which is exactly what makes
this baseline unstable when rare huge weights land in one fold and not the
other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .balancing import ThresholdLadder
from .rng import stream
from .weights import Sample

__all__ = ["CvConfig", "CvSelection", "cv_select_threshold"]


@dataclass(frozen=True)
class CvConfig:
    folds: int = 10
    shuffle_seed: int = 0

    def __post_init__(self) -> None:
        if self.folds < 2:
            raise ValueError(f"folds must be >= 2, got {self.folds}")
        if not (0 <= self.shuffle_seed < 2**64):
            raise ValueError("shuffle_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class CvSelection:
    level: float
    estimate: float
    scores: tuple[float, ...]


def cv_select_threshold(
    sample: Sample, ladder: ThresholdLadder, cfg: CvConfig
) -> CvSelection:
    """Pick a winsorization level by k-fold cross-validation.

    Deterministic given (sample, ladder, folds, shuffle_seed): folds are
    near-equal slices of a seeded permutation of the indices. The final
    estimate is the full-sample winsorized mean at the chosen level.
    """
    n = sample.n
    if cfg.folds > n:
        raise ValueError(f"folds ({cfg.folds}) cannot exceed sample size ({n})")
    perm = stream(cfg.shuffle_seed).permutation(n)
    folds = np.array_split(perm, cfg.folds)

    values = sample.values
    test_plain_means = [math.fsum(values[idx]) / idx.size for idx in folds]

    scores: list[float] = []
    for level in ladder.levels:
        clipped = np.clip(values, -level, level)
        total = math.fsum(clipped)
        fold_scores = []
        for idx, test_mean in zip(folds, test_plain_means):
            train_mean = (total - math.fsum(clipped[idx])) / (n - idx.size)
            fold_scores.append((train_mean - test_mean) ** 2)
        scores.append(math.fsum(fold_scores) / cfg.folds)

    chosen = 0
    for i in range(1, ladder.k):
        if scores[i] <= scores[chosen]:
            chosen = i
    level = ladder.levels[chosen]
    estimate = math.fsum(np.clip(values, -level, level)) / n
    return CvSelection(level=level, estimate=estimate, scores=tuple(scores))
