"""Threshold selection by the balancing principle, plus its guarantee numbers.

The selector walks the candidate levels from the largest down, keeping the
descent going while every pairwise comparison of winsorized means above the
current level stays within c times the combined spread. The first failing
level stops the descent and the level just above it is returned. A full scan
checks all pairs above the current level (quadratic in the ladder size); the
linear scan checks only the adjacent pair, trading a factor-k looser guarantee
constant for O(k*n) total work.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .weights import Sample, WinsorSummary, winsor_summary

__all__ = [
    "PhiVariant",
    "ScanMode",
    "ThresholdLadder",
    "BalancingParams",
    "Comparison",
    "BalancedResult",
    "GuaranteeInputs",
    "select_threshold",
    "select_threshold_linear",
    "constant_c",
    "guarantee_probability",
    "k_bound_from_alpha",
    "std_normal_cdf",
]

# Two fully clamped levels have zero spread; their comparison passes iff the
# means agree to this relative tolerance (a constant sample then descends all
# the way to the smallest level).
ZERO_SPREAD_RTOL = 1e-12


class PhiVariant(enum.Enum):
    """How two spreads combine in the comparison threshold."""

    AVERAGE = "avg"
    MAX = "max"


class ScanMode(enum.Enum):
    FULL = "full"
    LINEAR = "linear"


@dataclass(frozen=True)
class ThresholdLadder:
    """Sorted candidate winsorization levels.

    Input levels are deduplicated and stored strictly increasing; duplicates
    would make the pairwise comparisons degenerate without adding candidates.
    """

    levels: tuple[float, ...]

    def __init__(self, levels: Sequence[float]):
        uniq = sorted({float(m) for m in levels})
        if not uniq:
            raise ValueError("ladder must contain at least one level")
        if uniq[0] <= 0 or not all(math.isfinite(m) for m in uniq):
            raise ValueError(f"ladder levels must be positive finite reals: {uniq}")
        object.__setattr__(self, "levels", tuple(uniq))

    @property
    def k(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class BalancingParams:
    """Selector configuration.

    Defaults follow the simulation setup: t = 2 and c = 1 + sqrt(3), with the
    average-of-spreads comparison (the more robust variant) and the full scan.
    """

    c: float = 1.0 + math.sqrt(3.0)
    t: float = 2.0
    phi_variant: PhiVariant = PhiVariant.AVERAGE
    scan: ScanMode = ScanMode.FULL

    def __post_init__(self) -> None:
        if not (self.c > 2) or not math.isfinite(self.c):
            raise ValueError(f"c must be a finite real > 2, got {self.c}")
        if not (self.t > 0) or not math.isfinite(self.t):
            raise ValueError(f"t must be a finite real > 0, got {self.t}")


@dataclass(frozen=True)
class Comparison:
    """One evaluated pairwise test, kept for audit output."""

    level_low: float
    level_high: float
    lhs: float
    rhs: float
    passed: bool


@dataclass(frozen=True)
class BalancedResult:
    chosen_level: float
    estimate: float
    summaries: tuple[WinsorSummary, ...]
    constant_c: float
    comparisons: tuple[Comparison, ...]

    @property
    def chosen_index(self) -> int:
        for i, s in enumerate(self.summaries):
            if s.level == self.chosen_level:
                return i
        raise AssertionError("chosen level missing from summaries")


def _compare(a: WinsorSummary, b: WinsorSummary, params: BalancingParams) -> Comparison:
    lhs = abs(a.mean - b.mean)
    if params.phi_variant is PhiVariant.AVERAGE:
        phi = 0.5 * (a.s_hat + b.s_hat)
    else:
        phi = max(a.s_hat, b.s_hat)
    rhs = params.c * phi
    if a.sigma_hat == 0.0 and b.sigma_hat == 0.0:
        tol = ZERO_SPREAD_RTOL * max(1.0, abs(a.mean), abs(b.mean))
        passed = lhs <= tol
    else:
        passed = lhs <= rhs
    return Comparison(
        level_low=min(a.level, b.level),
        level_high=max(a.level, b.level),
        lhs=lhs,
        rhs=rhs,
        passed=passed,
    )


def select_threshold(
    sample: Sample, ladder: ThresholdLadder, params: Optional[BalancingParams] = None
) -> BalancedResult:
    """Pick the smallest level whose comparisons against all larger levels pass.

    Implemented as the top-down descent: start at the largest level and keep
    descending while the current level's comparisons hold. Under the full scan
    this is equivalent to the brute-force evaluation of the defining set; under
    the linear scan only adjacent pairs are tested and the guarantee constant
    is multiplied by the ladder size.
    """
    if params is None:
        params = BalancingParams()
    summaries = tuple(
        winsor_summary(sample, level, params.t) for level in ladder.levels
    )
    k = ladder.k
    log: list[Comparison] = []
    chosen = k - 1
    for i in range(k - 2, -1, -1):
        if params.scan is ScanMode.FULL:
            partners = range(i + 1, k)
        else:
            partners = range(i + 1, i + 2)
        ok = True
        for j in partners:
            cmp = _compare(summaries[i], summaries[j], params)
            log.append(cmp)
            if not cmp.passed:
                ok = False
                break
        if not ok:
            break
        chosen = i
    constant = constant_c(params.c, params.phi_variant)
    if params.scan is ScanMode.LINEAR:
        constant *= k
    return BalancedResult(
        chosen_level=summaries[chosen].level,
        estimate=summaries[chosen].mean,
        summaries=summaries,
        constant_c=constant,
        comparisons=tuple(log),
    )


def select_threshold_linear(
    sample: Sample, ladder: ThresholdLadder, params: Optional[BalancingParams] = None
) -> BalancedResult:
    """The adjacent-pair-only variant of `select_threshold`."""
    if params is None:
        params = BalancingParams()
    if params.scan is not ScanMode.LINEAR:
        params = BalancingParams(
            c=params.c, t=params.t, phi_variant=params.phi_variant, scan=ScanMode.LINEAR
        )
    return select_threshold(sample, ladder, params)


def constant_c(c: float, phi_variant: PhiVariant = PhiVariant.AVERAGE) -> float:
    """Guarantee constant C(c) for the selector.

    Average variant: max(c+1, 1 + 4/(c-2)), minimized at c = 1+sqrt(5) where it
    equals 2+sqrt(5). Max variant: max(c+1, 1 + 2/(c-2)), minimized at
    c = 1+sqrt(3) where it equals 2+sqrt(3).
    """
    if not (c > 2) or not math.isfinite(c):
        raise ValueError(f"c must be a finite real > 2, got {c}")
    if phi_variant is PhiVariant.AVERAGE:
        return max(c + 1.0, 1.0 + 4.0 / (c - 2.0))
    return max(c + 1.0, 1.0 + 2.0 / (c - 2.0))


@dataclass(frozen=True)
class GuaranteeInputs:
    """Inputs sizing the probability defect of the selector's guarantee.

    `K` bounds the third absolute central moment of every winsorized weight by
    K times the 3/2 power of its variance. If only `alpha` is known (a lower
    bound V >= alpha * M^2 on the winsorized variance), K follows from
    `k_bound_from_alpha`.
    """

    n: int
    t: float
    k: int
    K: Optional[float] = None
    alpha: Optional[float] = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.K is None and self.alpha is None:
            raise ValueError("provide K or alpha")
        if self.K is not None and not (self.K > 0):
            raise ValueError(f"K must be > 0, got {self.K}")

    def resolved_k_bound(self) -> float:
        if self.K is not None:
            return float(self.K)
        return k_bound_from_alpha(self.alpha)  # type: ignore[arg-type]


def guarantee_probability(inputs: GuaranteeInputs) -> float:
    """Probability defect delta = 2k * (1 + 50K/sqrt(n) - Phi(t * g(n, t))).

    Here g(n, t) = sqrt(n / ((sqrt(n)-t)^2 + t^2)). The caller reads 1 - delta
    as the guarantee confidence; the value is reported raw (it exceeds 1 for
    small n, where the bound is vacuous) and never gates the selector. The
    normal tail is evaluated directly through erfc so delta stays strictly
    monotone in t even where Phi saturates to 1 in double precision.
    """
    root_n = math.sqrt(inputs.n)
    if not (0 < inputs.t < root_n):
        raise ValueError(f"t must satisfy 0 < t < sqrt(n) = {root_n}, got {inputs.t}")
    big_k = inputs.resolved_k_bound()
    arg = inputs.t * math.sqrt(inputs.n / ((root_n - inputs.t) ** 2 + inputs.t**2))
    upper_tail = 0.5 * math.erfc(arg / math.sqrt(2.0))
    return 2.0 * inputs.k * (50.0 * big_k / root_n + upper_tail)


def k_bound_from_alpha(alpha: float) -> float:
    """Third-moment ratio bound 8 / alpha^(3/2) implied by V >= alpha * M^2."""
    if not (0 < alpha < 1):
        raise ValueError(f"alpha must lie strictly in (0, 1), got {alpha}")
    return 8.0 / alpha**1.5


def std_normal_cdf(x: float) -> float:
    """Standard normal CDF via erfc on the reflected tail.

    Both tails are derived from the same erfc evaluation at |x|, so the
    reflection identity Phi(-x) = 1 - Phi(x) holds up to one rounding of the
    final subtraction.
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"x must be finite, got {x}")
    tail = 0.5 * math.erfc(abs(x) / math.sqrt(2.0))
    return tail if x < 0 else 1.0 - tail
