"""The five synthetic importance-sampling test problems and their bias oracle.

Each problem bundles a target density p, a proposal (sampler + density) q, an
integrand f and the known truth. Weights are f(x) * p(x) / q(x). Gaussian
parameters are read as variances by default; pass scale_convention="sd" to
rerun everything under the standard-deviation reading.

Note on the exponential family: the narrative description elsewhere swaps the
roles, but only proposal Expo(nu) against target Expo(1) produces the stated
infinite-variance onset at nu >= 2 (and a proposal that narrows as nu grows),
so that is what this module implements; the truth is theta = 1.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .balancing import ThresholdLadder
from .rng import stream
from .weights import Sample

__all__ = [
    "Family",
    "ISProblem",
    "BiasMethod",
    "BiasCurve",
    "make_problem",
    "draw_weights",
    "bias_oracle",
]


class Family(enum.Enum):
    EXPONENTIAL = "exponential"
    NORMAL = "normal"
    T21 = "t21"
    MV_NORMAL = "mv_normal"
    NORMAL_MIXTURE = "normal_mixture"


class BiasMethod(enum.Enum):
    QUADRATURE = "quadrature"
    MEGA_MC = "mega_mc"


@dataclass(frozen=True)
class ISProblem:
    family: Family
    param: float
    dim: int
    true_theta: float
    target_pdf: Callable[[np.ndarray], np.ndarray]
    proposal_pdf: Callable[[np.ndarray], np.ndarray]
    sample_proposal: Callable[[np.random.Generator, int], np.ndarray]
    integrand: Callable[[np.ndarray], np.ndarray]
    weight: Callable[[np.ndarray], np.ndarray]
    # generous finite range holding all but a negligible sliver of proposal
    # mass; used by the quadrature oracle to locate clamping breakpoints
    scan_range: tuple[float, float]


@dataclass(frozen=True)
class BiasCurve:
    levels: tuple[float, ...]
    bias: tuple[float, ...]
    method: BiasMethod
    stderr: tuple[float, ...]


def _norm_pdf(x: np.ndarray, mean: float, var: float) -> np.ndarray:
    return np.exp(-((x - mean) ** 2) / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)


def _t_log_norm_const(df: float) -> float:
    return (
        math.lgamma((df + 1.0) / 2.0)
        - math.lgamma(df / 2.0)
        - 0.5 * math.log(df * math.pi)
    )


def _t_pdf(x: np.ndarray, df: float, loc: float = 0.0, scale: float = 1.0) -> np.ndarray:
    z = (x - loc) / scale
    log_pdf = _t_log_norm_const(df) - ((df + 1.0) / 2.0) * np.log1p(z * z / df)
    return np.exp(log_pdf) / scale


def _mv_t_logpdf(x: np.ndarray, df: float, loc: float, scale: float) -> np.ndarray:
    # location loc * ones, scale matrix scale * I
    d = x.shape[1]
    r2 = np.sum((x - loc) ** 2, axis=1) / scale
    return (
        math.lgamma((df + d) / 2.0)
        - math.lgamma(df / 2.0)
        - (d / 2.0) * math.log(df * math.pi)
        - (d / 2.0) * math.log(scale)
        - ((df + d) / 2.0) * np.log1p(r2 / df)
    )


def _mv_normal_logpdf(x: np.ndarray) -> np.ndarray:
    d = x.shape[1]
    return -0.5 * d * math.log(2.0 * math.pi) - 0.5 * np.sum(x * x, axis=1)


def make_problem(
    family: Family, param: float, scale_convention: str = "variance"
) -> ISProblem:
    """Build one of the five synthetic problems at parameter value `param`."""
    if scale_convention not in ("variance", "sd"):
        raise ValueError(f"scale_convention must be 'variance' or 'sd', got {scale_convention!r}")
    if not isinstance(family, Family):
        raise ValueError(f"unknown family: {family!r}")

    if family is Family.EXPONENTIAL:
        nu = float(param)
        if not (nu > 0) or not math.isfinite(nu):
            raise ValueError(f"exponential rate must be > 0, got {param}")

        def p(x):
            x = np.asarray(x, dtype=np.float64)
            return np.where(x >= 0, np.exp(-np.clip(x, 0.0, None)), 0.0)

        def q(x):
            x = np.asarray(x, dtype=np.float64)
            return np.where(x >= 0, nu * np.exp(-nu * np.clip(x, 0.0, None)), 0.0)

        def sampler(gen, size):
            return gen.exponential(scale=1.0 / nu, size=size)

        def weight(x):
            x = np.asarray(x, dtype=np.float64)
            return (x / nu) * np.exp((nu - 1.0) * x)

        return ISProblem(
            family=family,
            param=nu,
            dim=1,
            true_theta=1.0,
            target_pdf=p,
            proposal_pdf=q,
            sample_proposal=sampler,
            integrand=lambda x: np.asarray(x, dtype=np.float64),
            weight=weight,
            scan_range=(0.0, 720.0 / nu),
        )

    if family is Family.NORMAL:
        nu = float(param)
        if not (nu > 0) or not math.isfinite(nu):
            raise ValueError(f"normal proposal scale must be > 0, got {param}")
        var_q = nu if scale_convention == "variance" else nu * nu
        sd_q = math.sqrt(var_q)

        def weight(x):
            x = np.asarray(x, dtype=np.float64)
            return x * np.exp(x * x * (1.0 / (2.0 * var_q) - 0.5)) * sd_q

        return ISProblem(
            family=family,
            param=nu,
            dim=1,
            true_theta=0.0,
            target_pdf=lambda x: _norm_pdf(np.asarray(x, dtype=np.float64), 0.0, 1.0),
            proposal_pdf=lambda x: _norm_pdf(np.asarray(x, dtype=np.float64), 0.0, var_q),
            sample_proposal=lambda gen, size: gen.normal(0.0, sd_q, size=size),
            integrand=lambda x: np.asarray(x, dtype=np.float64),
            weight=weight,
            scan_range=(-38.0 * max(sd_q, 1.0), 38.0 * max(sd_q, 1.0)),
        )

    if family is Family.T21:
        nu = float(param)
        if not math.isfinite(nu):
            raise ValueError(f"t location must be finite, got {param}")
        df, scale = 21.0, 20.0 / 21.0

        def p(x):
            return _t_pdf(np.asarray(x, dtype=np.float64), df)

        def q(x):
            return _t_pdf(np.asarray(x, dtype=np.float64), df, loc=nu, scale=scale)

        def weight(x):
            x = np.asarray(x, dtype=np.float64)
            return x * p(x) / q(x)

        return ISProblem(
            family=family,
            param=nu,
            dim=1,
            true_theta=0.0,
            target_pdf=p,
            proposal_pdf=q,
            sample_proposal=lambda gen, size: nu + scale * gen.standard_t(df, size=size),
            integrand=lambda x: np.asarray(x, dtype=np.float64),
            weight=weight,
            scan_range=(nu - 400.0, nu + 400.0),
        )

    if family is Family.MV_NORMAL:
        d = int(param)
        if d < 1 or d != param:
            raise ValueError(f"dimension must be a positive integer, got {param}")
        df, loc, scale = 21.0, 0.4, 0.8

        def p(x):
            return np.exp(_mv_normal_logpdf(np.asarray(x, dtype=np.float64)))

        def q(x):
            return np.exp(_mv_t_logpdf(np.asarray(x, dtype=np.float64), df, loc, scale))

        def sampler(gen, size):
            # exact location-scale multivariate t: normal over sqrt(chi2/df)
            z = gen.standard_normal((size, d))
            w = gen.chisquare(df, size=size)
            return loc + math.sqrt(scale) * z / np.sqrt(w / df)[:, None]

        def integrand(x):
            return np.sum(np.asarray(x, dtype=np.float64), axis=1)

        def weight(x):
            x = np.asarray(x, dtype=np.float64)
            log_ratio = _mv_normal_logpdf(x) - _mv_t_logpdf(x, df, loc, scale)
            return integrand(x) * np.exp(log_ratio)

        return ISProblem(
            family=family,
            param=float(d),
            dim=d,
            true_theta=0.0,
            target_pdf=p,
            proposal_pdf=q,
            sample_proposal=sampler,
            integrand=integrand,
            weight=weight,
            scan_range=(-40.0, 40.0),
        )

    if family is Family.NORMAL_MIXTURE:
        nu = float(param)
        if not math.isfinite(nu):
            raise ValueError(f"mixture offset must be finite, got {param}")
        if scale_convention == "variance":
            var_c, var_q = 0.5, 4.0
        else:
            var_c, var_q = 0.25, 16.0
        sd_q = math.sqrt(var_q)

        def p(x):
            x = np.asarray(x, dtype=np.float64)
            return 0.8 * _norm_pdf(x, 0.0, var_c) + 0.2 * _norm_pdf(x, nu, var_c)

        def q(x):
            return _norm_pdf(np.asarray(x, dtype=np.float64), 0.0, var_q)

        def weight(x):
            x = np.asarray(x, dtype=np.float64)
            return x * p(x) / q(x)

        hi = 38.0 * sd_q + abs(nu)
        return ISProblem(
            family=family,
            param=nu,
            dim=1,
            true_theta=0.2 * nu,
            target_pdf=p,
            proposal_pdf=q,
            sample_proposal=lambda gen, size: gen.normal(0.0, sd_q, size=size),
            integrand=lambda x: np.asarray(x, dtype=np.float64),
            weight=weight,
            scan_range=(-hi, hi),
        )

    raise ValueError(f"unknown family: {family!r}")


def draw_weights(
    problem: ISProblem, n: int, seed_or_generator: int | np.random.Generator
) -> Sample:
    """Draw n proposal points and return their importance weights.

    Deterministic for a fixed seed. A zero proposal density at a drawn point
    would make the weight non-finite and signals a support violation.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if isinstance(seed_or_generator, np.random.Generator):
        gen = seed_or_generator
    else:
        gen = stream(int(seed_or_generator))
    x = problem.sample_proposal(gen, n)
    y = problem.weight(x)
    if not np.isfinite(y).all():
        raise RuntimeError(
            f"non-finite weight drawn for {problem.family.value}: proposal support violation"
        )
    return Sample(np.asarray(y, dtype=np.float64))


def _bisect_crossing(problem: ISProblem, level: float, a: float, b: float) -> float:
    """Locate |Y(x)| = level inside [a, b] by sign bisection.

    Pure sign comparisons, so overflowed weights (inf) are handled without
    arithmetic on them.
    """

    def below(x: float) -> bool:
        with np.errstate(all="ignore"):
            y = abs(float(problem.weight(np.array([x]))[0]))
        return y < level

    a_below = below(a)
    for _ in range(80):
        mid = 0.5 * (a + b)
        if below(mid) == a_below:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def _winsorized_mean_quadrature(problem: ISProblem, level: float) -> tuple[float, float]:
    """E[clip(Y, -level, level)] by adaptive quadrature over the proposal.

    Splits the real line at the points where |Y(x)| crosses the level so each
    piece is smooth, then integrates piecewise (tails out to infinity).
    Returns (value, accumulated abs-error estimate).
    """
    if problem.dim != 1:
        raise ValueError("quadrature bias oracle requires a one-dimensional problem")
    lo, hi = problem.scan_range

    def clipped_weight_density(x: float) -> float:
        xv = np.array([x], dtype=np.float64)
        q = float(problem.proposal_pdf(xv)[0])
        if q == 0.0 or not math.isfinite(q):
            return 0.0
        with np.errstate(all="ignore"):
            y = float(problem.weight(xv)[0])
        if math.isnan(y):
            return 0.0
        return max(-level, min(y, level)) * q

    grid = np.linspace(lo, hi, 4001)
    with np.errstate(all="ignore"):
        yabs = np.abs(problem.weight(grid)) - level
    crossings: list[float] = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], yabs[:-1], yabs[1:]):
        if math.isnan(fa) or math.isnan(fb):
            continue
        if fa == 0.0:
            crossings.append(float(a))
        elif (fa < 0.0) != (fb < 0.0):
            crossings.append(_bisect_crossing(problem, level, float(a), float(b)))

    left = -math.inf if problem.family is not Family.EXPONENTIAL else 0.0
    points = [left] + sorted(crossings) + [math.inf]
    total = 0.0
    err = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(points[:-1], points[1:]):
            val, abserr = integrate.quad(
                clipped_weight_density, a, b, epsabs=1e-11, epsrel=1e-11, limit=300
            )
            total += val
            err += abserr
    if err > 1e-8:
        raise RuntimeError(
            f"quadrature did not converge for {problem.family.value} at level {level}: "
            f"value={total}, abserr={err}, pieces={len(points) - 1}"
        )
    return total, err


def bias_oracle(
    problem: ISProblem,
    ladder: ThresholdLadder,
    method: BiasMethod = BiasMethod.QUADRATURE,
    seed: int = 0,
    draws: int = 10_000_000,
) -> BiasCurve:
    """Per-level winsorization bias b(M) = |E[Y^M] - theta|.

    QUADRATURE integrates the clipped weight against the proposal density
    (one-dimensional problems only, absolute tolerance 1e-8). MEGA_MC uses a
    large seeded sample and reports the per-level standard error.
    """
    if method is BiasMethod.QUADRATURE:
        bias: list[float] = []
        errs: list[float] = []
        for level in ladder.levels:
            val, err = _winsorized_mean_quadrature(problem, level)
            bias.append(abs(val - problem.true_theta))
            errs.append(err)
        return BiasCurve(
            levels=ladder.levels, bias=tuple(bias), method=method, stderr=tuple(errs)
        )

    gen = stream(seed)
    chunk = 2_000_000
    remaining = draws
    sums = {level: [] for level in ladder.levels}
    sq_sums = {level: [] for level in ladder.levels}
    while remaining > 0:
        size = min(chunk, remaining)
        remaining -= size
        y = problem.weight(problem.sample_proposal(gen, size))
        for level in ladder.levels:
            c = np.clip(y, -level, level)
            sums[level].append(math.fsum(c))
            sq_sums[level].append(math.fsum(c * c))
    bias = []
    stderr = []
    for level in ladder.levels:
        mean = math.fsum(sums[level]) / draws
        var = math.fsum(sq_sums[level]) / draws - mean * mean
        bias.append(abs(mean - problem.true_theta))
        stderr.append(math.sqrt(max(var, 0.0) / draws))
    return BiasCurve(
        levels=ladder.levels, bias=tuple(bias), method=method, stderr=tuple(stderr)
    )
