"""Theoretical contraction factors and empirical rate measurement.

For an operator whose inverse is Lipschitz at zero with modulus ``a`` and a
relaxed resolvent iteration with factor ``gamma`` and proximal parameter
``c``, the squared distance to the solution contracts per step by at most

    rho = 1 - min(gamma, 2*gamma - gamma^2) * c^2 / (a^2 + c^2),

and the planar rotation operator attains this bound, so it is the natural
calibration problem: measured rates must match ``sqrt(rho)`` there exactly
(at gamma = 1) and stay below it everywhere else. The inexact iteration with
relative tolerance delta_k contracts per step by

    theta_k = (sqrt(rho) + gamma*delta_k) / (1 - gamma*delta_k)

once theta_k drops below one. This module evaluates both formulas, estimates
empirical factors from iteration traces, samples local Lipschitz constants of
resolvents, and probes the impossibility of superlinear convergence for
gamma != 1 under growing proximal parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .operators import (
    MonotoneOperatorHandle,
    RotationOperatorSpec,
    as_vector,
    make_rotation_operator,
    resolvent,
    _sample_ball,
)
from .ppa import (
    GppaConfig,
    IterationTrace,
    ProximalSchedule,
    distance_floor,
    run_exact_gppa,
    step_exact,
)

__all__ = [
    "RateReport",
    "LipschitzEstimate",
    "ProbeReport",
    "theoretical_exact_rate",
    "theoretical_inexact_factor",
    "rotation_step_ratio",
    "estimate_empirical_rate",
    "tightness_check_rotation",
    "estimate_resolvent_lipschitz",
    "superlinear_probe",
]

# Renormalization threshold for the superlinear probe: iterates are rescaled
# by an exact power of two before they reach the denormal range.
_RESCALE_THRESHOLD = 2.0**-332
_RESCALE_FACTOR = 2.0**332


@dataclass
class RateReport:
    """Theoretical contraction factor versus measured behavior.

    ``theoretical_factor`` and the empirical statistics are in the same
    units, which depend on the producing operation: per-step distance ratios
    for ``estimate_empirical_rate``, squared per-step ratios for
    ``tightness_check_rotation``. ``window`` is the (first, last) iteration
    index of the ratios that entered the statistics.
    """

    theoretical_factor: float
    empirical_tail_ratio_max: float
    empirical_geometric_mean: float
    tight: bool
    window: Tuple[int, int]


@dataclass
class LipschitzEstimate:
    """Sampled local Lipschitz constant of a resolvent near a zero."""

    L_hat: float
    radius: float
    samples: int
    seed: int
    c: float
    bound: Optional[float] = None
    within_bound: Optional[bool] = None


@dataclass
class ProbeReport:
    """Per-step norm ratios of a rotation run under a growing c schedule."""

    gamma: float
    a: float
    c0: float
    growth: float
    iterations: int
    ratios: np.ndarray
    final_ratio: float
    limit_ratio: float


def _gain(gamma: float) -> float:
    """min(gamma, 2*gamma - gamma^2); maximal (= 1) exactly at gamma = 1."""
    return min(gamma, 2.0 * gamma - gamma * gamma)


def theoretical_exact_rate(gamma: float, c: float, a: float) -> float:
    """Squared-distance contraction factor rho of the exact iteration.

    rho = 1 - min(gamma, 2*gamma - gamma^2) * c^2 / (a^2 + c^2), guaranteed
    to lie in (0, 1) for gamma in (0, 2), c > 0, a > 0; it cannot be
    improved, since the rotation operator attains it.
    """
    if not (0.0 < gamma < 2.0):
        raise ValueError("gamma must lie in (0, 2)")
    if not (c > 0):
        raise ValueError("c must be positive")
    if not (a > 0):
        raise ValueError("a must be positive")
    return 1.0 - _gain(gamma) * c * c / (a * a + c * c)


def theoretical_inexact_factor(
    gamma: float, c: float, a: float, delta_k: float
) -> Optional[float]:
    """Per-step distance factor theta_k of the inexact iteration.

    theta_k = (sqrt(rho) + gamma*delta_k) / (1 - gamma*delta_k). Returns None
    when gamma*delta_k >= 1 or the formula gives theta_k >= 1: the step is
    not yet guaranteed contractive at this tolerance.
    """
    if delta_k < 0:
        raise ValueError("delta_k must be >= 0")
    rho = theoretical_exact_rate(gamma, c, a)
    gd = gamma * delta_k
    if gd >= 1.0:
        return None
    theta = (np.sqrt(rho) + gd) / (1.0 - gd)
    if theta >= 1.0:
        return None
    return float(theta)


def rotation_step_ratio(a: float, c: float, gamma: float) -> float:
    """Exact per-step norm ratio of the relaxed iteration on the rotation.

    The relaxed map (1-gamma)*I + gamma*J_c is a scaled planar rotation, so
    every point contracts by the same factor

        sqrt( (1-gamma)^2 + (2*gamma - gamma^2) * a^2/(a^2 + c^2) ).

    At gamma = 1 this is a/sqrt(a^2 + c^2) = sqrt(rho); for gamma in (1, 2)
    its square equals rho exactly, and for gamma < 1 it stays strictly below.
    """
    u = a * a / (a * a + c * c)
    return float(np.sqrt((1.0 - gamma) ** 2 + (2.0 * gamma - gamma * gamma) * u))


def _usable_ratios(distances: np.ndarray, floor: float):
    """Per-step ratios d_{k+1}/d_k over indices where d_k is above the floor."""
    ks, ratios = [], []
    for k in range(len(distances) - 1):
        d0, d1 = distances[k], distances[k + 1]
        if np.isfinite(d0) and np.isfinite(d1) and d0 > floor:
            ks.append(k)
            ratios.append(d1 / d0)
    return np.array(ks, dtype=int), np.array(ratios)


def estimate_empirical_rate(
    trace: IterationTrace,
    z_star,
    theoretical_factor: Optional[float] = None,
    window_fraction: float = 0.5,
    equality: bool = False,
    tolerance: float = 1e-6,
) -> RateReport:
    """Measure the per-step linear factor of a trace against z_star.

    Computes distance ratios ||z^{k+1} - z*|| / ||z^k - z*|| over the tail
    ``window_fraction`` of usable iterations (distances above the
    floating-point floor) and reports their maximum and geometric mean. The
    ``tight`` flag compares against ``theoretical_factor``: equality within
    ``tolerance`` when ``equality`` is set (the rotation calibration case),
    otherwise the one-sided bound max <= factor + tolerance. At least 10
    usable ratios are required.
    """
    z_star = as_vector(z_star)
    floor = distance_floor(z_star)
    dists = []
    for rec in trace.records:
        if rec.z is not None:
            dists.append(float(np.linalg.norm(rec.z - z_star)))
        elif rec.dist_to_zero is not None:
            dists.append(rec.dist_to_zero)
        else:
            dists.append(np.nan)
    ks, ratios = _usable_ratios(np.array(dists), floor)
    if len(ratios) < 10:
        raise ValueError(
            "trace has only %d usable ratios (need >= 10); iterate distances "
            "are at the floating-point floor or missing" % len(ratios)
        )
    n_tail = max(1, int(np.ceil(window_fraction * len(ratios))))
    tail = ratios[-n_tail:]
    tail_ks = ks[-n_tail:]
    tail_max = float(tail.max())
    geo_mean = float(np.exp(np.mean(np.log(tail)))) if np.all(tail > 0) else 0.0
    if theoretical_factor is None:
        tight = False
        theoretical_factor = float("nan")
    elif equality:
        tight = bool(abs(geo_mean - theoretical_factor) <= tolerance
                     and abs(tail_max - theoretical_factor) <= tolerance)
    else:
        tight = bool(tail_max <= theoretical_factor + tolerance)
    return RateReport(
        theoretical_factor=float(theoretical_factor),
        empirical_tail_ratio_max=tail_max,
        empirical_geometric_mean=geo_mean,
        tight=tight,
        window=(int(tail_ks[0]), int(tail_ks[-1])),
    )


def tightness_check_rotation(
    a: float, c: float, gamma: float, z0, iters: int
) -> RateReport:
    """Verify the rate bound is attained on the rotation operator.

    Runs the exact iteration for ``iters`` steps and compares every per-step
    *squared* distance ratio against rho: equality within 1e-12 at gamma = 1
    (the bound is tight there), the one-sided bound rho + 1e-10 otherwise.
    """
    z0 = as_vector(z0, 2)
    if float(np.linalg.norm(z0)) == 0.0:
        raise ValueError("z0 must be nonzero (the origin is the solution)")
    op = make_rotation_operator(RotationOperatorSpec(a=a))
    config = GppaConfig(
        gamma=gamma,
        c_schedule=ProximalSchedule.constant(c),
        max_iter=iters,
        residual_tol=np.finfo(float).tiny,
    )
    trace = run_exact_gppa(op, config, z0)
    rho = theoretical_exact_rate(gamma, c, a)
    dists = trace.distances()
    ks, ratios = _usable_ratios(dists, distance_floor(np.zeros(2)))
    if len(ratios) == 0:
        raise ValueError("run produced no usable ratios; increase iters")
    sq = ratios**2
    if gamma == 1.0:
        tight = bool(np.all(np.abs(sq - rho) <= 1e-12))
    else:
        tight = bool(np.all(sq <= rho + 1e-10))
    geo = float(np.exp(np.mean(np.log(sq)))) if np.all(sq > 0) else 0.0
    return RateReport(
        theoretical_factor=rho,
        empirical_tail_ratio_max=float(sq.max()),
        empirical_geometric_mean=geo,
        tight=tight,
        window=(int(ks[0]), int(ks[-1])),
    )


def estimate_resolvent_lipschitz(
    op: MonotoneOperatorHandle,
    c: float,
    z_star,
    radius: float,
    samples: int,
    seed: int,
) -> LipschitzEstimate:
    """Sample the local Lipschitz constant of J_c around a zero z*.

    L_hat = max over sampled z in B(z*, radius) of ||J_c(z) - z*|| /
    ||z - z*||, using J_c(z*) = z*. When the operator declares an
    inverse-Lipschitz modulus ``a`` the estimate is compared against the
    analytic ceiling a / sqrt(a^2 + c^2); the report carries the bound and a
    flag rather than raising.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    z_star = as_vector(z_star, op.dim)
    rng = np.random.default_rng(seed)
    L_hat = 0.0
    for _ in range(samples):
        offset = _sample_ball(rng, op.dim, radius)
        dist = float(np.linalg.norm(offset))
        if dist == 0.0:
            continue
        jz = resolvent(op, c, z_star + offset)
        L_hat = max(L_hat, float(np.linalg.norm(jz - z_star)) / dist)
    bound = None
    within = None
    a = op.inverse_lipschitz_modulus
    if a is not None:
        bound = float(a / np.sqrt(a * a + c * c))
        within = bool(L_hat <= bound + 1e-8)
    return LipschitzEstimate(
        L_hat=L_hat,
        radius=radius,
        samples=samples,
        seed=seed,
        c=c,
        bound=bound,
        within_bound=within,
    )


def superlinear_probe(
    a: float, gamma: float, c0: float, growth: float, iters: int, z0
) -> ProbeReport:
    """Probe whether growing c_k yields superlinear decay on the rotation.

    Runs the exact iteration with c_k = c0 * growth**k and records the norm
    ratios ||z^{k+1}|| / ||z^k||. With growth > 1 the ratios tend to 0 when
    gamma = 1 but to |1 - gamma| > 0 otherwise: relaxation forfeits
    superlinear convergence no matter how fast c_k grows. growth = 1 serves
    as the constant-parameter control, where the ratio is pinned at
    ``rotation_step_ratio(a, c0, gamma)``.

    Iterates are rescaled by an exact power of two when their norm falls
    below 2**-332; the iteration map is linear, so ratios are unaffected.
    """
    if iters < 10:
        raise ValueError("iters must be >= 10 for a meaningful probe")
    if not (growth >= 1.0):
        raise ValueError("growth must be >= 1")
    z = as_vector(z0, 2)
    if float(np.linalg.norm(z)) == 0.0:
        raise ValueError("z0 must be nonzero")
    op = make_rotation_operator(RotationOperatorSpec(a=a))
    ratios = np.empty(iters)
    for k in range(iters):
        c_k = c0 * growth**k
        z_next, _ = step_exact(op, c_k, gamma, z)
        ratios[k] = np.linalg.norm(z_next) / np.linalg.norm(z)
        z = z_next
        if np.linalg.norm(z) < _RESCALE_THRESHOLD:
            z = z * _RESCALE_FACTOR
    limit = abs(1.0 - gamma) if growth > 1.0 else rotation_step_ratio(a, c0, gamma)
    return ProbeReport(
        gamma=gamma,
        a=a,
        c0=c0,
        growth=growth,
        iterations=iters,
        ratios=ratios,
        final_ratio=float(ratios[-1]),
        limit_ratio=float(limit),
    )
