"""Exact and inexact generalized proximal point iterations.

The exact scheme relaxes the classical resolvent iteration by a factor
``gamma`` in (0, 2):

    z^{k+1} = z^k - gamma * (z^k - J_{c_k}(z^k)),

which reduces to the classical proximal point step at gamma = 1. The inexact
variant replaces the resolvent output by a candidate zbar^k subject to the
relative-error criterion

    ||zbar^k - J_{c_k}(z^k)|| <= delta_k * ||z^k - z^{k+1}||,

with a summable tolerance sequence {delta_k}. Here inexactness is realized by
a controlled, seeded perturbation of the exactly computed resolvent, sized so
the criterion provably holds; the criterion is still re-verified after every
step. Runs record full iteration traces for rate analysis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .operators import MonotoneOperatorHandle, NumericalError, as_vector, resolvent

__all__ = [
    "ProximalSchedule",
    "InexactnessSchedule",
    "GppaConfig",
    "IterationRecord",
    "IterationTrace",
    "EquivalenceReport",
    "step_exact",
    "step_inexact",
    "run_exact_gppa",
    "run_inexact_gppa",
    "residual_stop",
    "relaxed_update",
    "distance_floor",
]

# Distances below 100*eps*(1 + ||z*||) are floating-point noise; ratio and
# distance diagnostics are suppressed there.
_FLOOR_FACTOR = 100.0 * np.finfo(float).eps

# Injected inexactness uses this fraction of the largest error magnitude
# that still provably satisfies the relative criterion.
_ERROR_HEADROOM = 0.9


def distance_floor(z_star: np.ndarray) -> float:
    """Smallest distance to z* that still carries rate information."""
    return _FLOOR_FACTOR * (1.0 + float(np.linalg.norm(z_star)))


@dataclass(frozen=True)
class ProximalSchedule:
    """Proximal parameter sequence {c_k}, bounded away from zero.

    Three forms are supported: constant (``growth == 1``), geometric
    ``c0 * growth**k`` with growth >= 1, and an explicit list (extended past
    its end with its last value). The lower bound kappa is c0 for the first
    two forms and min(values) for a list; it is what the stopping rule
    scales by.
    """

    c0: float = 1.0
    growth: float = 1.0
    values: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.values is not None:
            vals = tuple(float(v) for v in self.values)
            if not vals:
                raise ValueError("explicit c schedule must be nonempty")
            if any(not (v > 0) or not np.isfinite(v) for v in vals):
                raise ValueError("explicit c schedule values must be positive and finite")
            object.__setattr__(self, "values", vals)
        else:
            if not (self.c0 > 0) or not np.isfinite(self.c0):
                raise ValueError("c0 must be positive and finite")
            if not (self.growth >= 1.0) or not np.isfinite(self.growth):
                raise ValueError("growth must be >= 1 (c_k may not decay toward 0)")

    @classmethod
    def constant(cls, c: float) -> "ProximalSchedule":
        return cls(c0=c, growth=1.0)

    @classmethod
    def geometric(cls, c0: float, growth: float) -> "ProximalSchedule":
        return cls(c0=c0, growth=growth)

    @classmethod
    def explicit(cls, values: Sequence[float]) -> "ProximalSchedule":
        return cls(values=tuple(values))

    @property
    def kappa(self) -> float:
        """Declared lower bound: every c_k >= kappa > 0."""
        if self.values is not None:
            return min(self.values)
        return self.c0

    def value(self, k: int) -> float:
        if self.values is not None:
            return self.values[min(k, len(self.values) - 1)]
        if self.growth == 1.0:
            return self.c0
        return self.c0 * self.growth**k


@dataclass(frozen=True)
class InexactnessSchedule:
    """Geometric tolerance sequence delta_k = delta0 * decay**k.

    The geometric form makes sum_k delta_k = delta0 / (1 - decay) finite by
    construction, which is what the inexact convergence theory needs.
    """

    delta0: float
    decay: float = 0.9

    def __post_init__(self):
        if self.delta0 < 0 or not np.isfinite(self.delta0):
            raise ValueError("delta0 must be >= 0 and finite")
        if not (0.0 < self.decay < 1.0):
            raise ValueError("decay must lie in (0, 1) so the tolerances are summable")

    def value(self, k: int) -> float:
        return self.delta0 * self.decay**k

    @property
    def total(self) -> float:
        return self.delta0 / (1.0 - self.decay)


@dataclass(frozen=True)
class GppaConfig:
    """Configuration of a generalized proximal point run.

    ``gamma`` must lie in the open interval (0, 2). ``delta_schedule`` absent
    means exact mode. ``vector_storage_limit`` controls whether full iterate
    vectors are kept in the trace (dims above the limit store norms only).
    """

    gamma: float
    c_schedule: ProximalSchedule = field(default_factory=ProximalSchedule)
    delta_schedule: Optional[InexactnessSchedule] = None
    max_iter: int = 1000
    residual_tol: float = 1e-10
    seed: int = 0
    vector_storage_limit: int = 64

    def __post_init__(self):
        if not (0.0 < self.gamma < 2.0):
            raise ValueError(
                "relaxation factor gamma must lie in the open interval (0, 2), "
                "got %r" % (self.gamma,)
            )
        if self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")
        if not (self.residual_tol > 0):
            raise ValueError("residual_tol must be positive")


@dataclass
class IterationRecord:
    """One iteration of a run (all vectors may be None above the storage limit)."""

    k: int
    c_k: float
    residual: float
    z_norm: float
    z: Optional[np.ndarray] = None
    z_tilde: Optional[np.ndarray] = None
    z_bar: Optional[np.ndarray] = None
    delta_k: Optional[float] = None
    dist_to_zero: Optional[float] = None
    step_ratio: Optional[float] = None


@dataclass
class IterationTrace:
    """Full record of a run: per-iteration data plus how it ended."""

    records: List[IterationRecord]
    termination: str  # 'converged' | 'max_iter' | 'numerical_failure'
    config: GppaConfig
    z_final: Optional[np.ndarray] = None

    def residuals(self) -> np.ndarray:
        return np.array([r.residual for r in self.records])

    def distances(self) -> np.ndarray:
        """Distances to the known zero, NaN where suppressed or unknown."""
        return np.array(
            [np.nan if r.dist_to_zero is None else r.dist_to_zero for r in self.records]
        )


@dataclass
class EquivalenceReport:
    """Outcome of running two algebraically equivalent schemes side by side."""

    iterations: int
    max_deviation: float
    deviations: dict
    per_iteration: Optional[np.ndarray] = None


def relaxed_update(z: np.ndarray, target: np.ndarray, gamma: float) -> np.ndarray:
    """z - gamma*(z - target), the generalized update primitive.

    gamma == 1 must reproduce the unrelaxed step bit-for-bit, which
    z - 1.0*(z - target) does not guarantee in floating point, so that
    case returns the target directly.
    """
    if gamma == 1.0:
        return target.copy()
    return z - gamma * (z - target)


def step_exact(
    op: MonotoneOperatorHandle, c_k: float, gamma: float, z
) -> Tuple[np.ndarray, np.ndarray]:
    """One exact relaxed step: returns (z_next, z_tilde).

    z_tilde = J_{c_k}(z) and z_next = z - gamma*(z - z_tilde); at gamma = 1
    the step is exactly the classical proximal point update z_next = z_tilde.
    """
    if not (0.0 < gamma < 2.0):
        raise ValueError("gamma must lie in (0, 2)")
    v = as_vector(z, op.dim)
    z_tilde = resolvent(op, c_k, v)
    return relaxed_update(v, z_tilde, gamma), z_tilde


def step_inexact(
    op: MonotoneOperatorHandle,
    c_k: float,
    gamma: float,
    delta_k: float,
    z,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One inexact relaxed step: returns (z_next, z_tilde, z_bar).

    The resolvent is evaluated exactly, then perturbed along a seeded random
    direction by

        s = 0.9 * gamma*delta_k * ||z - z_tilde|| / (1 + gamma*delta_k),

    which guarantees ||z_bar - z_tilde|| <= delta_k * ||z - z_next|| because
    z - z_next = gamma*(z - z_bar) and ||z - z_bar|| >= ||z - z_tilde|| - s.
    The criterion is nevertheless re-verified post hoc and a violation raises
    ``NumericalError`` (it would indicate broken arithmetic, not a bad
    tolerance).
    """
    if not (0.0 < gamma < 2.0):
        raise ValueError("gamma must lie in (0, 2)")
    if delta_k < 0:
        raise ValueError("delta_k must be >= 0")
    v = as_vector(z, op.dim)
    z_tilde = resolvent(op, c_k, v)
    gap = float(np.linalg.norm(v - z_tilde))
    s = _ERROR_HEADROOM * gamma * delta_k * gap / (1.0 + gamma * delta_k)
    if s > 0.0:
        direction = rng.standard_normal(op.dim)
        dnorm = np.linalg.norm(direction)
        while dnorm == 0.0:
            direction = rng.standard_normal(op.dim)
            dnorm = np.linalg.norm(direction)
        z_bar = z_tilde + (s / dnorm) * direction
    else:
        z_bar = z_tilde.copy()
    z_next = relaxed_update(v, z_bar, gamma)
    err = float(np.linalg.norm(z_bar - z_tilde))
    allowed = delta_k * float(np.linalg.norm(v - z_next))
    if err > allowed + 1e-15 * (1.0 + allowed):
        raise NumericalError(
            "inexactness criterion violated: ||zbar - ztilde|| = %.3e > "
            "delta_k * ||z - z_next|| = %.3e" % (err, allowed)
        )
    return z_next, z_tilde, z_bar


def residual_stop(record: IterationRecord, tol: float, kappa: float) -> bool:
    """Scaled-residual stopping rule.

    True iff ||z - z_tilde|| / max(c_k, kappa) <= tol * (1 + ||z||). The
    residual is the computable quantity the convergence theory drives to
    zero; dividing by the proximal parameter matches the inverse-Lipschitz
    neighborhood condition, and the (1 + ||z||) factor makes the threshold
    relative at large scales.
    """
    scale = max(record.c_k, kappa)
    return record.residual / scale <= tol * (1.0 + record.z_norm)


def run_exact_gppa(
    op: MonotoneOperatorHandle, config: GppaConfig, z0
) -> IterationTrace:
    """Run the exact generalized proximal point iteration from z0.

    Iterates ``step_exact`` until the scaled residual passes ``residual_tol``
    or ``max_iter`` is reached, recording residuals and (when the operator
    carries a known zero) distances and per-step contraction ratios. Any
    non-finite iterate, residual, or distance terminates the run with
    ``termination == 'numerical_failure'``.
    """
    if config.delta_schedule is not None:
        raise ValueError("config has a delta schedule; use run_inexact_gppa")
    return _run(op, config, z0, exact=True)


def run_inexact_gppa(
    op: MonotoneOperatorHandle, config: GppaConfig, z0
) -> IterationTrace:
    """Run the inexact iteration with the relative-error criterion.

    Requires ``config.delta_schedule``. The injected perturbations are drawn
    from ``default_rng(config.seed)``, so runs are reproducible; with
    delta0 = 0 the trace coincides bit-for-bit with the exact run.
    """
    if config.delta_schedule is None:
        raise ValueError("config has no delta schedule; use run_exact_gppa")
    return _run(op, config, z0, exact=False)


def _run(op, config, z0, exact: bool) -> IterationTrace:
    z = as_vector(z0, op.dim)
    store_vectors = op.dim <= config.vector_storage_limit
    z_star = op.known_zero
    floor = distance_floor(z_star) if z_star is not None else None
    rng = np.random.default_rng(config.seed)
    kappa = config.c_schedule.kappa

    records: List[IterationRecord] = []
    termination = "max_iter"
    for k in range(config.max_iter):
        c_k = config.c_schedule.value(k)
        delta_k = None if exact else config.delta_schedule.value(k)
        try:
            if exact:
                z_next, z_tilde = step_exact(op, c_k, config.gamma, z)
                z_bar = None
            else:
                z_next, z_tilde, z_bar = step_inexact(
                    op, c_k, config.gamma, delta_k, z, rng
                )
        except (NumericalError, ValueError):
            termination = "numerical_failure"
            break

        residual = float(np.linalg.norm(z - z_tilde))
        z_norm = float(np.linalg.norm(z))
        if not np.isfinite(residual) or not np.isfinite(z_norm):
            termination = "numerical_failure"
            break

        rec = IterationRecord(
            k=k,
            c_k=c_k,
            residual=residual,
            z_norm=z_norm,
            z=z.copy() if store_vectors else None,
            z_tilde=z_tilde.copy() if store_vectors else None,
            z_bar=None if z_bar is None or not store_vectors else z_bar.copy(),
            delta_k=delta_k,
        )
        if z_star is not None:
            dist = float(np.linalg.norm(z - z_star))
            if not np.isfinite(dist):
                records.append(rec)
                termination = "numerical_failure"
                break
            if dist > floor:
                rec.dist_to_zero = dist
                rec.step_ratio = float(np.linalg.norm(z_next - z_star)) / dist

        records.append(rec)
        if residual_stop(rec, config.residual_tol, kappa):
            rec.step_ratio = None  # no step is taken past a converged record
            termination = "converged"
            break
        if not np.all(np.isfinite(z_next)):
            termination = "numerical_failure"
            break
        z = z_next

    if termination == "numerical_failure" and not records:
        raise NumericalError("iteration produced non-finite values at k=0")
    return IterationTrace(
        records=records, termination=termination, config=config, z_final=z.copy()
    )
