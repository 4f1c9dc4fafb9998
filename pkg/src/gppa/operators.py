"""Maximal monotone operators with closed-form resolvents.

The proximal algorithms in this package consume an operator only through its
resolvent map J_c = (I + c*T)^(-1), so a handle stores that map as a
first-class callable; the forward map T is optional and exists mainly so the
representation identity z = J_c(z) + c*T(J_c(z)) can be checked. Two concrete
operator families ship: a planar rotation (skew, monotone but not strongly
monotone, with an exactly known contraction coefficient) and general affine
maps z -> G z + h with positive semidefinite symmetric part.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "NumericalError",
    "MonotoneOperatorHandle",
    "RotationOperatorSpec",
    "AffineOperatorSpec",
    "PropertyReport",
    "make_rotation_operator",
    "make_affine_operator",
    "resolvent",
    "representation_decompose",
    "check_firm_nonexpansive",
]

# Smallest admissible eigenvalue of the symmetric part (G + G^T)/2.
_MONOTONE_EIG_TOL = -1e-10
# Singular values of G below this (relative to the largest) mean "not
# invertible" for the purpose of deriving a zero and an inverse modulus.
_SINGULAR_RTOL = 1e-12


class NumericalError(RuntimeError):
    """A linear solve or floating-point evaluation produced unusable values."""


def as_vector(z, dim: Optional[int] = None) -> np.ndarray:
    """Coerce ``z`` to a finite 1-D float array (always a fresh copy).

    Raises ``ValueError`` on NaN/Inf entries, empty input, or a dimension
    mismatch when ``dim`` is given. Every public operation funnels its vector
    arguments through here so non-finite data never enters a computation.
    """
    v = np.array(z, dtype=float, copy=True).reshape(-1)
    if v.size == 0:
        raise ValueError("vector must be nonempty")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite (no NaN/Inf)")
    if dim is not None and v.size != dim:
        raise ValueError("expected dimension %d, got %d" % (dim, v.size))
    return v


def as_matrix(m, shape=None) -> np.ndarray:
    """Coerce to a finite 2-D float array, optionally with a fixed shape."""
    a = np.array(m, dtype=float, copy=True)
    if a.ndim != 2:
        raise ValueError("expected a 2-D matrix, got ndim=%d" % a.ndim)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite (no NaN/Inf)")
    if shape is not None and a.shape != shape:
        raise ValueError("expected shape %s, got %s" % (shape, a.shape))
    return a


@dataclass(frozen=True)
class MonotoneOperatorHandle:
    """Capability record for a maximal monotone operator.

    Parameters
    ----------
    resolvent : callable
        ``(c, z) -> J_c(z)`` evaluating the resolvent (I + c*T)^(-1) at a
        positive proximal parameter ``c``. Must be a pure function.
    dim : int
        Ambient dimension.
    forward : callable, optional
        ``z -> T(z)``, present only for single-valued operators.
    known_zero : ndarray, optional
        A point z* with 0 in T(z*); enables distance-to-solution
        diagnostics and rate measurement.
    inverse_lipschitz_modulus : float, optional
        A modulus ``a`` such that ||z - z*|| <= a * ||w|| whenever
        z in T^(-1)(w) with ||w|| small. This is the rate-granting
        constant: it bounds the resolvent contraction toward z* by
        a / sqrt(a^2 + c^2).

    Handles are immutable after construction and safe to share across
    threads; resolvent evaluation is a pure function of its inputs.
    """

    resolvent: Callable[[float, np.ndarray], np.ndarray]
    dim: int
    forward: Optional[Callable[[np.ndarray], np.ndarray]] = None
    known_zero: Optional[np.ndarray] = None
    inverse_lipschitz_modulus: Optional[float] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if self.known_zero is not None:
            z = as_vector(self.known_zero, self.dim)
            z.setflags(write=False)
            object.__setattr__(self, "known_zero", z)
        a = self.inverse_lipschitz_modulus
        if a is not None and not (a > 0):
            raise ValueError("inverse_lipschitz_modulus must be positive")


@dataclass(frozen=True)
class RotationOperatorSpec:
    """Planar rotation operator T(x1, x2) = (x2, -x1) / a with a > 0.

    Skew-symmetric, hence monotone with <T(z) - T(z'), z - z'> = 0 exactly,
    so it is *not* strongly monotone; yet T^(-1) is globally Lipschitz with
    modulus ``a``. The resolvent contracts every point toward the origin by
    exactly a / sqrt(a^2 + c^2), which makes this the canonical worst case
    for linear-rate bounds of resolvent iterations.
    """

    a: float
    dim: int = 2

    def __post_init__(self):
        if not (self.a > 0):
            raise ValueError("rotation parameter a must be positive")
        if self.dim != 2:
            raise ValueError("rotation operator is planar (dim must be 2)")


@dataclass(frozen=True)
class AffineOperatorSpec:
    """Affine operator T(z) = G z + h, monotone iff G + G^T >= 0.

    Monotonicity is validated eagerly at construction: the smallest
    eigenvalue of the symmetric part (G + G^T)/2 must be >= -1e-10.
    """

    G: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        G = as_matrix(self.G)
        n, m = G.shape
        if n != m:
            raise ValueError("G must be square, got shape %s" % (G.shape,))
        h = as_vector(self.h, n)
        min_eig = float(np.linalg.eigvalsh(0.5 * (G + G.T)).min())
        if min_eig < _MONOTONE_EIG_TOL:
            raise ValueError(
                "G is not monotone: smallest symmetric-part eigenvalue "
                "%.3e < %.0e" % (min_eig, _MONOTONE_EIG_TOL)
            )
        G.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)

    @property
    def dim(self) -> int:
        return self.G.shape[0]


@dataclass
class PropertyReport:
    """Outcome of a sampled operator-property check.

    ``worst_inner_margin`` is the most negative value observed for
    <J(z) - J(z'), (I-J)(z) - (I-J)(z')> and ``worst_norm_margin`` the
    most negative value of ||z - z'||^2 - ||J(z)-J(z')||^2
    - ||(I-J)(z)-(I-J)(z')||^2; both must stay >= -1e-10 for a firmly
    nonexpansive map. The seed is recorded so failures replay exactly.
    """

    samples: int
    seed: int
    tolerance: float
    worst_inner_margin: float
    worst_norm_margin: float
    passed: bool


def make_rotation_operator(spec: RotationOperatorSpec) -> MonotoneOperatorHandle:
    """Build the handle for the planar rotation operator.

    The resolvent is the closed-form inverse of the 2x2 matrix
    I + (c/a) * [[0, 1], [-1, 0]]:

        J_c(z) = ( z1 - s*z2, s*z1 + z2 ) / (1 + s^2),   s = c/a.

    The origin is the unique zero and the inverse-Lipschitz modulus is
    exactly ``a``.
    """
    a = spec.a

    def _resolvent(c: float, z: np.ndarray) -> np.ndarray:
        s = c / a
        denom = 1.0 + s * s
        return np.array(
            [(z[0] - s * z[1]) / denom, (s * z[0] + z[1]) / denom]
        )

    def _forward(z: np.ndarray) -> np.ndarray:
        return np.array([z[1] / a, -z[0] / a])

    return MonotoneOperatorHandle(
        resolvent=_resolvent,
        dim=2,
        forward=_forward,
        known_zero=np.zeros(2),
        inverse_lipschitz_modulus=a,
    )


def make_affine_operator(spec: AffineOperatorSpec) -> MonotoneOperatorHandle:
    """Build the handle for T(z) = G z + h.

    The resolvent solves the linear system (I + c G) x = z - c h per call
    (no factorization caching, so varying c costs nothing extra). When G is
    invertible the handle also carries the zero z* = -G^(-1) h and the exact
    global inverse-Lipschitz modulus 1 / sigma_min(G).
    """
    G, h = spec.G, spec.h
    n = spec.dim
    eye = np.eye(n)

    def _resolvent(c: float, z: np.ndarray) -> np.ndarray:
        try:
            x = np.linalg.solve(eye + c * G, z - c * h)
        except np.linalg.LinAlgError as exc:  # unreachable for monotone G, c>0
            raise NumericalError("affine resolvent solve failed: %s" % exc)
        if not np.all(np.isfinite(x)):
            raise NumericalError("affine resolvent produced non-finite values")
        return x

    def _forward(z: np.ndarray) -> np.ndarray:
        return G @ z + h

    known_zero = None
    modulus = None
    svals = np.linalg.svd(G, compute_uv=False)
    if svals.min() > _SINGULAR_RTOL * max(svals.max(), 1.0):
        known_zero = np.linalg.solve(G, -h)
        modulus = 1.0 / float(svals.min())

    return MonotoneOperatorHandle(
        resolvent=_resolvent,
        dim=n,
        forward=_forward,
        known_zero=known_zero,
        inverse_lipschitz_modulus=modulus,
    )


def resolvent(op: MonotoneOperatorHandle, c: float, z) -> np.ndarray:
    """Evaluate J_c(z) = (I + c*T)^(-1)(z) with input validation.

    Parameters
    ----------
    op : MonotoneOperatorHandle
    c : float
        Proximal parameter, strictly positive.
    z : array_like
        Point of evaluation, dimension ``op.dim``, finite entries.
    """
    if not (c > 0):
        raise ValueError("proximal parameter c must be positive, got %r" % (c,))
    v = as_vector(z, op.dim)
    out = op.resolvent(float(c), v)
    return as_vector(out, op.dim)


def representation_decompose(op: MonotoneOperatorHandle, c: float, z):
    """Split z uniquely as x + c*y with y in T(x).

    Returns ``(x, y)`` where x = J_c(z) and y = (z - x)/c, so that
    z = x + c*y holds by construction and, for single-valued T, y = T(x).
    """
    v = as_vector(z, op.dim)
    x = resolvent(op, c, v)
    y = (v - x) / c
    return x, y


def check_firm_nonexpansive(
    op: MonotoneOperatorHandle,
    c: float,
    sample_count: int,
    seed: int,
    radius: float = 10.0,
    tolerance: float = 1e-10,
) -> PropertyReport:
    """Sample pairs and test the firm-nonexpansiveness inequalities of J_c.

    Draws ``sample_count`` pairs (z, z') uniformly from the ball of radius
    ``radius`` and checks, for each pair,

        <J(z) - J(z'), (I-J)(z) - (I-J)(z')>  >=  -tolerance
        ||z - z'||^2 - ||J(z)-J(z')||^2 - ||(I-J)(z)-(I-J)(z')||^2
                                              >=  -tolerance

    Failures never raise; the report carries the worst margins and a pass
    flag so callers can assert at their own tolerance.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    worst_inner = np.inf
    worst_norm = np.inf
    for _ in range(sample_count):
        z = _sample_ball(rng, op.dim, radius)
        zp = _sample_ball(rng, op.dim, radius)
        jz = resolvent(op, c, z)
        jzp = resolvent(op, c, zp)
        dj = jz - jzp
        dr = (z - jz) - (zp - jzp)
        inner = float(dj @ dr)
        norm_margin = float((z - zp) @ (z - zp) - dj @ dj - dr @ dr)
        worst_inner = min(worst_inner, inner)
        worst_norm = min(worst_norm, norm_margin)
    passed = worst_inner >= -tolerance and worst_norm >= -tolerance
    return PropertyReport(
        samples=sample_count,
        seed=seed,
        tolerance=tolerance,
        worst_inner_margin=worst_inner,
        worst_norm_margin=worst_norm,
        passed=passed,
    )


def _sample_ball(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    """Uniform sample from the closed ball of the given radius."""
    direction = rng.standard_normal(dim)
    norm = np.linalg.norm(direction)
    while norm == 0.0:
        direction = rng.standard_normal(dim)
        norm = np.linalg.norm(direction)
    r = radius * rng.uniform() ** (1.0 / dim)
    return (r / norm) * direction


def with_modulus(
    op: MonotoneOperatorHandle, modulus: Optional[float]
) -> MonotoneOperatorHandle:
    """Copy a handle with a different declared inverse-Lipschitz modulus."""
    return dataclasses.replace(op, inverse_lipschitz_modulus=modulus)
