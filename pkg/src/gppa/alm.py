"""Generalized augmented Lagrangian method for equality-constrained QPs.

For the model

    minimize  f(x) = (1/2) x'Qx + q'x   subject to  A x = b,

the multiplier iteration

    x^{k+1} = argmin_x { f(x) - <p^k, Ax> + (c_k/2) ||Ax - b||^2 }
    p^{k+1} = p^k - gamma * c_k * (A x^{k+1} - b)

is the relaxed resolvent iteration applied to the dual operator
S(p) = A grad f*(A'p) - b, which for quadratic f is the affine map
A Q^{-1} (A'p - q) - b. That equivalence is an exact identity, checkable
iterate by iterate: the intermediate multiplier ptilde^k = p^k
- c_k (A x^{k+1} - b) equals the resolvent of S at p^k. With Q positive
definite and A full row rank, S is strongly monotone with modulus
lambda_min(AA') / lambda_max(Q), which grants a linear rate with
inverse-Lipschitz modulus a = lambda_max(Q) / lambda_min(AA').
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .operators import (
    AffineOperatorSpec,
    MonotoneOperatorHandle,
    NumericalError,
    as_matrix,
    as_vector,
    make_affine_operator,
    resolvent,
    with_modulus,
)
from .ppa import (
    EquivalenceReport,
    ProximalSchedule,
    relaxed_update,
    step_exact,
)

__all__ = [
    "LinearlyConstrainedQP",
    "AlmRecord",
    "AlmTrace",
    "alm_x_subproblem",
    "run_generalized_alm",
    "make_dual_alm_operator",
    "verify_alm_ppa_equivalence",
    "kkt_residual",
    "random_qp",
]

_SPD_EIG_TOL = 1e-10


@dataclass(frozen=True)
class LinearlyConstrainedQP:
    """Strongly convex QP data: Q positive definite, A full row rank.

    Both conditions are validated at construction (smallest eigenvalue of Q
    and of AA' must exceed 1e-10), so every instance admits a unique
    primal-dual solution and an affine dual operator.
    """

    Q: np.ndarray
    q: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        Q = as_matrix(self.Q)
        n = Q.shape[0]
        if Q.shape != (n, n):
            raise ValueError("Q must be square")
        if not np.allclose(Q, Q.T, atol=1e-12, rtol=0):
            raise ValueError("Q must be symmetric")
        q = as_vector(self.q, n)
        A = as_matrix(self.A)
        if A.shape[1] != n:
            raise ValueError("A must have %d columns, got %d" % (n, A.shape[1]))
        m = A.shape[0]
        b = as_vector(self.b, m)
        if float(np.linalg.eigvalsh(Q).min()) <= _SPD_EIG_TOL:
            raise ValueError("Q must be positive definite (min eigenvalue <= 1e-10)")
        if float(np.linalg.eigvalsh(A @ A.T).min()) <= _SPD_EIG_TOL:
            raise ValueError("A must have full row rank (min eig of AA' <= 1e-10)")
        for arr in (Q, q, A, b):
            arr.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def grad_lipschitz(self) -> float:
        """L_f = lambda_max(Q), the Lipschitz constant of grad f."""
        return float(np.linalg.eigvalsh(self.Q).max())

    def dual_optimum(self) -> np.ndarray:
        """Unique zero of the dual operator: solves AQ^{-1}A' p = b + AQ^{-1}q."""
        AQinv = self.A @ np.linalg.inv(self.Q)
        return np.linalg.solve(AQinv @ self.A.T, self.b + AQinv @ self.q)

    def primal_from_dual(self, p) -> np.ndarray:
        """x = Q^{-1}(A'p - q), the primal minimizer at multiplier p."""
        return np.linalg.solve(self.Q, self.A.T @ as_vector(p, self.m) - self.q)


@dataclass
class AlmRecord:
    """One multiplier iteration: x^{k+1}, p^k, ptilde^k, p^{k+1}."""

    k: int
    c_k: float
    x: np.ndarray
    p: np.ndarray
    p_tilde: np.ndarray
    p_next: np.ndarray
    primal_residual: float
    dual_distance: Optional[float] = None


@dataclass
class AlmTrace:
    records: List[AlmRecord]
    termination: str  # 'converged' | 'max_iter'
    gamma: float
    p_final: np.ndarray

    def primal_residuals(self) -> np.ndarray:
        return np.array([r.primal_residual for r in self.records])


def alm_x_subproblem(problem: LinearlyConstrainedQP, p, c: float) -> np.ndarray:
    """Minimize the augmented Lagrangian in x at multiplier p and penalty c.

    Closed form for quadratic f: solves (Q + c A'A) x = A'p + c A'b - q.
    """
    if not (c > 0):
        raise ValueError("penalty c must be positive")
    p = as_vector(p, problem.m)
    A, Q = problem.A, problem.Q
    lhs = Q + c * (A.T @ A)
    rhs = A.T @ p + c * (A.T @ problem.b) - problem.q
    try:
        x = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("ALM x-subproblem solve failed: %s" % exc)
    if not np.all(np.isfinite(x)):
        raise NumericalError("ALM x-subproblem produced non-finite values")
    return x


def run_generalized_alm(
    problem: LinearlyConstrainedQP,
    gamma: float,
    c_schedule: ProximalSchedule,
    p0,
    max_iter: int = 200,
    tol: Optional[float] = None,
    track_dual_distance: bool = True,
) -> AlmTrace:
    """Run the relaxed multiplier iteration.

    Each step solves the x-subproblem, forms ptilde^k = p^k - c_k (Ax - b),
    and relaxes: p^{k+1} = p^k - gamma*(p^k - ptilde^k). gamma = 1 reproduces
    the classical augmented Lagrangian update bit-for-bit. If ``tol`` is
    given the run stops once ||Ax - b|| <= tol * (1 + ||b||).
    """
    if not (0.0 < gamma < 2.0):
        raise ValueError("gamma must lie in (0, 2)")
    if max_iter < 1:
        raise ValueError("max_iter must be positive")
    p = as_vector(p0, problem.m)
    p_star = problem.dual_optimum() if track_dual_distance else None
    records: List[AlmRecord] = []
    termination = "max_iter"
    for k in range(max_iter):
        c_k = c_schedule.value(k)
        x = alm_x_subproblem(problem, p, c_k)
        r = problem.A @ x - problem.b
        p_tilde = p - c_k * r
        p_next = relaxed_update(p, p_tilde, gamma)
        rec = AlmRecord(
            k=k,
            c_k=c_k,
            x=x,
            p=p.copy(),
            p_tilde=p_tilde,
            p_next=p_next,
            primal_residual=float(np.linalg.norm(r)),
            dual_distance=None
            if p_star is None
            else float(np.linalg.norm(p - p_star)),
        )
        records.append(rec)
        if tol is not None and rec.primal_residual <= tol * (
            1.0 + float(np.linalg.norm(problem.b))
        ):
            termination = "converged"
            p = p_next
            break
        p = p_next
    return AlmTrace(records=records, termination=termination, gamma=gamma, p_final=p)


def make_dual_alm_operator(problem: LinearlyConstrainedQP) -> MonotoneOperatorHandle:
    """Affine handle for the dual operator S(p) = A Q^{-1}(A'p - q) - b.

    carries the dual optimum as its known zero and the inverse-Lipschitz
    modulus a = lambda_max(Q) / lambda_min(AA'). That modulus is the
    upper-bound construction from the strong-monotonicity estimate, possibly
    larger than the exact one, so rate checks against it are one-sided.
    """
    A = problem.A
    Qinv = np.linalg.inv(problem.Q)
    G = A @ Qinv @ A.T
    h = -(A @ Qinv @ problem.q) - problem.b
    handle = make_affine_operator(AffineOperatorSpec(G=G, h=h))
    a = problem.grad_lipschitz / float(np.linalg.eigvalsh(A @ A.T).min())
    return with_modulus(handle, a)


def verify_alm_ppa_equivalence(
    problem: LinearlyConstrainedQP,
    gamma: float,
    c_schedule: ProximalSchedule,
    p0,
    iters: int,
) -> EquivalenceReport:
    """Run ALM and the dual resolvent iteration side by side.

    Checks, at every iteration, that ALM's intermediate multiplier equals
    the dual resolvent at ALM's own multiplier (the per-step identity) and
    that the two multiplier sequences coincide (the independent-path check).
    Returns the max deviation over both; nothing is asserted here.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    alm_trace = run_generalized_alm(
        problem, gamma, c_schedule, p0, max_iter=iters, tol=None
    )
    dual_op = make_dual_alm_operator(problem)

    per_iter = np.zeros(iters)
    dev_resolvent = 0.0
    dev_sequence = 0.0
    z = as_vector(p0, problem.m)
    for k in range(iters):
        rec = alm_trace.records[k]
        d_res = float(np.linalg.norm(rec.p_tilde - resolvent(dual_op, rec.c_k, rec.p)))
        d_seq = float(np.linalg.norm(rec.p - z))
        dev_resolvent = max(dev_resolvent, d_res)
        dev_sequence = max(dev_sequence, d_seq)
        per_iter[k] = max(d_res, d_seq)
        z, _ = step_exact(dual_op, rec.c_k, gamma, z)

    return EquivalenceReport(
        iterations=iters,
        max_deviation=max(dev_resolvent, dev_sequence),
        deviations={
            "resolvent_identity": dev_resolvent,
            "multiplier_sequence": dev_sequence,
        },
        per_iteration=per_iter,
    )


def kkt_residual(problem: LinearlyConstrainedQP, x, p) -> float:
    """max-norm KKT residual: max(||Qx + q - A'p||_inf, ||Ax - b||_inf)."""
    x = as_vector(x, problem.n)
    p = as_vector(p, problem.m)
    stat = problem.Q @ x + problem.q - problem.A.T @ p
    feas = problem.A @ x - problem.b
    return float(max(np.abs(stat).max(), np.abs(feas).max()))


def random_qp(n: int, m: int, seed: int) -> LinearlyConstrainedQP:
    """Seeded well-conditioned test problem: Q = B'B/n + I, A Gaussian."""
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    Q = B.T @ B / n + np.eye(n)
    q = rng.standard_normal(n)
    while True:
        A = rng.standard_normal((m, n))
        if float(np.linalg.eigvalsh(A @ A.T).min()) > 1e-6:
            break
    b = rng.standard_normal(m)
    return LinearlyConstrainedQP(Q=Q, q=q, A=A, b=b)
