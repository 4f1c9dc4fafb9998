"""Experiment configuration, orchestration, and machine-readable outputs.

One JSON document describes an experiment (single runs, equivalence checks,
superlinear probes, or rate sweeps over parameter grids); validation is
total, returning every violation at once rather than the first. Runs emit a
CSV trace (17 significant digits, so values round-trip exactly) plus a JSON
rate report, and sweeps add a summary table. Given the same config and seed,
outputs are byte-identical.

Verbs: ``run <config>``, ``validate <config>``, ``sweep <config>``,
``problem emit|check <path>``. Exit codes: 0 success, 1 validation failure,
2 numerical failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .admm import (
    SeparableQP,
    extract_primal_dual,
    random_separable_qp,
    run_generalized_admm,
    solve_separable_kkt,
    verify_admm_dr_correspondence,
)
from .alm import (
    LinearlyConstrainedQP,
    kkt_residual,
    make_dual_alm_operator,
    random_qp,
    run_generalized_alm,
    verify_alm_ppa_equivalence,
)
from .operators import (
    AffineOperatorSpec,
    MonotoneOperatorHandle,
    NumericalError,
    RotationOperatorSpec,
    make_affine_operator,
    make_rotation_operator,
)
from .ppa import (
    GppaConfig,
    InexactnessSchedule,
    IterationTrace,
    ProximalSchedule,
    distance_floor,
    run_exact_gppa,
    run_inexact_gppa,
)
from .rates import (
    estimate_empirical_rate,
    superlinear_probe,
    theoretical_exact_rate,
    theoretical_inexact_factor,
)

__all__ = [
    "ConfigError",
    "ProblemFormatError",
    "ExperimentConfig",
    "parse_config",
    "run_experiment",
    "emit_problem_file",
    "load_problem_file",
    "main",
    "EXIT_OK",
    "EXIT_VALIDATION",
    "EXIT_NUMERICAL",
    "EXIT_IO",
]

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

EQUIVALENCE_PASS_TOL = 1e-9

_KINDS = {
    "gppa_exact",
    "gppa_inexact",
    "alm",
    "admm",
    "equivalence",
    "superlinear_probe",
    "rate_sweep",
}

_ALLOWED_KEYS = {
    "gppa_exact": {"kind", "operator", "z0", "gamma", "c", "max_iter",
                   "residual_tol", "seed"},
    "gppa_inexact": {"kind", "operator", "z0", "gamma", "c", "delta",
                     "max_iter", "residual_tol", "seed"},
    "alm": {"kind", "problem", "gamma", "c", "p0", "max_iter", "tol", "seed"},
    "admm": {"kind", "problem", "gamma", "w0", "p0", "max_iter", "tol", "seed"},
    "equivalence": {"kind", "target", "problem", "gamma", "c", "p0", "z0",
                    "iters", "seed"},
    "superlinear_probe": {"kind", "a", "gamma", "c0", "growth", "iters",
                          "z0", "seed"},
    "rate_sweep": {"kind", "operator", "z0", "gamma_grid", "c_grid",
                   "delta0_grid", "delta_decay", "max_iter", "residual_tol",
                   "seed"},
}


class ConfigError(ValueError):
    """Invalid experiment configuration; ``errors`` lists every violation."""

    def __init__(self, errors: List[dict]):
        self.errors = list(errors)
        summary = "; ".join(
            "%s: %s" % (e["field"], e["message"]) for e in self.errors
        )
        super().__init__("invalid configuration: " + summary)


class ProblemFormatError(ValueError):
    """Malformed problem document (message carries line/field context)."""


@dataclass
class ExperimentConfig:
    """Validated experiment description (one JSON document)."""

    kind: str
    seed: int = 0
    source: dict = field(default_factory=dict)
    # gppa / sweep
    operator_kind: Optional[str] = None
    operator: Optional[MonotoneOperatorHandle] = None
    z0: Optional[np.ndarray] = None
    gamma: Optional[float] = None
    c_schedule: Optional[ProximalSchedule] = None
    delta_schedule: Optional[InexactnessSchedule] = None
    max_iter: int = 200
    residual_tol: float = 1e-10
    # alm / admm / equivalence
    problem: Optional[object] = None
    p0: Optional[np.ndarray] = None
    w0: Optional[np.ndarray] = None
    tol: Optional[float] = None
    target: Optional[str] = None
    iters: int = 100
    # probe
    a: Optional[float] = None
    c0: Optional[float] = None
    growth: Optional[float] = None
    # sweep grids
    gamma_grid: Tuple[float, ...] = ()
    c_grid: Tuple[float, ...] = ()
    delta0_grid: Tuple[float, ...] = ()
    delta_decay: float = 0.9

    def planned_runs(self) -> int:
        if self.kind == "rate_sweep":
            return (
                len(self.gamma_grid)
                * len(self.c_grid)
                * max(1, len(self.delta0_grid))
            )
        return 1


# ---------------------------------------------------------------------------
# problem documents

def _problem_to_doc(problem) -> dict:
    if isinstance(problem, LinearlyConstrainedQP):
        return {
            "kind": "linearly_constrained_qp",
            "n": problem.n,
            "m": problem.m,
            "Q": problem.Q.ravel().tolist(),
            "q": problem.q.tolist(),
            "A": problem.A.ravel().tolist(),
            "b": problem.b.tolist(),
        }
    if isinstance(problem, SeparableQP):
        return {
            "kind": "separable_qp",
            "n": problem.n,
            "m": problem.m,
            "Q_f": problem.Q_f.ravel().tolist(),
            "q_f": problem.q_f.tolist(),
            "Q_g": problem.Q_g.ravel().tolist(),
            "q_g": problem.q_g.tolist(),
            "M": problem.M.ravel().tolist(),
            "lam": problem.lam,
        }
    raise TypeError("unsupported problem type %r" % type(problem).__name__)


def _doc_numbers(doc: dict, name: str, count: int) -> np.ndarray:
    if name not in doc:
        raise ProblemFormatError("field '%s': missing" % name)
    val = doc[name]
    if not isinstance(val, list) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in val
    ):
        raise ProblemFormatError("field '%s': expected a list of numbers" % name)
    if len(val) != count:
        raise ProblemFormatError(
            "field '%s': expected %d numbers, got %d" % (name, count, len(val))
        )
    arr = np.array(val, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ProblemFormatError("field '%s': entries must be finite" % name)
    return arr


def _doc_dim(doc: dict, name: str) -> int:
    if name not in doc:
        raise ProblemFormatError("field '%s': missing" % name)
    val = doc[name]
    if not isinstance(val, int) or isinstance(val, bool) or val < 1:
        raise ProblemFormatError("field '%s': expected a positive integer" % name)
    return val


def _parse_problem_doc(doc) -> object:
    """Build a problem from its JSON document (matrices flat, row-major)."""
    if not isinstance(doc, dict):
        raise ProblemFormatError("problem document must be a JSON object")
    kind = doc.get("kind")
    if kind == "linearly_constrained_qp":
        allowed = {"kind", "n", "m", "Q", "q", "A", "b"}
    elif kind == "separable_qp":
        allowed = {"kind", "n", "m", "Q_f", "q_f", "Q_g", "q_g", "M", "lam"}
    else:
        raise ProblemFormatError(
            "field 'kind': expected 'linearly_constrained_qp' or "
            "'separable_qp', got %r" % (kind,)
        )
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ProblemFormatError("unknown fields: %s" % ", ".join(unknown))
    n = _doc_dim(doc, "n")
    m = _doc_dim(doc, "m")
    try:
        if kind == "linearly_constrained_qp":
            return LinearlyConstrainedQP(
                Q=_doc_numbers(doc, "Q", n * n).reshape(n, n),
                q=_doc_numbers(doc, "q", n),
                A=_doc_numbers(doc, "A", m * n).reshape(m, n),
                b=_doc_numbers(doc, "b", m),
            )
        lam = doc.get("lam")
        if not isinstance(lam, (int, float)) or isinstance(lam, bool) or not lam > 0:
            raise ProblemFormatError("field 'lam': expected a positive number")
        return SeparableQP(
            Q_f=_doc_numbers(doc, "Q_f", n * n).reshape(n, n),
            q_f=_doc_numbers(doc, "q_f", n),
            Q_g=_doc_numbers(doc, "Q_g", m * m).reshape(m, m),
            q_g=_doc_numbers(doc, "q_g", m),
            M=_doc_numbers(doc, "M", m * n).reshape(m, n),
            lam=float(lam),
        )
    except ValueError as exc:  # domain validation (SPD, rank, ...)
        raise ProblemFormatError(str(exc))


def emit_problem_file(problem, path) -> None:
    """Write a problem as JSON; ``load_problem_file`` restores it bit-for-bit."""
    doc = _problem_to_doc(problem)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_problem_file(path):
    """Read a problem document, raising ``ProblemFormatError`` with context."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(
            "line %d, column %d: %s" % (exc.lineno, exc.colno, exc.msg)
        )
    return _parse_problem_doc(doc)


# ---------------------------------------------------------------------------
# config validation

def _err(errors, fieldname, message, value=None):
    errors.append({"field": fieldname, "message": message, "value": value})


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _number(cfg, key, errors, required=False, default=None):
    if key not in cfg:
        if required:
            _err(errors, key, "required field is missing")
        return default
    v = cfg[key]
    if not _is_num(v) or not np.isfinite(v):
        _err(errors, key, "expected a finite number", v)
        return default
    return float(v)


def _integer(cfg, key, errors, default, minimum=1):
    if key not in cfg:
        return default
    v = cfg[key]
    if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
        _err(errors, key, "expected an integer >= %d" % minimum, v)
        return default
    return v


def _vector(cfg, key, errors, required=False, dim=None):
    if key not in cfg:
        if required:
            _err(errors, key, "required field is missing")
        return None
    v = cfg[key]
    if (
        not isinstance(v, list)
        or not v
        or not all(_is_num(x) and np.isfinite(x) for x in v)
    ):
        _err(errors, key, "expected a nonempty list of finite numbers", v)
        return None
    if dim is not None and len(v) != dim:
        _err(errors, key, "expected %d entries, got %d" % (dim, len(v)), v)
        return None
    return np.array(v, dtype=float)


def _gamma(cfg, errors, required=True):
    g = _number(cfg, "gamma", errors, required=required)
    if g is not None and not (0.0 < g < 2.0):
        _err(
            errors,
            "gamma",
            "relaxation factor must lie in the open interval (0, 2)",
            g,
        )
        return None
    return g


def _c_schedule(cfg, errors) -> Optional[ProximalSchedule]:
    if "c" not in cfg:
        return ProximalSchedule.constant(1.0)
    spec = cfg["c"]
    if _is_num(spec):
        if not (spec > 0 and np.isfinite(spec)):
            _err(errors, "c", "proximal parameter must be positive", spec)
            return None
        return ProximalSchedule.constant(float(spec))
    if not isinstance(spec, dict):
        _err(errors, "c", "expected a number or an object", spec)
        return None
    kind = spec.get("kind")
    try:
        if kind == "constant":
            value = spec.get("value")
            if not _is_num(value) or not value > 0:
                _err(errors, "c.value", "proximal parameter must be positive", value)
                return None
            return ProximalSchedule.constant(float(value))
        if kind == "geometric":
            c0, growth = spec.get("c0"), spec.get("growth")
            if not _is_num(c0) or not c0 > 0:
                _err(errors, "c.c0", "must be positive", c0)
                return None
            if not _is_num(growth) or not growth >= 1.0:
                _err(errors, "c.growth", "must be >= 1", growth)
                return None
            return ProximalSchedule.geometric(float(c0), float(growth))
        if kind == "list":
            values = spec.get("values")
            if (
                not isinstance(values, list)
                or not values
                or not all(_is_num(v) and v > 0 for v in values)
            ):
                _err(errors, "c.values", "expected a nonempty list of positive numbers", values)
                return None
            return ProximalSchedule.explicit([float(v) for v in values])
    except ValueError as exc:
        _err(errors, "c", str(exc), spec)
        return None
    _err(errors, "c.kind", "expected 'constant', 'geometric' or 'list'", kind)
    return None


def _delta_schedule(cfg, errors, required) -> Optional[InexactnessSchedule]:
    if "delta" not in cfg:
        if required:
            _err(errors, "delta", "required field is missing")
        return None
    spec = cfg["delta"]
    if not isinstance(spec, dict):
        _err(errors, "delta", "expected an object with delta0/decay", spec)
        return None
    delta0 = spec.get("delta0")
    decay = spec.get("decay", 0.9)
    ok = True
    if not _is_num(delta0) or delta0 < 0:
        _err(errors, "delta.delta0", "must be a number >= 0", delta0)
        ok = False
    if not _is_num(decay) or not (0.0 < decay < 1.0):
        _err(errors, "delta.decay", "must lie in (0, 1) so the tolerances are summable", decay)
        ok = False
    return InexactnessSchedule(float(delta0), float(decay)) if ok else None


def _operator(cfg, errors):
    if "operator" not in cfg:
        _err(errors, "operator", "required field is missing")
        return None, None
    spec = cfg["operator"]
    if not isinstance(spec, dict):
        _err(errors, "operator", "expected an object", spec)
        return None, None
    op_type = spec.get("type")
    if op_type == "rotation":
        unknown = sorted(set(spec) - {"type", "a"})
        if unknown:
            _err(errors, "operator", "unknown fields: %s" % ", ".join(unknown))
            return None, None
        a = spec.get("a")
        if not _is_num(a) or not a > 0:
            _err(errors, "operator.a", "must be a positive number", a)
            return None, None
        return "rotation", make_rotation_operator(RotationOperatorSpec(a=float(a)))
    if op_type == "affine":
        unknown = sorted(set(spec) - {"type", "dim", "G", "h"})
        if unknown:
            _err(errors, "operator", "unknown fields: %s" % ", ".join(unknown))
            return None, None
        dim = spec.get("dim")
        if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
            _err(errors, "operator.dim", "expected a positive integer", dim)
            return None, None
        try:
            G = _doc_numbers(spec, "G", dim * dim).reshape(dim, dim)
            h = _doc_numbers(spec, "h", dim)
            return "affine", make_affine_operator(AffineOperatorSpec(G=G, h=h))
        except (ProblemFormatError, ValueError) as exc:
            _err(errors, "operator", str(exc))
            return None, None
    _err(errors, "operator.type", "expected 'rotation' or 'affine'", op_type)
    return None, None


def _grid(cfg, key, errors, required, check, what):
    if key not in cfg:
        if required:
            _err(errors, key, "required field is missing")
        return ()
    v = cfg[key]
    if not isinstance(v, list) or not v:
        _err(errors, key, "expected a nonempty list", v)
        return ()
    out = []
    for x in v:
        if not _is_num(x) or not check(x):
            _err(errors, key, "entry must be %s" % what, x)
            return ()
        out.append(float(x))
    return tuple(out)


def _problem(cfg, errors, expected_cls=None):
    if "problem" not in cfg:
        _err(errors, "problem", "required field is missing")
        return None
    spec = cfg["problem"]
    if not isinstance(spec, dict):
        _err(errors, "problem", "expected an object (inline problem or {'path': ...})", spec)
        return None
    try:
        if set(spec) == {"path"}:
            problem = load_problem_file(spec["path"])
        else:
            problem = _parse_problem_doc(spec)
    except OSError as exc:
        _err(errors, "problem.path", "cannot read problem file: %s" % exc)
        return None
    except ProblemFormatError as exc:
        _err(errors, "problem", str(exc))
        return None
    if expected_cls is not None and not isinstance(problem, expected_cls):
        _err(
            errors,
            "problem",
            "expected a %s problem" % expected_cls.__name__,
        )
        return None
    return problem


def parse_config(source) -> ExperimentConfig:
    """Parse and validate an experiment config (path, JSON text, or dict).

    Raises ``ConfigError`` carrying the full structured error list: each
    entry names the offending field, the violated constraint, and the value.
    """
    if isinstance(source, dict):
        cfg = source
    else:
        text = None
        candidate = Path(str(source))
        try:
            if candidate.is_file():
                text = candidate.read_text(encoding="utf-8")
        except OSError:
            text = None
        if text is None:
            text = str(source)
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                [{"field": "<document>",
                  "message": "invalid JSON at line %d, column %d: %s"
                  % (exc.lineno, exc.colno, exc.msg),
                  "value": None}]
            )
    if not isinstance(cfg, dict):
        raise ConfigError(
            [{"field": "<document>", "message": "config must be a JSON object",
              "value": cfg}]
        )

    errors: List[dict] = []
    kind = cfg.get("kind")
    if kind not in _KINDS:
        _err(errors, "kind", "expected one of %s" % ", ".join(sorted(_KINDS)), kind)
        raise ConfigError(errors)

    unknown = sorted(set(cfg) - _ALLOWED_KEYS[kind])
    for key in unknown:
        _err(errors, key, "unknown key for kind '%s'" % kind)

    out = ExperimentConfig(kind=kind, source=dict(cfg))
    out.seed = _integer(cfg, "seed", errors, default=0, minimum=0)

    if kind in ("gppa_exact", "gppa_inexact", "rate_sweep"):
        out.operator_kind, out.operator = _operator(cfg, errors)
        dim = out.operator.dim if out.operator is not None else None
        out.z0 = _vector(cfg, "z0", errors, required=True, dim=dim)
        out.max_iter = _integer(cfg, "max_iter", errors, default=200)
        tol = _number(cfg, "residual_tol", errors, default=1e-10)
        if tol is not None and not tol > 0:
            _err(errors, "residual_tol", "must be positive", tol)
        else:
            out.residual_tol = tol

    if kind in ("gppa_exact", "gppa_inexact"):
        out.gamma = _gamma(cfg, errors)
        out.c_schedule = _c_schedule(cfg, errors)
        out.delta_schedule = _delta_schedule(
            cfg, errors, required=(kind == "gppa_inexact")
        )
        if kind == "gppa_exact" and "delta" in cfg:
            _err(errors, "delta", "not allowed in exact mode")

    elif kind == "rate_sweep":
        out.gamma_grid = _grid(
            cfg, "gamma_grid", errors, required=True,
            check=lambda g: 0.0 < g < 2.0,
            what="a relaxation factor in the open interval (0, 2)",
        )
        out.c_grid = _grid(
            cfg, "c_grid", errors, required=True,
            check=lambda c: c > 0, what="a positive proximal parameter",
        )
        out.delta0_grid = _grid(
            cfg, "delta0_grid", errors, required=False,
            check=lambda d: d >= 0, what="a tolerance >= 0",
        )
        decay = _number(cfg, "delta_decay", errors, default=0.9)
        if decay is not None and not (0.0 < decay < 1.0):
            _err(errors, "delta_decay", "must lie in (0, 1)", decay)
        else:
            out.delta_decay = decay

    elif kind == "alm":
        out.problem = _problem(cfg, errors, LinearlyConstrainedQP)
        out.gamma = _gamma(cfg, errors)
        out.c_schedule = _c_schedule(cfg, errors)
        m = out.problem.m if out.problem is not None else None
        out.p0 = _vector(cfg, "p0", errors, dim=m)
        if out.p0 is None and out.problem is not None:
            out.p0 = np.zeros(out.problem.m)
        out.max_iter = _integer(cfg, "max_iter", errors, default=200)
        out.tol = _number(cfg, "tol", errors, default=None)
        if out.tol is not None and not out.tol > 0:
            _err(errors, "tol", "must be positive", out.tol)

    elif kind == "admm":
        out.problem = _problem(cfg, errors, SeparableQP)
        out.gamma = _gamma(cfg, errors)
        m = out.problem.m if out.problem is not None else None
        out.w0 = _vector(cfg, "w0", errors, dim=m)
        out.p0 = _vector(cfg, "p0", errors, dim=m)
        if out.problem is not None:
            if out.w0 is None:
                out.w0 = np.zeros(out.problem.m)
            if out.p0 is None:
                out.p0 = np.zeros(out.problem.m)
        out.max_iter = _integer(cfg, "max_iter", errors, default=300)
        out.tol = _number(cfg, "tol", errors, default=None)
        if out.tol is not None and not out.tol > 0:
            _err(errors, "tol", "must be positive", out.tol)

    elif kind == "equivalence":
        target = cfg.get("target")
        if target not in ("alm", "admm"):
            _err(errors, "target", "expected 'alm' or 'admm'", target)
            raise ConfigError(errors)
        out.target = target
        out.gamma = _gamma(cfg, errors)
        out.iters = _integer(cfg, "iters", errors, default=100)
        if target == "alm":
            if "z0" in cfg:
                _err(errors, "z0", "not used for ALM equivalence (use p0)")
            out.problem = _problem(cfg, errors, LinearlyConstrainedQP)
            out.c_schedule = _c_schedule(cfg, errors)
            m = out.problem.m if out.problem is not None else None
            out.p0 = _vector(cfg, "p0", errors, dim=m)
            if out.p0 is None and out.problem is not None:
                out.p0 = np.zeros(out.problem.m)
        else:
            for key in ("c", "p0"):
                if key in cfg:
                    _err(errors, key, "not used for ADMM equivalence (use z0)")
            out.problem = _problem(cfg, errors, SeparableQP)
            m = out.problem.m if out.problem is not None else None
            out.z0 = _vector(cfg, "z0", errors, dim=m)
            if out.z0 is None and out.problem is not None:
                out.z0 = np.zeros(out.problem.m)

    elif kind == "superlinear_probe":
        out.a = _number(cfg, "a", errors, required=True)
        if out.a is not None and not out.a > 0:
            _err(errors, "a", "must be positive", out.a)
        out.gamma = _gamma(cfg, errors)
        out.c0 = _number(cfg, "c0", errors, required=True)
        if out.c0 is not None and not out.c0 > 0:
            _err(errors, "c0", "must be positive", out.c0)
        out.growth = _number(cfg, "growth", errors, required=True)
        if out.growth is not None and not out.growth >= 1.0:
            _err(errors, "growth", "must be >= 1", out.growth)
        out.iters = _integer(cfg, "iters", errors, default=20, minimum=10)
        out.z0 = _vector(cfg, "z0", errors, dim=2)
        if out.z0 is None:
            out.z0 = np.array([1.0, 0.0])
        elif float(np.linalg.norm(out.z0)) == 0.0:
            _err(errors, "z0", "must be nonzero")

    if errors:
        raise ConfigError(errors)
    return out


# ---------------------------------------------------------------------------
# output formatting

def _fmt(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def _csv_text(header: List[str], rows: List[List]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(c) if isinstance(c, (int, str)) else _fmt(c) for c in row))
    return "\n".join(lines) + "\n"


def _report_text(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _gppa_trace_csv(trace: IterationTrace) -> str:
    header = ["k", "c_k", "delta_k", "residual", "dist_to_zero", "step_ratio"]
    rows = [
        [r.k, r.c_k, r.delta_k, r.residual, r.dist_to_zero, r.step_ratio]
        for r in trace.records
    ]
    return _csv_text(header, rows)


def _ratio_column(dists: List[Optional[float]], floor: float) -> List[Optional[float]]:
    out: List[Optional[float]] = []
    for k in range(len(dists)):
        d0 = dists[k]
        d1 = dists[k + 1] if k + 1 < len(dists) else None
        if d0 is not None and d1 is not None and d0 > floor:
            out.append(d1 / d0)
        else:
            out.append(None)
    return out


def _gppa_report(config: ExperimentConfig, trace: IterationTrace) -> dict:
    op = config.operator
    exact = config.delta_schedule is None
    last_c = trace.records[-1].c_k
    theoretical = None
    if op.inverse_lipschitz_modulus is not None:
        rho = theoretical_exact_rate(config.gamma, last_c, op.inverse_lipschitz_modulus)
        if exact:
            theoretical = float(np.sqrt(rho))
        else:
            theoretical = theoretical_inexact_factor(
                config.gamma, last_c, op.inverse_lipschitz_modulus,
                config.delta_schedule.value(len(trace.records) - 1),
            )
    report = {
        "kind": config.kind,
        "gamma": config.gamma,
        "seed": config.seed,
        "termination": trace.termination,
        "iterations": len(trace.records),
        "final_residual": trace.records[-1].residual,
        "theoretical_factor": theoretical,
        "empirical_geometric_mean": None,
        "empirical_tail_ratio_max": None,
        "tight": None,
        "window": None,
    }
    if op.known_zero is not None and theoretical is not None:
        equality = config.operator_kind == "rotation" and config.gamma == 1.0 and exact
        try:
            rr = estimate_empirical_rate(
                trace, op.known_zero, theoretical_factor=theoretical,
                equality=equality,
            )
        except ValueError:
            pass
        else:
            report["empirical_geometric_mean"] = rr.empirical_geometric_mean
            report["empirical_tail_ratio_max"] = rr.empirical_tail_ratio_max
            report["tight"] = rr.tight
            report["window"] = list(rr.window)
    return report


# ---------------------------------------------------------------------------
# experiment dispatch

def _run_gppa(config: ExperimentConfig, out_dir: Path) -> int:
    gppa_config = GppaConfig(
        gamma=config.gamma,
        c_schedule=config.c_schedule,
        delta_schedule=config.delta_schedule,
        max_iter=config.max_iter,
        residual_tol=config.residual_tol,
        seed=config.seed,
    )
    runner = run_exact_gppa if config.delta_schedule is None else run_inexact_gppa
    trace = runner(config.operator, gppa_config, config.z0)
    _write(out_dir / "trace.csv", _gppa_trace_csv(trace))
    _write(out_dir / "report.json", _report_text(_gppa_report(config, trace)))
    print("wrote %s and %s" % (out_dir / "trace.csv", out_dir / "report.json"))
    if trace.termination == "numerical_failure":
        print("numerical failure after %d iterations" % len(trace.records))
        return EXIT_NUMERICAL
    return EXIT_OK


def _run_alm(config: ExperimentConfig, out_dir: Path) -> int:
    problem = config.problem
    trace = run_generalized_alm(
        problem, config.gamma, config.c_schedule, config.p0,
        max_iter=config.max_iter, tol=config.tol,
    )
    p_star = problem.dual_optimum()
    floor = distance_floor(p_star)
    dists = [r.dual_distance for r in trace.records]
    ratios = _ratio_column(dists, floor)
    header = ["k", "c_k", "delta_k", "residual", "dist_to_zero", "step_ratio",
              "x_norm", "p_norm"]
    rows = [
        [r.k, r.c_k, None, r.primal_residual,
         None if (r.dual_distance is not None and r.dual_distance <= floor) else r.dual_distance,
         ratios[i],
         float(np.linalg.norm(r.x)), float(np.linalg.norm(r.p))]
        for i, r in enumerate(trace.records)
    ]
    _write(out_dir / "trace.csv", _csv_text(header, rows))

    a = problem.grad_lipschitz / float(
        np.linalg.eigvalsh(problem.A @ problem.A.T).min()
    )
    last = trace.records[-1]
    usable = [r for r in ratios if r is not None]
    tail = usable[len(usable) // 2:] if usable else []
    report = {
        "kind": "alm",
        "gamma": config.gamma,
        "seed": config.seed,
        "termination": trace.termination,
        "iterations": len(trace.records),
        "final_primal_residual": last.primal_residual,
        "final_kkt_residual": kkt_residual(problem, last.x, last.p_next),
        "inverse_lipschitz_modulus": a,
        "theoretical_factor": float(
            np.sqrt(theoretical_exact_rate(config.gamma, last.c_k, a))
        ),
        "empirical_tail_ratio_max": max(tail) if tail else None,
    }
    _write(out_dir / "report.json", _report_text(report))
    print("wrote %s and %s" % (out_dir / "trace.csv", out_dir / "report.json"))
    return EXIT_OK


def _run_admm(config: ExperimentConfig, out_dir: Path) -> int:
    problem = config.problem
    trace = run_generalized_admm(
        problem, config.gamma, (config.w0, config.p0),
        max_iter=config.max_iter, tol=config.tol,
    )
    _, w_star, p_star = solve_separable_kkt(problem)
    z_star = p_star + problem.lam * w_star
    floor = distance_floor(z_star)
    dists = [float(np.linalg.norm(r.z - z_star)) for r in trace.records]
    ratios = _ratio_column(dists, floor)
    header = ["k", "c_k", "delta_k", "residual", "dist_to_zero", "step_ratio",
              "x_norm", "w_norm", "p_norm"]
    rows = [
        [r.k, 1.0, None, r.constraint_residual,
         dists[i] if dists[i] > floor else None, ratios[i],
         float(np.linalg.norm(r.x)), float(np.linalg.norm(r.w)),
         float(np.linalg.norm(r.p))]
        for i, r in enumerate(trace.records)
    ]
    _write(out_dir / "trace.csv", _csv_text(header, rows))

    estimate = extract_primal_dual(trace, problem)
    report = {
        "kind": "admm",
        "gamma": config.gamma,
        "lam": problem.lam,
        "seed": config.seed,
        "termination": trace.termination,
        "iterations": len(trace.records),
        "final_constraint_residual": trace.records[-1].constraint_residual,
        "g_contraction_bound": problem.g_contraction_bound(),
        "tail_ratio_max": {
            k: (None if np.isnan(v) else v)
            for k, v in estimate.tail_ratio_max.items()
        },
        "x_recovery_notice": estimate.x_recovery_notice,
    }
    _write(out_dir / "report.json", _report_text(report))
    print("wrote %s and %s" % (out_dir / "trace.csv", out_dir / "report.json"))
    return EXIT_OK


def _run_equivalence(config: ExperimentConfig, out_dir: Path) -> int:
    if config.target == "alm":
        rep = verify_alm_ppa_equivalence(
            config.problem, config.gamma, config.c_schedule, config.p0,
            config.iters,
        )
    else:
        rep = verify_admm_dr_correspondence(
            config.problem, config.gamma, config.z0, config.iters
        )
    rows = [[k, rep.per_iteration[k]] for k in range(len(rep.per_iteration))]
    _write(out_dir / "trace.csv", _csv_text(["k", "deviation"], rows))
    report = {
        "kind": "equivalence",
        "target": config.target,
        "gamma": config.gamma,
        "seed": config.seed,
        "iterations": rep.iterations,
        "max_deviation": rep.max_deviation,
        "deviations": rep.deviations,
        "pass": bool(rep.max_deviation <= EQUIVALENCE_PASS_TOL),
    }
    _write(out_dir / "report.json", _report_text(report))
    print(
        "wrote %s and %s (max deviation %.3e)"
        % (out_dir / "trace.csv", out_dir / "report.json", rep.max_deviation)
    )
    return EXIT_OK


def _run_probe(config: ExperimentConfig, out_dir: Path) -> int:
    probe = superlinear_probe(
        config.a, config.gamma, config.c0, config.growth, config.iters, config.z0
    )
    rows = [
        [k, config.c0 * config.growth**k, probe.ratios[k]]
        for k in range(probe.iterations)
    ]
    _write(out_dir / "trace.csv", _csv_text(["k", "c_k", "ratio"], rows))
    report = {
        "kind": "superlinear_probe",
        "gamma": probe.gamma,
        "a": probe.a,
        "c0": probe.c0,
        "growth": probe.growth,
        "seed": config.seed,
        "iterations": probe.iterations,
        "final_ratio": probe.final_ratio,
        "limit_ratio": probe.limit_ratio,
    }
    _write(out_dir / "report.json", _report_text(report))
    print(
        "wrote %s and %s (final ratio %.6g)"
        % (out_dir / "trace.csv", out_dir / "report.json", probe.final_ratio)
    )
    return EXIT_OK


def _sweep_point(config: ExperimentConfig, gamma: float, c: float,
                 delta0: Optional[float]):
    delta = (
        None
        if delta0 is None
        else InexactnessSchedule(delta0, config.delta_decay)
    )
    gppa_config = GppaConfig(
        gamma=gamma,
        c_schedule=ProximalSchedule.constant(c),
        delta_schedule=delta,
        max_iter=config.max_iter,
        residual_tol=config.residual_tol,
        seed=config.seed,
    )
    runner = run_exact_gppa if delta is None else run_inexact_gppa
    trace = runner(config.operator, gppa_config, config.z0)
    point = ExperimentConfig(
        kind="gppa_exact" if delta is None else "gppa_inexact",
        seed=config.seed,
        operator_kind=config.operator_kind,
        operator=config.operator,
        gamma=gamma,
        c_schedule=gppa_config.c_schedule,
        delta_schedule=delta,
    )
    report = _gppa_report(point, trace)
    return trace, report


def _run_sweep(config: ExperimentConfig, out_dir: Path, workers: int) -> int:
    delta_grid: Tuple[Optional[float], ...] = config.delta0_grid or (None,)
    grid = [
        (gamma, c, d0)
        for gamma in config.gamma_grid
        for c in config.c_grid
        for d0 in delta_grid
    ]

    def work(point):
        gamma, c, d0 = point
        return _sweep_point(config, gamma, c, d0)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, grid))
    else:
        results = [work(p) for p in grid]

    summary_rows = []
    failures = 0
    for idx, ((gamma, c, d0), (trace, report)) in enumerate(zip(grid, results)):
        name = "run_%03d" % idx
        _write(out_dir / (name + ".csv"), _gppa_trace_csv(trace))
        _write(out_dir / (name + "_report.json"), _report_text(report))
        if trace.termination == "numerical_failure":
            failures += 1
        summary_rows.append([
            idx, gamma, c, d0,
            report["theoretical_factor"],
            report["empirical_geometric_mean"],
            report["empirical_tail_ratio_max"],
            str(report["tight"]).lower() if report["tight"] is not None else "",
            name + ".csv",
        ])
    header = ["index", "gamma", "c", "delta0", "theoretical_factor",
              "empirical_geometric_mean", "empirical_tail_ratio_max",
              "tight", "trace"]
    _write(out_dir / "summary.csv", _csv_text(header, summary_rows))
    print("wrote %d runs and %s" % (len(grid), out_dir / "summary.csv"))
    return EXIT_NUMERICAL if failures else EXIT_OK


def run_experiment(config: ExperimentConfig, out_dir, workers: int = 1) -> int:
    """Execute a validated config, writing artifacts into ``out_dir``.

    Returns the process exit code (0 ok, 2 numerical failure; I/O problems
    raise ``OSError`` for the caller to map to exit code 3).
    """
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    dispatch = {
        "gppa_exact": _run_gppa,
        "gppa_inexact": _run_gppa,
        "alm": _run_alm,
        "admm": _run_admm,
        "equivalence": _run_equivalence,
        "superlinear_probe": _run_probe,
    }
    try:
        if config.kind == "rate_sweep":
            return _run_sweep(config, out_path, workers)
        return dispatch[config.kind](config, out_path)
    except NumericalError as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return EXIT_NUMERICAL


# ---------------------------------------------------------------------------
# entry point

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gppa",
        description="Generalized proximal point experiments: run, validate, "
        "sweep, and problem-file tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("config", help="path to a JSON experiment config")
        p.add_argument("--out-dir", default=".", help="artifact directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--workers", type=int, default=1,
                       help="parallel grid points for sweeps")

    add_common(sub.add_parser("run", help="execute a single-run experiment"))
    add_common(sub.add_parser("sweep", help="execute a rate_sweep experiment"))
    validate = sub.add_parser("validate", help="check a config and report all errors")
    validate.add_argument("config")

    problem = sub.add_parser("problem", help="emit or check problem files")
    problem_sub = problem.add_subparsers(dest="problem_command", required=True)
    emit = problem_sub.add_parser("emit", help="write a seeded random problem")
    emit.add_argument("path")
    emit.add_argument("--kind", choices=["qp", "separable"], default="qp")
    emit.add_argument("--seed", type=int, default=0)
    emit.add_argument("--n", type=int, default=6)
    emit.add_argument("--m", type=int, default=3)
    emit.add_argument("--lam", type=float, default=1.0)
    check = problem_sub.add_parser("check", help="validate a problem file")
    check.add_argument("path")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "problem":
        if args.problem_command == "emit":
            if args.kind == "qp":
                problem = random_qp(args.n, args.m, args.seed)
            else:
                problem = random_separable_qp(args.n, args.m, args.lam, args.seed)
            try:
                emit_problem_file(problem, args.path)
            except OSError as exc:
                print("I/O failure: %s" % exc, file=sys.stderr)
                return EXIT_IO
            print("wrote %s" % args.path)
            return EXIT_OK
        try:
            problem = load_problem_file(args.path)
        except FileNotFoundError as exc:
            print("I/O failure: %s" % exc, file=sys.stderr)
            return EXIT_IO
        except OSError as exc:
            print("I/O failure: %s" % exc, file=sys.stderr)
            return EXIT_IO
        except ProblemFormatError as exc:
            print(json.dumps({"status": "invalid", "error": str(exc)}))
            return EXIT_VALIDATION
        doc = _problem_to_doc(problem)
        print(json.dumps({"status": "ok", "kind": doc["kind"],
                          "n": doc["n"], "m": doc["m"]}))
        return EXIT_OK

    try:
        config = parse_config(args.config)
    except ConfigError as exc:
        print(json.dumps({"status": "invalid", "errors": exc.errors},
                         sort_keys=True))
        return EXIT_VALIDATION

    if args.command == "validate":
        print(json.dumps({"status": "ok", "kind": config.kind,
                          "planned_runs": config.planned_runs()},
                         sort_keys=True))
        return EXIT_OK

    if args.command == "run" and config.kind == "rate_sweep":
        print(json.dumps({"status": "invalid", "errors": [
            {"field": "kind", "message": "rate_sweep configs run via the "
             "'sweep' verb", "value": config.kind}]}))
        return EXIT_VALIDATION
    if args.command == "sweep" and config.kind != "rate_sweep":
        print(json.dumps({"status": "invalid", "errors": [
            {"field": "kind", "message": "'sweep' requires a rate_sweep "
             "config", "value": config.kind}]}))
        return EXIT_VALIDATION

    if args.seed is not None:
        if args.seed < 0:
            print(json.dumps({"status": "invalid", "errors": [
                {"field": "--seed", "message": "seed must be >= 0",
                 "value": args.seed}]}))
            return EXIT_VALIDATION
        config.seed = args.seed
    try:
        return run_experiment(config, args.out_dir, workers=args.workers)
    except OSError as exc:
        print("I/O failure: %s" % exc, file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
