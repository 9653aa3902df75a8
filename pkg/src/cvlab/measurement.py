"""Parameterized measurement-operator families and what can be computed from them.

Outcomes are indexed from 0. Each outcome ``j`` owns one or more Kraus
operators ``M[j][i]``; a singly indexed family is the case where every
outcome owns exactly one.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateOutcomeError, DimensionError, DomainError, EvaluationError, ModelError
from .expr import ParamExpr, parse
from .linalg import matrix_sqrt, partial_trace, polar_decompose
from .validation import check_density, check_square

__all__ = [
    "Dilation",
    "DisturbanceReport",
    "MeasurementFamily",
    "coarse_grain",
    "disturbance_diagnostics",
    "evaluate_family",
    "group_law_residual",
    "loglog_slope",
    "meter_post_state",
    "meter_probabilities",
    "naimark_dilate",
    "post_state",
    "povm",
    "probabilities",
    "probability",
]

COMPLETENESS_TOL = 1e-9
DEGENERATE_PROB = 1e-14


class _Table:
    """A d x d table of parameter expressions."""

    def __init__(self, rows):
        self.exprs = [[parse(x) if not isinstance(x, (int, float, complex)) or isinstance(x, bool)
                       else x for x in row] for row in rows]
        widths = {len(r) for r in self.exprs}
        if len(widths) != 1 or widths.pop() != len(self.exprs):
            raise DimensionError("operator tables must be square")

    @property
    def dim(self):
        return len(self.exprs)

    def at(self, g, where=()):
        out = np.empty((self.dim, self.dim), dtype=complex)
        for r, row in enumerate(self.exprs):
            for c, e in enumerate(row):
                if isinstance(e, ParamExpr):
                    try:
                        out[r, c] = e.eval(g)
                    except EvaluationError as exc:
                        loc = ", ".join(str(x) for x in (*where, r, c))
                        raise EvaluationError(f"entry ({loc}): {exc}") from exc
                else:
                    out[r, c] = e
        return out


def _is_table(spec):
    return (isinstance(spec, (list, tuple)) and len(spec) > 0
            and all(isinstance(row, (list, tuple)) for row in spec)
            and all(isinstance(x, (str, int, float, complex, ParamExpr)) for row in spec for x in row))


def _as_operator(spec):
    if callable(spec) and not isinstance(spec, ParamExpr):
        return spec
    if isinstance(spec, np.ndarray):
        return check_square(spec).copy()
    if _is_table(spec):
        if all(isinstance(x, (int, float, complex)) for row in spec for x in row):
            return check_square(np.array(spec, dtype=complex))
        return _Table(spec)
    raise TypeError(f"cannot interpret {type(spec).__name__} as a measurement operator")


class MeasurementFamily:
    """An ordered family of ``g``-dependent measurement operators.

    Parameters
    ----------
    outcomes : sequence
        One entry per outcome ``j``; each entry is a sequence of operators
        ``M[j][0], M[j][1], ...``. An operator may be a constant array, a
        callable ``g -> array``, or a square table of expression strings.
    dim : int, optional
        Hilbert-space dimension; inferred from the first constant operator
        or table when omitted.
    label : str
    g_range : (float, float), optional
        Closed interval of admissible ``g``.
    """

    def __init__(self, outcomes, dim=None, label="", g_range=None):
        if len(outcomes) == 0:
            raise ModelError("a family needs at least one outcome")
        self.outcomes = []
        for j, ops in enumerate(outcomes):
            if len(ops) == 0:
                raise ModelError(f"outcome {j} has no operators")
            self.outcomes.append(tuple(_as_operator(op) for op in ops))
        self.outcomes = tuple(self.outcomes)
        self.label = label
        self.g_range = None if g_range is None else (float(g_range[0]), float(g_range[1]))
        self.dim = dim if dim is not None else self._infer_dim()

    @classmethod
    def from_operators(cls, operators, **kwargs):
        """Singly indexed family, one operator per outcome."""
        return cls([[op] for op in operators], **kwargs)

    def _infer_dim(self):
        for ops in self.outcomes:
            for op in ops:
                if isinstance(op, np.ndarray):
                    return op.shape[0]
                if isinstance(op, _Table):
                    return op.dim
        raise ModelError("cannot infer dimension of a family of callables; pass dim=")

    @property
    def n_outcomes(self):
        return len(self.outcomes)

    @property
    def kraus_counts(self):
        return tuple(len(ops) for ops in self.outcomes)

    @property
    def doubly_indexed(self):
        return any(k > 1 for k in self.kraus_counts)

    def check_g(self, g):
        g = float(g)
        if not np.isfinite(g):
            raise DomainError(f"g must be finite, got {g!r}")
        if self.g_range is not None and not self.g_range[0] <= g <= self.g_range[1]:
            raise DomainError(f"g={g!r} outside the validity range {self.g_range} of {self.label or 'family'}")
        return g

    def at(self, g):
        """Nested list ``M[j][i]`` of matrices evaluated at ``g``."""
        g = self.check_g(g)
        out = []
        for j, ops in enumerate(self.outcomes):
            mats = []
            for i, op in enumerate(ops):
                if isinstance(op, np.ndarray):
                    m = op
                elif isinstance(op, _Table):
                    m = op.at(g, where=(j, i))
                else:
                    m = np.asarray(op(g), dtype=complex)
                if m.shape != (self.dim, self.dim):
                    raise DimensionError(f"operator ({j}, {i}) has shape {m.shape}, expected {(self.dim, self.dim)}")
                if not np.all(np.isfinite(m)):
                    raise DomainError(f"operator ({j}, {i}) is not finite at g={g!r}")
                mats.append(m)
            out.append(mats)
        return out

    def __repr__(self):
        return f"MeasurementFamily(label={self.label!r}, dim={self.dim}, kraus_counts={self.kraus_counts})"


def evaluate_family(fam, g):
    """Flattened list of ``M[j][i](g)`` in outcome-major order."""
    return [m for ops in fam.at(g) for m in ops]


def _effects(nested):
    return [sum(m.conj().T @ m for m in ops) for ops in nested]


def _check_complete(effects, tol=COMPLETENESS_TOL):
    d = effects[0].shape[0]
    defect = np.linalg.norm(sum(effects) - np.eye(d))
    if defect > tol:
        raise ModelError(f"family is not complete: ||sum_j E_j - I||_F = {defect:.3e}")


def povm(fam, g, tol=COMPLETENESS_TOL):
    """POVM elements ``E_j = sum_i M[j][i]^dag M[j][i]`` at ``g``.

    Raises
    ------
    ModelError
        If ``sum_j E_j`` differs from the identity by more than ``tol``
        in Frobenius norm.
    """
    effects = [0.5 * (e + e.conj().T) for e in _effects(fam.at(g))]
    _check_complete(effects, tol)
    return effects


def probabilities(fam, g, rho):
    rho = check_density(rho, fam.dim)
    p = np.array([np.trace(e @ rho).real for e in povm(fam, g)])
    return np.clip(p, 0.0, 1.0)


def probability(fam, g, j, rho):
    """``tr[E_j rho]``, clamped to ``[0, 1]``."""
    if not 0 <= j < fam.n_outcomes:
        raise IndexError(f"outcome {j} out of range for {fam.n_outcomes} outcomes")
    return float(probabilities(fam, g, rho)[j])


def _apply(ops, rho):
    return sum(m @ rho @ m.conj().T for m in ops)


def post_state(fam, g, j, rho):
    """Normalized state after outcome ``j``.

    Raises
    ------
    DegenerateOutcomeError
        If the outcome probability is at most 1e-14.
    """
    if not 0 <= j < fam.n_outcomes:
        raise IndexError(f"outcome {j} out of range for {fam.n_outcomes} outcomes")
    rho = check_density(rho, fam.dim)
    nested = fam.at(g)
    _check_complete(_effects(nested))
    out = _apply(nested[j], rho)
    p = np.trace(out).real
    if p <= DEGENERATE_PROB:
        raise DegenerateOutcomeError(f"outcome {j} has probability {p:.3e} at g={g!r}")
    out = out / p
    return 0.5 * (out + out.conj().T)


def coarse_grain(fam, g=None):
    """Replace each outcome by the single positive operator ``E_j^(1/2)``.

    With ``g`` given, the result is a constant family fixed at that ``g``;
    otherwise it is evaluated lazily at whatever ``g`` it is later asked for.
    Outcome probabilities are preserved; post-measurement states in general
    are not.
    """
    if g is not None:
        return MeasurementFamily.from_operators(
            [matrix_sqrt(e) for e in povm(fam, g)],
            dim=fam.dim, label=f"coarse({fam.label})",
        )

    def root(j):
        return lambda x: matrix_sqrt(povm(fam, x)[j])

    return MeasurementFamily.from_operators(
        [root(j) for j in range(fam.n_outcomes)],
        dim=fam.dim, label=f"coarse({fam.label})", g_range=fam.g_range,
    )


@dataclass(frozen=True)
class Dilation:
    """Isometric embedding of a system into system (x) meter.

    ``isometry`` has shape ``(d * meter_dim, d)`` in Kronecker order
    system (x) meter; ``projectors[j]`` is ``I (x) Q_j``.
    """

    isometry: np.ndarray
    projectors: tuple
    dim: int
    meter_dim: int


def naimark_dilate(operators, tol=COMPLETENESS_TOL):
    """Dilate a complete set of measurement operators to a projective meter measurement.

    Parameters
    ----------
    operators : sequence
        Either matrices ``M_j`` or, for a doubly indexed family, sequences
        of matrices ``[M_j1, M_j2, ...]``. Each ``(j, i)`` pair gets its
        own meter basis vector; ``Q_j`` projects onto all of outcome ``j``'s.
    """
    nested = []
    for op in operators:
        arr = np.asarray(op, dtype=complex) if not isinstance(op, (list, tuple)) else None
        if arr is not None and arr.ndim == 2:
            nested.append([check_square(arr)])
        else:
            nested.append([check_square(m) for m in op])
    d = nested[0][0].shape[0]
    if any(m.shape != (d, d) for ops in nested for m in ops):
        raise DimensionError("all measurement operators must share one dimension")
    _check_complete(_effects(nested), tol)
    n = sum(len(ops) for ops in nested)
    v = np.zeros((d * n, d), dtype=complex)
    projs = []
    slot = 0
    for ops in nested:
        q = np.zeros((n, n), dtype=complex)
        for m in ops:
            e = np.zeros((n, 1))
            e[slot] = 1.0
            v += np.kron(m, e)
            q[slot, slot] = 1.0
            slot += 1
        projs.append(np.kron(np.eye(d), q))
    return Dilation(v, tuple(projs), d, n)


def meter_probabilities(dil, rho):
    rho = check_density(rho, dil.dim)
    big = dil.isometry @ rho @ dil.isometry.conj().T
    return np.array([np.trace(q @ big).real for q in dil.projectors])


def meter_post_state(dil, rho, j):
    """Unnormalized ``tr_meter[Q_j V rho V^dag Q_j]``."""
    rho = check_density(rho, dil.dim)
    q = dil.projectors[j]
    big = q @ dil.isometry @ rho @ dil.isometry.conj().T @ q
    return partial_trace(big, [dil.dim, dil.meter_dim], keep=0)


def loglog_slope(gs, values, floor=1e-14):
    """Least-squares slope of ``log(values)`` against ``log(gs)``.

    Returns ``(slope, rms_residual)``; ``(nan, nan)`` when fewer than two
    values exceed ``floor``.
    """
    gs = np.asarray(gs, dtype=float)
    vals = np.abs(np.asarray(values, dtype=float))
    ok = np.isfinite(vals) & (vals > floor) & (gs > 0)
    if ok.sum() < 2:
        return float("nan"), float("nan")
    x, y = np.log(gs[ok]), np.log(vals[ok])
    slope, icpt = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    return float(slope), resid


def group_law_residual(fam, j, g1, g2, i=0):
    """``||U(g1 + g2) - U(g1) U(g2)||_F`` for the unitary polar part ``U`` of ``M[j][i]``."""
    def unitary(g):
        return polar_decompose(fam.at(g)[j][i]).unitary

    return float(np.linalg.norm(unitary(g1 + g2) - unitary(g1) @ unitary(g2)))


@dataclass
class DisturbanceReport:
    """Per-``g`` disturbance metrics and their fitted leading order in ``g``."""

    grid: list
    metrics: dict
    slopes: dict
    notes: list = field(default_factory=list)

    @property
    def certified_weak(self):
        vals = self.metrics.get("state_disturbance", [])
        if vals and max(vals) <= 1e-12:
            return True
        s = self.slopes.get("state_disturbance", float("nan"))
        return bool(np.isfinite(s) and s > 0)

    def rows(self):
        """``(g, metric, value)`` triples in grid-major, metric-name order."""
        out = []
        for k, g in enumerate(self.grid):
            for name in self.metrics:
                out.append((g, name, self.metrics[name][k]))
        return out


def disturbance_diagnostics(fam, rho, g_grid):
    """Disturbance of ``rho`` by ``fam`` across ``g_grid``.

    Metrics, each a list aligned with the grid:

    ``state_disturbance``
        ``max_j ||post_state_j - rho||_F`` over non-degenerate outcomes.
    ``aggregate_disturbance``
        ``||sum_{j,i} M rho M^dag - rho||_F``.
    ``kraus_disturbance``
        ``max_{j,i} ||M rho M^dag / tr[...] - rho||_F``.
    ``unitary_commutator[j,i]``
        ``||[U_ji(g), rho]||_F`` for the unitary polar part of each operator.
    ``group_residual[j,i]``
        ``||U_ji(2g) - U_ji(g)^2||_F``, or nan where ``2g`` is out of range.
    """
    rho = check_density(rho, fam.dim)
    grid = [fam.check_g(g) for g in g_grid]
    labels = [(j, i) for j, ops in enumerate(fam.outcomes) for i in range(len(ops))]
    metrics = {"state_disturbance": [], "aggregate_disturbance": [], "kraus_disturbance": []}
    for j, i in labels:
        metrics[f"unitary_commutator[{j + 1},{i + 1}]"] = []
    for j, i in labels:
        metrics[f"group_residual[{j + 1},{i + 1}]"] = []
    notes = []
    for g in grid:
        nested = fam.at(g)
        _check_complete(_effects(nested))
        worst = 0.0
        for j, ops in enumerate(nested):
            out = _apply(ops, rho)
            p = np.trace(out).real
            if p <= DEGENERATE_PROB:
                notes.append(f"g={g!r}: outcome {j + 1} skipped (probability {p:.1e})")
                continue
            worst = max(worst, np.linalg.norm(out / p - rho))
        metrics["state_disturbance"].append(float(worst))
        agg = sum(_apply(ops, rho) for ops in nested)
        metrics["aggregate_disturbance"].append(float(np.linalg.norm(agg - rho)))
        kraus_worst = 0.0
        for j, i in labels:
            m = nested[j][i]
            out = m @ rho @ m.conj().T
            p = np.trace(out).real
            if p > DEGENERATE_PROB:
                kraus_worst = max(kraus_worst, np.linalg.norm(out / p - rho))
            u = polar_decompose(m).unitary
            metrics[f"unitary_commutator[{j + 1},{i + 1}]"].append(float(np.linalg.norm(u @ rho - rho @ u)))
            try:
                res = group_law_residual(fam, j, g, g, i)
            except DomainError:
                res = float("nan")
            metrics[f"group_residual[{j + 1},{i + 1}]"].append(res)
        metrics["kraus_disturbance"].append(float(kraus_worst))
    slopes = {name: loglog_slope(grid, vals)[0] for name, vals in metrics.items()}
    return DisturbanceReport(grid, metrics, slopes, notes)
