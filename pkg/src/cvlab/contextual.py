"""Contextual values: real weights ``alpha`` with ``sum_j alpha_j E_j = A``.

Hermitian matrices are mapped to real vectors by an isometry (diagonal
entries, then ``sqrt(2) Re`` and ``sqrt(2) Im`` of the upper triangle), so
the Euclidean norm of ``alpha`` minimized by the pseudoinverse does not
depend on the choice of basis.
"""

import math
import re
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import DimensionError, DomainError, EvaluationError, ScenarioError
from .expr import parse
from .linalg import pseudoinverse
from .measurement import loglog_slope, povm
from .validation import check_density, check_hermitian

__all__ = [
    "ContextualValueEstimator",
    "CvFamily",
    "CvSolution",
    "DivergenceFit",
    "cv_family",
    "divergence_order",
    "hermitian_vec",
    "log_grid",
    "parse_pin_spec",
    "solve_cv",
]

SOLVABLE_RTOL = 1e-8
NON_POWER_LAW_RMS = 0.05


def hermitian_vec(h):
    """Real coordinates of a Hermitian matrix in an orthonormal basis."""
    h = np.asarray(h, dtype=complex)
    iu = np.triu_indices(h.shape[0], k=1)
    off = h[iu]
    return np.concatenate([np.diag(h).real, math.sqrt(2) * off.real, math.sqrt(2) * off.imag])


def _tolerance(alphas, a_norm):
    amax = float(np.max(np.abs(alphas))) if len(alphas) else 0.0
    return SOLVABLE_RTOL * (1.0 + amax) * max(1.0, a_norm)


@dataclass(frozen=True)
class CvSolution:
    alphas: np.ndarray
    residual: float
    solvable: bool
    pinned: tuple = ()

    def average(self, effects, rho):
        """``sum_j alpha_j tr[E_j rho]``."""
        return float(sum(a * np.trace(e @ rho).real for a, e in zip(self.alphas, effects)))


def solve_cv(a, effects, pinned=None):
    """Solve ``sum_j alpha_j E_j = a`` for real ``alpha``.

    Parameters
    ----------
    a : array_like
        Hermitian observable.
    effects : sequence of array_like
        Hermitian POVM elements (or any Hermitian operators) of the same size.
    pinned : sequence of (int, float), optional
        ``(index, value)`` pairs fixing some ``alpha_j``; the remaining ones
        are the minimum-norm least-squares solution of the reduced system.

    Returns
    -------
    CvSolution
        ``residual`` is ``||sum_j alpha_j E_j - a||_F``; ``solvable`` holds when
        it is at most ``1e-8 (1 + max|alpha|) max(1, ||a||_F)``.
    """
    a = check_hermitian(a, "observable")
    effects = [check_hermitian(e, f"effect {j}") for j, e in enumerate(effects)]
    if not effects:
        raise DimensionError("need at least one effect")
    for j, e in enumerate(effects):
        if e.shape != a.shape:
            raise DimensionError(f"effect {j} has shape {e.shape}, observable has {a.shape}")
    n = len(effects)
    pins = {}
    for idx, val in pinned or ():
        idx = int(idx)
        if not 0 <= idx < n:
            raise IndexError(f"pinned index {idx} out of range for {n} effects")
        val = complex(val)
        if abs(val.imag) > 0:
            raise DomainError(f"pinned value for alpha[{idx}] must be real")
        pins[idx] = val.real
    cols = np.column_stack([hermitian_vec(e) for e in effects])
    target = hermitian_vec(a)
    alphas = np.zeros(n)
    for idx, val in pins.items():
        alphas[idx] = val
        target = target - val * cols[:, idx]
    free = [j for j in range(n) if j not in pins]
    if free:
        sol = pseudoinverse(cols[:, free]) @ target
        alphas[free] = sol.real
    resid = float(np.linalg.norm(sum(al * e for al, e in zip(alphas, effects)) - a))
    a_norm = float(np.linalg.norm(a))
    return CvSolution(alphas, resid, resid <= _tolerance(alphas, a_norm), tuple(sorted(pins.items())))


_PIN = re.compile(r"^\s*(?:alpha)?\s*_?(\d+)\s*=\s*(.+?)\s*$")


def parse_pin_spec(spec):
    """Parse pins such as ``"alpha1=1/g^2"`` or ``["1=1/g^2", "3=0"]``.

    Indices in the text form are 1-based; the result uses 0-based indices:
    ``[(0, ParamExpr('1/g^2'))]``.
    """
    if isinstance(spec, str):
        body = spec.strip()
        if body.startswith("pinned:"):
            body = body[len("pinned:"):].strip()
        if body.startswith("[") and body.endswith("]"):
            body = body[1:-1]
        items = [s for s in body.split(",") if s.strip()]
    elif isinstance(spec, dict):
        items = [f"{k}={v}" for k, v in spec.items()]
    else:
        items = list(spec)
    out = []
    for item in items:
        if isinstance(item, tuple):
            out.append((int(item[0]), parse(item[1])))
            continue
        m = _PIN.match(item)
        if m is None:
            raise ScenarioError(f"malformed pin {item!r}; expected e.g. 'alpha1=1/g^2'")
        idx = int(m.group(1))
        if idx < 1:
            raise ScenarioError(f"pin indices are 1-based, got {idx}")
        out.append((idx - 1, parse(m.group(2))))
    return out


class CvFamily:
    """Contextual values as a function of ``g`` for one family and observable.

    Exactly one source of values is used: closed-form ``alpha_exprs``,
    pinned solves (``pins`` as ``(index, expression)`` pairs), or the
    minimum-norm solve when neither is given. ``samples`` maps each ``g``
    computed through :func:`cv_family` to its :class:`CvSolution`.
    """

    def __init__(self, family, observable, alpha_exprs=None, pins=None):
        self.family = family
        self.observable = check_hermitian(observable, "observable")
        if self.observable.shape[0] != family.dim:
            raise DimensionError("observable and family dimensions differ")
        if alpha_exprs is not None and pins:
            raise ValueError("give either alpha_exprs or pins, not both")
        self.alpha_exprs = None if alpha_exprs is None else tuple(parse(e) for e in alpha_exprs)
        if self.alpha_exprs is not None and len(self.alpha_exprs) != family.n_outcomes:
            raise DimensionError(
                f"{len(self.alpha_exprs)} contextual values for {family.n_outcomes} outcomes")
        self.pins = tuple((int(i), parse(e)) for i, e in (pins or ()))
        self.samples = {}

    @property
    def mode(self):
        if self.alpha_exprs is not None:
            return "exprs"
        return "pinned" if self.pins else "min-norm"

    def at(self, g):
        effects = povm(self.family, g)
        if self.alpha_exprs is not None:
            vals = np.array([e.eval(g) for e in self.alpha_exprs])
            if np.max(np.abs(vals.imag)) > 0:
                raise EvaluationError(f"contextual values are not real at g={g!r}")
            alphas = vals.real
            resid = float(np.linalg.norm(sum(al * e for al, e in zip(alphas, effects)) - self.observable))
            ok = resid <= _tolerance(alphas, float(np.linalg.norm(self.observable)))
            return CvSolution(alphas, resid, ok)
        pinned = [(i, e.eval(g)) for i, e in self.pins]
        return solve_cv(self.observable, effects, pinned or None)

    def alphas(self, g):
        return self.at(g).alphas

    def csv_header(self):
        n = self.family.n_outcomes
        return ["g"] + [f"alpha_{j + 1}" for j in range(n)] + ["residual", "solvable"]

    def csv_rows(self):
        for g in sorted(self.samples):
            sol = self.samples[g]
            yield [g, *sol.alphas, sol.residual, sol.solvable]


def cv_family(fam, a, g_grid, pin_spec=None, alpha_exprs=None):
    """Contextual values of ``fam`` for ``a`` sampled over ``g_grid``.

    Points where the system has no solution are kept with
    ``solvable=False`` rather than raising.
    """
    pins = parse_pin_spec(pin_spec) if pin_spec is not None else None
    cvf = CvFamily(fam, a, alpha_exprs=alpha_exprs, pins=pins)
    for g in g_grid:
        cvf.samples[float(g)] = cvf.at(g)
    return cvf


def log_grid(g_max, decades=1.0, per_decade=8):
    """Descending geometric grid from ``g_max`` over ``decades`` decades."""
    n = int(math.ceil(per_decade * decades)) + 1
    return list(g_max * np.logspace(0.0, -decades, n))


@dataclass(frozen=True)
class DivergenceFit:
    """``|alpha_j(g)| ~ c / g**exponent`` fitted on a log-log scale."""

    exponent: float
    rms_residual: float
    flagged: bool = field(default=False)


def divergence_order(cvf, g_grid):
    """Fit the power with which each contextual value diverges as ``g -> 0``.

    The grid must span at least one decade with at least eight points per
    decade. A fit whose RMS log residual exceeds 0.05 is ``flagged``.
    """
    gs = np.sort(np.asarray([float(g) for g in g_grid]))
    if gs.size < 2 or gs[0] <= 0:
        raise DomainError("divergence_order needs a grid of positive g values")
    decades = math.log10(gs[-1] / gs[0])
    if decades < 1.0 - 1e-12:
        raise DomainError(f"grid spans {decades:.2f} decades; at least one is required")
    if gs.size < math.ceil(8 * decades - 1e-9):
        raise DomainError(f"grid has {gs.size} points; need 8 per decade over {decades:.2f} decades")
    table = np.array([cvf.alphas(g) for g in gs])
    fits = []
    for j in range(table.shape[1]):
        col = np.abs(table[:, j])
        if np.all(col <= 1e-300):
            fits.append(DivergenceFit(0.0, 0.0, False))
            continue
        slope, rms = loglog_slope(gs, col, floor=0.0)
        fits.append(DivergenceFit(-slope, rms, bool(rms > NON_POWER_LAW_RMS)))
    return fits


class ContextualValueEstimator(BaseEstimator):
    """Estimator-style front end to :func:`solve_cv`.

    ``fit(effects, observable)`` solves for the contextual values;
    ``predict(states)`` returns the unconditioned averages
    ``sum_j alpha_j tr[E_j rho]`` for each state.

    Parameters
    ----------
    pinned : sequence of (int, float), optional
        Passed through to :func:`solve_cv`.
    """

    def __init__(self, pinned=None):
        self.pinned = pinned

    def fit(self, X, y):
        sol = solve_cv(y, X, self.pinned)
        self.effects_ = [check_hermitian(e) for e in X]
        self.alphas_ = sol.alphas
        self.residual_ = sol.residual
        self.solvable_ = sol.solvable
        self.solution_ = sol
        return self

    def predict(self, X):
        check_is_fitted(self, "alphas_")
        d = self.effects_[0].shape[0]
        states = np.asarray(X, dtype=complex)
        if states.ndim == 2:
            states = states[None]
        return np.array([self.solution_.average(self.effects_, check_density(r, d)) for r in states])
