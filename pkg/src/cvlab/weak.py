"""Postselected conditioned averages, weak values and their ``g -> 0`` limits."""

from dataclasses import dataclass, field

import numpy as np

from .contextual import CvFamily
from .exceptions import CvlabError, DegeneratePostselectionError, DomainError, ModelError
from .expr import parse
from .families import P0, PRYDE_ALPHAS, THREE_OUTCOME_ALPHAS, pryde_family, three_outcome_family, twisted_family
from .measurement import disturbance_diagnostics
from .validation import as_projector, check_density, check_hermitian, check_vector

__all__ = [
    "ConditionedAverageBreakdown",
    "LimitEstimate",
    "LimitMismatchError",
    "conditioned_average",
    "counterexample_sec9",
    "counterexample_sec12",
    "extrapolate_limit",
    "richardson_table",
    "traditional_weak_value",
    "twist_gap_closed_form",
    "three_outcome_gap_closed_form",
    "weak_limit",
    "weak_value_generalized",
]

DEGENERATE_PROB = 1e-14
G0 = 0.1
G_FLOOR = 1e-5
MAX_DEPTH = 14

PRYDE_ALPHAS_EXPR = tuple(parse(t) for t in PRYDE_ALPHAS)
THREE_OUTCOME_ALPHAS_EXPR = tuple(parse(t) for t in THREE_OUTCOME_ALPHAS)


class LimitMismatchError(CvlabError, AssertionError):
    """An extrapolated limit disagrees with its closed form."""


@dataclass(frozen=True)
class ConditionedAverageBreakdown:
    """Conditioned average at one ``g`` with its numerator split in two.

    ``anticommutator_part`` collects ``(1/2) alpha_j tr[P {M M^dag, rho}]`` and
    ``commutator_part`` collects
    ``(1/2) alpha_j tr[P ([M, rho] M^dag + M [rho, M^dag])]``; the two add up to
    the numerator exactly. ``double_commutator_part`` is the same commutator
    term written as ``-(1/2) alpha_j tr[P [M, [M, rho]]]``, available only when
    every operator is Hermitian.
    """

    g: float
    total: float
    numerator: float
    denominator: float
    anticommutator_part: float
    commutator_part: float
    double_commutator_part: float = None


def _alphas_at(cv, g):
    if isinstance(cv, CvFamily):
        return np.asarray(cv.alphas(g), dtype=float)
    if callable(cv):
        return np.asarray(cv(g), dtype=float)
    vals = []
    for a in cv:
        if isinstance(a, str):
            a = parse(a)
        vals.append(complex(a.eval(g)).real if hasattr(a, "eval") else float(a))
    return np.asarray(vals)


def conditioned_average(fam, cvf, rho, post, g):
    """Contextual-value average of outcomes postselected onto ``post``.

    ``total = sum_j alpha_j tr[P M_j rho M_j^dag] / sum_j tr[P M_j rho M_j^dag]``
    with every ``M`` and ``alpha`` evaluated at the same ``g``. ``rho`` need
    not be normalized.

    Parameters
    ----------
    fam : MeasurementFamily
    cvf : CvFamily, callable or sequence
        Contextual values: a :class:`CvFamily`, a callable ``g -> alphas``,
        or a sequence of numbers / expressions.
    rho : array_like
    post : array_like
        Unit vector ``f`` or projector ``P_f``.
    g : float

    Raises
    ------
    DegeneratePostselectionError
        If the denominator is at most 1e-14.
    """
    rho = check_density(rho, fam.dim, normalized=False)
    proj = as_projector(post, fam.dim)
    nested = fam.at(g)
    alphas = _alphas_at(cvf, g)
    if len(alphas) != len(nested):
        raise DomainError(f"{len(alphas)} contextual values for {len(nested)} outcomes")
    hermitian = all(np.allclose(m, m.conj().T, rtol=0, atol=1e-14) for ops in nested for m in ops)
    num = den = anti = comm = dcomm = 0.0
    for alpha, ops in zip(alphas, nested):
        for m in ops:
            md = m.conj().T
            w = np.trace(proj @ m @ rho @ md).real
            mmd = m @ md
            a_term = 0.5 * np.trace(proj @ (mmd @ rho + rho @ mmd)).real
            c_term = 0.5 * np.trace(proj @ ((m @ rho - rho @ m) @ md + m @ (rho @ md - md @ rho))).real
            num += alpha * w
            den += w
            anti += alpha * a_term
            comm += alpha * c_term
            if hermitian:
                inner = m @ rho - rho @ m
                dcomm += -0.5 * alpha * np.trace(proj @ (m @ inner - inner @ m)).real
    if den <= DEGENERATE_PROB:
        raise DegeneratePostselectionError(f"postselection probability {den:.3e} at g={g!r}")
    return ConditionedAverageBreakdown(
        float(g), float(num / den), float(num), float(den), float(anti), float(comm),
        float(dcomm) if hermitian else None,
    )


def weak_value_generalized(a, rho, post):
    """``tr[P {A, rho}] / (2 tr[P rho])``; reduces to the traditional weak value for pure states."""
    a = check_hermitian(a, "observable")
    rho = check_density(rho, a.shape[0], normalized=False)
    proj = as_projector(post, a.shape[0])
    den = np.trace(proj @ rho).real
    if den <= DEGENERATE_PROB:
        raise DegeneratePostselectionError(f"postselection overlap tr[P rho] = {den:.3e}")
    return float(np.trace(proj @ (a @ rho + rho @ a)).real / (2.0 * den))


def traditional_weak_value(a, psi_i, psi_f):
    """``Re <psi_f|A psi_i> / <psi_f|psi_i>`` for normalized copies of the states."""
    a = check_hermitian(a, "observable")
    psi_i = check_vector(psi_i, "psi_i")
    psi_f = check_vector(psi_f, "psi_f")
    psi_i = psi_i / np.linalg.norm(psi_i)
    psi_f = psi_f / np.linalg.norm(psi_f)
    overlap = np.vdot(psi_f, psi_i)
    if abs(overlap) <= DEGENERATE_PROB:
        raise DegeneratePostselectionError("pre- and postselected states are orthogonal")
    return float((np.vdot(psi_f, a @ psi_i) / overlap).real)


@dataclass
class LimitEstimate:
    """Extrapolated ``g -> 0`` value of a scalar function of ``g``.

    ``samples`` are ``(g, f(g))`` in the order evaluated and ``extrapolants``
    the diagonal of the Richardson table aligned with them. ``error_estimate``
    is the difference between the last two extrapolants used.
    """

    value: float
    error_estimate: float
    samples: list
    converged: bool
    extrapolants: list = field(default_factory=list)
    breakdowns: list = field(default_factory=list)
    denominator: "LimitEstimate" = None

    def csv_header(self):
        return ["g", "conditioned_average", "numerator", "denominator",
                "anticommutator_part", "commutator_part", "extrapolant"]

    def csv_rows(self):
        for k, (g, val) in enumerate(self.samples):
            ext = self.extrapolants[k]
            if k < len(self.breakdowns):
                b = self.breakdowns[k]
                yield [g, b.total, b.numerator, b.denominator, b.anticommutator_part, b.commutator_part, ext]
            else:
                yield [g, val, "", "", "", "", ext]


def richardson_table(values, ratio=0.5):
    """Richardson table for samples at ``g_k = g_0 * ratio**k``.

    Assumes ``f(g) = f(0) + c_1 g + c_2 g^2 + ...``; row ``k`` holds the
    extrapolants using samples ``0..k``.
    """
    table = []
    for k, v in enumerate(values):
        row = [float(v)]
        for m in range(1, k + 1):
            r = ratio**m
            row.append((row[m - 1] - r * table[k - 1][m - 1]) / (1.0 - r))
        table.append(row)
    return table


def extrapolate_limit(func, g0=G0, ratio=0.5, max_depth=MAX_DEPTH, floor=G_FLOOR, tol=1e-9):
    """Richardson-extrapolate ``lim_{g->0} func(g)`` on a geometric grid.

    Samples are taken at ``g0 * ratio**k`` for ``k < max_depth`` while
    ``g >= floor``; the process stops as soon as consecutive diagonal
    extrapolants agree to ``tol``. Otherwise the pair with the smallest
    disagreement is reported with ``converged=False``.
    """
    if not 0 < ratio < 1:
        raise DomainError("ratio must lie in (0, 1)")
    samples, values, diag = [], [], []
    table = []
    best = None
    for k in range(max_depth):
        g = g0 * ratio**k
        if g < floor:
            break
        v = func(g)
        samples.append((g, float(v)))
        values.append(v)
        table = richardson_table(values, ratio)
        diag.append(table[-1][-1])
        if k == 0:
            continue
        diff = abs(diag[-1] - diag[-2])
        if best is None or diff < best[1]:
            best = (k, diff)
        if diff < tol:
            return LimitEstimate(diag[-1], diff, samples, True, diag)
    if best is None:
        return LimitEstimate(diag[-1] if diag else float("nan"), float("inf"), samples, False, diag)
    k, diff = best
    return LimitEstimate(diag[k], diff, samples, False, diag)


def weak_limit(fam, cvf, rho, post, g0=G0, ratio=0.5, max_depth=MAX_DEPTH, floor=G_FLOOR, tol=1e-9,
               denominator_tol=1e-6, certify=True):
    """Extrapolated ``g -> 0`` limit of :func:`conditioned_average`.

    The denominator is extrapolated separately and must approach
    ``tr[P rho]`` to within ``denominator_tol``; when ``certify`` is set the
    family must also leave ``rho`` asymptotically undisturbed over the decade
    below ``g0``.

    Raises
    ------
    ModelError
        If the family is not weak for ``rho`` or the denominator limit is off.
    """
    rho = check_density(rho, fam.dim, normalized=False)
    if certify:
        grid = list(g0 * np.logspace(0, -1, 9))
        report = disturbance_diagnostics(fam, rho / np.trace(rho).real, grid)
        if not report.certified_weak:
            raise ModelError(f"family {fam.label!r} is not weak for this state "
                             f"(disturbance slope {report.slopes['state_disturbance']:.3g})")
    cache = {}

    def breakdown(g):
        if g not in cache:
            cache[g] = conditioned_average(fam, cvf, rho, post, g)
        return cache[g]

    est = extrapolate_limit(lambda g: breakdown(g).total, g0, ratio, max_depth, floor, tol)
    est.breakdowns = [cache[g] for g, _ in est.samples]
    # the denominator may need more samples than the average itself
    est.denominator = extrapolate_limit(lambda g: breakdown(g).denominator, g0, ratio, max_depth, floor, tol)
    expected = np.trace(as_projector(post, fam.dim) @ rho).real
    if abs(est.denominator.value - expected) > denominator_tol:
        raise ModelError(f"denominator limit {est.denominator.value:.12g} differs from tr[P rho] = {expected:.12g}")
    return est


def twist_gap_closed_form(h, rho, post):
    """Limit of the twisted-minus-plain conditioned average.

    ``tr([P, iH] rho) / (2 tr[P rho])``. The factor 1/2 is
    ``M_+(0) rho M_+(0) = rho / 2``, which survives the ``1/g`` contextual value.
    """
    h = check_hermitian(h, "h")
    rho = check_density(rho, h.shape[0], normalized=False)
    proj = as_projector(post, h.shape[0])
    den = np.trace(proj @ rho).real
    if den <= DEGENERATE_PROB:
        raise DegeneratePostselectionError(f"postselection overlap tr[P rho] = {den:.3e}")
    ih = 1j * h
    return float(np.trace((proj @ ih - ih @ proj) @ rho).real / (2.0 * den))


def counterexample_sec9(h, rho, post, g0=G0, tol=1e-9, check_tol=1e-5):
    """Twist the first operator of the ``+-1/g`` qubit family by ``exp(i g H)``.

    Returns ``(delta, delta_closed)`` where ``delta`` extrapolates the
    difference between the twisted and untwisted conditioned averages.

    Raises
    ------
    DomainError
        If ``h`` is a multiple of the identity (the difference vanishes identically).
    LimitMismatchError
        If the extrapolated and closed-form values differ by more than ``check_tol``.
    """
    h = check_hermitian(h, "h")
    if h.shape != (2, 2):
        raise DomainError("the twist operator must be 2 x 2")
    if np.linalg.norm(h - np.trace(h).real / 2 * np.eye(2)) <= 1e-12 * max(1.0, np.linalg.norm(h)):
        raise DomainError("H is a multiple of the identity; the twist commutes with every projector")
    rho = check_density(rho, 2, normalized=False)
    plain, twisted = pryde_family(), twisted_family(h)
    closed = twist_gap_closed_form(h, rho, post)

    def delta(g):
        a = conditioned_average(twisted, PRYDE_ALPHAS_EXPR, rho, post, g).total
        b = conditioned_average(plain, PRYDE_ALPHAS_EXPR, rho, post, g).total
        return a - b

    est = extrapolate_limit(delta, g0=g0, tol=tol)
    if abs(est.value - closed) > check_tol:
        raise LimitMismatchError(f"twist gap: extrapolated {est.value:.10g} vs closed form {closed:.10g}")
    return est, closed


def three_outcome_gap_closed_form(rho, f):
    """``-8 Re(conj(f2) f1 rho21) / (|f1|^2 rho11 + 2 Re(conj(f2) f1 rho21) + |f2|^2 rho22)``."""
    rho = np.asarray(rho, dtype=complex)
    f = check_vector(f, "f")
    cross = (np.conj(f[1]) * f[0] * rho[1, 0]).real
    den = abs(f[0]) ** 2 * rho[0, 0].real + 2 * cross + abs(f[1]) ** 2 * rho[1, 1].real
    if den <= DEGENERATE_PROB:
        raise DegeneratePostselectionError(f"postselection overlap {den:.3e}")
    return float(-8.0 * cross / den)


def counterexample_sec12(rho, post, g0=G0, tol=1e-9, check_tol=1e-5):
    """Weak limit for the three positive diagonal operators with ``1/g^2`` contextual values.

    Returns ``(limit, eq7, gap_closed)``: the extrapolated weak limit of the
    conditioned average of ``diag(1, 0)``, the generalized weak value, and the
    closed-form difference between the two.

    Raises
    ------
    LimitMismatchError
        If ``|limit - (eq7 + gap_closed)| > check_tol``.
    """
    rho = check_density(rho, 2, normalized=False)
    f = _postselection_vector(post)
    fam = three_outcome_family()
    limit = weak_limit(fam, THREE_OUTCOME_ALPHAS_EXPR, rho, f, g0=g0, tol=tol)
    eq7 = weak_value_generalized(P0, rho, f)
    gap = three_outcome_gap_closed_form(rho, f)
    if abs(limit.value - (eq7 + gap)) > check_tol:
        raise LimitMismatchError(f"weak limit {limit.value:.10g} vs closed form {eq7 + gap:.10g}")
    return limit, eq7, gap


def _postselection_vector(post):
    arr = np.asarray(post, dtype=complex)
    if arr.ndim == 2 and arr.shape[0] == arr.shape[1] and arr.shape[0] > 1:
        proj = as_projector(arr)
        w, v = np.linalg.eigh(proj)
        if not np.isclose(w.sum(), 1.0):
            raise DomainError("postselection projector must have rank one")
        return v[:, -1]
    return check_vector(arr, "f", normalized=True)

