"""Ready-made measurement families and contextual values used throughout cvlab.

``pryde_*``
    Two diagonal qubit operators with entries ``sqrt((1 +- g)/2)`` measuring
    ``Z = diag(1, -1)`` with contextual values ``+-1/g``.
``twisted_*``
    The same family with the first operator rotated by ``exp(i g H)``.
``three_outcome_*``
    Positive diagonal operators ``diag(1/2 + g, 1/2 - g)``,
    ``diag(1/2 - g, 1/2 + g)`` and the identity-proportional completion,
    measuring ``diag(1, 0)`` with contextual values of order ``1/g^2``.
"""

import numpy as np

from .expr import parse
from .linalg import expm_hermitian, matrix_sqrt, spectral_decompose
from .measurement import MeasurementFamily
from .validation import check_hermitian

LAMBDA = "sqrt((1+g)/2)"
MU = "sqrt((1-g)/2)"

PRYDE_ALPHAS = ("1/g", "-1/g")
THREE_OUTCOME_ALPHAS = ("1/g^2", "1/g^2-1/(2*g)", "-(4*g^3-12*g^2+g-4)/(4*g^2*(4*g^2-1))")
THREE_OUTCOME_PIN = "1/g^2"

Z = np.diag([1.0, -1.0]).astype(complex)
P0 = np.diag([1.0, 0.0]).astype(complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)


def pryde_family():
    return MeasurementFamily.from_operators(
        [[[LAMBDA, "0"], ["0", MU]], [[MU, "0"], ["0", LAMBDA]]],
        label="pryde", g_range=(-1.0, 1.0),
    )


def _pryde_plus(g):
    return np.diag([np.sqrt((1 + g) / 2), np.sqrt((1 - g) / 2)]).astype(complex)


def _pryde_minus(g):
    return np.diag([np.sqrt((1 - g) / 2), np.sqrt((1 + g) / 2)]).astype(complex)


def twisted_family(h=X, twist=None):
    """Pryde family with ``M_1(g) = U(g) M_+(g)``.

    ``U(g)`` defaults to ``exp(i g h)``; pass ``twist`` (a callable
    ``g -> unitary``) to use a different rotation.
    """
    h = check_hermitian(h, "h")
    if twist is None:
        def twist(g):
            return expm_hermitian(h, g)

    return MeasurementFamily.from_operators(
        [lambda g: twist(g) @ _pryde_plus(g), _pryde_minus],
        dim=2, label="twisted", g_range=(-1.0, 1.0),
    )


def three_outcome_family():
    """Three positive diagonal operators; the third is fixed by completeness."""

    def m1(g):
        return np.diag([0.5 + g, 0.5 - g]).astype(complex)

    def m2(g):
        return np.diag([0.5 - g, 0.5 + g]).astype(complex)

    def m3(g):
        return matrix_sqrt(np.eye(2) - m1(g) @ m1(g) - m2(g) @ m2(g))

    return MeasurementFamily.from_operators([m1, m2, m3], dim=2, label="three-outcome", g_range=(-0.5, 0.5))


def three_outcome_table_family():
    """Same operators as :func:`three_outcome_family`, written as expression tables."""
    return MeasurementFamily.from_operators(
        [
            [["1/2+g", "0"], ["0", "1/2-g"]],
            [["1/2-g", "0"], ["0", "1/2+g"]],
            [["sqrt(1/2-2*g^2)", "0"], ["0", "sqrt(1/2-2*g^2)"]],
        ],
        label="three-outcome", g_range=(-0.5, 0.5),
    )


def projective_family(observable):
    """Spectral projectors of ``observable`` as a ``g``-independent family."""
    spec = spectral_decompose(observable)
    return MeasurementFamily.from_operators(list(spec.projectors), label="projective"), spec.eigenvalues


def alpha_exprs(texts):
    return tuple(parse(t) for t in texts)
