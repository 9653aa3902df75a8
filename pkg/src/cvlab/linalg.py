"""Small dense complex linear algebra.

Matrices are plain ``numpy`` complex arrays. Everything here is written for
dimensions up to about 16 and favours exactness of the returned structure
(merged degenerate eigenspaces, exact Penrose conditions) over speed.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, DomainError
from .validation import check_hermitian, check_matrix, check_same_shape, check_square

__all__ = [
    "PolarDecomposition",
    "SpectralDecomposition",
    "adjoint",
    "anticommutator",
    "commutator",
    "expm_hermitian",
    "matmul",
    "matrix_sqrt",
    "partial_trace",
    "polar_decompose",
    "pseudoinverse",
    "spectral_decompose",
    "trace",
]

DEGENERACY_RTOL = 1e-9
PINV_RCOND = 1e-12
PSD_RTOL = 1e-10


@dataclass(frozen=True)
class SpectralDecomposition:
    """Distinct eigenvalues (ascending) and their orthogonal projectors."""

    eigenvalues: tuple
    projectors: tuple

    def reconstruct(self):
        return sum(a * p for a, p in zip(self.eigenvalues, self.projectors))


@dataclass(frozen=True)
class PolarDecomposition:
    """``m = unitary @ positive`` with ``positive = (m^dag m)^(1/2)``."""

    unitary: np.ndarray
    positive: np.ndarray


def matmul(*ms):
    """Chain product of conformable matrices."""
    if not ms:
        raise DimensionError("matmul needs at least one operand")
    out = check_matrix(ms[0])
    for k, m in enumerate(ms[1:], start=1):
        m = check_matrix(m)
        if out.shape[1] != m.shape[0]:
            raise DimensionError(f"cannot multiply {out.shape} by {m.shape} (operand {k})")
        out = out @ m
    return out


def add(a, b):
    a, b = check_matrix(a), check_matrix(b)
    check_same_shape(a, b)
    return a + b


def scale(m, c):
    return complex(c) * check_matrix(m)


def adjoint(m):
    return check_matrix(m).conj().T


def trace(m):
    """Standard trace, ``trace(I_d) == d``."""
    return complex(np.trace(check_square(m)))


def commutator(a, b):
    a, b = check_square(a, "a"), check_square(b, "b")
    check_same_shape(a, b)
    return a @ b - b @ a


def anticommutator(a, b):
    a, b = check_square(a, "a"), check_square(b, "b")
    check_same_shape(a, b)
    return a @ b + b @ a


def spectral_decompose(h):
    """Spectral decomposition of a Hermitian matrix with degenerate eigenvalues merged.

    Eigenvalues closer than ``1e-9 * max(1, spectral radius)`` share a single
    projector; the reported eigenvalue of a merged cluster is its mean.

    Raises
    ------
    DomainError
        If ``h`` is not Hermitian.
    """
    h = check_hermitian(h, "h")
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)
    thresh = DEGENERACY_RTOL * max(1.0, np.abs(w).max())
    groups = [[0]]
    for k in range(1, len(w)):
        if w[k] - w[groups[-1][-1]] <= thresh:
            groups[-1].append(k)
        else:
            groups.append([k])
    values, projs = [], []
    for grp in groups:
        vecs = v[:, grp]
        values.append(float(np.mean(w[grp])))
        projs.append(vecs @ vecs.conj().T)
    return SpectralDecomposition(tuple(values), tuple(projs))


def matrix_sqrt(p):
    """Positive square root of a positive semidefinite Hermitian matrix.

    Eigenvalues in ``[-1e-10 * max(1, ||p||), 0)`` are treated as zero;
    anything more negative is a :class:`DomainError`.
    """
    p = check_hermitian(p, "p")
    p = 0.5 * (p + p.conj().T)
    w, v = np.linalg.eigh(p)
    tol = PSD_RTOL * max(1.0, np.linalg.norm(p, 2))
    if w.min() < -tol:
        raise DomainError(f"matrix is not positive semidefinite (min eigenvalue {w.min():.3e})")
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    return 0.5 * (root + root.conj().T)


def expm_hermitian(h, t=1.0):
    """``exp(i t h)`` for Hermitian ``h``, computed from its eigenbasis."""
    h = check_hermitian(h, "h")
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (v * np.exp(1j * t * w)) @ v.conj().T


def polar_decompose(m):
    """Right polar decomposition ``m = U P``.

    Built from the SVD ``m = W S V^dag`` as ``U = W V^dag`` and
    ``P = V S V^dag``. For singular ``m`` the null-space part of ``U`` is the
    one LAPACK's SVD basis fixes, which is deterministic for a given input.
    """
    m = check_square(m, "m")
    w, s, vh = np.linalg.svd(m)
    u = w @ vh
    pos = (vh.conj().T * s) @ vh
    return PolarDecomposition(u, 0.5 * (pos + pos.conj().T))


def pseudoinverse(m):
    """Moore-Penrose pseudoinverse.

    The result inverts ``m`` on its initial space (the orthogonal complement
    of the null space) and annihilates the orthogonal complement of its range.
    Singular values at or below ``1e-12 * sigma_max`` count as zero.
    """
    m = check_matrix(m, "m")
    w, s, vh = np.linalg.svd(m, full_matrices=False)
    out = np.zeros((m.shape[1], m.shape[0]), dtype=complex)
    if s.size == 0 or s[0] == 0:
        return out
    keep = s > PINV_RCOND * s[0]
    return (vh[keep].conj().T / s[keep]) @ w[:, keep].conj().T


def partial_trace(m, dims, keep):
    """Partial trace of an operator on a tensor product.

    Parameters
    ----------
    m : array_like
        Operator on ``H_0 (x) H_1 (x) ...`` with ``prod(dims)`` rows.
    dims : sequence of int
        Subsystem dimensions, in Kronecker order.
    keep : int or sequence of int
        Subsystems that survive.
    """
    m = check_square(m, "m")
    dims = [int(d) for d in dims]
    if int(np.prod(dims)) != m.shape[0]:
        raise DimensionError(f"dims {dims} do not match operator of size {m.shape[0]}")
    keep = [keep] if np.isscalar(keep) else sorted(keep)
    n = len(dims)
    t = m.reshape(dims + dims)
    traced = [k for k in range(n) if k not in keep]
    # trace out from the highest axis down so the remaining axis numbers stay valid
    for k in sorted(traced, reverse=True):
        nk = t.ndim // 2
        t = np.trace(t, axis1=k, axis2=k + nk)
    d = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(d, d)


def is_positive_semidefinite(m, tol=PSD_RTOL):
    m = check_square(m)
    if np.linalg.norm(m - m.conj().T) > tol * max(1.0, np.linalg.norm(m)):
        return False
    return np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min() >= -tol * max(1.0, np.linalg.norm(m))


def frobenius(m):
    return float(np.linalg.norm(m))


def check_unitary(u, tol=1e-10):
    u = check_square(u, "u")
    if np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])) > tol:
        raise DomainError("matrix is not unitary")
    return u
