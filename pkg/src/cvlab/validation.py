"""Input validation helpers.

Every public entry point funnels its array arguments through one of these
so that shape and finiteness problems surface as :class:`DimensionError`
or :class:`DomainError` before any arithmetic happens.
"""

import numpy as np

from .exceptions import DimensionError, DomainError

#: ``||m - m^dag||_F <= HERMITIAN_RTOL * max(1, ||m||_F)`` accepts ``m`` as Hermitian.
HERMITIAN_RTOL = 1e-10
STATE_TOL = 1e-10
VECTOR_NORM_TOL = 1e-12


def check_matrix(m, name="matrix"):
    """Return ``m`` as a finite 2-D complex array."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    return arr


def check_square(m, name="matrix"):
    arr = check_matrix(m, name)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    return arr


def check_same_shape(a, b, names=("a", "b")):
    if a.shape != b.shape:
        raise DimensionError(f"{names[0]} has shape {a.shape} but {names[1]} has shape {b.shape}")


def is_hermitian(m, rtol=HERMITIAN_RTOL):
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return np.linalg.norm(m - m.conj().T) <= rtol * max(1.0, np.linalg.norm(m))


def check_hermitian(m, name="matrix"):
    """Return a square complex array, raising :class:`DomainError` unless Hermitian."""
    arr = check_square(m, name)
    if not is_hermitian(arr):
        defect = np.linalg.norm(arr - arr.conj().T)
        raise DomainError(f"{name} is not Hermitian (||m - m^dag||_F = {defect:.3e})")
    return arr


def check_vector(v, name="vector", normalized=False):
    arr = np.asarray(v, dtype=complex)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1 or arr.size < 1:
        raise DimensionError(f"{name} must be a non-empty 1-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    if normalized and abs(np.linalg.norm(arr) - 1.0) > VECTOR_NORM_TOL:
        raise DomainError(f"{name} must have unit norm, got {np.linalg.norm(arr):.15g}")
    return arr


def check_density(rho, dim=None, normalized=True, name="rho"):
    """Validate a density matrix.

    Parameters
    ----------
    rho : array_like
        Candidate state.
    dim : int, optional
        Required dimension.
    normalized : bool, default=True
        Require ``tr rho = 1``. Conditioned averages accept unnormalized
        states, so callers there pass ``False`` and only positivity and a
        positive trace are enforced.
    """
    arr = check_hermitian(rho, name)
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    arr = 0.5 * (arr + arr.conj().T)
    tr = np.trace(arr).real
    scale = max(1.0, tr)
    if np.linalg.eigvalsh(arr).min() < -STATE_TOL * scale:
        raise DomainError(f"{name} is not positive semidefinite")
    if normalized and abs(tr - 1.0) > STATE_TOL:
        raise DomainError(f"{name} must have unit trace, got {tr:.15g}")
    if not normalized and tr <= 0:
        raise DomainError(f"{name} must have positive trace")
    return arr


def as_projector(post, dim=None, name="postselection"):
    """Turn a unit vector or an orthogonal projector into a projector matrix."""
    arr = np.asarray(post, dtype=complex)
    if arr.ndim == 1 or (arr.ndim == 2 and arr.shape[1] == 1):
        f = check_vector(arr, name, normalized=True)
        proj = np.outer(f, f.conj())
    else:
        proj = check_hermitian(arr, name)
        if np.linalg.norm(proj @ proj - proj) > HERMITIAN_RTOL * max(1.0, np.linalg.norm(proj)):
            raise DomainError(f"{name} is not idempotent")
    if dim is not None and proj.shape[0] != dim:
        raise DimensionError(f"{name} has dimension {proj.shape[0]}, expected {dim}")
    return proj


def pure_state(psi):
    """Projector onto the normalized vector ``psi``."""
    v = check_vector(psi, "psi")
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise DomainError("psi must be nonzero")
    v = v / nrm
    return np.outer(v, v.conj())
