"""Dense complex linear algebra for small Hilbert spaces (dim <= 16).

Everything here is plain numpy: operators are complex square arrays, states
are complex vectors, density matrices are complex square arrays.  Matrix
exponentials go through the Hermitian eigendecomposition, which is exact up
to roundoff for the matrix sizes used in this package.
"""

from __future__ import annotations

import numpy as np


class NotHermitianError(ValueError):
    """Matrix failed a Hermiticity check."""


class NotUnitaryError(ValueError):
    """Matrix failed a unitarity check."""


class DimensionMismatchError(ValueError):
    """Array shapes are inconsistent with the requested operation."""


class InvalidStateError(ValueError):
    """State vector or density matrix violates its invariants."""


def dagger(m: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.asarray(m).conj().T


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; the left factor is the slow index."""
    return np.kron(np.asarray(a), np.asarray(b))


def is_hermitian(m: np.ndarray, tol: float = 1e-10) -> bool:
    """True if ``m`` equals its adjoint within ``tol``.

    The tolerance is relative to the largest entry magnitude, floored at 1,
    so that matrices with entries of order 1e4 (MHz-scale Hamiltonians) are
    judged sensibly.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    scale = max(1.0, np.abs(m).max())
    return bool(np.abs(m - dagger(m)).max() <= tol * scale)


def is_unitary(m: np.ndarray, tol: float = 1e-10) -> bool:
    """True if ``m @ m.conj().T`` is the identity within ``tol``."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.abs(m @ dagger(m) - np.eye(m.shape[0])).max() <= tol)


def eigh(h: np.ndarray, tol: float = 1e-10):
    """Eigendecomposition of a Hermitian matrix.

    Returns (eigenvalues ascending, orthonormal eigenvector columns).
    Raises NotHermitianError if ``h`` is not Hermitian within ``tol``.
    """
    h = np.asarray(h)
    if not is_hermitian(h, tol):
        raise NotHermitianError("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh(h)
    return w, v


def propagator(h: np.ndarray, t: float, tol: float = 1e-10) -> np.ndarray:
    """exp(-i*h*t) via eigendecomposition of the Hermitian matrix ``h``.

    ``h`` and ``t`` must carry matching units so that h*t is a phase in
    radians; callers working with frequencies in MHz apply their own 2*pi.
    """
    w, v = eigh(h, tol)
    return (v * np.exp(-1j * w * t)) @ dagger(v)


def partial_trace(rho: np.ndarray, dims, keep) -> np.ndarray:
    """Trace out tensor factors of ``rho``.

    Args:
        rho: density matrix on the tensor product of subsystems with
            dimensions ``dims`` (slowest factor first, matching ``kron``).
        dims: iterable of factor dimensions; their product must equal
            the dimension of ``rho``.
        keep: iterable of factor indices to keep, in ascending order.

    Returns:
        Reduced density matrix on the kept factors.
    """
    rho = np.asarray(rho)
    dims = tuple(int(d) for d in dims)
    keep = tuple(sorted(int(k) for k in keep))
    n = len(dims)
    if rho.shape != (int(np.prod(dims)), int(np.prod(dims))):
        raise DimensionMismatchError(
            f"matrix of shape {rho.shape} does not factor into dims {dims}")
    if any(k < 0 or k >= n for k in keep):
        raise DimensionMismatchError(f"keep indices {keep} out of range for {n} factors")
    t = rho.reshape(dims + dims)
    # einsum with repeated labels on the traced factors, distinct on the kept
    row = list(range(n))
    col = [i + n if i in keep else i for i in range(n)]
    out = [i for i in keep] + [i + n for i in keep]
    kept = int(np.prod([dims[i] for i in keep])) if keep else 1
    return np.einsum(t, row + col, out).reshape(kept, kept)


def validate_state_vector(psi: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Check norm and return the vector as a complex array."""
    psi = np.asarray(psi, dtype=complex).ravel()
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > tol:
        raise InvalidStateError(f"state vector norm {norm} deviates from 1 beyond {tol}")
    return psi


def validate_density_matrix(rho: np.ndarray, herm_tol: float = 1e-10,
                            trace_tol: float = 1e-10, eig_floor: float = -1e-8) -> np.ndarray:
    """Check Hermiticity, unit trace and positivity of a density matrix."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidStateError(f"density matrix has shape {rho.shape}")
    if np.abs(rho - dagger(rho)).max() > herm_tol:
        raise InvalidStateError("density matrix is not Hermitian within tolerance")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise InvalidStateError(f"density matrix trace {tr} deviates from 1 beyond {trace_tol}")
    w = np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))
    if w.min() < eig_floor:
        raise InvalidStateError(f"density matrix has eigenvalue {w.min()} below {eig_floor}")
    return rho


def projector(vectors: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the span of the given orthonormal columns."""
    v = np.asarray(vectors, dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    return v @ dagger(v)
