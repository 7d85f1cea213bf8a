"""Dense linear-algebra helpers shared across the package.

Vectorization convention, fixed project-wide: column-major stacking,
``vec(A rho B†) = kron(conj(B), A) vec(rho)``.  All superoperator matrices
in this package act on column-major vectorized density blocks.
"""

from __future__ import annotations

import numpy as np

COMPLEX = np.complex128


def as_matrix(x, dtype=COMPLEX) -> np.ndarray:
    """Coerce to a 2-D complex ndarray and reject non-finite entries."""
    a = np.asarray(x, dtype=dtype)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got array of shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-major vectorization of a matrix."""
    return np.asarray(rho, dtype=COMPLEX).reshape(-1, order="F")


def unvec(x: np.ndarray, d: int) -> np.ndarray:
    """Inverse of :func:`vec` for a d x d matrix."""
    return np.asarray(x, dtype=COMPLEX).reshape(d, d, order="F")


def kraus_block(L: np.ndarray) -> np.ndarray:
    """Matrix of ``rho -> L rho L†`` in the column-major vec convention."""
    return np.kron(L.conj(), L)


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def herm(a: np.ndarray) -> np.ndarray:
    """Hermitian part (A + A†)/2."""
    return 0.5 * (a + a.conj().T)


def is_hermitian(a: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(np.abs(a - a.conj().T).max(initial=0.0) <= tol)


def is_psd(a: np.ndarray, tol: float = 1e-9) -> bool:
    """Positive semidefinite within tolerance (Hermitian part is used)."""
    if not is_hermitian(a, max(tol, 1e-7 * max(1.0, float(np.abs(a).max(initial=0.0))))):
        return False
    w = np.linalg.eigvalsh(herm(a))
    return bool(w.min(initial=0.0) >= -tol)


def positive_part(a: np.ndarray) -> np.ndarray:
    """Spectral positive part of a Hermitian matrix."""
    w, v = np.linalg.eigh(herm(a))
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.conj().T


def psd_sqrt(a: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Hermitian square root of a PSD matrix; small negatives clipped."""
    w, v = np.linalg.eigh(herm(a))
    if w.min(initial=0.0) < -1e-8 * max(1.0, abs(w).max(initial=1.0)):
        raise ValueError("matrix is not positive semidefinite")
    w = np.sqrt(np.clip(w, 0.0, None))
    return (v * w) @ v.conj().T


def clip_density(rho: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Project onto the PSD cone and renormalize to unit trace."""
    r = positive_part(rho)
    t = float(np.trace(r).real)
    if t <= tol:
        raise ValueError("density matrix has vanishing trace")
    return r / t


def spectral_radius(m: np.ndarray) -> float:
    if m.size == 0:
        return 0.0
    return float(np.abs(np.linalg.eigvals(m)).max())


def trace_norm(a: np.ndarray) -> float:
    """Sum of singular values."""
    return float(np.linalg.svd(a, compute_uv=False).sum())


def orthonormal_columns(vectors: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis of the column span, rank decided by relative SVD cut.

    ``vectors`` is d x k (k may be 0); returns d x r with r <= min(d, k).
    """
    if vectors.size == 0:
        return np.zeros((vectors.shape[0], 0), dtype=COMPLEX)
    u, s, _ = np.linalg.svd(vectors, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((vectors.shape[0], 0), dtype=COMPLEX)
    r = int(np.sum(s > tol * s[0]))
    return u[:, :r]


def extend_basis(basis: np.ndarray, new_vectors: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Grow an orthonormal basis by the components of new vectors outside it."""
    if new_vectors.size == 0:
        return basis
    if basis.shape[1]:
        new_vectors = new_vectors - basis @ (basis.conj().T @ new_vectors)
    extra = orthonormal_columns(new_vectors, tol=tol)
    if not extra.shape[1]:
        return basis
    out = np.hstack([basis, extra])
    # one re-orthonormalization pass to suppress drift
    q, _ = np.linalg.qr(out)
    return q[:, : out.shape[1]]


def hermitian_basis(d: int) -> list[np.ndarray]:
    """Real orthonormal basis of d x d Hermitian matrices (Frobenius inner product)."""
    out = []
    for k in range(d):
        e = np.zeros((d, d), dtype=COMPLEX)
        e[k, k] = 1.0
        out.append(e)
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for k in range(d):
        for l in range(k + 1, d):
            e = np.zeros((d, d), dtype=COMPLEX)
            e[k, l] = inv_sqrt2
            e[l, k] = inv_sqrt2
            out.append(e)
            e = np.zeros((d, d), dtype=COMPLEX)
            e[k, l] = -1j * inv_sqrt2
            e[l, k] = 1j * inv_sqrt2
            out.append(e)
    return out


def frozen(a: np.ndarray) -> np.ndarray:
    """Return a read-only copy; walks and operators are immutable by contract."""
    b = np.array(a, dtype=COMPLEX)
    b.setflags(write=False)
    return b
