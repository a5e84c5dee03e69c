"""Dense symmetric-matrix kernel.

Matrices are plain ``numpy.ndarray`` values. ``as_matrix`` and ``as_sym`` are
the validation entry points; every other routine calls them first so that
non-finite or asymmetric input fails loudly instead of propagating.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import block_diag

from .errors import IllConditioned, InvalidMatrix, NotPsd, Singular

SYM_TOL = 1e-8
PSD_TOL = 1e-9
KAPPA_MAX = 1e12

__all__ = [
    "as_matrix",
    "as_sym",
    "block_diag",
    "is_definite",
    "max_eigenvalue",
    "min_eigenvalue",
    "solve_linear",
    "spectral_norm",
    "sym_sqrt",
]


def as_matrix(M, name="matrix") -> np.ndarray:
    """Return ``M`` as a finite 2-D float array.

    Scalars become 1x1 and 1-D input becomes a column vector, which is how
    single-input plant matrices are usually written.
    """
    try:
        A = np.asarray(M, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidMatrix(f"{name}: not a numeric array ({exc})") from None
    if A.ndim == 0:
        A = A.reshape(1, 1)
    elif A.ndim == 1:
        A = A.reshape(-1, 1)
    elif A.ndim != 2:
        raise InvalidMatrix(f"{name}: expected 2-D array, got ndim={A.ndim}")
    if A.size == 0:
        raise InvalidMatrix(f"{name}: empty matrix")
    if not np.all(np.isfinite(A)):
        raise InvalidMatrix(f"{name}: non-finite entries")
    return A


def as_sym(M, name="matrix", tol=SYM_TOL) -> np.ndarray:
    """Validate a symmetric matrix and return its exact symmetrization.

    Asymmetry larger than ``tol * max(1, |M|_max)`` is rejected.
    """
    A = as_matrix(M, name)
    if A.shape[0] != A.shape[1]:
        raise InvalidMatrix(f"{name}: not square {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > tol * scale:
        raise InvalidMatrix(f"{name}: not symmetric")
    return 0.5 * (A + A.T)


def min_eigenvalue(M) -> float:
    return float(np.linalg.eigvalsh(as_sym(M))[0])


def max_eigenvalue(M) -> float:
    return float(np.linalg.eigvalsh(as_sym(M))[-1])


def is_definite(M, sense="positive", margin=0.0) -> bool:
    """Strict definiteness test: ``lambda_min(+-M) > margin``.

    Uses a symmetric eigensolve rather than a shifted Cholesky so that the
    verdict is always consistent with :func:`min_eigenvalue`.
    """
    if not np.isfinite(margin):
        raise InvalidMatrix("margin must be finite")
    S = as_sym(M)
    if sense == "positive":
        lam = np.linalg.eigvalsh(S)[0]
    elif sense == "negative":
        lam = np.linalg.eigvalsh(-S)[0]
    else:
        raise ValueError(f"unknown sense {sense!r}")
    return bool(lam > margin)


def sym_sqrt(M, tol=PSD_TOL) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues in ``[-tol*|M|, 0)`` are clipped to zero; anything more
    negative raises :class:`NotPsd`.
    """
    S = as_sym(M)
    w, V = np.linalg.eigh(S)
    scale = max(1.0, float(np.max(np.abs(w))))
    if w[0] < -tol * scale:
        raise NotPsd(f"lambda_min = {w[0]:.3e} below -{tol:.1e}")
    w = np.clip(w, 0.0, None)
    R = (V * np.sqrt(w)) @ V.T
    return 0.5 * (R + R.T)


def solve_linear(M, B, kappa_max=KAPPA_MAX) -> np.ndarray:
    """Solve ``M X = B`` for square, well-conditioned ``M``."""
    A = as_matrix(M, "M")
    Bm = np.asarray(B, dtype=float)
    vector_rhs = Bm.ndim == 1
    Bm = as_matrix(Bm, "B")
    if A.shape[0] != A.shape[1]:
        raise InvalidMatrix(f"M: not square {A.shape}")
    if Bm.shape[0] != A.shape[0]:
        raise InvalidMatrix(f"B: {Bm.shape[0]} rows, M is {A.shape[0]}x{A.shape[1]}")
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] <= np.finfo(float).eps * max(1.0, s[0]):
        raise Singular("matrix is numerically singular")
    kappa = s[0] / s[-1]
    if kappa > kappa_max:
        raise IllConditioned(f"condition number {kappa:.3e} exceeds {kappa_max:.1e}")
    X = np.linalg.solve(A, Bm)
    return X.ravel() if vector_rhs else X


def spectral_norm(M) -> float:
    """Largest singular value."""
    return float(np.linalg.norm(as_matrix(M), 2))
