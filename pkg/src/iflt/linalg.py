"""Dense numerical kernels: pseudo-inverse, symmetric PSD square root, norms.

All kernels are pure functions on finite float matrices and are deterministic;
rank decisions use a relative singular-value cutoff so that rank-deficient
input never raises.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInput, NotPSD

DEFAULT_RELATIVE_CUTOFF = 1e-12
SYMMETRY_RTOL = 1e-10
NEGATIVE_EIG_RTOL = 1e-8


@dataclass(frozen=True)
class SpectralTolerance:
    """Relative cutoff below which singular values are treated as zero."""

    relative_cutoff: float

    def __post_init__(self):
        if not (np.isfinite(self.relative_cutoff) and self.relative_cutoff > 0.0):
            raise InvalidInput("relative_cutoff must be a positive finite number")

    @staticmethod
    def for_shape(rows: int, cols: int) -> "SpectralTolerance":
        """Default tolerance scaled by the larger matrix dimension."""
        return SpectralTolerance(DEFAULT_RELATIVE_CUTOFF * max(rows, cols))


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float array or raise InvalidInput."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise InvalidInput(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return arr


def pseudo_inverse(a, tol: SpectralTolerance | None = None) -> np.ndarray:
    """Moore-Penrose pseudo-inverse computed by SVD.

    Singular values at or below ``relative_cutoff * sigma_max`` are treated
    as exactly zero, so the inverse of a rank-deficient (or zero) matrix is
    well defined and never raises.

    Parameters
    ----------
    a : array_like, shape (r, c)
    tol : SpectralTolerance, optional
        Defaults to ``1e-12 * max(r, c)`` relative to the largest singular
        value.
    """
    arr = as_matrix(a)
    if tol is None:
        tol = SpectralTolerance.for_shape(*arr.shape)
    if arr.size == 0:
        return np.zeros((arr.shape[1], arr.shape[0]))
    u, sv, vt = np.linalg.svd(arr, full_matrices=False)
    if sv[0] == 0.0:
        return np.zeros((arr.shape[1], arr.shape[0]))
    keep = sv > tol.relative_cutoff * sv[0]
    inv = np.zeros_like(sv)
    inv[keep] = 1.0 / sv[keep]
    return (vt.T * inv) @ u.T


def sym_sqrt(e) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Requires a square matrix symmetric within ``1e-10 * ||E||_F``. Eigenvalues
    in ``[-1e-8 * ||E||_F, 0)`` are clipped to zero (empirical covariances are
    PSD only up to rounding); anything more negative raises NotPSD. The result
    S is symmetric PSD with ``S @ S`` reproducing the clipped input.
    """
    arr = as_matrix(e)
    if arr.shape[0] != arr.shape[1]:
        raise InvalidInput(f"square matrix required, got shape {arr.shape}")
    scale = float(np.linalg.norm(arr))
    if float(np.linalg.norm(arr - arr.T)) > SYMMETRY_RTOL * scale:
        raise InvalidInput("matrix is not symmetric within tolerance")
    sym = 0.5 * (arr + arr.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    if scale > 0.0 and eigvals.min() < -NEGATIVE_EIG_RTOL * scale:
        raise NotPSD(
            f"eigenvalue {eigvals.min():.3e} below -{NEGATIVE_EIG_RTOL:.0e} * ||E||_F"
        )
    eigvals = np.clip(eigvals, 0.0, None)
    # zero rounding-level eigenvalues with the pseudo-inverse's rank rule, so
    # that the root's pseudo-inverse keeps exactly the directions E^+ keeps
    if eigvals.size:
        cutoff = DEFAULT_RELATIVE_CUTOFF * arr.shape[0] * eigvals.max()
        eigvals[eigvals <= cutoff] = 0.0
    root = (eigvecs * np.sqrt(eigvals)) @ eigvecs.T
    return 0.5 * (root + root.T)


def frob_norm_sq(a) -> float:
    """Squared Frobenius norm, the sum of squared entries."""
    arr = as_matrix(a)
    return float(np.sum(arr * arr))


def penrose_residuals(a, a_pinv) -> tuple[float, float, float, float]:
    """Relative Frobenius residuals of the four defining pseudo-inverse identities.

    Returns residuals for A G A = A, G A G = G, (A G) symmetric and (G A)
    symmetric, each normalized by the scale of the quantity being reproduced.
    """
    arr = as_matrix(a)
    g = as_matrix(a_pinv)
    scale_a = float(np.linalg.norm(arr)) or 1.0
    scale_g = float(np.linalg.norm(g)) or 1.0
    ag = arr @ g
    ga = g @ arr
    r1 = float(np.linalg.norm(ag @ arr - arr)) / scale_a
    r2 = float(np.linalg.norm(ga @ g - g)) / scale_g
    r3 = float(np.linalg.norm(ag - ag.T)) / (float(np.linalg.norm(ag)) or 1.0)
    r4 = float(np.linalg.norm(ga - ga.T)) / (float(np.linalg.norm(ga)) or 1.0)
    return r1, r2, r3, r4
