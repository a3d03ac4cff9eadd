"""Dense eigendecomposition with consistently scaled left/right pairs.

All operations are stateless; callers may invoke them concurrently on
distinct matrices.  The workhorse is one LAPACK ``zgeev`` call per
matrix, which returns unit-norm right and left eigenvectors with a
shared eigenvalue ordering, so pairing is by index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import DegeneratePair, EigenSolverError, NonSimpleTarget

#: eigenvalue gap tolerance, relative to the matrix norm
GAP_RTOL = 1e-10

#: |y^H x| below this is treated as a defective pair
PAIR_TOL = 1e-14


@dataclass(frozen=True)
class EigenTriple:
    """A selected eigenvalue with consistently scaled eigenvectors.

    Attributes
    ----------
    value : complex
        The selected eigenvalue (the shifted one, ``1 - lambda``, when
        produced by :func:`target_closest_to_one`).
    x, y : ndarray
        Unit-norm right and left eigenvectors.  The phase of ``y`` is
        chosen so that ``exp(1j*theta) * (y^H x)`` is real and positive,
        with ``theta = arg(value)``; ``x`` keeps the solver's phase.
    s : float
        The positive number ``exp(1j*theta) * y^H x``, equal to
        ``|y^H x|`` after scaling.
    gap : float
        Distance from ``value`` to the nearest other eigenvalue; a
        positive gap certifies simplicity.
    zero : bool
        Set when ``|value|`` is negligible (the shifted target has hit
        the singularity); informational, not an error.
    """

    value: complex
    x: np.ndarray
    y: np.ndarray
    s: float
    gap: float
    zero: bool = False

    @property
    def objective(self) -> float:
        return abs(self.value)


def eig_all(A):
    """Full spectrum of a dense matrix with right and left eigenvectors.

    Parameters
    ----------
    A : (n, n) array_like
        Complex matrix.

    Returns
    -------
    w : (n,) ndarray
        Eigenvalues.
    X : (n, n) ndarray
        Right eigenvectors as columns, unit 2-norm, ``A X[:,k] = w[k] X[:,k]``.
    Y : (n, n) ndarray
        Left eigenvectors as columns, unit 2-norm,
        ``Y[:,k]^H A = w[k] Y[:,k]^H``.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise EigenSolverError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise EigenSolverError("matrix contains non-finite entries")
    if A.shape[0] == 1:
        one = np.ones((1, 1), dtype=complex)
        return A[0, 0:1].copy(), one, one.copy()
    w, vl, vr, info = lapack.zgeev(A, compute_vl=1, compute_vr=1)
    if info != 0:
        raise EigenSolverError(f"zgeev failed to converge (info={info})")
    return w, vr, vl


def scaled_triple(value, x, y, gap, zero=False) -> EigenTriple:
    """Scale the phase of ``y`` so that ``exp(1j*theta) y^H x > 0``."""
    t = np.vdot(y, x)
    mag = abs(t)
    if mag > 0:
        theta = np.angle(value) if value != 0 else 0.0
        y = y * np.exp(1j * (theta + np.angle(t)))
    return EigenTriple(value=complex(value), x=x, y=y, s=float(mag),
                       gap=float(gap), zero=zero)


def _plane_gap(w, idx) -> float:
    if w.size < 2:
        return np.inf
    d = np.abs(w - w[idx])
    d[idx] = np.inf
    return float(d.min())


def target_largest(A, strict=False, gap_rtol=GAP_RTOL) -> EigenTriple:
    """Largest-modulus eigenvalue of ``A`` with scaled eigenvectors.

    Ties in modulus are broken by largest real part, then largest
    imaginary part.  Raises :class:`NonSimpleTarget` when the target
    coalesces with another eigenvalue; with ``strict=True`` an
    ambiguous selection (another eigenvalue of essentially the same
    modulus) is also rejected.
    """
    w, X, Y = eig_all(A)
    scale = float(np.linalg.norm(A))
    order = np.lexsort((-w.imag, -w.real, -np.abs(w)))
    idx = int(order[0])
    gap = _plane_gap(w, idx)
    if gap < gap_rtol * scale:
        raise NonSimpleTarget(
            f"largest eigenvalue {w[idx]:.6g} is not simple (gap {gap:.3e})"
        )
    if strict and w.size > 1:
        sel_gap = abs(w[idx]) - abs(w[int(order[1])])
        if sel_gap < gap_rtol * scale:
            raise NonSimpleTarget(
                f"largest modulus is ambiguous (modulus gap {sel_gap:.3e})"
            )
    return scaled_triple(w[idx], X[:, idx].copy(), Y[:, idx].copy(), gap)


def target_closest_to_one(A, strict=False, gap_rtol=GAP_RTOL,
                          zero_tol=1e-14) -> EigenTriple:
    """Shifted eigenvalue ``1 - lambda`` of smallest modulus.

    ``lambda`` ranges over the spectrum of ``A``; the returned triple
    carries ``value = 1 - lambda`` together with the eigenvectors of
    ``A`` for ``lambda`` (which are also eigenvectors of ``I - A``).
    Ties are broken by smallest ``|lambda|``, then lexicographically.
    The ``zero`` flag marks ``|1 - lambda|`` below ``zero_tol``, i.e.
    the singularity has been reached.
    """
    w, X, Y = eig_all(A)
    scale = float(np.linalg.norm(A))
    d = np.abs(1.0 - w)
    order = np.lexsort((w.imag, w.real, np.abs(w), d))
    idx = int(order[0])
    gap = _plane_gap(w, idx)
    if gap < gap_rtol * scale:
        raise NonSimpleTarget(
            f"eigenvalue closest to one is not simple (gap {gap:.3e})"
        )
    if strict and w.size > 1:
        sel_gap = d[int(order[1])] - d[idx]
        if sel_gap < gap_rtol * scale:
            raise NonSimpleTarget(
                f"closest-to-one selection is ambiguous (gap {sel_gap:.3e})"
            )
    zeta = 1.0 - w[idx]
    return scaled_triple(zeta, X[:, idx].copy(), Y[:, idx].copy(), gap,
                         zero=bool(abs(zeta) < zero_tol))


def eig_derivative(y, x, direction) -> complex:
    """Derivative of a simple eigenvalue along a matrix direction.

    For ``A(t) = A + t*C`` with simple eigenvalue ``lambda(0)`` and
    eigenvectors ``x``, ``y``, the derivative is
    ``y^H C x / (y^H x)``.
    """
    t = np.vdot(y, x)
    if abs(t) < PAIR_TOL:
        raise DegeneratePair(f"|y^H x| = {abs(t):.3e} is numerically zero")
    return complex(np.vdot(y, np.asarray(direction) @ x) / t)
