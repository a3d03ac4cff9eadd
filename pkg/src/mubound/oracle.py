"""Independent verification: certificate checks, sampling, grids.

Everything here deliberately avoids the solver's machinery.  A
certificate is checked by assembling the perturbation and measuring how
singular ``I - eps*M*Delta`` actually is; sampling scans random
admissible perturbations for the smallest level at which their ray hits
the singularity; tiny structures admit an exhaustive boundary grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .blocks import (
    BlockKind,
    BlockStructure,
    Perturbation,
    assemble_dense,
    random_unit_perturbation,
)
from .errors import TooManyParameters

#: absolute tolerance on Im(1/eigenvalue) used to classify a real crossing
RAY_IM_TOL = 1e-8

_NORM_SLACK = 1e-10


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of an independent certificate check."""

    singularity_residual: float
    admissible: bool
    verified: bool
    sampled_best_eps: float | None = None
    notes: tuple[str, ...] = ()


def verify_certificate(M, structure: BlockStructure, eps: float,
                       delta: Perturbation,
                       residual_tol: float = 1e-6) -> VerificationReport:
    """Check a destabilizing-perturbation certificate.

    Admissibility requires every block within its unit-norm budget (and
    the assembled matrix within 2-norm one); the singularity residual is
    the smallest eigenvalue modulus of ``I - eps*M*Delta``.
    """
    M = np.asarray(M, dtype=complex)
    notes = []
    admissible = True
    for k, spec in enumerate(structure.blocks):
        norm = delta.block_norm2(k)
        if norm > 1.0 + _NORM_SLACK:
            admissible = False
            notes.append(
                f"block {k} ({spec.kind.value}) has norm {norm:.12g} > 1"
            )
    D = assemble_dense(delta)
    total = float(np.linalg.norm(D, 2))
    if total > 1.0 + _NORM_SLACK:
        admissible = False
        notes.append(f"assembled perturbation has 2-norm {total:.12g} > 1")
    W = np.eye(structure.n) - eps * (M @ D)
    residual = float(np.abs(np.linalg.eigvals(W)).min())
    if residual > residual_tol:
        notes.append(f"singularity residual {residual:.3e} above tolerance")
    return VerificationReport(
        singularity_residual=residual,
        admissible=admissible,
        verified=bool(admissible and residual <= residual_tol),
        notes=tuple(notes),
    )


def ray_epsilon(eigenvalues, real_blocks: bool,
                im_tol: float = RAY_IM_TOL) -> float:
    """Smallest level at which ``I - eps*M*Delta`` goes singular along a ray.

    Given the spectrum of ``M @ Delta``: without real blocks the phase
    freedom makes the answer the reciprocal spectral radius; with real
    blocks only eigenvalues whose reciprocal is real and positive count.
    """
    w = np.asarray(eigenvalues)
    if not real_blocks:
        rho = float(np.abs(w).max(initial=0.0))
        return 1.0 / rho if rho > 0 else math.inf
    nz = w[np.abs(w) > 0]
    if nz.size == 0:
        return math.inf
    recip = 1.0 / nz
    mask = (np.abs(recip.imag) <= im_tol) & (recip.real > 0)
    if not mask.any():
        return math.inf
    return float(recip.real[mask].min())


def sample_lower_bound(M, structure: BlockStructure, trials: int = 10_000,
                       seed=0):
    """Monte-Carlo scan of the admissible set.

    Draws random unit-norm perturbations, finds each ray's singular
    level, and returns ``(best_eps, best_delta)``.  Returns
    ``(inf, None)`` when no sampled ray reaches the singularity (only
    possible with real blocks).
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    M = np.asarray(M, dtype=complex)
    rng = np.random.default_rng(seed)
    real_blocks = structure.has_real_blocks
    best_eps = math.inf
    best_delta = None
    for _ in range(trials):
        delta = random_unit_perturbation(structure, rng)
        w = np.linalg.eigvals(M @ assemble_dense(delta))
        eps = ray_epsilon(w, real_blocks)
        if eps < best_eps:
            best_eps = eps
            best_delta = delta
    return best_eps, best_delta


def fd_check_derivative(f, eps: float, analytic: float) -> float:
    """Relative error between a central difference of ``f`` and ``analytic``."""
    h = 1e-6 * max(1.0, abs(eps))
    fd = (f(eps + h) - f(eps - h)) / (2.0 * h)
    return abs(fd - analytic) / max(1.0, abs(analytic))


def _eigvals_batched(W: np.ndarray) -> np.ndarray:
    """Eigenvalues of a stack of small matrices, closed-form for n <= 3."""
    n = W.shape[-1]
    if n == 1:
        return W[..., 0, 0][..., None]
    if n == 2:
        tr = W[..., 0, 0] + W[..., 1, 1]
        det = W[..., 0, 0] * W[..., 1, 1] - W[..., 0, 1] * W[..., 1, 0]
        disc = np.sqrt(tr * tr - 4.0 * det + 0j)
        return np.stack([(tr + disc) / 2.0, (tr - disc) / 2.0], axis=-1)
    if n == 3:
        return _eigvals3(W)
    return np.linalg.eigvals(W)


def _eigvals3(W: np.ndarray) -> np.ndarray:
    # Cardano on the characteristic cubic l^3 - a l^2 + b l - c
    a = np.trace(W, axis1=-2, axis2=-1)
    w2 = W @ W
    b = (a * a - np.trace(w2, axis1=-2, axis2=-1)) / 2.0
    c = np.linalg.det(W)
    p = b - a * a / 3.0
    q = -2.0 * a**3 / 27.0 + a * b / 3.0 - c
    r = np.sqrt(q * q / 4.0 + p**3 / 27.0 + 0j)
    u3a = -q / 2.0 + r
    u3b = -q / 2.0 - r
    u3 = np.where(np.abs(u3a) >= np.abs(u3b), u3a, u3b)
    u = u3 ** (1.0 / 3.0)
    omega = np.exp(2j * np.pi / 3.0)
    roots = []
    safe = np.abs(u) > 0
    for k in range(3):
        uk = u * omega**k
        t = np.where(safe, uk - p / np.where(safe, 3.0 * uk, 1.0), 0.0)
        roots.append(t + a / 3.0)
    return np.stack(roots, axis=-1)


def _grid_axes(structure: BlockStructure, points: int):
    axes = []
    for spec in structure.blocks:
        if spec.kind is BlockKind.COMPLEX_SCALAR:
            axes.append(("angle", np.linspace(0.0, 2.0 * np.pi, points,
                                              endpoint=False)))
        elif spec.kind is BlockKind.REAL_SCALAR:
            axes.append(("interval", np.linspace(-1.0, 1.0, points)))
        else:
            raise TooManyParameters("grid search supports scalar blocks only")
    return axes


def _grid_best_eps(M, structure: BlockStructure, axes, im_tol: float,
                   chunk: int = 50_000):
    """Best (smallest) singular level over an axis-product grid."""
    n = structure.n
    real_blocks = structure.has_real_blocks
    grids = np.meshgrid(*[vals for _, vals in axes], indexing="ij")
    params = np.stack([g.ravel() for g in grids], axis=-1)
    total = params.shape[0]

    # per-column scalar value index (every block here is scalar)
    col_block = np.empty(n, dtype=int)
    for k, (spec, sl) in enumerate(zip(structure.blocks, structure.slices)):
        col_block[sl] = k

    best_eps = math.inf
    best_params = params[0]
    kinds = [kind for kind, _ in axes]
    for start in range(0, total, chunk):
        sub = params[start:start + chunk]
        vals = np.empty((sub.shape[0], len(axes)), dtype=complex)
        for k, kind in enumerate(kinds):
            vals[:, k] = np.exp(1j * sub[:, k]) if kind == "angle" else sub[:, k]
        diag = vals[:, col_block]
        W = M[None, :, :] * diag[:, None, :]
        eigs = _eigvals_batched(W)
        if real_blocks:
            with np.errstate(divide="ignore", invalid="ignore"):
                recip = np.where(np.abs(eigs) > 0, 1.0 / eigs, np.inf)
            ok = (np.abs(recip.imag) <= im_tol) & (recip.real > 0)
            eps_rays = np.where(ok, recip.real, np.inf).min(axis=1)
        else:
            rho = np.abs(eigs).max(axis=1)
            with np.errstate(divide="ignore"):
                eps_rays = np.where(rho > 0, 1.0 / rho, np.inf)
        i = int(np.argmin(eps_rays))
        if eps_rays[i] < best_eps:
            best_eps = float(eps_rays[i])
            best_params = sub[i]
    return best_eps, best_params


def grid_mu_tiny(M, structure: BlockStructure, points: int = 1000) -> float:
    """Exhaustive-grid lower bound for structures with at most two scalars.

    Each complex scalar contributes one angle on the unit circle, each
    real scalar one point in [-1, 1]; full blocks are not supported.
    The grid is refined once around the best cell.  Returns the best
    ``1/eps`` found.
    """
    if structure.num_full > 0:
        raise TooManyParameters("grid search supports scalar blocks only")
    if structure.num_blocks > 2:
        raise TooManyParameters(
            f"{structure.num_blocks} parameters exceed the grid budget of 2"
        )
    M = np.asarray(M, dtype=complex)
    # with mixed real/complex scalars a singular ray is an exact real
    # crossing; widen the realness window with the grid resolution so
    # crossing curves passing between grid nodes are still caught
    im_tol = RAY_IM_TOL
    if structure.has_real_blocks and structure.num_complex_scalar > 0:
        im_tol = max(RAY_IM_TOL, 2.0 / points)
    axes = _grid_axes(structure, points)
    best_eps, best_params = _grid_best_eps(M, structure, axes, im_tol)
    if not math.isfinite(best_eps):
        return 0.0

    refined = []
    for (kind, vals), center in zip(axes, best_params):
        step = vals[1] - vals[0] if len(vals) > 1 else 1.0
        lo, hi = center - step, center + step
        if kind == "interval":
            lo, hi = max(lo, -1.0), min(hi, 1.0)
        refined.append((kind, np.linspace(lo, hi, points)))
    eps2, _ = _grid_best_eps(M, structure, refined,
                             max(RAY_IM_TOL, im_tol * 2.0 / points))
    best_eps = min(best_eps, eps2)
    return 1.0 / best_eps
