"""Outer iteration: pick the smallest critical perturbation level.

The inner flow delivers, for a fixed level ``eps``, a locally extremal
perturbation together with its target eigenvalue.  The outer iteration
root-finds in ``eps``: in complex mode it solves ``|lambda(eps)| = 1``
by Newton's method using an exact derivative formula; in mixed mode it
drives the distance ``|zeta(eps)|`` to zero, falling back to bisection
whenever the level overshoots and the distance collapses.  The final
level ``eps_f`` certifies the lower bound ``1/eps_f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .blocks import (
    BlockKind,
    BlockStructure,
    Perturbation,
    RankOne,
    assemble_dense,
    project_onto_structure,
    renormalize,
    rotate,
)
from .eig import EigenTriple, eig_all
from .errors import (
    AssumptionViolated,
    DegeneratePair,
    MuSolverError,
    NonSimpleTarget,
    StructureError,
)
from .flow import FlowOptions, evaluate_target, integrate_to_stationary

_BLOCK_TOL = 1e-12


@dataclass
class OuterConfig:
    """Configuration of the outer iteration.

    ``tol`` stops the loop once consecutive levels agree to that
    accuracy.  ``residual_zero_tol`` is the threshold below which the
    inner objective counts as an exact hit (Newton would divide by a
    vanishing quantity, so the iteration bisects instead).
    """

    tol: float = 1e-9
    eps0: float | None = None
    i_max: int | None = None
    max_outer: int = 50
    residual_zero_tol: float = 1e-10
    init_zero_tol: float = 1e-8
    verify_tol: float = 1e-6
    continuation_steps: int = 8
    start_policy: str = "augment"  # "augment" | "only": user start replaces
    scan_steps: int = 2000
    flow: FlowOptions = field(default_factory=FlowOptions)


@dataclass(frozen=True)
class OuterIterate:
    """One row of the outer history."""

    eps: float
    objective: float
    step: str


@dataclass
class Certificate:
    """Destabilizing-perturbation certificate.

    ``1/eps_f`` is a lower bound for the structured singular value up to
    ``residual``, witnessed by ``delta_star``: the matrix
    ``I - eps_f * M * Delta`` is singular to that residual and all
    blocks of ``delta_star`` satisfy the unit-norm constraints.
    """

    eps_f: float
    delta_star: Perturbation
    lower_bound: float
    residual: float
    history: list[OuterIterate]
    verified: bool
    mode: str
    diagnostics: dict


def _spectrum_sorted(M):
    w, X, Y = eig_all(M)
    order = np.lexsort((-w.imag, -w.real, -np.abs(w)))
    return w[order], X[:, order], Y[:, order]


def _scaled_eigenvectors(lam, x, y):
    # y^H x rotated so that exp(-1j*arg(lam)) * y^H x is real positive
    t = np.vdot(y, x)
    if abs(t) == 0:
        return x, y, 0.0
    phi = np.angle(t) - np.angle(lam)
    return x, y * np.exp(1j * phi), abs(t)


def _aligned_initial(structure: BlockStructure, x, y):
    """Unit-normalized projection of ``y x^H``, with fallbacks.

    Returns ``(delta, weight, notes)`` where ``weight`` is the real
    inner product between ``y x^H`` and the assembled perturbation (the
    sum of projected block norms).
    """
    notes = []
    proj = project_onto_structure(np.outer(y, x.conj()), structure)
    values = []
    weight = 0.0
    for k, (spec, sl) in enumerate(zip(structure.blocks, structure.slices)):
        if spec.kind is BlockKind.COMPLEX_SCALAR:
            gamma = proj.blocks[k]
            if abs(gamma) <= _BLOCK_TOL:
                notes.append(f"block {k} projection vanished")
                values.append(1.0 + 0.0j)
            else:
                values.append(gamma / abs(gamma))
                weight += abs(gamma) * spec.dim
        elif spec.kind is BlockKind.REAL_SCALAR:
            gamma = proj.blocks[k]
            if abs(gamma) <= _BLOCK_TOL:
                notes.append(f"block {k} projection vanished")
                values.append(1.0)
            else:
                values.append(float(np.sign(gamma)))
                weight += abs(gamma) * spec.dim
        else:
            y_k = y[sl]
            x_k = x[sl]
            norm = np.linalg.norm(y_k) * np.linalg.norm(x_k)
            if norm <= _BLOCK_TOL:
                notes.append(f"block {k} projection vanished")
                e1 = np.zeros(spec.dim, dtype=complex)
                e1[0] = 1.0
                values.append(RankOne(1.0 + 0.0j, e1, e1.copy()))
            else:
                values.append(RankOne(1.0 + 0.0j,
                                      y_k / np.linalg.norm(y_k),
                                      x_k / np.linalg.norm(x_k)))
                weight += norm
    return Perturbation(structure, tuple(values)), weight, notes


def initial_perturbation(M, structure: BlockStructure,
                         eig_index: int = 1) -> Perturbation:
    """Starting perturbation aligned with an eigenvector pair of ``M``.

    Uses the right/left eigenvectors of the ``eig_index``-th largest
    eigenvalue of ``M`` (1-based), scaled so that the first-order
    decrease of the distance to singularity is maximal, and projects
    their outer product onto the structure with every block normalized.
    Blocks whose projection vanishes fall back to the identity phase or
    a first-coordinate rank-one block.
    """
    M = np.asarray(M, dtype=complex)
    w, X, Y = _spectrum_sorted(M)
    nonzero = int(np.sum(np.abs(w) > 1e-14 * max(1.0, np.abs(w).max(initial=0.0))))
    if eig_index < 1 or eig_index > nonzero:
        raise MuSolverError(
            f"matrix has only {nonzero} usable eigenvalues, requested "
            f"index {eig_index}"
        )
    k = eig_index - 1
    x, y, _ = _scaled_eigenvectors(w[k], X[:, k], Y[:, k])
    delta, _, _ = _aligned_initial(structure, x, y)
    return delta


def initial_epsilon(M, structure: BlockStructure, m: int | None = None) -> float:
    """First-order estimate of the critical level.

    For each of the ``m`` largest eigenvalues of ``M`` the linearized
    distance-to-singularity model gives the level at which the aligned
    perturbation would reach the singularity; the smallest estimate over
    the eigenvalues is returned.  Falls back to ``1/||M||_2`` when every
    candidate degenerates.
    """
    M = np.asarray(M, dtype=complex)
    w, X, Y = _spectrum_sorted(M)
    if m is None:
        m = default_i_max(structure.n)
    best = math.inf
    scale = np.abs(w).max(initial=0.0)
    for k in range(min(m, w.size)):
        lam = w[k]
        if abs(lam) <= 1e-14 * max(1.0, scale):
            continue
        x, y, pair = _scaled_eigenvectors(lam, X[:, k], Y[:, k])
        if pair == 0.0:
            continue
        _, weight, notes = _aligned_initial(structure, x, y)
        if weight <= _BLOCK_TOL:
            continue
        chi0 = 1.0 / abs(lam)
        best = min(best, chi0 * pair / (2.0 * weight))
    if not math.isfinite(best):
        nrm = np.linalg.norm(M, 2)
        if nrm == 0:
            raise MuSolverError("zero matrix has no critical level")
        return 1.0 / float(nrm)
    return float(best)


def default_i_max(n: int) -> int:
    """Number of eigenvalue starts used by the multi-start phase."""
    return max(n // 5, 5) if n >= 5 else n


def _block_terms(structure: BlockStructure, x, z, check: bool):
    """Per-block alignment weights entering the derivative formulas."""
    terms = []
    for spec, sl in zip(structure.blocks, structure.slices):
        x_k, z_k = x[sl], z[sl]
        if spec.kind is BlockKind.COMPLEX_SCALAR:
            t = abs(np.vdot(z_k, x_k))
        elif spec.kind is BlockKind.REAL_SCALAR:
            t = abs(float(np.vdot(z_k, x_k).real))
        else:
            t = float(np.linalg.norm(z_k) * np.linalg.norm(x_k))
        if check and t < _BLOCK_TOL:
            raise AssumptionViolated(
                f"block product for a {spec.kind.value} block is "
                f"{t:.3e}, derivative formula not applicable"
            )
        terms.append(t)
    return terms


def derivative_complex(structure: BlockStructure, trip: EigenTriple, z,
                       check: bool = True) -> float:
    """Exact derivative of the largest eigenvalue modulus in the level.

    At a stationary perturbation the derivative equals the sum of the
    scalar block alignments ``|z_k^H x_k|`` and full block alignments
    ``||z_k|| * ||x_k||``, divided by ``|y^H x|``; it is positive.
    """
    if structure.has_real_blocks:
        raise StructureError("complex-mode derivative needs a purely "
                             "complex structure")
    if trip.s < 1e-14:
        raise DegeneratePair("vanishing y^H x at the stationary point")
    terms = _block_terms(structure, trip.x, z, check)
    return float(sum(terms) / trip.s)


def derivative_mixed(structure: BlockStructure, trip: EigenTriple, z,
                     check: bool = True) -> float:
    """Exact derivative of the distance to singularity in the level.

    Real scalar blocks contribute ``|Re(z_k^H x_k)|``; the result is
    negative (raising the level shrinks the distance).
    """
    if trip.s < 1e-14:
        raise DegeneratePair("vanishing y^H x at the stationary point")
    terms = _block_terms(structure, trip.x, z, check)
    return float(-sum(terms) / trip.s)


def newton_update(eps: float, objective: float, derivative: float,
                  mode: str) -> float:
    """One Newton step of the outer root problem.

    Complex mode solves ``|lambda(eps)| - 1 = 0`` with a positive
    derivative; mixed mode solves ``|zeta(eps)| = 0`` with a negative
    one, so the level always moves toward the crossing.  A nonpositive
    proposal is pulled back toward the current level by halving.
    """
    if mode == "complex":
        if derivative <= 0:
            raise AssumptionViolated("complex-mode derivative must be positive")
        step = (objective - 1.0) / derivative
    else:
        if derivative >= 0:
            raise AssumptionViolated("mixed-mode derivative must be negative")
        step = objective / derivative
    nxt = eps - step
    while nxt <= 0:
        step /= 2
        nxt = eps - step
    return float(nxt)


def _below_critical(mode: str, objective: float, zero_tol: float) -> bool:
    if mode == "complex":
        return objective < 1.0 - zero_tol
    return objective > zero_tol


def _outer_residual(mode: str, objective: float) -> float:
    return abs(objective - 1.0) if mode == "complex" else objective


def compute_lower_bound(M, structure: BlockStructure,
                        cfg: OuterConfig | None = None,
                        delta0: Perturbation | None = None,
                        eps0: float | None = None) -> Certificate:
    """Compute a certified lower bound of the structured singular value.

    Runs the multi-start inner flow at the initial level, then
    alternates Newton steps (from exact derivatives at the inner
    stationary points) with bisection safeguards until consecutive
    levels agree to ``cfg.tol``.  ``delta0``/``eps0`` override the
    start, e.g. to warm start from an externally computed perturbation.

    The returned certificate is post-verified: ``verified`` holds only
    if the assembled perturbation is admissible and
    ``I - eps_f*M*Delta`` is singular to the verification tolerance.
    """
    from .oracle import verify_certificate

    cfg = cfg or OuterConfig()
    M = np.asarray(M, dtype=complex)
    if M.shape != (structure.n, structure.n):
        raise StructureError(
            f"matrix shape {M.shape} does not match structure size {structure.n}"
        )
    mode = "mixed" if structure.has_real_blocks else "complex"
    zero_tol = cfg.residual_zero_tol
    i_max = cfg.i_max if cfg.i_max is not None else default_i_max(structure.n)
    if eps0 is None:
        eps0 = cfg.eps0
    if eps0 is None:
        eps0 = initial_epsilon(M, structure, i_max)

    notes: list[str] = []
    starts = []
    if delta0 is not None:
        starts.append(_continue_down(M, structure, renormalize(delta0), eps0,
                                     mode, cfg, notes))
    if delta0 is None or cfg.start_policy == "augment":
        w, _, _ = _spectrum_sorted(M)
        usable = int(np.sum(np.abs(w) > 1e-14 * max(1.0, np.abs(w).max(initial=0.0))))
        for i in range(1, min(i_max, usable) + 1):
            starts.append(initial_perturbation(M, structure, i))
    if not starts:
        raise MuSolverError("matrix has no usable eigenvalue to start from")

    # scan every start on a reduced step budget, then fully converge
    # only the most promising one
    scan_flow = replace(cfg.flow,
                        max_steps=min(cfg.flow.max_steps, cfg.scan_steps))
    best = None
    start_objectives = []
    for i, d0 in enumerate(starts):
        try:
            delta, trip, diag = integrate_to_stationary(
                M, structure, eps0, d0, mode, scan_flow)
        except (NonSimpleTarget, MuSolverError) as exc:
            notes.append(f"start {i + 1} failed: {exc}")
            start_objectives.append(math.nan)
            continue
        start_objectives.append(abs(trip.value))
        if best is None or _improved_start(mode, abs(trip.value), abs(best[1].value)):
            best = (delta, trip, diag)
    if best is not None and best[2].get("termination") == "max_steps":
        try:
            delta, trip, diag = integrate_to_stationary(
                M, structure, eps0, best[0], mode, cfg.flow)
            best = (delta, trip, diag)
        except (NonSimpleTarget, MuSolverError) as exc:
            notes.append(f"winner refinement failed: {exc}")

    if best is None:
        # every start failed; report an unverified best-effort certificate
        delta = renormalize(starts[0])
        report = verify_certificate(M, structure, eps0, delta,
                                    residual_tol=cfg.verify_tol)
        return Certificate(
            eps_f=eps0, delta_star=delta, lower_bound=1.0 / eps0,
            residual=report.singularity_residual,
            history=[OuterIterate(eps0, math.nan, "init")],
            verified=False, mode=mode,
            diagnostics={"notes": notes + ["no progress from any start"],
                         "start_objectives": start_objectives,
                         "converged": False},
        )

    delta, trip, inner_diag = best
    z = M.conj().T @ trip.y
    eps = float(eps0)
    history = [OuterIterate(eps, abs(trip.value), "init")]
    eps_lo, eps_hi = 0.0, math.inf
    converged = False
    eps_f = eps
    step_kind = "init"
    inner_solves = len(starts)

    for outer_k in range(cfg.max_outer):
        objective = abs(trip.value)
        # a drastic overshoot of the very first level is only detectable
        # by an already collapsed objective; treat it as an upper bound
        threshold = max(zero_tol, cfg.init_zero_tol) if outer_k == 0 else zero_tol
        if _below_critical(mode, objective, threshold):
            eps_lo = max(eps_lo, eps)
        else:
            eps_hi = min(eps_hi, eps)

        eps_next, step_kind = _propose_level(
            mode, eps, objective, structure, trip, z,
            eps_lo, eps_hi, zero_tol, cfg.tol, notes)

        if abs(eps_next - eps) < cfg.tol:
            eps_f = eps_next
            converged = True
            break

        try:
            delta, trip, _ = integrate_to_stationary(
                M, structure, eps_next, delta, mode, cfg.flow)
        except (NonSimpleTarget, MuSolverError) as exc:
            notes.append(f"inner solve at eps={eps_next:.12g} failed: {exc}")
            eps_hi = min(eps_hi, eps_next) if eps_next > eps else eps_hi
            eps_f = eps
            break
        inner_solves += 1
        z = M.conj().T @ trip.y
        eps = eps_next
        history.append(OuterIterate(eps, abs(trip.value), step_kind))
        eps_f = eps
    else:
        notes.append("outer iteration budget exhausted")

    # evaluate the certificate at the final level
    if eps_f != eps:
        try:
            delta, trip, _ = integrate_to_stationary(
                M, structure, eps_f, delta, mode, cfg.flow)
            inner_solves += 1
            history.append(OuterIterate(eps_f, abs(trip.value), step_kind))
        except (NonSimpleTarget, MuSolverError) as exc:
            notes.append(f"final solve at eps={eps_f:.12g} failed: {exc}")
            eps_f = eps

    if mode == "complex":
        # rotate so the extremal eigenvalue lands on the positive real
        # axis and I - eps*M*Delta is genuinely near-singular
        delta = rotate(delta, np.exp(-1j * np.angle(trip.value)))
        trip, z = evaluate_target(M, eps_f, delta, "mixed",
                                  gap_rtol=cfg.flow.gap_rtol)
        residual = abs(trip.value)
    else:
        residual = abs(trip.value)

    report = verify_certificate(M, structure, eps_f, delta,
                                residual_tol=cfg.verify_tol)
    diagnostics = {
        "notes": notes,
        "start_objectives": start_objectives,
        "inner_solves": inner_solves,
        "converged": converged,
        "inner_termination": inner_diag.get("termination"),
        "verification": report,
    }
    return Certificate(
        eps_f=float(eps_f),
        delta_star=delta,
        lower_bound=1.0 / float(eps_f),
        residual=float(residual),
        history=history,
        verified=bool(report.verified),
        mode=mode,
        diagnostics=diagnostics,
    )


def _improved_start(mode: str, new: float, old: float) -> bool:
    return new > old if mode == "complex" else new < old


def _continue_down(M, structure, delta, eps0, mode, cfg, notes):
    """Walk a user-supplied perturbation down to the requested level.

    A supplied perturbation is typically (near) critical at its own ray
    level.  Integrating directly at a much smaller level can leave its
    eigenvalue branch; instead, the level is reduced geometrically from
    the ray-critical value to ``eps0``, re-converging the flow at each
    intermediate level so the branch is tracked continuously.
    """
    from .oracle import ray_epsilon

    w = np.linalg.eigvals(M @ assemble_dense(delta))
    eps_nat = ray_epsilon(w, structure.has_real_blocks)
    if not math.isfinite(eps_nat) or eps_nat <= eps0 * (1.0 + 1e-6):
        return delta
    n_steps = max(1, cfg.continuation_steps)
    start = eps_nat * (1.0 - 1e-3)
    levels = np.geomspace(start, eps0, n_steps + 1)
    for lev in levels:
        try:
            delta, _, _ = integrate_to_stationary(
                M, structure, float(lev), delta, mode, cfg.flow)
        except (NonSimpleTarget, MuSolverError) as exc:
            notes.append(f"continuation at eps={lev:.6g} failed: {exc}")
            break
    return delta


def _propose_level(mode, eps, objective, structure, trip, z,
                   eps_lo, eps_hi, zero_tol, tol, notes):
    """Next level: Newton inside the bracket, safeguarded otherwise.

    When Newton aims at or beyond a bracket edge, the proposal is
    clamped just inside that edge (a probe) instead of falling all the
    way back to the midpoint; the plain midpoint is kept as the floor
    so the bracket still shrinks geometrically.
    """
    newton_eps = None
    can_newton = mode == "complex" or objective > zero_tol
    if mode == "complex" and abs(objective - 1.0) <= zero_tol:
        can_newton = False
    if can_newton:
        try:
            if mode == "complex":
                d = derivative_complex(structure, trip, z)
            else:
                d = derivative_mixed(structure, trip, z)
            newton_eps = newton_update(eps, objective, d, mode)
        except (AssumptionViolated, DegeneratePair) as exc:
            notes.append(f"newton step unavailable at eps={eps:.12g}: {exc}")
            newton_eps = None
    if newton_eps is not None and eps_lo < newton_eps < eps_hi:
        return newton_eps, "newton"
    if math.isfinite(eps_hi):
        mid = 0.5 * (eps_lo + eps_hi)
        backoff = max(tol, 1e-3 * (eps_hi - eps_lo))
        if newton_eps is None and not can_newton:
            # the level sits at (or beyond) the crossing; probe just below
            return max(mid, eps_hi - backoff), "bisection"
        if newton_eps is not None and newton_eps >= eps_hi:
            return max(mid, eps_hi - backoff), "bisection"
        if newton_eps is not None and newton_eps <= eps_lo:
            return min(mid, eps_lo + backoff), "bisection"
        return mid, "bisection"
    return 1.5 * eps, "bisection"
