"""Inner iteration: gradient flows to extremizers at a fixed level.

For a fixed perturbation level ``eps`` the flow moves a structured
perturbation along the steepest-ascent direction of ``Re(z^H Z x)``
(``z = M^H y``) subject to staying on the unit-norm block set.  In
complex mode this monotonically increases the modulus of the largest
eigenvalue of ``eps*M*Delta``; in mixed mode (any real scalar block
present) the same direction monotonically decreases the modulus of the
eigenvalue of ``I - eps*M*Delta`` closest to zero.

Integration is forward Euler with the step size controlled by
monotonicity of the objective: accepted steps grow the step, rejected
ones halve it.  After every accepted step all block norms are restored
exactly by renormalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .blocks import (
    BlockKind,
    BlockStructure,
    Perturbation,
    RankOne,
    assemble_dense,
    canonicalize_real,
    densify,
    renormalize,
)
from .eig import EigenTriple, target_closest_to_one, target_largest
from .errors import NonSimpleTarget, SigmaUnderflow, StepUnderflow

_TINY = 1e-14


@dataclass
class FlowOptions:
    """Tuning knobs for the inner integration."""

    h0: float = 0.1
    h_max: float = 1.0
    h_min: float = 1e-12
    grow: float = 1.25
    tol_stat: float = 1e-8
    tol_obj: float = 1e-12
    n_stall: int = 5
    max_steps: int = 10_000
    sigma_min: float = 1e-8
    gap_rtol: float = 1e-10
    polish: bool = True
    max_polish: int = 200
    restart_attempts: int = 3
    restart_scale: float = 1e-6
    sprint_every: int = 10
    sprint_factors: tuple = (4.0, 16.0, 64.0, 256.0)


@dataclass(frozen=True)
class RankOneDirection:
    """Tangent direction of a factored full block."""

    sigma_dot: complex
    p_dot: np.ndarray
    q_dot: np.ndarray


@dataclass(frozen=True)
class GradientDirection:
    """Per-block steepest-ascent direction with pre-normalization sizes.

    ``magnitudes[k]`` is the norm of the unnormalized direction of block
    ``k``; a stationary block has magnitude (numerically) zero while its
    returned direction may be the tiny raw value itself.
    """

    blocks: tuple
    magnitudes: tuple


@dataclass(frozen=True)
class FlowState:
    """State of one inner integration."""

    eps: float
    delta: Perturbation
    eig: EigenTriple
    z: np.ndarray
    h: float
    accepted_steps: int = 0
    rejected_steps: int = 0

    @property
    def objective(self) -> float:
        return abs(self.eig.value)


def evaluate_target(M, eps: float, delta: Perturbation, mode: str,
                    strict: bool = False, gap_rtol: float = 1e-10):
    """Target eigen triple of ``eps*M*Delta`` and the vector ``z = M^H y``."""
    A = eps * (M @ assemble_dense(delta))
    if mode == "complex":
        trip = target_largest(A, strict=strict, gap_rtol=gap_rtol)
    else:
        trip = target_closest_to_one(A, strict=strict, gap_rtol=gap_rtol)
    z = M.conj().T @ trip.y
    return trip, z


def _is_real_matrix(M) -> bool:
    return not np.any(M.imag)


def make_state(M, structure: BlockStructure, eps: float, delta: Perturbation,
               mode: str, opts: FlowOptions | None = None) -> FlowState:
    opts = opts or FlowOptions()
    delta = renormalize(delta)
    if _is_real_matrix(M):
        delta = canonicalize_real(delta)
    trip, z = evaluate_target(M, eps, delta, mode, gap_rtol=opts.gap_rtol)
    return FlowState(eps=eps, delta=delta, eig=trip, z=z, h=opts.h0)


def _scalar_direction(delta_val: complex, x_k, z_k):
    # projection of x^H z onto the tangent of the unit circle at delta
    c = complex(np.vdot(x_k, z_k))
    raw = c - (c * delta_val.conjugate()).real * delta_val
    mag = abs(raw)
    if mag > _TINY:
        return raw / mag, mag
    return raw, mag


def _full_direction_dense(block, x_k, z_k):
    G = np.outer(z_k, x_k.conj())
    raw = G - np.vdot(block, G).real * block
    mag = float(np.linalg.norm(raw))
    if mag > _TINY:
        return raw / mag, mag
    return raw, mag


def rank_one_rhs(sigma, p, q, x_k, z_k, sigma_min: float = 1e-8,
                 block_index: int = 0):
    """Tangent dynamics of a factored full block ``sigma p q^H``.

    With ``alpha = p^H z`` and ``beta = q^H x`` the returned derivatives
    are ``sigma_dot = 1j*Im(alpha*conj(beta)*conj(sigma))*sigma``,
    ``p_dot = (z - alpha p) conj(beta) / sigma`` and
    ``q_dot = (x - beta q) conj(alpha) / conj(sigma)``; they satisfy
    ``p^H p_dot = q^H q_dot = 0``.
    """
    if abs(sigma) < sigma_min:
        raise SigmaUnderflow(block_index, abs(sigma))
    alpha = complex(np.vdot(p, z_k))
    beta = complex(np.vdot(q, x_k))
    sigma_dot = 1j * (alpha * beta.conjugate() * np.conj(sigma)).imag * sigma
    p_dot = (z_k - alpha * p) * (beta.conjugate() / sigma)
    q_dot = (x_k - beta * q) * (alpha.conjugate() / np.conj(sigma))
    return sigma_dot, p_dot, q_dot


def _direction(delta: Perturbation, x, z, mode: str,
               sigma_min: float = 1e-8) -> GradientDirection:
    s = delta.structure
    blocks, mags = [], []
    for k, (spec, sl) in enumerate(zip(s.blocks, s.slices)):
        x_k, z_k = x[sl], z[sl]
        value = delta.blocks[k]
        if spec.kind is BlockKind.COMPLEX_SCALAR:
            d, m = _scalar_direction(value, x_k, z_k)
        elif spec.kind is BlockKind.REAL_SCALAR:
            re = float(np.vdot(z_k, x_k).real)
            if re > 0 and value > -1.0:
                d = 1.0
            elif re < 0 and value < 1.0:
                d = -1.0
            else:
                d = 0.0
            m = abs(re)
        elif isinstance(value, RankOne):
            sd, pd, qd = rank_one_rhs(value.sigma, value.p, value.q, x_k, z_k,
                                      sigma_min=sigma_min, block_index=k)
            d = RankOneDirection(sd, pd, qd)
            m = float(np.sqrt(abs(sd) ** 2
                              + np.linalg.norm(pd) ** 2
                              + np.linalg.norm(qd) ** 2))
        else:
            d, m = _full_direction_dense(value, x_k, z_k)
        blocks.append(d)
        mags.append(m)
    return GradientDirection(tuple(blocks), tuple(mags))


def gradient_complex(delta: Perturbation, x, z,
                     sigma_min: float = 1e-8) -> GradientDirection:
    """Steepest-ascent direction for the largest-eigenvalue objective."""
    return _direction(delta, x, z, "complex", sigma_min)


def gradient_mixed(delta: Perturbation, x, z,
                   sigma_min: float = 1e-8) -> GradientDirection:
    """Steepest-descent direction for the distance-to-singularity objective.

    Complex scalar and full blocks move as in the complex case; a real
    scalar moves at unit speed toward the sign of ``Re(z_k^H x_k)`` and
    freezes once saturated at the matching endpoint.
    """
    return _direction(delta, x, z, "mixed", sigma_min)


def _apply_direction(delta: Perturbation, direction: GradientDirection,
                     h: float) -> Perturbation:
    values = []
    for value, d in zip(delta.blocks, direction.blocks):
        if isinstance(d, RankOneDirection):
            values.append(RankOne(value.sigma + h * d.sigma_dot,
                                  value.p + h * d.p_dot,
                                  value.q + h * d.q_dot))
        else:
            values.append(value + h * d)
    return Perturbation(delta.structure, tuple(values))


def _improved(mode: str, new: float, old: float) -> bool:
    return new > old if mode == "complex" else new < old


def euler_step(state: FlowState, M, mode: str,
               opts: FlowOptions | None = None):
    """One monotonicity-controlled Euler proposal.

    Returns ``(state, accepted)``.  An accepted proposal carries the
    renormalized perturbation and a step grown by the growth factor (up
    to ``h_max``); a rejected one leaves the perturbation unchanged and
    halves the step.  Raises :class:`StepUnderflow` when asked to step
    with ``h < h_min``.
    """
    opts = opts or FlowOptions()
    if state.h < opts.h_min:
        raise StepUnderflow(f"step size {state.h:.3e} below minimum")
    direction = _direction(state.delta, state.eig.x, state.z, mode,
                           opts.sigma_min)
    candidate = renormalize(_apply_direction(state.delta, direction, state.h))
    if _is_real_matrix(M):
        candidate = canonicalize_real(candidate)
    try:
        trip, z = evaluate_target(M, state.eps, candidate, mode,
                                  gap_rtol=opts.gap_rtol)
    except NonSimpleTarget:
        return replace(state, h=state.h / 2,
                       rejected_steps=state.rejected_steps + 1), False
    if _improved(mode, abs(trip.value), state.objective):
        return FlowState(eps=state.eps, delta=candidate, eig=trip, z=z,
                         h=min(opts.grow * state.h, opts.h_max),
                         accepted_steps=state.accepted_steps + 1,
                         rejected_steps=state.rejected_steps), True
    return replace(state, h=state.h / 2,
                   rejected_steps=state.rejected_steps + 1), False


def stationary_candidate(delta: Perturbation, x, z,
                         re_tol: float = _TINY) -> Perturbation:
    """The aligned perturbation a stationary point must equal.

    Complex scalar and full blocks are the unit-normalized blocks of the
    structure projection of ``z x^H``; real scalars sit at the endpoint
    matching the sign of ``Re(z_k^H x_k)``.  Blocks whose projection
    vanishes keep their current value.
    """
    s = delta.structure
    values = []
    for k, (spec, sl) in enumerate(zip(s.blocks, s.slices)):
        x_k, z_k = x[sl], z[sl]
        value = delta.blocks[k]
        if spec.kind is BlockKind.COMPLEX_SCALAR:
            gamma = complex(np.vdot(x_k, z_k)) / spec.dim
            values.append(gamma / abs(gamma) if abs(gamma) > re_tol else value)
        elif spec.kind is BlockKind.REAL_SCALAR:
            re = float(np.vdot(z_k, x_k).real)
            values.append(float(np.sign(re)) if abs(re) > re_tol else value)
        else:
            zn = np.linalg.norm(z_k)
            xn = np.linalg.norm(x_k)
            if zn * xn <= re_tol:
                values.append(value)
            elif isinstance(value, RankOne):
                values.append(RankOne(1.0 + 0.0j, z_k / zn, x_k / xn))
            else:
                values.append(np.outer(z_k, x_k.conj()) / (zn * xn))
    return Perturbation(s, tuple(values))


def stationarity_residual(delta: Perturbation, x, z) -> float:
    """Frobenius distance between ``delta`` and its aligned candidate."""
    cand = stationary_candidate(delta, x, z)
    return float(np.linalg.norm(assemble_dense(delta) - assemble_dense(cand)))


def _extrapolate(delta: Perturbation, older: Perturbation,
                 factor: float) -> Perturbation:
    """Extrapolate along the displacement from ``older`` to ``delta``.

    Zigzagging Euler paths in flat valleys advance slowly; their net
    displacement over several steps points along the valley, so a
    guarded long step along it can traverse the valley cheaply.
    """
    values = []
    for value, old in zip(delta.blocks, older.blocks):
        if isinstance(value, RankOne) and isinstance(old, RankOne):
            values.append(RankOne(
                value.sigma + factor * (value.sigma - old.sigma),
                value.p + factor * (value.p - old.p),
                value.q + factor * (value.q - old.q),
            ))
        elif isinstance(value, RankOne) or isinstance(old, RankOne):
            a = value.dense() if isinstance(value, RankOne) else value
            b = old.dense() if isinstance(old, RankOne) else old
            values.append(a + factor * (a - b))
        else:
            values.append(value + factor * (value - old))
    return renormalize(Perturbation(delta.structure, tuple(values)))


def _try_sprint(state: FlowState, older: Perturbation, M, mode: str,
                opts: FlowOptions):
    """Attempt valley extrapolations; keep the best improving one."""
    best = None
    realify = _is_real_matrix(M)
    for factor in opts.sprint_factors:
        cand = _extrapolate(state.delta, older, factor)
        if realify:
            cand = canonicalize_real(cand)
        try:
            trip, z = evaluate_target(M, state.eps, cand, mode,
                                      gap_rtol=opts.gap_rtol)
        except NonSimpleTarget:
            continue
        if _improved(mode, abs(trip.value),
                     best[1] if best else state.objective):
            best = (cand, abs(trip.value), trip, z)
    if best is None:
        return state, False
    cand, _, trip, z = best
    return FlowState(eps=state.eps, delta=cand, eig=trip, z=z, h=state.h,
                     accepted_steps=state.accepted_steps + 1,
                     rejected_steps=state.rejected_steps), True


def _perturbed_start(delta: Perturbation, rng, scale: float) -> Perturbation:
    values = []
    for spec, value in zip(delta.structure.blocks, delta.blocks):
        if spec.kind is BlockKind.COMPLEX_SCALAR:
            values.append(value * np.exp(1j * scale * rng.standard_normal()))
        elif spec.kind is BlockKind.REAL_SCALAR:
            values.append(value + scale * rng.standard_normal())
        elif isinstance(value, RankOne):
            m = value.p.size
            values.append(RankOne(
                value.sigma * np.exp(1j * scale * rng.standard_normal()),
                value.p + scale * (rng.standard_normal(m)
                                   + 1j * rng.standard_normal(m)),
                value.q + scale * (rng.standard_normal(m)
                                   + 1j * rng.standard_normal(m)),
            ))
        else:
            m = spec.dim
            values.append(value + scale * (rng.standard_normal((m, m))
                                           + 1j * rng.standard_normal((m, m))))
    return renormalize(Perturbation(delta.structure, tuple(values)))


def _polish(state: FlowState, M, mode: str, opts: FlowOptions):
    """Fixed-point refinement: jump to the aligned candidate while the
    objective strictly improves."""
    steps = 0
    realify = _is_real_matrix(M)
    while steps < opts.max_polish:
        cand = stationary_candidate(state.delta, state.eig.x, state.z)
        if realify:
            cand = canonicalize_real(cand)
        move = float(np.linalg.norm(assemble_dense(cand)
                                    - assemble_dense(state.delta)))
        if move < 1e-15:
            break
        try:
            trip, z = evaluate_target(M, state.eps, cand, mode,
                                      gap_rtol=opts.gap_rtol)
        except NonSimpleTarget:
            break
        if not _improved(mode, abs(trip.value), state.objective):
            break
        state = FlowState(eps=state.eps, delta=cand, eig=trip, z=z,
                          h=state.h,
                          accepted_steps=state.accepted_steps + 1,
                          rejected_steps=state.rejected_steps)
        steps += 1
    return state, steps


def integrate_to_stationary(M, structure: BlockStructure, eps: float,
                            delta0: Perturbation, mode: str | None = None,
                            opts: FlowOptions | None = None):
    """Drive a perturbation to a stationary point of the gradient flow.

    Returns ``(delta, triple, diagnostics)`` where the triple is the
    target eigenvalue data at the final perturbation.  Termination
    reasons are a small stationarity residual, a stalled objective, a
    step-size underflow, or the step budget.

    Raises :class:`NonSimpleTarget` only if the target stays degenerate
    after a few perturbed restarts; the diagnostics of the caller should
    then retry from a different starting block.
    """
    M = np.asarray(M, dtype=complex)
    opts = opts or FlowOptions()
    if mode is None:
        mode = "mixed" if structure.has_real_blocks else "complex"

    rng = np.random.default_rng(0)
    restarts = 0
    delta = renormalize(delta0)
    while True:
        try:
            state = make_state(M, structure, eps, delta, mode, opts)
            break
        except NonSimpleTarget:
            if restarts >= opts.restart_attempts:
                raise
            restarts += 1
            delta = _perturbed_start(delta, rng, opts.restart_scale)

    history = [state.objective]
    sigma_switches = 0
    sprints = 0
    anchor = state.delta
    while True:
        residual = stationarity_residual(state.delta, state.eig.x, state.z)
        if residual <= opts.tol_stat:
            termination = "stationary"
            break
        if (len(history) > opts.n_stall
                and abs(history[-1] - history[-1 - opts.n_stall]) < opts.tol_obj):
            termination = "stalled"
            break
        if state.accepted_steps + state.rejected_steps >= opts.max_steps:
            termination = "max_steps"
            break
        try:
            state, accepted = euler_step(state, M, mode, opts)
        except StepUnderflow:
            termination = "step_underflow"
            break
        except SigmaUnderflow as exc:
            state = replace(state,
                            delta=densify(state.delta, {exc.block_index}))
            sigma_switches += 1
            continue
        if accepted:
            history.append(state.objective)
            if (opts.sprint_every
                    and state.accepted_steps % opts.sprint_every == 0):
                state, sprinted = _try_sprint(state, anchor, M, mode, opts)
                if sprinted:
                    sprints += 1
                    history.append(state.objective)
                anchor = state.delta

    polish_steps = 0
    if opts.polish and state.objective > 1e-15:
        state, polish_steps = _polish(state, M, mode, opts)
        if polish_steps:
            history.append(state.objective)
            residual = stationarity_residual(state.delta, state.eig.x, state.z)

    diagnostics = {
        "mode": mode,
        "termination": termination,
        "accepted_steps": state.accepted_steps,
        "rejected_steps": state.rejected_steps,
        "polish_steps": polish_steps,
        "sprints": sprints,
        "restarts": restarts,
        "sigma_switches": sigma_switches,
        "stationarity_residual": residual,
        "objective_history": np.asarray(history),
    }
    return state.delta, state.eig, diagnostics
