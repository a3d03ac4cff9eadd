"""Block-diagonal perturbation structures and perturbations.

A structure is an ordered list of blocks, each one of

* ``cs`` -- a repeated complex scalar, one number on an r x r identity,
* ``rs`` -- a repeated real scalar, confined to [-1, 1],
* ``cf`` -- a full complex m x m block.

Block order is arbitrary and preserved.  A :class:`Perturbation` carries
one value per block; full blocks are stored either as a dense matrix or
in factored rank-one form ``sigma * p q^H`` with unit ``p``, ``q``.

All types are immutable value objects; instances are safe to share
between threads.  Arrays held by a perturbation must not be mutated.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from .errors import StructureError


class BlockKind(Enum):
    COMPLEX_SCALAR = "cs"
    REAL_SCALAR = "rs"
    COMPLEX_FULL = "cf"


_KIND_BY_TOKEN = {kind.value: kind for kind in BlockKind}


@dataclass(frozen=True)
class BlockSpec:
    """One block of a perturbation structure."""

    kind: BlockKind
    dim: int

    def __post_init__(self):
        if not isinstance(self.kind, BlockKind):
            raise StructureError(f"unknown block kind {self.kind!r}")
        if not isinstance(self.dim, int) or isinstance(self.dim, bool) or self.dim < 1:
            raise StructureError(
                f"block dimension must be a positive integer, got {self.dim!r}"
            )

    @property
    def token(self) -> str:
        return f"{self.kind.value}:{self.dim}"


@dataclass(frozen=True)
class BlockStructure:
    """Ordered list of block specs with index bookkeeping."""

    blocks: tuple[BlockSpec, ...]

    def __post_init__(self):
        if not self.blocks:
            raise StructureError("a structure needs at least one block")

    @cached_property
    def n(self) -> int:
        return sum(spec.dim for spec in self.blocks)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        out, pos = [], 0
        for spec in self.blocks:
            out.append(pos)
            pos += spec.dim
        return tuple(out)

    @cached_property
    def slices(self) -> tuple[slice, ...]:
        return tuple(
            slice(off, off + spec.dim)
            for off, spec in zip(self.offsets, self.blocks)
        )

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    @cached_property
    def num_complex_scalar(self) -> int:
        return sum(s.kind is BlockKind.COMPLEX_SCALAR for s in self.blocks)

    @cached_property
    def num_real_scalar(self) -> int:
        return sum(s.kind is BlockKind.REAL_SCALAR for s in self.blocks)

    @cached_property
    def num_full(self) -> int:
        return sum(s.kind is BlockKind.COMPLEX_FULL for s in self.blocks)

    @property
    def num_scalar(self) -> int:
        return self.num_complex_scalar + self.num_real_scalar

    @property
    def has_real_blocks(self) -> bool:
        return self.num_real_scalar > 0

    def to_dsl(self) -> str:
        return ",".join(spec.token for spec in self.blocks)


def parse_structure(text: str) -> BlockStructure:
    """Parse a structure string such as ``"rs:2,cf:1"``.

    Tokens are ``cs:<r>`` (repeated complex scalar), ``rs:<r>`` (repeated
    real scalar) and ``cf:<m>`` (full complex block), comma separated.
    Token order is preserved.
    """
    if not isinstance(text, str) or not text.strip():
        raise StructureError("empty structure description")
    specs = []
    for raw in text.split(","):
        token = raw.strip()
        head, sep, tail = token.partition(":")
        if not sep or head not in _KIND_BY_TOKEN:
            raise StructureError(f"malformed structure token {token!r}")
        try:
            dim = int(tail)
        except ValueError:
            raise StructureError(f"malformed structure token {token!r}") from None
        if dim < 1:
            raise StructureError(f"non-positive dimension in token {token!r}")
        specs.append(BlockSpec(_KIND_BY_TOKEN[head], dim))
    return BlockStructure(tuple(specs))


@dataclass(frozen=True)
class RankOne:
    """Factored full block ``sigma * p q^H`` with unit-norm factors."""

    sigma: complex
    p: np.ndarray
    q: np.ndarray

    def dense(self) -> np.ndarray:
        return self.sigma * np.outer(self.p, self.q.conj())


@dataclass(frozen=True)
class Perturbation:
    """Per-block values for a given structure.

    Block values are ``complex`` for ``cs``, ``float`` for ``rs``, and
    either a dense complex array or a :class:`RankOne` for ``cf``.
    """

    structure: BlockStructure
    blocks: tuple

    def __post_init__(self):
        if len(self.blocks) != self.structure.num_blocks:
            raise StructureError(
                f"expected {self.structure.num_blocks} block values, "
                f"got {len(self.blocks)}"
            )
        coerced = []
        for spec, value in zip(self.structure.blocks, self.blocks):
            coerced.append(_coerce_block(spec, value))
        object.__setattr__(self, "blocks", tuple(coerced))

    def block_dense(self, k: int):
        """Dense content of block ``k`` (scalar for scalar blocks)."""
        value = self.blocks[k]
        if isinstance(value, RankOne):
            return value.dense()
        return value

    def block_norm2(self, k: int) -> float:
        """Spectral norm of block ``k``."""
        spec = self.structure.blocks[k]
        value = self.blocks[k]
        if spec.kind is not BlockKind.COMPLEX_FULL:
            return abs(value)
        if isinstance(value, RankOne):
            return abs(value.sigma) * np.linalg.norm(value.p) * np.linalg.norm(value.q)
        return float(np.linalg.norm(value, 2))

    def block_frobenius(self, k: int) -> float:
        spec = self.structure.blocks[k]
        value = self.blocks[k]
        if spec.kind is not BlockKind.COMPLEX_FULL:
            return abs(value) * np.sqrt(spec.dim)
        if isinstance(value, RankOne):
            return abs(value.sigma) * np.linalg.norm(value.p) * np.linalg.norm(value.q)
        return float(np.linalg.norm(value))

    def spectral_norm(self) -> float:
        """2-norm of the assembled block-diagonal matrix."""
        return max(self.block_norm2(k) for k in range(self.structure.num_blocks))


def _coerce_block(spec: BlockSpec, value):
    if spec.kind is BlockKind.COMPLEX_SCALAR:
        if isinstance(value, np.ndarray) or isinstance(value, RankOne):
            raise StructureError("complex scalar block expects a scalar value")
        return complex(value)
    if spec.kind is BlockKind.REAL_SCALAR:
        if isinstance(value, complex) and abs(value.imag) > 0:
            raise StructureError("real scalar block expects a real value")
        if isinstance(value, (np.ndarray, RankOne)):
            raise StructureError("real scalar block expects a scalar value")
        return float(np.real(value))
    if isinstance(value, RankOne):
        p = np.asarray(value.p, dtype=complex)
        q = np.asarray(value.q, dtype=complex)
        if p.shape != (spec.dim,) or q.shape != (spec.dim,):
            raise StructureError(
                f"rank-one factors must have length {spec.dim}"
            )
        return RankOne(complex(value.sigma), p, q)
    mat = np.asarray(value, dtype=complex)
    if mat.shape != (spec.dim, spec.dim):
        raise StructureError(
            f"full block expects shape {(spec.dim, spec.dim)}, got {mat.shape}"
        )
    return mat


def assemble_dense(delta: Perturbation) -> np.ndarray:
    """Assemble the block-diagonal matrix of ``delta``."""
    s = delta.structure
    out = np.zeros((s.n, s.n), dtype=complex)
    for k, (spec, sl) in enumerate(zip(s.blocks, s.slices)):
        value = delta.blocks[k]
        if spec.kind is BlockKind.COMPLEX_FULL:
            out[sl, sl] = value.dense() if isinstance(value, RankOne) else value
        else:
            out[sl, sl] = value * np.eye(spec.dim)
    return out


def project_onto_structure(C, structure: BlockStructure) -> Perturbation:
    """Orthogonal projection of a matrix onto the structure.

    Complex scalar blocks receive ``trace(C_k)/r``, real scalar blocks
    ``Re(trace(C_k))/r``, and full blocks copy the diagonal sub-block.
    The residual ``C - P(C)`` is Frobenius-orthogonal (in real part) to
    every member of the structure.
    """
    C = np.asarray(C, dtype=complex)
    if C.shape != (structure.n, structure.n):
        raise StructureError(
            f"matrix shape {C.shape} does not match structure size {structure.n}"
        )
    values = []
    for spec, sl in zip(structure.blocks, structure.slices):
        sub = C[sl, sl]
        if spec.kind is BlockKind.COMPLEX_SCALAR:
            values.append(complex(np.trace(sub)) / spec.dim)
        elif spec.kind is BlockKind.REAL_SCALAR:
            values.append(float(np.trace(sub).real) / spec.dim)
        else:
            values.append(sub.copy())
    return Perturbation(structure, tuple(values))


def renormalize(delta: Perturbation) -> Perturbation:
    """Push every block back onto its unit-norm set.

    Complex scalars are rescaled to modulus one, real scalars clamped to
    [-1, 1], full blocks rescaled to unit Frobenius norm (for rank-one
    factors: unit-modulus core and unit factors).  Zero blocks fall back
    to the identity phase or a first-coordinate rank-one matrix.
    """
    values = []
    for spec, value in zip(delta.structure.blocks, delta.blocks):
        if spec.kind is BlockKind.COMPLEX_SCALAR:
            mag = abs(value)
            values.append(value / mag if mag > 0 else 1.0 + 0.0j)
        elif spec.kind is BlockKind.REAL_SCALAR:
            values.append(min(1.0, max(-1.0, value)))
        elif isinstance(value, RankOne):
            smag = abs(value.sigma)
            pn = np.linalg.norm(value.p)
            qn = np.linalg.norm(value.q)
            if smag == 0 or pn == 0 or qn == 0:
                e1 = np.zeros(spec.dim, dtype=complex)
                e1[0] = 1.0
                values.append(RankOne(1.0 + 0.0j, e1, e1.copy()))
            else:
                values.append(
                    RankOne(value.sigma / smag, value.p / pn, value.q / qn)
                )
        else:
            norm = np.linalg.norm(value)
            if norm == 0:
                mat = np.zeros((spec.dim, spec.dim), dtype=complex)
                mat[0, 0] = 1.0
                values.append(mat)
            else:
                values.append(value / norm)
    return Perturbation(delta.structure, tuple(values))


def rotate(delta: Perturbation, phase: complex) -> Perturbation:
    """Multiply every block by a unit-modulus complex number.

    Only valid for purely complex structures; the rotated perturbation
    has the same block norms.
    """
    if delta.structure.has_real_blocks:
        raise StructureError("cannot rotate a structure with real blocks")
    values = []
    for value in delta.blocks:
        if isinstance(value, RankOne):
            values.append(RankOne(value.sigma * phase, value.p, value.q))
        else:
            values.append(value * phase)
    return Perturbation(delta.structure, tuple(values))


def canonicalize_real(delta: Perturbation, tol: float = 1e-12) -> Perturbation:
    """Snap blocks that are real up to rounding noise to exactly real.

    The gradient flows conserve realness: started from real data on a
    real matrix, the exact dynamics never leave the real submanifold,
    but amplified rounding noise can.  Blocks whose imaginary content is
    below ``tol`` (for rank-one factors: after aligning the factor
    phases) are replaced by their real part; genuinely complex blocks
    are returned unchanged.
    """
    values = []
    changed = False
    for spec, value in zip(delta.structure.blocks, delta.blocks):
        if spec.kind is BlockKind.COMPLEX_SCALAR:
            if value.imag != 0 and abs(value.imag) <= tol * max(1.0, abs(value)):
                value = complex(value.real, 0.0)
                changed = True
        elif isinstance(value, RankOne):
            aligned = _align_rank_one_phases(value)
            if (abs(aligned.sigma.imag) <= tol
                    and np.abs(aligned.p.imag).max() <= tol
                    and np.abs(aligned.q.imag).max() <= tol):
                value = RankOne(complex(aligned.sigma.real, 0.0),
                                aligned.p.real.astype(complex),
                                aligned.q.real.astype(complex))
                changed = True
        elif isinstance(value, np.ndarray):
            if np.abs(value.imag).max() <= tol * max(1.0, np.abs(value).max()):
                if np.abs(value.imag).max() > 0:
                    value = value.real.astype(complex)
                    changed = True
        values.append(value)
    if not changed:
        return delta
    return Perturbation(delta.structure, tuple(values))


def _align_rank_one_phases(block: RankOne) -> RankOne:
    """Rotate rank-one factors so their largest entries are real positive."""
    p, q, sigma = block.p, block.q, block.sigma
    ip = int(np.argmax(np.abs(p)))
    iq = int(np.argmax(np.abs(q)))
    ph_p = p[ip] / abs(p[ip]) if abs(p[ip]) > 0 else 1.0
    ph_q = q[iq] / abs(q[iq]) if abs(q[iq]) > 0 else 1.0
    # sigma * p q^H is invariant under (sigma*ph_p*conj(ph_q), p/ph_p, q/ph_q)
    return RankOne(sigma * ph_p * np.conj(ph_q), p / ph_p, q / ph_q)


def densify(delta: Perturbation, indices=None) -> Perturbation:
    """Replace rank-one blocks by their dense expansion."""
    values = []
    for k, value in enumerate(delta.blocks):
        if isinstance(value, RankOne) and (indices is None or k in indices):
            values.append(value.dense())
        else:
            values.append(value)
    return Perturbation(delta.structure, tuple(values))


def random_unit_perturbation(structure: BlockStructure, rng=None) -> Perturbation:
    """Draw a random member of the unit-norm block set.

    Complex scalars are uniform on the unit circle, real scalars uniform
    on a slightly widened interval clamped to [-1, 1] (so the endpoints
    carry positive mass), and full blocks are random rank-one matrices
    with Haar-distributed unit factors.  The assembled matrix always has
    2-norm at most one.
    """
    rng = np.random.default_rng(rng)
    values = []
    for spec in structure.blocks:
        if spec.kind is BlockKind.COMPLEX_SCALAR:
            values.append(np.exp(1j * rng.uniform(0.0, 2.0 * np.pi)))
        elif spec.kind is BlockKind.REAL_SCALAR:
            values.append(float(np.clip(rng.uniform(-1.25, 1.25), -1.0, 1.0)))
        else:
            sigma = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
            values.append(
                RankOne(
                    sigma,
                    _random_unit_vector(rng, spec.dim),
                    _random_unit_vector(rng, spec.dim),
                )
            )
    return Perturbation(structure, tuple(values))


def _random_unit_vector(rng, m: int) -> np.ndarray:
    v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return v / np.linalg.norm(v)
