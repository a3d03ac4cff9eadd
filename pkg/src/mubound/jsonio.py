"""JSON schemas for matrices, perturbations, and certificates.

Matrix files look like ``{"n": 3, "re": [[...]], "im": [[...]]}`` with
row-major ``n x n`` arrays; ``"im"`` is optional and defaults to zero.
Perturbations serialize one object per block; complex numbers are
``{"re": ..., "im": ...}`` pairs.  Rank-one full blocks keep their
factors (``sigma``, ``p``, ``q``) and always carry a redundant dense
expansion so third-party tools can check certificates without this
package.
"""

from __future__ import annotations

import numpy as np

from .blocks import (
    BlockKind,
    BlockStructure,
    Perturbation,
    RankOne,
    parse_structure,
)
from .errors import StructureError


def complex_to_json(value) -> dict:
    value = complex(value)
    return {"re": value.real, "im": value.imag}


def complex_from_json(obj) -> complex:
    if isinstance(obj, dict):
        return complex(float(obj.get("re", 0.0)), float(obj.get("im", 0.0)))
    return complex(obj)


def vector_to_json(v) -> list:
    return [complex_to_json(z) for z in np.asarray(v).ravel()]


def vector_from_json(items) -> np.ndarray:
    return np.array([complex_from_json(z) for z in items], dtype=complex)


def matrix_entries_to_json(M) -> dict:
    M = np.asarray(M, dtype=complex)
    return {
        "n": M.shape[0],
        "re": M.real.tolist(),
        "im": M.imag.tolist(),
    }


def matrix_from_json(obj) -> np.ndarray:
    if not isinstance(obj, dict) or "re" not in obj:
        raise StructureError('matrix JSON must contain "re"')
    re = np.asarray(obj["re"], dtype=float)
    if re.ndim != 2 or re.shape[0] != re.shape[1]:
        raise StructureError(f"matrix real part must be square, got {re.shape}")
    n = int(obj.get("n", re.shape[0]))
    if re.shape != (n, n):
        raise StructureError(f'matrix shape {re.shape} does not match "n"={n}')
    im = obj.get("im")
    if im is None:
        return re.astype(complex)
    im = np.asarray(im, dtype=float)
    if im.shape != (n, n):
        raise StructureError(f"matrix imaginary part has shape {im.shape}")
    return re + 1j * im


def delta_to_json(delta: Perturbation) -> dict:
    blocks = []
    for spec, value in zip(delta.structure.blocks, delta.blocks):
        entry = {"kind": spec.kind.value, "dim": spec.dim}
        if spec.kind is BlockKind.COMPLEX_SCALAR:
            entry["value"] = complex_to_json(value)
        elif spec.kind is BlockKind.REAL_SCALAR:
            entry["value"] = float(value)
        else:
            if isinstance(value, RankOne):
                entry["sigma"] = complex_to_json(value.sigma)
                entry["p"] = vector_to_json(value.p)
                entry["q"] = vector_to_json(value.q)
                dense = value.dense()
            else:
                dense = np.asarray(value)
            entry["dense"] = [
                [complex_to_json(z) for z in row] for row in dense
            ]
        blocks.append(entry)
    return {"structure": delta.structure.to_dsl(), "blocks": blocks}


def delta_from_json(obj, structure: BlockStructure | None = None) -> Perturbation:
    if not isinstance(obj, dict) or "blocks" not in obj:
        raise StructureError('perturbation JSON must contain "blocks"')
    declared = obj.get("structure")
    if structure is None:
        if declared is None:
            raise StructureError(
                'perturbation JSON must declare its "structure"'
            )
        structure = parse_structure(declared)
    elif declared is not None and parse_structure(declared) != structure:
        raise StructureError(
            f"perturbation structure {declared!r} does not match "
            f"{structure.to_dsl()!r}"
        )
    entries = obj["blocks"]
    if len(entries) != structure.num_blocks:
        raise StructureError(
            f"expected {structure.num_blocks} blocks, got {len(entries)}"
        )
    values = []
    for spec, entry in zip(structure.blocks, entries):
        kind = entry.get("kind")
        if kind != spec.kind.value:
            raise StructureError(
                f"block kind {kind!r} does not match structure "
                f"({spec.kind.value!r})"
            )
        if spec.kind is BlockKind.COMPLEX_SCALAR:
            values.append(complex_from_json(entry["value"]))
        elif spec.kind is BlockKind.REAL_SCALAR:
            values.append(float(entry["value"]))
        elif "sigma" in entry:
            values.append(RankOne(
                complex_from_json(entry["sigma"]),
                vector_from_json(entry["p"]),
                vector_from_json(entry["q"]),
            ))
        elif "dense" in entry:
            rows = [[complex_from_json(z) for z in row]
                    for row in entry["dense"]]
            values.append(np.asarray(rows, dtype=complex))
        else:
            raise StructureError("full block needs rank-one factors or a "
                                 "dense matrix")
    return Perturbation(structure, tuple(values))


def certificate_to_json(cert) -> dict:
    return {
        "lower_bound": cert.lower_bound,
        "eps_f": cert.eps_f,
        "residual": cert.residual,
        "verified": cert.verified,
        "mode": cert.mode,
        "delta": delta_to_json(cert.delta_star),
        "history": [
            {"eps": it.eps, "objective": it.objective, "step": it.step}
            for it in cert.history
        ],
    }
