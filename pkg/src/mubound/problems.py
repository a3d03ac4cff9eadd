"""Built-in benchmark problems with reference values.

Six small problems with known reference lower bounds, used by the
regression tests and the ``selftest`` command.  Reference perturbations
(where available) double as fixtures for the certificate checker.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocks import Perturbation, RankOne, parse_structure


@dataclass(frozen=True)
class Problem:
    """One benchmark instance.

    ``check`` is ``"two_sided"`` when the solver is expected to
    reproduce the reference bound to ``bound_rtol``, or ``"at_least"``
    when any bound >= reference*(1 - bound_rtol) passes (the reference
    is itself a lower bound of the true value).
    """

    name: str
    description: str
    structure: str
    matrix: np.ndarray
    reference_bound: float
    reference_eps: float
    bound_rtol: float
    check: str = "two_sided"
    eps0: float | None = None
    init_delta: Perturbation | None = None
    reference_trajectory: tuple[float, ...] | None = None


def _c(re, im=0.0):
    return complex(re, im)


MIXED3_MATRIX = np.array([
    [-1 + 1j,  1 - 1j, -1 + 1j],
    [-1 + 1j, -1 + 0j,  0 + 1j],
    [0 + 1j,  -1 - 1j,  1 - 1j],
], dtype=complex)

#: known extremal perturbation of ``mixed3`` (unit-norm blocks)
MIXED3_EXTREMIZER_BLOCKS = (-1.0, _c(-0.989237164, -0.146320991))
MIXED3_EPS = 0.445238645

COMPLEX5_MATRIX = np.array([
    [-0.10 - 0.55j, -0.57 - 1.59j, -1.34 - 1.70j,  0.04 + 0.49j, -0.18 + 0.19j],
    [-1.48 - 2.17j,  0.58 + 1.17j,  0.05 + 0.53j,  0.11 - 0.42j,  0.26 + 1.19j],
    [-0.53 + 0.59j,  0.78 - 1.48j,  0.15 + 0.00j, -0.25 + 1.46j,  0.33 + 1.32j],
    [ 0.24 + 0.79j, -0.12 - 0.65j,  1.79 - 0.09j, -0.63 + 1.39j, -0.88 + 0.10j],
    [-2.03 + 1.33j, -1.22 - 0.22j,  0.45 - 1.49j,  0.94 - 0.13j, -1.02 + 2.33j],
], dtype=complex)

MIXED5_MATRIX = np.array([
    [-1.54 - 1.28j, -0.56 + 0.57j, -0.03 - 0.63j, -0.64 - 0.55j,  0.46 - 0.22j],
    [-1.08 + 1.91j,  1.16 - 0.08j, -0.41 - 0.13j,  0.04 - 0.06j, -0.01 - 0.71j],
    [ 0.11 - 2.16j,  0.53 + 0.79j, -0.33 + 0.26j,  0.44 + 0.02j,  0.20 + 0.96j],
    [ 0.52 + 0.29j,  2.38 + 0.09j, -0.03 + 0.06j,  0.01 + 1.12j,  0.51 - 0.77j],
    [-1.30 + 0.34j, -1.72 + 0.14j,  1.02 + 1.34j,  0.35 - 0.75j,  0.48 + 0.04j],
], dtype=complex)

#: a known certificate for ``mixed5`` at its critical level
MIXED5_KNOWN_BLOCKS = (
    -1.0,
    1.0,
    np.exp(-1j * 0.91357833),
    np.exp(-1j * 2.076961991),
)
MIXED5_EPS = 0.30300829

NEWTON5_MATRIX = np.array([
    [0 + 1j,      0.5 - 0.5j,  1 + 0j,       1 + 0j,       0.5 + 0j],
    [0.5 + 0j,   -0.5 + 0j,    0 + 1j,       0 + 1j,       0.5 - 0.5j],
    [0 + 1j,      1 - 0.5j,    1 + 0j,       0.5 + 0j,     0 + 0j],
    [-0.5 + 0j,   0.5 + 1j,   -0.5 + 0.5j,   1 + 0.5j,     0.5 - 0.5j],
    [0.5 + 1j,    0.5 + 0.5j,  0 + 0j,      -0.5 - 0.5j,   0.5 - 0.5j],
], dtype=complex)

NEWTON10_MATRIX = np.array([
    [-0.43,  0.90, -0.61,  1.03,  0.98,  2.00,  0.05,  0.14,  0.86,  0.02],
    [-0.17, -1.84, -1.22, -0.35, -0.30,  0.95,  1.75, -1.64,  0.11, -0.05],
    [-0.22,  0.07,  0.32,  1.01,  1.14, -0.43,  0.16, -0.76,  0.40,  1.70],
    [ 0.54,  0.04, -1.34,  0.63, -0.53,  0.65, -1.24, -0.82,  0.88, -0.51],
    [ 0.39,  2.23, -1.03, -0.21,  0.97, -0.36, -2.19,  0.52,  0.18,  0.00],
    [ 0.75, -0.07,  1.33, -0.87, -0.52,  0.71, -0.33, -0.01,  0.55,  0.92],
    [ 1.78, -0.51, -0.42, -1.04,  0.18,  1.42,  0.71, -1.16,  0.68,  0.15],
    [ 1.22,  0.24, -0.14, -0.27,  0.97, -1.60,  0.32, -0.01,  1.17,  1.40],
    [-1.28,  0.25,  0.90, -0.44, -0.41,  1.03,  0.41, -0.69,  0.48,  1.03],
    [-2.33,  0.07, -0.30, -0.41, -0.44,  1.46, -0.58, -0.67,  1.41,  0.29],
], dtype=complex)

#: externally computed reference certificate for ``newton10``
NEWTON10_KNOWN_EPS = 0.23674574
NEWTON10_KNOWN_U = np.array(
    [0.93916167, 0.06094908, -0.22409849, 0.25285464, -0.01024501])
NEWTON10_KNOWN_V = np.array(
    [0.21233474, 0.27182946, -0.57210258, 0.41515717, 0.61754828])

WARMSTART10_MATRIX = np.array([
    [-1 + 1j,  0 + 0j, -1 - 2j, -1 + 0j,  1 + 0j,  0 - 2j,  1 + 1j,  1 + 0j,  0 + 0j,  2 - 1j],
    [ 0 + 1j,  1 + 0j,  1 + 0j,  1 + 0j, -1 + 1j,  1 + 1j, -1 + 1j,  1 + 0j,  0 - 1j,  2 + 0j],
    [ 0 + 1j,  0 + 0j,  0 + 0j,  0 + 1j,  0 + 0j,  0 - 2j, -1 + 1j, -1 + 1j, -1 - 1j, -2 - 1j],
    [ 0 + 1j, -4 + 0j,  0 + 0j,  1 + 0j,  1 + 0j, -1 + 1j, -1 + 2j,  0 - 1j,  0 + 2j,  3 - 1j],
    [ 0 + 0j,  0 - 1j, -1 + 1j,  0 + 2j, -1 + 2j, -2 + 2j,  1 + 1j,  2 - 1j,  1 + 1j,  1 - 1j],
    [-2 + 0j,  0 - 1j,  1 + 1j, -1 - 1j,  0 - 1j,  0 - 2j,  0 - 1j, -1 - 1j, -1 - 1j,  0 + 0j],
    [ 1 + 0j,  1 - 1j,  1 - 1j,  0 + 0j, -1 - 1j, -1 + 0j,  0 + 0j,  1 + 0j,  0 - 1j,  0 + 2j],
    [-1 + 0j,  0 + 2j, -2 + 1j,  1 + 0j,  1 - 1j,  1 + 0j,  0 + 0j,  1 + 1j,  0 - 2j,  1 - 1j],
    [-1 - 2j,  0 - 1j, -1 + 1j, -1 - 2j,  0 + 1j,  0 + 0j, -1 - 1j,  0 + 0j,  1 + 0j,  0 + 1j],
    [ 0 - 2j,  0 + 0j,  1 + 1j, -1 + 1j,  0 - 1j,  0 + 0j,  0 + 1j, -2 - 1j,  0 + 0j,  0 + 1j],
], dtype=complex)

#: suboptimal external perturbation used to warm start ``warmstart10``
WARMSTART10_INIT_FULL = np.array([
    [ 0.01622800 - 0.44875053j,  0.33074886 - 0.68259094j],
    [-0.10388720 - 0.21700229j, -0.01277064 - 0.40618809j],
])
WARMSTART10_INIT_SCALARS = (0.37144260, -0.25823740)


def _build_problems():
    problems = {}

    problems["mixed3"] = Problem(
        name="mixed3",
        description="3x3 with one repeated real scalar and a 1x1 full block",
        structure="rs:2,cf:1",
        matrix=MIXED3_MATRIX,
        reference_bound=2.2459865301,
        reference_eps=0.445238645,
        bound_rtol=1e-4,
    )

    problems["complex5"] = Problem(
        name="complex5",
        description="5x5 purely complex, three scalars around a 2x2 full block",
        structure="cs:1,cs:1,cf:2,cs:1",
        matrix=COMPLEX5_MATRIX,
        reference_bound=4.484405922,
        reference_eps=0.222994978,
        bound_rtol=1e-3,
        check="at_least",
    )

    problems["mixed5"] = Problem(
        name="mixed5",
        description="5x5 with two real scalars and two complex scalars",
        structure="rs:1,rs:1,cs:1,cs:2",
        matrix=MIXED5_MATRIX,
        reference_bound=3.300239739,
        reference_eps=0.30300829,
        bound_rtol=1e-4,
    )

    problems["newton5"] = Problem(
        name="newton5",
        description="5x5 with a repeated real scalar and a 2x2 full block",
        structure="rs:3,cf:2",
        matrix=NEWTON5_MATRIX,
        reference_bound=2.101113160408110,
        reference_eps=0.475938192594,
        bound_rtol=1e-6,
        eps0=0.321154624817,
        reference_trajectory=(0.321154624817, 0.475935094375,
                              0.475938192593, 0.475938192594),
    )

    problems["newton10"] = Problem(
        name="newton10",
        description="10x10 real matrix, mixed scalars plus a 5x5 full block",
        structure="rs:1,rs:1,cs:1,cs:2,cf:5",
        matrix=NEWTON10_MATRIX,
        reference_bound=4.38636196596,
        reference_eps=0.227979361429,
        bound_rtol=1e-6,
        eps0=0.201123467713,
        reference_trajectory=(0.201123467713, 0.227979361395,
                              0.227979361429),
    )

    structure = parse_structure("cf:2,rs:4,rs:4")
    init_delta = Perturbation(structure, (
        WARMSTART10_INIT_FULL,
        WARMSTART10_INIT_SCALARS[0],
        WARMSTART10_INIT_SCALARS[1],
    ))
    problems["warmstart10"] = Problem(
        name="warmstart10",
        description="10x10 warm started from a suboptimal external certificate",
        structure="cf:2,rs:4,rs:4",
        matrix=WARMSTART10_MATRIX,
        reference_bound=4.259161456,
        reference_eps=0.23478601,
        bound_rtol=1e-3,
        eps0=0.23,
        init_delta=init_delta,
    )
    return problems


PROBLEMS = _build_problems()


def mixed3_extremizer() -> Perturbation:
    """Known extremal perturbation of the ``mixed3`` problem."""
    structure = parse_structure("rs:2,cf:1")
    return Perturbation(structure, (
        MIXED3_EXTREMIZER_BLOCKS[0],
        np.array([[MIXED3_EXTREMIZER_BLOCKS[1]]]),
    ))


def mixed5_known_certificate() -> Perturbation:
    """Known extremal perturbation of the ``mixed5`` problem."""
    structure = parse_structure("rs:1,rs:1,cs:1,cs:2")
    return Perturbation(structure, MIXED5_KNOWN_BLOCKS)


def newton10_known_certificate() -> Perturbation:
    """Externally computed (suboptimal) certificate for ``newton10``."""
    structure = parse_structure("rs:1,rs:1,cs:1,cs:2,cf:5")
    return Perturbation(structure, (
        -1.0, -1.0, complex(-1.0), complex(1.0),
        RankOne(1.0 + 0.0j, NEWTON10_KNOWN_U.astype(complex),
                NEWTON10_KNOWN_V.astype(complex)),
    ))
