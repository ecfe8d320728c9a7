"""Polarization-resolved dipole couplings between asymmetric-top states.

The space-fixed dipole component along x, y or z is expanded in D^1_{MK}
elements with the body-frame components mu_a, mu_b, mu_c. The two
enantiomers differ only in the sign of mu_c.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .angular import AngularIndex, symtop_element
from .rotor import Molecule, RotState, irrep_product

__all__ = [
    "Enantiomer",
    "PLUS",
    "MINUS",
    "PolarizedElement",
    "transition_element",
    "transition_types",
    "level_block",
    "cycle_product",
    "loop_product",
    "POLARIZATIONS",
]

POLARIZATIONS = ("x", "y", "z")
TYPES = ("a", "b", "c")
_TYPE_OF_IRREP = {"Ba": "a", "Bb": "b", "Bc": "c"}


@dataclass(frozen=True)
class Enantiomer:
    sign: int

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("enantiomer sign must be +1 or -1")

    @property
    def other(self) -> "Enantiomer":
        return Enantiomer(-self.sign)

    def __str__(self):
        return "+" if self.sign > 0 else "-"


PLUS = Enantiomer(1)
MINUS = Enantiomer(-1)

_R2 = 1 / math.sqrt(2)
# (M, K) -> coefficient of D^1_{MK} multiplying each body-frame component;
# the c entries are for the (+) enantiomer
_OPERATOR = {
    "z": {
        "a": {(0, 0): 1.0},
        "b": {(0, 1): -_R2, (0, -1): _R2},
        "c": {(0, 1): 1j * _R2, (0, -1): 1j * _R2},
    },
    "x": {
        "a": {(-1, 0): _R2, (1, 0): -_R2},
        "b": {(1, 1): 0.5, (1, -1): -0.5, (-1, 1): -0.5, (-1, -1): 0.5},
        "c": {(1, 1): -0.5j, (1, -1): -0.5j, (-1, 1): 0.5j, (-1, -1): 0.5j},
    },
    "y": {
        "a": {(-1, 0): -1j * _R2, (1, 0): -1j * _R2},
        "b": {(1, 1): 0.5j, (1, -1): -0.5j, (-1, 1): 0.5j, (-1, -1): -0.5j},
        "c": {(1, 1): 0.5, (1, -1): 0.5, (-1, 1): 0.5, (-1, -1): 0.5},
    },
}


@dataclass(frozen=True)
class PolarizedElement:
    """Interaction matrix element per unit field amplitude (Debye)."""

    value: complex
    polarization: str
    contributing_types: frozenset


@lru_cache(maxsize=None)
def _angular_parts(bra_J, bra_coeffs, bra_M, ket_J, ket_coeffs, ket_M, pol):
    """Unit-dipole element of each body-frame component (a, b, c)."""
    out = []
    for t in TYPES:
        total = 0j
        for (M, K), w in _OPERATOR[pol][t].items():
            if bra_M != ket_M + M:
                continue
            for Kp in range(-ket_J, ket_J + 1):
                Kpp = Kp + K
                if abs(Kpp) > bra_J:
                    continue
                c2 = bra_coeffs[Kpp + bra_J] * ket_coeffs[Kp + ket_J]
                if c2 == 0.0:
                    continue
                d = symtop_element(
                    AngularIndex(bra_J, Kpp, bra_M), M, K, AngularIndex(ket_J, Kp, ket_M)
                )
                total += w * c2 * d
        out.append(total)
    return tuple(out)


def _dipoles(mol: Molecule, bra: RotState, ket: RotState):
    if bra.molecule and ket.molecule and bra.molecule != ket.molecule:
        raise ValueError(f"states belong to different molecules: {bra.molecule} / {ket.molecule}")
    mu = mol.dipole_between(bra.band, ket.band)
    if mu is None:
        raise ValueError(f"no transition dipole declared between bands {bra.band} and {ket.band}")
    return mu


def transition_element(
    mol: Molecule, en: Enantiomer, bra: RotState, ket: RotState, pol: str
) -> PolarizedElement:
    """-<bra| mu . e_pol |ket> for states with explicit M."""
    if pol not in POLARIZATIONS:
        raise ValueError(f"unknown polarization {pol!r}")
    if bra.M is None or ket.M is None:
        raise ValueError("transition_element needs states with explicit M")
    mu = _dipoles(mol, bra, ket)
    if abs(bra.J - ket.J) > 1:
        return PolarizedElement(0j, pol, frozenset())
    parts = _angular_parts(bra.J, bra.coeffs, bra.M, ket.J, ket.coeffs, ket.M, pol)
    signs = (1, 1, en.sign)
    value = 0j
    types = set()
    for t, part, m, s in zip(TYPES, parts, mu, signs):
        contrib = s * m * part
        if abs(contrib) > 1e-13 * max(1.0, m):
            types.add(t)
        value += contrib
    return PolarizedElement(-value, pol, frozenset(types))


def transition_types(bra: RotState, ket: RotState) -> frozenset:
    """Dipole components able to connect two states, from D2 symmetry alone."""
    if abs(bra.J - ket.J) > 1 or (bra.J == 0 and ket.J == 0):
        return frozenset()
    prod = irrep_product(bra.irrep, ket.irrep)
    return frozenset(_TYPE_OF_IRREP.get(prod, ""))


def level_block(mol: Molecule, en: Enantiomer, bra: RotState, ket: RotState, pol: str) -> np.ndarray:
    """All M-resolved elements between two levels, rows M'' and columns M' ascending."""
    out = np.zeros((2 * bra.J + 1, 2 * ket.J + 1), dtype=complex)
    if abs(bra.J - ket.J) > 1:
        _dipoles(mol, bra, ket)
        return out
    shift = {"z": (0,), "x": (-1, 1), "y": (-1, 1)}[pol]
    for Mp in range(-ket.J, ket.J + 1):
        for dM in shift:
            Mpp = Mp + dM
            if abs(Mpp) > bra.J:
                continue
            el = transition_element(mol, en, bra.with_m(Mpp), ket.with_m(Mp), pol)
            out[Mpp + bra.J, Mp + ket.J] = el.value
    return out


def loop_product(h12: complex, h13: complex, h23: complex) -> complex:
    """Gauge-invariant product H12 * H23 * H31 around a three-level loop."""
    return h12 * h23 * np.conj(h13)


def cycle_product(
    mol: Molecule,
    en: Enantiomer,
    states: tuple[RotState, RotState, RotState],
    pols: tuple[str, str, str],
) -> complex:
    """Product of the three couplings of a closed cycle 1 -> 2 -> 3 -> 1.

    ``pols`` gives the polarizations of the legs (12, 13, 23).
    """
    s1, s2, s3 = states
    p12, p13, p23 = pols
    h12 = transition_element(mol, en, s1, s2, p12).value
    h13 = transition_element(mol, en, s1, s3, p13).value
    h23 = transition_element(mol, en, s2, s3, p23).value
    if 0 in (h12, h13, h23) or min(abs(h12), abs(h13), abs(h23)) < 1e-14:
        warnings.warn("a leg of the cycle vanishes; the cycle cannot close", RuntimeWarning, stacklevel=2)
    return complex(loop_product(h12, h13, h23))
