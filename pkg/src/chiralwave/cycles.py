"""Three-level cycles in a rotational ladder and their enantio-selectivity.

A candidate is a triangle of levels plus one polarization per leg. Selection
is decided from symmetry (dipole types, polarizations and the M-reflection
signs of each leg) and cross-checked by summing the cycle products over every
closed M path for both enantiomers.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .angular import sigma_of_m_reflection, wigner3j
from .coupling import MINUS, PLUS, POLARIZATIONS, Enantiomer, level_block, transition_types
from .rotor import Molecule, RotState, eigenstates

__all__ = [
    "Leg",
    "CycleCandidate",
    "make_candidate",
    "enumerate_cycles",
    "classify",
    "m_path_products",
    "verify_by_m_average",
    "m_average_is_selective",
    "cycle_report",
    "SELECTIVE",
    "NON_SELECTIVE",
    "FORBIDDEN",
]

SELECTIVE = "selective"
NON_SELECTIVE = "non-selective"
FORBIDDEN = "forbidden"

# leg order used everywhere: (1,2), (1,3), (2,3)
_PAIRS = ((0, 1), (0, 2), (1, 2))
_Q = {"z": (0,), "x": (-1, 1), "y": (-1, 1)}
REL_THRESHOLD = 1e-10


@dataclass(frozen=True)
class Leg:
    pair: tuple[int, int]
    polarization: str
    delta_j: int
    types: frozenset
    sigma: int


@dataclass(frozen=True)
class CycleCandidate:
    levels: tuple[RotState, RotState, RotState]
    legs: tuple[Leg, Leg, Leg]
    verdict: str = ""

    @property
    def labels(self) -> tuple[str, str, str]:
        return tuple(s.label for s in self.levels)

    @property
    def polarizations(self) -> tuple[str, str, str]:
        return tuple(leg.polarization for leg in self.legs)

    @property
    def types(self) -> frozenset:
        return frozenset().union(*(leg.types for leg in self.legs))

    @property
    def j_pattern(self) -> str:
        js = sorted(s.J for s in self.levels)
        return "equal" if js[0] == js[2] else "mixed"

    def __str__(self):
        legs = " ".join(f"{leg.polarization}{''.join(sorted(leg.types))}" for leg in self.legs)
        return f"{'-'.join(self.labels)} [{legs}] {self.verdict}"


def make_candidate(mol: Molecule, states, pols) -> CycleCandidate:
    """Candidate for levels ``states`` with polarizations for legs (12, 13, 23)."""
    states = tuple(states)
    if len(states) != 3 or len(pols) != 3:
        raise ValueError("a cycle needs three levels and three polarizations")
    legs = []
    for (i, j), pol in zip(_PAIRS, pols):
        if pol not in POLARIZATIONS:
            raise ValueError(f"unknown polarization {pol!r}")
        a, b = states[i], states[j]
        dj = b.J - a.J
        if abs(dj) > 1:
            raise ValueError(f"levels {a.label} and {b.label} differ by more than one J")
        types = frozenset(t for t in transition_types(a, b) if _dipole_of(mol, a, b, t))
        legs.append(Leg((i, j), pol, dj, types, sigma_of_m_reflection(dj, pol)))
    cand = CycleCandidate(states, tuple(legs))
    return CycleCandidate(states, cand.legs, classify(cand))


def _dipole_of(mol, a, b, t):
    mu = mol.dipole_between(a.band, b.band)
    return mu is not None and mu["abc".index(t)] != 0.0


def _leg_allowed(mol, a, b) -> bool:
    if abs(a.J - b.J) > 1:
        return False
    return any(_dipole_of(mol, a, b, t) for t in transition_types(a, b))


def enumerate_cycles(mol: Molecule, Jmax: int, band: str | None = "all") -> list[CycleCandidate]:
    """Every dipole-connected level triangle up to ``Jmax``, times all 27 polarization triples.

    ``band="all"`` takes levels from every vibrational band, so triangles may
    mix permanent and transition dipoles.
    """
    if Jmax < 1:
        raise ValueError("Jmax must be at least 1")
    bands = mol.band_names if band == "all" else (band,)
    levels = [s for b in bands for J in range(Jmax + 1) for s in eigenstates(mol, J, b)]
    out = []
    for tri in combinations(levels, 3):
        if not all(_leg_allowed(mol, tri[i], tri[j]) for i, j in _PAIRS):
            continue
        for pols in product(POLARIZATIONS, repeat=3):
            out.append(make_candidate(mol, tri, pols))
    return out


def _m_factor(Ja, Ma, Jb, Mb, pol) -> bool:
    # M-dependent 3j factor of <Ja Ma| D^1_{q.} |Jb Mb>
    q = Ma - Mb
    if q not in _Q[pol]:
        return False
    return abs(wigner3j(Jb, 1, Ja, Mb, q, -Ma)) > 1e-14


def _closes(cand: CycleCandidate) -> bool:
    (s1, s2, s3), (l12, l13, l23) = cand.levels, cand.legs
    for M1 in range(-s1.J, s1.J + 1):
        for M2 in range(-s2.J, s2.J + 1):
            if not _m_factor(s1.J, M1, s2.J, M2, l12.polarization):
                continue
            for M3 in range(-s3.J, s3.J + 1):
                if _m_factor(s2.J, M2, s3.J, M3, l23.polarization) and _m_factor(
                    s1.J, M1, s3.J, M3, l13.polarization
                ):
                    return True
    return False


def classify(cand: CycleCandidate) -> str:
    """Symmetry verdict: selective, non-selective, or forbidden (no closed M path)."""
    if any(not leg.types for leg in cand.legs) or not _closes(cand):
        return FORBIDDEN
    if cand.types != frozenset("abc"):
        return NON_SELECTIVE
    if set(cand.polarizations) != set(POLARIZATIONS):
        return NON_SELECTIVE
    flips = sum(1 for leg in cand.legs if leg.sigma == -1)
    return SELECTIVE if flips % 2 == 0 else NON_SELECTIVE


def _blocks(mol, en, cand):
    s = cand.levels
    p12, p13, p23 = cand.polarizations
    v12 = level_block(mol, en, s[0], s[1], p12)
    v23 = level_block(mol, en, s[1], s[2], p23)
    v31 = level_block(mol, en, s[2], s[0], p13)
    return v12, v23, v31


def m_path_products(mol: Molecule, en: Enantiomer, cand: CycleCandidate) -> dict:
    """Nonzero products H12 H23 H31 keyed by the (M1, M2, M3) path."""
    v12, v23, v31 = _blocks(mol, en, cand)
    J1, J2, J3 = (s.J for s in cand.levels)
    out = {}
    for i, j, k in product(range(2 * J1 + 1), range(2 * J2 + 1), range(2 * J3 + 1)):
        val = v12[i, j] * v23[j, k] * v31[k, i]
        if abs(val) > 0:
            out[i - J1, j - J2, k - J3] = complex(val)
    return out


def _traces(mol, cand):
    sums = []
    for en in (PLUS, MINUS):
        v12, v23, v31 = _blocks(mol, en, cand)
        sums.append(np.trace(v12 @ v23 @ v31))
    unsigned = np.trace(np.abs(v12) @ np.abs(v23) @ np.abs(v31))
    return sums[0], sums[1], float(unsigned)


def verify_by_m_average(mol: Molecule, cand: CycleCandidate) -> float:
    """|S(+) - S(-)| where S is the cycle product summed over all M paths."""
    sp, sm, _ = _traces(mol, cand)
    return float(abs(sp - sm))


def m_average_is_selective(mol: Molecule, cand: CycleCandidate, threshold: float = REL_THRESHOLD) -> bool:
    sp, sm, unsigned = _traces(mol, cand)
    if unsigned == 0:
        return False
    return abs(sp - sm) > threshold * unsigned


def cycle_report(mol: Molecule, cands, fmt: str = "csv") -> str:
    """Tabular listing of candidates with their verdict and M-summed difference."""
    header = ["levels", "polarizations", "types", "sigma", "verdict", "m_average"]
    rows = []
    for c in cands:
        rows.append(
            [
                "-".join(c.labels),
                "".join(c.polarizations),
                "/".join("".join(sorted(leg.types)) or "-" for leg in c.legs),
                "".join("+" if leg.sigma > 0 else "-" for leg in c.legs),
                c.verdict,
                format(verify_by_m_average(mol, c), ".12g"),
            ]
        )
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    if fmt != "text":
        raise ValueError("report format must be 'csv' or 'text'")
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    lines = ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in [header, *rows]]
    return "\n".join(lines) + "\n"
