"""Rigid asymmetric-top eigenstructure.

The symmetric-top basis uses the I^r representation (a -> z, b -> x, c -> y),
so K is the projection on the a axis. Each (J, M) block is diagonalised in the
Wang basis, which splits it into the four D2 symmetry classes and keeps the
eigenvectors clean even in the symmetric-top limits.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .units import CM1_TO_MHZ

__all__ = [
    "Band",
    "Molecule",
    "RotState",
    "jblock_hamiltonian",
    "eigenstates",
    "assign_ka_kc",
    "d2_irrep",
    "load_molecule",
    "available_molecules",
    "MOLECULE_PATH_ENV",
]

MOLECULE_PATH_ENV = "CHIRALWAVE_MOLECULES"

IRREPS = ("A", "Ba", "Bb", "Bc")
# irrep <-> (Ka parity, Kc parity); the D2 product is XOR of the parities
_IRREP_PARITY = {"A": (0, 0), "Ba": (0, 1), "Bb": (1, 1), "Bc": (1, 0)}
_PARITY_IRREP = {v: k for k, v in _IRREP_PARITY.items()}


@dataclass(frozen=True)
class Band:
    """One vibrational state with its own rotational constants (MHz)."""

    name: str
    A: float
    B: float
    C: float
    origin: float = 0.0

    def __post_init__(self):
        _check_constants(self.A, self.B, self.C)


@dataclass(frozen=True)
class Molecule:
    """Rotational constants in MHz and body-frame dipole components in Debye.

    ``A, B, C`` and the permanent dipoles describe the ground band. Extra
    vibrational bands carry their own constants; ``transition_dipoles`` maps a
    ``(lower, upper)`` band pair to its (mu_a, mu_b, mu_c) transition moments.
    """

    name: str
    A: float
    B: float
    C: float
    mu_a: float = 0.0
    mu_b: float = 0.0
    mu_c: float = 0.0
    bands: tuple[Band, ...] = ()
    transition_dipoles: dict = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self):
        _check_constants(self.A, self.B, self.C)
        if min(self.mu_a, self.mu_b, self.mu_c) < 0:
            raise ValueError("dipole magnitudes must be non-negative")

    @property
    def dipoles(self) -> tuple[float, float, float]:
        return (self.mu_a, self.mu_b, self.mu_c)

    @property
    def band_names(self) -> tuple[str, ...]:
        return tuple(b.name for b in self.bands) or (None,)

    def band(self, name: str | None) -> Band:
        if name is None:
            if self.bands:
                return self.bands[0]
            return Band("ground", self.A, self.B, self.C)
        for b in self.bands:
            if b.name == name:
                return b
        raise KeyError(f"{self.name} has no band {name!r}")

    def dipole_between(self, band1: str | None, band2: str | None):
        """(mu_a, mu_b, mu_c) connecting two bands, or None when undeclared."""
        if band1 == band2 or not self.bands:
            return self.dipoles
        for key in ((band1, band2), (band2, band1)):
            if key in self.transition_dipoles:
                return tuple(self.transition_dipoles[key])
        return None


def _check_constants(A, B, C):
    if not all(math.isfinite(x) for x in (A, B, C)):
        raise ValueError("rotational constants must be finite")
    if not A >= B >= C > 0:
        raise ValueError(f"need A >= B >= C > 0, got {A}, {B}, {C}")


@dataclass(frozen=True)
class RotState:
    """Asymmetric-top eigenstate |J, tau, M>.

    ``coeffs[K + J]`` is the symmetric-top expansion coefficient for K.
    ``M`` is None for states returned by :func:`eigenstates`, which are shared
    by every M; use :meth:`with_m` to pin it.
    """

    J: int
    tau: int
    energy: float
    coeffs: tuple[float, ...]
    Ka: int
    Kc: int
    irrep: str
    M: int | None = None
    band: str | None = None
    molecule: str = ""

    def coeff(self, K: int) -> float:
        return self.coeffs[K + self.J] if abs(K) <= self.J else 0.0

    @property
    def coeff_map(self) -> dict[int, float]:
        return {K: c for K, c in zip(range(-self.J, self.J + 1), self.coeffs)}

    @property
    def label(self) -> str:
        return f"{self.J}_{self.Ka}{self.Kc}"

    def with_m(self, M: int) -> "RotState":
        if abs(M) > self.J:
            raise ValueError(f"|M| = {abs(M)} exceeds J = {self.J}")
        return replace(self, M=M)


def _offdiag(J: int, K: int) -> float:
    # <K+2| (J+^2 + J-^2)/4 |K> without the (B - C) factor
    jj = J * (J + 1)
    return 0.25 * math.sqrt(jj - K * (K + 1)) * math.sqrt(jj - (K + 1) * (K + 2))


def _block(A: float, B: float, C: float, J: int) -> np.ndarray:
    n = 2 * J + 1
    jj = J * (J + 1)
    h = np.zeros((n, n))
    for i, K in enumerate(range(-J, J + 1)):
        h[i, i] = 0.5 * (B + C) * (jj - K * K) + A * K * K
        if K + 2 <= J:
            h[i + 2, i] = h[i, i + 2] = (B - C) * _offdiag(J, K)
    return h


def jblock_hamiltonian(mol: Molecule, J: int, band: str | None = None) -> np.ndarray:
    """Rigid-rotor Hamiltonian for one J in the |J, K> basis, K = -J..J (MHz)."""
    if J < 0:
        raise ValueError("J must be non-negative")
    b = mol.band(band)
    return _block(b.A, b.B, b.C, J)


def _wang(J: int):
    """Orthogonal Wang transform and the (K parity, +/-) class of each column."""
    n = 2 * J + 1
    w = np.zeros((n, n))
    classes = []
    col = 0
    for K in range(0, J + 1):
        if K == 0:
            w[J, col] = 1.0
            classes.append((0, 1))
            col += 1
            continue
        for s in (1, -1):
            w[J + K, col] = 1 / math.sqrt(2)
            w[J - K, col] = s / math.sqrt(2)
            classes.append((K % 2, s))
            col += 1
    return w, classes


def _solve_classes(A, B, C, J):
    """Eigenpairs per Wang class: list of (energy, class, index, vector)."""
    h = _block(A, B, C, J)
    w, classes = _wang(J)
    hw = w.T @ h @ w
    out = []
    for cls in sorted(set(classes)):
        idx = [i for i, c in enumerate(classes) if c == cls]
        vals, vecs = np.linalg.eigh(hw[np.ix_(idx, idx)])
        if not np.all(np.isfinite(vals)):
            raise np.linalg.LinAlgError("non-finite eigenvalues; check rotational constants")
        for k in range(len(idx)):
            out.append((vals[k], cls, k, w[:, idx] @ vecs[:, k]))
    return out


def _fix_sign(v: np.ndarray) -> np.ndarray:
    mags = np.abs(v)
    top = mags.max()
    # first index (lowest K) within rounding of the largest magnitude
    i = int(np.flatnonzero(mags >= top * (1 - 1e-10))[0])
    return v if v[i] > 0 else -v


def assign_ka_kc(J: int, tau_rank: int) -> tuple[int, int]:
    """(Ka, Kc) of the tau_rank-th lowest level of a given J (1-based)."""
    if not 1 <= tau_rank <= 2 * J + 1:
        raise ValueError(f"tau_rank must lie in 1..{2 * J + 1}")
    return tau_rank // 2, J - (tau_rank - 1) // 2


def d2_irrep(Ka: int, Kc: int) -> str:
    """D2 irreducible representation from the parities of Ka and Kc."""
    if Ka < 0 or Kc < 0:
        raise ValueError("Ka and Kc must be non-negative")
    return _PARITY_IRREP[Ka % 2, Kc % 2]


def irrep_product(*irreps: str) -> str:
    pa = pb = 0
    for g in irreps:
        a, b = _IRREP_PARITY[g]
        pa ^= a
        pb ^= b
    return _PARITY_IRREP[pa, pb]


@lru_cache(maxsize=1024)
def _eigenstates_cached(A, B, C, origin, J, band, name):
    pairs = _solve_classes(A, B, C, J)
    # deterministic order for exact degeneracies: follow a slightly more
    # asymmetric top, which is how the Ka/Kc correlation is defined
    eta = 1e-7 * (A + B + C)
    shifted = {(cls, k): e for e, cls, k, _ in _solve_classes(A + 2 * eta, B, max(C - eta, C / 2), J)}
    tol = 1e-10 * (A + B + C) * max(1, J * (J + 1))
    pairs.sort(key=lambda p: p[0])
    groups, cur = [], [pairs[0]]
    for p in pairs[1:]:
        if p[0] - cur[-1][0] <= tol:
            cur.append(p)
        else:
            groups.append(cur)
            cur = [p]
    groups.append(cur)
    ordered = [p for g in groups for p in sorted(g, key=lambda p: shifted[p[1], p[2]])]

    states = []
    for rank, (e, _, _, vec) in enumerate(ordered, start=1):
        Ka, Kc = assign_ka_kc(J, rank)
        states.append(
            RotState(
                J=J,
                tau=rank,
                energy=float(e) + origin,
                coeffs=tuple(float(x) for x in _fix_sign(vec)),
                Ka=Ka,
                Kc=Kc,
                irrep=d2_irrep(Ka, Kc),
                band=band,
                molecule=name,
            )
        )
    return tuple(states)


def eigenstates(mol: Molecule, J: int, band: str | None = None) -> list[RotState]:
    """All 2J+1 asymmetric-top states of one J, ascending in energy (MHz)."""
    if J < 0:
        raise ValueError("J must be non-negative")
    b = mol.band(band)
    return list(_eigenstates_cached(b.A, b.B, b.C, b.origin, J, band, mol.name))


def find_state(mol: Molecule, label: str, band: str | None = None) -> RotState:
    """Look up a level by its J_KaKc label, e.g. ``"1_10"`` or ``"110"``."""
    J, Ka, Kc = parse_label(label)
    for s in eigenstates(mol, J, band):
        if (s.Ka, s.Kc) == (Ka, Kc):
            return s
    raise KeyError(f"no level {label} in {mol.name}")


def parse_label(label: str) -> tuple[int, int, int]:
    text = label.strip()
    if "_" in text:
        j, rest = text.split("_", 1)
        parts = rest.split(",") if "," in rest else list(rest)
        if len(parts) != 2:
            raise ValueError(f"cannot parse level label {label!r}")
        return int(j), int(parts[0]), int(parts[1])
    if len(text) == 3 and text.isdigit():
        return int(text[0]), int(text[1]), int(text[2])
    raise ValueError(f"cannot parse level label {label!r}")


# molecule database ---------------------------------------------------------

_UNIT_SCALE = {"mhz": 1.0, "ghz": 1e3, "cm-1": CM1_TO_MHZ}


def _to_mhz(value, unit: str) -> float:
    try:
        return float(value) * _UNIT_SCALE[unit.lower()]
    except KeyError:
        raise ValueError(f"unknown frequency unit {unit!r}; use MHz, GHz or cm-1") from None


def molecule_from_dict(data: dict) -> Molecule:
    unit = data.get("units", "MHz")
    dip = data.get("dipoles", {})
    bands = []
    for bd in data.get("bands", []):
        bunit = bd.get("units", unit)
        bands.append(
            Band(
                name=str(bd["name"]),
                A=_to_mhz(bd["A"], bunit),
                B=_to_mhz(bd["B"], bunit),
                C=_to_mhz(bd["C"], bunit),
                origin=_to_mhz(bd.get("origin", 0.0), bunit),
            )
        )
    if bands:
        A, B, C = bands[0].A, bands[0].B, bands[0].C
    else:
        A, B, C = (_to_mhz(data[k], unit) for k in "ABC")
    tdm = {}
    for td in data.get("transition_dipoles", []):
        tdm[td["lower"], td["upper"]] = (
            float(td.get("mu_a", 0.0)),
            float(td.get("mu_b", 0.0)),
            float(td.get("mu_c", 0.0)),
        )
    return Molecule(
        name=str(data["name"]),
        A=A,
        B=B,
        C=C,
        mu_a=float(dip.get("mu_a", 0.0)),
        mu_b=float(dip.get("mu_b", 0.0)),
        mu_c=float(dip.get("mu_c", 0.0)),
        bands=tuple(bands),
        transition_dipoles=tdm,
    )


def _search_dirs() -> list[Path]:
    dirs = []
    env = os.environ.get(MOLECULE_PATH_ENV)
    if env:
        dirs.extend(Path(p) for p in env.split(os.pathsep) if p)
    dirs.append(Path(str(resources.files("chiralwave") / "data" / "molecules")))
    return dirs


def available_molecules() -> list[str]:
    names = set()
    for d in _search_dirs():
        if d.is_dir():
            names.update(p.stem for p in d.glob("*.yaml"))
    return sorted(names)


def load_molecule(name_or_path: str | os.PathLike) -> Molecule:
    """Load a molecule by database name or from a YAML file path."""
    path = Path(name_or_path)
    if path.suffix in (".yaml", ".yml") and path.is_file():
        with open(path) as fh:
            return molecule_from_dict(yaml.safe_load(fh))
    for d in _search_dirs():
        candidate = d / f"{str(name_or_path).lower()}.yaml"
        if candidate.is_file():
            with open(candidate) as fh:
                return molecule_from_dict(yaml.safe_load(fh))
    raise KeyError(f"unknown molecule {name_or_path!r}; known: {', '.join(available_molecules())}")
