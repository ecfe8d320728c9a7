"""M-degenerate simulations of real molecules driven by three polarized fields.

Units: time in t0 = 1 / B (B in Hz, taken from the ground band), energies and
couplings as angular frequencies in 1/t0. A field of intensity I couples a
pair of sublevels through -mu_ab * eps / 2 in the rotating-wave picture, with
the residual detuning of every off-resonant pair kept as an explicit phase.

Populations are summed over the M sublevels of each level and averaged over
the M of the initial level, so every enantiomer starts and ends with total
population 1.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from scipy import constants

from .coupling import MINUS, PLUS, Enantiomer, level_block
from .rotor import Molecule, RotState, find_state, load_molecule, molecule_from_dict, parse_label
from .threewave import (
    SHAPES,
    SIMULTANEOUS_TRANSFER_AREA,
    PropagationError,
    chirp_phase,
    envelope_area,
    envelope_shape,
    integrate_segments,
)
from .units import DEBYE, field_amplitude, time_unit

__all__ = [
    "LevelSet",
    "FieldSpec",
    "DrivenSystem",
    "ScenarioResult",
    "ConfigError",
    "field_amplitude",
    "time_unit",
    "build_system",
    "run_scenario",
    "load_config",
    "resolve",
    "m_averaged_populations",
    "effective_coupling",
    "bundled_scenarios",
    "apply_overrides",
    "light_shifts",
    "compensate_light_shifts",
]

DEFAULT_CUTOFF = 10.0  # 1/t0; pairs detuned further than this from a field are dropped
_HBAR = constants.hbar


class ConfigError(ValueError):
    pass


def time_unit_of(mol: Molecule) -> float:
    return time_unit(mol.band(None).B)


# levels -----------------------------------------------------------------------


@dataclass(frozen=True)
class LevelSet:
    """Levels with all their M sublevels; basis order is level by level, M ascending."""

    levels: tuple[RotState, ...]

    def __post_init__(self):
        keys = [(s.band, s.J, s.tau) for s in self.levels]
        if len(set(keys)) != len(keys):
            raise ValueError("levels must be distinct")

    @classmethod
    def from_labels(cls, mol: Molecule, specs) -> "LevelSet":
        out = []
        for spec in specs:
            if isinstance(spec, dict):
                out.append(find_state(mol, str(spec["label"]), spec.get("band")))
            elif isinstance(spec, (list, tuple)):
                out.append(find_state(mol, str(spec[0]), spec[1] if len(spec) > 1 else None))
            else:
                out.append(find_state(mol, str(spec)))
        return cls(tuple(out))

    @property
    def offsets(self) -> list[int]:
        off, acc = [], 0
        for s in self.levels:
            off.append(acc)
            acc += 2 * s.J + 1
        return off

    @property
    def size(self) -> int:
        return sum(2 * s.J + 1 for s in self.levels)

    @property
    def labels(self) -> list[str]:
        return [level_name(s) for s in self.levels]

    def basis(self) -> list[tuple[int, int]]:
        return [(i, M) for i, s in enumerate(self.levels) for M in range(-s.J, s.J + 1)]

    def index(self, level: int, M: int) -> int:
        s = self.levels[level]
        if abs(M) > s.J:
            raise ValueError(f"|M| = {abs(M)} exceeds J = {s.J}")
        return self.offsets[level] + M + s.J

    def find(self, label: str, band=None) -> int:
        J, Ka, Kc = parse_label(label)
        hits = [
            i
            for i, s in enumerate(self.levels)
            if (s.J, s.Ka, s.Kc) == (J, Ka, Kc) and (band is None or s.band == band)
        ]
        if len(hits) != 1:
            raise KeyError(f"level {label}{'' if band is None else f' ({band})'} is not uniquely in the level set")
        return hits[0]


def level_name(s: RotState) -> str:
    return s.label if s.band is None else f"{s.label}@{s.band}"


def _parse_level_ref(ref):
    # "1_10", "1_10@v1", {"label":..., "band":...}
    if isinstance(ref, (int, float)):
        # YAML reads an unquoted 1_10 as the integer 110 and 0_00 as 0
        raise ConfigError(f"level label {ref!r} was read as a number; quote it, e.g. \"1_10\"")
    if isinstance(ref, dict):
        return str(ref["label"]), ref.get("band")
    text = str(ref)
    if "@" in text:
        lab, band = text.split("@", 1)
        return lab, band
    return text, None


# fields ---------------------------------------------------------------------


@dataclass(frozen=True)
class FieldSpec:
    """One linearly polarized field.

    ``resonance`` names the level pair whose transition frequency the carrier
    matches (plus ``detuning``, in 1/t0). ``chirp`` is the sweep half-width in
    units of B (so 0.01 means +-0.01 B). Times are in t0.
    """

    polarization: str
    resonance: tuple
    intensity: float
    start: float = 0.0
    duration: float = 1.0
    shape: str = "sin2"
    rise: float = 0.1
    phase: float = 0.0
    chirp: float = 0.0
    detuning: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.polarization not in ("x", "y", "z"):
            raise ValueError(f"unknown polarization {self.polarization!r}")
        if self.intensity < 0:
            raise ValueError("intensity must be non-negative")
        if self.duration <= 0:
            raise ValueError("field duration must be positive")
        if self.shape not in SHAPES:
            raise ValueError(f"unknown envelope shape {self.shape!r}")

    @property
    def end(self) -> float:
        return self.start + self.duration

    @property
    def chirp_rate(self) -> float:
        # sweep half-width as an angular frequency in 1/t0
        return 2 * math.pi * self.chirp


def _reduced_amplitude(intensity: float, b_mhz: float) -> float:
    """eps / 2 times 1 Debye, as an angular frequency in 1/t0."""
    return 0.5 * DEBYE * field_amplitude(intensity) / _HBAR * time_unit(b_mhz)


def _reduced_energy(s: RotState, b_mhz: float) -> float:
    return 2 * math.pi * s.energy / b_mhz


# system ------------------------------------------------------------------------


@dataclass
class DrivenSystem:
    """H(t) = sum_k g_k(t) U_k + h.c. over (field, level pair) terms."""

    levels: LevelSet
    fields: tuple[FieldSpec, ...]
    enantiomer: Enantiomer
    ops: np.ndarray  # (K, n, n), strictly upper triangular in energy order
    term_field: np.ndarray  # field index of each term
    term_detuning: np.ndarray  # residual detuning of each term, 1/t0
    amplitudes: np.ndarray  # eps/2 per field, 1/t0 per Debye
    resonant: dict = field(default_factory=dict)  # field index -> term index

    def coefficients(self, t: float) -> np.ndarray:
        f = self.fields
        env = np.array([envelope_shape(t, x.shape, x.start, x.duration, x.rise) for x in f]).ravel()
        phase = np.array([x.phase - chirp_phase(t, x.chirp_rate, x.start, x.duration) if x.chirp else x.phase for x in f])
        g_field = self.amplitudes * env * np.exp(1j * phase)
        return g_field[self.term_field] * np.exp(-1j * self.term_detuning * t)

    def __call__(self, t: float) -> np.ndarray:
        if not len(self.term_field):
            return np.zeros((self.levels.size, self.levels.size), dtype=complex)
        h = np.tensordot(self.coefficients(t), self.ops, axes=1)
        return h + h.conj().T

    @property
    def breakpoints(self) -> list[float]:
        return sorted({x for f in self.fields for x in (f.start, f.end)})


def build_system(
    mol: Molecule,
    levels: LevelSet,
    fields,
    en: Enantiomer,
    cutoff: float = DEFAULT_CUTOFF,
) -> DrivenSystem:
    """Interaction-picture Hamiltonian over all M sublevels of ``levels``.

    Each field drives every dipole-allowed pair whose residual detuning is
    within ``cutoff`` (1/t0) and below half the carrier frequency.
    """
    b = mol.band(None).B
    fields = tuple(fields)
    n = levels.size
    energies = [_reduced_energy(s, b) for s in levels.levels]
    ops, tf, td = [], [], []
    resonant = {}
    carriers = []
    for k, f in enumerate(fields):
        lo, hi = _resonance_pair(levels, f)
        w = abs(energies[hi] - energies[lo]) - f.detuning
        carriers.append(w)
    for k, f in enumerate(fields):
        lo_r, hi_r = _resonance_pair(levels, f)
        for i in range(len(levels.levels)):
            for j in range(len(levels.levels)):
                if not energies[i] < energies[j]:
                    continue
                si, sj = levels.levels[i], levels.levels[j]
                if abs(si.J - sj.J) > 1 or mol.dipole_between(si.band, sj.band) is None:
                    continue
                delta = energies[j] - energies[i] - carriers[k]
                is_res = (i, j) == (lo_r, hi_r)
                if not is_res and (abs(delta) > cutoff or abs(delta) > 0.5 * carriers[k]):
                    continue
                block = level_block(mol, en, si, sj, f.polarization)
                if not np.any(np.abs(block) > 1e-14):
                    if is_res:
                        raise ConfigError(
                            f"field {f.name or k} ({f.polarization}) cannot drive its resonance "
                            f"{level_name(si)} - {level_name(sj)}"
                        )
                    continue
                op = np.zeros((n, n), dtype=complex)
                oi, oj = levels.offsets[i], levels.offsets[j]
                op[oi : oi + block.shape[0], oj : oj + block.shape[1]] = block
                if is_res:
                    resonant[k] = len(ops)
                ops.append(op)
                tf.append(k)
                td.append(delta)
    for k, f in enumerate(fields):
        if k not in resonant:
            lo, hi = _resonance_pair(levels, f)
            raise ConfigError(
                f"field {f.name or k}: {level_name(levels.levels[lo])} - {level_name(levels.levels[hi])} "
                "is not a dipole transition"
            )
    amps = np.array([_reduced_amplitude(f.intensity, b) for f in fields])
    return DrivenSystem(
        levels,
        fields,
        en,
        np.array(ops, dtype=complex).reshape(len(ops), n, n),
        np.array(tf, dtype=int),
        np.array(td, dtype=float),
        amps,
        resonant,
    )


def _resonance_pair(levels: LevelSet, f: FieldSpec) -> tuple[int, int]:
    a = levels.find(*_parse_level_ref(f.resonance[0]))
    b = levels.find(*_parse_level_ref(f.resonance[1]))
    if a == b:
        raise ConfigError("a resonance needs two different levels")
    ea, eb = levels.levels[a].energy, levels.levels[b].energy
    return (a, b) if ea < eb else (b, a)


def effective_coupling(mol: Molecule, levels: LevelSet, f: FieldSpec) -> float:
    """Largest singular value of the resonant block times eps/2 (1/t0)."""
    lo, hi = _resonance_pair(levels, f)
    block = level_block(mol, PLUS, levels.levels[lo], levels.levels[hi], f.polarization)
    return float(np.linalg.norm(block, 2)) * _reduced_amplitude(f.intensity, mol.band(None).B)


def loop_phase(mol: Molecule, levels: LevelSet, fields) -> float | None:
    """Material phase of the (+) cycle closed by three resonant fields, or None."""
    if len(fields) != 3:
        return None
    pairs = [_resonance_pair(levels, f) for f in fields]
    nodes = sorted({i for p in pairs for i in p}, key=lambda i: levels.levels[i].energy)
    if len(nodes) != 3:
        return None
    l1, l2, l3 = nodes
    by_pair = {p: f for p, f in zip(pairs, fields)}
    try:
        f12, f23, f13 = by_pair[l1, l2], by_pair[l2, l3], by_pair[l1, l3]
    except KeyError:
        return None
    s = levels.levels
    v12 = level_block(mol, PLUS, s[l1], s[l2], f12.polarization)
    v23 = level_block(mol, PLUS, s[l2], s[l3], f23.polarization)
    v31 = level_block(mol, PLUS, s[l3], s[l1], f13.polarization)
    tr = np.trace(v12 @ v23 @ v31)
    if abs(tr) > 1e-12 * np.trace(np.abs(v12) @ np.abs(v23) @ np.abs(v31)):
        return float(np.angle(tr))
    # no M-summed interference; fall back to the first closed M path
    for i in range(v12.shape[0]):
        for j in range(v12.shape[1]):
            for k in range(v23.shape[1]):
                p = v12[i, j] * v23[j, k] * v31[k, i]
                if abs(p) > 1e-14:
                    return float(np.angle(p))
    return 0.0


# results ------------------------------------------------------------------------


@dataclass
class ScenarioResult:
    """Amplitudes have shape (n_initial_M, n_t, n_basis) per enantiomer."""

    t: np.ndarray
    levels: LevelSet
    amplitudes: dict
    populations: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    t0: float = 1.0
    couplings: dict = field(default_factory=dict)

    @property
    def labels(self) -> list[str]:
        return self.levels.labels

    @property
    def selectivity(self) -> np.ndarray:
        return np.abs(self.populations[PLUS] - self.populations[MINUS])

    @property
    def final_selectivity(self) -> np.ndarray:
        return self.selectivity[-1]

    def norm_drift(self) -> float:
        out = 0.0
        for amps in self.amplitudes.values():
            norms = np.sum(np.abs(amps) ** 2, axis=-1)
            out = max(out, float(np.max(np.abs(norms - 1.0))))
        return out

    def summary(self) -> str:
        lines = [f"t0 = {self.t0:.6g} s; duration = {self.t[-1]:.6g} t0 = {self.t[-1] * self.t0:.6g} s"]
        for name, h in self.couplings.items():
            lines.append(f"field {name}: effective coupling {h:.6g} /t0")
        for lab, p, m, s in zip(self.labels, self.populations[PLUS][-1], self.populations[MINUS][-1], self.final_selectivity):
            lines.append(f"{lab:>10}: P+ = {p:.6f}  P- = {m:.6f}  selectivity = {s:.6f}")
        lines.append(f"norm drift = {self.norm_drift():.3g}")
        return "\n".join(lines) + "\n"


def m_averaged_populations(result: ScenarioResult, en: Enantiomer | None = None):
    """Level populations (n_t, n_levels): summed over M, averaged over initial M.

    With ``en`` None, returns a dict for both enantiomers.
    """
    if en is None:
        return {e: m_averaged_populations(result, e) for e in result.amplitudes}
    pops = np.mean(np.abs(result.amplitudes[en]) ** 2, axis=0)
    out = np.zeros((pops.shape[0], len(result.levels.levels)))
    for i, s in enumerate(result.levels.levels):
        o = result.levels.offsets[i]
        out[:, i] = pops[:, o : o + 2 * s.J + 1].sum(axis=1)
    return out


# configuration ------------------------------------------------------------------

_TOP_KEYS = {"molecule", "levels", "initial", "fields", "run"}
_FIELD_KEYS = {
    "name", "polarization", "resonance", "intensity", "start", "duration", "shape",
    "rise", "phase", "chirp", "detuning", "angle",
}
_RUN_KEYS = {
    "Phi", "duration", "points", "sequence", "gap", "cutoff", "area", "rtol", "atol", "light_shift",
}
_ANGLE = re.compile(r"^\s*([-+]?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?\s*$")
_TIME = re.compile(r"^\s*([-+]?\d*\.?\d+(?:[eE][-+]?\d+)?)\s*(s|ms|us|ns|ps|t0)\s*$")
_TIME_SCALE = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9, "ps": 1e-12}


def parse_angle(value) -> float:
    """Radians from a number or an expression like 'pi/2', '3pi/2', '-0.5*pi'."""
    if isinstance(value, (int, float)):
        return float(value)
    m = _ANGLE.match(str(value))
    if not m:
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"cannot read angle {value!r}") from None
    coef = m.group(1)
    c = float(coef) if coef not in ("", "+", "-") else (-1.0 if coef == "-" else 1.0)
    d = float(m.group(2)) if m.group(2) else 1.0
    return c * math.pi / d


def parse_time(value, t0: float) -> float:
    """Time in t0 from a number (already t0) or a string with unit, e.g. '5.6 us'."""
    if isinstance(value, (int, float)):
        return float(value)
    m = _TIME.match(str(value))
    if not m:
        raise ConfigError(f"cannot read time {value!r}; use a number (t0) or e.g. '5.6 us'")
    v, unit = float(m.group(1)), m.group(2)
    return v if unit == "t0" else v * _TIME_SCALE[unit] / t0


def load_config(source) -> dict:
    """Read a scenario from a YAML path, a bundled scenario name, or a dict."""
    if isinstance(source, dict):
        cfg = copy.deepcopy(source)
    else:
        path = Path(source)
        if not path.is_file():
            bundled = _bundled_dir() / f"{source}.yaml"
            if not bundled.is_file():
                raise ConfigError(f"no scenario file or bundled scenario named {source!r}")
            path = bundled
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    _validate_keys(cfg)
    return cfg


def _validate_keys(cfg: dict):
    if not isinstance(cfg, dict):
        raise ConfigError("scenario config must be a mapping")
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    for k, f in enumerate(cfg.get("fields", [])):
        bad = set(f) - _FIELD_KEYS
        if bad:
            raise ConfigError(f"field {k}: unknown keys {sorted(bad)}")
    bad = set(cfg.get("run", {})) - _RUN_KEYS
    if bad:
        raise ConfigError(f"run: unknown keys {sorted(bad)}")


def _bundled_dir() -> Path:
    return Path(__file__).parent / "data" / "scenarios"


def bundled_scenarios() -> list[str]:
    return sorted(p.stem for p in _bundled_dir().glob("*.yaml"))


def config_hash(cfg: dict) -> str:
    text = json.dumps(cfg, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply 'a.b.c=value' strings; list entries are addressed by index or field name."""
    cfg = copy.deepcopy(cfg)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        value = yaml.safe_load(raw)
        parts = key.strip().split(".")
        node = cfg
        for p in parts[:-1]:
            if isinstance(node, list):
                node = _list_item(node, p)
            else:
                node = node.setdefault(p, {})
        last = parts[-1]
        if isinstance(node, list):
            raise ConfigError(f"override {key!r} must end on a key, not a list entry")
        node[last] = value
    _validate_keys(cfg)
    return cfg


def _list_item(node: list, p: str):
    if p.isdigit():
        try:
            return node[int(p)]
        except IndexError:
            raise ConfigError(f"no list entry {p}") from None
    for item in node:
        if isinstance(item, dict) and item.get("name") == p:
            return item
    raise ConfigError(f"no entry named {p!r}")


@dataclass
class Resolved:
    mol: Molecule
    levels: LevelSet
    initial: int
    fields: tuple[FieldSpec, ...]
    tgrid: np.ndarray
    t0: float
    cutoff: float
    rtol: float
    atol: float
    couplings: dict


def resolve(cfg: dict) -> Resolved:
    """Turn a config into concrete levels, fields with explicit timing, and a grid."""
    _validate_keys(cfg)
    try:
        mspec = cfg["molecule"]
        mol = molecule_from_dict(mspec) if isinstance(mspec, dict) else load_molecule(mspec)
        level_specs = []
        for ref in cfg["levels"]:
            lab, band = _parse_level_ref(ref)
            level_specs.append({"label": lab, "band": band})
        levels = LevelSet.from_labels(mol, level_specs)
    except KeyError as exc:
        raise ConfigError(f"config: {exc}") from None
    t0 = time_unit_of(mol)
    run = cfg.get("run", {})
    init_ref = cfg.get("initial", cfg["levels"][0])
    initial = levels.find(*_parse_level_ref(init_ref))

    raw = cfg.get("fields", [])
    if not raw:
        raise ConfigError("at least one field is required")
    protos = []
    for k, f in enumerate(raw):
        try:
            protos.append(
                FieldSpec(
                    polarization=str(f["polarization"]),
                    resonance=tuple(f["resonance"]),
                    intensity=float(f["intensity"]),
                    shape=f.get("shape", "sin2"),
                    rise=float(f.get("rise", 0.1)),
                    phase=parse_angle(f.get("phase", 0.0)),
                    chirp=float(f.get("chirp", 0.0)),
                    detuning=float(f.get("detuning", 0.0)),
                    name=str(f.get("name", f"f{k}")),
                )
            )
        except KeyError as exc:
            raise ConfigError(f"field {k}: missing {exc}") from None
    couplings = {p.name: effective_coupling(mol, levels, p) for p in protos}

    # timing
    seq = run.get("sequence", "custom")
    fields = []
    if seq == "simultaneous":
        dur = run.get("duration", "auto")
        if dur == "auto":
            h = float(np.mean(list(couplings.values())))
            area = float(run.get("area", SIMULTANEOUS_TRANSFER_AREA))
            dur = area / (h * envelope_area(protos[0].shape, 1.0, protos[0].rise))
        else:
            dur = parse_time(dur, t0)
        fields = [_with(p, start=0.0, duration=dur) for p in protos]
    elif seq == "sequential":
        gap = parse_time(run.get("gap", 0.0), t0)
        t = 0.0
        for p, f in zip(protos, raw):
            if "angle" not in f and "duration" not in f:
                raise ConfigError(f"sequential field {p.name} needs an angle or a duration")
            if "duration" in f and f["duration"] != "auto":
                dur = parse_time(f["duration"], t0)
            else:
                dur = 0.5 * parse_angle(f["angle"]) / (couplings[p.name] * envelope_area(p.shape, 1.0, p.rise))
            fields.append(_with(p, start=t, duration=dur))
            t += dur + gap
    elif seq == "custom":
        for p, f in zip(protos, raw):
            if "duration" not in f:
                raise ConfigError(f"field {p.name}: custom sequences need explicit start/duration")
            fields.append(
                _with(p, start=parse_time(f.get("start", 0.0), t0), duration=parse_time(f["duration"], t0))
            )
    else:
        raise ConfigError(f"unknown sequence {seq!r}; use simultaneous, sequential or custom")

    if "Phi" in run:
        theta = loop_phase(mol, levels, fields)
        if theta is None:
            raise ConfigError("run.Phi needs three fields closing a cycle of three levels")
        fields = _set_overall_phase(levels, fields, parse_angle(run["Phi"]) - theta)

    cutoff = float(run.get("cutoff", DEFAULT_CUTOFF))
    mode = run.get("light_shift", "none")
    if mode == "compensate":
        fields = compensate_light_shifts(mol, levels, fields, cutoff, initial)
    elif mode != "none":
        raise ConfigError("run.light_shift must be 'none' or 'compensate'")

    end = max(f.end for f in fields)
    total = run.get("duration", "auto") if seq != "simultaneous" else "auto"
    total = end if total == "auto" else max(parse_time(total, t0), end)
    points = int(run.get("points", 401))
    if points < 2:
        raise ConfigError("run.points must be at least 2")
    return Resolved(
        mol=mol,
        levels=levels,
        initial=initial,
        fields=tuple(fields),
        tgrid=np.linspace(0.0, total, points),
        t0=t0,
        cutoff=cutoff,
        rtol=float(run.get("rtol", 1e-11)),
        atol=float(run.get("atol", 1e-13)),
        couplings=couplings,
    )


def light_shifts(system: DrivenSystem, during: FieldSpec | None = None) -> np.ndarray:
    """Second-order shift of every basis state from the off-resonant terms at peak field.

    With ``during`` given, only fields overlapping it in time contribute.
    """
    shift = np.zeros(system.levels.size)
    res_terms = set(system.resonant.values())
    for k, op in enumerate(system.ops):
        f = system.fields[system.term_field[k]]
        if k in res_terms or system.term_detuning[k] == 0.0:
            continue
        if during is not None and (f.end <= during.start or f.start >= during.end):
            continue
        g2 = np.abs(op * system.amplitudes[system.term_field[k]]) ** 2
        d = system.term_detuning[k]
        shift -= g2.sum(axis=1) / d
        shift += g2.sum(axis=0) / d
    return shift


def _reachable(system: DrivenSystem, start: list[int]) -> np.ndarray:
    """Basis states connected to ``start`` through resonant terms."""
    adj = np.zeros((system.levels.size,) * 2, dtype=bool)
    for k in system.resonant.values():
        nz = np.abs(system.ops[k]) > 0
        adj |= nz | nz.T
    seen = np.zeros(system.levels.size, dtype=bool)
    seen[start] = True
    frontier = list(start)
    while frontier:
        nxt = np.flatnonzero(adj[frontier].any(axis=0) & ~seen)
        seen[nxt] = True
        frontier = list(nxt)
    return seen


def compensate_light_shifts(mol, levels, fields, cutoff=DEFAULT_CUTOFF, initial: int = 0):
    """Offset each carrier so it stays resonant with the light-shifted levels.

    Shifts are averaged over the sublevels that the resonant couplings reach
    from the initial level, weighted by their resonant coupling strength.
    """
    system = build_system(mol, levels, fields, PLUS, cutoff=cutoff)
    s0 = levels.levels[initial]
    live = _reachable(system, [levels.index(initial, M) for M in range(-s0.J, s0.J + 1)])
    out = []
    for k, f in enumerate(fields):
        s = light_shifts(system, during=f)
        w = np.abs(system.ops[system.resonant[k]]) ** 2 * np.outer(live, live)
        lo = w.sum(axis=1)
        hi = w.sum(axis=0)
        extra = 0.0 if lo.sum() == 0 else lo @ s / lo.sum() - hi @ s / hi.sum()
        out.append(_with(f, detuning=f.detuning + float(extra)))
    return tuple(out)


def _with(p: FieldSpec, **kw) -> FieldSpec:
    d = {**p.__dict__, **kw}
    return FieldSpec(**d)


def _set_overall_phase(levels, fields, target):
    # the loop phase is phi12 + phi23 - phi13 over the energy-ordered levels
    pairs = [_resonance_pair(levels, f) for f in fields]
    nodes = sorted({i for p in pairs for i in p}, key=lambda i: levels.levels[i].energy)
    l1, l2, l3 = nodes
    sign = {(l1, l2): 1, (l2, l3): 1, (l1, l3): -1}
    current = sum(sign[p] * f.phase for p, f in zip(pairs, fields))
    k = pairs.index((l1, l2))
    out = list(fields)
    out[k] = _with(fields[k], phase=fields[k].phase + target - current)
    return tuple(out)


def run_scenario(config, jobs: int = 1) -> ScenarioResult:
    """Propagate both enantiomers for a scenario config (dict, path or bundled name)."""
    cfg = config if isinstance(config, dict) else load_config(config)
    r = resolve(cfg)
    s0 = r.levels.levels[r.initial]
    amps = {}
    for en in (PLUS, MINUS):
        system = build_system(r.mol, r.levels, r.fields, en, cutoff=r.cutoff)
        runs = []
        for M0 in range(-s0.J, s0.J + 1):
            psi0 = np.zeros(r.levels.size, dtype=complex)
            psi0[r.levels.index(r.initial, M0)] = 1.0
            runs.append(propagate_system(system, psi0, r.tgrid, r.rtol, r.atol))
        amps[en] = np.array(runs)
    result = ScenarioResult(
        t=r.tgrid,
        levels=r.levels,
        amplitudes=amps,
        config=cfg,
        t0=r.t0,
        couplings=r.couplings,
    )
    result.populations = m_averaged_populations(result)
    return result


def propagate_system(system: DrivenSystem, psi0, tgrid, rtol=1e-11, atol=1e-13) -> np.ndarray:
    def rhs(t, y):
        return -1j * (system(t) @ y)

    out = integrate_segments(rhs, np.asarray(psi0, dtype=complex), tgrid, system.breakpoints, rtol, atol)
    if not np.all(np.isfinite(out)):
        raise PropagationError("non-finite amplitudes")
    return out
