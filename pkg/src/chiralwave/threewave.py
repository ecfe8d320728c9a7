"""Three-level cyclic model in the rotating-wave approximation.

Energies are in units of E0 and times in t0 = hbar / E0. Level 1 is the
initially populated state; legs are named "12", "13" and "23". The couplings
of one leg carry the enantiomer sign, the other two are shared.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import erf

from .coupling import MINUS, PLUS, Enantiomer

__all__ = [
    "LEGS",
    "ThreeLevelParams",
    "Pulse",
    "Trajectory",
    "PropagationError",
    "rwa_hamiltonian",
    "dressed_spectrum",
    "propagate",
    "propagate_pair",
    "chirped_passage",
    "selectivity",
    "PulseSequence",
    "sequential_sequence",
    "simultaneous_sequence",
    "detuning_scan",
    "SIMULTANEOUS_TRANSFER_AREA",
    "envelope_shape",
    "envelope_area",
    "linear_chirp",
    "chirp_phase",
    "trajectory_table",
]

LEGS = ("12", "13", "23")
_LEG_INDEX = {"12": (0, 1), "13": (0, 2), "23": (1, 2)}

# integral of |H~| dt that takes |1> fully into |2> or |3> for three equal
# couplings switched on together at Phi = pi/2
SIMULTANEOUS_TRANSFER_AREA = 2 * math.pi / (3 * math.sqrt(3))


class PropagationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ThreeLevelParams:
    """Coupling magnitudes, detunings and leg phases of the cyclic model.

    ``phases`` holds (Phi12, Phi13, Phi23); the physical overall phase is
    Phi = Phi12 + Phi23 - Phi13.
    """

    couplings: tuple[float, float, float] = (1.0, 1.0, 1.0)
    delta12: float = 0.0
    delta23: float = 0.0
    delta13: float | None = None
    phases: tuple[float, float, float] = (0.0, 0.0, 0.0)
    flip_leg: str = "23"

    def __post_init__(self):
        if self.delta13 is None:
            object.__setattr__(self, "delta13", self.delta12 + self.delta23)
        if abs(self.delta12 + self.delta23 - self.delta13) > 1e-12:
            raise ValueError("detunings must satisfy delta12 + delta23 - delta13 = 0")
        if self.flip_leg not in LEGS:
            raise ValueError(f"flip_leg must be one of {LEGS}")
        if min(self.couplings) < 0:
            raise ValueError("coupling magnitudes must be non-negative")

    @classmethod
    def with_phase(cls, Phi: float, **kw) -> "ThreeLevelParams":
        """Put the whole overall phase on leg 12."""
        return cls(phases=(Phi, 0.0, 0.0), **kw)

    @property
    def Phi(self) -> float:
        p12, p13, p23 = self.phases
        return p12 + p23 - p13

    def sigma(self, en: Enantiomer) -> tuple[int, int, int]:
        return tuple(en.sign if leg == self.flip_leg else 1 for leg in LEGS)


def rwa_hamiltonian(
    params: ThreeLevelParams,
    en: Enantiomer,
    envelopes=(1.0, 1.0, 1.0),
    t: float = 0.0,
    detunings: tuple[float, float] | None = None,
) -> np.ndarray:
    """Interaction-picture Hamiltonian at one instant.

    ``envelopes`` are the (possibly complex) field envelopes of legs 12, 13,
    23; ``detunings`` overrides (delta12, delta23) for chirped fields, in which
    case delta13 follows their sum.
    """
    if detunings is None:
        d12, d23, d13 = params.delta12, params.delta23, params.delta13
    else:
        d12, d23 = detunings
        d13 = d12 + d23
    h = np.zeros((3, 3), dtype=complex)
    h[0, 0] = d12
    h[2, 2] = -d23
    residual = np.exp(1j * (d12 + d23 - d13) * t)
    sig = params.sigma(en)
    for k, leg in enumerate(LEGS):
        i, j = _LEG_INDEX[leg]
        v = sig[k] * params.couplings[k] * envelopes[k] * np.exp(1j * params.phases[k])
        if leg == "12":
            v = v * residual
        h[i, j] = v
        h[j, i] = np.conj(v)
    return h


def dressed_spectrum(params: ThreeLevelParams, en: Enantiomer, Phi: float | None = None) -> np.ndarray:
    """Field-dressed energies for constant envelopes, ascending."""
    if Phi is not None:
        params = replace(params, phases=(Phi, 0.0, 0.0))
    return np.linalg.eigvalsh(rwa_hamiltonian(params, en))


# pulses ---------------------------------------------------------------------

SHAPES = ("flat", "sin2", "gauss")


def envelope_shape(t, shape: str, start: float, duration: float, rise: float = 0.1):
    """Unit-peak envelope, zero outside [start, start + duration]."""
    t = np.asarray(t, dtype=float)
    x = (t - start) / duration
    inside = (x >= 0) & (x <= 1)
    if shape == "flat":
        env = np.ones_like(x)
    elif shape == "sin2":
        env = np.ones_like(x)
        env = np.where(x < rise, np.sin(0.5 * np.pi * x / rise) ** 2, env)
        env = np.where(x > 1 - rise, np.sin(0.5 * np.pi * (1 - x) / rise) ** 2, env)
    elif shape == "gauss":
        env = np.exp(-0.5 * ((x - 0.5) * 6) ** 2)
    else:
        raise ValueError(f"unknown envelope shape {shape!r}")
    return np.where(inside, env, 0.0)


def envelope_area(shape: str, duration: float, rise: float = 0.1) -> float:
    """Time integral of the unit-peak envelope."""
    if shape == "flat":
        return duration
    if shape == "sin2":
        return duration * (1 - rise)
    if shape == "gauss":
        return duration / 6 * math.sqrt(2 * math.pi) * erf(3 / math.sqrt(2))
    raise ValueError(f"unknown envelope shape {shape!r}")


def linear_chirp(t: float, delta0: float, start: float, duration: float) -> float:
    """-delta0 -> +delta0 ramp across the window, held constant outside."""
    x = min(max((t - start) / duration, 0.0), 1.0)
    return -delta0 + 2 * delta0 * x


def chirp_phase(t: float, delta0: float, start: float, duration: float) -> float:
    """Integral of :func:`linear_chirp` from ``start`` to ``t``."""
    tau = t - start
    if tau <= 0:
        return -delta0 * tau
    if tau >= duration:
        return delta0 * (tau - duration)
    return -delta0 * tau + delta0 * tau * tau / duration


@dataclass(frozen=True)
class Pulse:
    """One field driving a single leg.

    ``shape`` is "flat", "sin2" (flat top with sin^2 edges, each a fraction
    ``rise`` of the duration; rise = 0.5 gives a plain sin^2 pulse) or "gauss"
    (sigma = duration / 6, truncated to the window). ``chirp`` is delta0 for a
    linear sweep -delta0 -> +delta0 across the pulse.
    """

    leg: str
    start: float
    duration: float
    shape: str = "sin2"
    amplitude: float = 1.0
    rise: float = 0.1
    chirp: float | None = None
    phase: float = 0.0

    def __post_init__(self):
        if self.leg not in LEGS:
            raise ValueError(f"pulse leg must be one of {LEGS}")
        if self.shape not in SHAPES:
            raise ValueError(f"unknown envelope shape {self.shape!r}")
        if self.amplitude < 0 or self.duration <= 0:
            raise ValueError("pulse amplitude must be >= 0 and duration > 0")
        if not 0 < self.rise <= 0.5:
            raise ValueError("rise fraction must lie in (0, 0.5]")

    @property
    def end(self) -> float:
        return self.start + self.duration

    def envelope(self, t):
        return self.amplitude * envelope_shape(t, self.shape, self.start, self.duration, self.rise)

    def unit_area(self) -> float:
        """Integral of the envelope for amplitude 1."""
        return envelope_area(self.shape, self.duration, self.rise)

    def area(self, coupling: float = 1.0) -> float:
        """Integral of coupling * envelope; pi/2 inverts a resonant two-level system."""
        return coupling * self.amplitude * self.unit_area()

    def detuning(self, t: float) -> float:
        if self.chirp is None:
            return 0.0
        return linear_chirp(t, self.chirp, self.start, self.duration)

    @classmethod
    def for_rotation(cls, leg, angle, coupling, start=0.0, shape="sin2", rise=0.1, phase=0.0):
        """Resonant pulse rotating its two-level system by ``angle`` (pi = inversion)."""
        unit = cls(leg, start, 1.0, shape=shape, rise=rise).unit_area()
        duration = 0.5 * angle / (coupling * unit)
        return cls(leg, start, duration, shape=shape, rise=rise, phase=phase)


# propagation ----------------------------------------------------------------


@dataclass
class Trajectory:
    """Amplitudes of the three levels on a time grid for one enantiomer."""

    t: np.ndarray
    amplitudes: np.ndarray
    enantiomer: Enantiomer = PLUS
    meta: dict = field(default_factory=dict)

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def norm_drift(self) -> float:
        norms = np.sum(self.populations, axis=1)
        return float(np.max(np.abs(norms - norms[0])))

    @property
    def final(self) -> np.ndarray:
        return self.populations[-1]


def _leg_drive(pulses, t):
    env = [0j, 0j, 0j]
    for p in pulses:
        if p.start <= t <= p.end:
            env[LEGS.index(p.leg)] += complex(p.envelope(t)) * np.exp(1j * p.phase)
    return env


def _chirp_detunings(params, pulses, t):
    d12, d23 = params.delta12, params.delta23
    for p in pulses:
        if p.chirp is None:
            continue
        if p.leg == "12":
            d12 += p.detuning(t)
        elif p.leg == "23":
            d23 += p.detuning(t)
    return d12, d23


def integrate_segments(rhs, psi0, tgrid, breakpoints, rtol=1e-11, atol=1e-13, max_step=np.inf):
    """Adaptive RK (DOP853) between breakpoints, sampled on ``tgrid``."""
    tgrid = np.asarray(tgrid, dtype=float)
    if np.any(np.diff(tgrid) <= 0):
        raise ValueError("time grid must be strictly increasing")
    t0, t1 = tgrid[0], tgrid[-1]
    edges = sorted({t0, t1, *(b for b in breakpoints if t0 < b < t1)})
    out = np.empty((len(tgrid), len(psi0)), dtype=complex)
    out[0] = psi0
    psi = np.asarray(psi0, dtype=complex)
    for a, b in zip(edges[:-1], edges[1:]):
        mask = (tgrid > a) & (tgrid <= b)
        teval = tgrid[mask]
        if not teval.size or teval[-1] != b:
            teval = np.append(teval, b)
        sol = solve_ivp(
            rhs,
            (a, b),
            psi,
            method="DOP853",
            t_eval=teval,
            rtol=rtol,
            atol=atol,
            max_step=max_step,
        )
        if sol.status != 0 or sol.t.size != teval.size:
            raise PropagationError(f"integration failed on [{a}, {b}]: {sol.message}")
        out[mask] = sol.y.T[: mask.sum()]
        psi = sol.y[:, -1]
    return out


def propagate(
    params: ThreeLevelParams,
    en: Enantiomer,
    pulses: list[Pulse],
    psi0,
    tgrid,
    rtol: float = 1e-11,
    atol: float = 1e-13,
) -> Trajectory:
    """Solve i d/dt psi = H(t) psi for the pulsed three-level model."""
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.vdot(psi0, psi0) - 1) > 1e-12:
        raise ValueError("initial state must be normalised")
    for p in pulses:
        if p.chirp is not None and p.leg == "13":
            raise ValueError("chirps apply to legs 12 and 23; leg 13 follows their sum")
    chirped = any(p.chirp is not None for p in pulses)

    def rhs(t, y):
        det = _chirp_detunings(params, pulses, t) if chirped else None
        return -1j * (rwa_hamiltonian(params, en, _leg_drive(pulses, t), t, det) @ y)

    breaks = [x for p in pulses for x in (p.start, p.end)]
    amps = integrate_segments(rhs, psi0, tgrid, breaks, rtol, atol)
    return Trajectory(np.asarray(tgrid, dtype=float), amps, en)


def propagate_pair(params, pulses, psi0, tgrid, **kw) -> tuple[Trajectory, Trajectory]:
    return (
        propagate(params, PLUS, pulses, psi0, tgrid, **kw),
        propagate(params, MINUS, pulses, psi0, tgrid, **kw),
    )


def chirped_passage(
    params: ThreeLevelParams,
    en: Enantiomer,
    delta0: float,
    duration: float,
    Phi: float,
    rise: float = 0.1,
    tgrid=None,
) -> Trajectory:
    """Three simultaneous flat-top pulses with legs 12 and 23 swept linearly."""
    params = replace(params, phases=(Phi, 0.0, 0.0))
    pulses = [
        Pulse("12", 0.0, duration, rise=rise, chirp=delta0),
        Pulse("13", 0.0, duration, rise=rise),
        Pulse("23", 0.0, duration, rise=rise, chirp=delta0),
    ]
    if tgrid is None:
        tgrid = np.linspace(0.0, duration, 401)
    traj = propagate(params, en, pulses, [1, 0, 0], tgrid)
    traj.meta.update(delta0=delta0, duration=duration, Phi=Phi)
    return traj


def selectivity(traj_plus: Trajectory, traj_minus: Trajectory) -> np.ndarray:
    """|P_n(+) - P_n(-)| per time point and level."""
    if traj_plus.t.shape != traj_minus.t.shape or not np.allclose(traj_plus.t, traj_minus.t, rtol=0, atol=1e-12):
        raise ValueError("trajectories are sampled on different time grids")
    return np.abs(traj_plus.populations - traj_minus.populations)


# pulse sequences and detuning scans ------------------------------------------


@dataclass(frozen=True)
class PulseSequence:
    """Named pulse pattern used by detuning scans."""

    kind: str
    pulses: tuple[Pulse, ...]
    couplings: tuple[float, float, float] = (1.0, 1.0, 1.0)

    @property
    def end(self) -> float:
        return max(p.end for p in self.pulses)


def sequential_sequence(coupling: float = 1.0, gap: float = 3.0, shape: str = "sin2", rise: float = 0.5) -> PulseSequence:
    """pi/2 on 13, pi on 12, pi/2 on 23, one after the other with ``gap`` between."""
    pulses = []
    t = 0.0
    for leg, angle in (("13", math.pi / 2), ("12", math.pi), ("23", math.pi / 2)):
        p = Pulse.for_rotation(leg, angle, coupling, start=t, shape=shape, rise=rise)
        pulses.append(p)
        t = p.end + gap
    return PulseSequence("sequential", tuple(pulses), (coupling,) * 3)


def simultaneous_sequence(coupling: float = 1.0, shape: str = "sin2", rise: float = 0.1) -> PulseSequence:
    """Three identical pulses whose area completes the Phi = pi/2 transfer."""
    unit = Pulse("12", 0.0, 1.0, shape=shape, rise=rise).unit_area()
    duration = SIMULTANEOUS_TRANSFER_AREA / (coupling * unit)
    pulses = tuple(Pulse(leg, 0.0, duration, shape=shape, rise=rise) for leg in LEGS)
    return PulseSequence("simultaneous", pulses, (coupling,) * 3)


def _scan_point(sequence: PulseSequence, Phi: float, delta: float) -> np.ndarray:
    params = ThreeLevelParams(
        couplings=sequence.couplings,
        delta12=delta,
        delta23=delta,
        delta13=2 * delta,
        phases=(Phi, 0.0, 0.0),
    )
    grid = np.array([0.0, sequence.end])
    plus, minus = propagate_pair(params, list(sequence.pulses), [1, 0, 0], grid)
    return selectivity(plus, minus)[-1]


def detuning_scan(sequence: PulseSequence, phis, deltas, jobs: int = 1) -> np.ndarray:
    """Final selectivity per level, shape (len(phis), len(deltas), 3).

    Detunings are applied as delta12 = delta23 = delta, delta13 = 2 delta.
    """
    points = [(Phi, d) for Phi in phis for d in deltas]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(partial(_scan_point, sequence), *zip(*points)))
    else:
        rows = [_scan_point(sequence, Phi, d) for Phi, d in points]
    return np.array(rows).reshape(len(phis), len(deltas), 3)


def trajectory_table(traj_plus: Trajectory, traj_minus: Trajectory):
    """Column names and rows for CSV export of a trajectory pair."""
    sel = selectivity(traj_plus, traj_minus)
    cols = ["t"]
    for tag in ("p", "m"):
        for n in (1, 2, 3):
            cols += [f"ReA{n}{tag}", f"ImA{n}{tag}"]
    cols += [f"P{n}{tag}" for tag in ("p", "m") for n in (1, 2, 3)]
    cols += [f"selectivity{n}" for n in (1, 2, 3)]
    data = [traj_plus.t[:, None]]
    for tr in (traj_plus, traj_minus):
        parts = np.empty((len(tr.t), 6))
        parts[:, 0::2] = tr.amplitudes.real
        parts[:, 1::2] = tr.amplitudes.imag
        data.append(parts)
    data += [traj_plus.populations, traj_minus.populations, sel]
    return cols, np.hstack(data)
