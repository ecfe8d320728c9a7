import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chiralwave.coupling import MINUS, PLUS
from chiralwave.rotor import load_molecule
from chiralwave.scenarios import (
    ConfigError,
    FieldSpec,
    LevelSet,
    apply_overrides,
    build_system,
    bundled_scenarios,
    config_hash,
    load_config,
    m_averaged_populations,
    parse_angle,
    parse_time,
    resolve,
    run_scenario,
    time_unit_of,
)
from chiralwave.units import coupling_over_hb, field_amplitude


def xyz_config(**run):
    cfg = {
        "molecule": "menthol",
        "levels": ["0_00", "1_11", "1_10"],
        "initial": "0_00",
        "fields": [
            {"name": "z", "polarization": "z", "resonance": ["0_00", "1_11"], "intensity": 6.3},
            {"name": "y", "polarization": "y", "resonance": ["0_00", "1_10"], "intensity": 0.1},
            {"name": "x", "polarization": "x", "resonance": ["1_11", "1_10"], "intensity": 0.04},
        ],
        "run": {"sequence": "simultaneous", "Phi": "pi/2", "points": 41},
    }
    cfg["run"].update(run)
    return cfg


# units


def test_zero_intensity():
    assert field_amplitude(0.0) == 0.0
    assert coupling_over_hb(1.0, 0.0, 1000.0) == 0.0
    with pytest.raises(ValueError):
        field_amplitude(-1)


@pytest.mark.parametrize(
    "mu,intensity,expect", [(0.052, 1300, 0.0017), (0.055, 1000, 0.0016), (0.698, 13, 0.0023)]
)
def test_hsoh_coupling_ratios(mu, intensity, expect):
    b = load_molecule("hsoh").B
    value = coupling_over_hb(mu, intensity, b)
    assert float(f"{value:.2g}") == expect


@pytest.mark.parametrize("name,t0", [("menthol", 1.4e-9), ("carvone", 1.5e-9), ("hsoh", 65e-12)])
def test_time_units(name, t0):
    assert time_unit_of(load_molecule(name)) == pytest.approx(t0, rel=0.04)


def test_parse_angle_and_time():
    assert parse_angle("pi/2") == pytest.approx(math.pi / 2)
    assert parse_angle("3pi/2") == pytest.approx(1.5 * math.pi)
    assert parse_angle("-0.5*pi") == pytest.approx(-math.pi / 2)
    assert parse_angle(1) == 1.0
    with pytest.raises(ConfigError):
        parse_angle("half turn")
    assert parse_time("5.6 us", 1e-9) == pytest.approx(5600)
    assert parse_time("20 t0", 1e-9) == 20
    with pytest.raises(ConfigError):
        parse_time("5 fortnights", 1.0)


# system assembly


@pytest.fixture(scope="module")
def xyz_system():
    r = resolve(xyz_config())
    return r, {en: build_system(r.mol, r.levels, r.fields, en, r.cutoff) for en in (PLUS, MINUS)}


def test_level_set_size(xyz_system):
    r, _ = xyz_system
    assert r.levels.size == 7
    assert r.levels.labels == ["0_00", "1_11", "1_10"]
    assert r.levels.index(2, -1) == 4


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 200.0))
def test_hamiltonian_hermitian(xyz_system, t):
    _, systems = xyz_system
    for s in systems.values():
        h = s(t)
        assert np.max(np.abs(h - h.conj().T)) <= 1e-12


def test_z_field_couples_m0_only():
    mol = load_molecule("menthol")
    levels = LevelSet.from_labels(mol, ["0_00", "1_10"])
    f = FieldSpec("z", ("0_00", "1_10"), 1.0, duration=10.0)
    s = build_system(mol, levels, [f], PLUS)
    k = s.resonant[0]
    nz = np.argwhere(np.abs(s.ops[k]) > 0)
    assert nz.tolist() == [[levels.index(0, 0), levels.index(1, 0)]]


@pytest.mark.parametrize("pair", [("1_01", "2_21"), ("0_00", "2_02")])
def test_dark_resonance_rejected(pair):
    # same D2 symmetry, and a Delta J = 2 pair
    mol = load_molecule("menthol")
    levels = LevelSet.from_labels(mol, pair)
    with pytest.raises(ConfigError):
        build_system(mol, levels, [FieldSpec("z", pair, 1.0)], PLUS)


def test_xyz_block_structure(xyz_system):
    # two sub-cycles (0,0,+1) and (0,0,-1) sharing the M = 0 states
    r, systems = xyz_system
    s = systems[PLUS]
    lv = r.levels
    adj = sum(np.abs(s.ops[k]) for k in s.resonant.values())
    adj = (adj + adj.T) > 0
    seen, frontier = {lv.index(0, 0)}, [lv.index(0, 0)]
    while frontier:
        i = frontier.pop()
        for j in np.flatnonzero(adj[i]):
            if int(j) not in seen:
                seen.add(int(j))
                frontier.append(int(j))
    assert seen == {lv.index(0, 0), lv.index(1, 0), lv.index(2, -1), lv.index(2, 1)}


# dynamics


@pytest.fixture(scope="module")
def xyz_short():
    return run_scenario(xyz_config(points=21))


def test_initial_state(xyz_short):
    for en in (PLUS, MINUS):
        assert xyz_short.populations[en][0].tolist() == [1.0, 0.0, 0.0]


def test_norm(xyz_short):
    assert xyz_short.norm_drift() < 1e-8
    for pops in xyz_short.populations.values():
        assert np.allclose(pops.sum(axis=1), 1.0, atol=1e-8)


def test_m_reflection_symmetry(xyz_short):
    lv = xyz_short.levels
    for en in (PLUS, MINUS):
        amps = xyz_short.amplitudes[en][0]
        for i, s in enumerate(lv.levels):
            for M in range(1, s.J + 1):
                a = np.abs(amps[:, lv.index(i, M)])
                b = np.abs(amps[:, lv.index(i, -M)])
                assert np.allclose(a, b, atol=1e-9)


def test_selectivity_develops(xyz_short):
    assert xyz_short.final_selectivity[1:] == pytest.approx([0.94, 0.94], abs=0.01)
    assert "selectivity" in xyz_short.summary()


def _flat_custom(scale):
    cfg = xyz_config()
    cfg["run"] = {"sequence": "custom", "Phi": 0.7, "points": 11, "cutoff": 0.0}
    for f in cfg["fields"]:
        f.update(shape="flat", start=0.0, duration=40.0 / scale)
        f["intensity"] *= scale**2
    return cfg


def test_rabi_area_scaling():
    a = run_scenario(_flat_custom(1.0))
    b = run_scenario(_flat_custom(2.0))
    for en in (PLUS, MINUS):
        assert np.max(np.abs(a.populations[en] - b.populations[en])) < 1e-6


def test_m_average_over_initial_sublevels():
    cfg = {
        "molecule": "menthol",
        "levels": ["1_01", "1_11", "1_10"],
        "initial": "1_01",
        "fields": [
            {"polarization": "z", "resonance": ["1_01", "1_11"], "intensity": 1.0, "duration": 300},
            {"polarization": "z", "resonance": ["1_01", "1_10"], "intensity": 1.0, "duration": 300},
            {"polarization": "z", "resonance": ["1_11", "1_10"], "intensity": 1.0, "duration": 300},
        ],
        "run": {"Phi": "pi/2", "points": 5},
    }
    res = run_scenario(cfg)
    assert res.amplitudes[PLUS].shape[0] == 3
    assert np.max(res.selectivity) < 1e-8
    again = m_averaged_populations(res, PLUS)
    assert np.array_equal(again, res.populations[PLUS])


# configuration


def test_bundled_scenarios_load():
    names = bundled_scenarios()
    assert "menthol_simultaneous" in names and len(names) >= 7
    for n in names:
        resolve(load_config(n))


def test_unknown_keys_rejected():
    cfg = xyz_config()
    cfg["fields"][0]["colour"] = "red"
    with pytest.raises(ConfigError, match="colour"):
        load_config(cfg)
    cfg = xyz_config()
    cfg["extras"] = 1
    with pytest.raises(ConfigError):
        load_config(cfg)
    with pytest.raises(ConfigError):
        apply_overrides(xyz_config(), ["run.speed=3"])


def test_unquoted_label_rejected():
    cfg = xyz_config()
    cfg["levels"] = [0, "1_11", "1_10"]
    with pytest.raises(ConfigError, match="quote"):
        resolve(cfg)


@pytest.mark.parametrize(
    "patch",
    [
        {"run": {"sequence": "interleaved"}},
        {"run": {"points": 1}},
        {"run": {"light_shift": "maybe"}},
        {"fields": []},
    ],
)
def test_bad_configs(patch):
    cfg = xyz_config()
    for k, v in patch.items():
        if isinstance(v, dict):
            cfg[k].update(v)
        else:
            cfg[k] = v
    with pytest.raises(ConfigError):
        resolve(cfg)


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("no_such_scenario")


def test_overrides_and_hash():
    base = xyz_config()
    cfg = apply_overrides(base, ["fields.z.intensity=3", "fields.1.phase=pi/4", "run.points=7"])
    assert cfg["fields"][0]["intensity"] == 3
    assert cfg["fields"][1]["phase"] == "pi/4"
    assert base["fields"][0]["intensity"] == 6.3
    assert config_hash(cfg) == config_hash(apply_overrides(base, ["fields.z.intensity=3", "fields.1.phase=pi/4", "run.points=7"]))
    assert config_hash(cfg) != config_hash(base)
    with pytest.raises(ConfigError):
        apply_overrides(base, ["fields.w.intensity=3"])
    with pytest.raises(ConfigError):
        apply_overrides(base, ["run.points"])
