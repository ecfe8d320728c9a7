import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chiralwave.coupling import MINUS, PLUS
from chiralwave.cycles import (
    FORBIDDEN,
    NON_SELECTIVE,
    SELECTIVE,
    _traces,
    classify,
    cycle_report,
    enumerate_cycles,
    m_average_is_selective,
    m_path_products,
    make_candidate,
    verify_by_m_average,
)
from chiralwave.rotor import Molecule, find_state, load_molecule


@pytest.fixture(scope="module")
def menthol():
    return load_molecule("menthol")


@pytest.fixture(scope="module")
def xyz_cycle(menthol):
    states = [find_state(menthol, x) for x in ("0_00", "1_11", "1_10")]
    return make_candidate(menthol, states, ("z", "y", "x"))


def _cand(mol, labels, pols):
    return make_candidate(mol, [find_state(mol, x) for x in labels], pols)


def test_jmax1_triangles(menthol):
    cands = enumerate_cycles(menthol, 1)
    triangles = {frozenset(c.labels) for c in cands}
    assert frozenset({"0_00", "1_01", "1_11"}) in triangles
    assert frozenset({"0_00", "1_10", "1_11"}) in triangles
    assert len(triangles) == 4 and len(cands) == 4 * 27


def test_counts_jmax2(menthol):
    verdicts = [c.verdict for c in enumerate_cycles(menthol, 2)]
    assert len(verdicts) == 945
    assert (verdicts.count(FORBIDDEN), verdicts.count(NON_SELECTIVE), verdicts.count(SELECTIVE)) == (493, 242, 210)


def test_prolate_top_has_no_selective_cycle():
    top = Molecule("prolate", 5.0, 2.0, 2.0, mu_a=1.0)
    assert all(c.verdict != SELECTIVE for c in enumerate_cycles(top, 2))
    # the same top with all three dipole components does close selective cycles
    full = Molecule("prolate", 5.0, 2.0, 1.9, mu_a=1.0, mu_b=1.0, mu_c=1.0)
    assert any(c.verdict == SELECTIVE for c in enumerate_cycles(full, 1))


def test_conclusions(menthol, xyz_cycle):
    assert xyz_cycle.verdict == SELECTIVE
    assert xyz_cycle.types == frozenset("abc")
    assert _cand(menthol, ("0_00", "1_11", "1_10"), ("x", "x", "z")).verdict != SELECTIVE
    zzz = _cand(menthol, ("1_01", "1_11", "1_10"), ("z", "z", "z"))
    assert zzz.verdict == NON_SELECTIVE
    zxx = _cand(menthol, ("0_00", "1_11", "1_10"), ("z", "x", "x"))
    assert zxx.verdict == NON_SELECTIVE


def test_missing_type_is_not_selective():
    # D2 closure forces a, b and c onto any triangle of allowed legs, so a type
    # can only be missing when its dipole component vanishes
    assert all(c.types == frozenset("abc") for c in _MENTHOL_CANDS)
    no_c = Molecule("no-c", 1779.8, 692.63, 573.34, mu_a=1.3, mu_b=0.1)
    states = [find_state(no_c, x) for x in ("0_00", "1_11", "1_10")]
    cand = make_candidate(no_c, states, ("z", "y", "x"))
    assert cand.types == frozenset("ab") and cand.verdict != SELECTIVE


def test_static_m_sums(menthol, xyz_cycle):
    zzz = _cand(menthol, ("1_01", "1_11", "1_10"), ("z", "z", "z"))
    sp, sm, unsigned = _traces(menthol, zzz)
    assert unsigned > 0 and abs(sp) < 1e-12 and abs(sm) < 1e-12
    sp, sm, _ = _traces(menthol, xyz_cycle)
    assert abs(sp) > 1e-3 and sm == pytest.approx(-sp, abs=1e-14)
    assert verify_by_m_average(menthol, xyz_cycle) == pytest.approx(2 * abs(sp))


def test_shared_m0_state_gives_two_equal_subcycles(menthol, xyz_cycle):
    for en in (PLUS, MINUS):
        paths = m_path_products(menthol, en, xyz_cycle)
        assert sorted(paths) == [(0, 0, -1), (0, 0, 1)]
        a, b = paths.values()
        assert a == pytest.approx(b, abs=1e-15)


@pytest.mark.parametrize("name", ["menthol", "carvone", "hsoh"])
def test_symmetry_and_m_sum_agree(name):
    mol = load_molecule(name)
    cands = enumerate_cycles(mol, 2)
    assert cands
    for c in cands:
        assert (c.verdict == SELECTIVE) == m_average_is_selective(mol, c), str(c)


def test_hsoh_mixes_bands():
    cands = enumerate_cycles(load_molecule("hsoh"), 1)
    bands = {tuple(sorted({s.band for s in c.levels})) for c in cands if c.verdict == SELECTIVE}
    assert ("v0", "v1") in bands


def _relabel(mol, cand, order):
    # pols keyed by the unordered level pair, re-read for the new order
    by_pair = {}
    for (i, j), leg in zip(((0, 1), (0, 2), (1, 2)), cand.legs):
        by_pair[frozenset((i, j))] = leg.polarization
    pols = tuple(by_pair[frozenset((order[i], order[j]))] for i, j in ((0, 1), (0, 2), (1, 2)))
    return make_candidate(mol, [cand.levels[k] for k in order], pols)


_MENTHOL_CANDS = enumerate_cycles(load_molecule("menthol"), 2)


@settings(max_examples=150, deadline=None)
@given(st.sampled_from(_MENTHOL_CANDS), st.sampled_from([(1, 2, 0), (2, 0, 1), (0, 2, 1), (2, 1, 0)]))
def test_verdict_invariant_under_relabeling(cand, order):
    mol = load_molecule("menthol")
    other = _relabel(mol, cand, order)
    assert other.verdict == cand.verdict
    assert verify_by_m_average(mol, other) == pytest.approx(verify_by_m_average(mol, cand), abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(st.sampled_from([c for c in _MENTHOL_CANDS if c.verdict == SELECTIVE]))
def test_selective_legs_are_distinct(cand):
    assert len(set(cand.polarizations)) == 3
    types = [leg.types for leg in cand.legs]
    assert all(len(t) == 1 for t in types) and len(frozenset().union(*types)) == 3


def test_classify_is_what_make_candidate_stores(xyz_cycle):
    assert classify(xyz_cycle) == xyz_cycle.verdict


def test_report(menthol, xyz_cycle):
    csv_text = cycle_report(menthol, [xyz_cycle])
    header, row = csv_text.strip().splitlines()
    assert header == "levels,polarizations,types,sigma,verdict,m_average"
    assert row.startswith("0_00-1_11-1_10,zyx,") and ",selective," in row
    text = cycle_report(menthol, [xyz_cycle], fmt="text")
    assert "selective" in text
    with pytest.raises(ValueError):
        cycle_report(menthol, [xyz_cycle], fmt="json")


def test_bad_candidates(menthol):
    g = find_state(menthol, "0_00")
    with pytest.raises(ValueError):
        make_candidate(menthol, [g, g], ("x", "y"))
    with pytest.raises(ValueError):
        make_candidate(menthol, [g, find_state(menthol, "1_01"), find_state(menthol, "2_02")], ("x", "y", "z"))
    with pytest.raises(ValueError):
        enumerate_cycles(menthol, 0)
