import math
import warnings

import numpy as np
import pytest

from chiralwave.coupling import (
    MINUS,
    PLUS,
    POLARIZATIONS,
    Enantiomer,
    cycle_product,
    level_block,
    transition_element,
    transition_types,
)
from chiralwave.rotor import eigenstates, find_state, irrep_product, load_molecule


@pytest.fixture(scope="module")
def menthol():
    return load_molecule("menthol")


def _levels(mol, Jmax, band=None):
    return [s for J in range(Jmax + 1) for s in eigenstates(mol, J, band)]


def test_a_type_z_element(menthol):
    g = find_state(menthol, "0_00").with_m(0)
    e = find_state(menthol, "1_01").with_m(0)
    el = transition_element(menthol, PLUS, e, g, "z")
    assert el.value == pytest.approx(-menthol.mu_a / math.sqrt(3), abs=1e-14)
    assert el.contributing_types == frozenset("a")


def test_delta_m_rules(menthol):
    g = find_state(menthol, "0_00").with_m(0)
    e = find_state(menthol, "1_01")
    assert transition_element(menthol, PLUS, e.with_m(1), g, "z").value == 0
    assert transition_element(menthol, PLUS, e.with_m(0), g, "x").value == 0
    assert transition_element(menthol, PLUS, e.with_m(1), g, "y").value != 0


def test_c_type_flips_with_enantiomer(menthol):
    g = find_state(menthol, "0_00").with_m(0)
    e = find_state(menthol, "1_10").with_m(0)
    assert transition_types(e, g) == frozenset("c")
    p = transition_element(menthol, PLUS, e, g, "z").value
    m = transition_element(menthol, MINUS, e, g, "z").value
    assert p != 0 and m == pytest.approx(-p, abs=1e-15)


@pytest.mark.parametrize(
    "a,b,types", [("0_00", "1_01", "a"), ("1_10", "1_11", "a"), ("0_00", "1_11", "b"), ("0_00", "1_10", "c")]
)
def test_transition_types(menthol, a, b, types):
    assert transition_types(find_state(menthol, a), find_state(menthol, b)) == frozenset(types)


def test_types_follow_irreps(menthol):
    irrep_of = {"a": "Ba", "b": "Bb", "c": "Bc"}
    levels = _levels(menthol, 2)
    for bra in levels:
        for ket in levels:
            numeric = set()
            for Mb in range(-bra.J, bra.J + 1):
                for Mk in range(-ket.J, ket.J + 1):
                    for p in POLARIZATIONS:
                        numeric |= transition_element(menthol, PLUS, bra.with_m(Mb), ket.with_m(Mk), p).contributing_types
            assert numeric == set(transition_types(bra, ket))
            for t in numeric:
                assert irrep_product(bra.irrep, irrep_of[t], ket.irrep) == "A"


def test_hermitian_and_enantiomer_magnitudes(menthol):
    levels = _levels(menthol, 2)
    for bra in levels:
        for ket in levels:
            for p in POLARIZATIONS:
                fwd = level_block(menthol, PLUS, bra, ket, p)
                back = level_block(menthol, PLUS, ket, bra, p)
                assert np.allclose(fwd, back.conj().T, atol=1e-14)
                assert np.allclose(np.abs(fwd), np.abs(level_block(menthol, MINUS, bra, ket, p)), atol=1e-14)


@pytest.mark.parametrize("name", ["menthol", "carvone"])
def test_dipole_sum_rule(name):
    # sum over every final state and lab axis of |<f|mu_p|i>|^2 equals |mu|^2
    mol = load_molecule(name)
    mu2 = sum(m * m for m in mol.dipoles)
    levels = _levels(mol, 4)
    for ket in _levels(mol, 3):
        for Mk in range(-ket.J, ket.J + 1):
            total = 0.0
            for bra in levels:
                for p in POLARIZATIONS:
                    col = level_block(mol, PLUS, bra, ket, p)[:, Mk + ket.J]
                    total += float(np.sum(np.abs(col) ** 2))
            assert total == pytest.approx(mu2, rel=1e-12)


def test_cycle_product_signs(menthol):
    s = [find_state(menthol, x) for x in ("0_00", "1_01", "1_11")]
    pols = ("x", "y", "z")
    for M in (1, -1):
        states = (s[0].with_m(0), s[1].with_m(M), s[2].with_m(M))
        p = cycle_product(menthol, PLUS, states, pols)
        m = cycle_product(menthol, MINUS, states, pols)
        assert abs(p) > 1e-6
        assert m == pytest.approx(-p, abs=1e-15)
    up = cycle_product(menthol, PLUS, (s[0].with_m(0), s[1].with_m(1), s[2].with_m(1)), pols)
    down = cycle_product(menthol, PLUS, (s[0].with_m(0), s[1].with_m(-1), s[2].with_m(-1)), pols)
    assert up == pytest.approx(down, abs=1e-15)


def test_cycle_with_forbidden_leg_warns(menthol):
    s = [find_state(menthol, x).with_m(0) for x in ("0_00", "1_01", "1_11")]
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        assert cycle_product(menthol, PLUS, tuple(s), ("x", "y", "z")) == 0
    assert w and issubclass(w[0].category, RuntimeWarning)


def test_errors(menthol):
    g = find_state(menthol, "0_00")
    with pytest.raises(ValueError):
        transition_element(menthol, PLUS, g.with_m(0), g.with_m(0), "w")
    with pytest.raises(ValueError):
        transition_element(menthol, PLUS, g, g.with_m(0), "z")
    with pytest.raises(ValueError):
        Enantiomer(0)
    hsoh = load_molecule("hsoh")
    carvone_state = find_state(load_molecule("carvone"), "1_01").with_m(0)
    with pytest.raises(ValueError):
        transition_element(hsoh, PLUS, carvone_state, find_state(hsoh, "0_00", "v0").with_m(0), "z")
