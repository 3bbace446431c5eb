from __future__ import annotations

import itertools

import numpy as np
import pytest

from topomap import anyons
from topomap.anyons import (
    ChargeLabel,
    IllDefinedChargeError,
    UnknownChargeError,
    all_charges,
    build_string,
    charge_table,
    find_isomorphism,
    fuse,
    is_isomorphism,
    mutual_statistics,
    name_subsystem_fermions,
    spin,
    syndrome_charge,
)
from topomap.codes import get_code
from topomap.decoder import syndrome_bits, syndrome_matrix

E, M, F, VAC = (ChargeLabel.parse(x) for x in ("e", "m", "f", "0"))


@pytest.fixture(scope="module")
def tables():
    return {name: charge_table(name, 4) for name in ("ktc", "ktc-stack:2", "tcc48", "tscc48")}


def violated_cells(code, op):
    bits = syndrome_bits(syndrome_matrix(code), op.vector()[None, :])[0]
    return sorted({code.instance_key(int(i))[1:] for i in np.flatnonzero(bits)}), int(bits.sum())


def test_labels_parse_and_fuse():
    assert fuse(M, E) == F
    assert fuse(F, F) == VAC
    assert ChargeLabel.parse("[m,f]").vector == (0, 1, 1, 1)
    with pytest.raises(UnknownChargeError):
        ChargeLabel.parse("q")
    with pytest.raises(UnknownChargeError):
        ChargeLabel.of([1, 0, 1])


@pytest.mark.parametrize("text, expected", [("0", 1), ("e", 1), ("m", 1), ("f", -1), ("[m,f]", -1), ("[f,f]", 1)])
def test_spin_formula(text, expected):
    assert spin(ChargeLabel.parse(text)) == expected


@pytest.mark.parametrize("a, b, expected", [(E, M, -1), (E, F, -1), (M, F, -1), (E, E, 1), (VAC, F, 1)])
def test_ktc_mutual_statistics(a, b, expected):
    assert mutual_statistics("ktc", a, b) == expected
    assert mutual_statistics("ktc", a, b, shift=2) == expected


def test_statistics_need_l4():
    with pytest.raises(ValueError):
        mutual_statistics("ktc", E, M, L=3)


def test_ktc_table(tables):
    t = tables["ktc"]
    assert len(t.charges) == 4
    assert list(t.spins).count(-1) == 1 and t.label(int(np.flatnonzero(t.spins < 0)[0])) == "f"
    nonvac = [i for i, c in enumerate(t.charges) if any(c.vector)]
    for i, j in itertools.combinations(nonvac, 2):
        assert t.statistics[i, j] == -1


@pytest.mark.parametrize("name", ["ktc", "ktc-stack:2", "tcc48", "tscc48"])
def test_table_bicharacter_and_spin_composition(tables, name):
    t = tables[name]
    n = len(t.charges)
    assert np.array_equal(t.statistics, t.statistics.T)
    for a in range(n):
        for b in range(n):
            ab = t.fuse_index(a, b)
            assert t.spins[ab] == t.spins[a] * t.spins[b] * t.statistics[a, b]
            for c in range(n):
                assert t.statistics[a, t.fuse_index(b, c)] == t.statistics[a, b] * t.statistics[a, c]


def test_tcc_table_is_isomorphic_to_two_toric_codes(tables):
    m = find_isomorphism(tables["tcc48"], tables["ktc-stack:2"])
    assert m is not None and is_isomorphism(m, tables["tcc48"], tables["ktc-stack:2"])
    assert find_isomorphism(tables["ktc"], tables["ktc-stack:2"]) is None


def test_tscc_proper_charges_are_three_fermions(tables):
    t = tables["tscc48"]
    m = name_subsystem_fermions(t)
    proper = [i for i in t.proper if any(t.charges[i].vector)]
    assert len(proper) == 3 and all(t.spins[i] == -1 for i in proper)
    for i, j in itertools.combinations(proper, 2):
        assert t.statistics[i, j] == -1
        assert t.fuse_index(i, j) in proper
    names = {t.label(i): t.charges[i] for i in proper}
    assert fuse(names["f1"], names["f2"]) == names["f3"]
    for name, ref in anyons.TSCC_REFERENCE.items():
        image = ChargeLabel.of((names[name].array().astype(int) @ m) % 2)
        assert image == ChargeLabel.parse(ref)
    assert all(t.statistics[i, j] == 1 for i in t.proper for j in t.gauge)
    assert len(t.proper) * len(t.gauge) == 16


def test_zero_length_string_is_identity():
    s = build_string("ktc", 0, ((1, 1), (1, 1)))
    assert s.operator.is_identity()


def test_e_string_violates_two_plaquettes():
    code = get_code("ktc", 6)
    s = build_string("ktc", E, ((0, 0), (3, 0)), L=6)
    assert s.operator.weight == 3
    _, count = violated_cells(code, s.operator)
    assert count == 2
    bits = syndrome_bits(syndrome_matrix(code), s.operator.vector()[None, :])[0]
    assert all(code.instance_key(int(i))[0] == 1 for i in np.flatnonzero(bits))
    with pytest.raises(UnknownChargeError):
        build_string("ktc", 2, ((0, 0), (1, 0)), L=6)


def test_tscc_fermion_string_violates_only_near_endpoints():
    L = 8
    code = get_code("tscc48-sz", L)
    a, b = (1, 1), (5, 1)
    e = build_string("tscc48", 0, (a, b), L=L).operator
    m = build_string("tscc48", 1, (a, b), L=L).operator
    cells, count = violated_cells(code, e * m)
    assert count > 0

    def near(c, d):
        return max(abs(c[0] - d[0]), abs(c[1] - d[1])) <= 2

    assert all(near(c, a) or near(c, b) for c in cells)


def test_syndrome_charge():
    L = 6
    code = get_code("ktc", L)
    zeros = np.zeros(2 * L * L, dtype=np.uint8)
    assert syndrome_charge(code, zeros, (0, 0, 2, 2)) == VAC
    one_star = zeros.copy()
    one_star[1 * L + 1] = 1
    assert syndrome_charge(code, one_star, (0, 0, 2, 2)) == M
    two_plaq = zeros.copy()
    two_plaq[L * L + 1 * L + 1] = two_plaq[L * L + 2 * L + 1] = 1
    assert syndrome_charge(code, two_plaq, (0, 0, 2, 2)) == VAC
    with pytest.raises(IllDefinedChargeError):
        syndrome_charge(code, zeros, (0, 0, 5, 2))


def test_all_charges_count():
    assert len(all_charges(2)) == 16
