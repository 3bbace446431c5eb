from __future__ import annotations

from collections import Counter
from dataclasses import replace

import numpy as np
import pytest

from topomap import codes, gf2
from topomap.codes import (
    CodeConstructionError,
    InvalidWindowError,
    build_intermediate_sz,
    build_ktc,
    build_ktc_stack,
    build_tcc_48,
    compute_stabilizer_from_gauge,
    get_code,
    local_centralizer_check,
    logical_count,
)
from topomap.pauli import (
    PauliOperator,
    commute_sign,
    op_range,
    symplectic_form,
    translate,
)


def all_commute(rows: np.ndarray, others: np.ndarray | None = None) -> bool:
    return not symplectic_form(rows, rows if others is None else others).any()


def test_ktc_size_rank_and_k():
    code = build_ktc(3)
    assert code.num_qubits == 18
    m = code.stabilizer_matrix()
    assert m.shape[0] == 18
    assert gf2.rank(m) == 16
    assert logical_count(code) == 2


def test_ktc_star_is_z_and_plaquette_is_x():
    star, plaq = build_ktc(4).stabilizer_templates
    assert star.letters() == "Z" and plaq.letters() == "X"
    assert star.weight == plaq.weight == 4


@pytest.mark.parametrize("L", [3, 4, 5])
def test_ktc_ranges_and_translation(L):
    code = build_ktc(L)
    star, plaq = code.stabilizer_templates
    assert op_range(star.place(L, 2)) == op_range(plaq.place(L, 2)) == 2
    assert translate(star.place(L, 2), 1, 0) == star.place(L, 2, 1, 0)


def test_ktc_crossing_strings_anticommute():
    L = 4
    zrow = PauliOperator.from_terms(L, 2, [(x, 0, 1, "Z") for x in range(L)])
    xcol = PauliOperator.from_terms(L, 2, [(0, y, 1, "X") for y in range(L)])
    assert commute_sign(zrow, xcol) == -1


def test_stack_of_one_is_ktc():
    assert build_ktc_stack(1, 3) == build_ktc(3)
    with pytest.raises(CodeConstructionError):
        build_ktc_stack(0, 3)


def test_stack_layers_are_disjoint_and_additive():
    code = build_ktc_stack(2, 3)
    assert logical_count(code) == 4
    sites = [{s for _, _, s, _ in t.terms} for t in code.stabilizer_templates]
    assert sites[0] | sites[1] == {0, 1}
    assert sites[2] | sites[3] == {2, 3}


def test_tcc_counts_and_weights():
    code = build_tcc_48(2)
    assert code.num_qubits == 32
    assert logical_count(code) == 4
    spectrum = Counter((t.weight, t.letters()) for t in code.stabilizer_templates)
    assert spectrum == {(4, "X"): 2, (8, "X"): 2, (4, "Z"): 2, (8, "Z"): 2}


@pytest.mark.parametrize("name", ["ktc", "ktc-stack:2", "tcc48", "tscc48-sz"])
def test_stabilizers_commute_and_k_is_even(name):
    code = get_code(name, 3)
    m = code.stabilizer_matrix()
    assert all_commute(m)
    assert logical_count(code) % 2 == 0


def test_intermediate_code_has_four_logicals():
    assert logical_count(get_code("tscc48-sz", 3)) == 4
    assert logical_count(get_code("tscc48-sz", 4)) == 4


@pytest.fixture(scope="module")
def tscc3():
    return get_code("tscc48", 3)


def test_tscc_edge_incidence(tscc3):
    # ruby form: every qubit meets two ZZ triangle edges, one XX and one YY edge
    incident = {s: [] for s in range(tscc3.sites)}
    for t in tscc3.gauge_templates:
        assert t.weight == 2 and len(set(t.letters())) == 1
        for dx, dy, s, letter in t.terms:
            incident[s].append(letter)
    for s, letters in incident.items():
        assert sorted(letters) == ["X", "Y", "Z", "Z"], s
    kinds = Counter(tscc3.meta["edge_kinds"])
    assert kinds["triangle"] == 24 and len(tscc3.gauge_templates) == 48


def test_tscc_stabilizer_is_centre_of_gauge_group(tscc3):
    S, G = tscc3.stabilizer_matrix(), tscc3.gauge_matrix()
    assert len(tscc3.stabilizer_templates) > 0
    assert all_commute(S, G)
    solver = gf2.SpanSolver(G)
    assert all(solver.contains(row) for row in S)
    weights = [t.weight for t in tscc3.stabilizer_templates]
    assert max(weights) <= 24 and max(weights) >= 10


def test_tscc_stabilizer_is_translation_closed(tscc3):
    S = tscc3.stabilizer_matrix()
    solver = gf2.SpanSolver(S)
    for t in tscc3.stabilizer_templates:
        assert solver.contains(translate(t.place(3, 24), 1, 2).vector())


def test_intermediate_sits_between_s_and_g(tscc3):
    sz = build_intermediate_sz(tscc3)
    solid = {tscc3.gauge_templates[i] for i in tscc3.meta["solid"]}
    assert solid <= set(sz.stabilizer_templates)
    Sp = gf2.SpanSolver(sz.stabilizer_matrix())
    assert all(Sp.contains(row) for row in tscc3.stabilizer_matrix())
    G = gf2.SpanSolver(tscc3.gauge_matrix())
    assert all(G.contains(row) for row in sz.stabilizer_matrix())
    with pytest.raises(CodeConstructionError):
        build_intermediate_sz(build_ktc(3))


def test_stabilizer_from_gauge_regenerates_ktc():
    ktc = build_ktc(3)
    as_subsystem = replace(ktc, stabilizer_templates=(), kind="subsystem", gauge_templates=ktc.stabilizer_templates)
    out = compute_stabilizer_from_gauge(as_subsystem)
    L = 5
    got = codes.check_matrix(out, L, 2)
    want = codes.check_matrix(ktc.stabilizer_templates, L, 2)
    assert gf2.rank(np.concatenate([got, want])) == gf2.rank(got) == gf2.rank(want)


def test_stabilizer_from_gauge_ignores_gauge_order(tscc3):
    shuffled = replace(tscc3, stabilizer_templates=(), gauge_templates=tscc3.gauge_templates[::-1])
    out = compute_stabilizer_from_gauge(shuffled)
    a = codes.check_matrix(out, 4, 24)
    b = tscc3.at(4).stabilizer_matrix()
    assert gf2.rank(np.concatenate([a, b])) == gf2.rank(a) == gf2.rank(b)
    with pytest.raises(CodeConstructionError):
        compute_stabilizer_from_gauge(build_ktc(3))


@pytest.mark.parametrize("name, against", [("ktc", "stabilizer"), ("tcc48", "stabilizer")])
def test_centralizer_check_passes(name, against):
    report = local_centralizer_check(get_code(name, 6), 2, against)
    assert report.passed and report.checked > 0


def test_centralizer_check_finds_hole():
    ktc = build_ktc(6)
    holed = replace(ktc, stabilizer_templates=ktc.stabilizer_templates[1:])
    report = local_centralizer_check(holed, 2)
    assert not report.passed
    witness = report.counterexamples[0]
    assert all(commute_sign(witness, s) == 1 for s in holed.stabilizers())


def test_centralizer_window_must_not_wrap():
    with pytest.raises(InvalidWindowError):
        local_centralizer_check(build_ktc(3), 2)


def test_unknown_code_name():
    with pytest.raises(CodeConstructionError):
        get_code("nope", 3)
    assert set(codes.CODE_NAMES) == {"ktc", "ktc-stack:n", "tcc48", "tscc48", "tscc48-sz"}
