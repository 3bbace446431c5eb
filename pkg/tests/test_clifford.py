from __future__ import annotations

import numpy as np
import pytest

from topomap import clifford, gf2
from topomap.clifford import (
    LocalCliffordMap,
    MapNotFound,
    MappingDomainError,
    SyndromeTransport,
    apply,
    compose,
    find_map,
    tcc_to_ktc_map,
    verify_code_map,
    verify_symplectic,
)
from topomap.codes import (
    CodeDef,
    LatticeSpec,
    Template,
    block_checkerboard,
    build_ktc,
    build_ktc_stack,
    build_tcc_48,
    get_code,
)
from topomap.decoder import syndrome_bits, syndrome_matrix
from topomap.pauli import PauliOperator, op_range


def random_local(rng, L, sites, cells=2) -> PauliOperator:
    terms = [
        (int(rng.integers(cells)), int(rng.integers(cells)), int(rng.integers(sites)), "XYZ"[rng.integers(3)])
        for _ in range(4)
    ]
    return PauliOperator.from_terms(L, sites, terms, phase=int(rng.integers(4)))


def hadamard(shift: bool) -> LocalCliffordMap:
    """X <-> Z on every qubit; with ``shift`` the lattice is moved onto its dual."""
    h0 = (1, -1, 1) if shift else (0, 0, 0)
    h1 = (0, 0, 0) if shift else (0, 0, 1)
    images = (
        (Template.of([(*h0, "Z")]), Template.of([(*h0, "X")])),
        (Template.of([(*h1, "Z")]), Template.of([(*h1, "X")])),
    )
    return LocalCliffordMap("ktc", "ktc", 2, 2, images)


@pytest.fixture(scope="module")
def tcc_map():
    return tcc_to_ktc_map()


def test_identity_map(rng):
    code = build_ktc(5)
    ident = LocalCliffordMap.identity(code)
    p = random_local(rng, 5, 2)
    assert apply(ident, p) == p
    assert verify_symplectic(ident).ok is False  # group check not run yet
    assert verify_symplectic(ident).symplectic_ok
    assert verify_code_map(ident, code, code, 4).ok


@pytest.mark.parametrize("seed", range(5))
def test_apply_is_a_homomorphism(tcc_map, seed):
    rng = np.random.default_rng(seed)
    p, q = random_local(rng, 5, 8), random_local(rng, 5, 8)
    assert apply(tcc_map, p * q) == apply(tcc_map, p) * apply(tcc_map, q)
    assert op_range(apply(tcc_map, p)) <= op_range(p) + tcc_map.v


def test_apply_rejects_wrong_site_count(tcc_map):
    with pytest.raises(MappingDomainError):
        apply(tcc_map, PauliOperator.identity(3, 2))


def test_single_x_lands_on_both_copies(tcc_map):
    both = [s for s in range(8) if {(site % 4) // 2 for _, _, site, _ in tcc_map.image_of(s, "X").terms} == {0, 1}]
    assert both


def test_broken_map_fails_symplectic_check():
    x = Template.of([(0, 0, 0, "X")])
    bad = LocalCliffordMap("q", "q", 1, 1, ((x, x),))
    report = verify_symplectic(bad)
    assert not report.symplectic_ok and report.failures


def test_letter_swap_needs_lattice_shift():
    ktc = build_ktc(4)
    assert verify_symplectic(hadamard(False)).symplectic_ok
    assert not verify_code_map(hadamard(False), ktc, ktc, 4).ok
    assert verify_code_map(hadamard(True), ktc, ktc, 4).ok


@pytest.mark.parametrize("L", [2, 3, 4])
def test_bundled_tcc_map_verifies(tcc_map, L):
    assert not tcc_map.ancilla_in and not tcc_map.ancilla_out
    assert tcc_map.v <= 2
    target = block_checkerboard(build_ktc_stack(2, L))
    assert verify_code_map(tcc_map, build_tcc_48(L), target, L).ok


def test_find_map_identity_at_radius_zero():
    ktc = build_ktc(3)
    cmap = find_map(ktc, ktc, 0)
    assert verify_code_map(cmap, ktc, ktc, 3).ok and cmap.v == 0


def test_find_map_reports_rank_obstruction():
    ktc = build_ktc(3)
    trivial = CodeDef("trivial", LatticeSpec(2, 3), (Template.of([(0, 0, 0, "Z")]), Template.of([(0, 0, 1, "Z")])))
    with pytest.raises(MapNotFound):
        find_map(ktc, trivial, 1)


def test_text_round_trip(tcc_map):
    assert clifford.from_text(clifford.to_text(tcc_map)) == tcc_map


def test_compose_with_inverse_is_identity(tcc_map, rng):
    back = compose(tcc_map, clifford.inverse(tcc_map))
    p = random_local(rng, 5, 8)
    assert apply(back, p) == p


def test_transport_round_trip(tcc_map, rng):
    L = 4
    tcc = build_tcc_48(L)
    transport = SyndromeTransport(tcc_map, tcc, build_ktc_stack(2, L), L)
    errors = rng.integers(0, 2, (20, 2 * tcc.num_qubits), dtype=np.uint8)
    sigma = syndrome_bits(syndrome_matrix(tcc), errors)
    tau = transport.push(sigma)
    image = transport.forward(errors)
    assert np.array_equal(tau, syndrome_bits(syndrome_matrix(transport.target), image))
    assert np.array_equal(clifford.pull_correction(transport, image), errors)
    assert np.array_equal(clifford.push_syndrome(transport, sigma[0]), tau[0])


def test_impossible_syndrome_stays_impossible(tcc_map):
    L = 3
    transport = SyndromeTransport(tcc_map, build_tcc_48(L), build_ktc_stack(2, L), L)
    bad = np.zeros(len(transport.source.stabilizer_templates) * L * L, dtype=np.uint8)
    bad[0] = 1  # one violated face alone breaks the global parity constraints
    tau = transport.push(bad)
    reachable = gf2.SpanSolver(syndrome_matrix(transport.target).toarray() % 2)
    assert not reachable.contains(tau)
    assert reachable.contains(
        transport.push(syndrome_bits(syndrome_matrix(transport.source), np.eye(144, dtype=np.uint8)[:1])[0])
    )


def test_tscc_map_verifies():
    cmap = clifford.tscc_to_ktc_map()
    sz = get_code("tscc48-sz", 3)
    assert verify_code_map(cmap, sz, build_ktc_stack(2, 3), 3).ok
