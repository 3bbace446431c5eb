from __future__ import annotations

import itertools

import numpy as np
import pytest

from topomap import gf2


def brute_rank(m: np.ndarray) -> int:
    """Rank as log2 of the span size (small matrices only)."""
    span = {tuple((np.array(c) @ m) % 2) for c in itertools.product((0, 1), repeat=m.shape[0])}
    return int(np.log2(len(span)))


@pytest.mark.parametrize("shape", [(1, 1), (3, 5), (6, 4), (8, 70), (5, 130)])
def test_pack_round_trip(rng, shape):
    m = rng.integers(0, 2, shape, dtype=np.uint8)
    packed, n = gf2.pack(m)
    assert np.array_equal(gf2.unpack(packed, n), m)


@pytest.mark.parametrize("seed", range(8))
def test_rank_matches_span_size(seed):
    m = np.random.default_rng(seed).integers(0, 2, (6, 9), dtype=np.uint8)
    assert gf2.rank(m) == brute_rank(m)


def test_row_reduce_transform(rng):
    m = rng.integers(0, 2, (7, 12), dtype=np.uint8)
    rref, pivots, t = gf2.row_reduce(m, track=True)
    assert np.array_equal((t[: len(pivots)].astype(int) @ m) % 2, rref)
    assert np.array_equal(rref[:, pivots], np.eye(len(pivots), dtype=np.uint8))


def test_nullspace_and_left_kernel(rng):
    m = rng.integers(0, 2, (5, 11), dtype=np.uint8)
    ns = gf2.nullspace(m)
    assert ns.shape[0] == 11 - gf2.rank(m)
    assert not ((m.astype(int) @ ns.T) % 2).any()
    tall = rng.integers(0, 2, (9, 4), dtype=np.uint8)
    lk = gf2.left_kernel(tall)
    assert lk.shape[0] == 9 - gf2.rank(tall)
    assert not ((lk.astype(int) @ tall) % 2).any()


def test_span_solver(rng):
    rows = rng.integers(0, 2, (4, 10), dtype=np.uint8)
    solver = gf2.SpanSolver(rows)
    for coeffs in itertools.product((0, 1), repeat=4):
        v = (np.array(coeffs) @ rows) % 2
        c = solver.solve(v)
        assert c is not None and np.array_equal((c.astype(int) @ rows) % 2, v)
    outside = [v for v in itertools.product((0, 1), repeat=10) if not solver.contains(np.array(v))]
    assert len(outside) == 2**10 - 2 ** gf2.rank(rows)
    batch = np.array(outside[:5] + [rows[0]], dtype=np.uint8)
    _, ok = solver.solve_many(batch)
    assert ok.tolist() == [False] * 5 + [True]


def test_solve_linear_system(rng):
    a = rng.integers(0, 2, (6, 6), dtype=np.uint8)
    x = rng.integers(0, 2, 6, dtype=np.uint8)
    b = (a.astype(int) @ x) % 2
    got = gf2.solve(a, b)
    assert np.array_equal((a.astype(int) @ got) % 2, b)
