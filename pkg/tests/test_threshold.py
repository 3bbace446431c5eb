from __future__ import annotations

import io
import math

import pytest

from topomap.decoder import NoiseChannel
from topomap.threshold import (
    CSV_HEADER,
    ThresholdPoint,
    emit_csv,
    estimate_threshold,
    parse_csv,
    parse_grid,
    parse_sizes,
    run_point,
    scan,
    worker_count,
)

TRIALS = 1_000_000


def synthetic(rate, sizes=(8, 12, 16), grid=None) -> list[ThresholdPoint]:
    grid = grid or parse_grid("0.06:0.14:0.01")
    return [
        ThresholdPoint("ktc", "mwpm", "bit_flip", L, p, TRIALS, round(rate(p, L) * TRIALS), 1)
        for L in sizes
        for p in grid
    ]


@pytest.mark.parametrize(
    "text, expected",
    [
        ("0.06:0.12:0.005", 13),
        ("0.010:0.030:0.002", 11),
        ("0.1:0.1:0.01", 1),
        ("0.01,0.02,0.05", 3),
    ],
)
def test_parse_grid_counts(text, expected):
    grid = parse_grid(text)
    assert len(grid) == expected
    assert grid == sorted(grid)


def test_parse_grid_endpoints_are_exact():
    grid = parse_grid("0.06:0.12:0.005")
    assert grid[0] == 0.06 and grid[-1] == 0.12 and grid[3] == 0.075


@pytest.mark.parametrize("bad", ["0.1:0.2", "0.2:0.1:0.01", "0.1:0.2:0"])
def test_parse_grid_rejects(bad):
    with pytest.raises(ValueError):
        parse_grid(bad)


def test_parse_sizes():
    assert parse_sizes("8,12,16") == [8, 12, 16]


def test_point_invariants():
    q = ThresholdPoint("ktc", "mwpm", "bit_flip", 8, 0.1, 400, 100, 1)
    assert q.failure_rate == 0.25
    assert q.stderr == math.sqrt(0.25 * 0.75 / 400)
    assert float(q.row()[8]) == q.stderr
    with pytest.raises(ValueError):
        ThresholdPoint("ktc", "mwpm", "bit_flip", 8, 0.1, 10, 11, 1)


def test_size_independent_curves_have_no_threshold():
    est = estimate_threshold(synthetic(lambda p, L: p))
    assert not est.detected
    assert all(p is None for _, p in est.crossings)


def test_constructed_crossing_is_found():
    est = estimate_threshold(synthetic(lambda p, L: min(1.0, max(0.0, 0.3 + (p - 0.1) * L))))
    assert est.detected and abs(est.p_star - 0.1) <= 0.01
    assert len(est.crossings) == 2


def test_estimate_needs_two_sizes_and_three_points():
    with pytest.raises(ValueError):
        estimate_threshold(synthetic(lambda p, L: p, sizes=(8,)))
    with pytest.raises(ValueError):
        estimate_threshold(synthetic(lambda p, L: p, grid=[0.1, 0.2]))


def test_csv_round_trip():
    points = synthetic(lambda p, L: min(1.0, max(0.0, 0.3 + (p - 0.1) * L)))
    est = estimate_threshold(points)
    text = emit_csv(points, est)
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    assert any(line.startswith("# p_star=") for line in text.splitlines())
    again = parse_csv(text)
    assert again == sorted(points, key=lambda q: (q.code, q.L, q.p))
    assert estimate_threshold(again) == est


def test_run_point_rejects_no_trials():
    with pytest.raises(ValueError):
        run_point("ktc", NoiseChannel("bit_flip", 0.1), None, 4, 0, 1)


def test_run_point_independent_of_workers():
    ch = NoiseChannel("bit_flip", 0.08)
    a = run_point("ktc", ch, None, 6, 1200, 5, workers=1)
    b = run_point("ktc", ch, None, 6, 1200, 5, workers=2)
    assert a == b


def test_single_point_scan_equals_run_point():
    buf = io.StringIO()
    points = scan("ktc", "bit_flip", [0.07], [6], 600, 2, out=buf)
    assert points == [run_point("ktc", NoiseChannel("bit_flip", 0.07), None, 6, 600, 2, workers=1)]
    assert buf.getvalue().splitlines()[0] == ",".join(CSV_HEADER)
    with pytest.raises(ValueError):
        scan("ktc", "bit_flip", [], [6], 10, 1)


def test_larger_lattices_do_better_below_threshold():
    small = run_point("ktc", NoiseChannel("bit_flip", 0.05), None, 8, 4000, 1)
    large = run_point("ktc", NoiseChannel("bit_flip", 0.05), None, 16, 4000, 1)
    assert small.failure_rate - large.failure_rate > 3 * math.hypot(small.stderr, large.stderr)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("TOPOMAP_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.delenv("TOPOMAP_WORKERS")
    assert worker_count() >= 1
