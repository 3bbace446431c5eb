"""Monte Carlo failure-rate sweeps and threshold estimation."""

from __future__ import annotations

import csv
import functools
import io
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from topomap.decoder import DECODERS, NoiseChannel, Pipeline, sample_errors, trial_labels

CSV_HEADER = ("code", "decoder", "channel", "L", "p", "trials", "failures", "failure_rate", "stderr", "seed")
CHUNK = 500
THRESHOLD_CODES = ("ktc", "tcc48", "tscc48")


@dataclass(frozen=True)
class ThresholdPoint:
    code: str
    decoder: str
    channel: str
    L: int
    p: float
    trials: int
    failures: int
    seed: int

    def __post_init__(self):
        if not 0 <= self.failures <= self.trials:
            raise ValueError("failures must lie in [0, trials]")

    @property
    def failure_rate(self) -> float:
        return self.failures / self.trials

    @property
    def stderr(self) -> float:
        r = self.failure_rate
        return math.sqrt(r * (1 - r) / self.trials)

    def row(self) -> list[str]:
        return [
            self.code,
            self.decoder,
            self.channel,
            str(self.L),
            format_p(self.p),
            str(self.trials),
            str(self.failures),
            repr(self.failure_rate),
            repr(self.stderr),
            str(self.seed),
        ]


@dataclass(frozen=True)
class ThresholdEstimate:
    p_star: float | None
    method: str
    crossings: tuple[tuple[tuple[int, int], float | None], ...] = field(default_factory=tuple)

    @property
    def detected(self) -> bool:
        return self.p_star is not None

    def lines(self) -> list[str]:
        out = []
        if self.detected:
            out.append(f"# p_star={self.p_star!r} method={self.method}")
        else:
            out.append(f"# p_star=none method={self.method} (no threshold detected)")
        for (a, b), p in self.crossings:
            out.append(f"# crossing L={a},{b} p={'none' if p is None else repr(p)}")
        return out


def format_p(p: float) -> str:
    return f"{p:.12g}"


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (both ends inclusive, tolerance 1e-12) or a comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid {text!r} is not start:stop:step")
        start, stop, step = (float(x) for x in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"grid {text!r} is empty")
        count = int(math.floor((stop - start) / step + 1e-12)) + 1
        return [float(format_p(start + i * step)) for i in range(count)]
    return [float(x) for x in text.split(",") if x.strip()]


def parse_sizes(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def worker_count() -> int:
    env = os.environ.get("TOPOMAP_WORKERS")
    if env:
        return max(1, int(env))
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


@functools.lru_cache(maxsize=4)
def _pipeline(code: str, L: int) -> Pipeline:
    return Pipeline(code, L)


def count_failures(code: str, kind: str, p: float, L: int, seed: int, start: int, count: int) -> int:
    """Failures among trials ``start .. start + count - 1``; pure given its arguments."""
    pipe = _pipeline(code, L)
    channel = NoiseChannel(kind, p)
    pipe.configure(channel)
    errors = sample_errors(channel, pipe.n, seed, start, count, trial_labels(code, L, channel))
    return int(pipe.run(errors).sum())


def _chunks(trials: int) -> list[tuple[int, int]]:
    return [(s, min(CHUNK, trials - s)) for s in range(0, trials, CHUNK)]


def run_point(
    code: str, channel: NoiseChannel, p: float | None, L: int, trials: int, seed: int, workers: int | None = None
) -> ThresholdPoint:
    """Failures over ``trials`` independent trials; independent of the worker count."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if p is not None:
        channel = NoiseChannel(channel.kind, p)
    workers = worker_count() if workers is None else workers
    jobs = [(code, channel.kind, channel.p, L, seed, s, c) for s, c in _chunks(trials)]
    if workers <= 1 or len(jobs) == 1:
        failures = sum(count_failures(*job) for job in jobs)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            failures = sum(pool.map(_count_job, jobs))
    return ThresholdPoint(code, DECODERS[code], channel.kind, L, channel.p, trials, failures, seed)


def _count_job(job) -> int:
    return count_failures(*job)


def scan(
    code: str,
    channel: str,
    p_grid: Sequence[float],
    L_list: Sequence[int],
    trials: int,
    seed: int,
    out: TextIO | None = None,
    workers: int | None = None,
) -> list[ThresholdPoint]:
    """All (L, p) points, streamed to ``out`` as they finish; returned sorted by (code, L, p)."""
    if not p_grid or not L_list:
        raise ValueError("scan needs nonempty grids")
    writer = None
    if out is not None:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        out.flush()
    points = []
    for L in L_list:
        for p in p_grid:
            point = run_point(code, NoiseChannel(channel, p), None, L, trials, seed, workers)
            points.append(point)
            if writer is not None:
                writer.writerow(point.row())
                out.flush()
    return sorted(points, key=lambda q: (q.code, q.L, q.p))


def _crossing(ps: np.ndarray, a: np.ndarray, b: np.ndarray) -> float | None:
    """First p where curve b (larger L) rises above curve a, by linear interpolation."""
    d = b - a
    for i in range(len(ps) - 1):
        if d[i] == 0 and i == 0:
            continue
        if (d[i] < 0 <= d[i + 1]) or (d[i] <= 0 < d[i + 1]):
            if d[i + 1] == d[i]:
                return float(ps[i])
            return float(ps[i] + (ps[i + 1] - ps[i]) * (-d[i]) / (d[i + 1] - d[i]))
    return None


def estimate_threshold(points: Iterable[ThresholdPoint]) -> ThresholdEstimate:
    """Median over adjacent size pairs of the linearly interpolated curve crossing."""
    by_L: dict[int, dict[float, float]] = {}
    for q in points:
        by_L.setdefault(q.L, {})[q.p] = q.failure_rate
    sizes = sorted(by_L)
    if len(sizes) < 2:
        raise ValueError("need at least two lattice sizes")
    crossings = []
    for a, b in zip(sizes, sizes[1:]):
        ps = sorted(set(by_L[a]) & set(by_L[b]))
        if len(ps) < 3:
            raise ValueError("need at least three common p values per size pair")
        pa = np.array([by_L[a][p] for p in ps])
        pb = np.array([by_L[b][p] for p in ps])
        crossings.append(((a, b), _crossing(np.array(ps), pa, pb)))
    found = [p for _, p in crossings if p is not None]
    p_star = float(statistics.median(found)) if found else None
    return ThresholdEstimate(p_star, "median-adjacent-linear-crossing", tuple(crossings))


def emit_csv(points: Sequence[ThresholdPoint], estimate: ThresholdEstimate | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for q in sorted(points, key=lambda q: (q.code, q.L, q.p)):
        writer.writerow(q.row())
    if estimate is not None:
        for line in estimate.lines():
            buf.write(line + "\n")
    return buf.getvalue()


def parse_csv(text: str) -> list[ThresholdPoint]:
    rows = [line for line in text.splitlines() if line and not line.startswith("#")]
    reader = csv.DictReader(rows)
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ValueError("unexpected CSV header")
    return [
        ThresholdPoint(
            r["code"],
            r["decoder"],
            r["channel"],
            int(r["L"]),
            float(r["p"]),
            int(r["trials"]),
            int(r["failures"]),
            int(r["seed"]),
        )
        for r in reader
    ]
