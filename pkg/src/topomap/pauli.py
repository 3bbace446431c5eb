"""Pauli operators on an L x L torus of unit cells.

An operator is stored sparsely as its X-support and Z-support together with a
quaternary phase, ``P = i**phase * (tensor of I/X/Y/Z)``, where a qubit present in
both supports carries a Y.  With this convention the representation is
canonical and ``Y`` is Hermitian with phase +1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy import sparse

from topomap import gf2


class DimensionError(ValueError):
    """Operators live on different lattices."""


class QubitIndex(NamedTuple):
    x: int
    y: int
    s: int


_LETTERS = {(1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_BITS = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1), "I": (0, 0)}
_PHASE_TEXT = {0: "+1", 1: "+i", 2: "-1", 3: "-i"}
_TEXT_PHASE = {v: k for k, v in _PHASE_TEXT.items()}


def _product_phase(a: tuple[int, int], b: tuple[int, int]) -> int:
    """Exponent e with sigma_a sigma_b = i**e sigma_{a+b} (Hermitian labels)."""
    if a == (0, 0) or b == (0, 0) or a == b:
        return 0
    order = [(1, 0), (1, 1), (0, 1)]  # X -> Y -> Z -> X cycles give +i
    ia, ib = order.index(a), order.index(b)
    return 1 if (ib - ia) % 3 == 1 else 3


@dataclass(frozen=True)
class PauliOperator:
    L: int
    sites: int
    x: frozenset = frozenset()
    z: frozenset = frozenset()
    phase: int = 0

    # construction -------------------------------------------------------

    @classmethod
    def identity(cls, L: int, sites: int) -> "PauliOperator":
        return cls(L, sites)

    @classmethod
    def from_terms(
        cls, L: int, sites: int, terms: Iterable[tuple[int, int, int, str]], phase: int = 0
    ) -> "PauliOperator":
        """Build from ``(x, y, s, letter)`` terms; repeated qubits are multiplied in order."""
        op = cls(L, sites, phase=phase % 4)
        for cx, cy, s, letter in terms:
            op = op * cls.single(L, sites, cx, cy, s, letter)
        return op

    @classmethod
    def single(cls, L: int, sites: int, cx: int, cy: int, s: int, letter: str) -> "PauliOperator":
        if not 0 <= s < sites:
            raise DimensionError(f"site {s} outside [0, {sites})")
        q = QubitIndex(cx % L, cy % L, s)
        bx, bz = _BITS[letter]
        return cls(
            L, sites, frozenset([q]) if bx else frozenset(), frozenset([q]) if bz else frozenset()
        )

    @classmethod
    def from_vector(cls, L: int, sites: int, vec: np.ndarray, phase: int = 0) -> "PauliOperator":
        n = L * L * sites
        vec = np.asarray(vec)
        xs = frozenset(_index(int(i), L, sites) for i in np.flatnonzero(vec[:n]))
        zs = frozenset(_index(int(i), L, sites) for i in np.flatnonzero(vec[n : 2 * n]))
        return cls(L, sites, xs, zs, phase % 4)

    # basic properties ---------------------------------------------------

    @property
    def num_qubits(self) -> int:
        return self.L * self.L * self.sites

    @property
    def support(self) -> frozenset:
        return self.x | self.z

    @property
    def weight(self) -> int:
        return len(self.x | self.z)

    def is_identity(self) -> bool:
        return not self.x and not self.z

    def letter(self, q: QubitIndex) -> str:
        return _LETTERS.get((int(q in self.x), int(q in self.z)), "I")

    def items(self) -> list[tuple[QubitIndex, str]]:
        return [(q, self.letter(q)) for q in sorted(self.support)]

    def vector(self) -> np.ndarray:
        """Symplectic vector (X block then Z block, row-major qubit order)."""
        n = self.num_qubits
        v = np.zeros(2 * n, dtype=np.uint8)
        for q in self.x:
            v[_flat(q, self.L, self.sites)] = 1
        for q in self.z:
            v[n + _flat(q, self.L, self.sites)] = 1
        return v

    def _check(self, other: "PauliOperator") -> None:
        if (self.L, self.sites) != (other.L, other.sites):
            raise DimensionError(
                f"lattice mismatch: L={self.L}, sites={self.sites} vs L={other.L}, sites={other.sites}"
            )

    # algebra --------------------------------------------------------------

    def __mul__(self, other: "PauliOperator") -> "PauliOperator":
        self._check(other)
        phase = self.phase + other.phase
        for q in (self.x | self.z) & (other.x | other.z):
            a = (int(q in self.x), int(q in self.z))
            b = (int(q in other.x), int(q in other.z))
            phase += _product_phase(a, b)
        return PauliOperator(self.L, self.sites, self.x ^ other.x, self.z ^ other.z, phase % 4)

    def with_phase(self, phase: int) -> "PauliOperator":
        return PauliOperator(self.L, self.sites, self.x, self.z, phase % 4)

    def unsigned(self) -> "PauliOperator":
        return self.with_phase(0)

    def __str__(self) -> str:
        return to_text(self)


def _flat(q: QubitIndex, L: int, sites: int) -> int:
    return (q.x * L + q.y) * sites + q.s


def _index(i: int, L: int, sites: int) -> QubitIndex:
    cell, s = divmod(i, sites)
    cx, cy = divmod(cell, L)
    return QubitIndex(cx, cy, s)


def qubit_flat_index(q: QubitIndex, L: int, sites: int) -> int:
    return _flat(q, L, sites)


def multiply(p: PauliOperator, q: PauliOperator) -> PauliOperator:
    return p * q


def commute_sign(p: PauliOperator, q: PauliOperator) -> int:
    """+1 if the operators commute, -1 if they anticommute."""
    p._check(q)
    overlap = len(p.x & q.z) + len(p.z & q.x)
    return -1 if overlap % 2 else 1


def _axis_extent(coords: set[int], L: int) -> int:
    """Fewest consecutive cells (cyclically) covering ``coords``."""
    if len(coords) == L:
        return L
    ordered = sorted(coords)
    gaps = [(ordered[(i + 1) % len(ordered)] - ordered[i] - 1) % L for i in range(len(ordered))]
    if len(ordered) == 1:
        return 1
    return L - max(gaps)


def op_range(p: PauliOperator) -> int:
    """Side of the smallest axis-aligned cell square containing the support (0 for identity)."""
    support = p.support
    if not support:
        return 0
    xs = {q.x for q in support}
    ys = {q.y for q in support}
    return max(_axis_extent(xs, p.L), _axis_extent(ys, p.L))


def translate(p: PauliOperator, dx: int, dy: int) -> PauliOperator:
    L = p.L

    def shift(qs):
        return frozenset(QubitIndex((q.x + dx) % L, (q.y + dy) % L, q.s) for q in qs)

    return PauliOperator(L, p.sites, shift(p.x), shift(p.z), p.phase)


# ---------------------------------------------------------------------------
# stacking operators into GF(2) matrices


@dataclass(frozen=True)
class Gf2Matrix:
    """Rows of symplectic vectors for operators on one lattice."""

    rows: np.ndarray
    L: int
    sites: int

    @classmethod
    def from_operators(cls, ops: Sequence[PauliOperator], L: int, sites: int) -> "Gf2Matrix":
        n = L * L * sites
        rows = np.zeros((len(ops), 2 * n), dtype=np.uint8)
        for i, op in enumerate(ops):
            if (op.L, op.sites) != (L, sites):
                raise DimensionError("operator lattice differs from matrix lattice")
            rows[i] = op.vector()
        return cls(rows, L, sites)


def gf2_rank(m: Gf2Matrix | np.ndarray) -> int:
    rows = m.rows if isinstance(m, Gf2Matrix) else m
    return gf2.rank(rows)


def symplectic_form(a, b) -> np.ndarray:
    """Pairwise symplectic products of row sets a (r, 2n) and b (s, 2n), dense or sparse."""
    a = sparse.csr_matrix(a, dtype=np.int32)
    b = sparse.csr_matrix(b, dtype=np.int32)
    n = a.shape[1] // 2
    out = a[:, :n] @ b[:, n:].T + a[:, n:] @ b[:, :n].T
    return (out.toarray() % 2).astype(np.int64)


@dataclass(frozen=True)
class SpanMembership:
    member: bool
    indices: tuple[int, ...] = ()
    phase: int = 0  # i**phase relating product of listed generators to the query

    @property
    def sign(self) -> int | None:
        """+1/-1 when the query equals +/- the product, None for +/-i."""
        return {0: 1, 2: -1}.get(self.phase)


def in_span(p: PauliOperator, gens: Sequence[PauliOperator]) -> SpanMembership:
    """Decide whether ``p`` is a product of ``gens`` up to phase.

    On success the listed generators multiply (in index order) to
    ``i**phase * p``; ``phase`` is 0 or 2 when the product is +/- p.
    """
    if p.is_identity():
        return SpanMembership(True, (), (-p.phase) % 4)
    if not gens:
        return SpanMembership(False)
    matrix = Gf2Matrix.from_operators(gens, p.L, p.sites)
    coeffs = gf2.SpanSolver(matrix.rows).solve(p.vector())
    if coeffs is None:
        return SpanMembership(False)
    idx = tuple(int(i) for i in np.flatnonzero(coeffs))
    prod = PauliOperator.identity(p.L, p.sites)
    for i in idx:
        prod = prod * gens[i]
    return SpanMembership(True, idx, (prod.phase - p.phase) % 4)


def symplectic_gram_schmidt(
    gens: Sequence[PauliOperator],
) -> tuple[list[tuple[PauliOperator, PauliOperator]], list[PauliOperator]]:
    """Split the span of ``gens`` into hyperbolic pairs plus an isotropic basis."""
    if not gens:
        return [], []
    L, sites = gens[0].L, gens[0].sites
    rows = Gf2Matrix.from_operators(gens, L, sites).rows
    pairs_v, center_v = symplectic_gram_schmidt_vectors(rows)
    pairs = [
        (PauliOperator.from_vector(L, sites, a), PauliOperator.from_vector(L, sites, b))
        for a, b in pairs_v
    ]
    return pairs, [PauliOperator.from_vector(L, sites, c) for c in center_v]


def symplectic_gram_schmidt_vectors(rows: np.ndarray) -> tuple[list, list]:
    rows = np.asarray(rows, dtype=np.uint8)
    if rows.shape[0] == 0:
        return [], []
    rref, _ = gf2.row_reduce(rows)
    pool = [r.copy() for r in rref]
    n = rows.shape[1] // 2
    pairs = []
    center = []

    def omega(a, b):
        return int((a[:n] @ b[n:] + a[n:] @ b[:n]) % 2)

    while pool:
        a = pool.pop(0)
        partner = next((i for i, b in enumerate(pool) if omega(a, b)), None)
        if partner is None:
            center.append(a)
            continue
        b = pool.pop(partner)
        rest = []
        for c in pool:
            if omega(c, b):
                c = c ^ a
            if omega(c, a):
                c = c ^ b
            rest.append(c)
        pool = rest
        pairs.append((a, b))
    return pairs, center


# ---------------------------------------------------------------------------
# text format: "+1; 0,0,1:X 0,1,1:Z"


def to_text(p: PauliOperator) -> str:
    tokens = " ".join(f"{q.x},{q.y},{q.s}:{letter}" for q, letter in p.items())
    return f"{_PHASE_TEXT[p.phase]}; {tokens}".rstrip()


def from_text(line: str, L: int, sites: int) -> PauliOperator:
    head, _, body = line.partition(";")
    head = head.strip()
    if head not in _TEXT_PHASE:
        raise ValueError(f"bad phase token {head!r}")
    terms = []
    seen = set()
    for tok in body.split():
        coords, _, letter = tok.partition(":")
        cx, cy, s = (int(v) for v in coords.split(","))
        if letter not in ("X", "Y", "Z"):
            raise ValueError(f"bad Pauli letter in {tok!r}")
        key = (cx % L, cy % L, s)
        if key in seen:
            raise ValueError(f"qubit {key} listed twice")
        seen.add(key)
        terms.append((cx, cy, s, letter))
    xs, zs = set(), set()
    for cx, cy, s, letter in terms:
        if not 0 <= s < sites:
            raise DimensionError(f"site {s} outside [0, {sites})")
        q = QubitIndex(cx % L, cy % L, s)
        bx, bz = _BITS[letter]
        if bx:
            xs.add(q)
        if bz:
            zs.add(q)
    return PauliOperator(L, sites, frozenset(xs), frozenset(zs), _TEXT_PHASE[head])
