"""Dense GF(2) linear algebra on bit-packed numpy rows.

Rows are packed little-endian into uint64 words so that a row operation is a
single vectorized XOR.  Pivot columns are taken in increasing column order,
which keeps every routine deterministic.
"""

from __future__ import annotations

import numpy as np

_WORD = 64


def pack(rows: np.ndarray) -> tuple[np.ndarray, int]:
    """Pack a (r, n) 0/1 array into (r, ceil(n/64)) uint64 words."""
    rows = np.asarray(rows, dtype=np.uint8)
    if rows.ndim == 1:
        rows = rows[None, :]
    r, n = rows.shape
    nwords = max(1, -(-n // _WORD))
    padded = np.zeros((r, nwords * _WORD), dtype=np.uint8)
    padded[:, :n] = rows & 1
    packed = np.packbits(padded, axis=1, bitorder="little")
    return packed.view(np.uint64).reshape(r, nwords).copy(), n


def unpack(packed: np.ndarray, n: int) -> np.ndarray:
    r = packed.shape[0]
    bits = np.unpackbits(packed.view(np.uint8).reshape(r, -1), axis=1, bitorder="little")
    return bits[:, :n].astype(np.uint8)


def _column(packed: np.ndarray, col: int) -> np.ndarray:
    return ((packed[:, col // _WORD] >> np.uint64(col % _WORD)) & np.uint64(1)).astype(bool)


def row_reduce(rows: np.ndarray, track: bool = False):
    """Reduced row echelon form.

    Returns ``(rref, pivots)`` or, with ``track=True``, ``(rref, pivots, transform)``
    where ``transform @ rows == rref`` over GF(2).  Zero rows are dropped from
    ``rref`` but kept in ``transform`` so the full history is available.
    """
    rows = np.asarray(rows, dtype=np.uint8)
    if rows.ndim == 1:
        rows = rows[None, :]
    r, n = rows.shape
    if track:
        rows = np.concatenate([rows, np.eye(r, dtype=np.uint8)], axis=1)
    packed, total = pack(rows)
    pivots: list[int] = []
    rank = 0
    for col in range(n):
        if rank == r:
            break
        colbits = _column(packed[rank:], col)
        hits = np.flatnonzero(colbits)
        if hits.size == 0:
            continue
        pivot = rank + hits[0]
        if pivot != rank:
            packed[[rank, pivot]] = packed[[pivot, rank]]
        mask = _column(packed, col)
        mask[rank] = False
        if mask.any():
            packed[mask] ^= packed[rank]
        pivots.append(col)
        rank += 1
    full = unpack(packed, total)
    if track:
        return full[:rank, :n], pivots, full[:, n:]
    return full[:rank], pivots


def rank(rows: np.ndarray) -> int:
    rows = np.asarray(rows, dtype=np.uint8)
    if rows.size == 0:
        return 0
    return len(row_reduce(rows)[1])


def nullspace(matrix: np.ndarray) -> np.ndarray:
    """Basis (as rows) of {v : matrix @ v = 0}."""
    matrix = np.asarray(matrix, dtype=np.uint8)
    if matrix.ndim == 1:
        matrix = matrix[None, :]
    n = matrix.shape[1]
    if matrix.shape[0] == 0:
        return np.eye(n, dtype=np.uint8)
    rref, pivots = row_reduce(matrix)
    free = [c for c in range(n) if c not in set(pivots)]
    basis = np.zeros((len(free), n), dtype=np.uint8)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for row, p in enumerate(pivots):
            basis[i, p] = rref[row, f]
    return basis


def left_kernel(rows: np.ndarray) -> np.ndarray:
    """Basis of {c : c @ rows = 0}: the linear dependencies among rows."""
    rows = np.asarray(rows, dtype=np.uint8)
    if rows.shape[0] == 0:
        return np.zeros((0, 0), dtype=np.uint8)
    _, pivots, transform = row_reduce(rows, track=True)
    return transform[len(pivots):]


class SpanSolver:
    """Repeated membership queries against a fixed row span.

    ``solve(v)`` returns coefficients ``c`` (over the original rows) with
    ``c @ rows == v`` or ``None`` when ``v`` is outside the span.
    """

    def __init__(self, rows: np.ndarray):
        rows = np.asarray(rows, dtype=np.uint8)
        if rows.ndim == 1:
            rows = rows[None, :]
        self.nrows, self.ncols = rows.shape
        if self.nrows == 0:
            self.rref = np.zeros((0, self.ncols), dtype=np.uint8)
            self.pivots: list[int] = []
            self.transform = np.zeros((0, 0), dtype=np.uint8)
        else:
            self.rref, self.pivots, transform = row_reduce(rows, track=True)
            self.transform = transform[: len(self.pivots)]
        self.rank = len(self.pivots)

    def solve(self, vector: np.ndarray) -> np.ndarray | None:
        residue = np.asarray(vector, dtype=np.uint8).copy() & 1
        coeffs = np.zeros(self.nrows, dtype=np.uint8)
        for i, p in enumerate(self.pivots):
            if residue[p]:
                residue ^= self.rref[i]
                coeffs ^= self.transform[i]
        if residue.any():
            return None
        return coeffs

    def contains(self, vector: np.ndarray) -> bool:
        residue = np.asarray(vector, dtype=np.uint8).copy() & 1
        for i, p in enumerate(self.pivots):
            if residue[p]:
                residue ^= self.rref[i]
        return not residue.any()

    def solve_many(self, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized solve over a batch; returns (coeffs, ok_mask)."""
        residue = np.asarray(vectors, dtype=np.uint8).copy() & 1
        coeffs = np.zeros((residue.shape[0], self.nrows), dtype=np.uint8)
        for i, p in enumerate(self.pivots):
            hit = residue[:, p].astype(bool)
            if hit.any():
                residue[hit] ^= self.rref[i]
                coeffs[hit] ^= self.transform[i]
        return coeffs, ~residue.any(axis=1)


def solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray | None:
    """One solution x of matrix @ x = rhs, or None."""
    matrix = np.asarray(matrix, dtype=np.uint8)
    coeffs = SpanSolver(matrix.T).solve(np.asarray(rhs, dtype=np.uint8))
    return coeffs
