"""Abelian anyon data of translation-invariant codes via their toric-code stack.

Charges are labelled by vectors (e_1, m_1, ..., e_n, m_n) over GF(2) for the
n-copy reference stack.  Loop and string operators are built on the stack and
pulled back to the source code through the inverse of a verified map.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from topomap import gf2
from topomap.clifford import (
    LocalCliffordMap,
    SyndromeTransport,
    inverse,
    padded_source,
    stack_target,
    standard_map,
    symplectic_matrix,
)
from topomap.codes import CodeDef, checkerboard_cell, get_code, logical_count
from topomap.pauli import PauliOperator, symplectic_form

__all__ = [
    "ChargeLabel",
    "ChargeTable",
    "StringOperator",
    "UnknownChargeError",
    "IllDefinedChargeError",
    "CertificationError",
    "logical_count",
    "spin",
    "fuse",
    "mutual_statistics",
    "build_string",
    "charge_table",
    "syndrome_charge",
    "find_isomorphism",
    "is_isomorphism",
    "name_subsystem_fermions",
    "MappedCode",
    "logical_rows",
    "residual_classes",
]


class UnknownChargeError(ValueError):
    pass


class IllDefinedChargeError(ValueError):
    pass


class CertificationError(RuntimeError):
    pass


_ONE_COPY = {(0, 0): "0", (1, 0): "e", (0, 1): "m", (1, 1): "f"}


@dataclass(frozen=True)
class ChargeLabel:
    vector: tuple[int, ...]
    name: str = ""

    @classmethod
    def of(cls, vector: Sequence[int], name: str = "") -> "ChargeLabel":
        vec = tuple(int(v) % 2 for v in vector)
        if len(vec) % 2:
            raise UnknownChargeError("charge vectors have even length (e, m per copy)")
        return cls(vec, name or default_name(vec))

    @classmethod
    def parse(cls, text: str) -> "ChargeLabel":
        """Parse ``e``, ``m``, ``f``, ``0`` or ``[m,f]``-style names."""
        inv = {v: k for k, v in _ONE_COPY.items()}
        parts = text.strip().strip("[]").split(",")
        try:
            vec = [b for p in parts for b in inv[p.strip()]]
        except KeyError as exc:
            raise UnknownChargeError(f"unknown charge {text!r}") from exc
        return cls.of(vec)

    @property
    def copies(self) -> int:
        return len(self.vector) // 2

    def array(self) -> np.ndarray:
        return np.array(self.vector, dtype=np.uint8)

    def __str__(self) -> str:
        return self.name


def default_name(vec: Sequence[int]) -> str:
    names = [_ONE_COPY[(vec[2 * i], vec[2 * i + 1])] for i in range(len(vec) // 2)]
    return names[0] if len(names) == 1 else "[" + ",".join(names) + "]"


def all_charges(copies: int) -> list[ChargeLabel]:
    return [ChargeLabel.of(v) for v in itertools.product((0, 1), repeat=2 * copies)]


def fuse(a: ChargeLabel, b: ChargeLabel) -> ChargeLabel:
    return ChargeLabel.of([x ^ y for x, y in zip(a.vector, b.vector)])


def spin(a: ChargeLabel) -> int:
    """Topological spin, +1 for bosons and -1 for fermions."""
    odd = sum(a.vector[2 * i] & a.vector[2 * i + 1] for i in range(a.copies)) % 2
    return -1 if odd else 1


def _pairing(copies: int) -> np.ndarray:
    """Bilinear form with e_i . m_i = 1: the exponent of the braiding phase."""
    w = np.zeros((2 * copies, 2 * copies), dtype=np.uint8)
    for i in range(copies):
        w[2 * i, 2 * i + 1] = w[2 * i + 1, 2 * i] = 1
    return w


# ---------------------------------------------------------------------------
# loop and string operators on the stack


def _steps(direction: int, blocked: bool, L: int) -> str:
    if blocked:
        return ("RU" if direction == 0 else "RD") * L
    return ("R" if direction == 0 else "U") * L


def _primal_edges(start, steps):
    """Edges (x, y, site) of a lattice path; site 0 horizontal, 1 vertical."""
    x, y = start
    out = []
    for s in steps:
        if s == "R":
            out.append((x, y, 0))
            x += 1
        elif s == "L":
            x -= 1
            out.append((x, y, 0))
        elif s == "U":
            out.append((x, y, 1))
            y += 1
        elif s == "D":
            y -= 1
            out.append((x, y, 1))
    return out


def _dual_edges(start, steps):
    """Edges crossed by a path between plaquettes (lower-left corner labelled)."""
    x, y = start
    out = []
    for s in steps:
        if s == "R":
            out.append((x + 1, y, 1))
            x += 1
        elif s == "L":
            out.append((x, y, 1))
            x -= 1
        elif s == "U":
            out.append((x, y + 1, 0))
            y += 1
        elif s == "D":
            out.append((x, y, 0))
            y -= 1
    return out


class StackGeometry:
    """Positions on the (possibly checkerboard-blocked) stack torus."""

    def __init__(self, target: CodeDef, copies: int, L: int):
        self.copies = copies
        self.L = L
        self.blocked = target.meta.get("blocking") == "checkerboard"
        self.stack_sites = 2 * copies
        self.sites = target.sites
        self.n = L * L * self.sites

    def qubit(self, x: int, y: int, s: int, copy: int) -> int:
        L = self.L
        if self.blocked:
            cx, cy, off = checkerboard_cell(x, y)
            site = off * self.stack_sites + 2 * copy + s
        else:
            cx, cy, site = x, y, 2 * copy + s
        return ((cx % L) * L + cy % L) * self.sites + site

    def fine(self, cell: tuple[int, int]) -> tuple[int, int]:
        """Grid position of a cell's first position."""
        cx, cy = cell
        return (cx + cy, cx - cy) if self.blocked else (cx, cy)

    def vector(self, edges, copy: int, letter: str) -> np.ndarray:
        v = np.zeros(2 * self.n, dtype=np.uint8)
        off = 0 if letter == "X" else self.n
        for x, y, s in edges:
            v[off + self.qubit(x, y, s, copy)] ^= 1
        return v

    def loop(self, charge: ChargeLabel, direction: int, shift: int = 0) -> np.ndarray:
        """Non-contractible loop carrying ``charge`` along a cell axis."""
        steps = _steps(direction, self.blocked, self.L)
        start = self.fine((0, shift) if direction == 0 else (shift, 0))
        v = np.zeros(2 * self.n, dtype=np.uint8)
        for c in range(self.copies):
            if charge.vector[2 * c]:
                v ^= self.vector(_dual_edges(start, steps), c, "Z")
            if charge.vector[2 * c + 1]:
                v ^= self.vector(_primal_edges(start, steps), c, "X")
        return v

    def string(self, charge_index: int, a: tuple[int, int], b: tuple[int, int]) -> tuple[np.ndarray, list]:
        """Open string joining the charge positions of cells ``a`` and ``b``."""
        (x0, y0), (x1, y1) = self.fine(a), self.fine(b)
        steps = ("R" if x1 >= x0 else "L") * abs(x1 - x0) + ("U" if y1 >= y0 else "D") * abs(y1 - y0)
        copy, kind = divmod(charge_index, 2)
        if kind == 0:
            edges = _dual_edges((x0, y0), steps)
            letter = "Z"
        else:
            edges = _primal_edges((x0, y0), steps)
            letter = "X"
        path = [(x0, y0)]
        for s in steps:
            dx, dy = {"R": (1, 0), "L": (-1, 0), "U": (0, 1), "D": (0, -1)}[s]
            path.append((path[-1][0] + dx, path[-1][1] + dy))
        return self.vector(edges, copy, letter), path


# ---------------------------------------------------------------------------
# mapped codes


@dataclass
class MappedCode:
    """A source code with its verified map onto an n-copy stack at one size."""

    code: CodeDef
    cmap: LocalCliffordMap
    copies: int
    L: int
    source: CodeDef = field(init=False)
    target: CodeDef = field(init=False)
    geometry: StackGeometry = field(init=False)

    def __post_init__(self):
        self.source = padded_source(self.cmap, self.code).at(self.L)
        self.target = stack_target(self.cmap, self.copies, self.L)
        self.geometry = StackGeometry(self.target, self.copies, self.L)
        self._pull = symplectic_matrix(inverse(self.cmap), self.L)

    @classmethod
    def standard(cls, name: str, L: int) -> "MappedCode":
        cmap, copies = standard_map(name)
        code_name = "tscc48-sz" if name == "tscc48" else name
        return cls(get_code(code_name, L), cmap, copies, L)

    def pull(self, vec: np.ndarray) -> np.ndarray:
        return (np.asarray(self._pull.T @ vec.astype(np.int64)) % 2).astype(np.uint8)


def _resolve(code, L, cmap=None, copies=None) -> MappedCode:
    if isinstance(code, MappedCode):
        return code
    if isinstance(code, str):
        return MappedCode.standard(code, L)
    if cmap is None:
        return MappedCode.standard(code.name, L)
    return MappedCode(code, cmap, copies, L)


def _commute(a: np.ndarray, b: np.ndarray) -> int:
    return int(symplectic_form(a[None, :], b[None, :])[0, 0])


@dataclass(frozen=True)
class StringOperator:
    charge: ChargeLabel
    path: tuple[tuple[int, int], ...]
    operator: PauliOperator


def build_string(code, charge, endpoints, L: int = 6) -> StringOperator:
    """String creating the elementary charge ``charge`` (index or label) at two cells."""
    mc = _resolve(code, L)
    idx = _charge_index(charge, mc.copies)
    a, b = endpoints
    vec, path = mc.geometry.string(idx, tuple(a), tuple(b))
    src_vec = mc.pull(vec)
    op = PauliOperator.from_vector(mc.L, mc.source.sites, src_vec)
    label = ChargeLabel.of(np.eye(2 * mc.copies, dtype=np.uint8)[idx])
    return StringOperator(label, tuple(path), op)


def _charge_index(charge, copies: int) -> int:
    if isinstance(charge, ChargeLabel):
        hits = np.flatnonzero(charge.array())
        if len(hits) != 1:
            raise UnknownChargeError(f"{charge} is not an elementary charge")
        charge = int(hits[0])
    if not 0 <= int(charge) < 2 * copies:
        raise UnknownChargeError(f"charge index {charge} outside 0..{2 * copies - 1}")
    return int(charge)


def _loop_on_source(mc: MappedCode, charge: ChargeLabel, direction: int, shift: int = 0) -> np.ndarray:
    return mc.pull(mc.geometry.loop(charge, direction, shift))


def mutual_statistics(code, a: ChargeLabel, b: ChargeLabel, L: int = 4, shift: int = 0) -> int:
    """Commutation sign of an a-loop and a b-loop crossing once."""
    if L < 4:
        raise ValueError("statistics need L >= 4")
    mc = _resolve(code, L)
    la = _loop_on_source(mc, a, 0, shift)
    lb = _loop_on_source(mc, b, 1, shift)
    S = mc.source.stabilizer_matrix()
    for loop in (la, lb):
        if symplectic_form(loop[None, :], S).any():
            raise CertificationError("loop operator is not closed (it violates a stabilizer)")
    return -1 if _commute(la, lb) else 1


# ---------------------------------------------------------------------------
# charge tables


@dataclass
class ChargeTable:
    code: str
    copies: int
    charges: list[ChargeLabel]
    statistics: np.ndarray  # +-1
    spins: np.ndarray  # +-1
    proper: list[int] | None = None
    gauge: list[int] | None = None
    names: dict[int, str] = field(default_factory=dict)

    def index(self, charge: ChargeLabel) -> int:
        return self.charges.index(ChargeLabel.of(charge.vector))

    def label(self, i: int) -> str:
        return self.names.get(i, self.charges[i].name)

    def fuse_index(self, i: int, j: int) -> int:
        return self.index(fuse(self.charges[i], self.charges[j]))

    def lines(self) -> list[str]:
        out = []
        for i, ch in enumerate(self.charges):
            row = "".join("+" if s > 0 else "-" for s in self.statistics[i])
            tag = ""
            if self.proper is not None:
                tag = " proper" if i in self.proper else (" gauge" if i in self.gauge else "")
            vec = "".join(map(str, ch.vector))
            out.append(f"{self.label(i):<12} {vec} spin={'+1' if self.spins[i] > 0 else '-1'} {row}{tag}")
        return out


def _basis_loops(mc: MappedCode, shift: int = 0) -> tuple[np.ndarray, np.ndarray]:
    eye = np.eye(2 * mc.copies, dtype=np.uint8)
    h = np.array([_loop_on_source(mc, ChargeLabel.of(v), 0, shift) for v in eye])
    v = np.array([_loop_on_source(mc, ChargeLabel.of(v), 1, shift) for v in eye])
    return h, v


def charge_table(code, L: int = 4, cmap: LocalCliffordMap | None = None, copies: int | None = None) -> ChargeTable:
    """Full charge table, with statistics measured on pulled-back loops.

    The measured braiding matrix is compared with the stack's pairing and with a
    second, translated set of loops; any mismatch raises ``CertificationError``.
    """
    if L < 4:
        raise ValueError("charge tables need L >= 4")
    mc = _resolve(code, L, cmap, copies)
    n = mc.copies
    h, v = _basis_loops(mc)
    S = mc.source.stabilizer_matrix()
    if symplectic_form(np.concatenate([h, v]), S).any():
        raise CertificationError("pulled-back loops are not closed")
    measured = symplectic_form(h, v).astype(np.uint8)
    h2, v2 = _basis_loops(mc, shift=1)
    if not np.array_equal(measured, symplectic_form(h2, v2)):
        raise CertificationError("statistics depend on the loop representative")
    direct_h = np.array([mc.geometry.loop(ChargeLabel.of(e), 0) for e in np.eye(2 * n, dtype=np.uint8)])
    direct_v = np.array([mc.geometry.loop(ChargeLabel.of(e), 1) for e in np.eye(2 * n, dtype=np.uint8)])
    if not np.array_equal(measured, symplectic_form(direct_h, direct_v)):
        raise CertificationError("pulled-back statistics differ from the stack")
    if not np.array_equal(measured, _pairing(n)):
        raise CertificationError("stack loops do not braid like toric-code charges")
    charges = all_charges(n)
    vecs = np.array([c.vector for c in charges], dtype=np.int64)
    stats = np.where((vecs @ measured @ vecs.T) % 2, -1, 1)
    spins = np.array([spin(c) for c in charges])
    table = ChargeTable(mc.code.name, n, charges, stats, spins)
    if mc.code.meta.get("gauge_templates"):
        _split_subsystem(table, mc, h, v)
    return table


def _split_subsystem(table: ChargeTable, mc: MappedCode, h: np.ndarray, v: np.ndarray) -> None:
    """Mark gauge charges (loops inside G) and proper charges (loops commuting with G)."""
    from topomap.codes import check_matrix

    G = check_matrix(mc.code.meta["gauge_templates"], mc.L, mc.source.sites)
    Sp = mc.source.stabilizer_matrix()
    span = gf2.SpanSolver(G)
    # loop * s commutes with G for some s in S' iff omega(loop, G) lies in omega(S', G)
    omega_sg = gf2.SpanSolver(symplectic_form(Sp, G).astype(np.uint8))
    gauge, proper = [], []
    for i, ch in enumerate(table.charges):
        sel = ch.array().astype(bool)
        lh = np.bitwise_xor.reduce(h[sel], axis=0) if sel.any() else np.zeros(h.shape[1], np.uint8)
        lv = np.bitwise_xor.reduce(v[sel], axis=0) if sel.any() else np.zeros(v.shape[1], np.uint8)
        if span.contains(lh) and span.contains(lv):
            gauge.append(i)
        wh = symplectic_form(lh[None, :], G)[0].astype(np.uint8)
        wv = symplectic_form(lv[None, :], G)[0].astype(np.uint8)
        if omega_sg.contains(wh) and omega_sg.contains(wv):
            proper.append(i)
    table.gauge, table.proper = gauge, proper
    if len(proper) * len(gauge) != len(table.charges) or set(proper) & set(gauge) != {0}:
        raise CertificationError("proper and gauge charges do not split the charge group")
    if any(table.statistics[i, j] != 1 for i in proper for j in gauge):
        raise CertificationError("gauge charges braid nontrivially with proper charges")


# ---------------------------------------------------------------------------
# isomorphisms


def _automorphisms(copies: int):
    """Invertible GF(2) matrices (rows = images of basis charges), lexicographic order."""
    dim = 2 * copies
    rows = [np.array(r, dtype=np.uint8) for r in itertools.product((0, 1), repeat=dim)][1:]
    for choice in itertools.product(range(len(rows)), repeat=dim):
        m = np.array([rows[c] for c in choice])
        if gf2.rank(m) == dim:
            yield m


def find_isomorphism(
    source: ChargeTable,
    target: ChargeTable,
    fixed: dict[int, int] | None = None,
) -> np.ndarray | None:
    """A linear bijection of charge vectors preserving statistics and spins.

    ``fixed`` maps source charge indices to required target indices.  The search
    builds the images of basis charges one at a time and prunes on the braiding
    form and spins of the partial assignment.
    """
    if source.copies != target.copies:
        return None
    dim = 2 * source.copies
    w = _pairing(source.copies)
    cand = [np.array(r, dtype=np.uint8) for r in itertools.product((0, 1), repeat=dim)][1:]
    fixed = fixed or {}
    need = [(source.charges[i].array(), target.charges[j].array()) for i, j in fixed.items()]

    def theta(vec):
        return spin(ChargeLabel.of(vec))

    def extend(images: list[np.ndarray]):
        k = len(images)
        if k == dim:
            m = np.array(images)
            if gf2.rank(m) < dim:
                return None
            for a, b in need:
                if not np.array_equal((a.astype(np.int64) @ m) % 2, b):
                    return None
            return m
        basis_k = np.eye(dim, dtype=np.uint8)[k]
        for r in cand:
            if theta(r) != theta(basis_k):
                continue
            if any((images[i].astype(int) @ w @ r) % 2 != w[i, k] for i in range(k)):
                continue
            found = extend(images + [r])
            if found is not None:
                return found
        return None

    return extend([])


def is_isomorphism(m: np.ndarray, source: ChargeTable, target: ChargeTable) -> bool:
    """Exhaustive check that ``m`` preserves fusion, statistics and spins."""
    if gf2.rank(m) != m.shape[0]:
        return False
    for i, a in enumerate(source.charges):
        img = ChargeLabel.of((a.array().astype(np.int64) @ m) % 2)
        j = target.index(img)
        if source.spins[i] != target.spins[j]:
            return False
        for k, b in enumerate(source.charges):
            imgb = ChargeLabel.of((b.array().astype(np.int64) @ m) % 2)
            if source.statistics[i, k] != target.statistics[j, target.index(imgb)]:
                return False
    return True


TSCC_REFERENCE = {"f1": "[m,f]", "f2": "[e,f]", "f3": "[f,0]"}


def name_subsystem_fermions(table: ChargeTable) -> np.ndarray:
    """Name the proper fermions f1, f2, f3 through an explicit isomorphism.

    Returns the isomorphism (rows = images of basis charges) sending the proper
    subgroup onto {0, [m,f], [e,f], [f,0]} of the two-copy reference table.
    """
    if table.proper is None or len(table.proper) != 4:
        raise CertificationError("table has no four-element proper subgroup")
    reference = charge_table("ktc-stack:2", 4)
    ref_idx = {k: reference.index(ChargeLabel.parse(v)) for k, v in TSCC_REFERENCE.items()}
    nonzero = [i for i in table.proper if any(table.charges[i].vector)]
    for perm in itertools.permutations(nonzero):
        fixed = {perm[0]: ref_idx["f1"], perm[1]: ref_idx["f2"]}
        m = find_isomorphism(table, reference, fixed)
        if m is not None and is_isomorphism(m, table, reference):
            img3 = ChargeLabel.of((table.charges[perm[2]].array().astype(np.int64) @ m) % 2)
            if reference.index(img3) != ref_idx["f3"]:
                continue
            for name, i in zip(("f1", "f2", "f3"), perm):
                table.names[i] = name
            table.names[0] = "0"
            return m
    raise CertificationError("no isomorphism realizes the fermion identification")


# ---------------------------------------------------------------------------
# region charges


def syndrome_charge(code, syndrome: np.ndarray, region, L: int | None = None) -> ChargeLabel:
    """Total charge of the violated generators whose cells lie in ``region``.

    ``region`` is ``(x0, y0, x1, y1)`` (inclusive) and must not wrap the torus.
    The syndrome is pushed to the stack and each copy's star (m) and plaquette (e)
    violations are counted by parity.
    """
    mc = code if isinstance(code, MappedCode) else _resolve(code, L or code.L)
    x0, y0, x1, y1 = region
    if not (0 <= x0 <= x1 < mc.L and 0 <= y0 <= y1 < mc.L) or (x1 - x0 + 1 >= mc.L or y1 - y0 + 1 >= mc.L):
        raise IllDefinedChargeError("region must be a rectangle that does not wrap the torus")
    transport = SyndromeTransport(mc.cmap, mc.code, _stack_for(mc), mc.L)
    tau = transport.push(np.asarray(syndrome, dtype=np.uint8))
    L2 = mc.L * mc.L
    vec = np.zeros(2 * mc.copies, dtype=np.uint8)
    for t, tmpl in enumerate(mc.target.stabilizer_templates):
        kind = _stack_family(tmpl, mc.copies)
        if kind is None:
            continue
        copy, species = kind
        block = tau[t * L2 : (t + 1) * L2].reshape(mc.L, mc.L)
        vec[2 * copy + species] ^= int(block[x0 : x1 + 1, y0 : y1 + 1].sum() % 2)
    return ChargeLabel.of(vec)


def _stack_for(mc: MappedCode) -> CodeDef:
    from topomap.codes import build_ktc_stack

    return build_ktc_stack(mc.copies, mc.L)


def _stack_family(tmpl, copies: int) -> tuple[int, int] | None:
    """(copy, 0 for plaquettes = e, 1 for stars = m), or None for ancilla checks."""
    if len(tmpl.terms) == 1:
        return None
    stack_sites = 2 * copies
    copy = (tmpl.terms[0][2] % stack_sites) // 2
    letters = tmpl.letters()
    return copy, (1 if letters == "Z" else 0)


# ---------------------------------------------------------------------------
# logical operators for adjudication


def _charge_loop(rows: np.ndarray, charge: ChargeLabel) -> np.ndarray:
    sel = charge.array().astype(bool)
    if not sel.any():
        return np.zeros(rows.shape[1], dtype=np.uint8)
    return np.bitwise_xor.reduce(rows[sel], axis=0)


def logical_rows(mc: MappedCode) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Operators that detect logical failures, with the charges they carry.

    Returns ``(rows, charges, directions)``.  A residual that commutes with the
    stabilizer is trivial iff it commutes with every row.  For stabilizer codes
    the rows are basis loops on both cycles; for subsystem codes they are the
    proper-charge loops, dressed by elements of S' so they commute with every
    gauge generator (bare logical operators).
    """
    h, v = _basis_loops(mc)
    eye = np.eye(2 * mc.copies, dtype=np.uint8)
    if not mc.code.meta.get("gauge_templates"):
        rows = np.concatenate([h, v])
        charges = np.concatenate([eye, eye])
        dirs = np.array([0] * len(h) + [1] * len(v))
        return rows, charges, dirs
    # which charges are proper does not depend on the torus size
    small = mc if mc.L == 4 else MappedCode(get_code(mc.code.name, 4), mc.cmap, mc.copies, 4)
    table = charge_table(small)
    proper = [table.charges[i] for i in table.proper if any(table.charges[i].vector)]
    gens = gf2.row_reduce(np.array([c.vector for c in proper], dtype=np.uint8))[0]
    dresser = _Dresser(mc)
    rows, charges, dirs = [], [], []
    for vec in gens:
        ch = ChargeLabel.of(vec)
        for d, basis in enumerate((h, v)):
            rows.append(dresser.dress(_charge_loop(basis, ch), ch))
            charges.append(vec)
            dirs.append(d)
    return np.array(rows), np.array(charges), np.array(dirs)


class _Dresser:
    """Multiply a loop by S' elements near it until it commutes with every gauge generator."""

    def __init__(self, mc: MappedCode):
        from topomap.codes import sparse_check_matrix

        self.L = mc.L
        self.sites = mc.source.sites
        self.G = sparse_check_matrix(mc.code.meta["gauge_templates"], mc.L, self.sites).tocsr()
        self.Sp = sparse_check_matrix(mc.source.stabilizer_templates, mc.L, self.sites).tocsr()

    def _cells(self, vec: np.ndarray, radius: int) -> np.ndarray:
        L = self.L
        n = vec.shape[0] // 2
        q = np.flatnonzero(vec[:n] | vec[n:])
        mask = np.zeros((L, L), dtype=bool)
        mask.flat[np.unique(q // self.sites)] = True
        grown = mask.copy()
        for dx in range(-radius, radius + 1):
            for dy in range(-radius, radius + 1):
                grown |= np.roll(mask, (dx, dy), axis=(0, 1))
        return grown.reshape(-1)

    def dress(self, loop: np.ndarray, charge: ChargeLabel) -> np.ndarray:
        L2 = self.L * self.L
        for radius in (1, 2, 3, self.L):
            cells = self._cells(loop, radius)
            sp_rows = np.flatnonzero(cells[np.arange(self.Sp.shape[0]) % L2])
            g_rows = np.flatnonzero(self._cells(loop, radius + 2)[np.arange(self.G.shape[0]) % L2])
            sp, g = self.Sp[sp_rows], self.G[g_rows]
            solver = gf2.SpanSolver(symplectic_form(sp, g).astype(np.uint8))
            coeffs = solver.solve(symplectic_form(loop[None, :], g)[0].astype(np.uint8))
            if coeffs is None:
                continue
            dressed = loop ^ (np.asarray(sp.T @ coeffs.astype(np.int64)).ravel() % 2).astype(np.uint8)
            if not symplectic_form(dressed[None, :], self.G).any():
                return dressed
        raise CertificationError(f"charge {charge} has no bare loop representative")


def residual_classes(mc: MappedCode, residual: np.ndarray, rows, charges, dirs) -> tuple[ChargeLabel, ChargeLabel]:
    """Charge transported around each cycle by a logical residual (diagnostic)."""
    w = _pairing(mc.copies)
    out = []
    for d in (0, 1):
        # a loop along cycle d is detected by loops along the other cycle
        sel = dirs == 1 - d
        signs = symplectic_form(residual[None, :], rows[sel])[0] % 2
        vec = np.zeros(2 * mc.copies, dtype=np.uint8)
        # solve charge . w . c_j = sign_j over the detecting charges
        A = (charges[sel].astype(np.int64) @ w) % 2
        sol = gf2.solve(A.astype(np.uint8), signs.astype(np.uint8))
        if sol is not None:
            vec[: len(sol)] = sol
        out.append(ChargeLabel.of(vec))
    return out[0], out[1]
