"""Translation-invariant code families on finite tori.

Codes are stored as torus-free templates anchored at cell (0, 0); ``CodeDef.at``
re-materializes the same code on another torus size.  The square-octagon codes
use a two-diamond unit cell spanned by (1, 1) and (1, -1) of the diamond grid so
that the A/B chessboard (and the two octagon colours) is translation invariant.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from topomap import gf2
from topomap.pauli import (
    PauliOperator,
    QubitIndex,
    symplectic_form,
)


class CodeConstructionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# templates


@dataclass(frozen=True)
class Template:
    """A Pauli operator written with cell offsets instead of torus coordinates."""

    terms: tuple[tuple[int, int, int, str], ...]
    phase: int = 0

    @classmethod
    def of(cls, terms: Iterable[tuple[int, int, int, str]], phase: int = 0) -> "Template":
        merged: dict[tuple[int, int, int], tuple[int, int]] = {}
        bits = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
        for dx, dy, s, letter in terms:
            bx, bz = bits[letter]
            ox, oz = merged.get((dx, dy, s), (0, 0))
            merged[(dx, dy, s)] = (ox ^ bx, oz ^ bz)
        letters = {(1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
        out = tuple(
            sorted((dx, dy, s, letters[b]) for (dx, dy, s), b in merged.items() if b != (0, 0))
        )
        return cls(out, phase % 4)

    @classmethod
    def from_operator(cls, op: PauliOperator) -> "Template":
        """Unwrap a torus operator so its offsets span the smallest window from (0, 0)."""
        if op.is_identity():
            return cls((), op.phase)
        L = op.L
        starts = []
        for axis in (0, 1):
            coords = sorted({q[axis] for q in op.support})
            starts.append(_arc_start(coords, L))
        terms = []
        for q, letter in op.items():
            terms.append(((q.x - starts[0]) % L, (q.y - starts[1]) % L, q.s, letter))
        return cls(tuple(sorted(terms)), op.phase)

    def place(self, L: int, sites: int, cx: int = 0, cy: int = 0) -> PauliOperator:
        xs, zs = set(), set()
        for dx, dy, s, letter in self.terms:
            q = QubitIndex((cx + dx) % L, (cy + dy) % L, s)
            if letter in "XY":
                xs ^= {q}
            if letter in "YZ":
                zs ^= {q}
        return PauliOperator(L, sites, frozenset(xs), frozenset(zs), self.phase)

    @property
    def weight(self) -> int:
        return len(self.terms)

    @property
    def extent(self) -> int:
        """Side of the offset bounding box (the range on a large torus)."""
        if not self.terms:
            return 0
        xs = [t[0] for t in self.terms]
        ys = [t[1] for t in self.terms]
        return max(max(xs) - min(xs), max(ys) - min(ys)) + 1

    def shifted(self, dx: int, dy: int) -> "Template":
        return Template(
            tuple(sorted((a + dx, b + dy, s, p) for a, b, s, p in self.terms)), self.phase
        )

    def letters(self) -> str:
        return "".join(sorted({t[3] for t in self.terms}))


def _arc_start(coords: list[int], L: int) -> int:
    if len(coords) == 1 or len(set(coords)) == L:
        return coords[0]
    ordered = sorted(set(coords))
    gaps = [(ordered[(i + 1) % len(ordered)] - ordered[i] - 1) % L for i in range(len(ordered))]
    i = int(np.argmax(gaps))
    return ordered[(i + 1) % len(ordered)]


# ---------------------------------------------------------------------------
# code definitions


@dataclass(frozen=True)
class LatticeSpec:
    sites: int
    L: int
    site_labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.sites < 1:
            raise CodeConstructionError("sites_per_cell must be >= 1")
        if self.L < 2:
            raise CodeConstructionError(f"torus size L={self.L} must be >= 2")

    @property
    def num_qubits(self) -> int:
        return self.sites * self.L * self.L


@dataclass(frozen=True)
class CodeDef:
    name: str
    lattice: LatticeSpec
    stabilizer_templates: tuple[Template, ...]
    kind: str = "stabilizer"
    gauge_templates: tuple[Template, ...] = ()
    template_labels: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def L(self) -> int:
        return self.lattice.L

    @property
    def sites(self) -> int:
        return self.lattice.sites

    @property
    def num_qubits(self) -> int:
        return self.lattice.num_qubits

    def at(self, L: int) -> "CodeDef":
        return replace(self, lattice=replace(self.lattice, L=L))

    def _instances(self, templates: Sequence[Template]) -> list[PauliOperator]:
        L, sites = self.L, self.sites
        return [
            t.place(L, sites, cx, cy) for t in templates for cx in range(L) for cy in range(L)
        ]

    def stabilizers(self) -> list[PauliOperator]:
        """All stabilizer generator instances, ordered template-major then cell (x, y)."""
        return self._instances(self.stabilizer_templates)

    def gauges(self) -> list[PauliOperator]:
        return self._instances(self.gauge_templates)

    def instance_key(self, index: int) -> tuple[int, int, int]:
        t, cell = divmod(index, self.L * self.L)
        cx, cy = divmod(cell, self.L)
        return t, cx, cy

    def stabilizer_matrix(self) -> np.ndarray:
        return check_matrix(self.stabilizer_templates, self.L, self.sites)

    def gauge_matrix(self) -> np.ndarray:
        return check_matrix(self.gauge_templates, self.L, self.sites)

    def templates_as_operators(self) -> list[PauliOperator]:
        return [t.place(self.L, self.sites) for t in self.stabilizer_templates]


def check_matrix(templates: Sequence[Template], L: int, sites: int) -> np.ndarray:
    """Dense symplectic rows of every translate, ordered template-major."""
    n = L * L * sites
    rows = np.zeros((len(templates) * L * L, 2 * n), dtype=np.uint8)
    r = 0
    for t in templates:
        for cx in range(L):
            for cy in range(L):
                for dx, dy, s, letter in t.terms:
                    q = (((cx + dx) % L) * L + (cy + dy) % L) * sites + s
                    if letter in "XY":
                        rows[r, q] ^= 1
                    if letter in "YZ":
                        rows[r, n + q] ^= 1
                r += 1
    return rows


def sparse_check_matrix(templates: Sequence[Template], L: int, sites: int):
    """Sparse (instances x 2n) symplectic check matrix, template-major like ``stabilizers``."""
    from scipy import sparse

    n = L * L * sites
    L2 = L * L
    x, y = np.divmod(np.arange(L2), L)
    rows, cols = [], []
    for t, tmpl in enumerate(templates):
        row = t * L2 + np.arange(L2)
        for dx, dy, s, letter in tmpl.terms:
            q = (((x + dx) % L) * L + (y + dy) % L) * sites + s
            if letter in "XY":
                rows.append(row)
                cols.append(q)
            if letter in "YZ":
                rows.append(row)
                cols.append(n + q)
    shape = (len(templates) * L2, 2 * n)
    if not rows:
        return sparse.csr_matrix(shape, dtype=np.uint8)
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    m = sparse.coo_matrix((np.ones(r.size, dtype=np.int64), (r, c)), shape=shape).tocsr()
    m.data %= 2
    m.eliminate_zeros()
    return m.astype(np.uint8)


def site_components(code: CodeDef) -> list[list[int]]:
    """Sites grouped by the generators that touch them (one group per toric layer)."""
    parent = list(range(code.sites))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for g in code.stabilizer_templates:
        sites = [t[2] for t in g.terms]
        for s in sites[1:]:
            parent[find(s)] = find(sites[0])
    groups: dict[int, list[int]] = {}
    for s in range(code.sites):
        groups.setdefault(find(s), []).append(s)
    return sorted(groups.values())


def logical_count(code: CodeDef, L: int | None = None) -> int:
    """k = N - rank(stabilizer instances)."""
    if L is not None:
        code = code.at(L)
    return code.num_qubits - gf2.rank(code.stabilizer_matrix())


# ---------------------------------------------------------------------------
# Kitaev's code and stacks

# cell (x, y): site 0 = horizontal edge (x,y)-(x+1,y), site 1 = vertical edge (x,y)-(x,y+1)
_STAR = ((0, 0, 0), (-1, 0, 0), (0, 0, 1), (0, -1, 1))
_PLAQ = ((0, 0, 0), (0, 1, 0), (0, 0, 1), (1, 0, 1))


def build_ktc(L: int) -> CodeDef:
    star = Template.of((dx, dy, s, "Z") for dx, dy, s in _STAR)
    plaq = Template.of((dx, dy, s, "X") for dx, dy, s in _PLAQ)
    return CodeDef(
        "ktc",
        LatticeSpec(2, L, ("h-edge", "v-edge")),
        (star, plaq),
        template_labels=("A_s", "B_p"),
    )


def build_ktc_stack(n: int, L: int) -> CodeDef:
    if n < 1:
        raise CodeConstructionError("stack needs n >= 1 copies")
    if n == 1:
        return build_ktc(L)
    templates, labels, sites = [], [], []
    for c in range(n):
        templates.append(Template.of((dx, dy, 2 * c + s, "Z") for dx, dy, s in _STAR))
        templates.append(Template.of((dx, dy, 2 * c + s, "X") for dx, dy, s in _PLAQ))
        labels += [f"A_s[{c + 1}]", f"B_p[{c + 1}]"]
        sites += [f"h-edge[{c + 1}]", f"v-edge[{c + 1}]"]
    return CodeDef(
        f"ktc-stack:{n}",
        LatticeSpec(2 * n, L, tuple(sites)),
        tuple(templates),
        template_labels=tuple(labels),
        meta={"copies": n},
    )


# ---------------------------------------------------------------------------
# checkerboard blocking: diamond-grid position (i, j) -> (cell x, cell y, offset)


def checkerboard_cell(i: int, j: int) -> tuple[int, int, int]:
    off = (i + j) % 2
    i -= off
    return (i + j) // 2, (i - j) // 2, off


def checkerboard_template(terms: Iterable[tuple[int, int, int, str]], sites: int) -> Template:
    """Rewrite grid-position terms ``(i, j, s, P)`` into two-position cells."""
    out = []
    for i, j, s, letter in terms:
        cx, cy, off = checkerboard_cell(i, j)
        out.append((cx, cy, off * sites + s, letter))
    return Template.of(out)


def block_checkerboard(code: CodeDef) -> CodeDef:
    """Re-express a square-grid code with the two-position (A, B) unit cell."""
    sites = code.sites
    templates, labels = [], []
    for idx, t in enumerate(code.stabilizer_templates):
        label = code.template_labels[idx] if code.template_labels else f"t{idx}"
        for base, tag in (((0, 0), "A"), ((1, 0), "B")):
            templates.append(
                checkerboard_template(
                    ((dx + base[0], dy + base[1], s, p) for dx, dy, s, p in t.terms), sites
                )
            )
            labels.append(f"{label}@{tag}")
    site_labels = tuple(f"{lab}@{tag}" for tag in "AB" for lab in code.lattice.site_labels)
    return CodeDef(
        f"{code.name}@checkerboard",
        LatticeSpec(2 * sites, code.L, site_labels),
        tuple(templates),
        template_labels=tuple(labels),
        meta={**code.meta, "blocked_from": code.name, "blocking": "checkerboard"},
    )


# ---------------------------------------------------------------------------
# square-octagon colour code

TOP, RIGHT, BOTTOM, LEFT = range(4)
_CORNERS = ("top", "right", "bottom", "left")


def _octagon_corners(i: int, j: int) -> list[tuple[int, int, int]]:
    """Vertices (diamond i, diamond j, corner) of the octagon with lower-left diamond (i, j)."""
    return [
        (i, j, TOP),
        (i, j, RIGHT),
        (i + 1, j, LEFT),
        (i + 1, j, TOP),
        (i + 1, j + 1, BOTTOM),
        (i + 1, j + 1, LEFT),
        (i, j + 1, RIGHT),
        (i, j + 1, BOTTOM),
    ]


def _square_corners(i: int, j: int) -> list[tuple[int, int, int]]:
    return [(i, j, c) for c in range(4)]


def build_tcc_48(L: int) -> CodeDef:
    faces = [
        ("square@A", _square_corners(0, 0)),
        ("square@B", _square_corners(1, 0)),
        ("octagon-even", _octagon_corners(0, 0)),
        ("octagon-odd", _octagon_corners(1, 0)),
    ]
    templates, labels = [], []
    for letter in "XZ":
        for label, corners in faces:
            templates.append(checkerboard_template(((i, j, c, letter) for i, j, c in corners), 4))
            labels.append(f"{label}:{letter}")
    site_labels = tuple(f"{c}@{tag}" for tag in "AB" for c in _CORNERS)
    return CodeDef(
        "tcc48",
        LatticeSpec(8, L, site_labels),
        tuple(templates),
        template_labels=tuple(labels),
        meta={"faces": [f[0] for f in faces]},
    )


# ---------------------------------------------------------------------------
# square-octagon subsystem colour code
#
# Each 4.8.8 vertex becomes a triangle whose three corners point into the three
# faces meeting there.  Per vertex (corner c of a diamond) the qubits are
#   0 -> corner inside the square, 1 -> inside the octagon bordered by diamond
#   edge (c, c+1), 2 -> inside the octagon bordered by diamond edge (c-1, c).
# Triangle edges carry ZZ; every original edge becomes two parallel edges, one
# inside each face it borders, labelled X or Y so that each corner meets one of each.
SQUARE_CORNER, PLUS_OCT, MINUS_OCT = range(3)
_COLOURS = ("green", "even", "odd")


def _diamond_edge_colour(i: int, j: int, c: int) -> str:
    """Colour of the diamond edge (c, c+1): the octagon colour it does not border."""
    # edges (0,1) and (2,3) border the octagon of parity i+j
    bordered = (i + j) % 2 if c in (TOP, BOTTOM) else (i + j + 1) % 2
    return "odd" if bordered == 0 else "even"


def _other_octagon(colour: str) -> str:
    return "odd" if colour == "even" else "even"


def _face_edge_label(face: str, edge: str) -> str:
    nxt = _COLOURS[(_COLOURS.index(face) + 1) % 3]
    return "X" if edge == nxt else "Y"


def tscc_gauge_terms() -> list[tuple[str, list]]:
    """Gauge generators for the diamonds at grid positions (0,0) and (1,0).

    Returns ``(edge kind, [(i, j, site, letter), ...])`` in grid coordinates.
    """

    def q(c, k):
        return c * 3 + k

    edges = []
    for i, j in ((0, 0), (1, 0)):
        for c in range(4):
            for a, b in ((SQUARE_CORNER, PLUS_OCT), (PLUS_OCT, MINUS_OCT), (MINUS_OCT, SQUARE_CORNER)):
                edges.append(("triangle", [(i, j, q(c, a), "Z"), (i, j, q(c, b), "Z")]))
            colour = _diamond_edge_colour(i, j, c)
            lab = _face_edge_label("green", colour)
            edges.append(
                ("square", [(i, j, q(c, SQUARE_CORNER), lab), (i, j, q((c + 1) % 4, SQUARE_CORNER), lab)])
            )
            lab = _face_edge_label(_other_octagon(colour), colour)
            edges.append(
                ("octagon", [(i, j, q(c, PLUS_OCT), lab), (i, j, q((c + 1) % 4, MINUS_OCT), lab)])
            )
        for a, b in (((i, j, RIGHT), (i + 1, j, LEFT)), ((i, j, TOP), (i, j + 1, BOTTOM))):
            for ka, kb in ((MINUS_OCT, PLUS_OCT), (PLUS_OCT, MINUS_OCT)):
                border = a[2] if ka == PLUS_OCT else (a[2] - 1) % 4
                face = _other_octagon(_diamond_edge_colour(a[0], a[1], border))
                lab = _face_edge_label(face, "green")
                edges.append(
                    ("octagon", [(a[0], a[1], q(a[2], ka), lab), (b[0], b[1], q(b[2], kb), lab)])
                )
    return edges


def build_tscc_48(L: int, window: int | None = None) -> CodeDef:
    edges = tscc_gauge_terms()
    gauge = tuple(checkerboard_template(terms, 12) for _, terms in edges)
    _check_gauge_letters(gauge, 24)
    site_labels = tuple(
        f"{_CORNERS[c]}.{k}@{tag}" for tag in "AB" for c in range(4) for k in ("sq", "oct+", "oct-")
    )
    solid = tuple(idx for idx, (kind, _) in enumerate(edges) if kind == "triangle")
    skeleton = CodeDef(
        "tscc48",
        LatticeSpec(24, L, site_labels),
        (),
        kind="subsystem",
        gauge_templates=gauge,
        meta={"edge_kinds": tuple(k for k, _ in edges), "solid": solid},
    )
    stab = compute_stabilizer_from_gauge(skeleton, window=window)
    return replace(
        skeleton,
        stabilizer_templates=tuple(stab),
        template_labels=tuple(f"S{k}" for k in range(len(stab))),
    )


def _check_gauge_letters(gauge: Sequence[Template], sites: int) -> None:
    """Every qubit meets two ZZ triangle edges plus one X edge and one Y edge."""
    seen: dict[tuple[int, int, int], list[str]] = {}
    L = 6
    for t in gauge:
        for cx in range(L):
            for cy in range(L):
                for qb, letter in t.place(L, sites, cx, cy).items():
                    seen.setdefault(tuple(qb), []).append(letter)
    if len(seen) != sites * L * L:
        raise CodeConstructionError("some qubits are not touched by any gauge generator")
    for qb, letters in seen.items():
        if sorted(letters) != ["X", "Y", "Z", "Z"]:
            raise CodeConstructionError(f"qubit {qb} sees gauge letters {letters}")


# ---------------------------------------------------------------------------
# stabilizer of a subsystem code


def _window_instances(templates: Sequence[Template], L: int, sites: int, w: int) -> np.ndarray:
    """Rows for translates whose support stays inside cells [0, w)^2 without wrapping."""
    rows = []
    n = L * L * sites
    for t in templates:
        xs = [d[0] for d in t.terms]
        ys = [d[1] for d in t.terms]
        for cx in range(-min(xs), w - max(xs)):
            for cy in range(-min(ys), w - max(ys)):
                v = np.zeros(2 * n, dtype=np.uint8)
                for dx, dy, s, letter in t.terms:
                    q = ((cx + dx) * L + (cy + dy)) * sites + s
                    if letter in "XY":
                        v[q] ^= 1
                    if letter in "YZ":
                        v[n + q] ^= 1
                rows.append(v)
    if not rows:
        return np.zeros((0, 2 * n), dtype=np.uint8)
    return np.array(rows, dtype=np.uint8)


def _closure_rank(templates: Sequence[Template], L: int, sites: int) -> int:
    if not templates:
        return 0
    return gf2.rank(check_matrix(templates, L, sites))


def _lightest_combinations(basis: np.ndarray, half: int, keep: int = 4000) -> np.ndarray:
    """Rows of the span of ``basis`` ordered by Pauli weight (lightest ``keep``).

    ``half`` is the X/Z split of the row layout.  Exhaustive up to 2**20 combinations,
    otherwise the basis plus pairwise sums is used.
    """
    d = basis.shape[0]
    if d > 20:
        pairs = [basis[i] ^ basis[j] for i, j in itertools.combinations(range(d), 2)]
        combos = np.concatenate([basis, np.array(pairs, dtype=np.uint8)])
        weights = (combos[:, :half] | combos[:, half:]).sum(axis=1)
        return combos[np.argsort(weights, kind="stable")[:keep]]
    px, _ = gf2.pack(basis[:, :half])
    pz, _ = gf2.pack(basis[:, half:])
    packed = np.concatenate([px, pz], axis=1)
    lo = d // 2

    def table(rows):
        out = np.zeros((1, packed.shape[1]), dtype=np.uint64)
        for r in rows:
            out = np.concatenate([out, out ^ r])
        return out

    t_lo, t_hi = table(packed[:lo]), table(packed[lo:])
    combos = (t_hi[:, None, :] ^ t_lo[None, :, :]).reshape(-1, packed.shape[1])
    nw = px.shape[1]
    weights = np.bitwise_count(combos[:, :nw] | combos[:, nw:]).sum(axis=1).astype(np.int64)
    weights[0] = np.iinfo(np.int64).max  # the empty combination
    order = np.argsort(weights, kind="stable")[: min(keep, len(weights) - 1)]
    # decode combination indices back to coefficient vectors, then to rows
    coeff = ((order[:, None] >> np.arange(d)[None, :]) & 1).astype(np.uint8)
    # index = hi_index * 2**lo + lo_index; bits [0, lo) address lo rows, the rest hi rows
    return (coeff.astype(np.int64) @ basis.astype(np.int64) % 2).astype(np.uint8)


def compute_stabilizer_from_gauge(
    code: CodeDef, window: int | None = None, max_window: int = 3
) -> list[Template]:
    """Local translation-invariant generators of Z(G) ∩ G.

    Windows of w x w cells are grown until every centre element supported in
    the window is already generated by translates of the chosen templates.
    Candidates are taken lightest first; all signs are fixed to +1.
    """
    if code.kind != "subsystem":
        raise CodeConstructionError(f"{code.name} is not a subsystem code")
    sites = code.sites
    gauge = list(code.gauge_templates)
    reach = max(t.extent for t in gauge)
    windows = [window] if window else list(range(1, max_window + 1))
    chosen: list[Template] = []
    test_L = max(4, 2 * reach + 1)
    solver = None
    for w in windows:
        L = w + 2 * reach + 1
        local = _window_instances(gauge, L, sites, w)
        if local.shape[0] == 0:
            continue
        every = check_matrix(gauge, L, sites)
        omega = symplectic_form(local, every).astype(np.uint8)
        combos = gf2.left_kernel(omega)
        if combos.shape[0] == 0:
            continue
        products = (combos.astype(np.int64) @ local.astype(np.int64)) % 2
        basis, _ = gf2.row_reduce(products.astype(np.uint8))
        if basis.shape[0] == 0:
            continue
        n = L * L * sites
        region = [(cx * L + cy) * sites + s for cx in range(w) for cy in range(w) for s in range(sites)]
        cols = region + [n + q for q in region]

        def to_template(row):
            v = np.zeros(2 * n, dtype=np.uint8)
            v[cols] = row
            return Template.of(Template.from_operator(PauliOperator.from_vector(L, sites, v)).terms)

        def covered():
            return solver is not None and all(
                solver.contains(to_template(b[cols]).place(test_L, sites).vector()) for b in basis
            )

        if covered():
            break
        for row in _lightest_combinations(basis[:, cols], len(region)):
            t = to_template(row)
            # the closure is translation invariant, so one placed copy decides membership
            if solver is None or not solver.contains(t.place(test_L, sites).vector()):
                chosen.append(t)
                solver = gf2.SpanSolver(check_matrix(chosen, test_L, sites))
                if covered():
                    break
    return chosen


def build_intermediate_sz(tscc: CodeDef) -> CodeDef:
    """S' = S * S_z: the subsystem stabilizer plus every solid (ZZ) gauge edge."""
    if tscc.kind != "subsystem":
        raise CodeConstructionError("S' construction needs a subsystem code")
    solid = [tscc.gauge_templates[i] for i in tscc.meta["solid"]]
    templates = tuple(tscc.stabilizer_templates) + tuple(solid)
    labels = tuple(tscc.template_labels) + tuple(f"ZZ{k}" for k in range(len(solid)))
    return CodeDef(
        f"{tscc.name}-sz",
        tscc.lattice,
        templates,
        template_labels=labels,
        meta={
            "parent": tscc.name,
            "parent_stabilizers": len(tscc.stabilizer_templates),
            "gauge_templates": tscc.gauge_templates,
        },
    )


# ---------------------------------------------------------------------------
# definition-level check


class InvalidWindowError(ValueError):
    pass


@dataclass(frozen=True)
class CentralizerReport:
    passed: bool
    window: int
    checked: int
    counterexamples: tuple[PauliOperator, ...]


def local_centralizer_check(
    code: CodeDef, window: int, against: str = "stabilizer"
) -> CentralizerReport:
    """Every operator inside a window commuting with all stabilizers lies in the group.

    ``against="stabilizer"`` tests Z(S) ∝ S; ``against="gauge"`` tests Z(S) ∝ G.
    """
    L, sites = code.L, code.sites
    if window < 1 or 2 * window > L:
        raise InvalidWindowError(f"window {window} too large for L={L} (need window <= L/2)")
    n = code.num_qubits
    stab = code.stabilizer_matrix()
    region = [
        (cx * L + cy) * sites + s for cx in range(window) for cy in range(window) for s in range(sites)
    ]
    cols = region + [n + q for q in region]
    swapped = [n + q for q in region] + region
    m = stab[:, swapped]
    basis = gf2.nullspace(m)
    if against == "stabilizer":
        group = stab
    elif against == "gauge":
        group = code.gauge_matrix() if code.kind == "subsystem" else check_matrix(
            code.meta["gauge_templates"], L, sites
        )
    else:
        raise ValueError(f"unknown group {against!r}")
    solver = gf2.SpanSolver(group)
    bad = []
    for b in basis:
        v = np.zeros(2 * n, dtype=np.uint8)
        v[cols] = b
        if not solver.contains(v):
            bad.append(PauliOperator.from_vector(L, sites, v))
    return CentralizerReport(not bad, window, int(basis.shape[0]), tuple(bad))


# ---------------------------------------------------------------------------
# registry

CODE_NAMES = ("ktc", "ktc-stack:n", "tcc48", "tscc48", "tscc48-sz")

@functools.lru_cache(maxsize=None)
def _tscc_template() -> CodeDef:
    return build_tscc_48(4)


def get_code(name: str, L: int) -> CodeDef:
    if name == "ktc":
        return build_ktc(L)
    if name.startswith("ktc-stack:"):
        try:
            n = int(name.split(":", 1)[1])
        except ValueError as exc:
            raise CodeConstructionError(f"bad stack spec {name!r}") from exc
        return build_ktc_stack(n, L)
    if name == "tcc48":
        return build_tcc_48(L)
    if name == "tscc48":
        LatticeSpec(24, L)
        return _tscc_template().at(L)
    if name == "tscc48-sz":
        LatticeSpec(24, L)
        return build_intermediate_sz(_tscc_template()).at(L)
    raise CodeConstructionError(f"unknown code {name!r}; known: {', '.join(CODE_NAMES)}")
