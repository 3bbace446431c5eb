"""Translation-invariant local Clifford maps between codes.

A map is a table giving, for every site of the source cell, the images of
single-qubit X and Z as templates on the target lattice (offsets relative to
the source qubit's cell).  Ancilla sites carry single-qubit stabilizers that
pad source or target so both sides have the same number of qubits per cell.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Sequence

import numpy as np

from topomap import gf2
from topomap.codes import (
    CodeDef,
    LatticeSpec,
    Template,
    block_checkerboard,
    build_ktc_stack,
    build_tcc_48,
    logical_count,
    site_components,
)
from topomap.pauli import PauliOperator, symplectic_form


class MappingDomainError(ValueError):
    pass


class SyndromeConsistencyError(RuntimeError):
    pass


@dataclass(frozen=True)
class LocalCliffordMap:
    source_name: str
    target_name: str
    source_sites: int
    target_sites: int
    images: tuple[tuple[Template, Template], ...]  # per padded source site: (X image, Z image)
    ancilla_in: tuple[Template, ...] = ()
    ancilla_out: tuple[Template, ...] = ()
    blocking: str | None = None

    @property
    def v(self) -> int:
        return max(t.extent for pair in self.images for t in pair) - 1

    @property
    def padded_source_sites(self) -> int:
        return len(self.images)

    @classmethod
    def identity(cls, code: CodeDef) -> "LocalCliffordMap":
        images = tuple(
            (Template.of([(0, 0, s, "X")]), Template.of([(0, 0, s, "Z")])) for s in range(code.sites)
        )
        return cls(code.name, code.name, code.sites, code.sites, images)

    def image_of(self, site: int, letter: str) -> Template:
        x, z = self.images[site]
        return {"X": x, "Z": z}[letter]


def pad_code(code: CodeDef, ancillas: Sequence[Template], extra_sites: int) -> CodeDef:
    """Append ``extra_sites`` ancilla sites stabilized by single-qubit templates."""
    if not extra_sites:
        return code
    labels = code.lattice.site_labels + tuple(f"ancilla{k}" for k in range(extra_sites))
    return replace(
        code,
        name=code.name,
        lattice=LatticeSpec(code.sites + extra_sites, code.L, labels),
        stabilizer_templates=tuple(code.stabilizer_templates) + tuple(ancillas),
        template_labels=tuple(code.template_labels) + tuple(f"T{k}" for k in range(len(ancillas))),
    )


# ---------------------------------------------------------------------------
# action on operators


def _place_many(terms, L: int, sites: int, cx: int, cy: int, phase: int = 0) -> PauliOperator:
    return Template(terms, phase).place(L, sites, cx, cy)


def apply(cmap: LocalCliffordMap, p: PauliOperator) -> PauliOperator:
    """Conjugate ``p`` by the map (exact phase)."""
    if p.sites != cmap.padded_source_sites:
        raise MappingDomainError(
            f"operator has {p.sites} sites per cell, map expects {cmap.padded_source_sites}"
        )
    L = p.L
    out = PauliOperator(L, cmap.target_sites, phase=p.phase)
    for q, letter in p.items():
        x_img, z_img = cmap.images[q.s]
        if letter == "X":
            out = out * x_img.place(L, cmap.target_sites, q.x, q.y)
        elif letter == "Z":
            out = out * z_img.place(L, cmap.target_sites, q.x, q.y)
        else:  # Y = i X Z
            img = x_img.place(L, cmap.target_sites, q.x, q.y) * z_img.place(
                L, cmap.target_sites, q.x, q.y
            )
            out = out * img.with_phase(img.phase + 1)
    return out


def image_matrix(cmap: LocalCliffordMap, L: int) -> np.ndarray:
    """Symplectic matrix M with row(source basis vector) -> image vector on the L torus."""
    s_src = cmap.padded_source_sites
    n_src = L * L * s_src
    n_tgt = L * L * cmap.target_sites
    m = np.zeros((2 * n_src, 2 * n_tgt), dtype=np.uint8)
    for cx in range(L):
        for cy in range(L):
            for s in range(s_src):
                q = (cx * L + cy) * s_src + s
                for k, tmpl in enumerate(cmap.images[s]):
                    m[q + k * n_src] = tmpl.place(L, cmap.target_sites, cx, cy).vector()
    return m


def apply_vectors(cmap: LocalCliffordMap, vectors: np.ndarray, L: int) -> np.ndarray:
    """Phase-free action on symplectic row vectors (batched)."""
    m = image_matrix(cmap, L)
    return (np.asarray(vectors, dtype=np.int64) @ m.astype(np.int64) % 2).astype(np.uint8)


# ---------------------------------------------------------------------------
# verification


@dataclass
class MapReport:
    symplectic_ok: bool
    group_map_ok: bool
    v: int
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.symplectic_ok and self.group_map_ok


def verify_symplectic(cmap: LocalCliffordMap) -> MapReport:
    """All translated commutation relations of the images match the source ones."""
    failures = []
    ext = max(t.extent for pair in cmap.images for t in pair)
    L = 2 * ext + 1
    m = image_matrix(cmap, L)
    n_src = L * L * cmap.padded_source_sites
    # rows for the single-qubit generators anchored in cell (0,0)
    anchor = [s for s in range(cmap.padded_source_sites)]
    rows = np.concatenate([m[anchor], m[[n_src + s for s in anchor]]])
    got = symplectic_form(rows, m)
    want = np.zeros_like(got)
    for s in range(cmap.padded_source_sites):
        want[s, n_src + s] = 1
        want[cmap.padded_source_sites + s, s] = 1
    bad = np.argwhere(got != want)
    for r, c in bad[:10]:
        failures.append(f"commutation mismatch between generator {r} and image column {c}")
    if cmap.padded_source_sites * 1 != cmap.target_sites:
        failures.append("qubit count per cell differs after padding")
    ok = not failures
    if ok and gf2.rank(m) != m.shape[0]:
        failures.append("images are not independent")
        ok = False
    return MapReport(ok, False, cmap.v, failures)


def _decompose_phase(target_ops: list[PauliOperator], coeffs: np.ndarray, image: PauliOperator) -> int:
    prod = PauliOperator(image.L, image.sites)
    for i in np.flatnonzero(coeffs):
        prod = prod * target_ops[i]
    return (prod.phase - image.phase) % 4


def verify_code_map(
    cmap: LocalCliffordMap, source: CodeDef, target: CodeDef, L: int
) -> MapReport:
    """Check U (S x T) U^dagger = S' x T' on the L torus, signs included."""
    report = verify_symplectic(cmap)
    if not report.symplectic_ok:
        return report
    src = _padded_source(cmap, source).at(L)
    tgt = _resolve_target(cmap, target).at(L)
    src_ops = src.stabilizers()
    tgt_ops = tgt.stabilizers()
    images = [apply(cmap, op) for op in src_ops]
    img_rows = np.array([op.vector() for op in images], dtype=np.uint8)
    tgt_rows = tgt.stabilizer_matrix()
    failures = []
    r_img, r_tgt = gf2.rank(img_rows), gf2.rank(tgt_rows)
    if r_img != r_tgt:
        failures.append(f"rank mismatch: image {r_img} vs target {r_tgt}")
    solver = gf2.SpanSolver(tgt_rows)
    for k, img in enumerate(images):
        coeffs = solver.solve(img.vector())
        if coeffs is None:
            failures.append(f"image of source generator {k} outside the target group")
        elif _decompose_phase(tgt_ops, coeffs, img) != 0:
            failures.append(f"image of source generator {k} has the wrong sign")
        if len(failures) > 10:
            break
    if not failures:
        back = gf2.SpanSolver(img_rows)
        for k, row in enumerate(tgt_rows):
            if not back.contains(row):
                failures.append(f"target generator {k} not generated by images")
                break
    return MapReport(True, not failures, cmap.v, failures)


def _padded_source(cmap: LocalCliffordMap, source: CodeDef) -> CodeDef:
    return pad_code(source, cmap.ancilla_in, cmap.padded_source_sites - source.sites)


def _resolve_target(cmap: LocalCliffordMap, target: CodeDef) -> CodeDef:
    if cmap.blocking == "checkerboard" and not target.meta.get("blocking"):
        target = block_checkerboard(target)
    return pad_code(target, cmap.ancilla_out, cmap.target_sites - target.sites)


# ---------------------------------------------------------------------------
# composition


def compose(first: LocalCliffordMap, second: LocalCliffordMap) -> LocalCliffordMap:
    """The map ``second ∘ first`` (apply ``first``, then ``second``)."""
    if first.target_sites != second.padded_source_sites:
        raise MappingDomainError("site counts do not chain")
    ext = max(t.extent for pair in first.images for t in pair)
    ext2 = max(t.extent for pair in second.images for t in pair)
    L = 2 * (ext + ext2) + 3
    images = []
    for s in range(first.padded_source_sites):
        pair = []
        for letter in "XZ":
            mid = first.image_of(s, letter).place(L, first.target_sites)
            img = apply(second, mid)
            pair.append(_centred_template(img))
        images.append(tuple(pair))
    carried = tuple(
        _centred_template(apply(second, t.place(L, first.target_sites))) for t in first.ancilla_out
    )
    return LocalCliffordMap(
        first.source_name,
        second.target_name,
        first.source_sites,
        second.target_sites,
        tuple(images),
        first.ancilla_in,
        tuple(second.ancilla_out) + tuple(t for t in carried if t not in second.ancilla_out),
        second.blocking or first.blocking,
    )


def _centred_template(op: PauliOperator) -> Template:
    """Template with offsets in (-L/2, L/2] relative to cell (0, 0)."""
    L = op.L
    half = L // 2
    terms = []
    for q, letter in op.items():
        dx = q.x if q.x <= half else q.x - L
        dy = q.y if q.y <= half else q.y - L
        terms.append((dx, dy, q.s, letter))
    return Template(tuple(sorted(terms)), op.phase)


def tensor_identity(cmap: LocalCliffordMap, extra_sites: int) -> LocalCliffordMap:
    """Extend a map by the identity on ``extra_sites`` appended sites on both sides."""
    t0 = cmap.target_sites
    extra = tuple(
        (Template.of([(0, 0, t0 + k, "X")]), Template.of([(0, 0, t0 + k, "Z")]))
        for k in range(extra_sites)
    )
    return replace(cmap, images=cmap.images + extra, target_sites=t0 + extra_sites)


def site_permutation(sites: int, perm: Sequence[int], name: str = "perm") -> LocalCliffordMap:
    """Relabel site s of the cell as perm[s]."""
    images = tuple(
        (Template.of([(0, 0, perm[s], "X")]), Template.of([(0, 0, perm[s], "Z")]))
        for s in range(sites)
    )
    return LocalCliffordMap(name, name, sites, sites, images)


# ---------------------------------------------------------------------------
# serialization

_HEADER_KEYS = ("source", "target", "source_sites", "target_sites", "blocking", "v")


def to_text(cmap: LocalCliffordMap) -> str:
    lines = [
        f"# source: {cmap.source_name}",
        f"# target: {cmap.target_name}",
        f"# source_sites: {cmap.source_sites}",
        f"# target_sites: {cmap.target_sites}",
        f"# blocking: {cmap.blocking or 'none'}",
        f"# v: {cmap.v}",
    ]
    for t in cmap.ancilla_in:
        lines.append(f"# ancilla_in: {_template_text(t)}")
    for t in cmap.ancilla_out:
        lines.append(f"# ancilla_out: {_template_text(t)}")
    for s, (x, z) in enumerate(cmap.images):
        lines.append(f"{s} X -> {_template_text(x)}")
        lines.append(f"{s} Z -> {_template_text(z)}")
    return "\n".join(lines) + "\n"


def _template_text(t: Template) -> str:
    phase = {0: "+1", 1: "+i", 2: "-1", 3: "-i"}[t.phase]
    body = " ".join(f"{dx},{dy},{s}:{p}" for dx, dy, s, p in t.terms)
    return f"{phase}; {body}".rstrip()


def _parse_template(text: str) -> Template:
    head, _, body = text.partition(";")
    phase = {"+1": 0, "+i": 1, "-1": 2, "-i": 3}[head.strip()]
    terms = []
    for tok in body.split():
        coords, _, letter = tok.partition(":")
        dx, dy, s = (int(v) for v in coords.split(","))
        terms.append((dx, dy, s, letter))
    return Template(tuple(sorted(terms)), phase)


def from_text(text: str) -> LocalCliffordMap:
    header: dict[str, str] = {}
    anc_in, anc_out = [], []
    images: dict[tuple[int, str], Template] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            key, value = key.strip(), value.strip()
            if key == "ancilla_in":
                anc_in.append(_parse_template(value))
            elif key == "ancilla_out":
                anc_out.append(_parse_template(value))
            else:
                header[key] = value
            continue
        lhs, _, rhs = line.partition("->")
        site, letter = lhs.split()
        images[(int(site), letter)] = _parse_template(rhs.strip())
    n = 1 + max(s for s, _ in images)
    return LocalCliffordMap(
        header["source"],
        header["target"],
        int(header["source_sites"]),
        int(header["target_sites"]),
        tuple((images[(s, "X")], images[(s, "Z")]) for s in range(n)),
        tuple(anc_in),
        tuple(anc_out),
        None if header.get("blocking", "none") == "none" else header["blocking"],
    )


# ---------------------------------------------------------------------------
# search


class MapNotFound(LookupError):
    pass


def _is_css(code: CodeDef) -> bool:
    return all(set(t.letters()) <= {"X"} or set(t.letters()) <= {"Z"} for t in code.stabilizer_templates)


def _rank_obstruction(source: CodeDef, target: CodeDef) -> str | None:
    for L in (3, 4):
        ks, kt = logical_count(source, L), logical_count(target, L)
        if ks != kt:
            return f"logical qubit counts differ at L={L}: {ks} vs {kt}"
    return None


class _Cnf:
    """Thin wrapper that numbers variables and caches AND gates."""

    def __init__(self, time_limit=None):
        from pycryptosat import Solver

        kwargs = {} if time_limit is None else {"time_limit": time_limit}
        self.solver = Solver(threads=1, **kwargs)
        self.count = 0
        self._and: dict[tuple[int, int], int] = {}

    def new(self) -> int:
        self.count += 1
        return self.count

    def conj(self, a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        v = self._and.get(key)
        if v is None:
            v = self.new()
            self.solver.add_clause([-v, a])
            self.solver.add_clause([-v, b])
            self.solver.add_clause([v, -a, -b])
            self._and[key] = v
        return v

    def xor(self, variables: list[int], rhs: bool) -> bool:
        """Add an XOR constraint; returns False if it is trivially violated."""
        if not variables:
            return not rhs
        self.solver.add_xor_clause(variables, rhs)
        return True

    def at_most(self, variables: list[int], k: int) -> None:
        """Sequential-counter encoding of sum(variables) <= k."""
        if len(variables) <= k:
            return
        if k == 0:
            for v in variables:
                self.solver.add_clause([-v])
            return
        prev = None
        for i, x in enumerate(variables):
            cur = [self.new() for _ in range(k)]
            self.solver.add_clause([-x, cur[0]])
            if prev is not None:
                for j in range(k):
                    self.solver.add_clause([-prev[j], cur[j]])
                for j in range(1, k):
                    self.solver.add_clause([-x, -prev[j - 1], cur[j]])
                self.solver.add_clause([-x, -prev[k - 1]])
            prev = cur


def find_map(
    source: CodeDef,
    target: CodeDef,
    radius: int,
    css: bool | None = None,
    blocking: str | None = None,
    max_defects: int | None = None,
) -> LocalCliffordMap:
    """Search for a map whose image templates lie in the window [-radius, radius]^2.

    Both codes must already be padded to the same number of sites per cell.
    ``max_defects`` bounds, per target layer, how many generators each
    single-qubit image anticommutes with; 2 makes every mapped fault one edge
    of each layer's matching graph.
    Raises ``MapNotFound`` if no such map exists within the ansatz.
    """
    n = source.sites
    if target.sites != n:
        raise MappingDomainError(f"sites per cell differ: {n} vs {target.sites}")
    reason = _rank_obstruction(source, target)
    if reason:
        raise MapNotFound(reason)
    if source.name == target.name and source.stabilizer_templates == target.stabilizer_templates:
        ident = LocalCliffordMap.identity(source)
        return replace(ident, blocking=blocking)
    if css is None:
        css = _is_css(source) and _is_css(target)

    for window in _windows(radius):
        cmap = _search(source, target, window, css, blocking, max_defects=max_defects)
        if cmap is not None:
            return cmap
    raise MapNotFound(f"no map within radius {radius}")


def _windows(radius: int) -> list[list[tuple[int, int]]]:
    """Offset windows tried in order: one cell, then 2x2 boxes, then the full square."""
    out = [[(0, 0)]]
    if radius >= 1:
        for sx in (1, -1):
            for sy in (1, -1):
                out.append([(0, 0), (sx, 0), (0, sy), (sx, sy)])
        out.append([(dx, dy) for dx in range(-radius, radius + 1) for dy in range(-radius, radius + 1)])
    return out


def _search(source, target, window, css, blocking, time_limit=None, max_defects=None):
    n = source.sites
    cnf = _Cnf(time_limit)
    # image index i = 2*s + k (k = 0 for X, 1 for Z); var[i][(dx, dy, t, comp)]
    var: list[dict[tuple[int, int, int, int], int]] = []
    for s in range(n):
        for k in range(2):
            table = {}
            for dx, dy in window:
                for t in range(n):
                    for comp in range(2):
                        if css and comp != k:
                            continue
                        table[(dx, dy, t, comp)] = cnf.new()
            var.append(table)

    shifts = sorted({(a[0] - b[0], a[1] - b[1]) for a in window for b in window})
    if not _commutation_constraints(cnf, var, shifts):
        return None
    # the inverse of a symplectic map is read off the same variables (transpose
    # with X and Z exchanged); its images obey the same relations
    inverse: list[dict] = [dict() for _ in range(2 * n)]
    for i, table in enumerate(var):
        for (px, py, t, comp), v in table.items():
            inverse[2 * t + 1 - comp][(-px, -py, i // 2, 1 - i % 2)] = v
    if not _commutation_constraints(cnf, inverse, shifts):
        return None

    # images of source stabilizers lie in the target group
    forward = {}
    for s_ in range(n):
        for k in range(2):
            for (px, py, t, comp), a in var[2 * s_ + k].items():
                forward.setdefault((s_, k), []).append(((px, py, t, comp), a))
    _span_constraints(cnf, forward, source.stabilizer_templates, target.stabilizer_templates)
    # and preimages of target stabilizers lie in the source group
    backward = {(i // 2, i % 2): list(table.items()) for i, table in enumerate(inverse)}
    _span_constraints(cnf, backward, target.stabilizer_templates, source.stabilizer_templates)

    if max_defects is not None:
        layers = site_components(target)
        for table in var:
            for sites in layers:
                group = [g for g in target.stabilizer_templates if g.terms and g.terms[0][2] in sites]
                cnf.at_most(_defect_bits(cnf, table, group), max_defects)

    ok, solution = cnf.solver.solve()
    if not ok:
        return None

    images = []
    for s in range(n):
        pair = []
        for k in range(2):
            terms = []
            for (dx, dy, t, comp), a in sorted(var[2 * s + k].items()):
                if solution[a]:
                    terms.append((dx, dy, t, "XZ"[comp]))
            pair.append(Template.of(terms))
        images.append(tuple(pair))
    cmap = LocalCliffordMap(source.name, target.name, n, n, tuple(images), blocking=blocking)
    return fix_signs(cmap, source, target)


def _defect_bits(cnf: _Cnf, table: dict, group) -> list[int]:
    """One variable per target generator translate: does the image anticommute with it."""
    out = []
    for g in group:
        hits: dict[tuple[int, int], list[int]] = {}
        for gx, gy, t, letter in g.terms:
            for (px, py, tt, comp), a in table.items():
                if tt == t and letter in ("YZ" if comp == 0 else "XY"):
                    hits.setdefault((px - gx, py - gy), []).append(a)
        for cell in sorted(hits):
            d = cnf.new()
            cnf.xor(hits[cell] + [d], False)
            out.append(d)
    return out


def _commutation_constraints(cnf: _Cnf, var: list[dict], shifts) -> bool:
    """Translated images reproduce the single-qubit commutation relations."""
    for i in range(len(var)):
        for j in range(i, len(var)):
            for d in shifts:
                if i == j and d <= (0, 0):
                    continue
                prods = []
                for (px, py, t, comp), a in var[i].items():
                    b = var[j].get((px + d[0], py + d[1], t, 1 - comp))
                    if b is not None:
                        prods.append(cnf.conj(a, b))
                want = d == (0, 0) and i // 2 == j // 2 and i != j
                if not cnf.xor(prods, want):
                    return False
    return True


def _span_constraints(cnf: _Cnf, images, templates, group) -> None:
    """Require the image of every template to be a product of ``group`` translates.

    ``images[(site, k)]`` lists ``((dx, dy, site', comp), var)`` pairs giving the
    image of X (k = 0) or Z (k = 1) on ``site`` at cell (0, 0).
    """
    gens = [g for g in group if g.terms]
    reach = max(g.extent for g in gens)
    for tmpl in templates:
        bits: dict[tuple[int, int, int, int], list[int]] = {}
        for dx, dy, s, letter in tmpl.terms:
            for k, comp_letters in ((0, "XY"), (1, "YZ")):
                if letter not in comp_letters:
                    continue
                for (px, py, t, comp), a in images.get((s, k), ()):
                    bits.setdefault((px + dx, py + dy, t, comp), []).append(a)
        xs = [p[0] for p in bits] or [0]
        ys = [p[1] for p in bits] or [0]
        lo_x, hi_x, lo_y, hi_y = min(xs) - reach, max(xs) + 1, min(ys) - reach, max(ys) + 1
        for g in gens:
            gx = min(t[0] for t in g.terms)
            gy = min(t[1] for t in g.terms)
            for cx in range(lo_x - gx, hi_x - gx):
                for cy in range(lo_y - gy, hi_y - gy):
                    c = cnf.new()
                    for dx, dy, t, letter in g.terms:
                        for comp, comp_letters in ((0, "XY"), (1, "YZ")):
                            if letter in comp_letters:
                                bits.setdefault((cx + dx, cy + dy, t, comp), []).append(c)
        for key in sorted(bits):
            cnf.xor(bits[key], False)


def fix_signs(cmap: LocalCliffordMap, source: CodeDef, target: CodeDef) -> LocalCliffordMap:
    """Choose image signs so every source stabilizer maps to a +1 target stabilizer."""
    ext = max(t.extent for pair in cmap.images for t in pair)
    sext = max(t.extent for t in source.stabilizer_templates)
    L = max(4, sext + 2 * ext + 2)
    src = source.at(L)
    tgt = target.at(L)
    tgt_ops = tgt.stabilizers()
    solver = gf2.SpanSolver(tgt.stabilizer_matrix())
    rows, rhs = [], []
    for tmpl in src.stabilizer_templates:
        img = apply(cmap, tmpl.place(L, src.sites))
        coeffs = solver.solve(img.vector())
        if coeffs is None:
            raise MapNotFound("stabilizer image outside the target group")
        phase = _decompose_phase(tgt_ops, coeffs, img)
        if phase % 2:
            raise MapNotFound("stabilizer image is not Hermitian")
        row = np.zeros(2 * cmap.padded_source_sites, dtype=np.uint8)
        for _, _, s, letter in tmpl.terms:
            if letter in "XY":
                row[2 * s] ^= 1
            if letter in "YZ":
                row[2 * s + 1] ^= 1
        rows.append(row)
        rhs.append(phase // 2)
    flips = gf2.solve(np.array(rows), np.array(rhs, dtype=np.uint8))
    if flips is None:
        raise MapNotFound("no consistent choice of image signs")
    images = []
    for s, (x, z) in enumerate(cmap.images):
        images.append(
            (
                Template(x.terms, (x.phase + 2 * int(flips[2 * s])) % 4),
                Template(z.terms, (z.phase + 2 * int(flips[2 * s + 1])) % 4),
            )
        )
    return replace(cmap, images=tuple(images))


# ---------------------------------------------------------------------------
# inverse maps and syndrome transport


def inverse(cmap: LocalCliffordMap) -> LocalCliffordMap:
    """The inverse map, read off as the symplectic transpose (image signs set to +1)."""
    n_src, n_tgt = cmap.padded_source_sites, cmap.target_sites
    terms: dict[tuple[int, int], list] = {(t, k): [] for t in range(n_tgt) for k in range(2)}
    for s, pair in enumerate(cmap.images):
        for k, tmpl in enumerate(pair):
            for dx, dy, t, letter in tmpl.terms:
                # the image of B(s) has a Z (X) bit at t: then X(t) (Z(t)) pulls back
                # with a component along the partner of B(s)
                partner = "ZX"[k]
                if letter in "YZ":
                    terms[(t, 0)].append((-dx, -dy, s, partner))
                if letter in "XY":
                    terms[(t, 1)].append((-dx, -dy, s, partner))
    images = tuple(
        (Template.of(terms[(t, 0)]), Template.of(terms[(t, 1)])) for t in range(n_tgt)
    )
    return LocalCliffordMap(
        cmap.target_name,
        cmap.source_name,
        n_tgt,
        n_src,
        images,
        cmap.ancilla_out,
        cmap.ancilla_in,
        cmap.blocking,
    )


def local_decomposition(
    op: Template, group: Sequence[Template], sites: int
) -> list[tuple[int, int, int]] | None:
    """Write ``op`` as a product of translates of ``group`` templates near its support.

    Returns ``[(template index, dx, dy), ...]`` or ``None``.  Signs are ignored.
    """
    if not op.terms:
        return []
    gens = [(k, g) for k, g in enumerate(group) if g.terms]
    reach = max(g.extent for _, g in gens)
    xs = [t[0] for t in op.terms]
    ys = [t[1] for t in op.terms]
    lo_x, hi_x, lo_y, hi_y = min(xs) - reach, max(xs) + 1, min(ys) - reach, max(ys) + 1
    L = max(hi_x - lo_x, hi_y - lo_y) + 2 * reach + 2
    cand, rows = [], []
    for k, g in gens:
        gx = min(t[0] for t in g.terms)
        gy = min(t[1] for t in g.terms)
        for cx in range(lo_x - gx, hi_x - gx):
            for cy in range(lo_y - gy, hi_y - gy):
                cand.append((k, cx, cy))
                rows.append(g.place(L, sites, cx, cy).vector())
    coeffs = gf2.SpanSolver(np.array(rows)).solve(op.place(L, sites).vector())
    if coeffs is None:
        return None
    return [cand[i] for i in np.flatnonzero(coeffs)]


def _cell_index(L: int) -> np.ndarray:
    return np.arange(L * L).reshape(L, L)


def _shift_cells(L: int, dx: int, dy: int) -> np.ndarray:
    """Flat cell indices of (x + dx, y + dy) for every cell (x, y) in flat order."""
    x, y = np.divmod(np.arange(L * L), L)
    return ((x + dx) % L) * L + (y + dy) % L


def generator_transfer(
    decompositions: Sequence[Sequence[tuple[int, int, int]]], n_cols_templates: int, L: int
):
    """Sparse 0/1 matrix R with R[(t, c), (k, c + d)] for each entry (k, dx, dy) of template t."""
    from scipy import sparse

    L2 = L * L
    cells = np.arange(L2)
    rows, cols = [], []
    for t, entries in enumerate(decompositions):
        for k, dx, dy in entries:
            rows.append(t * L2 + cells)
            cols.append(k * L2 + _shift_cells(L, dx, dy))
    n_rows = len(decompositions) * L2
    if not rows:
        return sparse.csr_matrix((n_rows, n_cols_templates * L2), dtype=np.uint8)
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    m = sparse.coo_matrix((np.ones(r.size, dtype=np.int64), (r, c)), shape=(n_rows, n_cols_templates * L2))
    m = m.tocsr()
    m.data %= 2
    m.eliminate_zeros()
    return m.astype(np.uint8)


def symplectic_matrix(cmap: LocalCliffordMap, L: int):
    """Sparse matrix M with (source vector) @ M = image vector, X block then Z block."""
    from scipy import sparse

    s_src, s_tgt = cmap.padded_source_sites, cmap.target_sites
    n_src, n_tgt = L * L * s_src, L * L * s_tgt
    cells = np.arange(L * L)
    rows, cols = [], []
    for s, pair in enumerate(cmap.images):
        for k, tmpl in enumerate(pair):
            row = k * n_src + cells * s_src + s
            for dx, dy, t, letter in tmpl.terms:
                target_cell = _shift_cells(L, dx, dy)
                if letter in "XY":
                    rows.append(row)
                    cols.append(target_cell * s_tgt + t)
                if letter in "YZ":
                    rows.append(row)
                    cols.append(n_tgt + target_cell * s_tgt + t)
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    m = sparse.coo_matrix((np.ones(r.size, dtype=np.int64), (r, c)), shape=(2 * n_src, 2 * n_tgt))
    m = m.tocsr()
    m.data %= 2
    m.eliminate_zeros()
    return m


def gf2_matmul(a, b) -> np.ndarray:
    """(a @ b) mod 2 for dense/sparse 0/1 operands, returned dense uint8."""
    out = a @ b
    if hasattr(out, "toarray"):
        out = out.toarray()
    return (np.asarray(out) % 2).astype(np.uint8)


class SyndromeTransport:
    """Move syndromes and corrections between a source code and a mapped target code.

    Syndromes are 0/1 arrays indexed like ``code.stabilizers()``; error vectors use
    the symplectic layout of ``PauliOperator.vector``.  Both accept a leading batch axis.
    """

    def __init__(self, cmap: LocalCliffordMap, source: CodeDef, target: CodeDef, L: int):
        self.map = cmap
        self.L = L
        self.source = _padded_source(cmap, source).at(L)
        self.target = _resolve_target(cmap, target).at(L)
        inv = inverse(cmap)
        s_src, s_tgt = self.source.sites, self.target.sites
        back = []
        for g in self.target.stabilizer_templates:
            pre = _centred_template(apply(inv, g.place(_safe_L(g, inv), s_tgt)))
            entries = local_decomposition(pre, self.source.stabilizer_templates, s_src)
            if entries is None:
                raise SyndromeConsistencyError("a target generator does not pull back into the source group")
            back.append(entries)
        fwd = []
        for g in self.source.stabilizer_templates:
            img = _centred_template(apply(cmap, g.place(_safe_L(g, cmap), s_src)))
            entries = local_decomposition(img, self.target.stabilizer_templates, s_tgt)
            if entries is None:
                raise SyndromeConsistencyError("a source generator does not map into the target group")
            fwd.append(entries)
        # tau = D sigma and sigma = C tau
        self.push_matrix = generator_transfer(back, len(self.source.stabilizer_templates), L)
        self.check_matrix = generator_transfer(fwd, len(self.target.stabilizer_templates), L)
        self.pull_matrix = symplectic_matrix(inv, L)
        self.forward_matrix = symplectic_matrix(cmap, L)

    def push(self, syndrome: np.ndarray, check: bool = True) -> np.ndarray:
        sigma = np.atleast_2d(np.asarray(syndrome, dtype=np.uint8))
        tau = gf2_matmul(sigma, self.push_matrix.T)
        if check:
            again = gf2_matmul(tau, self.check_matrix.T)
            if np.any(again != sigma):
                raise SyndromeConsistencyError("syndrome is not produced by any Pauli error")
        return tau if np.ndim(syndrome) > 1 else tau[0]

    def pull(self, correction: np.ndarray) -> np.ndarray:
        vec = np.atleast_2d(np.asarray(correction, dtype=np.uint8))
        out = gf2_matmul(vec, self.pull_matrix)
        return out if np.ndim(correction) > 1 else out[0]

    def forward(self, error: np.ndarray) -> np.ndarray:
        vec = np.atleast_2d(np.asarray(error, dtype=np.uint8))
        out = gf2_matmul(vec, self.forward_matrix)
        return out if np.ndim(error) > 1 else out[0]


def _safe_L(t: Template, cmap: LocalCliffordMap) -> int:
    ext = max(x.extent for pair in cmap.images for x in pair)
    return 2 * (t.extent + ext) + 3


def push_syndrome(transport: SyndromeTransport, source_syndrome: np.ndarray) -> np.ndarray:
    return transport.push(source_syndrome)


def pull_correction(transport: SyndromeTransport, target_correction: np.ndarray) -> np.ndarray:
    return transport.pull(target_correction)


# ---------------------------------------------------------------------------
# standard maps


@functools.lru_cache(maxsize=None)
def tcc_to_ktc_map() -> LocalCliffordMap:
    """Map from the square-octagon colour code to two blocked toric codes.

    Loaded from the bundled result of ``search_tcc_to_ktc_map`` (about a minute
    of SAT search) and checked against both codes before use.
    """
    text = resources.files("topomap").joinpath("data/tcc48_to_ktc2.map").read_text()
    cmap = from_text(text)
    report = verify_code_map(cmap, build_tcc_48(3), block_checkerboard(build_ktc_stack(2, 3)), 3)
    if not report.ok:
        raise MapNotFound("bundled colour-code map failed verification")
    return cmap


def search_tcc_to_ktc_map(max_defects: int | None = 2) -> LocalCliffordMap:
    """Search the colour-code map; every single-qubit image is one edge per layer."""
    source = build_tcc_48(3)
    target = block_checkerboard(build_ktc_stack(2, 3))
    cmap = find_map(source, target, 1, blocking="checkerboard", max_defects=max_defects)
    return replace(cmap, target_name="ktc-stack:2")


def triangle_map(sz_code: CodeDef) -> LocalCliffordMap:
    """CNOTs from each triangle's square corner onto its two octagon corners.

    The triangle ZZ generators become single-qubit Z ancillas and the remaining
    qubit of each triangle becomes the colour-code qubit of its vertex.
    """
    vertices = sz_code.sites // 3
    images = []
    ancillas = []
    for v in range(vertices):
        a, b = vertices + 2 * v, vertices + 2 * v + 1
        images.append((Template.of([(0, 0, v, "X"), (0, 0, a, "X"), (0, 0, b, "X")]), Template.of([(0, 0, v, "Z")])))
        images.append((Template.of([(0, 0, a, "X")]), Template.of([(0, 0, v, "Z"), (0, 0, a, "Z")])))
        images.append((Template.of([(0, 0, b, "X")]), Template.of([(0, 0, v, "Z"), (0, 0, b, "Z")])))
        ancillas += [Template.of([(0, 0, a, "Z")]), Template.of([(0, 0, b, "Z")])]
    cmap = LocalCliffordMap(
        sz_code.name, "tcc48", sz_code.sites, sz_code.sites, tuple(images), ancilla_out=tuple(ancillas)
    )
    target = pad_code(build_tcc_48(sz_code.L), cmap.ancilla_out, sz_code.sites - vertices)
    return fix_signs(cmap, sz_code, target)


@functools.lru_cache(maxsize=None)
def tscc_to_ktc_map() -> LocalCliffordMap:
    """Triangle map followed by the colour-code map (identity on the ancillas)."""
    from topomap.codes import get_code

    sz = get_code("tscc48-sz", 3)
    first = triangle_map(sz)
    second = tensor_identity(tcc_to_ktc_map(), sz.sites - 8)
    return compose(first, second)


def standard_map(code_name: str) -> tuple[LocalCliffordMap, int]:
    """The verified map from a library code to its toric-code stack, with the copy count."""
    from topomap.codes import get_code

    if code_name == "ktc":
        return LocalCliffordMap.identity(get_code("ktc", 2)), 1
    if code_name.startswith("ktc-stack:"):
        code = get_code(code_name, 2)
        return LocalCliffordMap.identity(code), code.meta.get("copies", 1)
    if code_name == "tcc48":
        return tcc_to_ktc_map(), 2
    if code_name in ("tscc48", "tscc48-sz"):
        return tscc_to_ktc_map(), 2
    raise MappingDomainError(f"no standard map for {code_name!r}")


def stack_target(cmap: LocalCliffordMap, copies: int, L: int) -> CodeDef:
    """The padded (and blocked, if needed) stack the map lands on."""
    return _resolve_target(cmap, build_ktc_stack(copies, L))


def padded_source(cmap: LocalCliffordMap, source: CodeDef) -> CodeDef:
    return _padded_source(cmap, source)
