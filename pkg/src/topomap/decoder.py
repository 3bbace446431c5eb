"""Noise, syndromes, matching decoders and adjudication.

Everything works on batches of symplectic error vectors ``(trials, 2n)`` with
the X block first; the single-operator functions wrap the batch ones.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Sequence

import networkx as nx
import numpy as np
from scipy import sparse

from topomap.anyons import ChargeLabel, MappedCode, logical_rows, residual_classes
from topomap.clifford import SyndromeTransport, gf2_matmul
from topomap.codes import CodeDef, Template, build_ktc_stack, get_code, site_components, sparse_check_matrix
from topomap.pauli import PauliOperator, QubitIndex

CHANNELS = ("bit_flip", "depolarizing")


class DecodingError(RuntimeError):
    pass


class ParityError(DecodingError):
    pass


class PreconditionError(DecodingError):
    pass


class GaugeFixingError(DecodingError):
    pass


# ---------------------------------------------------------------------------
# noise


@dataclass(frozen=True)
class NoiseChannel:
    kind: str
    p: float

    def __post_init__(self):
        if self.kind not in CHANNELS:
            raise ValueError(f"unknown channel {self.kind!r}; known: {', '.join(CHANNELS)}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")


def stream_key(seed: int, *labels) -> np.ndarray:
    """Philox key for one (seed, labels) stream; labels may be strings or ints."""
    words = [zlib.crc32(str(x).encode()) for x in labels]
    return np.random.SeedSequence(int(seed), spawn_key=tuple(words)).generate_state(2, np.uint64)


def sample_errors(
    channel: NoiseChannel, n: int, seed: int, start: int, count: int, labels: Sequence = ()
) -> np.ndarray:
    """Errors for trials ``start .. start + count - 1`` as a ``(count, 2n)`` array.

    Trial t always reads the same block of a counter-based stream, so results do
    not depend on how trials are split into batches or workers.
    """
    stride = -(-n // 4) * 4
    bitgen = np.random.Philox(key=stream_key(seed, *labels))
    bitgen.advance(start * stride // 4)
    u = np.random.Generator(bitgen).random((count, stride))[:, :n]
    p = channel.p
    out = np.zeros((count, 2 * n), dtype=np.uint8)
    if channel.kind == "bit_flip":
        out[:, :n] = u < p
    else:
        x = u < 2 * p / 3
        z = (u >= p / 3) & (u < p)
        out[:, :n] = x
        out[:, n:] = z
    return out


def trial_labels(code_name: str, L: int, channel: NoiseChannel) -> tuple:
    """Stream labels shared by single-trial sampling and threshold sweeps."""
    return (code_name, L, channel.kind, f"{channel.p:.12g}")


def sample_error(channel: NoiseChannel, code: CodeDef, seed: int, trial_index: int) -> PauliOperator:
    labels = trial_labels(code.name, code.L, channel)
    vec = sample_errors(channel, code.num_qubits, seed, trial_index, 1, labels)[0]
    return PauliOperator.from_vector(code.L, code.sites, vec)


# ---------------------------------------------------------------------------
# syndromes


@dataclass(frozen=True)
class Syndrome:
    violations: frozenset  # (template id, cell x, cell y)

    def __len__(self):
        return len(self.violations)

    def bits(self, templates: int, L: int) -> np.ndarray:
        out = np.zeros(templates * L * L, dtype=np.uint8)
        for t, x, y in self.violations:
            out[t * L * L + x * L + y] = 1
        return out

    @classmethod
    def from_bits(cls, bits: np.ndarray, L: int) -> "Syndrome":
        out = []
        for i in np.flatnonzero(bits):
            t, c = divmod(int(i), L * L)
            out.append((t, *divmod(c, L)))
        return cls(frozenset(out))


def syndrome_matrix(code: CodeDef):
    """Sparse matrix W with syndrome = error @ W (mod 2)."""
    H = sparse_check_matrix(code.stabilizer_templates, code.L, code.sites).tocsc()
    n = code.num_qubits
    # swap X and Z column blocks so a plain product gives symplectic pairings
    swapped = sparse.hstack([H[:, n:], H[:, :n]]).tocsr()
    return swapped.T.tocsr()


def syndrome_bits(W, errors: np.ndarray) -> np.ndarray:
    return gf2_matmul(np.atleast_2d(errors), W)


def extract_syndrome(code: CodeDef, error: PauliOperator) -> Syndrome:
    bits = syndrome_bits(syndrome_matrix(code), error.vector())[0]
    return Syndrome.from_bits(bits, code.L)


# ---------------------------------------------------------------------------
# matching


def _distance_matrix(points: Sequence[tuple[int, int]], L: int) -> np.ndarray:
    p = np.array(points, dtype=np.int64).reshape(-1, 2)
    d = np.abs(p[:, None, :] - p[None, :, :])
    d = np.minimum(d, L - d)
    return d.sum(axis=2)


def blossom_matching(dist: np.ndarray) -> list[tuple[int, int]]:
    """Exact minimum-weight perfect matching (Edmonds' blossom via networkx).

    Ties between optimal matchings are broken by preferring lexicographically
    earlier pairs, through a tiny perturbation that cannot change the optimum.
    """
    m = len(dist)
    if m % 2:
        raise ParityError("odd number of defects")
    if m == 0:
        return []
    g = nx.Graph()
    big = int(dist.max()) + 1
    # bonus (m - j) * base**(m - 1 - i) for pair (i, j): the partner of the lowest
    # unmatched defect dominates every later choice, giving lexicographic order
    base = m + 1
    scale = base**m
    for i in range(m):
        for j in range(i + 1, m):
            g.add_edge(i, j, weight=(big - int(dist[i, j])) * scale + (m - j) * base ** (m - 1 - i))
    pairs = nx.max_weight_matching(g, maxcardinality=True)
    return sorted(tuple(sorted(p)) for p in pairs)


def brute_force_matching(dist: np.ndarray) -> int:
    """Minimum perfect-matching weight by recursion (test oracle, small inputs)."""
    m = len(dist)
    if m % 2:
        raise ParityError("odd number of defects")

    def best(rest: tuple[int, ...]) -> int:
        if not rest:
            return 0
        i = rest[0]
        return min(dist[i, j] + best(tuple(k for k in rest[1:] if k != j)) for j in rest[1:])

    return int(best(tuple(range(m))))


def matching_weight(dist: np.ndarray, pairs) -> int:
    return int(sum(dist[i, j] for i, j in pairs))


def _torus_steps(a: int, b: int, L: int) -> list[int]:
    """Unit steps from a to b the short way round (ties go in the + direction)."""
    fwd = (b - a) % L
    if fwd <= L - fwd:
        return [1] * fwd
    return [-1] * (L - fwd)


def _ktc_layers(code: CodeDef) -> int:
    if code.name == "ktc":
        return 1
    if code.name.startswith("ktc-stack:") and not code.meta.get("blocking"):
        return code.meta["copies"]
    raise PreconditionError(f"{code.name} is not a toric code or unblocked stack")


def mwpm_decode_ktc(code: CodeDef, syndrome: Syndrome, engine: str = "blossom") -> PauliOperator:
    """Pair star and plaquette defects separately by minimum-weight matching.

    ``engine="blossom"`` runs exact blossom on torus Manhattan distances and joins
    pairs by a horizontal-then-vertical path; ``engine="pymatching"`` uses the
    graph decoder shared with the mapped pipeline.
    """
    layers = _ktc_layers(code)
    L = code.L
    if engine == "pymatching":
        dec = GraphDecoder(code)
        bits = syndrome.bits(len(code.stabilizer_templates), L)
        return PauliOperator.from_vector(L, code.sites, dec.decode(bits[None, :])[0])
    xs, zs = set(), set()
    for layer in range(layers):
        for species in (0, 1):
            t = 2 * layer + species
            defects = sorted((x, y) for tt, x, y in syndrome.violations if tt == t)
            if len(defects) % 2:
                raise ParityError(f"odd defect count for template {t}")
            pairs = blossom_matching(_distance_matrix(defects, L))
            for i, j in pairs:
                (x0, y0), (x1, y1) = defects[i], defects[j]
                if species == 0:
                    # stars: X on lattice edges between vertices
                    x = x0
                    for s in _torus_steps(x0, x1, L):
                        edge_x = x if s > 0 else (x - 1) % L
                        xs ^= {QubitIndex(edge_x, y0, 2 * layer)}
                        x = (x + s) % L
                    y = y0
                    for s in _torus_steps(y0, y1, L):
                        edge_y = y if s > 0 else (y - 1) % L
                        xs ^= {QubitIndex(x1, edge_y, 2 * layer + 1)}
                        y = (y + s) % L
                else:
                    # plaquettes: Z on the edges crossed between neighbouring plaquettes
                    x = x0
                    for s in _torus_steps(x0, x1, L):
                        edge_x = (x + 1) % L if s > 0 else x
                        zs ^= {QubitIndex(edge_x, y0, 2 * layer + 1)}
                        x = (x + s) % L
                    y = y0
                    for s in _torus_steps(y0, y1, L):
                        edge_y = (y + 1) % L if s > 0 else y
                        zs ^= {QubitIndex(x1, edge_y, 2 * layer)}
                        y = (y + s) % L
    return PauliOperator(L, code.sites, frozenset(xs), frozenset(zs))


class GraphDecoder:
    """Per-species minimum-weight matching on a CSS code whose errors flip <= 2 checks.

    X components are matched on the Z-type checks and Z components on the X-type
    checks.  Single-qubit checks (ancillas) become boundary edges.
    """

    def __init__(self, code: CodeDef):
        import pymatching

        self.code = code
        n = code.num_qubits
        H = sparse_check_matrix(code.stabilizer_templates, code.L, code.sites).tocsr()
        hx, hz = H[:, :n], H[:, n:]
        has_x = np.asarray(hx.sum(axis=1)).ravel() > 0
        has_z = np.asarray(hz.sum(axis=1)).ravel() > 0
        if np.any(has_x & has_z):
            raise PreconditionError("graph decoding needs a CSS target")
        self.z_rows = np.flatnonzero(has_z)
        self.x_rows = np.flatnonzero(has_x)
        self.n = n
        self._mz = self._matching(hz[self.z_rows], pymatching)
        self._mx = self._matching(hx[self.x_rows], pymatching)

    @staticmethod
    def _matching(h, pymatching):
        h = sparse.csc_matrix(h)
        if h.shape[0] == 0:
            return None
        if np.asarray(h.sum(axis=0)).max() > 2:
            raise PreconditionError("an error flips more than two checks of one species")
        return pymatching.Matching.from_check_matrix(h)

    def decode(self, syndromes: np.ndarray) -> np.ndarray:
        syn = np.atleast_2d(np.asarray(syndromes, dtype=np.uint8))
        out = np.zeros((syn.shape[0], 2 * self.n), dtype=np.uint8)
        if self._mz is not None:
            out[:, : self.n] = self._mz.decode_batch(syn[:, self.z_rows])
        if self._mx is not None:
            out[:, self.n :] = self._mx.decode_batch(syn[:, self.x_rows])
        return out


# ---------------------------------------------------------------------------
# mapped decoding


def _edge_weight(q: np.ndarray | float) -> np.ndarray:
    q = np.clip(q, 1e-12, 0.45)
    return np.log((1 - q) / q)


@dataclass
class _Layer:
    species: int
    rows: np.ndarray  # target check indices of this layer
    H: sparse.csc_matrix  # layer checks x edges
    restricted: sparse.csr_matrix  # edge -> layer part of a representative fault image
    edge_faults: list  # fault indices sharing each edge
    fault_edge: np.ndarray  # fault -> edge, -1 if the fault misses this layer
    incidence: sparse.csr_matrix  # edges x faults
    matching: object = None


class FaultGraphDecoder:
    """Minimum-weight matching in the target along images of single source faults.

    Every single-qubit X (or Z) fault of the source is pushed through the map; in
    each layer of the target its image flips at most two checks and becomes one
    edge of that layer's matching graph.  Path lengths therefore count source
    faults, and a matched edge is corrected by the fault image restricted to the
    layer.  With ``correlated=True`` a second pass re-matches every layer after
    lowering the weight of edges that contain faults picked by the other layers.
    """

    def __init__(self, transport: SyndromeTransport, correlated: bool = True):
        src, tgt = transport.source, transport.target
        n, nt, L2 = src.num_qubits, tgt.num_qubits, tgt.L * tgt.L
        self.n, self.nt = n, nt
        self.correlated = correlated
        F = sparse.csr_matrix(transport.forward_matrix)
        Wt = syndrome_matrix(tgt)
        self.n_checks = Wt.shape[1]
        layers = site_components(tgt)
        check_layer = np.empty(self.n_checks, dtype=np.int64)
        for t, g in enumerate(tgt.stabilizer_templates):
            first = g.terms[0][2]
            check_layer[t * L2 : (t + 1) * L2] = next(i for i, ls in enumerate(layers) if first in ls)
        cell_sites = np.arange(nt) % tgt.sites
        self.layers: list[_Layer] = []
        claimed = np.zeros(self.n_checks, dtype=bool)
        for k in range(2):
            images = F[k * n : (k + 1) * n]
            syn = gf2_matmul(images, Wt)
            touched = syn.any(axis=0)
            if np.any(touched & claimed):
                raise PreconditionError("X and Z faults flip a common check")
            claimed |= touched
            for i, sites in enumerate(layers):
                rows = np.flatnonzero(touched & (check_layer == i))
                if rows.size == 0:
                    continue
                cols = syn[:, rows]
                faults = np.flatnonzero(cols.any(axis=1))
                uniq, first, inv = np.unique(cols[faults], axis=0, return_index=True, return_inverse=True)
                inv = inv.ravel()
                H = uniq.T
                if H.sum(axis=0).max() > 2:
                    raise PreconditionError("a source fault flips more than two checks of one layer")
                fault_edge = np.full(n, -1, dtype=np.int64)
                fault_edge[faults] = inv
                edge_faults = [faults[inv == e] for e in range(len(uniq))]
                incidence = sparse.csr_matrix(
                    (np.ones(len(faults), dtype=np.uint8), (inv, faults)), shape=(len(uniq), n)
                )
                qubits = np.isin(cell_sites, sites)
                mask = sparse.diags(np.concatenate([qubits, qubits]).astype(np.uint8))
                restricted = (images[faults[first]] @ mask).tocsr()
                self.layers.append(
                    _Layer(k, rows, sparse.csc_matrix(H), restricted, edge_faults, fault_edge, incidence)
                )
        self.configure(None)

    def configure(self, channel: NoiseChannel | None) -> None:
        """Set edge weights from the per-qubit X and Z fault rates of a channel."""
        import pymatching

        if channel is None or channel.p <= 0:
            rates = (0.01, 0.01)
        elif channel.kind == "bit_flip":
            rates = (channel.p, channel.p)
        else:
            rates = (2 * channel.p / 3, 2 * channel.p / 3)
        self.rates = rates
        for layer in self.layers:
            q = rates[layer.species]
            mult = np.array([len(f) for f in layer.edge_faults])
            layer.edge_q = (1 - (1 - 2 * q) ** mult) / 2
            layer.weights = _edge_weight(layer.edge_q)
            layer.matching = pymatching.Matching.from_check_matrix(layer.H, weights=layer.weights)

    def _correction(self, layer: _Layer, sel: np.ndarray) -> np.ndarray:
        return gf2_matmul(sparse.csr_matrix(sel), layer.restricted)

    def decode(self, tau: np.ndarray) -> np.ndarray:
        tau = np.atleast_2d(tau)
        T = tau.shape[0]
        first = [layer.matching.decode_batch(tau[:, layer.rows]) for layer in self.layers]
        if not self.correlated:
            chosen = first
        else:
            # layers whose faults flip single checks are already decoded exactly
            chosen = [
                first[i] if layer.H.sum(axis=0).max() < 2 else self._second_pass(i, tau, first)
                for i, layer in enumerate(self.layers)
            ]
        out = np.zeros((T, 2 * self.nt), dtype=np.uint8)
        for layer, sel in zip(self.layers, chosen):
            out ^= self._correction(layer, sel)
        return out

    def _second_pass(self, i: int, tau: np.ndarray, first: list) -> np.ndarray:
        import pymatching

        layer = self.layers[i]
        out = first[i].copy()
        # faults on edges the other layers matched are likely to have happened
        hot = np.zeros((tau.shape[0], self.n), dtype=bool)
        for j, (other, sel) in enumerate(zip(self.layers, first)):
            if j != i and other.species == layer.species:
                hot |= (sparse.csr_matrix(sel) @ other.incidence).toarray() > 0
        hot_edges = (sparse.csr_matrix(hot.astype(np.uint8)) @ layer.incidence.T).toarray() > 0
        # an edge holding a likely fault is at least as likely as not; clip just below
        w_hot = float(_edge_weight(0.45))
        # cheaper edges already in the first matching leave it optimal
        fresh = hot_edges & (out == 0)
        for t in np.flatnonzero(fresh.any(axis=1) & tau[:, layer.rows].any(axis=1)):
            weights = np.where(hot_edges[t], w_hot, layer.weights)
            m = pymatching.Matching.from_check_matrix(layer.H, weights=weights)
            out[t] = m.decode(tau[t, layer.rows])
        return out


class MappedDecoder:
    """Decode a code through its verified map to a toric-code stack."""

    def __init__(self, mc: MappedCode):
        self.mc = mc
        stack = build_ktc_stack(mc.copies, mc.L)
        self.transport = SyndromeTransport(mc.cmap, mc.code, stack, mc.L)
        self.graph = FaultGraphDecoder(self.transport)
        self.W = syndrome_matrix(mc.source)

    def configure(self, channel: NoiseChannel | None) -> None:
        self.graph.configure(channel)

    def decode(self, syndromes: np.ndarray) -> np.ndarray:
        tau = self.transport.push(np.atleast_2d(syndromes))
        return self.transport.pull(self.graph.decode(tau))


def mapped_decode(code: CodeDef, cmap, syndrome: Syndrome, copies: int | None = None) -> PauliOperator:
    """Push the syndrome to the stack, match each layer, pull the correction back."""
    from topomap.clifford import standard_map

    if copies is None:
        _, copies = standard_map(code.name)
    mc = MappedCode(code, cmap, copies, code.L)
    dec = MappedDecoder(mc)
    bits = syndrome.bits(len(mc.source.stabilizer_templates), code.L)
    vec = dec.decode(bits[None, :])[0]
    return PauliOperator.from_vector(code.L, mc.source.sites, vec)


# ---------------------------------------------------------------------------
# gauge fixing for the subsystem colour code


class GaugeFixer:
    """Clear triangle (solid-edge) excitations of S' with face-edge gauge operators.

    A triangle excitation is labelled by the corner whose X would create it.  A
    corner excitation can only move around its face, and trading one corner for
    the other two of its triangle moves parity between the three faces there, so
    the corners to be paired are chosen by decoding the face parities as colour-code
    bit flips.  The remaining even set in each face is paired along the face cycle.
    Two global colour parities cannot be cleared by gauge operators; they are left
    as one excitation on the triangle of an excited corner.
    """

    def __init__(self, sz_code: CodeDef, tcc_decoder: "MappedDecoder | None" = None):
        code = sz_code
        self.L = L = code.L
        self.sites = code.sites
        self.vertices = code.sites // 3
        self.n = n = code.num_qubits
        nS = code.meta["parent_stabilizers"]
        gauge = code.meta["gauge_templates"]
        kinds = get_code("tscc48", 3).meta["edge_kinds"]
        solid = [g for g, k in zip(gauge, kinds) if k == "triangle"]
        faces_t = [g for g, k in zip(gauge, kinds) if k != "triangle"]
        # X on corner q flips solid checks solid_hits[q] (two of its triangle's three)
        Hs = sparse_check_matrix(solid, L, code.sites).tocsc()[:, n:]
        self.n_solid = Hs.shape[0]
        self.solid_hits = np.array(
            [np.sort(Hs.indices[Hs.indptr[q] : Hs.indptr[q + 1]]) for q in range(n)]
        )
        if self.solid_hits.shape != (n, 2):
            raise GaugeFixingError("each corner must sit on two solid edges")
        # per triangle, its three edges and which corner owns which edge pair
        tri = np.arange(n).reshape(-1, 3)
        self.tri_corners = tri
        self.tri_edges = np.array([np.unique(self.solid_hits[t]) for t in tri])
        if self.tri_edges.shape[1] != 3:
            raise GaugeFixingError("triangles must have three solid edges")
        # missing[t, k] = position (0..2) of the edge corner k does not touch
        self.missing = np.array(
            [[int(np.flatnonzero(~np.isin(e, self.solid_hits[q]))[0]) for q in t] for t, e in zip(tri, self.tri_edges)]
        )
        # faces: Z-type parent stabilizers, one per corner
        parents = code.stabilizer_templates[:nS]
        face_templates = [t for t, g in enumerate(parents) if g.letters() == "Z"]
        face_ops = sparse_check_matrix([parents[t] for t in face_templates], L, code.sites).tocoo()
        self.face_of_corner = np.full(n, -1, dtype=np.int64)
        self.face_of_corner[face_ops.col - n] = face_ops.row
        if np.any(self.face_of_corner < 0):
            raise GaugeFixingError("some corner lies in no face")
        self.n_faces = face_ops.shape[0]
        # parent-syndrome rows of the faces, and one fixed corner per face
        L2 = L * L
        self.face_rows = (np.asarray(face_templates)[:, None] * L2 + np.arange(L2)[None, :]).reshape(-1)
        self.face_anchor = np.full(self.n_faces, n, dtype=np.int64)
        np.minimum.at(self.face_anchor, self.face_of_corner, np.arange(n))
        self.face_colour = np.repeat(self._colour_classes(parents, face_templates), L * L)
        self.edge_ops = sparse_check_matrix(faces_t, L, code.sites).tocsr()
        self._build_cycles()
        self._tcc = tcc_decoder
        self._face_to_tcc = self._match_faces(parents, face_templates)

    @staticmethod
    def _colour_classes(parents, face_templates) -> np.ndarray:
        # squares share one colour; each octagon template has its own
        weights = [parents[t].weight for t in face_templates]
        small = min(weights)
        out, next_colour = [], 1
        for w in weights:
            if w == small:
                out.append(0)
            else:
                out.append(next_colour)
                next_colour += 1
        if sorted(set(out)) != [0, 1, 2]:
            raise GaugeFixingError("faces do not fall into three colour classes")
        return np.array(out)

    def _build_cycles(self):
        """Per face, the corners in cycle order and the edge after each corner."""
        n = self.n
        xp = self.edge_ops[:, :n].tocsr()
        adj: dict[int, list] = {}
        for e in range(xp.shape[0]):
            qs = xp.indices[xp.indptr[e] : xp.indptr[e + 1]]
            if len(qs) != 2 or self.face_of_corner[qs[0]] != self.face_of_corner[qs[1]]:
                raise GaugeFixingError("face edges must join two corners of one face")
            a, b = int(qs[0]), int(qs[1])
            adj.setdefault(a, []).append((b, e))
            adj.setdefault(b, []).append((a, e))
        groups: dict[int, list] = {}
        for f in range(self.n_faces):
            members = np.flatnonzero(self.face_of_corner == f)
            start = int(members.min())
            order, used, cur = [start], [], start
            while True:
                nxt, e = min((b, e) for b, e in adj[cur] if e not in used)
                used.append(e)
                if nxt == start:
                    break
                order.append(nxt)
                cur = nxt
            if len(order) != len(members):
                raise GaugeFixingError("face edges do not form one cycle")
            groups.setdefault(len(order), []).append((order, used))
        self.groups = [
            (m, np.array([o for o, _ in items]), np.array([u for _, u in items]))
            for m, items in sorted(groups.items())
        ]

    def _match_faces(self, parents, face_templates):
        """Index map from face instances to Z checks of the vertex colour code."""
        L = self.L
        L2 = L * L
        tcc_templates = list(get_code("tcc48", L).stabilizer_templates)
        x, y = np.divmod(np.arange(L2), L)
        perm = np.empty(len(face_templates) * L2, dtype=np.int64)
        for i, t in enumerate(face_templates):
            projected = Template.of((dx, dy, s // 3, "Z") for dx, dy, s, _ in parents[t].terms)
            for j, cand in enumerate(tcc_templates):
                shift = _translation_between(projected, cand)
                if shift is not None:
                    dx, dy = shift
                    perm[i * L2 : (i + 1) * L2] = j * L2 + ((x + dx) % L) * L + (y + dy) % L
                    break
            else:
                raise GaugeFixingError("face does not match any colour-code check")
        return perm

    def corner_excitations(self, solid_syndrome: np.ndarray) -> np.ndarray:
        """Canonical corner pattern (trials, n) reproducing the solid-edge syndrome."""
        bits = solid_syndrome[:, self.tri_edges]  # (T, triangles, 3)
        if np.any(bits.sum(axis=2) % 2):
            raise ParityError("a triangle has an odd number of violated edges")
        active = bits.any(axis=2)
        # the excited corner is the one whose untouched edge is unviolated
        quiet = np.argmin(bits, axis=2)  # position of the unviolated edge
        out = np.zeros((solid_syndrome.shape[0], self.n), dtype=np.uint8)
        for k in range(3):
            hit = active & (quiet == self.missing[None, :, k])
            out[:, self.tri_corners[:, k]] |= hit.astype(np.uint8)
        return out

    def corner_syndrome(self, corners: np.ndarray) -> np.ndarray:
        out = np.zeros((corners.shape[0], self.n_solid), dtype=np.uint8)
        for j in range(2):
            np.add.at(out.T, self.solid_hits[:, j], corners.T)
        return out % 2

    @property
    def tcc(self) -> "MappedDecoder":
        if self._tcc is None:
            self._tcc = MappedDecoder(MappedCode.standard("tcc48", self.L))
        return self._tcc

    def definite_syndrome(self, parent_syndrome: np.ndarray) -> np.ndarray:
        """Solid syndrome gauge-equivalent to the error's, read off the Z-type faces.

        A face check counts the X components on its corners, which is the parity of
        corner excitations in that face; one excitation on the face's anchor corner
        reproduces it up to in-face gauge operators.
        """
        parent_syndrome = np.atleast_2d(parent_syndrome)
        corners = np.zeros((parent_syndrome.shape[0], self.n), dtype=np.uint8)
        corners[:, self.face_anchor] = parent_syndrome[:, self.face_rows]
        return self.corner_syndrome(corners)

    def fix(self, solid_syndrome: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Gauge operators (trials, 2n) and the residual solid syndrome they leave."""
        solid_syndrome = np.atleast_2d(solid_syndrome).astype(np.uint8)
        T = solid_syndrome.shape[0]
        corners = self.corner_excitations(solid_syndrome)
        parity = np.zeros((T, self.n_faces), dtype=np.int64)
        np.add.at(parity.T, self.face_of_corner, corners.T)
        parity %= 2
        # colour totals only change together; a mismatch leaves one canonical excitation
        tot = np.stack([parity[:, self.face_colour == c].sum(axis=1) % 2 for c in range(3)], axis=1)
        a = tot[:, 0] ^ tot[:, 1]
        b = tot[:, 0] ^ tot[:, 2]
        needed = np.where(a & b, 0, np.where(a, 1, np.where(b, 2, -1)))
        # the leftover sits on the triangle of the first excited corner, keeping it local
        residual = np.zeros((T, self.n), dtype=np.uint8)
        rows = np.flatnonzero(needed >= 0)
        if rows.size:
            tri = self.tri_corners[np.argmax(corners[rows], axis=1) // 3]
            colours = self.face_colour[self.face_of_corner[tri]]
            pick = tri[np.arange(rows.size), np.argmax(colours == needed[rows, None], axis=1)]
            residual[rows, pick] = 1
            parity[rows, self.face_of_corner[pick]] ^= 1
        corners ^= residual
        # trade corners on chosen triangles so every face holds an even number
        tcc_syn = np.zeros((T, self.tcc.W.shape[1]), dtype=np.uint8)
        tcc_syn[:, self._face_to_tcc] = parity
        flips = self.tcc.decode(tcc_syn)[:, : self.vertices * self.L * self.L]
        for k in range(3):
            corners[:, self.tri_corners[:, k]] ^= flips
        # pair the corners of each face along its cycle
        chosen = np.zeros((T, self.edge_ops.shape[0]), dtype=np.uint8)
        for m, cyc, edges in self.groups:
            bits = corners[:, cyc]  # (T, faces, m)
            if np.any(bits.sum(axis=2) % 2):
                raise GaugeFixingError("a face keeps an odd number of corner excitations")
            prefix = np.cumsum(bits, axis=2) % 2
            heavy = prefix.sum(axis=2) > m // 2
            prefix[heavy] ^= 1
            chosen[:, edges.reshape(-1)] = prefix.reshape(T, -1)
        gauge = gf2_matmul(chosen, self.edge_ops)
        return gauge, self.corner_syndrome(residual)


def _translation_between(a: Template, b: Template) -> tuple[int, int] | None:
    """Shift d with a placed at cell c equal to b placed at cell c + d."""
    if a.weight != b.weight or not a.terms:
        return None
    dx = min(t[0] for t in a.terms) - min(t[0] for t in b.terms)
    dy = min(t[1] for t in a.terms) - min(t[1] for t in b.terms)
    if b.shifted(dx, dy).terms == a.terms:
        return dx, dy
    return None


def fix_gauge_excitations(sz_code: CodeDef, solid_syndrome: np.ndarray) -> PauliOperator:
    """Product of gauge operators clearing the given solid-edge violations."""
    fixer = GaugeFixer(sz_code)
    gauge, residual = fixer.fix(np.atleast_2d(solid_syndrome))
    if residual.any():
        raise GaugeFixingError("violations cannot be cleared by gauge operators alone")
    return PauliOperator.from_vector(sz_code.L, sz_code.sites, gauge[0])


class SubsystemDecoder:
    """Measure S and the solid edges, gauge-fix, then decode S' through its map."""

    def __init__(self, L: int):
        self.mc = MappedCode.standard("tscc48", L)
        self.sz = self.mc.code
        self.inner = MappedDecoder(self.mc)
        self.fixer = GaugeFixer(self.sz)
        self.n_parent = self.sz.meta["parent_stabilizers"] * L * L

    def split(self, sz_syndrome: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return sz_syndrome[:, : self.n_parent], sz_syndrome[:, self.n_parent :]

    def decode(self, syndromes: np.ndarray) -> np.ndarray:
        """Corrections from parent syndromes; trailing solid bits, if given, are ignored."""
        parent = np.atleast_2d(syndromes)[:, : self.n_parent]
        fixed = np.concatenate([parent, self.fixer.definite_syndrome(parent)], axis=1)
        return self.inner.decode(fixed)


# ---------------------------------------------------------------------------
# adjudication


@dataclass(frozen=True)
class DecodeOutcome:
    correction: PauliOperator
    verdict: str
    residual_class: tuple[ChargeLabel, ChargeLabel]


class Adjudicator:
    """Batch success test: the residual must be a stabilizer (gauge) element."""

    def __init__(self, mc: MappedCode, parent_only: bool = False):
        self.mc = mc
        rows, charges, dirs = logical_rows(mc)
        self.rows, self.charges, self.dirs = rows, charges, dirs
        n = mc.source.num_qubits
        self.detect = np.concatenate([rows[:, n:], rows[:, :n]], axis=1).T.astype(np.uint8)
        code = mc.source
        if parent_only:
            nS = code.meta["parent_stabilizers"]
            from dataclasses import replace

            code = replace(code, stabilizer_templates=code.stabilizer_templates[:nS])
        self.W = syndrome_matrix(code)

    def failures(self, errors: np.ndarray, corrections: np.ndarray) -> np.ndarray:
        residual = np.atleast_2d(errors) ^ np.atleast_2d(corrections)
        if syndrome_bits(self.W, residual).any():
            raise PreconditionError("residual has a nonempty syndrome")
        return (residual.astype(np.int64) @ self.detect % 2).any(axis=1)

    def outcome(self, error: np.ndarray, correction: np.ndarray) -> DecodeOutcome:
        fail = bool(self.failures(error[None, :], correction[None, :])[0])
        residual = error ^ correction
        classes = residual_classes(self.mc, residual, self.rows, self.charges, self.dirs)
        op = PauliOperator.from_vector(self.mc.L, self.mc.source.sites, correction)
        return DecodeOutcome(op, "logical_failure" if fail else "success", classes)


def adjudicate(code_name: str, error: PauliOperator, correction: PauliOperator) -> DecodeOutcome:
    mc = MappedCode.standard(code_name, error.L)
    adj = Adjudicator(mc, parent_only=code_name == "tscc48")
    return adj.outcome(error.vector(), correction.vector())


# ---------------------------------------------------------------------------
# pipelines used by the threshold harness


DECODERS = {"ktc": "mwpm", "ktc-stack:2": "mwpm", "tcc48": "mapped-mwpm", "tscc48": "gauge-fix+mapped-mwpm"}


class Pipeline:
    """Syndrome extraction, decoding and adjudication for one code at one size."""

    def __init__(self, code_name: str, L: int):
        self.code_name = code_name
        self.L = L
        if code_name == "tscc48":
            self.decoder = SubsystemDecoder(L)
            self.mc = self.decoder.mc
            self.adjudicator = Adjudicator(self.mc, parent_only=True)
        else:
            self.mc = MappedCode.standard(code_name, L)
            self.decoder = MappedDecoder(self.mc)
            self.adjudicator = Adjudicator(self.mc)
        self.W = syndrome_matrix(self.mc.source)
        self.n = self.mc.source.num_qubits

    @property
    def name(self) -> str:
        return DECODERS.get(self.code_name, "mapped-mwpm")

    def configure(self, channel: NoiseChannel | None) -> None:
        """Match edge weights to the channel's per-qubit fault rates."""
        if isinstance(self.decoder, SubsystemDecoder):
            self.decoder.inner.configure(channel)
        else:
            self.decoder.configure(channel)

    def run(self, errors: np.ndarray) -> np.ndarray:
        """Failure flags for a batch of errors."""
        syn = syndrome_bits(self.W, errors)
        corr = self.decoder.decode(syn)
        return self.adjudicator.failures(errors, corr)

    def decode_one(self, error: np.ndarray):
        syn = syndrome_bits(self.W, error[None, :])
        corr = self.decoder.decode(syn)[0]
        return syn[0], corr, self.adjudicator.outcome(error, corr)
