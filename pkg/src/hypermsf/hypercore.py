"""Chemical hypergraphs: oriented hyperedges, incidence matrices and degree structure.

A hyperedge is a pair (inputs, outputs) of vertex sets.  Vertices in both sets
are catalysts.  A classical (unoriented) hyperedge stores all of its members as
inputs and leaves the outputs empty.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import HypergraphParseError, HypergraphValidationError

__all__ = [
    "Hyperedge",
    "ChemicalHypergraph",
    "IncidenceMatrices",
    "parse_hypergraph",
    "serialize_hypergraph",
    "load_hypergraph",
    "from_graph",
    "incidence",
    "codegree_matrix",
    "check_regular_incidence",
    "sync_invariance_check",
    "is_graph",
    "is_bipartite",
]


def _as_index_tuple(members, what: str) -> tuple[int, ...]:
    out = []
    for v in members:
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
            raise HypergraphValidationError(f"{what}: vertex index {v!r} is not an integer")
        out.append(int(v))
    if len(set(out)) != len(out):
        raise HypergraphValidationError(f"{what}: duplicate vertex index in {out}")
    return tuple(sorted(out))


@dataclass(frozen=True)
class Hyperedge:
    """Oriented hyperedge with sorted input and output index tuples."""

    inputs: tuple[int, ...]
    outputs: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "inputs", _as_index_tuple(self.inputs, "inputs"))
        object.__setattr__(self, "outputs", _as_index_tuple(self.outputs, "outputs"))
        if not self.inputs and not self.outputs:
            raise HypergraphValidationError("hyperedge has neither inputs nor outputs")

    @property
    def catalysts(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.inputs) & set(self.outputs)))

    @property
    def members(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.inputs) | set(self.outputs)))

    @property
    def pure_inputs(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.inputs) - set(self.outputs)))

    @property
    def pure_outputs(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.outputs) - set(self.inputs)))

    def reversed(self) -> "Hyperedge":
        """Same hyperedge with the opposite orientation."""
        return Hyperedge(self.outputs, self.inputs)


@dataclass(frozen=True)
class ChemicalHypergraph:
    n_vertices: int
    hyperedges: tuple[Hyperedge, ...] = ()
    vertex_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        n = self.n_vertices
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
            raise HypergraphValidationError(f"vertex count must be a positive integer, got {n!r}")
        object.__setattr__(self, "n_vertices", int(n))
        edges = tuple(self.hyperedges)
        for k, h in enumerate(edges):
            if not isinstance(h, Hyperedge):
                raise HypergraphValidationError(f"hyperedge {k} is not a Hyperedge")
            bad = [v for v in h.inputs + h.outputs if not 0 <= v < n]
            if bad:
                raise HypergraphValidationError(
                    f"hyperedge {k}: vertex index {bad[0]} out of range [0, {n})"
                )
        object.__setattr__(self, "hyperedges", edges)
        if self.vertex_labels is not None:
            labels = tuple(str(s) for s in self.vertex_labels)
            if len(labels) != n:
                raise HypergraphValidationError(f"{len(labels)} labels for {n} vertices")
            if len(set(labels)) != n:
                raise HypergraphValidationError("vertex labels must be distinct")
            object.__setattr__(self, "vertex_labels", labels)

    @property
    def n_hyperedges(self) -> int:
        return len(self.hyperedges)

    def label(self, i: int) -> str:
        return self.vertex_labels[i] if self.vertex_labels else str(i)

    def reorient(self, which: Iterable[int]) -> "ChemicalHypergraph":
        """Return a copy with the orientation of the listed hyperedges flipped."""
        flip = set(which)
        edges = tuple(h.reversed() if k in flip else h for k, h in enumerate(self.hyperedges))
        return ChemicalHypergraph(self.n_vertices, edges, self.vertex_labels)


@dataclass(frozen=True)
class IncidenceMatrices:
    binary: np.ndarray
    signed: np.ndarray
    degrees: np.ndarray


# ---------------------------------------------------------------------------
# I/O


def _line_context(text: str, lineno: int) -> str:
    lines = text.splitlines()
    if 1 <= lineno <= len(lines):
        return lines[lineno - 1]
    return ""


def parse_hypergraph(text: str) -> ChemicalHypergraph:
    """Parse the JSON hypergraph format.

    ``vertices`` is either a count or a list of labels.  Hyperedge members are
    integer indices; when labels are given, label strings are accepted too.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        ctx = _line_context(text, exc.lineno)
        raise HypergraphParseError(
            f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}\n  {ctx}"
        ) from exc
    if not isinstance(doc, dict):
        raise HypergraphParseError("top-level JSON value must be an object")
    if "vertices" not in doc:
        raise HypergraphParseError("missing key 'vertices'")

    verts = doc["vertices"]
    labels = None
    if isinstance(verts, list):
        labels = [str(s) for s in verts]
        n = len(labels)
        if n == 0:
            raise HypergraphValidationError("vertex label list is empty")
    elif isinstance(verts, int) and not isinstance(verts, bool):
        n = verts
    else:
        raise HypergraphParseError("'vertices' must be an integer or a list of labels")

    raw_edges = doc.get("hyperedges", [])
    if not isinstance(raw_edges, list):
        raise HypergraphParseError("'hyperedges' must be a list")

    lookup = {s: i for i, s in enumerate(labels)} if labels else {}

    def resolve(members, k, side):
        if not isinstance(members, list):
            raise HypergraphParseError(f"hyperedge {k}: '{side}' must be a list")
        out = []
        for v in members:
            if isinstance(v, str):
                if v not in lookup:
                    raise HypergraphValidationError(f"hyperedge {k}: unknown vertex label {v!r}")
                out.append(lookup[v])
            else:
                out.append(v)
        return out

    edges = []
    for k, e in enumerate(raw_edges):
        if not isinstance(e, dict):
            raise HypergraphParseError(f"hyperedge {k} must be an object")
        ins = resolve(e.get("inputs", []), k, "inputs")
        outs = resolve(e.get("outputs", []), k, "outputs")
        try:
            edges.append(Hyperedge(ins, outs))
        except HypergraphValidationError as exc:
            raise HypergraphValidationError(f"hyperedge {k}: {exc}") from exc
    return ChemicalHypergraph(n, tuple(edges), labels)


def serialize_hypergraph(H: ChemicalHypergraph) -> str:
    verts = list(H.vertex_labels) if H.vertex_labels else H.n_vertices
    doc = {
        "vertices": verts,
        "hyperedges": [
            {"inputs": list(h.inputs), "outputs": list(h.outputs)} for h in H.hyperedges
        ],
    }
    return json.dumps(doc, ensure_ascii=False) + "\n"


def load_hypergraph(path) -> ChemicalHypergraph:
    with open(path, encoding="utf-8") as fh:
        return parse_hypergraph(fh.read())


def from_graph(n: int, edges: Sequence[tuple[int, int]]) -> ChemicalHypergraph:
    """Encode a graph: edge (i, j) becomes the hyperedge with input i and output j."""
    hyperedges = []
    for k, (i, j) in enumerate(edges):
        if i == j:
            raise HypergraphValidationError(f"edge {k}: self-loop at vertex {i}")
        hyperedges.append(Hyperedge((i,), (j,)))
    return ChemicalHypergraph(n, tuple(hyperedges))


# ---------------------------------------------------------------------------
# incidence structure


def incidence(H: ChemicalHypergraph) -> IncidenceMatrices:
    N, M = H.n_vertices, H.n_hyperedges
    binary = np.zeros((N, M), dtype=np.int64)
    signed = np.zeros((N, M), dtype=np.int64)
    for h, e in enumerate(H.hyperedges):
        binary[list(e.members), h] = 1
        signed[list(e.pure_inputs), h] = 1
        signed[list(e.pure_outputs), h] = -1
    degrees = np.count_nonzero(signed, axis=1).astype(np.int64)
    for a in (binary, signed, degrees):
        a.setflags(write=False)
    return IncidenceMatrices(binary, signed, degrees)


def codegree_matrix(H: ChemicalHypergraph) -> np.ndarray:
    """Entry (i, j) counts the hyperedges containing both i and j."""
    B = incidence(H).binary
    return B @ B.T


def check_regular_incidence(H: ChemicalHypergraph) -> tuple[bool, np.ndarray]:
    """Whether every vertex lies in the same number of hyperedges, with the counts."""
    counts = incidence(H).binary.sum(axis=1)
    return bool(np.all(counts == counts[0])), counts


def sync_invariance_check(H: ChemicalHypergraph) -> tuple[bool, list[int]]:
    """Per-hyperedge imbalance |V\\W| - |W\\V|.

    All imbalances vanish exactly when the constant vector lies in the kernel
    of the Laplacian, i.e. when the fully synchronized state is invariant under
    Laplacian coupling.
    """
    imbalance = [len(h.pure_inputs) - len(h.pure_outputs) for h in H.hyperedges]
    return all(d == 0 for d in imbalance), imbalance


def is_graph(H: ChemicalHypergraph) -> bool:
    """True when every hyperedge is a plain oriented edge (one input, one output, no catalyst)."""
    return all(
        len(h.inputs) == 1 and len(h.outputs) == 1 and h.inputs != h.outputs
        for h in H.hyperedges
    )


def is_bipartite(H: ChemicalHypergraph) -> bool:
    """Two-colour test: in each hyperedge the non-catalyst inputs share one class
    and the non-catalyst outputs the other."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(H.n_vertices)]
    for h in H.hyperedges:
        side = [(v, 0) for v in h.pure_inputs] + [(v, 1) for v in h.pure_outputs]
        if not side:
            continue
        anchor, a_side = side[0]
        for v, s in side[1:]:
            parity = s ^ a_side
            adj[anchor].append((v, parity))
            adj[v].append((anchor, parity))
    colour = [-1] * H.n_vertices
    for start in range(H.n_vertices):
        if colour[start] >= 0:
            continue
        colour[start] = 0
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v, parity in adj[u]:
                want = colour[u] ^ parity
                if colour[v] < 0:
                    colour[v] = want
                    queue.append(v)
                elif colour[v] != want:
                    return False
    return True
