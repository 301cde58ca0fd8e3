"""Interaction graphs: generation, loading, diameter and edge colouring."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

Edge = tuple[int, int]

MAX_ATTEMPTS = 10_000


class GraphError(ValueError):
    """Invalid graph or generator parameters."""


class GraphFormatError(GraphError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class GenerationError(RuntimeError):
    """A randomized generator ran out of retries."""


class DisconnectedGraphError(GraphError):
    pass


def _norm(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple[Edge, ...]
    degree_hint: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise GraphError(f"graph needs at least one node, got n={self.n}")
        seen: set[Edge] = set()
        for u, v in self.edges:
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge ({u}, {v}) outside [0, {self.n})")
            e = _norm(u, v)
            if e in seen:
                raise GraphError(f"duplicate edge {e}")
            seen.add(e)
        object.__setattr__(self, "edges", tuple(sorted(seen)))
        if self.degree_hint is not None:
            bad = [v for v, d in enumerate(self.degrees()) if d != self.degree_hint]
            if bad:
                raise GraphError(f"node {bad[0]} does not have degree {self.degree_hint}")

    @classmethod
    def from_edges(cls, n: int, edges, degree_hint: int | None = None) -> Graph:
        return cls(n, tuple(_norm(int(u), int(v)) for u, v in edges), degree_hint)

    def degrees(self) -> list[int]:
        deg = [0] * self.n
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def max_degree(self) -> int:
        return max(self.degrees(), default=0)

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return adj

    def is_regular(self) -> bool:
        return len(set(self.degrees())) == 1


@dataclass(frozen=True)
class ColoredLayout:
    """Edge colouring; each class is a matching and becomes one parallel gate layer."""
    classes: tuple[tuple[Edge, ...], ...]

    @property
    def colors_used(self) -> int:
        return len(self.classes)

    def edges(self) -> list[Edge]:
        return [e for cls in self.classes for e in cls]

    def check(self, g: Graph) -> None:
        """Raise GraphError unless this is a proper colouring of exactly E(g)."""
        listed = self.edges()
        if sorted(listed) != list(g.edges):
            raise GraphError("layout does not cover the graph's edge set exactly once")
        for i, cls in enumerate(self.classes):
            ends = [x for e in cls for x in e]
            if len(ends) != len(set(ends)):
                raise GraphError(f"colour class {i} is not a matching")


# ---------------------------------------------------------------------------
# generators

def random_regular(n: int, k: int, seed: int) -> Graph:
    """Random simple k-regular graph from the pairing (configuration) model.

    Stubs are paired one random pair at a time and illegal pairs (loops or
    repeated edges) are redrawn; a dead end discards the whole matching and
    starts over.  At most MAX_ATTEMPTS matchings are tried.
    """
    if not (1 <= k < n):
        raise GraphError(f"need n > k >= 1, got n={n}, k={k}")
    if (n * k) % 2:
        raise GraphError(f"n*k must be even, got n={n}, k={k}")
    rng = np.random.default_rng(seed)
    for _ in range(MAX_ATTEMPTS):
        edges = _try_pairing(n, k, rng)
        if edges is not None:
            return Graph.from_edges(n, edges, degree_hint=k)
    raise GenerationError(f"no simple {k}-regular graph on {n} nodes after {MAX_ATTEMPTS} attempts")


def _try_pairing(n: int, k: int, rng: np.random.Generator) -> set[Edge] | None:
    stubs = [v for v in range(n) for _ in range(k)]
    edges: set[Edge] = set()
    while stubs:
        m = len(stubs)
        for _ in range(4 * m):
            i, j = rng.integers(m, size=2)
            u, v = stubs[i], stubs[j]
            if u != v and _norm(u, v) not in edges:
                break
        else:
            legal = [(i, j) for i in range(m) for j in range(i + 1, m)
                     if stubs[i] != stubs[j] and _norm(stubs[i], stubs[j]) not in edges]
            if not legal:
                return None
            i, j = legal[rng.integers(len(legal))]
            u, v = stubs[i], stubs[j]
        edges.add(_norm(u, v))
        for idx in sorted((i, j), reverse=True):
            stubs[idx] = stubs[-1]
            stubs.pop()
    return edges


def random_regular_odd_repair(n: int, k: int, seed: int) -> Graph:
    """Near-regular graph for odd n*k.

    Builds a k-regular graph on n+1 nodes, deletes a random vertex, and joins
    floor(k/2) disjoint random pairs of its former neighbours, avoiding repeated
    edges.  One former neighbour keeps degree k-1.
    """
    if (n * k) % 2 == 0:
        raise GraphError(f"n*k must be odd for the repair path, got n={n}, k={k}; use random_regular")
    if not (1 <= k < n):
        raise GraphError(f"need n > k >= 1, got n={n}, k={k}")
    rng = np.random.default_rng(seed)
    base_seed = int(rng.integers(2**63))
    for attempt in range(MAX_ATTEMPTS):
        if attempt % 100 == 0:
            base = random_regular(n + 1, k, base_seed + attempt // 100)
            gone = int(rng.integers(n + 1))
            relabel = {v: (v if v < gone else v - 1) for v in range(n + 1) if v != gone}
            kept = {_norm(relabel[u], relabel[v]) for u, v in base.edges if gone not in (u, v)}
            deficient = sorted(relabel[u] for u in base.adjacency()[gone])
        order = [deficient[i] for i in rng.permutation(len(deficient))]
        pairs = [_norm(order[2 * i], order[2 * i + 1]) for i in range(k // 2)]
        if all(p not in kept for p in pairs):
            return Graph.from_edges(n, kept | set(pairs))
    raise GenerationError(f"could not repair an odd ({n}, {k}) graph after {MAX_ATTEMPTS} attempts")


def hoffman_singleton() -> Graph:
    """The (7-2-50) Moore graph from five pentagons and five pentagrams."""
    def pent(h, j):
        return 5 * h + j

    def gram(i, j):
        return 25 + 5 * i + j

    edges = []
    for h in range(5):
        for j in range(5):
            edges.append((pent(h, j), pent(h, (j + 1) % 5)))
            edges.append((gram(h, j), gram(h, (j + 2) % 5)))
            for i in range(5):
                edges.append((pent(h, j), gram(i, (h * i + j) % 5)))
    return Graph.from_edges(50, edges, degree_hint=7)


def petersen() -> Graph:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    spokes = [(i, 5 + i) for i in range(5)]
    return Graph.from_edges(10, outer + inner + spokes, degree_hint=3)


def complete(n: int) -> Graph:
    return Graph.from_edges(n, [(u, v) for u in range(n) for v in range(u + 1, n)],
                            degree_hint=n - 1 if n > 1 else None)


def cycle(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)], degree_hint=2)


def path(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


# ---------------------------------------------------------------------------
# edge-list files

def parse_edge_list(text: str) -> Graph:
    n_header: int | None = None
    edges: list[Edge] = []
    seen: set[Edge] = set()
    first = True
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split()
        if first and parts[0] == "p":
            if len(parts) != 2 or not parts[1].isdigit():
                raise GraphFormatError("header must be 'p <n>'", lineno)
            n_header = int(parts[1])
            first = False
            continue
        first = False
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise GraphFormatError(f"expected '<u> <v>', got {line!r}", lineno)
        u, v = int(parts[0]), int(parts[1])
        if u == v:
            raise GraphError(f"line {lineno}: self-loop at node {u}")
        e = _norm(u, v)
        if e in seen:
            raise GraphError(f"line {lineno}: duplicate edge {e}")
        seen.add(e)
        edges.append(e)
    n = n_header if n_header is not None else 1 + max((max(e) for e in edges), default=-1)
    if n < 1:
        raise GraphError("edge list describes no nodes")
    return Graph.from_edges(n, edges)


def load_edge_list(path) -> Graph:
    return parse_edge_list(Path(path).read_text(encoding="utf-8"))


def format_edge_list(g: Graph) -> str:
    return "".join([f"p {g.n}\n"] + [f"{u} {v}\n" for u, v in g.edges])


def write_edge_list(g: Graph, path) -> None:
    Path(path).write_text(format_edge_list(g), encoding="utf-8")


# (k, d, n) of the named degree-diameter graphs; files live in hamforge/data/graphs.
NAMED_GRAPHS = {
    "hoffman-singleton": (7, 2, 50),
    "3-5-70": (3, 5, 70),
    "4-4-98": (4, 4, 98),
    "5-3-72": (5, 3, 72),
}


def load_named(name: str) -> Graph:
    """Load a named (k-d-n) graph and check it against its declared triple."""
    if name in ("hoffman-singleton", "7-2-50"):
        return hoffman_singleton()
    if name not in NAMED_GRAPHS:
        raise GraphError(f"unknown named graph {name!r}; known: {sorted(NAMED_GRAPHS)}")
    ref = resources.files("hamforge") / "data" / "graphs" / f"{name}.txt"
    if not ref.is_file():
        raise GraphError(f"no edge list bundled for {name!r}")
    return validate_triple(parse_edge_list(ref.read_text(encoding="utf-8")), *NAMED_GRAPHS[name])


def validate_triple(g: Graph, k: int, d: int, n: int) -> Graph:
    if g.n != n:
        raise GraphError(f"expected {n} nodes, got {g.n}")
    if set(g.degrees()) != {k}:
        raise GraphError(f"expected a {k}-regular graph")
    if (dg := diameter(g)) != d:
        raise GraphError(f"expected diameter {d}, got {dg}")
    return Graph(g.n, g.edges, degree_hint=k)


# ---------------------------------------------------------------------------
# metrics

def bfs_distances(g: Graph, source: int, adj=None) -> list[int]:
    adj = adj if adj is not None else g.adjacency()
    dist = [-1] * g.n
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def diameter(g: Graph) -> int:
    adj = g.adjacency()
    best = 0
    for s in range(g.n):
        dist = bfs_distances(g, s, adj)
        if min(dist) < 0:
            raise DisconnectedGraphError("graph is disconnected; diameter is infinite")
        best = max(best, max(dist))
    return best


def girth(g: Graph) -> int | None:
    """Length of the shortest cycle, or None for a forest."""
    adj = g.adjacency()
    best = None
    for s in range(g.n):
        dist = [-1] * g.n
        parent = [-1] * g.n
        dist[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    parent[w] = u
                    queue.append(w)
                elif parent[u] != w:
                    cyc = dist[u] + dist[w] + 1
                    if best is None or cyc < best:
                        best = cyc
    return best


# ---------------------------------------------------------------------------
# edge colouring

def vizing_color(g: Graph, seed: int = 0, attempts: int = 50) -> ColoredLayout:
    """Proper edge colouring with at most max_degree + 1 colours.

    The first pass colours edges in sorted order.  If it needs the extra
    colour, up to ``attempts`` further passes colour a random permutation of
    the edges and the first max_degree-colouring found is returned.
    """
    delta = g.max_degree()
    coloring = _misra_gries(g, list(g.edges))
    if _used(coloring) > delta:
        rng = np.random.default_rng(seed)
        edges = list(g.edges)
        for _ in range(attempts):
            order = [edges[i] for i in rng.permutation(len(edges))]
            trial = _misra_gries(g, order)
            if _used(trial) <= delta:
                coloring = trial
                break
    return _layout(coloring)


def _used(coloring: dict[Edge, int]) -> int:
    return len(set(coloring.values()))


def _layout(coloring: dict[Edge, int]) -> ColoredLayout:
    groups: dict[int, list[Edge]] = {}
    for e, c in coloring.items():
        groups.setdefault(c, []).append(e)
    classes = [sorted(es) for es in groups.values()]
    # Largest class first: that layer sits at the reverse/forward stage seam
    # where the optimizer merges it.
    classes.sort(key=lambda cls: (-len(cls), cls[0]))
    classes = _first_fit(classes)
    return ColoredLayout(tuple(tuple(sorted(c)) for c in classes))


def _first_fit(classes: list[list[Edge]]) -> list[list[Edge]]:
    """Move every edge into the earliest class where both ends are free.

    Afterwards each edge of class j touches an edge of every earlier class, so
    layer-by-layer scheduling cannot overlap classes and the circuit depth
    is exactly (gates per edge) * (number of classes).  Emptied classes are
    dropped.
    """
    covered = [set(v for e in cls for v in e) for cls in classes]
    moved = True
    while moved:
        moved = False
        for j in range(1, len(classes)):
            for e in list(classes[j]):
                for i in range(j):
                    if e[0] not in covered[i] and e[1] not in covered[i]:
                        classes[j].remove(e)
                        covered[j] -= set(e)
                        classes[i].append(e)
                        covered[i] |= set(e)
                        moved = True
                        break
    return [c for c in classes if c]


def _misra_gries(g: Graph, order: list[Edge]) -> dict[Edge, int]:
    palette = g.max_degree() + 1
    # at[v][c] = neighbour joined to v by the edge of colour c
    at: list[dict[int, int]] = [dict() for _ in range(g.n)]
    color: dict[Edge, int] = {}
    adj = g.adjacency()

    def free(v: int) -> int:
        for c in range(palette):
            if c not in at[v]:
                return c
        raise AssertionError("no free colour")  # impossible with delta+1 colours

    def set_color(u: int, v: int, c: int) -> None:
        old = color.get(_norm(u, v))
        if old is not None:
            del at[u][old]
            del at[v][old]
        color[_norm(u, v)] = c
        at[u][c] = v
        at[v][c] = u

    def clear(u: int, v: int) -> None:
        old = color.pop(_norm(u, v))
        del at[u][old]
        del at[v][old]

    for u, v in order:
        # maximal fan of u starting at v
        fan = [v]
        in_fan = {v}
        grew = True
        while grew:
            grew = False
            last = fan[-1]
            for w in adj[u]:
                if w in in_fan:
                    continue
                c = color.get(_norm(u, w))
                if c is not None and c not in at[last]:
                    fan.append(w)
                    in_fan.add(w)
                    grew = True
                    break
        c = free(u)
        d = free(fan[-1])
        # invert the cd-path starting at u (u has c free, so it starts with d)
        if c != d:
            path_edges = []
            x, want = u, d
            while want in at[x]:
                y = at[x][want]
                path_edges.append((x, y, want))
                x, want = y, (c if want == d else d)
            for x, y, col in path_edges:
                clear(x, y)
            for x, y, col in path_edges:
                set_color(x, y, c if col == d else d)
        # first fan vertex with d free, after the inversion
        w_idx = next(i for i, w in enumerate(fan) if d not in at[w])
        for i in range(w_idx):
            nxt = color[_norm(u, fan[i + 1])]
            if _norm(u, fan[i]) in color:
                clear(u, fan[i])
            clear(u, fan[i + 1])
            set_color(u, fan[i], nxt)
        set_color(u, fan[w_idx], d)
    return color
