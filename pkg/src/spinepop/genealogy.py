"""Ulam-Harris labelled genealogical trees.

Nodes live in an arena of parallel lists.  A node stores its parent index and
its rank among its siblings; the label ``(u1, ..., uk)`` is rebuilt on demand.
Children of a node are allocated contiguously, so a label resolves to an index
in O(generation) steps.  Death is a branch event with the zero offspring
vector.
"""
from __future__ import annotations

import bisect
import io
import math
from dataclasses import dataclass, field

INF = math.inf


class EmptyPopulation(RuntimeError):
    """No individual alive at the requested time."""


class UnknownLabel(KeyError):
    """Label absent from the tree (or not alive when required)."""


def child_label(u: tuple, i: int) -> tuple:
    if i < 1:
        raise ValueError("child rank must be >= 1")
    return tuple(u) + (i,)


@dataclass
class GenealogyTree:
    n_types: int
    roots: tuple  # ((label, type), ...)
    horizon: float = INF
    parent: list = field(default_factory=list)
    rank: list = field(default_factory=list)
    types: list = field(default_factory=list)
    birth: list = field(default_factory=list)
    end: list = field(default_factory=list)
    event_of: list = field(default_factory=list)
    first_child: list = field(default_factory=list)
    events: list = field(default_factory=list)  # (t, node, k)

    def __post_init__(self):
        if not self.parent:
            for label, x in self.roots:
                self._append(-1, label, x, 0.0)
        self._root_index = {label: i for i, (label, _) in enumerate(self.roots)}

    # -- construction ---------------------------------------------------
    def _append(self, parent, rank, x, t):
        self.parent.append(parent)
        self.rank.append(rank)
        self.types.append(x)
        self.birth.append(t)
        self.end.append(INF)
        self.event_of.append(-1)
        self.first_child.append(-1)
        return len(self.parent) - 1

    def branch(self, node: int, t: float, k: tuple, child_types) -> int:
        """Record the branching of ``node`` at ``t``; returns the first child index."""
        self.end[node] = t
        self.event_of[node] = len(self.events)
        self.events.append((t, node, k))
        first = len(self.parent)
        if child_types:
            self.first_child[node] = first
            for i, y in enumerate(child_types, 1):
                self._append(node, i, y, t)
        return first

    # -- queries --------------------------------------------------------
    def __len__(self):
        return len(self.parent)

    @property
    def initial_labels(self) -> list:
        return [(label,) for label, _ in self.roots]

    @property
    def initial_composition(self) -> tuple:
        v = [0] * self.n_types
        for _, x in self.roots:
            v[x] += 1
        return tuple(v)

    def label(self, node: int) -> tuple:
        path = []
        while node >= 0:
            path.append(self.rank[node])
            node = self.parent[node]
        return tuple(reversed(path))

    def index(self, label) -> int:
        label = tuple(label)
        if not label or label[0] not in self._root_index:
            raise UnknownLabel(label)
        node = self._root_index[label[0]]
        for i in label[1:]:
            ev = self.event_of[node]
            if ev < 0 or i < 1 or i > sum(self.events[ev][2]):
                raise UnknownLabel(label)
            node = self.first_child[node] + i - 1
        return node

    def offspring(self, node: int):
        ev = self.event_of[node]
        return None if ev < 0 else self.events[ev][2]

    def ancestry(self, node: int) -> list:
        """Node indices from the root down to ``node``."""
        chain = []
        while node >= 0:
            chain.append(node)
            node = self.parent[node]
        chain.reverse()
        return chain

    def alive_nodes(self, t: float) -> list:
        return [i for i in range(len(self.parent)) if self.birth[i] <= t < self.end[i]]

    def life_length(self, node: int) -> float:
        return min(self.end[node], self.horizon) - self.birth[node]

    def composition_at(self, t: float) -> tuple:
        z = list(self.initial_composition)
        for s, node, k in self.events:
            if s > t:
                break
            z[self.types[node]] -= 1
            for y, ky in enumerate(k):
                z[y] += ky
        return tuple(z)

    def composition_path(self, t: float = INF):
        """Yield ``(event time, composition after the event)`` starting at time 0."""
        z = list(self.initial_composition)
        yield 0.0, tuple(z)
        for s, node, k in self.events:
            if s > t:
                break
            z[self.types[node]] -= 1
            for y, ky in enumerate(k):
                z[y] += ky
            yield s, tuple(z)

    # -- export ---------------------------------------------------------
    def to_records(self) -> str:
        """``label;type;birth;end;offspring`` lines."""
        out = io.StringIO()
        out.write("label;type;birth;end;offspring\n")
        for i in range(len(self.parent)):
            k = self.offspring(i)
            out.write(
                "{};{};{!r};{};{}\n".format(
                    ".".join(map(str, self.label(i))),
                    self.types[i],
                    self.birth[i],
                    "inf" if self.end[i] == INF else repr(self.end[i]),
                    "" if k is None else " ".join(map(str, k)),
                )
            )
        return out.getvalue()

    def event_log_csv(self) -> str:
        out = io.StringIO()
        out.write("t,label,k\n")
        for s, node, k in self.events:
            out.write(f"{s!r},{'.'.join(map(str, self.label(node)))},{' '.join(map(str, k))}\n")
        return out.getvalue()


def alive_set(tree: GenealogyTree, t: float) -> list:
    return [tree.label(i) for i in tree.alive_nodes(t)]


def truncate(tree: GenealogyTree, t: float) -> GenealogyTree:
    """The tree restricted to ``[0, t]``: nodes born by ``t``, later events dropped."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    n_events = bisect.bisect_right([e[0] for e in tree.events], t)
    out = GenealogyTree(tree.n_types, tree.roots, horizon=min(t, tree.horizon))
    for s, node, k in tree.events[:n_events]:
        first = tree.first_child[node]
        out.branch(node, s, k, [tree.types[first + j] for j in range(sum(k))])
    return out


def sample_individual(tree: GenealogyTree, t: float, weights, uniform) -> tuple:
    """Pick an alive label with probability proportional to ``weights(label)``.

    ``weights`` may be ``None`` for the uniform law; ``uniform`` is a callable
    returning a draw in [0, 1).
    """
    node = sample_node(tree, t, weights, uniform)
    return tree.label(node)


def sample_node(tree: GenealogyTree, t: float, weights, uniform) -> int:
    alive = tree.alive_nodes(t)
    if not alive:
        raise EmptyPopulation(f"no individual alive at t={t}")
    if weights is None:
        return alive[min(int(uniform() * len(alive)), len(alive) - 1)]
    w = [float(weights(tree.label(i))) for i in alive]
    total = math.fsum(w)
    if not total > 0:
        raise ValueError("sampling weights are all zero")
    target = uniform() * total
    acc = 0.0
    for i, wi in zip(alive, w):
        acc += wi
        if target < acc:
            return i
    return alive[-1]


def lineage_statistics(tree: GenealogyTree, u, t: float):
    """Occupation times and branch counts along the ancestral line of ``u``.

    Returns ``(P, N)`` where ``P[(x, z)]`` is the time the ancestor of ``u``
    spent with type ``x`` while the population was ``z``, and ``N[((x, z), k)]``
    counts ancestral branchings with offspring ``k`` from state ``(x, z)``.
    ``u`` may be a label or a node index.
    """
    node = u if isinstance(u, int) else tree.index(u)
    if not tree.birth[node] <= t < tree.end[node]:
        raise UnknownLabel(f"{tree.label(node)} is not alive at t={t}")
    chain = tree.ancestry(node)
    types = tree.types
    P: dict = {}
    N: dict = {}
    z = list(tree.initial_composition)
    pos = 0
    anc = chain[0]
    prev = 0.0
    for s, brancher, k in tree.events:
        if s > t:
            break
        key = (types[anc], tuple(z))
        P[key] = P.get(key, 0.0) + (s - prev)
        prev = s
        if brancher == anc:
            nk = (key, k)
            N[nk] = N.get(nk, 0) + 1
            pos += 1
            anc = chain[pos]
        z[types[brancher]] -= 1
        for y, ky in enumerate(k):
            z[y] += ky
    key = (types[anc], tuple(z))
    P[key] = P.get(key, 0.0) + (t - prev)
    return P, N


def _node_table(tree: GenealogyTree) -> dict:
    zero = (0,) * tree.n_types
    table = {}
    for i in range(len(tree)):
        k = tree.offspring(i)
        table[tree.label(i)] = (tree.types[i], tree.life_length(i), zero if k is None else k)
    return table


def tree_distance(t1: GenealogyTree, t2: GenealogyTree) -> float:
    """Label-wise l1 distance between two trees.

    Every label present in only one tree costs 1 plus its life length and
    offspring count; labels present in both cost the life-length difference,
    the l1 distance of the offspring vectors and 1 if the types differ.
    Unbranched nodes carry the zero offspring vector; two unbounded lives
    of the same node are equal.
    """
    a = _node_table(t1)
    b = _node_table(t2)
    d = 0.0
    for label, (x, ell, k) in a.items():
        other = b.get(label)
        if other is None:
            d += 1.0 + ell + sum(k)
            continue
        y, ell2, k2 = other
        d += (0.0 if ell == ell2 else abs(ell - ell2)) + sum(abs(p - q) for p, q in zip(k, k2)) + (x != y)
    for label, (_, ell, k) in b.items():
        if label not in a:
            d += 1.0 + ell + sum(k)
    return d
