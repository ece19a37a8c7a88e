"""Exact jump-chain simulation of the original process and of the psi-spine.

Both simulators use one exponential clock at the total rate followed by a
categorical pick.  Rates depend on the composition only, so individuals of the
same type are aggregated: the pick selects (type, channel) and the brancher is
then drawn uniformly among the alive individuals of that type.

Randomness comes from :class:`Stream`, a buffered counter-based generator keyed
by ``(seed, replica)``; replica ``i`` of a run is therefore the same whatever
the number of workers or the order of execution.
"""
from __future__ import annotations

import bisect
import dataclasses
import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import ModelSpec, PsiFunction, psi_mass
from .genealogy import GenealogyTree, child_label
from .transform import ModelShape, spine_choice_probs, spine_table

_MASK64 = (1 << 64) - 1


class Stream:
    """Buffered uniforms from a Philox generator keyed by ``(seed, replica, purpose)``."""

    __slots__ = ("generator", "_buf", "_i", "_block")

    def __init__(self, seed: int, replica: int = 0, purpose: int = 0, block: int = 64):
        key = np.array([seed & _MASK64, ((purpose & 0xFFFFFF) << 40) | (replica & ((1 << 40) - 1))], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))
        self._block = block
        self._buf = []
        self._i = 0

    def uniform(self) -> float:
        i = self._i
        buf = self._buf
        if i == len(buf):
            buf = self._buf = self.generator.random(self._block).tolist()
            self._block = min(self._block * 2, 4096)
            i = 0
        self._i = i + 1
        return buf[i]

    def exponential(self) -> float:
        return -math.log1p(-self.uniform())


class Status(enum.Enum):
    COMPLETED = "completed"
    EXTINCT = "extinct"
    CENSORED = "censored"


@dataclass(frozen=True)
class SimConfig:
    horizon: float
    max_events: int = 10**6
    record_tree: bool = True
    seed: int = 0
    replica: int = 0
    sample_times: tuple = ()
    record_path: bool = False

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.max_events < 1:
            raise ValueError("max_events must be >= 1")
        if any(s < 0 or s > self.horizon for s in self.sample_times):
            raise ValueError("sample times must lie in [0, horizon]")
        if list(self.sample_times) != sorted(self.sample_times):
            raise ValueError("sample times must be sorted")

    def for_replica(self, replica: int) -> "SimConfig":
        return dataclasses.replace(self, replica=replica)


@dataclass
class SimOutcome:
    model: ModelSpec
    tree: GenealogyTree | None
    final: tuple
    status: Status
    time: float  # extinction time, censoring time or horizon
    n_events: int
    samples: list = field(default_factory=list)  # composition at each sample time (None if censored)
    path: list | None = None  # [(event time, composition after it)] when requested

    @property
    def extinct(self) -> bool:
        return self.status is Status.EXTINCT


@dataclass
class SpineOutcome:
    model: ModelSpec
    psi: PsiFunction
    tree: GenealogyTree | None
    spine_path: list  # [(time, label, type)], first entry at time 0
    spine_node: int  # arena index of the current spine (-1 without a tree)
    lambda_integral: float
    terminal_psi: float
    terminal_reciprocal: float
    final: tuple
    status: Status
    time: float
    n_events: int
    samples: list = field(default_factory=list)  # (composition, spine type, lambda integral)
    path: list | None = None  # [(event time, spine type, composition)] when requested

    @property
    def spine_type(self) -> int:
        return self.spine_path[-1][2]

    @property
    def spine_label(self) -> tuple:
        return self.spine_path[-1][1]

    @property
    def spine_events(self) -> int:
        return len(self.spine_path) - 1


class TableCache(dict):
    """Bounded memo of per-state event tables.

    Rates are pure functions of the state, so memoising them changes no
    result; the cache is simply cleared when it reaches ``limit`` entries.
    """

    def __init__(self, limit: int = 1 << 16):
        super().__init__()
        self.limit = limit

    def put(self, key, value):
        if len(self) >= self.limit:
            self.clear()
        self[key] = value
        return value


_SHARED: dict = {}


def shared_cache(*key) -> TableCache:
    """Process-wide table cache for a kernel (and psi).

    Keys hold strong references, so a cache is never confused with the one
    of a different, since-collected model.  Only a handful are kept.
    """
    cache = _SHARED.get(key)
    if cache is None:
        if len(_SHARED) >= 8:
            _SHARED.pop(next(iter(_SHARED)))
        cache = _SHARED[key] = TableCache()
    return cache


def _original_table(kernel, z):
    size = sum(z)
    entries = []
    cum = []
    acc = 0.0
    for y in range(kernel.n_types):
        if z[y] == 0:
            continue
        for ch, r in kernel.rates(y, z, size):
            acc += z[y] * r
            entries.append((y, ch))
            cum.append(acc)
    return acc, tuple(entries), tuple(cum)


def simulate_original(model: ModelSpec, cfg: SimConfig, rng: Stream | None = None, cache: TableCache | None = None) -> SimOutcome:
    """Simulate the genealogy (or only the composition when ``record_tree`` is off)."""
    if rng is None:
        rng = Stream(cfg.seed, cfg.replica)
    if cache is None:
        cache = shared_cache(model.kernel)
    kernel = model.kernel
    assign = model.assignment.assign
    uniform = rng.uniform
    horizon = cfg.horizon
    record = cfg.record_tree
    n_types = kernel.n_types
    z = list(model.initial_composition)
    tree = None
    alive = None
    if record:
        tree = GenealogyTree(n_types, model.initial)
        alive = [[] for _ in range(n_types)]
        for i, (_, x) in enumerate(model.initial):
            alive[x].append(i)
    samples = []
    path = [(0.0, tuple(z))] if cfg.record_path else None
    pending = list(cfg.sample_times)
    pi = 0
    t = 0.0
    n = 0
    status = Status.COMPLETED
    end_time = horizon
    while True:
        key = tuple(z)
        if path is not None and n:
            path.append((t, key))
        tab = cache.get(key)
        if tab is None:
            tab = cache.put(key, _original_table(kernel, key))
        total, entries, cum = tab
        if total <= 0.0:
            break
        t_next = t - math.log1p(-uniform()) / total
        while pi < len(pending) and pending[pi] < t_next:
            samples.append(key)
            pi += 1
        if t_next > horizon:
            break
        if n >= cfg.max_events:
            status = Status.CENSORED
            end_time = t
            break
        t = t_next
        n += 1
        j = bisect.bisect_right(cum, uniform() * total)
        if j == len(cum):
            j -= 1
        y, ch = entries[j]
        k = ch.offspring
        if record:
            pool = alive[y]
            m = len(pool)
            i = int(uniform() * m)
            node = pool[i]
            pool[i] = pool[m - 1]
            pool.pop()
            kids = assign(k, uniform)
            first = tree.branch(node, t, k, kids)
            for off, c in enumerate(kids):
                alive[c].append(first + off)
        z[y] -= 1
        for c, kc in enumerate(k):
            if kc:
                z[c] += kc
        if sum(z) == 0:
            status = Status.EXTINCT
            end_time = t
            if path is not None:
                path.append((t, tuple(z)))
            break
    # remaining sample times see the final state (or nothing if censored)
    while pi < len(pending):
        samples.append(None if status is Status.CENSORED else tuple(z))
        pi += 1
    if tree is not None:
        tree.horizon = horizon if status is not Status.CENSORED else end_time
    return SimOutcome(model, tree, tuple(z), status, end_time, n, samples, path)


def initial_spine_law(model: ModelSpec, psi: PsiFunction) -> list:
    """``P(E(0) = e)`` for the initial individuals, in order."""
    v = model.initial_composition
    w = [psi(x, v) for _, x in model.initial]
    s = math.fsum(w)
    return [wi / s for wi in w]


def _categorical(probs, u):
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    for i in range(len(probs) - 1, -1, -1):
        if probs[i] > 0:
            return i
    raise ValueError("empty categorical law")


def simulate_spine(
    model: ModelSpec,
    psi: PsiFunction,
    cfg: SimConfig,
    rng: Stream | None = None,
    cache: TableCache | None = None,
    spine_rate_factor: float = 1.0,
) -> SpineOutcome:
    """Simulate the psi-spine construction, accumulating ``int lambda``.

    ``spine_rate_factor`` is a test hook that multiplies the spine's branching
    rates (and so breaks the construction); leave it at 1.
    """
    if rng is None:
        rng = Stream(cfg.seed, cfg.replica)
    if cache is None:
        cache = shared_cache(model.kernel, psi)
    kernel = model.kernel
    assign = model.assignment.assign
    uniform = rng.uniform
    horizon = cfg.horizon
    record = cfg.record_tree
    n_types = kernel.n_types
    z = list(model.initial_composition)

    e0 = _categorical(initial_spine_law(model, psi), uniform())
    root_label, x = model.initial[e0]
    label = (root_label,)
    spine_path = [(0.0, label, x)]
    tree = None
    alive = None
    spine_node = -1
    if record:
        tree = GenealogyTree(n_types, model.initial)
        alive = [[] for _ in range(n_types)]
        for i, (_, y) in enumerate(model.initial):
            if i != e0:
                alive[y].append(i)
        spine_node = e0

    samples = []
    path = [(0.0, x, tuple(z))] if cfg.record_path else None
    pending = list(cfg.sample_times)
    pi = 0
    t = 0.0
    lam_int = 0.0
    n = 0
    status = Status.COMPLETED
    end_time = horizon
    factor = spine_rate_factor
    while True:
        key = (x, tuple(z), factor)
        tab = cache.get(key)
        if tab is None:
            tab = cache.put(key, spine_table(kernel, psi, x, key[1], factor))
        total = tab.total
        lam = tab.lam
        t_next = t - math.log1p(-uniform()) / total if total > 0 else math.inf
        while pi < len(pending) and pending[pi] < t_next:
            s = pending[pi]
            samples.append((key[1], x, lam_int + lam * (s - t) if lam else lam_int))
            pi += 1
        if t_next > horizon:
            if lam:
                lam_int += lam * (horizon - t)
            break
        if n >= cfg.max_events:
            status = Status.CENSORED
            end_time = t
            break
        if lam:
            lam_int += lam * (t_next - t)
        t = t_next
        n += 1
        j = bisect.bisect_right(tab.cumulative, uniform() * total)
        if j == len(tab.cumulative):
            j -= 1
        who, ch = tab.entries[j]
        k = ch.offspring
        if who < 0:
            kids = assign(k, uniform)
            if not kids:
                raise AssertionError("the spine cannot die")
            probs = spine_choice_probs(psi, k, key[1], x)
            new_type = _categorical(probs, uniform())
            positions = [i for i, c in enumerate(kids) if c == new_type]
            pos = positions[min(int(uniform() * len(positions)), len(positions) - 1)]
            if record:
                first = tree.branch(spine_node, t, k, kids)
                for off, c in enumerate(kids):
                    if off != pos:
                        alive[c].append(first + off)
                spine_node = first + pos
            label = child_label(label, pos + 1)
            z[x] -= 1
            x = new_type
            spine_path.append((t, label, x))
        else:
            y = who
            if record:
                pool = alive[y]
                m = len(pool)
                i = int(uniform() * m)
                node = pool[i]
                pool[i] = pool[m - 1]
                pool.pop()
                kids = assign(k, uniform)
                first = tree.branch(node, t, k, kids)
                for off, c in enumerate(kids):
                    alive[c].append(first + off)
            z[y] -= 1
        for c, kc in enumerate(k):
            if kc:
                z[c] += kc
        if path is not None:
            path.append((t, x, tuple(z)))
    while pi < len(pending):
        samples.append(None)
        pi += 1
    if tree is not None:
        tree.horizon = horizon if status is not Status.CENSORED else end_time
    zf = tuple(z)
    return SpineOutcome(
        model,
        psi,
        tree,
        spine_path,
        spine_node,
        lam_int,
        psi(x, zf),
        psi.reciprocal(x, zf),
        zf,
        status,
        end_time,
        n,
        samples,
        path,
    )


# ---------------------------------------------------------------------------
# sampling laws and weights


class UniformSampling:
    """Uniform choice among alive individuals."""

    name = "uniform"

    def weight(self, x: int) -> float:
        return 1.0

    def prob(self, x: int, z) -> float:
        return 1.0 / sum(z)


class TypeBiasedSampling:
    """Choice proportional to a positive weight of the individual's type."""

    name = "type-biased"

    def __init__(self, weights):
        self.weights = tuple(float(w) for w in weights)

    def weight(self, x: int) -> float:
        return self.weights[x]

    def prob(self, x: int, z) -> float:
        return self.weights[x] / math.fsum(w * zy for w, zy in zip(self.weights, z))


UNIFORM = UniformSampling()


def spine_weight(out: SpineOutcome, p=UNIFORM) -> float:
    """``exp(int lambda) / psi(Y, Xi) * p_E``; zero for censored runs."""
    if out.status is Status.CENSORED:
        return 0.0
    base = math.exp(out.lambda_integral) * out.terminal_reciprocal
    if isinstance(p, UniformSampling):
        return base / sum(out.final)
    return base * p.prob(out.spine_type, out.final)


def prefactor(model: ModelSpec, psi: PsiFunction) -> float:
    """``<v, psi(., v)>``."""
    return psi_mass(psi, model.initial_composition)


# ---------------------------------------------------------------------------
# growth-fragmentation masses


def _check_gf(model: ModelSpec):
    kernel = model.kernel
    if kernel.n_types != 1 or any(ch.offspring not in ((0,), (2,)) for ch in kernel.channels):
        raise ModelShape("mass decoration needs a single-type kernel with division and death only")


@dataclass
class MassMap:
    """Mass of every node at its birth and at the end of its life."""

    r: float
    tree: GenealogyTree
    birth_mass: list
    fractions: list  # F drawn at each division (nan otherwise)

    def mass(self, node: int, t: float) -> float:
        if not self.tree.birth[node] <= t < self.tree.end[node]:
            raise ValueError("node not alive at t")
        return self.birth_mass[node] * math.exp(self.r * (t - self.tree.birth[node]))


@dataclass
class ZetaPath:
    """Mass along the spine: exponential growth, jumps by F at spine divisions."""

    r: float
    times: list  # jump times (0 first)
    values: list  # mass just after each jump

    def __call__(self, t: float) -> float:
        i = bisect.bisect_right(self.times, t) - 1
        return self.values[i] * math.exp(self.r * (t - self.times[i]))


def simulate_mass_decoration(base, r: float, fraction_law, rng: Stream, zeta0: float = 1.0):
    """Attach masses to a growth-fragmentation run.

    For a :class:`SimOutcome` with a tree, every root starts at ``zeta0``;
    a dividing cell of mass ``m`` gives ``(F m, (1 - F) m)`` with an
    independent ``F`` per division.  For a :class:`SpineOutcome` returns the
    spine mass path ``zeta*``.
    """
    _check_gf(base.model)
    if isinstance(base, SpineOutcome):
        times = [0.0]
        values = [zeta0]
        for s, _, _ in base.spine_path[1:]:
            f = fraction_law.sample(rng)
            values.append(values[-1] * math.exp(r * (s - times[-1])) * f)
            times.append(s)
        return ZetaPath(r, times, values)
    tree = base.tree
    if tree is None:
        raise ValueError("mass decoration of the original process needs a recorded tree")
    n_roots = len(tree.roots)
    mass = [zeta0] * n_roots + [0.0] * (len(tree) - n_roots)
    fractions = [math.nan] * len(tree)
    for s, node, k in tree.events:
        if not sum(k):
            continue
        f = fraction_law.sample(rng)
        fractions[node] = f
        m = mass[node] * math.exp(r * (s - tree.birth[node]))
        first = tree.first_child[node]
        mass[first] = f * m
        mass[first + 1] = (1.0 - f) * m
    return MassMap(r, tree, mass, fractions)


# ---------------------------------------------------------------------------
# replicas


def _default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1))


def _run_chunk(args):
    fn, start, stop = args
    return [fn(i) for i in range(start, stop)]


def run_replicas(fn, n: int, workers: int | None = None, chunk: int = 2048) -> list:
    """Evaluate ``fn(i)`` for ``i < n`` and return results in replica order.

    ``fn`` must be picklable (a module-level function or a
    :func:`functools.partial` of one) when ``workers > 1``.
    """
    if workers is None:
        workers = _default_workers()
    if workers <= 1 or n < 2 * chunk:
        return [fn(i) for i in range(n)]
    bounds = [(fn, a, min(a + chunk, n)) for a in range(0, n, chunk)]
    out = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_run_chunk, bounds):
            out.extend(part)
    return out
