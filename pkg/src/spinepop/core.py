"""Type spaces, population vectors, rate kernels and the first-moment operator.

A population composition is a tuple of non-negative ints indexed by type.  A
kernel is a finite list of channels ``(type, offspring vector, rate)`` where
the rate is a callable of the composition.  Rate callables are small frozen
dataclasses so that models pickle cleanly into worker processes.
"""
from __future__ import annotations

import math
import operator
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

Composition = tuple  # tuple[int, ...]


class DomainError(ValueError):
    """Raised when an operator is evaluated outside {(x, z): z_x >= 1}."""


class ModelError(ValueError):
    """Raised for malformed kernels or model definitions."""


def unit(n_types: int, x: int) -> Composition:
    return tuple(1 if y == x else 0 for y in range(n_types))


def norm1(z: Sequence[int]) -> int:
    return sum(z)


def shifted(z: Composition, k: Composition, x: int) -> Composition:
    """Return ``z + k - e(x)``."""
    out = list(map(operator.add, z, k))
    out[x] -= 1
    return tuple(out)


# ---------------------------------------------------------------------------
# rate families


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, z):
        return self.value


@dataclass(frozen=True)
class LogisticDeath:
    """``c * (||z||_1 - 1)``: death by competition with every other individual."""

    c: float

    def __call__(self, z):
        return self.c * (sum(z) - 1)


@dataclass(frozen=True)
class Affine:
    """``max(0, intercept + <coefs, z>)``."""

    intercept: float
    coefs: tuple

    def __call__(self, z):
        s = self.intercept
        for a, zi in zip(self.coefs, z):
            s += a * zi
        return s if s > 0.0 else 0.0


@dataclass(frozen=True)
class CapacityGated:
    """``value`` while ``||z||_1 + increment <= capacity``, else 0."""

    value: float
    capacity: float
    increment: int = 1

    def __call__(self, z):
        return self.value if sum(z) + self.increment <= self.capacity else 0.0


@dataclass(frozen=True)
class DecayingPerturbation:
    """``base + delta / (1 + log(1 + ||z||_1)) ** power``."""

    base: float
    delta: float
    power: float = 2.0

    def __call__(self, z):
        return self.base + self.delta / (1.0 + math.log1p(sum(z))) ** self.power


@dataclass(frozen=True)
class Scaled:
    """Evaluate a density rate at ``z / N``."""

    base: Callable
    n: float

    def __call__(self, z):
        n = self.n
        return self.base(tuple(zi / n for zi in z))


@dataclass(frozen=True)
class Tabulated:
    """Rate looked up by composition, ``default`` elsewhere."""

    table: tuple  # ((composition, value), ...)
    default: float = 0.0

    def __call__(self, z):
        for key, value in self.table:
            if key == z:
                return value
        return self.default


RATE_FAMILIES = {
    "constant": Constant,
    "logistic-death": LogisticDeath,
    "affine": Affine,
    "capacity-gated": CapacityGated,
    "decaying-perturbation": DecayingPerturbation,
}


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class Channel:
    """One branching channel: an individual of ``type`` replaced by ``offspring``."""

    type: int
    offspring: tuple
    rate: Callable

    @property
    def size(self) -> int:
        return sum(self.offspring)

    @property
    def delta(self) -> tuple:
        d = list(self.offspring)
        d[self.type] -= 1
        return tuple(d)


@dataclass(frozen=True)
class RateKernel:
    """Finite-support branching rates ``tau_k(x, z)``.

    ``capacity`` (the bound z-bar) zeroes every channel that would take the
    total size above it.
    """

    n_types: int
    channels: tuple
    capacity: int | None = None
    by_type: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        groups = [[] for _ in range(self.n_types)]
        for ch in self.channels:
            if not 0 <= ch.type < self.n_types:
                raise ModelError(f"channel type {ch.type} outside type space")
            if len(ch.offspring) != self.n_types or min(ch.offspring) < 0:
                raise ModelError(f"bad offspring vector {ch.offspring}")
            groups[ch.type].append(ch)
        object.__setattr__(self, "by_type", tuple(tuple(g) for g in groups))

    def support(self, x: int) -> list[tuple]:
        return [ch.offspring for ch in self.by_type[x]]

    def rates(self, x: int, z: Composition, size: int | None = None) -> list:
        """Non-zero ``(channel, rate)`` pairs for an individual of type ``x``."""
        if size is None:
            size = sum(z)
        cap = self.capacity
        out = []
        for ch in self.by_type[x]:
            if cap is not None and size + ch.size - 1 > cap:
                continue
            r = ch.rate(z)
            if r < 0:
                raise ModelError(f"negative rate {r} for channel {ch.offspring} at {z}")
            if r > 0:
                out.append((ch, r))
        return out

    def rate(self, x: int, z: Composition, k: Sequence[int]) -> float:
        k = tuple(k)
        return sum(r for ch, r in self.rates(x, z) if ch.offspring == k)

    def total_rate(self, x: int, z: Composition) -> float:
        if z[x] < 1:
            raise DomainError(f"no individual of type {x} in {z}")
        return sum(r for _, r in self.rates(x, z))


def total_rate(kernel: RateKernel, x: int, z: Composition) -> float:
    return kernel.total_rate(x, tuple(z))


# ---------------------------------------------------------------------------
# type assignment laws Q_k


class ExchangeableAssignment:
    """Uniformly random ordering of the offspring multiset."""

    name = "exchangeable"

    def assign(self, k: Sequence[int], uniform: Callable[[], float]) -> tuple:
        types = [y for y, ky in enumerate(k) for _ in range(ky)]
        # Fisher-Yates with the caller's uniform stream
        for i in range(len(types) - 1, 0, -1):
            j = int(uniform() * (i + 1))
            types[i], types[j] = types[j], types[i]
        return tuple(types)

    def __eq__(self, other):
        return type(other) is type(self)

    def __hash__(self):
        return hash(self.name)


class SortedAssignment:
    """Deterministic ordering by type index."""

    name = "sorted"

    def assign(self, k, uniform=None):
        return tuple(y for y, ky in enumerate(k) for _ in range(ky))

    def __eq__(self, other):
        return type(other) is type(self)

    def __hash__(self):
        return hash(self.name)


ASSIGNMENT_LAWS = {"exchangeable": ExchangeableAssignment, "sorted": SortedAssignment}


# ---------------------------------------------------------------------------
# psi functions


class PsiFunction:
    """Positive function of (type, composition).

    Subclasses may set ``exact = True`` and implement :meth:`exact_value`
    returning a :class:`~fractions.Fraction`; the first-moment operator is then
    evaluated in rational arithmetic, which keeps harmonic cases (lambda = 0)
    exactly zero.
    """

    name = "psi"
    exact = False

    def __call__(self, x: int, z: Composition) -> float:
        raise NotImplementedError

    def reciprocal(self, x: int, z: Composition) -> float:
        return 1.0 / self(x, z)

    def exact_value(self, x: int, z: Composition) -> Fraction:
        raise NotImplementedError

    def gradient(self, x: int, z: Sequence[float]) -> list[float] | None:
        """Gradient in the density variable, ``None`` if not available."""
        return None

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class ConstantOne(PsiFunction):
    name = "constant-one"
    exact = True

    def __call__(self, x, z):
        return 1.0

    def reciprocal(self, x, z):
        return 1.0

    def exact_value(self, x, z):
        return Fraction(1)

    def gradient(self, x, z):
        return [0.0] * len(z)

    def __eq__(self, other):
        return type(other) is type(self)

    def __hash__(self):
        return hash(self.name)


class InverseSize(PsiFunction):
    """``1 / ||z||_1``."""

    name = "inverse-size"
    exact = True

    def __call__(self, x, z):
        return 1.0 / sum(z)

    def reciprocal(self, x, z):
        return float(sum(z))

    def exact_value(self, x, z):
        return Fraction(1, sum(z))

    def gradient(self, x, z):
        s = sum(z)
        return [-1.0 / (s * s)] * len(z)

    def __eq__(self, other):
        return type(other) is type(self)

    def __hash__(self):
        return hash(self.name)


class TypeWeights(PsiFunction):
    """``phi(x)``, independent of the composition."""

    exact = False

    def __init__(self, weights: Sequence[float], name: str = "type-weights"):
        if min(weights) <= 0:
            raise ModelError("type weights must be positive")
        self.weights = tuple(float(w) for w in weights)
        self.name = name

    def __call__(self, x, z):
        return self.weights[x]

    def gradient(self, x, z):
        return [0.0] * len(z)


class TabulatedPsi(PsiFunction):
    """Values on an explicit finite set of states ``(x, z)``."""

    def __init__(self, table: dict, name: str = "custom-tabulated"):
        for key, value in table.items():
            if value <= 0:
                raise ModelError(f"psi must be positive, got {value} at {key}")
        self.table = {(int(x), tuple(z)): float(v) for (x, z), v in table.items()}
        self.name = name

    def __call__(self, x, z):
        try:
            return self.table[(x, z)]
        except KeyError:
            raise DomainError(f"psi not tabulated at {(x, z)}") from None


class FunctionPsi(PsiFunction):
    """Wrap a plain callable ``f(x, z) -> float``."""

    def __init__(self, fn: Callable, name: str = "custom", gradient: Callable | None = None):
        self.fn = fn
        self.name = name
        self._gradient = gradient

    def __call__(self, x, z):
        return self.fn(x, z)

    def gradient(self, x, z):
        return None if self._gradient is None else self._gradient(x, z)


# ---------------------------------------------------------------------------
# the first-moment operator


def generator_apply(kernel: RateKernel, f: Callable, x: int, z: Composition, number=float):
    """Apply the first-moment generator to ``f`` at ``(x, z)``.

    Sum of the spine term ``sum_k tau_k(x,z) <k, f(., z+k-e(x))>``, the term
    for the other individuals ``sum_{y,k} tau_k(y,z) (z_y - [y=x]) f(x, z+k-e(y))``
    and the loss term ``-(sum_y tau(y,z) z_y) f(x,z)``.  ``number`` converts
    rates; pass :class:`~fractions.Fraction` together with a rational ``f`` for
    exact evaluation.
    """
    z = tuple(z)
    if z[x] < 1:
        raise DomainError(f"no individual of type {x} in {z}")
    size = sum(z)
    acc = number(0)
    outflow = number(0)
    for ch, r in kernel.rates(x, z, size):
        zp = shifted(z, ch.offspring, x)
        s = number(0)
        for y, ky in enumerate(ch.offspring):
            if ky:
                s += ky * f(y, zp)
        acc += number(r) * s
    for y in range(kernel.n_types):
        if z[y] == 0:
            continue
        others = z[y] - (1 if y == x else 0)
        for ch, r in kernel.rates(y, z, size):
            r = number(r)
            outflow += r * z[y]
            if others:
                acc += r * others * f(x, shifted(z, ch.offspring, y))
    return acc - outflow * f(x, z)


def lambda_of(kernel: RateKernel, psi: PsiFunction, x: int, z: Composition) -> float:
    """``lambda = G psi / psi`` at ``(x, z)``."""
    z = tuple(z)
    if psi.exact:
        g = generator_apply(kernel, psi.exact_value, x, z, number=Fraction)
        return float(g / psi.exact_value(x, z))
    return generator_apply(kernel, psi, x, z) / psi(x, z)


def psi_mass(psi: PsiFunction, v: Composition) -> float:
    """``<v, psi(., v)>``."""
    v = tuple(v)
    if psi.exact:
        return float(sum((vx * psi.exact_value(x, v) for x, vx in enumerate(v) if vx), Fraction(0)))
    return math.fsum(vx * psi(x, v) for x, vx in enumerate(v) if vx)


# ---------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class ModelSpec:
    """Type names, kernel, assignment law and labelled initial population."""

    types: tuple
    kernel: RateKernel
    initial: tuple  # ((label, type), ...)
    assignment: object = field(default_factory=ExchangeableAssignment)

    def __post_init__(self):
        if len(self.types) != self.kernel.n_types:
            raise ModelError("type names do not match kernel dimension")
        if not self.initial:
            raise ModelError("initial population must be nonempty")
        labels = [u for u, _ in self.initial]
        if len(set(labels)) != len(labels) or min(labels) < 1:
            raise ModelError("initial labels must be distinct positive integers")
        for _, x in self.initial:
            if not 0 <= x < len(self.types):
                raise ModelError(f"initial type {x} outside type space")

    @classmethod
    def from_composition(cls, types, kernel, v, assignment=None):
        initial = []
        label = 1
        for x, vx in enumerate(v):
            for _ in range(vx):
                initial.append((label, x))
                label += 1
        kwargs = {} if assignment is None else {"assignment": assignment}
        return cls(tuple(types), kernel, tuple(initial), **kwargs)

    @property
    def n_types(self) -> int:
        return self.kernel.n_types

    @property
    def initial_composition(self) -> Composition:
        v = [0] * self.n_types
        for _, x in self.initial:
            v[x] += 1
        return tuple(v)

    def with_initial(self, v) -> "ModelSpec":
        return ModelSpec.from_composition(self.types, self.kernel, v, self.assignment)

    def with_kernel(self, kernel) -> "ModelSpec":
        return ModelSpec(self.types, kernel, self.initial, self.assignment)


def model_from_config(section: dict) -> ModelSpec:
    """Build a model from the ``model`` section of an experiment config.

    Keys: ``types`` (names), ``rates`` (list of ``{type, offspring, expr}``
    where ``expr`` names a built-in family and its parameters), ``initial``
    (counts per type, as a list or a name->count map), optional ``capacity``
    and ``assignment``.
    """
    try:
        types = [str(t) for t in section["types"]]
        rate_items = section["rates"]
        initial = section["initial"]
    except (KeyError, TypeError) as exc:
        raise ModelError(f"model section missing key {exc}") from None
    index = {name: i for i, name in enumerate(types)}
    channels = []
    for item in rate_items:
        try:
            x = index[str(item["type"])]
        except KeyError:
            raise ModelError(f"rate entry {item!r} names an unknown type") from None
        offspring = tuple(int(a) for a in item["offspring"])
        expr = dict(item["expr"])
        family = expr.pop("family", None)
        if family not in RATE_FAMILIES:
            raise ModelError(f"unknown rate family {family!r}; choose from {sorted(RATE_FAMILIES)}")
        if family == "affine":
            expr["coefs"] = tuple(float(a) for a in expr.get("coefs", ()))
            if len(expr["coefs"]) != len(types):
                raise ModelError("affine coefs must have one entry per type")
        try:
            rate = RATE_FAMILIES[family](**expr)
        except TypeError as exc:
            raise ModelError(f"bad parameters for {family}: {exc}") from None
        channels.append(Channel(x, offspring, rate))
    if isinstance(initial, dict):
        v = [0] * len(types)
        for name, count in initial.items():
            if name not in index:
                raise ModelError(f"initial names unknown type {name!r}")
            v[index[name]] = int(count)
    else:
        v = [int(a) for a in initial]
    if len(v) != len(types) or min(v) < 0 or sum(v) == 0:
        raise ModelError(f"bad initial composition {v}")
    capacity = section.get("capacity")
    kernel = RateKernel(len(types), tuple(channels), None if capacity is None else int(capacity))
    law = section.get("assignment", "exchangeable")
    if law not in ASSIGNMENT_LAWS:
        raise ModelError(f"unknown assignment law {law!r}")
    return ModelSpec.from_composition(types, kernel, v, ASSIGNMENT_LAWS[law]())


def compositions(n_types: int, max_size: int, min_size: int = 0) -> Iterable[Composition]:
    """All compositions with ``min_size <= ||z||_1 <= max_size``, lexicographic."""

    def rec(prefix, remaining, slots):
        if slots == 1:
            for a in range(remaining + 1):
                yield prefix + (a,)
            return
        for a in range(remaining + 1):
            yield from rec(prefix + (a,), remaining - a, slots - 1)

    for z in rec((), max_size, n_types):
        if sum(z) >= min_size:
            yield z


def random_rate(rng: random.Random, n_types: int, scale: float = 1.0) -> Affine:
    return Affine(scale * rng.uniform(0.2, 1.0), tuple(scale * rng.uniform(0.0, 0.3) for _ in range(n_types)))
