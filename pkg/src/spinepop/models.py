"""Model library: logistic birth-death, growth-fragmentation, SIR, random
capacity models, a slowly converging supercritical model and the large
population limit with its time-inhomogeneous spine.
"""
from __future__ import annotations

import enum
import io
import math
import random
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .core import (
    Affine,
    Channel,
    Constant,
    ConstantOne,
    DecayingPerturbation,
    InverseSize,
    LogisticDeath,
    ModelSpec,
    PsiFunction,
    RateKernel,
    Scaled,
    random_rate,
)
from .eigen import NotIrreducible, perron_frobenius
from .genealogy import GenealogyTree, child_label
from .simulate import SimConfig, Status, Stream, simulate_mass_decoration, simulate_spine
from .transform import pi_hat


class Inconclusive(RuntimeError):
    """The estimated slope is too close to zero to decide the phase."""


class PositivityLoss(RuntimeError):
    """A coordinate of the limiting ODE fell below the positivity floor."""

    def __init__(self, message, time, trajectory=None):
        super().__init__(message)
        self.time = time
        self.trajectory = trajectory


class NoNullVector(RuntimeError):
    """The growth matrix at the proposed equilibrium has no null vector."""


class MajorantExceeded(RuntimeError):
    """A thinning majorant was below the true rate (internal defect)."""


# ---------------------------------------------------------------------------
# single-type models


def logistic(b: float, c: float, v: int = 1, capacity: int | None = None) -> ModelSpec:
    """Birth at rate ``b``, death at rate ``c (z - 1)``."""
    if not (b > 0 and c > 0):
        raise ValueError("b and c must be positive")
    kernel = RateKernel(1, (Channel(0, (2,), Constant(b)), Channel(0, (0,), LogisticDeath(c))), capacity)
    return ModelSpec.from_composition(("x",), kernel, (v,))


def logistic_stationary(b: float, c: float, zmax: int | None = None, tail: float = 1e-14) -> np.ndarray:
    """``pi_z = (b/c)^z / (z! (e^{b/c} - 1))`` for ``z = 1..zmax`` (index ``z - 1``).

    Without ``zmax`` the support is cut where the remaining mass is below
    ``tail``; the result is renormalised.
    """
    rho = b / c
    log_norm = rho + math.log(-math.expm1(-rho))  # log(e^rho - 1)
    if zmax is None:
        zmax = 1
        mass = 0.0
        while True:
            mass += math.exp(zmax * math.log(rho) - math.lgamma(zmax + 1) - log_norm)
            if 1.0 - mass < tail and zmax > rho:
                break
            zmax += 1
    z = np.arange(1, zmax + 1)
    logp = z * math.log(rho) - special.gammaln(z + 1) - log_norm
    p = np.exp(logp)
    return p / p.sum()


# fraction laws -----------------------------------------------------------


@dataclass(frozen=True)
class PointMass:
    value: float = 0.5

    def __post_init__(self):
        if not 0 < self.value < 1:
            raise ValueError("fraction must lie in (0, 1)")

    def sample(self, rng: Stream) -> float:
        return self.value

    def mean_log_inverse(self) -> float:
        return -math.log(self.value)


@dataclass(frozen=True)
class UniformFraction:
    def sample(self, rng: Stream) -> float:
        u = rng.uniform()
        return u if u > 0 else 0.5

    def mean_log_inverse(self) -> float:
        return 1.0


@dataclass(frozen=True)
class BetaSymmetric:
    alpha: float

    def sample(self, rng: Stream) -> float:
        return float(rng.generator.beta(self.alpha, self.alpha))

    def mean_log_inverse(self) -> float:
        return float(special.digamma(2 * self.alpha) - special.digamma(self.alpha))


@dataclass(frozen=True)
class DensityFraction:
    """Fraction law given by a density on (0, 1) and a sampler."""

    density: object
    sampler: object

    def sample(self, rng: Stream) -> float:
        return float(self.sampler(rng))

    def mean_log_inverse(self) -> float:
        val, _ = integrate.quad(lambda f: -math.log(f) * self.density(f), 0.0, 1.0, epsabs=1e-10, epsrel=1e-10)
        return val


def mean_log_inverse(law) -> float:
    return law.mean_log_inverse()


@dataclass(frozen=True)
class GrowthFragmentation:
    """Cells divide at rate ``b`` and die at rate ``c (z - 1)``; masses grow at rate ``r``."""

    b: float
    c: float
    fraction: object = field(default_factory=PointMass)

    def model(self, v: int = 1) -> ModelSpec:
        return logistic(self.b, self.c, v)

    def pi_hat(self) -> float:
        kernel = self.model().kernel
        return pi_hat(logistic_stationary(self.b, self.c), kernel, 2)


def gf_threshold(b: float, c: float, fraction) -> float:
    """``2b (1 - c/b + 1/(e^{b/c} - 1)) E log(1/F)``."""
    rho = b / c
    tail = 1.0 / math.expm1(rho) if rho < 700.0 else 0.0
    return 2.0 * b * (1.0 - c / b + tail) * fraction.mean_log_inverse()


class Phase(enum.Enum):
    REGULATED = "Regulated"
    GROWING = "Growing"


@dataclass(frozen=True)
class PhaseResult:
    phase: Phase
    slope: float
    stderr: float
    theory: float
    threshold: float


def classify_phase(
    gf: GrowthFragmentation,
    r: float,
    T: float = 200.0,
    n_paths: int = 64,
    seed: int = 0,
    margin: float = 0.02,
    max_events: int = 10**6,
) -> PhaseResult:
    """Sign of the growth rate of the mass along the 1/z-spine.

    Averages ``log(zeta*(T)) / T`` over ``n_paths`` independent spine paths
    started from one cell of unit mass.
    """
    model = gf.model(1)
    psi = InverseSize()
    slopes = []
    for i in range(n_paths):
        cfg = SimConfig(T, max_events=max_events, record_tree=False, seed=seed, replica=i)
        out = simulate_spine(model, psi, cfg)
        if out.status is Status.CENSORED:
            raise RuntimeError("spine path censored; raise max_events")
        zeta = simulate_mass_decoration(out, r, gf.fraction, Stream(seed, i, purpose=1))
        slopes.append(math.log(zeta(T)) / T)
    slopes = np.array(slopes)
    slope = float(slopes.mean())
    se = float(slopes.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else math.nan
    threshold = gf_threshold(gf.b, gf.c, gf.fraction)
    theory = r - gf.fraction.mean_log_inverse() * gf.pi_hat()
    if abs(slope) < margin:
        raise Inconclusive(f"slope {slope:.4g} within margin {margin}")
    return PhaseResult(Phase.REGULATED if slope < 0 else Phase.GROWING, slope, se, theory, threshold)


def phase_sweep_csv(rows) -> str:
    out = io.StringIO()
    out.write("b,c,r,threshold,slope_estimate,classification\n")
    for b, c, r, thr, slope, cls in rows:
        out.write(f"{float(b)!r},{float(c)!r},{float(r)!r},{float(thr)!r},{float(slope)!r},{cls}\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# multitype models


def sir_kernel(beta: float, gamma: float, N: int, infected: int = 1) -> ModelSpec:
    """Infection ``i -> 2 i`` at rate ``beta (N - z_i - z_r)``, recovery ``i -> r`` at ``gamma``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    channels = (
        Channel(0, (2, 0), Affine(beta * N, (-beta, -beta))),
        Channel(0, (0, 1), Constant(gamma)),
    )
    return ModelSpec.from_composition(("i", "r"), RateKernel(2, channels, N), (infected, 0))


def random_capacity_model(seed: int, n_types: int = 2, zbar: int = 5, scale: float = 1.0) -> ModelSpec:
    """Irreducible capacity-bounded model with random affine rates.

    Each type gives birth to its own type, migrates cyclically and dies at a
    rate proportional to ``||z||_1 - 1`` (so the population never vanishes).
    """
    rng = random.Random(seed)
    channels = []
    for x in range(n_types):
        own = tuple(2 if y == x else 0 for y in range(n_types))
        channels.append(Channel(x, own, random_rate(rng, n_types, scale)))
        channels.append(Channel(x, (0,) * n_types, LogisticDeath(scale * rng.uniform(0.2, 1.0))))
        if n_types > 1:
            y = (x + 1) % n_types
            move = tuple(1 if w == y else 0 for w in range(n_types))
            channels.append(Channel(x, move, Constant(scale * rng.uniform(0.2, 1.0))))
    kernel = RateKernel(n_types, tuple(channels), zbar)
    v = [0] * n_types
    v[0] = 1
    names = tuple(f"t{x}" for x in range(n_types))
    return ModelSpec.from_composition(names, kernel, tuple(v))


def decaying_birth_model(birth: float = 0.3, delta: float = 0.1, death: float = 0.1, v: int = 1) -> ModelSpec:
    """Binary branching with ``lambda(z) = birth - death + delta / (1 + log(1 + z))^2``."""
    kernel = RateKernel(
        1,
        (Channel(0, (2,), DecayingPerturbation(birth, delta)), Channel(0, (0,), Constant(death))),
    )
    return ModelSpec.from_composition(("x",), kernel, (v,))


# ---------------------------------------------------------------------------
# large population limit


@dataclass(frozen=True)
class LargeNModel:
    """Rates ``tau_k(x, z)`` as functions of the density vector ``z``."""

    types: tuple
    channels: tuple  # Channel with density-rate callables
    v: tuple

    @property
    def n_types(self) -> int:
        return len(self.types)

    def density_kernel(self) -> RateKernel:
        return RateKernel(self.n_types, self.channels)

    def scaled(self, N: int) -> ModelSpec:
        """The population model ``tau_k(x, z / N)`` started from ``round(N v)``."""
        channels = tuple(Channel(ch.type, ch.offspring, Scaled(ch.rate, N)) for ch in self.channels)
        v = tuple(int(round(N * vx)) for vx in self.v)
        return ModelSpec.from_composition(self.types, RateKernel(self.n_types, channels), v)


def logistic_large_n(b: float = 1.0, c: float = 1.0, v: float = 0.2) -> LargeNModel:
    channels = (Channel(0, (2,), Constant(b)), Channel(0, (0,), Affine(0.0, (c,))))
    return LargeNModel(("x",), channels, (v,))


def growth_matrix(model: LargeNModel, z) -> np.ndarray:
    """``A_{x,y}(z) = sum_k tau_k(x, z) k_y - [x = y] tau(x, z)``."""
    d = model.n_types
    z = tuple(float(a) for a in z)
    A = np.zeros((d, d))
    for ch in model.channels:
        r = ch.rate(z)
        if r:
            A[ch.type] += r * np.asarray(ch.offspring, dtype=float)
            A[ch.type, ch.type] -= r
    return A


def vector_field(model: LargeNModel, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return z @ growth_matrix(model, z)


@dataclass
class Trajectory:
    """RK4 solution on a uniform grid with cubic Hermite dense output."""

    t: np.ndarray
    z: np.ndarray  # shape (n, d)
    dz: np.ndarray
    halving_error: float = math.nan

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        scalar = s.ndim == 0
        s = np.atleast_1d(s)
        h = self.t[1] - self.t[0]
        i = np.clip(((s - self.t[0]) / h).astype(int), 0, len(self.t) - 2)
        u = ((s - self.t[i]) / h)[:, None]
        h00 = 2 * u**3 - 3 * u**2 + 1
        h10 = u**3 - 2 * u**2 + u
        h01 = -2 * u**3 + 3 * u**2
        h11 = u**3 - u**2
        out = h00 * self.z[i] + h10 * h * self.dz[i] + h01 * self.z[i + 1] + h11 * h * self.dz[i + 1]
        return out[0] if scalar else out

    @property
    def end(self) -> np.ndarray:
        return self.z[-1]


def _rk4(model, v, T, dt, floor):
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be a positive multiple of dt")
    f = lambda z: vector_field(model, z)
    z = np.array(v, dtype=float)
    zs = [z.copy()]
    dzs = [f(z)]
    for i in range(n):
        k1 = dzs[-1]
        k2 = f(z + 0.5 * dt * k1)
        k3 = f(z + 0.5 * dt * k2)
        k4 = f(z + dt * k3)
        z = z + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        zs.append(z.copy())
        dzs.append(f(z))
        if z.min() < floor:
            raise PositivityLoss(f"coordinate below {floor} at t={(i + 1) * dt:.6g}", (i + 1) * dt)
    return np.linspace(0.0, n * dt, n + 1), np.array(zs), np.array(dzs)


def ode_solve(model: LargeNModel, v=None, T: float = 1.0, dt: float = 1e-2, floor: float = 1e-9) -> Trajectory:
    """Integrate ``z' = z A(z)`` with classical RK4 and report the step-halving drift."""
    v = model.v if v is None else v
    if min(v) <= 0:
        raise ValueError("initial density must be positive")
    t, z, dz = _rk4(model, v, T, dt, floor)
    _, z2, _ = _rk4(model, v, T, dt / 2, floor)
    return Trajectory(t, z, dz, float(np.max(np.abs(z2[-1] - z[-1]))))


def trajectory_csv(traj: Trajectory) -> str:
    out = io.StringIO()
    d = traj.z.shape[1]
    out.write("t," + ",".join(f"z_{i + 1}" for i in range(d)) + "\n")
    for s, row in zip(traj.t, traj.z):
        out.write(f"{float(s)!r}," + ",".join(repr(float(a)) for a in row) + "\n")
    return out.getvalue()


def scaled_path_error(path, N: int, traj: Trajectory, T: float) -> float:
    """``sup_{t <= T} ||Z(t)/N - z(t)||_1`` for a piecewise-constant path.

    The supremum is taken over both one-sided limits at every jump time and
    at ``T``.
    """
    times = np.array([p[0] for p in path] + [T])
    Z = np.array([p[1] for p in path], dtype=float) / N
    zt = traj(times)
    right = np.abs(Z - zt[:-1]).sum(axis=1)
    left = np.abs(Z - zt[1:]).sum(axis=1)
    return float(max(right.max(), left.max()))


# psi and lambda in the limit --------------------------------------------


def _psi_gradient(psi: PsiFunction, x, z, h=1e-6):
    g = psi.gradient(x, tuple(z))
    if g is not None:
        return np.asarray(g, dtype=float)
    z = np.asarray(z, dtype=float)
    out = np.empty(len(z))
    for i in range(len(z)):
        e = np.zeros(len(z))
        e[i] = h * max(1.0, abs(z[i]))
        out[i] = (psi(x, tuple(z + e)) - psi(x, tuple(z - e))) / (2 * e[i])
    return out


def limit_lambda(model: LargeNModel, psi: PsiFunction, x: int, z) -> float:
    """``(sum_k tau_k(x,z) <k - e(x), psi(., z)> + grad psi_x . z A(z)) / psi(x, z)``."""
    z = tuple(float(a) for a in z)
    px = psi(x, z)
    acc = 0.0
    for ch in model.channels:
        if ch.type != x:
            continue
        r = ch.rate(z)
        if r:
            acc += r * (sum(ky * psi(y, z) for y, ky in enumerate(ch.offspring) if ky) - px)
    acc += float(_psi_gradient(psi, x, z) @ vector_field(model, z))
    return acc / px


@dataclass(frozen=True)
class LimitRates:
    spine: dict
    nonspine: dict


def limit_spine_rates(model: LargeNModel, psi: PsiFunction, x: int, t: float, traj: Trajectory) -> LimitRates:
    """Branching rates at time ``t`` of a spine of type ``x`` and of any other type-``x`` individual."""
    z = tuple(float(a) for a in traj(t))
    px = psi(x, z)
    spine = {}
    nonspine = {}
    for ch in model.channels:
        if ch.type != x:
            continue
        r = ch.rate(z)
        k = ch.offspring
        nonspine[k] = nonspine.get(k, 0.0) + r
        pair = sum(ky * psi(y, z) for y, ky in enumerate(k) if ky)
        spine[k] = spine.get(k, 0.0) + r * pair / px
    return LimitRates(spine, nonspine)


@dataclass
class LimitSpineOutcome:
    tree: GenealogyTree
    spine_path: list  # [(time, label, type)]
    lambda_integral: float
    terminal_psi: float
    terminal_size: float  # ||z(T)||_1
    time: float

    @property
    def spine_type(self):
        return self.spine_path[-1][2]

    @property
    def spine_label(self):
        return self.spine_path[-1][1]

    def weight(self) -> float:
        return math.exp(self.lambda_integral) / (self.terminal_psi * self.terminal_size)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)


def _integrate_lambda(model, psi, x, a, b, traj):
    if b <= a:
        return 0.0
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    zs = traj(mid + half * _GL_NODES)
    return half * float(sum(w * limit_lambda(model, psi, x, z) for w, z in zip(_GL_WEIGHTS, zs)))


class _LimitTables:
    """Per-trajectory quantities shared by every limit-spine replica.

    Rates are tabulated on the ODE grid and ``int lambda(x, z(s)) ds`` is
    accumulated cell by cell, so a replica only integrates the partial cells
    cut by its own spine events.
    """

    def __init__(self, model, psi, traj):
        self.model, self.psi, self.traj = model, psi, traj
        d = model.n_types
        self.by_type = [[ch for ch in model.channels if ch.type == y] for y in range(d)]
        grid = traj.t
        zs = [tuple(float(q) for q in row) for row in traj.z]
        self.spine_total = np.array([[sum(r for _, r in self.spine_rates(x, z)) for z in zs] for x in range(d)])
        self.type_total = np.array([[sum(ch.rate(z) for ch in self.by_type[y]) for z in zs] for y in range(d)])
        self.cum_lambda = np.zeros((d, len(grid)))
        for x in range(d):
            for i in range(len(grid) - 1):
                self.cum_lambda[x, i + 1] = self.cum_lambda[x, i] + _integrate_lambda(model, psi, x, grid[i], grid[i + 1], traj)

    def spine_rates(self, y, zt):
        psi = self.psi
        py = psi(y, zt)
        return [(ch, ch.rate(zt) * sum(ky * psi(c, zt) for c, ky in enumerate(ch.offspring) if ky) / py) for ch in self.by_type[y]]

    def lambda_to(self, x, t):
        """``int_0^t lambda(x, z(s)) ds``."""
        grid = self.traj.t
        i = min(int(np.searchsorted(grid, t, side="right")) - 1, len(grid) - 1)
        if grid[i] == t:
            return float(self.cum_lambda[x, i])
        return float(self.cum_lambda[x, i]) + _integrate_lambda(self.model, self.psi, x, grid[i], t, self.traj)


def _limit_tables(model, psi, traj) -> _LimitTables:
    cache = traj.__dict__.setdefault("_limit_tables", [])
    for tab in cache:
        if tab.model == model and tab.psi == psi:
            return tab
    tab = _LimitTables(model, psi, traj)
    cache.append(tab)
    return tab


def simulate_limit_spine(
    model: LargeNModel,
    psi: PsiFunction,
    traj: Trajectory,
    T: float,
    rng: Stream,
    max_events: int = 10**6,
    slack: float = 1.1,
    block: int = 10,
) -> LimitSpineOutcome:
    """Branching process in the deterministic environment ``z(t)`` with one spine.

    Events are generated by thinning against a piecewise-constant majorant:
    on each block of ``block`` ODE steps the bound is ``slack`` times the
    largest rate at the block's grid points.  The root has label (1,) and a
    type drawn with probability proportional to ``v_x psi(x, v)``.
    """
    d = model.n_types
    grid = traj.t
    if T > grid[-1] + 1e-12:
        raise ValueError("trajectory shorter than the horizon")
    tab = _limit_tables(model, psi, traj)
    v = tuple(float(a) for a in traj.z[0])
    w = [v[x] * psi(x, v) for x in range(d)]
    u = rng.uniform() * sum(w)
    x = 0
    acc = w[0]
    while u >= acc and x < d - 1:
        x += 1
        acc += w[x]
    tree = GenealogyTree(d, ((1, x),))
    alive = [[] for _ in range(d)]
    spine_node = 0
    label = (1,)
    path = [(0.0, label, x)]
    counts = [0] * d  # non-spine individuals per type
    lam_int = 0.0
    lam_from = 0.0  # lambda is integrated lazily from here for the current spine type
    t = 0.0
    n = 0
    by_type = tab.by_type
    n_cells = len(grid) - 1
    cell = 0
    while t < T:
        hi = min(cell + block, n_cells)
        b = min(grid[hi], T)
        if t >= b:
            cell = hi
            continue
        m_spine = slack * float(tab.spine_total[x, cell : hi + 1].max()) + 1e-12
        m_type = [slack * float(tab.type_total[y, cell : hi + 1].max()) + 1e-12 for y in range(d)]
        while True:
            total = m_spine + sum(m_type[y] * counts[y] for y in range(d))
            s = t - math.log1p(-rng.uniform()) / total if total > 0 else math.inf
            if s >= b:
                t = b
                cell = hi
                break
            t = s
            zt = tuple(float(q) for q in traj(t))
            target = rng.uniform() * total
            if target < m_spine:
                rates = tab.spine_rates(x, zt)
                if sum(r for _, r in rates) > m_spine:
                    raise MajorantExceeded(f"spine rate above majorant at t={t}")
                ch = _pick(rates, target)
                if ch is None:
                    continue  # rejected
                n += 1
                lam_int += tab.lambda_to(x, t) - tab.lambda_to(x, lam_from)
                lam_from = t
                kids = [c for c, kc in enumerate(ch.offspring) for _ in range(kc)]
                rng_perm(kids, rng)
                probs = [ky * psi(c, zt) for c, ky in enumerate(ch.offspring)]
                new_type = _pick_index(probs, rng.uniform() * sum(probs))
                positions = [i for i, c in enumerate(kids) if c == new_type]
                pos = positions[min(int(rng.uniform() * len(positions)), len(positions) - 1)]
                first = tree.branch(spine_node, t, ch.offspring, kids)
                for off, c in enumerate(kids):
                    if off != pos:
                        alive[c].append(first + off)
                        counts[c] += 1
                spine_node = first + pos
                label = child_label(label, pos + 1)
                x = new_type
                path.append((t, label, x))
                break  # majorants depend on the spine type
            target -= m_spine
            y = 0
            while y < d - 1 and target >= m_type[y] * counts[y]:
                target -= m_type[y] * counts[y]
                y += 1
            i = min(int(target / m_type[y]), counts[y] - 1)
            inner = target - i * m_type[y]
            rates = [(ch, ch.rate(zt)) for ch in by_type[y]]
            if sum(r for _, r in rates) > m_type[y]:
                raise MajorantExceeded(f"rate of type {y} above majorant at t={t}")
            ch = _pick(rates, inner)
            if ch is None:
                continue
            n += 1
            node = alive[y][i]
            alive[y][i] = alive[y][-1]
            alive[y].pop()
            counts[y] -= 1
            kids = [c for c, kc in enumerate(ch.offspring) for _ in range(kc)]
            rng_perm(kids, rng)
            first = tree.branch(node, t, ch.offspring, kids)
            for off, c in enumerate(kids):
                alive[c].append(first + off)
                counts[c] += 1
            if n >= max_events:
                raise RuntimeError("event budget exhausted in the limit spine simulator")
    lam_int += tab.lambda_to(x, T) - tab.lambda_to(x, lam_from)
    tree.horizon = T
    zT = tuple(float(q) for q in traj(T))
    return LimitSpineOutcome(tree, path, lam_int, psi(x, zT), float(sum(zT)), T)


def _pick(rates, target):
    for ch, r in rates:
        if target < r:
            return ch
        target -= r
    return None


def _pick_index(weights, target):
    for i, w in enumerate(weights):
        if target < w:
            return i
        target -= w
    return max(i for i, w in enumerate(weights) if w > 0)


def rng_perm(items, rng):
    for i in range(len(items) - 1, 0, -1):
        j = int(rng.uniform() * (i + 1))
        items[i], items[j] = items[j], items[i]


def equilibrium_reproductive_value(A, zstar=None, tol: float = 1e-9) -> np.ndarray:
    """Positive ``phi`` with ``A(z*) phi = 0`` and ``sum(phi) = 1``.

    ``A`` is the growth matrix at the equilibrium ``zstar``; its off-diagonal
    entries are nonnegative, so ``phi`` is its Perron vector for eigenvalue 0.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    scale = max(1.0, float(np.max(np.abs(A))))
    if zstar is not None:
        drift = np.asarray(zstar, dtype=float) @ A
        if np.max(np.abs(drift)) > tol * scale * max(1.0, float(np.max(zstar))):
            raise NoNullVector("zstar is not an equilibrium of the limiting ODE")
    if A.shape == (1, 1):
        if abs(A[0, 0]) > tol * scale:
            raise NoNullVector("growth rate at equilibrium is not zero")
        return np.ones(1)
    trip = perron_frobenius(A, tol=min(1e-12, tol))
    if abs(trip.lam) > tol * scale:
        raise NoNullVector(f"Perron root {trip.lam:.3g} of A(z*) is not zero")
    return trip.h / trip.h.sum()


__all__ = [
    "BetaSymmetric",
    "ConstantOne",
    "DensityFraction",
    "GrowthFragmentation",
    "Inconclusive",
    "LargeNModel",
    "MajorantExceeded",
    "NoNullVector",
    "NotIrreducible",
    "Phase",
    "PointMass",
    "PositivityLoss",
    "UniformFraction",
    "classify_phase",
    "decaying_birth_model",
    "equilibrium_reproductive_value",
    "gf_threshold",
    "growth_matrix",
    "limit_lambda",
    "limit_spine_rates",
    "logistic",
    "logistic_large_n",
    "logistic_stationary",
    "ode_solve",
    "random_capacity_model",
    "scaled_path_error",
    "simulate_limit_spine",
    "sir_kernel",
]
