"""Spectral theory of the first-moment generator on a bounded state space.

With a carrying capacity ``zbar`` the pairs ``a = (x, z)`` with ``z_x >= 1``
and ``||z||_1 <= zbar`` form a finite set and the first-moment generator is a
matrix with nonnegative off-diagonal entries.  Its Perron triplet
``(lambda, h, gamma)`` is found by shifted inverse iteration.
"""
from __future__ import annotations

import io
import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .core import ModelSpec, PsiFunction, RateKernel, compositions, shifted


class CapacityOverflow(ValueError):
    """The state space would exceed the configured size limit."""


class NotIrreducible(ValueError):
    """The generator graph is not strongly connected."""


class NoConvergence(RuntimeError):
    """Power iteration did not reach the tolerance."""


DEFAULT_STATE_LIMIT = 200_000


@dataclass(frozen=True)
class StateSpace:
    n_types: int
    zbar: int
    states: tuple  # ((x, z), ...)
    index: dict

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __contains__(self, a):
        return a in self.index


def count_states(n_types: int, zbar: int) -> int:
    # for each size s and each type r: compositions of s - 1 into n_types parts
    return sum(n_types * math.comb(s - 1 + n_types - 1, n_types - 1) for s in range(1, zbar + 1))


def enumerate_states(n_types: int, zbar: int, limit: int = DEFAULT_STATE_LIMIT) -> StateSpace:
    """All ``(x, z)`` with ``z_x >= 1`` and ``||z||_1 <= zbar``, sorted by ``(x, z)``."""
    if zbar < 1:
        raise ValueError("zbar must be >= 1")
    size = count_states(n_types, zbar)
    if size > limit:
        raise CapacityOverflow(
            f"{size} states for {n_types} types and capacity {zbar} exceeds the limit {limit}; "
            "lower the capacity or raise the limit"
        )
    states = []
    for x in range(n_types):
        for z in compositions(n_types, zbar, 1):
            if z[x] >= 1:
                states.append((x, z))
    states.sort()
    return StateSpace(n_types, zbar, tuple(states), {a: i for i, a in enumerate(states)})


def state_space_for(model: ModelSpec | RateKernel, limit: int = DEFAULT_STATE_LIMIT) -> StateSpace:
    kernel = model.kernel if isinstance(model, ModelSpec) else model
    if kernel.capacity is None:
        raise ValueError("the kernel has no carrying capacity")
    return enumerate_states(kernel.n_types, kernel.capacity, limit)


def build_generator_matrix(model: ModelSpec | RateKernel, S: StateSpace) -> sparse.csr_matrix:
    """Sparse matrix of the first-moment generator restricted to ``S``."""
    kernel = model.kernel if isinstance(model, ModelSpec) else model
    zbar = S.zbar
    rows, cols, vals = [], [], []
    index = S.index
    for i, (x, z) in enumerate(S.states):
        size = sum(z)
        diag = 0.0
        for ch, r in kernel.rates(x, z, size):
            k = ch.offspring
            if size + ch.size - 1 > zbar:
                continue
            zp = shifted(z, k, x)
            for y, ky in enumerate(k):
                if ky:
                    rows.append(i)
                    cols.append(index[(y, zp)])
                    vals.append(r * ky)
        for y in range(S.n_types):
            if not z[y]:
                continue
            others = z[y] - (y == x)
            for ch, r in kernel.rates(y, z, size):
                if size + ch.size - 1 > zbar:
                    continue
                diag -= r * z[y]
                if others:
                    rows.append(i)
                    cols.append(index[(x, shifted(z, ch.offspring, y))])
                    vals.append(r * others)
        rows.append(i)
        cols.append(i)
        vals.append(diag)
    n = len(S)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _reach(adj, start, n):
    seen = np.zeros(n, dtype=bool)
    seen[start] = True
    queue = deque([start])
    while queue:
        i = queue.popleft()
        for j in adj.indices[adj.indptr[i] : adj.indptr[i + 1]]:
            if not seen[j]:
                seen[j] = True
                queue.append(j)
    return seen


def irreducibility_check(G) -> tuple:
    """Strong connectivity of the off-diagonal graph of ``G``.

    Returns ``(ok, witness)``; ``witness`` is ``None`` or a pair ``(i, j)``
    of indices such that ``j`` cannot be reached from ``i``.
    """
    G = sparse.csr_matrix(G)
    n = G.shape[0]
    if n == 1:
        return True, None
    off = G - sparse.diags(G.diagonal())
    off.eliminate_zeros()
    off = (off != 0).astype(np.int8).tocsr()
    fwd = _reach(off, 0, n)
    if not fwd.all():
        return False, (0, int(np.flatnonzero(~fwd)[0]))
    bwd = _reach(off.T.tocsr(), 0, n)
    if not bwd.all():
        return False, (int(np.flatnonzero(~bwd)[0]), 0)
    return True, None


@dataclass
class EigenTriplet:
    lam: float
    h: np.ndarray
    gamma: np.ndarray
    residuals: tuple
    iterations: int
    states: StateSpace | None = None
    kernel: RateKernel | None = None

    @property
    def pi(self) -> np.ndarray:
        return self.h * self.gamma

    def h_at(self, x, z) -> float:
        return float(self.h[self.states.index[(x, tuple(z))]])

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("state-index,type,composition,h,gamma,pi\n")
        h, gamma, pi = self.h.tolist(), self.gamma.tolist(), self.pi.tolist()
        for i, (x, z) in enumerate(self.states.states):
            out.write(f"{i},{x},{' '.join(map(str, z))},{h[i]!r},{gamma[i]!r},{pi[i]!r}\n")
        return out.getvalue()


def _inverse_iteration(G, v, tol, max_iter):
    """Perron vector of an irreducible Metzler matrix by shifted inverse iteration.

    For positive ``v`` the ratios ``(G v)_i / v_i`` bracket the Perron root.
    With ``sigma`` above the bracket, ``(sigma I - G)^{-1}`` is a positive
    matrix whose dominant eigenvalue is ``1 / (sigma - lambda)``, so the
    iteration cannot lock onto another eigenvalue; lowering ``sigma`` with
    the bracket makes it converge fast.  Entries below ``1e-9 max(v)`` are
    left out of the bracket since their ratios carry rounding noise.  Stops
    once ``max |G v - rho v| <= tol max(v)`` or when the residual stalls.
    """
    n = G.shape[0]
    scale = max(1.0, float(abs(G).max())) if G.nnz else 1.0
    eye = sparse.identity(n, format="csc")
    Gc = G.tocsc()
    v = v / v.max()
    best = (math.inf, v, 0.0)
    stall = 0
    for it in range(1, max_iter + 1):
        Gv = G @ v
        big = v >= 1e-9
        ratios = Gv[big] / v[big]
        lo, hi = float(ratios.min()), float(ratios.max())
        rho = float(Gv.sum() / v.sum())
        res = float(np.max(np.abs(Gv - rho * v)))
        if res < best[0]:
            best, stall = (res, v, rho), 0
        else:
            stall += 1
        if res <= tol or stall >= 3:
            return best[2], best[1], it
        sigma = max(hi, rho) + max(hi - lo, 1e-13 * scale)
        try:
            w = splu(sigma * eye - Gc).solve(v)
        except RuntimeError:  # numerically singular: the shift sits on lambda
            return best[2], best[1], it
        w = np.abs(w)
        v = w / w.max()
    raise NoConvergence(f"inverse iteration did not converge in {max_iter} iterations")


def perron_frobenius(G, tol: float = 1e-12, max_iter: int = 500, states=None, kernel=None) -> EigenTriplet:
    """Perron triplet of a generator-like matrix.

    Right and left vectors come from shifted inverse iteration on ``G`` and
    ``G^T``; ``lambda`` is their two-sided Rayleigh quotient.  The output
    is normalised so that ``sum(gamma) = 1`` and ``sum(h * gamma) = 1``.
    """
    G = sparse.csr_matrix(G, dtype=float)
    ok, witness = irreducibility_check(G)
    if not ok:
        raise NotIrreducible(f"state {witness[1]} is not reachable from state {witness[0]}")
    n = G.shape[0]
    start = np.ones(n)
    _, h, it_h = _inverse_iteration(G, start, tol, max_iter)
    _, gamma, it_g = _inverse_iteration(G.T.tocsr(), start, tol, max_iter)
    gamma = gamma / gamma.sum()
    h = h / float(h @ gamma)
    # two-sided Rayleigh quotient; sum(h * gamma) = 1
    lam = float(gamma @ (G @ h))
    res_h = float(np.max(np.abs(G @ h - lam * h)))
    res_g = float(np.max(np.abs(G.T @ gamma - lam * gamma)))
    return EigenTriplet(lam, h, gamma, (res_h, res_g), max(it_h, it_g), states, kernel)


def solve_model(model: ModelSpec | RateKernel, tol: float = 1e-12, limit: int = DEFAULT_STATE_LIMIT) -> EigenTriplet:
    kernel = model.kernel if isinstance(model, ModelSpec) else model
    S = state_space_for(kernel, limit)
    return perron_frobenius(build_generator_matrix(kernel, S), tol, states=S, kernel=kernel)


def stationary_law(trip: EigenTriplet) -> np.ndarray:
    return trip.h * trip.gamma


def ancestral_branch_intensity(trip: EigenTriplet, a, k) -> float:
    """``gamma_a tau_k(a) <k, h(., z + k - e(x))>``: long-run rate of ancestral branchings."""
    x, z = a
    z = tuple(z)
    k = tuple(k)
    S = trip.states
    if sum(z) + sum(k) - 1 > S.zbar:
        raise CapacityOverflow("offspring would exceed the carrying capacity")
    tau = trip.kernel.rate(x, z, k)
    if tau == 0:
        return 0.0
    zp = shifted(z, k, x)
    pairing = sum(ky * trip.h_at(y, zp) for y, ky in enumerate(k) if ky)
    return float(trip.gamma[S.index[(x, z)]] * tau * pairing)


class EigenPsi(PsiFunction):
    """The eigenfunction ``h`` as a psi-function on the bounded state space."""

    name = "eigen-h"

    def __init__(self, trip: EigenTriplet):
        self.trip = trip
        self._index = trip.states.index
        self._h = trip.h.tolist()

    def __call__(self, x, z):
        return self._h[self._index[(x, z)]]

