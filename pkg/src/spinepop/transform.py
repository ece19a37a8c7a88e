"""Biased branching rates of the psi-spine construction.

Every biased rate used by the simulators is computed here.  For a spine of
type ``x`` in population ``z``:

* the spine branches with offspring ``k`` at rate
  ``tau_k(x, z) <k, psi(., z - e(x) + k)> / psi(x, z)``;
* any other individual of type ``y`` branches with offspring ``k`` at rate
  ``tau_k(y, z) psi(x, z - e(y) + k) / psi(x, z)``;
* after a spine event, offspring of type ``y`` becomes the spine with
  probability ``psi(y, z') / <k, psi(., z')>`` (then uniformly within type).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core import DomainError, PsiFunction, RateKernel, lambda_of, shifted


class ModelShape(ValueError):
    """The kernel does not have the shape required by a specialised routine."""


def _check(z, x):
    if z[x] < 1:
        raise DomainError(f"no individual of type {x} in {z}")


def psi_pairing(psi: PsiFunction, k, z) -> float:
    """``<k, psi(., z)>``."""
    return math.fsum(ky * psi(y, z) for y, ky in enumerate(k) if ky)


def spine_branch_rate(kernel: RateKernel, psi: PsiFunction, x: int, z, k) -> float:
    z = tuple(z)
    k = tuple(k)
    _check(z, x)
    tau = kernel.rate(x, z, k)
    if tau == 0 or sum(k) == 0:
        return 0.0
    return tau * psi_pairing(psi, k, shifted(z, k, x)) / psi(x, z)


def nonspine_branch_rate(kernel: RateKernel, psi: PsiFunction, y: int, x: int, z, k) -> float:
    z = tuple(z)
    k = tuple(k)
    _check(z, y)
    _check(z, x)
    if x == y and z[x] < 2:
        raise DomainError("no non-spine individual of the spine's type")
    tau = kernel.rate(y, z, k)
    if tau == 0:
        return 0.0
    return tau * psi(x, shifted(z, k, y)) / psi(x, z)


def spine_choice_prob(psi: PsiFunction, y: int, k, z, x: int) -> float:
    """Type-level probability that the new spine has type ``y``."""
    z = tuple(z)
    k = tuple(k)
    if k[y] < 1:
        raise DomainError(f"offspring {k} has no individual of type {y}")
    zp = shifted(z, k, x)
    return k[y] * psi(y, zp) / psi_pairing(psi, k, zp)


def spine_choice_probs(psi: PsiFunction, k, z, x: int) -> list:
    zp = shifted(tuple(z), tuple(k), x)
    w = [ky * psi(y, zp) if ky else 0.0 for y, ky in enumerate(k)]
    s = math.fsum(w)
    return [wi / s for wi in w]


def _single_type(kernel: RateKernel):
    if kernel.n_types != 1:
        raise ModelShape("single-type kernel required")


def xi_minus_one_rates(kernel: RateKernel, z: int, k: int) -> float:
    """Rate of ``z -> z + k - 1`` for ``Xi - 1`` under the psi = 1 spine."""
    _single_type(kernel)
    if z < 0:
        raise ValueError("z must be nonnegative")
    tau = kernel.rate(0, (z + 1,), (k,))
    return (k + z) * tau


def xi_minus_one_kernel(kernel: RateKernel):
    """Jump table ``z -> [(k, rate)]`` for the reduced chain."""
    _single_type(kernel)
    ks = [ch.offspring[0] for ch in kernel.channels]

    def table(z):
        out = []
        for k in sorted(set(ks)):
            if k == 1:
                continue
            r = xi_minus_one_rates(kernel, z, k)
            if r > 0:
                out.append((k, r))
        return out

    return table


def pi_hat(stationary, kernel: RateKernel, k: int) -> float:
    """``k sum_z pi_z tau_k(z) z / (z - 1 + k)`` for a single-type kernel.

    ``stationary`` maps z to pi_z (a dict or a sequence indexed from z = 1).
    """
    _single_type(kernel)
    items = stationary.items() if isinstance(stationary, dict) else enumerate(stationary, 1)
    return k * math.fsum(p * kernel.rate(0, (z,), (k,)) * z / (z - 1 + k) for z, p in items if p)


# ---------------------------------------------------------------------------
# per-state event tables for the spine simulator


@dataclass(frozen=True)
class SpineTable:
    """All biased events available in state ``(x, z)``.

    ``entries`` are ``(cumulative rate, who, channel)`` where ``who`` is -1 for
    the spine and the type of the brancher otherwise.
    """

    total: float
    entries: tuple
    cumulative: tuple
    lam: float


def spine_table(kernel: RateKernel, psi: PsiFunction, x: int, z, rate_factor: float = 1.0) -> SpineTable:
    """Tabulate the biased events and ``lambda(x, z)``.

    ``rate_factor`` multiplies the spine's rates; it exists to corrupt the
    construction on purpose in sensitivity tests and should otherwise be 1.
    """
    z = tuple(z)
    _check(z, x)
    size = sum(z)
    psi_xz = psi(x, z)
    entries = []
    cum = []
    acc = 0.0
    for ch, tau in kernel.rates(x, z, size):
        k = ch.offspring
        if not sum(k):
            continue
        r = rate_factor * tau * psi_pairing(psi, k, shifted(z, k, x)) / psi_xz
        if r > 0:
            acc += r
            entries.append((-1, ch))
            cum.append(acc)
    for y in range(kernel.n_types):
        count = z[y] - (y == x)
        if count <= 0:
            continue
        for ch, tau in kernel.rates(y, z, size):
            r = count * tau * psi(x, shifted(z, ch.offspring, y)) / psi_xz
            if r > 0:
                acc += r
                entries.append((y, ch))
                cum.append(acc)
    return SpineTable(acc, tuple(entries), tuple(cum), lambda_of(kernel, psi, x, z))
