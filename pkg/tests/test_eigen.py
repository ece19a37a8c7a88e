from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from spinepop.core import Channel, Constant, LogisticDeath, RateKernel, generator_apply
from spinepop.eigen import (
    CapacityOverflow,
    EigenPsi,
    NotIrreducible,
    ancestral_branch_intensity,
    build_generator_matrix,
    count_states,
    enumerate_states,
    irreducibility_check,
    perron_frobenius,
    solve_model,
    stationary_law,
)
from spinepop.models import random_capacity_model, sir_kernel


def two_state(b=1.0, d=1.0):
    return RateKernel(1, (Channel(0, (2,), Constant(b)), Channel(0, (0,), LogisticDeath(d))), capacity=2)


def test_enumerate_states_examples():
    assert enumerate_states(1, 2).states == ((0, (1,)), (0, (2,)))
    assert enumerate_states(2, 1).states == ((0, (1, 0)), (1, (0, 1)))
    S = enumerate_states(2, 2)
    # pairs (r, v) with v_r >= 1: e(x), 2e(x), e(x)+e(y) for r = x and the mirror for r = y
    assert len(S) == 6 == count_states(2, 2)
    assert len(set(S.states)) == len(S)
    assert list(S.states) == sorted(S.states)


@given(n=st.integers(1, 3), zbar=st.integers(1, 7))
@settings(max_examples=30, deadline=None)
def test_count_states_matches_enumeration(n, zbar):
    assert len(enumerate_states(n, zbar)) == count_states(n, zbar)


def test_capacity_overflow():
    with pytest.raises(CapacityOverflow):
        enumerate_states(4, 40, limit=1000)


def test_two_state_matrix():
    b, d = 1.3, 0.7
    G = build_generator_matrix(two_state(b, d), enumerate_states(1, 2)).toarray()
    assert np.allclose(G, [[-b, 2 * b], [d, -2 * d]], atol=0, rtol=1e-15)


def test_zero_kernel_matrix():
    S = enumerate_states(2, 2)
    G = build_generator_matrix(RateKernel(2, (), capacity=2), S)
    assert G.nnz == 0 or not G.toarray().any()
    assert irreducibility_check(G)[0] is False


def test_matrix_matches_generator_apply():
    model = random_capacity_model(3, n_types=2, zbar=4)
    kernel = model.kernel
    S = enumerate_states(2, 4)
    G = build_generator_matrix(kernel, S).toarray()
    rng = np.random.default_rng(0)
    f = rng.random(len(S)) + 0.1
    for i, (x, z) in enumerate(S.states):
        # interior states see no capacity gate
        if sum(z) + max(ch.size for ch in kernel.channels) - 1 <= 4:
            lhs = G[i] @ f
            rhs = generator_apply(kernel, lambda y, w: f[S.index[(y, w)]], x, z)
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_two_state_triplet():
    trip = solve_model(two_state())
    assert abs(trip.lam) < 1e-10
    assert np.allclose(trip.h, [4 / 3, 2 / 3], atol=1e-10)
    assert np.allclose(trip.gamma, [0.5, 0.5], atol=1e-10)
    assert np.allclose(stationary_law(trip), [2 / 3, 1 / 3], atol=1e-10)
    assert max(trip.residuals) <= 1e-10
    assert ancestral_branch_intensity(trip, (0, (1,)), (2,)) == pytest.approx(2 / 3, abs=1e-10)
    assert ancestral_branch_intensity(trip, (0, (1,)), (0,)) == 0.0
    with pytest.raises(CapacityOverflow):
        ancestral_branch_intensity(trip, (0, (2,)), (2,))


def test_reducible_matrices():
    with pytest.raises(NotIrreducible):
        perron_frobenius(-2.0 * sparse.identity(3))
    ok, witness = irreducibility_check(sparse.csr_matrix(np.array([[-1.0, 1.0], [0.0, -1.0]])))
    assert not ok and witness == (1, 0)


def test_birth_death_chain_irreducible():
    kernel = RateKernel(1, (Channel(0, (2,), Constant(1.0)), Channel(0, (0,), LogisticDeath(0.5))), capacity=6)
    assert irreducibility_check(build_generator_matrix(kernel, enumerate_states(1, 6)))[0]


def test_sir_reducible():
    model = sir_kernel(1.0, 0.5, 4)
    S = enumerate_states(2, 4)
    ok, _ = irreducibility_check(build_generator_matrix(model.kernel, S))
    assert not ok


@pytest.mark.parametrize("seed", range(8))
def test_random_models_against_dense_solver(seed):
    model = random_capacity_model(seed, n_types=2, zbar=6)
    trip = solve_model(model)
    G = build_generator_matrix(model, trip.states).toarray()
    w = np.linalg.eigvals(G)
    assert trip.lam == pytest.approx(float(np.max(w.real)), abs=1e-9)
    assert trip.lam <= 1e-12
    assert max(trip.residuals) <= 1e-10
    assert (trip.h > 0).all() and (trip.gamma > 0).all()
    assert trip.gamma.sum() == pytest.approx(1.0, abs=1e-12)
    assert stationary_law(trip).sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("zbar", [3, 10, 40])
def test_capped_single_type_h_is_inverse_size(zbar):
    kernel = RateKernel(1, (Channel(0, (2,), Constant(1.2)), Channel(0, (0,), LogisticDeath(0.3))), capacity=zbar)
    trip = solve_model(kernel)
    assert abs(trip.lam) < 1e-10
    z = np.array([s[1][0] for s in trip.states.states], dtype=float)
    ratio = trip.h * z
    assert np.allclose(ratio, ratio[0], rtol=1e-9)


def test_eigen_psi_has_constant_lambda():
    from spinepop.core import lambda_of

    model = random_capacity_model(5, n_types=2, zbar=5)
    trip = solve_model(model)
    psi = EigenPsi(trip)
    for x, z in trip.states.states[:40]:
        if sum(z) < 4:
            assert lambda_of(model.kernel, psi, x, z) == pytest.approx(trip.lam, abs=1e-9)


def test_triplet_csv():
    trip = solve_model(two_state())
    lines = trip.to_csv().splitlines()
    assert lines[0] == "state-index,type,composition,h,gamma,pi"
    assert lines[1].startswith("0,0,1,")
    assert len(lines) == 3
    assert math.isclose(float(lines[2].split(",")[-1]), 1 / 3, abs_tol=1e-10)


def test_pure_death_row_sum():
    kernel = RateKernel(1, (Channel(0, (0,), Constant(0.4)),), capacity=3)
    G = build_generator_matrix(kernel, enumerate_states(1, 3)).toarray()
    assert G.sum(axis=1)[0] == pytest.approx(-0.4)
