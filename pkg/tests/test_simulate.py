from __future__ import annotations

import math
import pickle

import numpy as np
import pytest
from scipy import stats

from spinepop.core import Channel, Constant, ConstantOne, InverseSize, LogisticDeath, ModelSpec, RateKernel, TypeWeights
from spinepop.models import PointMass, logistic
from spinepop.simulate import (
    SimConfig,
    SpineOutcome,
    Status,
    Stream,
    TypeBiasedSampling,
    initial_spine_law,
    run_replicas,
    simulate_mass_decoration,
    simulate_original,
    simulate_spine,
    spine_weight,
)
from spinepop.stats import chi2_two_sample
from spinepop.transform import ModelShape


def single(channels, v=1):
    kernel = RateKernel(1, tuple(Channel(0, (k,), r) for k, r in channels))
    return ModelSpec.from_composition(("x",), kernel, (v,))


def test_stream_reproducible_and_independent():
    a = [Stream(7, 3).uniform() for _ in range(1)]
    s1, s2 = Stream(7, 3), Stream(7, 3)
    xs = [s1.uniform() for _ in range(200)]
    assert xs == [s2.uniform() for _ in range(200)]
    assert a[0] == xs[0]
    other = Stream(7, 4)
    assert xs[:5] != [other.uniform() for _ in range(5)]
    purpose = Stream(7, 3, purpose=1)
    assert xs[:5] != [purpose.uniform() for _ in range(5)]
    assert all(0.0 <= x < 1.0 for x in xs)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(horizon=0)
    with pytest.raises(ValueError):
        SimConfig(horizon=1, max_events=0)
    with pytest.raises(ValueError):
        SimConfig(horizon=1, sample_times=(2.0,))
    assert SimConfig(horizon=1, seed=4).for_replica(9).replica == 9


def test_pure_death_extinction_mean():
    model = single([(0, Constant(1.0))])
    n = 100_000
    times = np.empty(n)
    for i in range(n):
        out = simulate_original(model, SimConfig(horizon=100.0, record_tree=False, seed=1, replica=i))
        assert out.status is Status.EXTINCT
        times[i] = out.time
    assert abs(times.mean() - 1.0) < 0.01
    assert stats.kstest(times[:10_000], "expon").pvalue > 0.001


def test_zero_kernel():
    model = ModelSpec.from_composition(("a", "b"), RateKernel(2, ()), (2, 1))
    out = simulate_original(model, SimConfig(horizon=3.0, seed=0))
    assert out.status is Status.COMPLETED and out.n_events == 0
    assert out.final == (2, 1)
    assert [out.tree.life_length(i) for i in range(3)] == [3.0, 3.0, 3.0]


def test_logistic_never_extinct():
    model = logistic(1.0, 1.0)
    for i in range(10_000):
        out = simulate_original(model, SimConfig(horizon=5.0, record_tree=False, seed=2, replica=i))
        assert out.status is Status.COMPLETED


def test_censoring():
    model = single([(2, Constant(1.0))])
    out = simulate_original(model, SimConfig(horizon=50.0, max_events=10, seed=0))
    assert out.status is Status.CENSORED and out.n_events == 10
    sp = simulate_spine(model, InverseSize(), SimConfig(horizon=50.0, max_events=10, seed=0))
    assert sp.status is Status.CENSORED
    assert spine_weight(sp) == 0.0


def test_holding_time_exponential():
    # from z = 3 the first holding time is Exp(total rate) = Exp(3 * (1 + 2 * 0.5))
    model = logistic(1.0, 0.5, v=3)
    holds = []
    for i in range(10_000):
        out = simulate_original(model, SimConfig(horizon=100.0, max_events=1, seed=5, replica=i))
        holds.append(out.tree.events[0][0])
    assert stats.kstest(holds, "expon", args=(0, 1 / 6.0)).pvalue > 0.01


def test_sample_times_and_path():
    model = logistic(1.0, 0.5, v=2)
    cfg = SimConfig(horizon=3.0, seed=4, sample_times=(0.0, 1.0, 3.0), record_path=True)
    out = simulate_original(model, cfg)
    for s, z in zip(cfg.sample_times, out.samples):
        assert z == out.tree.composition_at(s)
    assert out.path[-1][1] == out.final
    bare = simulate_original(model, SimConfig(horizon=3.0, seed=4, record_tree=False, sample_times=cfg.sample_times))
    assert len(bare.samples) == 3 and bare.samples[0] == (2,)


def test_inverse_size_weight_is_one():
    model = logistic(1.0, 1.0, v=3)
    for i in range(200):
        out = simulate_spine(model, InverseSize(), SimConfig(horizon=2.0, seed=1, replica=i, record_tree=False))
        assert out.lambda_integral == 0.0
        assert spine_weight(out) == 1.0


def test_yule_constant_one_weight():
    b = 0.8
    model = single([(2, Constant(b))])
    for i in range(50):
        out = simulate_spine(model, ConstantOne(), SimConfig(horizon=2.0, seed=1, replica=i))
        assert out.lambda_integral == pytest.approx(b * 2.0, rel=1e-12)
        assert spine_weight(out) == pytest.approx(math.exp(b * 2.0) / out.final[0], rel=1e-12)


def test_initial_spine_law():
    kernel = RateKernel(2, ())
    model = ModelSpec.from_composition(("a", "b"), kernel, (1, 2))
    assert initial_spine_law(model, TypeWeights((2.0, 1.0))) == pytest.approx([0.5, 0.25, 0.25])
    counts = [0, 0, 0]
    for i in range(20_000):
        out = simulate_spine(model, TypeWeights((2.0, 1.0)), SimConfig(horizon=1.0, seed=3, replica=i))
        counts[out.spine_path[0][1][0] - 1] += 1
    assert stats.chisquare(counts, [10_000, 5_000, 5_000]).pvalue > 0.001


def two_type_model():
    kernel = RateKernel(
        2,
        (
            Channel(0, (1, 1), Constant(0.8)),
            Channel(0, (0, 0), Constant(0.2)),
            Channel(1, (0, 2), Constant(0.3)),
            Channel(1, (1, 0), Constant(0.2)),
            Channel(1, (0, 0), LogisticDeath(0.2)),
        ),
    )
    return ModelSpec.from_composition(("a", "b"), kernel, (1, 1))


@pytest.mark.parametrize("psi", [InverseSize(), ConstantOne(), TypeWeights((1.0, 3.0))])
def test_spine_descent_and_alive(psi):
    model = two_type_model()
    for i in range(100):
        out = simulate_spine(model, psi, SimConfig(horizon=3.0, seed=8, replica=i))
        tree = out.tree
        for (s0, l0, _), (s1, l1, y1) in zip(out.spine_path, out.spine_path[1:]):
            assert l1[:-1] == l0 and s1 > s0
            node = tree.index(l1)
            assert tree.types[node] == y1 and tree.birth[node] == s1
        assert tree.end[out.spine_node] == math.inf
        assert tree.label(out.spine_node) == out.spine_label
        assert tree.composition_at(3.0) == out.final


def test_spine_event_frequencies():
    # single-type psi = 1/z from z = 2: first event is a spine birth w.p. (4b/3) / total
    b, c = 1.0, 1.0
    model = logistic(b, c, v=2)
    spine_rate = 4 * b / 3
    nonspine = 2 * b / 3 + 2 * c  # birth and death of the other individual
    n = 100_000
    hits = 0
    for i in range(n):
        out = simulate_spine(model, InverseSize(), SimConfig(horizon=100.0, max_events=1, seed=6, replica=i))
        hits += out.spine_events
    p = spine_rate / (spine_rate + nonspine)
    se = math.sqrt(p * (1 - p) / n)
    assert abs(hits / n - p) < 3 * se


def test_inverse_size_spine_composition_law():
    model = logistic(1.0, 1.0)
    n = 20_000
    for t in (1.0, 5.0):
        a = [simulate_original(model, SimConfig(t, record_tree=False, seed=10, replica=i)).final[0] for i in range(n)]
        b = [simulate_spine(model, InverseSize(), SimConfig(t, record_tree=False, seed=11, replica=i)).final[0] for i in range(n)]
        assert chi2_two_sample(a, b) > 0.001


def test_type_biased_weight():
    model = two_type_model()
    p = TypeBiasedSampling((1.0, 2.0))
    out = simulate_spine(model, InverseSize(), SimConfig(horizon=1.0, seed=2))
    z = out.final
    expected = math.exp(out.lambda_integral) * out.terminal_reciprocal * p.weight(out.spine_type) / (z[0] + 2 * z[1])
    assert spine_weight(out, p) == pytest.approx(expected)


def test_mass_decoration():
    model = logistic(1.0, 1.0)
    r = 0.7
    quiet = simulate_original(single([(2, Constant(1e-300))]), SimConfig(horizon=2.0, seed=0))
    masses = simulate_mass_decoration(quiet, r, PointMass(0.5), Stream(0, 0, 9), zeta0=2.0)
    assert masses.mass(0, 1.5) == pytest.approx(2.0 * math.exp(r * 1.5))
    out = simulate_original(model, SimConfig(horizon=3.0, seed=1))
    masses = simulate_mass_decoration(out, r, PointMass(0.5), Stream(1, 0, 9))
    tree = out.tree
    for s, node, k in tree.events:
        if sum(k):
            parent = masses.birth_mass[node] * math.exp(r * (s - tree.birth[node]))
            first = tree.first_child[node]
            assert masses.birth_mass[first] + masses.birth_mass[first + 1] == pytest.approx(parent, rel=1e-12)
            assert masses.birth_mass[first] == pytest.approx(parent / 2, rel=1e-12)
    sp = simulate_spine(model, InverseSize(), SimConfig(horizon=3.0, seed=1))
    zeta = simulate_mass_decoration(sp, r, PointMass(0.5), Stream(1, 0, 9))
    assert zeta(3.0) == pytest.approx(math.exp(r * 3.0) * 0.5 ** sp.spine_events)
    assert isinstance(sp, SpineOutcome)


def test_mass_decoration_rejects_multitype():
    out = simulate_original(two_type_model(), SimConfig(horizon=1.0, seed=0))
    with pytest.raises(ModelShape):
        simulate_mass_decoration(out, 1.0, PointMass(0.5), Stream(0))


def _final_size(i):
    return simulate_original(logistic(1.0, 0.5), SimConfig(1.0, record_tree=False, seed=3, replica=i)).final


def test_run_replicas_order_independent():
    serial = run_replicas(_final_size, 60, workers=1)
    parallel = run_replicas(_final_size, 60, workers=2, chunk=16)
    assert serial == parallel
    pickle.dumps(SimConfig(1.0))
