import numpy as np
import pytest
from scipy import integrate, stats

from lvmc.errors import InvalidInputError
from lvmc.io.corpus import generate_corpus
from lvmc.synthesis import (
    SynthesisModel,
    decompose,
    fit_model,
    sample_cluster_assignments,
    synthesize_pool,
    total_variation,
)


@pytest.fixture(scope="module")
def small_model():
    corpus = generate_corpus(12, 21, seed=4)
    return corpus, fit_model(corpus, n_states=10, seed=0, restarts=3)


def test_single_cluster_assignment():
    assert np.all(sample_cluster_assignments([5], 100, seed=0) == 0)


def test_uniform_dirichlet():
    p0, frac = [], []
    for rep in range(1000):
        p0.append(np.random.default_rng(rep).dirichlet([1.0, 1.0])[0])  # the drawn p, replayed
        frac.append(np.mean(sample_cluster_assignments([1, 1], 10_000, seed=rep) == 0))
    p0, frac = np.array(p0), np.array(frac)
    assert np.max(np.abs(frac - p0)) <= 0.02
    # Dirichlet(1, 1) on the first coordinate is Beta(1, 1) = Uniform(0, 1)
    assert stats.kstest(frac, "uniform").pvalue > 0.01
    assert stats.kstest(stats.beta(1, 1).rvs(1000, random_state=7), "uniform").pvalue > 0.01


def test_dominant_cluster():
    # oracle: P(at least 99 of 100 draws hit cluster 0) with p0 ~ Beta(1e6, 1)
    beta = stats.beta(1e6, 1.0)
    prob, _ = integrate.quad(lambda p: beta.pdf(p) * stats.binom(100, p).sf(98), 0.9999, 1.0, points=[1 - 1e-5])
    assert prob >= 0.99
    hits = [np.sum(sample_cluster_assignments([1_000_000, 1], 100, seed=s) == 0) >= 99 for s in range(1000)]
    assert np.mean(hits) >= 0.99
    draws = sample_cluster_assignments([1_000_000, 1], 1000, seed=3)
    assert np.mean(draws == 0) >= 0.999


def test_assignment_errors():
    with pytest.raises(InvalidInputError):
        sample_cluster_assignments([3, 2], 0)
    with pytest.raises(InvalidInputError):
        sample_cluster_assignments([3, 0], 5)


def test_decompose_identity():
    rng = np.random.default_rng(0)
    net = rng.normal(0.0, 2.0, 480)
    shape = np.clip(np.sin(np.linspace(0, 20 * np.pi, 480)), 0, None)
    demand, pv = decompose(net, 5.0, 0.3, shape)
    np.testing.assert_allclose(demand - pv, net, atol=1e-12)
    assert demand.min() >= 0 and pv.min() >= 0
    assert np.all(pv[net < 0] >= -net[net < 0])


def test_model_invariants(small_model):
    corpus, model = small_model
    assert model.counts.sum() == len(corpus) and np.all(model.counts >= 1)
    for ms in model.chains:
        assert np.all(ms.matrices > 0)
        np.testing.assert_allclose(ms.matrices.sum(axis=-1), 1.0, atol=1e-9)
        np.testing.assert_array_equal(ms.state_edges, model.chains[0].state_edges)


def test_pool_size_and_determinism(small_model):
    _, model = small_model
    a = synthesize_pool(model, 3000, days=1, seed=11)
    assert len(a) == 3000
    b = synthesize_pool(model, 3000, days=1, seed=11)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.demand, y.demand)
        np.testing.assert_array_equal(x.pv, y.pv)
    c = synthesize_pool(model, 20, days=1, seed=12)
    assert not np.array_equal(a[0].demand, c[0].demand)


def test_pool_traces_are_valid(small_model):
    _, model = small_model
    pool = synthesize_pool(model, 50, days=7, seed=1)
    for tr in pool:
        assert len(tr) == 7 * 48
        assert tr.demand.min() >= 0 and tr.pv.min() >= 0
        assert 0 <= tr.assigned_cluster < model.clusters.n_clusters
        lo, hi = model.chains[tr.assigned_cluster].state_edges[[0, -1]]
        assert tr.net.min() >= lo - 1e-9 and tr.net.max() <= hi + 1e-9


def test_save_load_roundtrip(tmp_path, small_model):
    _, model = small_model
    model.save(tmp_path / "model.json")
    back = SynthesisModel.load(tmp_path / "model.json")
    np.testing.assert_array_equal(back.counts, model.counts)
    for x, y in zip(synthesize_pool(back, 5, 2, seed=3), synthesize_pool(model, 5, 2, seed=3)):
        np.testing.assert_array_equal(x.demand, y.demand)


def test_total_variation():
    assert total_variation([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert total_variation([1.0, 0.0], [0.0, 1.0]) == 1.0
