import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from dpmrpf.dpm import (
    Cluster,
    DPMModel,
    NoOutlierModelError,
    allocate,
    crp_allocate,
    crp_cluster_weights,
    drop_empty_clusters,
    gibbs_refine,
    gibbs_sweep,
    niw_posterior,
    predictive_mixture,
    spawn_cluster,
)
from dpmrpf.kernels import GaussianParams, NIWParams, SeedStream, is_spd
from oracles import enumerate_z_joint, enumerate_z_posterior, niw_from_raw_sums, random_spd

BASE = NIWParams([21.0], 1.0, 10.0, [[5.0]])


def fixed_model(means, variances, pts, z, alpha=1.0):
    clusters = [Cluster(k + 1, 0, GaussianParams([m], [[v]])) for k, (m, v) in enumerate(zip(means, variances))]
    model = DPMModel(alpha, BASE, clusters)
    for o, k in zip(pts, z):
        allocate(model, [o], k + 1)
    return model


# -- conjugate update ----------------------------------------------------------

def test_posterior_without_data_is_prior():
    post = niw_posterior(BASE, [])
    assert_array_equal(post.mu0, BASE.mu0)
    assert (post.rho, post.kappa) == (BASE.rho, BASE.kappa)
    assert_array_equal(post.W, BASE.W)


@pytest.mark.parametrize("o", [20.0, 21.0, 23.5])
def test_posterior_single_point(o):
    post = niw_posterior(BASE, [[o]])
    assert_allclose(post.mu0, [(21 + o) / 2], rtol=1e-15)
    assert post.rho == 2.0 and post.kappa == 11.0
    assert_allclose(post.W, [[5 + 0.5 * (o - 21) ** 2]], rtol=1e-14)


def test_posterior_two_points_hand_value():
    post = niw_posterior(BASE, [[20.0], [22.0]])
    assert_allclose(post.mu0, [21.0])
    assert post.rho == 3.0 and post.kappa == 12.0
    assert_allclose(post.W, [[7.0]], rtol=1e-14)


def test_posterior_dimension_mismatch():
    with pytest.raises(ValueError):
        niw_posterior(BASE, np.zeros((3, 2)))


@pytest.mark.parametrize("d", [1, 2])
def test_posterior_matches_raw_sums(d):
    rng = np.random.default_rng(40 + d)
    worst = 0.0
    for _ in range(1000):
        mu0 = rng.normal(scale=20, size=d)
        W = random_spd(rng, d, scale=rng.uniform(0.1, 10))
        rho, kappa = rng.uniform(0.1, 5), d - 1 + rng.uniform(0.5, 20)
        n = rng.integers(1, 50)
        obs = mu0 + rng.normal(scale=rng.uniform(0.1, 5), size=(n, d))
        post = niw_posterior(NIWParams(mu0, rho, kappa, W), obs)
        mu_r, rho_r, kappa_r, W_r = niw_from_raw_sums(mu0, rho, kappa, W, obs)
        for got, ref in [(post.mu0, mu_r), (post.W, W_r), (post.rho, rho_r), (post.kappa, kappa_r)]:
            ref = np.asarray(ref)
            worst = max(worst, float(np.max(np.abs(got - ref)) / np.max(np.abs(ref))))
    assert worst < 1e-10


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 30), d=st.integers(1, 2))
def test_sequential_updates_equal_batch(seed, n, d):
    rng = np.random.default_rng(seed)
    base = NIWParams(rng.normal(size=d) * 5, rng.uniform(0.1, 3), d + 1.0, random_spd(rng, d))
    obs = rng.normal(scale=3, size=(n, d))
    seq = base
    for o in rng.permutation(obs):
        seq = niw_posterior(seq, o[None, :])
    batch = niw_posterior(base, obs)
    assert_allclose(seq.mu0, batch.mu0, rtol=1e-10, atol=1e-10)
    assert_allclose(seq.W, batch.W, rtol=1e-10)
    assert_allclose([seq.rho, seq.kappa], [batch.rho, batch.kappa], rtol=1e-12)


# -- CRP weights and allocation ----------------------------------------------

def test_crp_weights_empty_model():
    assert_array_equal(crp_cluster_weights(DPMModel(1.0, BASE)), [1.0])


def test_crp_weights_counts():
    model = fixed_model([20.0, 22.0], [0.1, 0.1], [20.0, 20.1, 19.9, 22.0], [0, 0, 0, 1])
    w = crp_cluster_weights(model)
    assert_array_equal(w, [3, 1, 1])
    assert_allclose(w / w.sum(), [0.6, 0.2, 0.2])
    allocate(model, [20.0], 1)
    assert_array_equal(crp_cluster_weights(model), [4, 1, 1])


def test_spawn_cluster_is_uncommitted():
    model = DPMModel(1.0, NIWParams([21.0], 1e12, 10.0, [[5.0]]))
    c = spawn_cluster(model, SeedStream(0))
    assert c.count == 0 and c.id == 1 and model.K == 0
    assert is_spd(c.params.cov)
    assert_allclose(c.params.mean, [21.0], atol=1e-4)


def test_first_allocation_opens_cluster():
    model = DPMModel(1.0, BASE)
    allocate(model, [20.5], 1, rng=SeedStream(0))
    assert model.K == 1 and model.clusters[0].count == 1 and len(model.outliers) == 1


def test_allocate_rejects_bad_id_and_dimension():
    model = DPMModel(1.0, BASE)
    with pytest.raises(ValueError):
        allocate(model, [20.0], 2, rng=SeedStream(0))
    with pytest.raises(ValueError):
        allocate(model, [20.0, 1.0], 1, rng=SeedStream(0))
    with pytest.raises(ValueError):
        allocate(model, [20.0], 1)


def test_allocate_uses_spawned_params():
    model = DPMModel(1.0, BASE)
    spawned = spawn_cluster(model, SeedStream(3))
    allocate(model, [20.0], 1, spawned=spawned)
    assert model.clusters[0].params is spawned.params


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(15, 27), min_size=1, max_size=60), st.integers(0, 2**32 - 1))
def test_count_conservation_under_allocation(values, seed):
    model = DPMModel(1.0, BASE)
    rng = SeedStream(seed)
    for v in values:
        k = crp_allocate(model, [v], rng)
        assert 1 <= k <= model.K
        assert int(model.counts.sum()) == len(model.outliers) == len(model.assignments)
    model.check()


def test_alpha_must_be_positive():
    with pytest.raises(ValueError):
        DPMModel(0.0, BASE)


# -- Gibbs refinement ---------------------------------------------------------

def test_single_cluster_sweep_keeps_assignments():
    model = fixed_model([21.0], [0.5], [20.0, 21.0, 22.0], [0, 0, 0])
    before = model.clusters[0].params.mean.copy()
    gibbs_refine(model, 5, SeedStream(1))
    assert model.assignments == [1, 1, 1]
    assert_array_equal(model.counts, [3])
    assert not np.array_equal(before, model.clusters[0].params.mean)


def test_zero_sweeps_is_noop():
    model = fixed_model([20.0, 22.0], [0.1, 0.1], [20.0, 22.0], [0, 1])
    snap = model.dumps()
    gibbs_refine(model, 0, SeedStream(1))
    assert model.dumps() == snap


def test_refine_empty_model_raises():
    with pytest.raises(ValueError):
        gibbs_refine(DPMModel(1.0, BASE), 3, SeedStream(0))


def test_refine_keeps_conservation_and_dense_ids():
    rng = SeedStream(5)
    model = DPMModel(1.0, BASE)
    data = np.concatenate([rng.gen.normal(20, 0.3, 40), rng.gen.normal(22, 0.3, 40)])
    for v in rng.gen.permutation(data):
        crp_allocate(model, [v], rng)
    gibbs_refine(model, 20, rng)
    model.check()
    assert np.all(model.counts > 0)


def test_drop_empty_clusters_compacts_ids():
    model = fixed_model([20.0, 0.0, 22.0], [0.1, 0.1, 0.1], [20.0, 22.0], [0, 2])
    drop_empty_clusters(model)
    assert [c.id for c in model.clusters] == [1, 2]
    assert model.assignments == [1, 2]
    assert_array_equal(model.clusters[1].params.mean, [22.0])
    model.check()


GIBBS_MEANS = [0.0, 1.0]
GIBBS_VARS = [1.0, 1.0]


def test_gibbs_marginals_match_enumeration():
    pts = [-0.5, 0.3, 0.8, 1.5]
    exact = enumerate_z_posterior(pts, GIBBS_MEANS, GIBBS_VARS, alpha=1.0)
    model = fixed_model(GIBBS_MEANS, GIBBS_VARS, pts, [0, 1, 0, 1])
    rng = SeedStream(17)
    sweeps = 50_000
    hits = np.zeros((len(pts), 2))
    for _ in range(sweeps):
        gibbs_sweep(model, rng, update_params=False)
        z = np.asarray(model.assignments) - 1
        hits[np.arange(len(pts)), z] += 1
    tv = 0.5 * np.abs(hits / sweeps - exact).sum(axis=1)
    assert tv.max() < 0.02, (tv, exact)


def test_one_sweep_preserves_exact_posterior():
    pts = [-0.2, 0.6, 1.4]
    zs, probs = enumerate_z_joint(pts, GIBBS_MEANS, GIBBS_VARS, alpha=1.0)
    rng = SeedStream(18)
    reps = 50_000
    start = rng.gen.choice(len(zs), size=reps, p=probs)
    out = np.zeros((len(pts), 2))
    for s in start:
        model = fixed_model(GIBBS_MEANS, GIBBS_VARS, pts, zs[s])
        gibbs_sweep(model, rng, update_params=False)
        z = np.asarray(model.assignments) - 1
        out[np.arange(len(pts)), z] += 1
    exact = enumerate_z_posterior(pts, GIBBS_MEANS, GIBBS_VARS, alpha=1.0)
    tv = 0.5 * np.abs(out / reps - exact).sum(axis=1)
    assert tv.max() < 0.02


# -- predictive mixture and snapshots ------------------------------------------

def test_predictive_mixture_needs_clusters():
    with pytest.raises(NoOutlierModelError):
        predictive_mixture(DPMModel(1.0, BASE))


def test_predictive_mixture_weights():
    model = fixed_model([20.0], [0.1], [20.0], [0])
    assert_array_equal(predictive_mixture(model).weights, [1.0])
    model = fixed_model([20.0, 22.0], [0.1, 0.2], [20.0, 20.0, 20.0, 22.0], [0, 0, 0, 1])
    mix = predictive_mixture(model)
    assert_allclose(mix.weights, [0.75, 0.25])
    assert mix.components[1] is model.clusters[1].params


def test_snapshot_round_trip():
    rng = SeedStream(21)
    model = DPMModel(1.0, BASE)
    for v in rng.gen.normal(21, 1, 25):
        crp_allocate(model, [v], rng)
    gibbs_refine(model, 3, rng)
    again = DPMModel.loads(model.dumps())
    assert again.dumps() == model.dumps()
    assert_array_equal(again.outlier_array(), model.outlier_array())


def test_snapshot_rejects_inconsistent_counts():
    model = fixed_model([20.0], [0.1], [20.0, 20.2], [0, 0])
    data = model.to_dict()
    data["clusters"][0]["count"] = 5
    with pytest.raises(AssertionError):
        DPMModel.from_dict(data)
