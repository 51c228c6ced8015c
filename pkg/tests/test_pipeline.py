"""Pipeline dispatch, parameter derivation, cost-preservation harness."""

import math

import numpy as np
import pytest
import scipy.sparse.csgraph as csgraph

from specluster.errors import InputError
from specluster.generate import SbmParams, sample_sbm
from specluster.graph import from_edges, partitions_into_k_parts
from specluster.kmeans import Partition, kmeans_cost
from specluster.metrics import ari
from specluster.pipeline import (
    C3,
    SpectralParams,
    fast_spectral_cluster,
    kmeans_cost_preservation_check,
)
from specluster.spectral import (
    SignlessLaplacianOp,
    power_method,
    sample_gaussian_vectors,
)


def disjoint_cliques(c, size):
    u = [size * b + i for b in range(c) for i in range(size) for _ in [0]]
    u, v = [], []
    for b in range(c):
        for i in range(size):
            for j in range(i + 1, size):
                u.append(size * b + i)
                v.append(size * b + j)
    g, _ = from_edges(c * size, u, v)
    return g


# ---------------------------------------------------------------------------
# parameter derivation


def test_default_l_and_t():
    p = SpectralParams(k=2)
    assert p.num_columns(1000) == 1
    assert p.num_steps(1000) == math.ceil(10 * math.log(500))
    p = SpectralParams(k=20)
    assert p.num_columns(20_000) == 5
    assert p.num_steps(20_000) == math.ceil(10 * math.log(1000))
    # tiny n/k falls back to the floor inside the log
    assert SpectralParams(k=5).num_steps(6) == math.ceil(10 * math.log(2))


def test_epsilon_derived_l_and_t():
    p = SpectralParams(k=4, epsilon=0.5)
    assert p.num_columns(200) == 4  # ceil((2+1)/0.25) = 12, capped at k
    assert p.num_steps(200) == math.ceil(C3 * math.log(24 * 200 / (0.25 * 4)))
    assert SpectralParams(k=64, epsilon=1.0).num_columns(10_000) == 6


def test_mode_specific_column_counts():
    assert SpectralParams(k=20, mode="pm_k").num_columns(1000) == 20
    assert SpectralParams(k=20, mode="eigs_k").num_columns(1000) == 20
    assert SpectralParams(k=20, mode="eigs_log_k").num_columns(1000) == 5
    assert SpectralParams(k=20, mode="eigs_log_k", epsilon=0.3).num_columns(1000) == 5
    assert SpectralParams(k=20, mode="pm_k", l=7).num_columns(1000) == 7


def test_params_validation():
    with pytest.raises(InputError):
        SpectralParams(k=1)
    with pytest.raises(InputError):
        SpectralParams(k=3, mode="nope")
    with pytest.raises(InputError):
        SpectralParams(k=3, epsilon=0.0)
    with pytest.raises(InputError):
        SpectralParams(k=3, epsilon=1.5)
    with pytest.raises(InputError):
        SpectralParams(k=3, l=0)
    with pytest.raises(InputError):
        SpectralParams(k=3, t=-1)
    with pytest.raises(InputError):
        SpectralParams(k=3, seed=-1)


def test_pipeline_rejects_k_and_l_beyond_n():
    g = disjoint_cliques(2, 4)
    with pytest.raises(InputError, match="exceeds"):
        fast_spectral_cluster(g, SpectralParams(k=9))
    with pytest.raises(InputError, match="exceeds"):
        fast_spectral_cluster(g, SpectralParams(k=4, l=20))


# ---------------------------------------------------------------------------
# clustering behavior


def test_recovers_disjoint_cliques():
    c, size = 3, 8
    g = disjoint_cliques(c, size)
    ncomp, comp_labels = csgraph.connected_components(g.adjacency_csr(), directed=False)
    assert ncomp == c
    truth = Partition(comp_labels.astype(np.int64), c)
    hits = 0
    for seed in range(100):
        res = fast_spectral_cluster(g, SpectralParams(k=c, seed=seed))
        if ari(res.partition, truth) == pytest.approx(1.0):
            hits += 1
    assert hits >= 95


def test_degenerate_k_equals_n():
    g = disjoint_cliques(2, 3)
    res = fast_spectral_cluster(g, SpectralParams(k=6, seed=0))
    assert sorted(res.partition.sizes().tolist()) == [1] * 6
    assert kmeans_cost(res.embedding.data, res.partition) == pytest.approx(0.0, abs=1e-18)


def test_all_modes_recover_small_sbm():
    sample = sample_sbm(SbmParams(n=400, k=4, p=0.3, q=0.01, seed=3))
    for mode in ("pm_log_k", "pm_k", "eigs_k", "eigs_log_k"):
        res = fast_spectral_cluster(sample.graph, SpectralParams(k=4, mode=mode, seed=3))
        score = ari(res.partition, sample.planted)
        assert score >= 0.9, f"mode {mode} got ARI {score}"
        assert res.mode == mode


def test_timings_present_and_consistent():
    sample = sample_sbm(SbmParams(n=200, k=2, p=0.2, q=0.01, seed=0))
    res = fast_spectral_cluster(sample.graph, SpectralParams(k=2, seed=0))
    assert set(res.timings) == {"embed", "scale", "kmeans", "total"}
    assert all(v >= 0 for v in res.timings.values())
    parts = res.timings["embed"] + res.timings["scale"] + res.timings["kmeans"]
    assert res.timings["total"] == pytest.approx(parts, rel=1e-9)


def test_eigs_mode_reports_convergence():
    sample = sample_sbm(SbmParams(n=120, k=3, p=0.4, q=0.02, seed=1))
    res = fast_spectral_cluster(sample.graph, SpectralParams(k=3, mode="eigs_k", seed=1))
    assert res.eigs_converged is True
    assert res.eigs_iterations >= 1
    pm = fast_spectral_cluster(sample.graph, SpectralParams(k=3, seed=1))
    assert pm.eigs_converged is None


def test_degree_scaling_applied_entrywise():
    sample = sample_sbm(SbmParams(n=150, k=3, p=0.3, q=0.02, seed=2))
    g = sample.graph
    params = SpectralParams(k=3, seed=5)
    res = fast_spectral_cluster(g, params)
    op = SignlessLaplacianOp(g)
    raw = power_method(
        op, sample_gaussian_vectors(g.n, params.num_columns(g.n), 5).data,
        params.num_steps(g.n),
    )
    expected = raw / np.sqrt(g.degrees)[:, None]
    assert np.abs(res.embedding.data - expected).max() <= 1e-12
    assert res.embedding.scaled


def test_pipeline_deterministic():
    sample = sample_sbm(SbmParams(n=200, k=4, p=0.3, q=0.02, seed=4))
    a = fast_spectral_cluster(sample.graph, SpectralParams(k=4, seed=8))
    b = fast_spectral_cluster(sample.graph, SpectralParams(k=4, seed=8))
    assert np.array_equal(a.partition.labels, b.partition.labels)
    assert np.array_equal(a.embedding.data, b.embedding.data)


def test_span_equal_embeddings_agree_on_exhaustive_argmin():
    # two disjoint K5's: after deep power iteration the scaled rows are
    # constant per component, so any invertible column mix preserves the
    # exhaustive k-means argmin over all 2-part partitions
    g = disjoint_cliques(2, 5)
    k = 2
    seed = 1
    op = SignlessLaplacianOp(g)
    raw = power_method(op, sample_gaussian_vectors(g.n, k, seed).data, 30)
    plain = raw / np.sqrt(g.degrees)[:, None]
    res_orth = fast_spectral_cluster(g, SpectralParams(k=k, mode="pm_k", t=30, seed=seed))

    def exhaustive_argmin(points):
        best, best_labels = math.inf, None
        for labels in partitions_into_k_parts(g.n, k):
            cost = kmeans_cost(points, Partition(labels, k))
            if cost < best - 1e-15:
                best, best_labels = cost, labels
        return best_labels

    a = exhaustive_argmin(plain)
    b = exhaustive_argmin(res_orth.embedding.data)
    assert ari(a, b) == pytest.approx(1.0)
    # and both find the components
    _, comp = csgraph.connected_components(g.adjacency_csr(), directed=False)
    assert ari(a, comp.astype(np.int64)) == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# cost-preservation harness


def test_harness_hand_derived_widths():
    sample = sample_sbm(SbmParams(n=200, k=4, p=0.5, q=0.01, seed=0))
    rep = kmeans_cost_preservation_check(
        sample.graph, 4, 0.5, trials=5, seed=0, planted=sample.planted
    )
    assert rep.l_jl == 12  # ceil((log2 4 + log2 2) / 0.25)
    assert rep.t == math.ceil(C3 * math.log(24 * sample.graph.n / (0.25 * 4)))
    assert rep.additive_bound == pytest.approx(2.0)
    assert rep.partitions_checked == 6


def test_harness_bounds_hold_on_a_few_seeds():
    for seed in range(5):
        sample = sample_sbm(SbmParams(n=200, k=4, p=0.5, q=0.01, seed=seed))
        rep = kmeans_cost_preservation_check(
            sample.graph, 4, 0.5, trials=10, seed=seed, planted=sample.planted
        )
        assert math.isfinite(rep.planted_mult_ratio)
        assert rep.planted_mult_ok, f"seed {seed}: ratio {rep.planted_mult_ratio}"
        assert rep.additive_ok, f"seed {seed}: fro dev {rep.fro_additive_dev}"
        # the sqrt-cost deviation is dominated by the Frobenius distance
        assert rep.max_sqrt_cost_dev <= rep.fro_additive_dev + 1e-9


def test_harness_self_comparison_is_exact_zero():
    # two identical point sets give identical costs, so the additive chain
    # collapses to zero deviation
    rng = np.random.default_rng(0)
    pts = rng.standard_normal((30, 4))
    part = Partition(rng.integers(0, 3, size=30), 3)
    assert kmeans_cost(pts, part) - kmeans_cost(pts.copy(), part) == 0.0


def test_harness_refuses_large_n_and_bad_params():
    sample = sample_sbm(SbmParams(n=400, k=4, p=0.3, q=0.01, seed=0))
    with pytest.raises(InputError, match="refuses"):
        kmeans_cost_preservation_check(sample.graph, 4, 0.5, trials=1, seed=0)
    small = sample_sbm(SbmParams(n=100, k=2, p=0.5, q=0.02, seed=0))
    with pytest.raises(InputError):
        kmeans_cost_preservation_check(small.graph, 2, 1.5, trials=1, seed=0)
