import numpy as np
import pytest

from semidict.candidates import TupleStrategy
from semidict.coltest import TestParams
from semidict.model import gen_dictionary
from semidict.recovery import (
    PoolSource,
    RecoverConfig,
    check_lp_solution,
    detect_support_membership,
    feasible_witness_check,
    recover_dict,
    solve_reweight_lp,
    weighted_subsample,
)
from semidict.sampling import (
    FreshSource,
    SampleBatch,
    SemirandomSpec,
    SupportModel,
    ValueModel,
    sample_batch,
)


def toy_batch(N, n=4, seed=0):
    rng = np.random.default_rng(seed)
    samples = rng.standard_normal((N, n))
    return SampleBatch(samples=samples, m=n,
                       support=np.zeros((N, 1), dtype=np.int32),
                       values=np.ones((N, 1)))


# ------------------------------------------------------------ membership

def test_membership_single_sample():
    W = [np.eye(4)[:, 0], np.eye(4)[:, 1]]
    assert detect_support_membership(np.array([2.0, -0.4, 0, 0]), W) == {0}
    assert detect_support_membership(np.array([0.5, -0.5, 0, 0]), W) == {0, 1}
    assert detect_support_membership(np.array([0.49, 0, 0, 0]), W) == set()
    assert detect_support_membership(np.zeros(4), []) == set()


def test_membership_batch_matches_rows():
    rng = np.random.default_rng(0)
    Y = rng.standard_normal((20, 4))
    W = [np.eye(4)[:, 0], rng.standard_normal(4)]
    W[1] = W[1] / np.linalg.norm(W[1])
    M = detect_support_membership(Y, W)
    assert M.shape == (20, 2)
    for r in range(20):
        assert set(np.nonzero(M[r])[0]) == detect_support_membership(Y[r], W)
    assert detect_support_membership(Y, []).shape == (20, 0)


# ------------------------------------------------------------ LP

def test_lp_no_columns_shortcut():
    M = np.zeros((50, 0), dtype=bool)
    res = solve_reweight_lp(M, beta=0.5, k=2, m=10)
    assert res.status == "optimal"
    np.testing.assert_array_equal(res.weights, np.ones(50))
    assert res.objective == 50.0


def test_lp_infeasible_when_one_column_floods_everything():
    # every sample uses the recovered column but the cap only allows ~k/m
    M = np.ones((40, 1), dtype=bool)
    res = solve_reweight_lp(M, beta=1.0, k=1, m=10)
    assert res.status == "infeasible"
    assert res.weights is None


def test_lp_downweights_flooded_column():
    N = 1_000
    M = np.zeros((N, 1), dtype=bool)
    M[:500, 0] = True  # half the batch hits one recovered column
    beta, k, m = 0.3, 1, 10
    res = solve_reweight_lp(M, beta, k, m)
    assert res.status == "optimal"
    audit = check_lp_solution(res.weights, M, beta, k, m)
    assert audit["feasible"]
    assert audit["total_weight"] >= beta * N * (1 - 1e-9)
    flood_mass = res.weights[:500].sum()
    assert flood_mass <= audit["cap_limit"] * (1 + 1e-7)
    # the clean half keeps full weight; the flooded half is cut hard
    assert res.weights[500:].mean() > 0.99
    assert res.weights[:500].mean() < 0.2


def test_lp_audit_rejects_bad_weights():
    M = np.zeros((100, 1), dtype=bool)
    M[:50, 0] = True
    w = np.ones(100)  # violates the cap: 50 > (k(1+lam)/m) * 100
    audit = check_lp_solution(w, M, beta=0.5, k=1, m=10)
    assert not audit["feasible"]
    assert not audit["caps_ok"]
    assert audit["max_cap_excess"] > 0
    assert audit["bounds_ok"] and audit["mass_ok"]


def test_lp_beta_n_guard():
    with pytest.raises(ValueError):
        solve_reweight_lp(np.zeros((4, 0), dtype=bool), beta=0.1, k=1, m=4)


def test_witness_check_random_indicator():
    from semidict.sampling import PROV_ADVERSARIAL, PROV_RANDOM

    N = 1_000
    provenance = np.full(N, PROV_ADVERSARIAL, dtype=np.uint8)
    provenance[:300] = PROV_RANDOM
    M = np.zeros((N, 1), dtype=bool)
    M[300:900, 0] = True  # adversarial rows flood the column; witness avoids them
    out = feasible_witness_check(M, provenance, beta=0.3, k=2, m=10)
    assert out["witness_mass"] == 300.0
    assert out["feasible"]
    # and the witness really is tight on mass
    assert out["total_weight"] == 300.0


# ------------------------------------------------------------ subsampling

def test_subsample_uniform_full_size_is_permutation():
    b = toy_batch(32)
    sub = weighted_subsample(b, np.ones(32), 32, seed=1)
    assert sub.N == 32
    assert np.sort(sub.samples.sum(axis=1)) == pytest.approx(
        np.sort(b.samples.sum(axis=1)))


def test_subsample_never_draws_zero_weight():
    b = toy_batch(64)
    w = np.zeros(64)
    w[::2] = 1.0
    sub = weighted_subsample(b, w, 20, seed=2)
    allowed = {tuple(r) for r in b.samples[::2]}
    for row in sub.samples:
        assert tuple(row) in allowed


def test_subsample_deterministic():
    b = toy_batch(50)
    w = np.linspace(0.1, 1.0, 50)
    s1 = weighted_subsample(b, w, 10, seed=3)
    s2 = weighted_subsample(b, w, 10, seed=3)
    np.testing.assert_array_equal(s1.samples, s2.samples)
    s3 = weighted_subsample(b, w, 10, seed=4)
    assert not np.array_equal(s1.samples, s3.samples)


def test_subsample_respects_weight_sizes():
    b = toy_batch(3)
    hits = 0
    for seed in range(300):
        sub = weighted_subsample(b, np.array([1.0, 1.0, 8.0]), 1, seed=seed)
        hits += np.array_equal(sub.samples[0], b.samples[2])
    assert 0.7 * 300 < hits < 0.9 * 300  # p = 0.8


def test_subsample_input_guards():
    b = toy_batch(5)
    with pytest.raises(ValueError):
        weighted_subsample(b, np.array([1, 1, 0, 0, 0.0]), 3, seed=0)
    with pytest.raises(ValueError):
        weighted_subsample(b, -np.ones(5), 2, seed=0)
    with pytest.raises(ValueError):
        weighted_subsample(b, np.zeros(5), 1, seed=0)


def test_pool_source_purposes_and_reproducibility():
    b = toy_batch(200, seed=5)
    w = np.ones(200)
    src = PoolSource(b, w, test_size=30, seed=9)
    a1, a2 = src.anchor_batch(40), src.anchor_batch(40)
    np.testing.assert_array_equal(a1.samples, a2.samples)
    t0, t0b, t1 = src.test_batch(0), src.test_batch(0), src.test_batch(1)
    np.testing.assert_array_equal(t0.samples, t0b.samples)
    assert not np.array_equal(t0.samples, t1.samples)
    assert t0.N == 30 and a1.N == 40
    # capped at the number of positive weights
    small = PoolSource(b, (np.arange(200) < 8).astype(float), 30, seed=9)
    assert small.test_batch(0).N == 8
    assert small.anchor_batch(40).N == 8


# ------------------------------------------------------------ config

def test_recover_config_roundtrip():
    cfg = RecoverConfig(
        params=TestParams(eta=0.12, kappa0=0.02, kappa1=0.01),
        strategy=TupleStrategy(kind="oracle-planted", L=2, budget=500,
                               anchor_pool_size=256),
        t1_size=20_000, tv_size=10_000, beta=0.8, lam=0.5, use_lp=True,
        iteration_cap=5, stale_limit=2, dedup_angle=0.2, use_rad=False,
        match_tolerance=0.1, seed=7,
    )
    assert RecoverConfig.from_dict(cfg.as_dict()) == cfg


# ------------------------------------------------------------ full loop

def mechanism_setup(seed):
    A = gen_dictionary(64, 32, "orthonormal-subset", 1)
    spec = SemirandomSpec(
        support_random=SupportModel(kind="uniform-k-sparse", m=32, k=3),
        value=ValueModel(kind="rademacher"),
        N=30_000,
        seed=seed,
    )
    cfg = RecoverConfig(
        params=TestParams(eta=0.15, kappa0=0.02, kappa1=0.01),
        strategy=TupleStrategy(kind="oracle-planted", L=2, budget=1_200,
                               anchor_pool_size=1_024),
        t1_size=20_000, tv_size=15_000, beta=1.0, lam=0.5, use_lp=True,
        iteration_cap=4, stale_limit=2, dedup_angle=0.2, use_rad=False,
        match_tolerance=0.1, seed=seed,
    )
    return A, FreshSource(A, spec, test_size=cfg.tv_size), cfg


def test_recover_dict_full_coverage_on_reference_instance():
    A, source, cfg = mechanism_setup(seed=42)
    res = recover_dict(source, cfg, true_dictionary=A)
    assert res.matching.coverage == 1.0
    assert res.matching.max_error <= cfg.match_tolerance
    assert res.diagnostics["halted"] == "all-columns"
    assert all(s == "optimal" for s in res.lp_statuses)
    for audit in res.diagnostics["lp_audit"]:
        assert audit["feasible"]
    for wit in res.diagnostics["witness"]:
        assert wit["feasible"]
    # per-iteration log is well-formed and accounts for every column
    assert res.iterations == len(res.diagnostics["per_iteration"])
    assert res.diagnostics["per_iteration"][-1]["wstar_size"] == 32


def test_recover_dict_lp_ablation_also_runs():
    A, source, cfg = mechanism_setup(seed=43)
    cfg.use_lp = False
    cfg.iteration_cap = 1
    res = recover_dict(source, cfg, true_dictionary=A)
    assert res.lp_statuses == ["ablated"]
    assert res.diagnostics["lp_audit"] == []
    assert len(res.recovered) > 0


def test_recover_dict_stale_halt():
    # a value model the band test rejects everywhere: bounded-uniform with
    # C = 3 spreads dots across the gap, so no candidates are ever accepted
    A = gen_dictionary(16, 8, "gaussian-normalized", 2)
    spec = SemirandomSpec(
        support_random=SupportModel(kind="uniform-k-sparse", m=8, k=4),
        value=ValueModel(kind="uniform-spike-slab", C=3.0),
        N=2_000,
        seed=3,
    )
    cfg = RecoverConfig(
        params=TestParams(eta=0.01, kappa0=0.001, kappa1=0.9, C=3.0),
        strategy=TupleStrategy(kind="random", L=2, budget=10,
                               anchor_pool_size=64),
        t1_size=1_000, tv_size=500, use_lp=False, iteration_cap=10,
        stale_limit=2, seed=4,
    )
    res = recover_dict(FreshSource(A, spec, test_size=cfg.tv_size), cfg)
    assert res.recovered == []
    assert res.diagnostics["halted"] == "stale"
    assert res.iterations == 2
