import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weighted_gc.errors import ConsistencyError, DivisibilityError, InvalidDistributionError
from weighted_gc.numkit import leverage_scores, normalize_scores
from weighted_gc.sketch import (
    SketchPlan,
    build_block_classic_sketch,
    build_classic_sketch,
    build_s_hat,
    build_sp,
    draw_indices,
    make_partition,
    sample_weighted,
)


def test_partition_examples():
    np.testing.assert_allclose(make_partition(4, 2, [0.25] * 4).Pi, [0.5, 0.5])
    pi = [0.1, 0.2, 0.3, 0.4]
    plan = make_partition(4, 4, pi)
    np.testing.assert_allclose(plan.Pi, pi, rtol=1e-14)
    assert plan.part_ranges == [range(0, 1), range(1, 2), range(2, 3), range(3, 4)]


def test_partition_of_synthetic_scores(synth0):
    pi = normalize_scores(leverage_scores(synth0.dataset.X))
    plan = make_partition(1000, 40, pi)
    assert abs(plan.Pi.sum() - 1) <= 1e-12
    assert np.all(plan.Pi > 0)
    covered = np.concatenate([np.arange(r.start, r.stop) for r in plan.part_ranges])
    np.testing.assert_array_equal(covered, np.arange(1000))
    # brute-force sum per range
    np.testing.assert_allclose(plan.Pi, [pi[r.start:r.stop].sum() for r in plan.part_ranges], atol=1e-15)


def test_partition_errors():
    with pytest.raises(DivisibilityError):
        make_partition(10, 3, np.full(10, 0.1))
    with pytest.raises(InvalidDistributionError):
        make_partition(4, 2, [0.5, 0.5, 0.5, 0.5])


def test_single_part_collects_all_draws():
    sp = sample_weighted(make_partition(3, 1, [1 / 3] * 3), 5, seed=0)
    np.testing.assert_array_equal(sp.distinct_parts, [0])
    np.testing.assert_array_equal(sp.weights, [5])


def test_zero_mass_part_is_never_drawn():
    plan = make_partition(2, 2, [1.0, 0.0])
    for seed in range(200):
        sp = sample_weighted(plan, 3, seed)
        np.testing.assert_array_equal(sp.distinct_parts, [0])
    # trailing and interior zeros as well
    draws = draw_indices([0.0, 0.3, 0.0, 0.7, 0.0], 10_000, seed=1)
    assert set(np.unique(draws)) == {1, 3}


def test_all_zero_scores_rejected():
    with pytest.raises(InvalidDistributionError):
        draw_indices([0.0, 0.0], 2, seed=0)


def test_repeat_probability_matches_binomial():
    plan = make_partition(2, 2, [0.5, 0.5])
    same = sum(sample_weighted(plan, 2, s).n_distinct == 1 for s in range(100_000))
    assert abs(same / 100_000 - 0.5) <= 0.01


def test_draw_frequencies_follow_scores():
    probs = np.array([0.1, 0.2, 0.3, 0.4])
    draws = draw_indices(probs, 200_000, seed=3)
    freq = np.bincount(draws, minlength=4) / draws.size
    # 5 sigma of a binomial proportion
    assert np.all(np.abs(freq - probs) <= 5 * np.sqrt(probs * (1 - probs) / draws.size))


def test_sp_for_doubled_part():
    plan = make_partition(2, 2, [0.5, 0.5])
    sp = next(sp for sp in (sample_weighted(plan, 2, s) for s in range(50)) if sp.n_distinct == 1)
    S = build_sp(plan, sp)
    # r = k * N/K = 2, scale = 1/sqrt(2 * 0.5) = 1
    expected = np.zeros((1, 2))
    expected[0, sp.distinct_parts[0]] = 1.0
    np.testing.assert_allclose(S, expected)


def test_sp_with_all_singletons_is_scaled_selection():
    N = 5
    pi = np.array([0.1, 0.15, 0.2, 0.25, 0.3])
    plan = make_partition(N, N, pi)
    parts = np.arange(N)
    sp = SketchPlan(parts, parts, np.ones(N), 1 / np.sqrt(N * pi), r=N, part_size=1)
    S = build_sp(plan, sp)
    np.testing.assert_allclose(S, np.diag(1 / np.sqrt(N * pi)))


def test_sp_selects_rescaled_rows(rng):
    N, K, k = 24, 6, 5
    pi = rng.dirichlet(np.ones(N))
    plan = make_partition(N, K, pi)
    sp = sample_weighted(plan, k, seed=7)
    X = rng.standard_normal((N, 3))
    SX = build_sp(plan, sp) @ X
    assert np.count_nonzero(build_sp(plan, sp), axis=1).tolist() == [1] * SX.shape[0]
    size = N // K
    for b, part in enumerate(sp.distinct_parts):
        scale = 1 / np.sqrt(k * size * plan.Pi[part])
        np.testing.assert_allclose(SX[b * size:(b + 1) * size], scale * X[part * size:(part + 1) * size], rtol=1e-14)


def test_s_hat_examples(rng):
    plan = make_partition(8, 4, rng.dirichlet(np.ones(8)))
    parts = np.array([0, 2, 3])
    base = SketchPlan(parts, parts, np.ones(3), 1 / np.sqrt(6 * plan.Pi[parts]), r=6, part_size=2)
    np.testing.assert_array_equal(build_s_hat(plan, base), build_sp(plan, base))
    one = np.array([1])
    quad = SketchPlan(np.repeat(one, 4), one, np.array([4.0]), 1 / np.sqrt(8 * plan.Pi[one]), r=8, part_size=2)
    np.testing.assert_allclose(build_s_hat(plan, quad), 2 * build_sp(plan, quad), rtol=1e-15)


def test_s_hat_gram_identity(rng):
    N, K, k = 30, 10, 12
    plan = make_partition(N, K, rng.dirichlet(np.ones(N)))
    sp = sample_weighted(plan, k, seed=11)
    Sp, Sh = build_sp(plan, sp), build_s_hat(plan, sp)
    W = np.diag(np.repeat(sp.weights, plan.part_size))
    np.testing.assert_allclose(Sh.T @ Sh, Sp.T @ W @ Sp, atol=1e-12)
    assert Sh.shape[0] == sp.n_distinct * plan.part_size


def test_mismatched_plan_rejected(rng):
    plan = make_partition(8, 4, np.full(8, 1 / 8))
    sp = sample_weighted(plan, 3, seed=0)
    with pytest.raises(ConsistencyError):
        build_sp(make_partition(8, 2, np.full(8, 1 / 8)), sp)


def test_classic_sketch_examples():
    np.testing.assert_allclose(build_classic_sketch([1.0], 3, seed=0), np.full((3, 1), 1 / np.sqrt(3)))
    S = build_classic_sketch(np.full(6, 1 / 6), 4, seed=2)
    np.testing.assert_allclose(S[S != 0], np.sqrt(6 / 4))


def test_classic_sketch_is_unbiased():
    pi = np.array([0.1, 0.2, 0.3, 0.4])
    acc = np.zeros((4, 4))
    draws = 10_000
    for seed in range(draws):
        S = build_classic_sketch(pi, 8, seed)
        acc += S.T @ S
    assert np.abs(acc / draws - np.eye(4)).max() <= 0.05


def test_classic_rows_are_sp_rows_with_multiplicity(rng):
    N, k = 12, 20
    pi = rng.dirichlet(np.ones(N) * 0.3)
    plan = make_partition(N, N, pi)
    sp = sample_weighted(plan, k, seed=5)
    S_tilde = build_classic_sketch(plan.Pi, k, seed=5)
    S_p = build_sp(plan, sp)
    expanded = np.repeat(S_p, sp.weights.astype(int), axis=0)
    key = lambda M: M[np.lexsort(M.T[::-1])]
    np.testing.assert_allclose(key(S_tilde), key(expanded), rtol=1e-15)
    S_hat = build_s_hat(plan, sp)
    np.testing.assert_allclose(S_tilde.T @ S_tilde, S_hat.T @ S_hat, rtol=1e-14)
    np.testing.assert_array_equal(build_block_classic_sketch(plan, sp), S_tilde)


def test_nonuniform_scores_compress():
    N, K, k = 100, 100, 60
    pi = np.full(N, 1e-4)
    pi[:3] = (1 - 97e-4) / 3
    plan = make_partition(N, K, pi)
    sp = sample_weighted(plan, k, seed=1)
    assert build_s_hat(plan, sp).shape[0] < k


@settings(max_examples=60, deadline=None)
@given(K=st.integers(1, 12), size=st.integers(1, 4), k=st.integers(1, 30), seed=st.integers(0, 10**6))
def test_sketch_plan_invariants(K, size, k, seed):
    rng = np.random.default_rng(seed)
    N = K * size
    plan = make_partition(N, K, rng.dirichlet(np.ones(N)))
    sp = sample_weighted(plan, k, seed)
    assert sp.weights.sum() == k
    assert sp.n_distinct <= min(k, K)
    assert len(set(sp.distinct_parts.tolist())) == sp.n_distinct
    assert np.all(np.isfinite(sp.rescale)) and np.all(sp.rescale > 0)
    assert sp.r == k * size
