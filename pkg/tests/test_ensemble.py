"""Voting layer: tallies, noisy argmax, soft labels, flip probabilities."""

import math

import numpy as np
import pytest

from pate_fairness import data, ensemble, models
from pate_fairness.errors import ConvergenceError
from pate_fairness.models import TrainConfig


def _small_ensemble(k=5, n_per=30, d=3, seed=0):
    ds = data.synth_two_group(k * n_per, d, [1.5, 1.5], [1.0, 1.0], seed=seed)
    parts = [ds.subset(np.arange(j * n_per, (j + 1) * n_per)) for j in range(k)]
    return ensemble.train_teachers(parts, TrainConfig(lam=0.1, tol=1e-8)), ds


def test_train_teachers_deterministic_and_sized():
    ens1, _ = _small_ensemble(seed=1)
    ens2, _ = _small_ensemble(seed=1)
    assert ens1.k == 5
    for a, b in zip(ens1.teachers, ens2.teachers):
        np.testing.assert_array_equal(a.values, b.values)


def test_train_teachers_reports_failing_teacher():
    ds = data.synth_two_group(60, 3, [1.0, 1.0], [1.0, 1.0], seed=2)
    parts = [ds.subset(np.arange(30)), ds.subset(np.arange(30, 60))]
    bad = TrainConfig(lam=0.1, tol=1e-300, max_iter=3)
    with pytest.raises(ConvergenceError) as exc:
        ensemble.train_teachers(parts, bad)
    assert "teacher 0" in str(exc.value)
    assert exc.value.grad_norm > 0


def test_vote_counts_sum_to_k():
    ens, ds = _small_ensemble()
    counts = ensemble.vote_count_matrix(ens, ds.X[:20])
    assert (counts.sum(axis=1) == ens.k).all()
    # single-sample path agrees with the batch path
    for i in range(5):
        np.testing.assert_array_equal(ensemble.vote_counts(ens, ds.X[i]),
                                      counts[i])


def test_clean_vote_breaks_ties_low():
    assert ensemble.clean_vote([3, 3]) == 0
    assert ensemble.clean_vote([1, 4, 4]) == 1


def test_soft_hard_consistency():
    gen = np.random.default_rng(0)
    for _ in range(200):
        counts = gen.multinomial(20, [0.5, 0.3, 0.2])
        soft = ensemble.soft_label(counts)
        assert soft.sum() == pytest.approx(1.0)
        if (counts == counts.max()).sum() == 1:
            assert int(np.argmax(soft)) == ensemble.clean_vote(counts)


def test_sigma_zero_noisy_vote_is_clean_vote():
    gen = np.random.default_rng(1)
    counts = np.array([7, 2, 1])
    assert ensemble.noisy_vote(counts, 0.0, gen) == ensemble.clean_vote(counts)
    np.testing.assert_array_equal(ensemble.noisy_soft_label(counts, 0.0, gen),
                                  ensemble.soft_label(counts))


def test_noisy_soft_label_is_valid_probability_vector():
    gen = np.random.default_rng(2)
    counts = np.array([10, 0])
    for _ in range(500):
        p = ensemble.noisy_soft_label(counts, 30.0, gen)
        assert (p >= 0).all()
        assert p.sum() == pytest.approx(1.0)


def test_sanitize_soft_all_clamped_gives_uniform():
    np.testing.assert_array_equal(ensemble.sanitize_soft(np.array([-3.0, -1.0])),
                                  [0.5, 0.5])


def test_flip_prob_unanimous_closed_form():
    # 1 - Phi(k / (sqrt(2) sigma)) written via erfc
    k, sigma = 150, 50.0
    expected = 0.5 * math.erfc(k / (2 * sigma))
    assert ensemble.flip_prob_unanimous(k, sigma) == expected
    assert expected == pytest.approx(0.01695, abs=5e-6)
    assert ensemble.flip_prob_unanimous(10, 0.0) == 0.0


def test_flip_prob_unanimous_monotone():
    sig = 40.0
    vals_k = [ensemble.flip_prob_unanimous(k, sig) for k in range(1, 300, 10)]
    assert all(b <= a for a, b in zip(vals_k, vals_k[1:]))
    vals_s = [ensemble.flip_prob_unanimous(50, s) for s in np.linspace(1, 200, 40)]
    assert all(b >= a for a, b in zip(vals_s, vals_s[1:]))


def test_flip_prob_mc_agrees_with_closed_form():
    gen = np.random.default_rng(3)
    for k, sigma in [(10, 5.0), (50, 50.0), (150, 50.0)]:
        counts = np.zeros(2)
        counts[0] = k
        est, se = ensemble.flip_prob_mc(counts, sigma, 100_000, gen)
        exact = ensemble.flip_prob_unanimous(k, sigma)
        assert abs(est - exact) <= 3 * max(se, 1e-6)


def test_flip_prob_mc_sigma_zero():
    gen = np.random.default_rng(4)
    assert ensemble.flip_prob_mc([5, 3], 0.0, 100, gen) == (0.0, 0.0)
    with pytest.raises(ValueError):
        ensemble.flip_prob_mc([5, 3], 1.0, 0, gen)


def test_flip_prob_batch_matches_unanimous_and_split_rows():
    gen = np.random.default_rng(5)
    counts = np.array([[20, 0], [0, 20], [11, 9], [10, 10]])
    out = ensemble.flip_prob_batch(counts, 10.0, 50_000, gen)
    exact = ensemble.flip_prob_unanimous(20, 10.0)
    assert out[0] == exact and out[1] == exact
    # a split vote flips far more often than a unanimous one
    assert out[2] > 4 * exact
    # an exact tie flips about half the time
    assert abs(out[3] - 0.5) < 0.02
    assert (ensemble.flip_prob_batch(counts, 0.0, 10, gen) == 0.0).all()


def test_split_votes_flip_more_by_margin():
    gen = np.random.default_rng(6)
    counts = np.array([[30, 0], [25, 5], [20, 10], [16, 14]])
    out = ensemble.flip_prob_batch(counts, 20.0, 80_000, gen)
    assert all(b > a for a, b in zip(out, out[1:]))


def test_export_vote_transcript(tmp_path):
    ens, ds = _small_ensemble()
    counts = ensemble.vote_count_matrix(ens, ds.X[:8])
    votes = np.argmax(counts, axis=1)
    soft = counts / ens.k
    path = tmp_path / "votes.csv"
    ensemble.export_vote_transcript(path, counts, votes, soft)
    lines = path.read_text().strip().split("\n")
    assert len(lines) == 9
    assert lines[0].split(",")[:4] == ["idx", "count_0", "count_1", "vote"]
    first = lines[1].split(",")
    assert int(first[1]) + int(first[2]) == ens.k


def test_ensemble_model_validation():
    p = models.init_params("logreg", 3, 2)
    q = models.init_params("logreg", 4, 2)
    with pytest.raises(ValueError):
        ensemble.EnsembleModel((), "logreg")
    with pytest.raises(ValueError):
        ensemble.EnsembleModel((p, q), "logreg")
