import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from urex.features import SparseFeatureVector
from urex.model import (
    CheckpointError,
    LossBreakdown,
    ModelParams,
    RelationPosterior,
    batch_objective,
    classifier_posterior,
    dispersion_loss,
    entropy,
    init_params,
    link_loss,
    link_score,
    load_checkpoint,
    relation_scores,
    save_checkpoint,
    sigmoid,
    skewness_loss,
    softmax,
    softplus,
)

LN2 = math.log(2.0)


def _random_case(rng, c=None, d=None, n_entities=None, n_features=None, batch=None, k=None):
    c = c or int(rng.integers(2, 5))
    d = d or int(rng.integers(1, 5))
    n_entities = n_entities or int(rng.integers(2, 7))
    n_features = n_features or int(rng.integers(2, 6))
    batch = batch or int(rng.integers(1, 5))
    k = int(rng.integers(0, 4)) if k is None else k
    params = init_params(rng, c, d, n_entities, n_features)
    params.W[:] = rng.uniform(-0.5, 0.5, params.W.shape)
    params.b[:] = rng.uniform(-0.5, 0.5, params.b.shape)
    feats = [
        np.sort(rng.choice(n_features, size=int(rng.integers(1, n_features + 1)), replace=False))
        for _ in range(batch)
    ]
    heads = rng.integers(0, n_entities, batch)
    tails = rng.integers(0, n_entities, batch)
    neg_heads = rng.integers(0, n_entities, (batch, k))
    neg_tails = rng.integers(0, n_entities, (batch, k))
    return params, feats, heads, tails, neg_heads, neg_tails


class TestClassifierPosterior:
    def test_zero_params_give_uniform(self):
        rng = np.random.default_rng(0)
        params = init_params(rng, 10, 3, 4, 5)
        vec = SparseFeatureVector(np.asarray([2]), 5)
        posterior = classifier_posterior(params, vec)
        assert np.allclose(posterior.probs, 0.1, atol=1e-12)

    def test_softmax_of_known_logits(self):
        rng = np.random.default_rng(0)
        params = init_params(rng, 2, 2, 3, 1)
        params.b[:] = [math.log(2.0), 0.0]
        vec = SparseFeatureVector(np.asarray([], dtype=np.int64), 1)
        posterior = classifier_posterior(params, vec)
        assert posterior.probs == pytest.approx([2.0 / 3.0, 1.0 / 3.0], abs=1e-12)

    def test_same_features_same_posterior(self):
        rng = np.random.default_rng(1)
        params = init_params(rng, 4, 2, 3, 6)
        params.W[:] = rng.normal(size=params.W.shape)
        vec = SparseFeatureVector(np.asarray([1, 4]), 6)
        a = classifier_posterior(params, vec).probs
        b = classifier_posterior(params, vec).probs
        assert np.array_equal(a, b)

    def test_dimension_mismatch_rejected(self):
        rng = np.random.default_rng(0)
        params = init_params(rng, 3, 2, 3, 4)
        with pytest.raises(ValueError, match="dimension"):
            classifier_posterior(params, SparseFeatureVector(np.asarray([0]), 9))

    def test_posterior_validates_simplex(self):
        with pytest.raises(ValueError):
            RelationPosterior(np.asarray([0.5, 0.6]))
        with pytest.raises(ValueError):
            RelationPosterior(np.asarray([-0.1, 1.1]))


@given(st.lists(st.floats(min_value=-30, max_value=30), min_size=2, max_size=8))
@settings(max_examples=80, deadline=None)
def test_softmax_is_a_distribution(logits):
    p = softmax(np.asarray(logits))
    assert np.all(p >= 0)
    assert abs(p.sum() - 1.0) < 1e-9


class TestLinkScore:
    def test_zero_embeddings_score_zero(self):
        rng = np.random.default_rng(0)
        params = init_params(rng, 3, 2, 4, 2)
        params.E[:] = 0.0
        posterior = np.asarray([0.2, 0.3, 0.5])
        assert link_score(params, 0, 1, posterior) == 0.0

    def test_one_hot_posterior_collapses_to_single_relation(self):
        rng = np.random.default_rng(3)
        params = init_params(rng, 3, 4, 5, 2)
        scores = relation_scores(params, 1, 2)
        one_hot = np.zeros(3)
        one_hot[1] = 1.0
        assert link_score(params, 1, 2, one_hot) == pytest.approx(scores[1], abs=1e-12)

    def test_hand_computed_bilinear_product(self):
        rng = np.random.default_rng(0)
        params = init_params(rng, 1, 2, 2, 2)
        params.E[0] = [1.0, 0.0]
        params.E[1] = [0.0, 1.0]
        params.A[0] = [[0.0, 2.0], [0.0, 0.0]]
        assert link_score(params, 0, 1, np.asarray([1.0])) == pytest.approx(2.0)

    def test_invalid_entity_id_rejected(self):
        rng = np.random.default_rng(0)
        params = init_params(rng, 2, 2, 3, 2)
        with pytest.raises(ValueError, match="entity id"):
            link_score(params, 0, 99, np.asarray([0.5, 0.5]))

    def test_linear_in_the_posterior(self):
        rng = np.random.default_rng(4)
        params = init_params(rng, 4, 3, 5, 2)
        q1 = softmax(rng.normal(size=4))
        q2 = softmax(rng.normal(size=4))
        for lam in (0.0, 0.25, 0.7, 1.0):
            mix = lam * q1 + (1 - lam) * q2
            expected = lam * link_score(params, 0, 1, q1) + (1 - lam) * link_score(
                params, 0, 1, q2
            )
            assert link_score(params, 0, 1, mix) == pytest.approx(expected, abs=1e-12)


class TestLinkLoss:
    def test_zero_scores_no_negatives(self):
        rng = np.random.default_rng(0)
        params = init_params(rng, 3, 2, 4, 2)
        params.E[:] = 0.0
        result = link_loss(params, 0, 1, np.asarray([1.0, 0.0, 0.0]))
        assert result.loss == pytest.approx(2 * LN2, abs=1e-12)
        assert result.nll_neg == 0.0

    def test_loss_decreases_monotonically_in_the_positive_score(self):
        rng = np.random.default_rng(1)
        params = init_params(rng, 1, 1, 2, 1)
        params.E[0] = [1.0]
        params.E[1] = [1.0]
        losses = []
        for a in [-4.0, -1.0, 0.0, 1.0, 4.0, 20.0]:
            params.A[0] = [[a]]
            losses.append(link_loss(params, 0, 1, np.asarray([1.0])).loss)
        assert all(x > y for x, y in zip(losses, losses[1:]))
        assert losses[-1] < 1e-8

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(7)
        params, feats, heads, tails, nh, nt = _random_case(rng, batch=1, k=2)
        q = softmax(rng.normal(size=params.n_relations))
        h_step = 1e-5

        def loss_at(block_name=None, ix=None, delta=0.0, q_ix=None, q_delta=0.0):
            p = params.copy()
            if block_name is not None:
                p.blocks()[block_name][ix] += delta
            qq = q.copy()
            if q_ix is not None:
                qq[q_ix] += q_delta
            return link_loss(p, int(heads[0]), int(tails[0]), qq, nh[0], nt[0]).loss

        result = link_loss(params, int(heads[0]), int(tails[0]), q, nh[0], nt[0])
        for name in ("E", "A"):
            grad = {"E": result.dE, "A": result.dA}[name]
            block = params.blocks()[name]
            it = np.nditer(block, flags=["multi_index"])
            for _ in it:
                ix = it.multi_index
                fd = (
                    loss_at(name, ix, h_step) - loss_at(name, ix, -h_step)
                ) / (2 * h_step)
                assert grad[ix] == pytest.approx(fd, abs=1e-7)
        for r in range(params.n_relations):
            fd = (
                loss_at(q_ix=r, q_delta=h_step) - loss_at(q_ix=r, q_delta=-h_step)
            ) / (2 * h_step)
            assert result.d_posterior[r] == pytest.approx(fd, abs=1e-7)


class TestRegularizers:
    def test_skewness_zero_on_one_hot(self):
        batch = np.eye(6)[[0, 3, 5, 0]]
        value, _ = skewness_loss(batch)
        assert value == 0.0

    def test_skewness_of_uniform_is_log_c(self):
        value, _ = skewness_loss(np.full((1, 10), 0.1))
        assert value == pytest.approx(math.log(10), abs=1e-12)

    def test_skewness_mixed_batch(self):
        batch = np.stack([np.eye(4)[0], np.full(4, 0.25)])
        value, _ = skewness_loss(batch)
        assert value == pytest.approx(math.log(4) / 2, abs=1e-12)

    def test_skewness_equals_mean_posterior_entropy(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            batch = softmax(rng.normal(size=(6, 5)), axis=1)
            value, _ = skewness_loss(batch)
            mean_entropy = float(np.mean([-np.sum(q * np.log(q)) for q in batch]))
            assert value == pytest.approx(mean_entropy, abs=1e-12)

    def test_dispersion_zero_when_mean_is_uniform(self):
        batch = np.eye(4)  # one one-hot per slot: mean is uniform
        value, _ = dispersion_loss(batch)
        assert abs(value) < 1e-12

    def test_dispersion_of_collapsed_batch_is_log_c(self):
        batch = np.tile(np.eye(10)[3], (7, 1))
        value, _ = dispersion_loss(batch)
        assert value == pytest.approx(math.log(10), abs=1e-12)

    def test_dispersion_two_distinct_one_hots(self):
        batch = np.stack([np.eye(4)[0], np.eye(4)[1]])
        value, _ = dispersion_loss(batch)
        assert value == pytest.approx(math.log(2), abs=1e-12)

    def test_both_are_non_negative(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            batch = softmax(rng.normal(scale=3.0, size=(4, 6)), axis=1)
            assert skewness_loss(batch)[0] >= 0.0
            assert dispersion_loss(batch)[0] >= -1e-15


class TestBatchObjective:
    def test_total_is_the_weighted_sum(self):
        rng = np.random.default_rng(9)
        params, feats, heads, tails, nh, nt = _random_case(rng)
        breakdown, _ = batch_objective(params, feats, heads, tails, nh, nt, 0.3, 0.7)
        expected = (
            breakdown.link_nll_pos
            + breakdown.link_nll_neg
            + 0.3 * breakdown.l_s
            + 0.7 * breakdown.l_d
        )
        assert breakdown.total == pytest.approx(expected, abs=1e-12)

    def test_posteriors_stay_finite_and_normalised(self):
        rng = np.random.default_rng(10)
        params, feats, heads, tails, nh, nt = _random_case(rng)
        params.W[:] = rng.normal(scale=5.0, size=params.W.shape)
        breakdown, grads = batch_objective(params, feats, heads, tails, nh, nt, 0.1, 0.1)
        assert np.isfinite(breakdown.total)
        for g in grads.values():
            assert np.all(np.isfinite(g))


def test_stable_helpers_agree_with_naive_forms():
    x = np.linspace(-30, 30, 401)
    assert np.allclose(sigmoid(x), 1.0 / (1.0 + np.exp(-x)), atol=1e-12)
    assert np.allclose(softplus(x), np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0))
    p = np.asarray([0.0, 0.25, 0.75])
    assert entropy(p) == pytest.approx(-(0.25 * math.log(0.25) + 0.75 * math.log(0.75)))


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        params = init_params(rng, 3, 4, 6, 5)
        path = tmp_path / "model.json"
        save_checkpoint(path, params, vocab_hash="abc123")
        loaded, vocab_hash = load_checkpoint(path)
        assert vocab_hash == "abc123"
        for name, block in params.blocks().items():
            assert np.array_equal(block, loaded.blocks()[name])

    def test_vocab_hash_mismatch_rejected(self, tmp_path):
        rng = np.random.default_rng(2)
        params = init_params(rng, 3, 4, 6, 5)
        path = tmp_path / "model.json"
        save_checkpoint(path, params, vocab_hash="abc123")
        with pytest.raises(CheckpointError, match="vocabularies"):
            load_checkpoint(path, expected_vocab_hash="different")

    def test_shape_disagreement_rejected(self, tmp_path):
        import json

        rng = np.random.default_rng(2)
        params = init_params(rng, 3, 4, 6, 5)
        path = tmp_path / "model.json"
        save_checkpoint(path, params, vocab_hash="abc123")
        obj = json.loads(path.read_text())
        obj["n_entities"] = 99
        path.write_text(json.dumps(obj))
        with pytest.raises(CheckpointError, match="shapes"):
            load_checkpoint(path)
