import math

import numpy as np
import pytest

from regional.geometry import Box
from regional.informativeness import (
    MethodKind,
    cosine_similarity,
    dmal_score,
    entropy,
    entropy_rows,
    method_scores,
    score,
)
from regional.scene import CandidateObject


def make_candidate(cid=0, probs=(0.5, 0.5), labeledness=None, feature=(1.0, 0.0)):
    return CandidateObject(
        id=cid,
        image_id=0,
        box=Box(0, 0, 10, 10),
        class_probs=np.array(probs, dtype=np.float64),
        feature=np.array(feature, dtype=np.float64),
        labeledness=labeledness,
    )


class TestEntropy:
    def test_one_hot_is_zero(self):
        assert entropy([1.0, 0.0, 0.0]) == 0.0

    def test_uniform_is_log_c(self):
        for c in (2, 10, 35):
            assert entropy([1.0 / c] * c) == pytest.approx(math.log(c), abs=1e-12)

    def test_direct_summation(self):
        probs = [0.5, 0.25, 0.25]
        expected = -sum(p * math.log(p) for p in probs)
        assert entropy(probs) == pytest.approx(expected, abs=1e-12)
        assert entropy(probs) == pytest.approx(1.0397207708399179, abs=1e-9)

    def test_rejects_off_simplex(self):
        with pytest.raises(ValueError):
            entropy([0.5, 0.4])
        with pytest.raises(ValueError):
            entropy([0.7, 0.4, -0.1])

    def test_accepts_within_tolerance(self):
        assert entropy([0.5, 0.5 + 5e-7]) > 0

    def test_permutation_invariant(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            p = rng.dirichlet(np.ones(6))
            q = rng.permutation(p)
            assert entropy(p) == pytest.approx(entropy(q), abs=1e-12)

    def test_bounded_by_log_c(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            p = rng.dirichlet(np.ones(8))
            assert 0.0 <= entropy(p) <= math.log(8) + 1e-12

    def test_rows_matches_scalar(self):
        rng = np.random.default_rng(2)
        probs = rng.dirichlet(np.ones(5), size=20)
        rows = entropy_rows(probs)
        for i in range(20):
            assert rows[i] == pytest.approx(entropy(probs[i]), abs=1e-12)


class TestCosineSimilarity:
    def test_parallel(self):
        v = np.array([2.0, 3.0, -1.0])
        assert cosine_similarity(v, v) == pytest.approx(1.0)
        assert cosine_similarity(v, 7.5 * v) == pytest.approx(1.0)

    def test_antiparallel(self):
        v = np.array([1.0, -2.0])
        assert cosine_similarity(v, -v) == pytest.approx(-1.0)

    def test_orthogonal(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 3.0])) == 0.0

    def test_forty_five_degrees(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([1.0, 1.0])) == pytest.approx(
            1 / math.sqrt(2)
        )

    def test_rejects_zero_vector(self):
        with pytest.raises(ValueError):
            cosine_similarity(np.zeros(3), np.ones(3))

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cosine_similarity(np.ones(3), np.ones(4))


class TestScore:
    def test_maxent_uniform_ten_classes(self):
        cand = make_candidate(probs=[0.1] * 10)
        assert score(cand, MethodKind.MAX_ENT) == pytest.approx(math.log(10), abs=1e-12)

    def test_dmal_one_hot(self):
        cand = make_candidate(probs=[1.0, 0.0, 0.0], labeledness=1.0)
        assert score(cand, MethodKind.DMAL) == pytest.approx(1.0)

    def test_dmal_uniform(self):
        cand = make_candidate(probs=[0.1] * 10, labeledness=0.5)
        assert score(cand, MethodKind.DMAL) == pytest.approx(1.5)

    def test_dmal_requires_labeledness(self):
        cand = make_candidate(probs=[0.5, 0.5], labeledness=None)
        with pytest.raises(ValueError, match="labeledness"):
            score(cand, MethodKind.DMAL)

    def test_dmal_monotone_in_labeledness(self):
        probs = [0.3, 0.3, 0.4]
        values = [dmal_score(l, np.array(probs)) for l in (0.0, 0.25, 0.5, 0.75, 1.0)]
        assert values == sorted(values)
        assert len(set(values)) == len(values)

    def test_dmal_monotone_in_entropy(self):
        sharp = dmal_score(0.5, np.array([0.9, 0.05, 0.05]))
        flat = dmal_score(0.5, np.array([1 / 3, 1 / 3, 1 / 3]))
        assert flat > sharp

    def test_model_rand_needs_rng(self):
        with pytest.raises(ValueError):
            score(make_candidate(), MethodKind.MODEL_RAND)

    def test_model_rand_reproducible(self):
        cands = [make_candidate(cid=i) for i in range(10)]
        a = method_scores(cands, MethodKind.MODEL_RAND, np.random.default_rng(42))
        b = method_scores(cands, MethodKind.MODEL_RAND, np.random.default_rng(42))
        assert np.array_equal(a, b)
        assert np.all((a >= 0) & (a < 1))

    def test_random_has_no_object_score(self):
        with pytest.raises(ValueError):
            score(make_candidate(), MethodKind.RANDOM)

    def test_method_scores_matches_scalar(self):
        rng = np.random.default_rng(3)
        cands = [
            make_candidate(cid=i, probs=rng.dirichlet(np.ones(4)), labeledness=float(rng.random()))
            for i in range(15)
        ]
        for method in (MethodKind.MAX_ENT, MethodKind.DMAL):
            batch = method_scores(cands, method)
            for cand, value in zip(cands, batch):
                assert value == pytest.approx(score(cand, method), abs=1e-12)
