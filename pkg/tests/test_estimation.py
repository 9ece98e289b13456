import math

import numpy as np
import pytest

from stabcv.estimation import (
    CvFoldError,
    DiscreteJointLaw,
    GaussianRegressionLaw,
    TwoClassGaussianLaw,
    cv_estimate,
    error_triple,
    load_learning_set_csv,
    oracle_risk,
    resub_estimate,
)
from stabcv.learners import (
    ConstantPredictor,
    Kernel,
    LearningSet,
    LossKind,
    constant_learner,
    erm_learner,
    knn_learner,
    regnet_learner,
)
from stabcv.resampling import build_scheme


def two_point_set():
    return LearningSet.from_arrays([[0.0], [1.0]], [1.0, 0.0], u=[0.3, 0.7])


def bernoulli_law(p1=0.4):
    # same x for both atoms; label 1 with mass p1
    return DiscreteJointLaw.from_table([[[0.0], 1.0, p1], [[0.0], 0.0, 1.0 - p1]])


class TestLaws:
    def test_sampling_deterministic_per_stream(self):
        law = TwoClassGaussianLaw(mean0=(-1.0,), mean1=(1.0,), sigma=1.0, prior1=0.5)
        a = law.sample(8, seed=3, stream=2)
        b = law.sample(8, seed=3, stream=2)
        c = law.sample(8, seed=3, stream=3)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.u, b.u)
        assert not np.array_equal(a.x, c.x)

    def test_discrete_probs_validated(self):
        with pytest.raises(ValueError):
            DiscreteJointLaw.from_table([[[0.0], 1.0, 0.5], [[1.0], 0.0, 0.6]])

    def test_probe_grids(self):
        disc = bernoulli_law()
        assert disc.probe_eval_set(10).size == 2  # support points
        reg = GaussianRegressionLaw(slope=(1.0, -1.0), noise=0.2, x_kind="uniform")
        probes = reg.probe_eval_set(64)
        assert probes.xs.shape == (64, 2)
        assert np.all(probes.xs >= -1.0) and np.all(probes.xs <= 1.0)
        cls = TwoClassGaussianLaw(mean0=(-1.0,), mean1=(1.0,), sigma=0.5, prior1=0.3)
        grid = cls.probe_eval_set(32)
        assert set(np.unique(grid.ys)) == {0.0, 1.0}


class TestCvEstimate:
    def test_two_point_one_nn_loo_is_one(self):
        # each held-out point is predicted by the only other point, which
        # carries the opposite label
        score = cv_estimate(knn_learner(1), two_point_set(), build_scheme(2, "leave-one-out"))
        assert score == 1.0

    def test_constant_learner_matches_overall_error_on_symmetric_schemes(self):
        rng = np.random.default_rng(2)
        data = LearningSet.from_arrays(rng.normal(size=(12, 1)),
                                       rng.integers(0, 2, size=12), u=rng.uniform(size=12))
        learner = constant_learner(1.0)
        overall = float(np.mean(data.y != 1.0))
        for scheme in (build_scheme(12, "leave-one-out"),
                       build_scheme(12, "k-fold", {"k": 4}),
                       build_scheme(12, "leave-nu-out-exact", {"nu": 2})):
            assert math.isclose(cv_estimate(learner, data, scheme), overall, abs_tol=1e-12)

    def test_holdout_is_plain_test_mean(self):
        data = LearningSet.from_arrays([[0.0], [1.0], [2.0], [3.0]],
                                       [1.0, 1.0, 0.0, 1.0], u=[0.1, 0.3, 0.5, 0.7])
        scheme = build_scheme(4, "hold-out", {"mask": [1, 1, 0, 0]})
        got = cv_estimate(knn_learner(1), data, scheme)
        model = knn_learner(1).fit(data.subset([0, 1]))
        oracle = np.mean([model.eval_loss(data.x[i], data.y[i], data.u[i]) for i in (2, 3)])
        assert math.isclose(got, float(oracle), abs_tol=1e-15)

    def test_loo_brute_force_equivalence(self):
        rng = np.random.default_rng(4)
        n = 14
        data = LearningSet.from_arrays(rng.normal(size=(n, 2)),
                                       rng.integers(0, 2, size=n), u=rng.uniform(size=n))
        learner = knn_learner(3)
        got = cv_estimate(learner, data, build_scheme(n, "leave-one-out"))
        total = 0.0
        for i in range(n):
            keep = [j for j in range(n) if j != i]
            model = learner.fit(data.subset(keep))
            total += model.eval_loss(data.x[i], data.y[i], data.u[i])
        assert abs(got - total / n) < 1e-12

    def test_kfold_is_mean_of_fold_means(self):
        rng = np.random.default_rng(5)
        n, k = 12, 3
        data = LearningSet.from_arrays(rng.normal(size=(n, 1)), rng.normal(size=n),
                                       u=rng.uniform(size=n))
        learner = regnet_learner(Kernel("gaussian", 1.0), 0.1)
        got = cv_estimate(learner, data, build_scheme(n, "k-fold", {"k": k}))
        fold_means = []
        fold = n // k
        for j in range(k):
            test = list(range(j * fold, (j + 1) * fold))
            train = [i for i in range(n) if i not in test]
            model = learner.fit(data.subset(train))
            fold_means.append(np.mean([model.eval_loss(data.x[i], data.y[i], data.u[i])
                                       for i in test]))
        assert abs(got - float(np.mean(fold_means))) < 1e-12

    def test_permutation_invariance_for_exchangeable_schemes(self):
        rng = np.random.default_rng(6)
        n = 9
        data = LearningSet.from_arrays(rng.normal(size=(n, 1)), rng.normal(size=n),
                                       u=rng.uniform(size=n))
        learners = [
            regnet_learner(Kernel("gaussian", 0.7), 0.2),
            erm_learner([ConstantPredictor(0.0, LossKind("squared-clipped", 4.0)),
                         ConstantPredictor(1.0, LossKind("squared-clipped", 4.0))]),
        ]
        for scheme_args in (("leave-one-out", None), ("leave-nu-out-exact", {"nu": 2})):
            scheme = build_scheme(n, scheme_args[0], scheme_args[1])
            for learner in learners:
                base = cv_estimate(learner, data, scheme)
                for _ in range(3):
                    perm = rng.permutation(n)
                    shuffled = data.subset(perm)
                    assert abs(cv_estimate(learner, shuffled, scheme) - base) < 1e-12

    def test_output_in_unit_interval(self):
        rng = np.random.default_rng(7)
        data = LearningSet.from_arrays(rng.normal(size=(10, 1)), rng.normal(size=10) * 5,
                                       u=rng.uniform(size=10))
        learner = regnet_learner(Kernel("linear"), 0.01)
        got = cv_estimate(learner, data, build_scheme(10, "k-fold", {"k": 5}))
        assert 0.0 <= got <= 1.0

    def test_scheme_size_mismatch(self):
        with pytest.raises(ValueError):
            cv_estimate(knn_learner(1), two_point_set(), build_scheme(3, "leave-one-out"))

    def test_fold_error_carries_index(self):
        data = LearningSet.from_arrays([[0.0], [1.0], [2.0]], [1.0, 0.0, 1.0],
                                       u=[0.2, 0.5, 0.8])
        learner = knn_learner(3)  # fold training sets only have 2 points
        with pytest.raises(CvFoldError) as err:
            cv_estimate(learner, data, build_scheme(3, "leave-one-out"))
        assert err.value.fold_index == 0


class TestResub:
    def test_one_nn_training_error_is_zero(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            n = int(rng.integers(2, 15))
            data = LearningSet.from_arrays(rng.normal(size=(n, 2)),
                                           rng.integers(0, 2, size=n), u=rng.uniform(size=n))
            assert resub_estimate(knn_learner(1), data) == 0.0

    def test_constant_counts_errors(self):
        data = LearningSet.from_arrays([[float(i)] for i in range(10)],
                                       [1.0] * 3 + [0.0] * 7, u=np.linspace(0.05, 0.95, 10))
        assert math.isclose(resub_estimate(constant_learner(0.0), data), 0.3, abs_tol=1e-15)

    def test_perfect_hypothesis_gives_zero(self):
        data = LearningSet.from_arrays([[-1.0], [1.0]], [0.0, 1.0], u=[0.4, 0.6])
        from stabcv.learners import ThresholdPredictor
        perfect = ThresholdPredictor(0, 0.0, 0.0, 1.0)
        learner = erm_learner([ConstantPredictor(0.0), perfect])
        assert resub_estimate(learner, data) == 0.0


class TestOracleRisk:
    def test_exact_weighted_sum(self):
        # predictor always answers 1; atom y=1 has mass 0.3 -> risk 0.7
        law = bernoulli_law(p1=0.3)
        value, stderr = oracle_risk(ConstantPredictor(1.0), law)
        assert math.isclose(value, 0.7, abs_tol=1e-15) and stderr == 0.0

    def test_constant_classifier_misclassification_mass(self):
        law = bernoulli_law(p1=0.4)
        value, _ = oracle_risk(ConstantPredictor(1.0), law)
        assert math.isclose(value, 0.6, abs_tol=1e-15)

    def test_monte_carlo_matches_exact_within_three_stderr(self):
        law = DiscreteJointLaw.from_table(
            [[[0.0], 1.0, 0.25], [[1.0], 0.0, 0.5], [[2.0], 1.0, 0.25]])
        pred = ConstantPredictor(1.0)
        exact, _ = oracle_risk(pred, law)
        mc, stderr = oracle_risk(pred, law, mc_draws=4000, seed=9)
        assert stderr > 0
        assert abs(mc - exact) <= 3 * stderr

    def test_continuous_law_requires_mc(self):
        law = GaussianRegressionLaw(slope=(1.0,), noise=0.1)
        with pytest.raises(ValueError):
            oracle_risk(ConstantPredictor(0.0), law)


class TestErrorTriple:
    def test_one_nn_pathology_smoke(self):
        law = TwoClassGaussianLaw(mean0=(-0.5,), mean1=(0.5,), sigma=1.0, prior1=0.5)
        data = law.sample(20, seed=10)
        triple = error_triple(knn_learner(1), data, build_scheme(20, "leave-one-out"),
                              law, mc_draws=2000, seed=10)
        assert triple.r_hat == 0.0
        assert 0.0 <= triple.gap <= 1.0
        assert triple.r_tilde > 0.1  # overlap makes the true risk strictly positive

    def test_constant_learner_cv_equals_resub(self):
        law = bernoulli_law()
        data = law.sample(15, seed=11)
        learner = constant_learner(1.0)
        triple = error_triple(learner, data, build_scheme(15, "leave-one-out"), law)
        assert math.isclose(triple.r_cv, triple.r_hat, abs_tol=1e-12)

    def test_huge_reg_collapses_to_zero_function(self):
        # with the fit forced to zero, every estimate equals the risk of the
        # zero function, computable exactly on the discrete law
        law = DiscreteJointLaw.from_table(
            [[[-1.0], 1.0, 0.5], [[1.0], 0.5, 0.5]])
        data = law.sample(12, seed=12)
        learner = regnet_learner(Kernel("gaussian", 1.0), 1e12)
        triple = error_triple(learner, data, build_scheme(12, "k-fold", {"k": 4}), law)
        zero_risk = 0.5 * min(1.0, 1.0**2) + 0.5 * min(1.0, 0.5**2)
        assert abs(triple.r_tilde - zero_risk) < 1e-9
        assert abs(triple.r_cv - np.mean(np.minimum(data.y**2, 1.0))) < 1e-9
        assert abs(triple.r_hat - np.mean(np.minimum(data.y**2, 1.0))) < 1e-9

    def test_json_payload(self):
        law = bernoulli_law()
        data = law.sample(10, seed=13)
        triple = error_triple(constant_learner(0.0), data,
                              build_scheme(10, "leave-one-out"), law)
        payload = triple.to_json_dict()
        assert set(payload) == {"r_cv", "r_tilde", "r_tilde_stderr", "r_hat", "gap"}
        assert all(0.0 <= payload[k] <= 1.0 for k in ("r_cv", "r_tilde", "r_hat"))


class TestCsvLoader:
    def test_round_trip_with_u_column(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("x1,x2,y,u\n0.0,1.0,1,0.25\n2.0,-1.0,0,0.75\n")
        data = load_learning_set_csv(path)
        assert data.n == 2 and data.dim == 2
        assert list(data.y) == [1.0, 0.0]
        assert list(data.u) == [0.25, 0.75]

    def test_missing_u_drawn_from_seed(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("x1,y\n0.0,1\n1.0,0\n2.0,1\n")
        a = load_learning_set_csv(path, seed=4)
        b = load_learning_set_csv(path, seed=4)
        assert np.array_equal(a.u, b.u)
        assert np.all((a.u >= 0) & (a.u <= 1))

    def test_requires_label_column(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("x1,x2\n0.0,1.0\n")
        with pytest.raises(ValueError):
            load_learning_set_csv(path)
