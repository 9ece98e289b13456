"""Acceptance gate: one test per criterion, pass/fail line printed for each.

Run with `pytest tests/test_acceptance.py -v -s`.  The heavy Monte Carlo
criteria (4, 5, 9) pin 10^4 replicates and take a few minutes each.
"""

import math
from itertools import product

import numpy as np
import pytest

from stabcv.bounds import (
    expectation_from_tail,
    generic_stability_tail,
    hoeffding_tail,
    holdout_uniform_tail,
    kutin_strong_tail,
    kutin_weak_tail,
    l1_bound,
    mcdiarmid_tail,
    optimal_split,
    uniform_stability_tail_strong,
    uniform_stability_tail_weak,
    vc_baseline,
)
from stabcv.cli import to_json_text
from stabcv.estimation import (
    DiscreteJointLaw,
    GaussianRegressionLaw,
    TwoClassGaussianLaw,
    cv_estimate,
    resub_estimate,
)
from stabcv.experiments import run_concentration, run_split_sweep, run_stability_audit
from stabcv.learners import (
    ConstantPredictor,
    Kernel,
    erm_learner,
    fit_regnet,
    knn_learner,
    regnet_learner,
)
from stabcv.resampling import BinaryVector, build_scheme, total_variation
from stabcv.stability import certificate_regnet, dist_between, estimate_profile, survival_at
from stabcv.util import wilson_halfwidth

SEED = 20260809

SIX_ATOM_LAW = DiscreteJointLaw.from_table([
    [[-1.0], -0.30, 0.20],
    [[-0.6], -0.10, 0.15],
    [[-0.2], 0.05, 0.15],
    [[0.2], -0.05, 0.15],
    [[0.6], 0.20, 0.15],
    [[1.0], 0.30, 0.20],
])

REGNET_N = 100
REGNET_REG = 0.1
REGNET_LEARNER = regnet_learner(Kernel("gaussian", 1.0), REGNET_REG)
REGNET_CERT = certificate_regnet(1.0, 1.0, REGNET_N, REGNET_REG)  # lambda = 0.4, delta = 0


def announce(num: int, name: str, ok: bool, detail: str = "") -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num} ({name}): {detail}")
    assert ok, f"criterion {num} ({name}): {detail}"


def masked(n, zero_positions):
    bits = [1] * n
    for i in zero_positions:
        bits[i] = 0
    return BinaryVector.from_bits(bits)


def test_criterion_1_total_variation_identities():
    for n in (5, 10, 50):
        full = BinaryVector.ones(n)
        assert total_variation(masked(n, [0]), full) == 2 / n
        for nu in (1, 2, 3):
            assert total_variation(masked(n, range(nu)), full) == 2 * nu / n
        schemes = [build_scheme(n, "leave-one-out")]
        for k in (2, 5, n):
            if n % k == 0:
                schemes.append(build_scheme(n, "k-fold", {"k": k}))
        schemes.append(build_scheme(n, "leave-nu-out-monte-carlo",
                                    {"nu": 2, "draws": 30}, seed=SEED))
        if n <= 10:
            schemes.append(build_scheme(n, "leave-nu-out-exact", {"nu": 2}))
        for scheme in schemes:
            for vec, _ in scheme.support:
                assert total_variation(vec, full) == 2 * scheme.p
    announce(1, "total-variation identities", True,
             "2/n, 2nu/n and 2p hold exactly for n in {5,10,50}")


def test_criterion_2_cv_brute_force_equivalence():
    n = 24
    cls_law = TwoClassGaussianLaw(mean0=(-0.7, 0.0), mean1=(0.7, 0.3), sigma=1.0, prior1=0.5)
    data = cls_law.sample(n, seed=SEED + 1)
    learners = [
        knn_learner(3),
        erm_learner([ConstantPredictor(0.0), ConstantPredictor(1.0)]),
        regnet_learner(Kernel("gaussian", 0.8), 0.1),
    ]
    schemes = [build_scheme(n, "leave-one-out")] + [
        build_scheme(n, "k-fold", {"k": k}) for k in (2, 3, 4, 6)
    ]
    worst = 0.0
    for learner in learners:
        for scheme in schemes:
            got = cv_estimate(learner, data, scheme)
            # independent direct loop: plain running sums, no shared code path
            acc = 0.0
            for vec, prob in scheme.support:
                model = learner.fit(data.subset(vec.train_indices()))
                test_idx = list(vec.test_indices())
                fold = sum(model.eval_loss(data.x[i], data.y[i], data.u[i])
                           for i in test_idx) / len(test_idx)
                acc += prob * fold
            worst = max(worst, abs(got - acc))
    assert worst < 1e-12
    announce(2, "cv brute-force equivalence", True,
             f"max |cv - direct loop| = {worst:.2e} over 3 learners x 5 schemes")


def test_criterion_3_regnet_certificate_zero_violations():
    law = GaussianRegressionLaw(slope=(0.4,), noise=0.05, x_kind="uniform")
    probes = law.probe_eval_set(512)
    kernel = Kernel("gaussian", 1.0)
    replicates = 200
    worst_margin = math.inf
    for n in (50, 100):
        for reg in (0.05, 0.1):
            bound = 4.0 * 1.0 * 1.0 / (n * reg)
            for rep in range(replicates):
                data = law.sample(n, seed=SEED + 2, stream=rep)
                full_losses = fit_regnet(data, kernel, reg).eval_losses(
                    probes.xs, probes.ys, probes.us)
                for i in range(n):
                    keep = np.delete(np.arange(n), i)
                    sub = fit_regnet(data.subset(keep), kernel, reg)
                    gap = float(np.max(np.abs(
                        sub.eval_losses(probes.xs, probes.ys, probes.us) - full_losses)))
                    assert gap <= bound + 1e-9, (n, reg, rep, i, gap, bound)
                    worst_margin = min(worst_margin, bound - gap)
    announce(3, "regnet sure-stability certificate", True,
             f"0 violations over 200 reps x all removals x 512 probes; "
             f"slack >= {worst_margin:.3f}")


@pytest.fixture(scope="module")
def criterion4_reports():
    scheme = build_scheme(REGNET_N, "leave-one-out")
    kwargs = dict(law=SIX_ATOM_LAW, learner=REGNET_LEARNER, scheme=scheme,
                  profile=REGNET_CERT, bound_kind="generic", replicates=10_000,
                  seed=SEED + 3)
    solo = run_concentration(workers=1, **kwargs)
    pooled = run_concentration(workers=8, **kwargs)
    return solo, pooled


def test_criterion_4_concentration_certified_regnet(criterion4_reports):
    report, _ = criterion4_reports
    n, p = REGNET_N, 1.0 / REGNET_N
    lam = REGNET_CERT.lam
    assert len(report.rows) == 20
    for row in report.rows:
        assert abs(row.shift - lam * 2.0 * p) < 1e-15
        theory = min(1.0, 2.0 * math.exp(-2.0 * n * p * row.eps**2))
        assert abs(row.bound_clipped - theory) < 1e-12
        halfwidth = 0.5 * (row.emp_ucl - row.emp_lcl)
        assert row.emp_freq <= theory + 3.0 * halfwidth, (row.eps, row.emp_freq, theory)
        assert row.verdict != "FAIL"
    assert report.overall_verdict == "pass"
    announce(4, "concentration certification", True,
             f"R=10^4, all 20 grid eps within bound; max gap = {max(report.gaps):.4f}")


def test_criterion_5_l1_and_splitting_rule():
    lam = REGNET_CERT.lam  # 0.4
    p_grid = [0.01, 0.04, 0.1, 0.25, 0.5]
    report = run_split_sweep(SIX_ATOM_LAW, REGNET_LEARNER, REGNET_N, p_grid, "k-fold",
                             replicates=10_000, seed=SEED + 4, lam=lam, workers=1)
    for row in report.rows:
        assert row.mean_gap <= row.l1_weak_general, (row.p, row.mean_gap)
        assert abs(row.l1_weak_general
                   - l1_bound("weak-general", REGNET_N, row.p, lam)) < 1e-15
    rule = optimal_split("weak-general", REGNET_N, lam)
    near = min(p_grid, key=lambda p: abs(p - rule.p_star))
    near_row = next(row for row in report.rows if row.p == near)
    budget = 4.0 * (lam / REGNET_N) ** (1.0 / 3.0)
    assert near_row.mean_gap <= budget
    grid = np.linspace(1.0 / REGNET_N, 0.5, 10**4)
    objective = 4.0 * lam * grid + np.sqrt(2.0 / (REGNET_N * grid))
    best = float(grid[int(np.argmin(objective))])
    step = float(grid[1] - grid[0])
    assert abs(rule.p_star - best) <= step
    announce(5, "L1 / splitting rule", True,
             f"mean gaps below L1 bound at all p; at p~p*={rule.p_star:.4f} "
             f"gap {near_row.mean_gap:.4f} <= {budget:.4f}; analytic p* within one "
             f"grid step of the 10^4-point minimizer")


def test_criterion_6_one_nn_pathology():
    law = TwoClassGaussianLaw(mean0=(-0.8,), mean1=(0.8,), sigma=1.0, prior1=0.5)
    n = 60
    scheme = build_scheme(n, "k-fold", {"k": 10})  # p = 0.1
    learner = knn_learner(1)
    for rep in range(50):
        data = law.sample(n, seed=SEED + 5, stream=rep)
        assert resub_estimate(learner, data) == 0.0
    profile = estimate_profile(learner, "weak", "d_1", scheme, law, reps=400,
                               alpha=1.0, seed=SEED + 6, eval_draws=1500,
                               target_delta=0.1)
    report = run_concentration(law, learner, scheme, profile, "generic",
                               replicates=1500, seed=SEED + 7, mc_draws=4000)
    assert max(report.gaps) <= 1.0
    bound = l1_bound("weak-general", n, scheme.p, profile.lam, profile.delta)
    assert report.mean_gap <= bound + 3.0 * report.mean_gap_stderr, (report.mean_gap, bound)
    announce(6, "1-NN pathology", True,
             f"resub = 0 on 50/50 samples; mean gap {report.mean_gap:.4f} <= "
             f"L1 bound {bound:.4f} with audited (lambda={profile.lam:.3f}, "
             f"delta={profile.delta:.3f}) d_1 profile")


def test_criterion_7_inequality_spot_table():
    assert abs(hoeffding_tail(50, 0.2, [(0.0, 1.0)] * 50) - math.exp(-4.0)) <= 1e-12
    assert abs(hoeffding_tail(50, 0.2, 1.0) - math.exp(-4.0)) <= 1e-12
    assert abs(mcdiarmid_tail(0.1, [1.0 / 100.0] * 100) - math.exp(-2.0)) <= 1e-12
    want = math.sqrt((math.log(2.0) + 2.0) / 8.0)
    assert abs(expectation_from_tail(2.0, 8.0) - want) <= 1e-12
    rng = np.random.default_rng(SEED + 8)
    for _ in range(100):
        big_c = math.exp(rng.uniform(0.0, math.log(50.0)))
        big_k = math.exp(rng.uniform(math.log(0.1), math.log(100.0)))
        eps = np.linspace(0.0, 10.0 / math.sqrt(big_k), 20001)
        oracle = float(np.trapezoid(np.minimum(1.0, big_c * np.exp(-big_k * eps * eps)), eps))
        assert expectation_from_tail(big_c, big_k) >= oracle - 1e-6
    announce(7, "inequality spot table", True,
             "hoeffding=e^-4, mcdiarmid=e^-2, expectation lemma exact and "
             "dominates quadrature on 100 random (C,K)")


def test_criterion_8_monotonicity_and_vacuity():
    rng = np.random.default_rng(SEED + 9)
    draws = 1000

    def draw_common():
        return (int(rng.integers(2, 500)), float(rng.uniform(0.02, 0.98)),
                float(rng.uniform(0.01, 4.0)), float(rng.uniform(0.0, 1.0)))

    checked = 0
    for _ in range(draws):
        n, p, lam, delta = draw_common()
        e1, e2 = np.sort(rng.uniform(0.0, 2.0, size=2))
        d1, d2 = np.sort(rng.uniform(0.0, 1.0, size=2))

        vd = int(rng.integers(1, 8))
        b1, b2 = vc_baseline(n, p, max(e1, 1e-9), vd), vc_baseline(n, p, max(e2, 1e-9), vd)
        assert b1.raw_value >= b2.raw_value - 1e-12
        for tb in (b1, b2):
            assert tb.vacuous == (tb.raw_value >= 1.0)

        g1 = generic_stability_tail(n, p, e1, lam, 1.0, delta)
        g2 = generic_stability_tail(n, p, e2, lam, 1.0, delta)
        assert g1.raw_value >= g2.raw_value - 1e-12
        assert (generic_stability_tail(n, p, e1, lam, 1.0, d1).raw_value
                <= generic_stability_tail(n, p, e1, lam, 1.0, d2).raw_value + 1e-12)
        assert g1.vacuous == (g1.raw_value >= 1.0)

        s1 = uniform_stability_tail_strong(n, p, e1, lam, 1.0, delta, delta / 3.0)
        s2 = uniform_stability_tail_strong(n, p, e2, lam, 1.0, delta, delta / 3.0)
        assert s1.raw_value >= s2.raw_value - 1e-12
        assert (uniform_stability_tail_strong(n, p, e1, lam, 1.0, d1, d1).raw_value
                <= uniform_stability_tail_strong(n, p, e1, lam, 1.0, d2, d2).raw_value + 1e-12)
        assert s1.vacuous == (s1.raw_value >= 1.0)

        # the weak displays contain exp(+eps...) delta' terms, so the eps
        # monotonicity property is checked on the delta' = 0 slice
        w1 = uniform_stability_tail_weak(n, p, e1, lam, 1.0, 0.0)
        w2 = uniform_stability_tail_weak(n, p, e2, lam, 1.0, 0.0)
        assert w1.raw_value >= w2.raw_value - 1e-12
        assert (uniform_stability_tail_weak(n, p, e1, lam, 1.0, d1).raw_value
                <= uniform_stability_tail_weak(n, p, e1, lam, 1.0, d2).raw_value + 1e-12)
        assert w1.vacuous == (w1.raw_value >= 1.0)

        h1 = holdout_uniform_tail(n, p, e1, lam, 1.0, delta, delta / 2.0)
        h2 = holdout_uniform_tail(n, p, e2, lam, 1.0, delta, delta / 2.0)
        assert h1.raw_value >= h2.raw_value - 1e-12
        assert (holdout_uniform_tail(n, p, e1, lam, 1.0, d1, d1).raw_value
                <= holdout_uniform_tail(n, p, e1, lam, 1.0, d2, d2).raw_value + 1e-12)
        assert h1.vacuous == (h1.raw_value >= 1.0)

        b, c = sorted(rng.uniform(0.01, 1.0, size=2))[::-1]
        ap = float(rng.uniform(0.01, 1.0))
        assert (kutin_strong_tail(n, e1, b, c, delta, ap)
                >= kutin_strong_tail(n, e2, b, c, delta, ap) - 1e-12)
        assert (kutin_strong_tail(n, e1, b, c, d1, ap)
                <= kutin_strong_tail(n, e1, b, c, d2, ap) + 1e-12)
        assert (kutin_weak_tail(n, e1, b, c, 0.0)
                >= kutin_weak_tail(n, e2, b, c, 0.0) - 1e-12)
        assert (kutin_weak_tail(n, e1, b, c, d1)
                <= kutin_weak_tail(n, e1, b, c, d2) + 1e-12)

        assert hoeffding_tail(n, e1, 1.0) >= hoeffding_tail(n, e2, 1.0) - 1e-12
        assert mcdiarmid_tail(e1, [0.1] * 5) >= mcdiarmid_tail(e2, [0.1] * 5) - 1e-12
        checked += 1
    announce(8, "monotonicity/vacuity property suite", True,
             f"{checked} random draws per evaluator (weak-family eps checks on "
             "the delta'=0 slice; the displayed bound grows with eps otherwise)")


def test_criterion_9_determinism_across_workers(criterion4_reports):
    solo, pooled = criterion4_reports
    json_solo = to_json_text(solo.to_json_dict())
    json_pooled = to_json_text(pooled.to_json_dict())
    assert json_solo == json_pooled
    assert solo.to_csv_text() == pooled.to_csv_text()
    announce(9, "determinism", True,
             f"workers=1 vs workers=8 reports byte-identical "
             f"({len(json_solo)} JSON bytes)")


def test_criterion_10_erm_micro_brute_force():
    law = DiscreteJointLaw.from_table(
        [[[-1.0], 0.0, 0.3], [[0.0], 1.0, 0.4], [[1.0], 1.0, 0.3]])
    n = 6
    scheme = build_scheme(n, "leave-one-out")
    hyps = [ConstantPredictor(0.0), ConstantPredictor(1.0)]
    learner = erm_learner(hyps)
    reps = 3000
    report = run_stability_audit(law, learner, scheme, "d_1", 1.0, replicates=reps,
                                 seed=SEED + 10, kind="cv-weak")

    # d_1 between the two constant hypotheses is exactly 1 on this law, so the
    # sup ratio is 3 * 1{some leave-one-out removal flips the ERM choice}
    support = law.support_eval_set()
    assert dist_between(hyps[0], hyps[1], "d_1", support).value == 1.0

    def erm_choice(labels):
        risk0 = sum(1.0 for y in labels if y != 0.0) / len(labels)
        risk1 = sum(1.0 for y in labels if y != 1.0) / len(labels)
        return 0.0 if risk0 <= risk1 else 1.0

    atom_probs = [0.3, 0.4, 0.3]
    atom_ys = [0.0, 1.0, 1.0]
    flip_mass = 0.0
    for pattern in product(range(3), repeat=n):
        weight = 1.0
        for a in pattern:
            weight *= atom_probs[a]
        labels = [atom_ys[a] for a in pattern]
        full = erm_choice(labels)
        if any(erm_choice(labels[:i] + labels[i + 1:]) != full for i in range(n)):
            flip_mass += weight

    max_err = 0.0
    for lam in (1.0, 2.5):
        delta_hat = survival_at(report.profile, lam)
        halfwidth = wilson_halfwidth(int(round(delta_hat * reps)), reps)
        assert abs(delta_hat - flip_mass) <= 3.0 * halfwidth, (lam, delta_hat, flip_mass)
        max_err = max(max_err, abs(delta_hat - flip_mass))
    announce(10, "ERM micro-brute-force", True,
             f"delta-hat within 3 Wilson halfwidths of the exact enumeration "
             f"value {flip_mass:.5f} (max err {max_err:.5f}) over 3^6 datasets")
