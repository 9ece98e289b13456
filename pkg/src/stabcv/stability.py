"""Distances between fitted predictors and empirical stability profiles.

A learner is (lambda, delta, d)-stable when the distance between the
predictors fitted on a masked subsample and on the full sample exceeds
lambda * (mask distance)^alpha with probability at most delta.  The profile
estimator Monte Carlos that event: it draws learning sets, refits per mask,
and reports the survival curve of the ratio d(psi_U, psi_n) / (2p)^alpha.

"Strong" kinds allow one adversarial point; the continuous search over z is
approximated by a finite probe list, so strong-kind estimates are lower
bounds on badness.  "cv" kinds take the sup over the scheme's support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .bounds import TailBound
from .estimation import EvalSet, SyntheticDistribution
from .learners import Learner, LearningSet, Predictor
from .resampling import ResamplingScheme
from .util import binomial_stderr, wilson_interval

PROFILE_KINDS = ("weak", "strong", "cv-weak", "cv-strong", "sure")
DISTANCES = ("d_inf", "d_1", "d_e")
DEFAULT_SUPPORT_CAP = 10**4
DEFAULT_DELTA_TARGETS = (0.5, 0.1, 0.05, 0.01)


class DistanceResult(NamedTuple):
    value: float
    stderr: float


def dist_between(p1: Predictor, p2: Predictor, which: str, ref: EvalSet) -> DistanceResult:
    """Distance between two fitted predictors through their losses.

    d_inf: max |psi1 - psi2| over the probe points (an under-estimate of the
           true sup on continuous domains).
    d_1:   P|psi1 - psi2|  -- exact when ref carries probabilities, Monte
           Carlo mean with standard error otherwise.
    d_e:   |P(psi1 - psi2)| -- same convention.
    """
    if which not in DISTANCES:
        raise ValueError(f"unknown distance {which!r}")
    if ref.size == 0:
        raise ValueError("empty probe set")
    gaps = p1.eval_losses(ref.xs, ref.ys, ref.us) - p2.eval_losses(ref.xs, ref.ys, ref.us)
    if which == "d_inf":
        return DistanceResult(float(np.max(np.abs(gaps))), 0.0)
    if ref.exact:
        if which == "d_1":
            return DistanceResult(float(np.dot(ref.probs, np.abs(gaps))), 0.0)
        return DistanceResult(abs(float(np.dot(ref.probs, gaps))), 0.0)
    stderr = float(np.std(gaps, ddof=1) / math.sqrt(ref.size)) if ref.size > 1 else 0.0
    if which == "d_1":
        return DistanceResult(float(np.mean(np.abs(gaps))), stderr)
    return DistanceResult(abs(float(np.mean(gaps))), stderr)


@dataclass(frozen=True)
class StabilityProfile:
    """(kind, distance, alpha, lambda, delta) plus the measured survival curve.

    sure stability means delta == 0.  Estimated profiles carry the replicate
    count, the delta-hat curve with standard errors, and the lambda achieving
    each requested target delta (empirical (1-delta)-quantiles of the ratios).
    """

    kind: str
    distance: str
    alpha: float
    lam: float
    delta: float
    provenance: str
    reps: int | None = None
    seed: int | None = None
    curve: tuple[tuple[float, float, float], ...] | None = None
    lambda_at_delta: tuple[tuple[float, float], ...] | None = None
    delta_wilson: tuple[float, float] | None = None
    notes: str = ""

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown stability kind {self.kind!r}")
        if self.distance not in DISTANCES:
            raise ValueError(f"unknown distance {self.distance!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if self.lam < 0 or not 0.0 <= self.delta <= 1.0:
            raise ValueError("need lam >= 0 and delta in [0, 1]")
        if self.provenance not in ("certified", "estimated"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.kind == "sure" and self.delta != 0.0:
            raise ValueError("sure stability means delta = 0")

    def to_json_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "distance": self.distance,
            "alpha": self.alpha,
            "lambda": self.lam,
            "delta": self.delta,
            "provenance": self.provenance,
            "reps": self.reps,
            "seed": self.seed,
        }
        if self.curve is not None:
            out["curve"] = [list(row) for row in self.curve]
        if self.lambda_at_delta is not None:
            out["lambda_at_delta"] = [list(row) for row in self.lambda_at_delta]
        if self.delta_wilson is not None:
            out["delta_wilson"] = list(self.delta_wilson)
        if self.notes:
            out["notes"] = self.notes
        return out


def certificate_regnet(m_bound: float, kappa: float, n: int, lambda_reg: float) -> StabilityProfile:
    """Sure-stability certificate for the regularization network.

    When the kernel norm is bounded by kappa and the squared error by m_bound,
    removing one training point moves the loss function by at most
    4 * m_bound * kappa^2 / (n * lambda_reg) in sup norm.  The bound lives on
    the raw squared-error scale; with the [0,1] loss squared-clipped(M) it
    remains valid for m_bound >= 1 since clipping and the 1/M rescale only
    shrink gaps.
    """
    if min(m_bound, kappa, n, lambda_reg) <= 0:
        raise ValueError("all certificate inputs must be > 0")
    lam = 4.0 * m_bound * kappa * kappa / (n * lambda_reg)
    return StabilityProfile(
        kind="sure",
        distance="d_inf",
        alpha=1.0,
        lam=lam,
        delta=0.0,
        provenance="certified",
        notes="per-removal sup-loss bound at leave-one-out mask scale",
    )


def certificate_knn_tail(n: int, k: int, d: int, eps: float) -> TailBound:
    """Tail certificate for the k-nearest rule under one-point removal:

        6 exp( -(n-1) eps^3 / (54 k (gamma_d + 2)) ),  gamma_d = 3^d - 1.

    gamma_d is the maximum number of points sharing a nearest neighbor in
    dimension d (upper bound).  The 54 in the denominator is the conservative
    constant; a sharper one is achievable but not used here.  Values above 1
    are flagged vacuous.
    """
    if n < 2 or k < 1 or d < 1 or eps <= 0:
        raise ValueError("need n >= 2, k >= 1, d >= 1, eps > 0")
    gamma_d = 3.0**d - 1.0
    raw = 6.0 * math.exp(-(n - 1.0) * eps**3 / (54.0 * k * (gamma_d + 2.0)))
    return TailBound(
        threshold_shift=0.0,
        raw_value=raw,
        inputs={"formula": "knn-removal-tail", "n": n, "k": k, "d": d,
                "eps": eps, "gamma_d": gamma_d},
    )


def _append_example(data: LearningSet, x, y: float, u: float) -> LearningSet:
    return LearningSet(
        x=np.vstack([data.x, np.asarray(x, dtype=float)[None, :]]),
        y=np.append(data.y, y),
        u=np.append(data.u, u),
    )


def _fixed_distance_ref(law: SyntheticDistribution, distance: str,
                        dinf_grid: int) -> EvalSet | None:
    """Replicate-independent evaluation set, when one exists."""
    if distance == "d_inf":
        return law.probe_eval_set(dinf_grid)
    return law.support_eval_set()


def estimate_profile(
    learner: Learner,
    kind: str,
    distance: str,
    scheme: ResamplingScheme,
    data_law: SyntheticDistribution,
    reps: int,
    alpha: float = 1.0,
    seed: int = 0,
    probes: EvalSet | None = None,
    target_delta: float = 0.05,
    delta_targets: tuple[float, ...] = DEFAULT_DELTA_TARGETS,
    dinf_grid: int = 512,
    eval_draws: int = 2000,
    support_cap: int = DEFAULT_SUPPORT_CAP,
) -> StabilityProfile:
    """Monte Carlo estimate of a stability profile.

    Per replicate the ratio d(psi_U, psi_n) / (2p)^alpha is computed for the
    scheme's first support mask (weak/strong kinds) or its sup over the whole
    support (cv kinds).  Strong kinds rebuild the learning set as n-1 i.i.d.
    draws plus each probe point in turn and keep the worst ratio.  The
    reported lambda is the empirical (1 - target_delta)-quantile of the
    ratios; delta is the measured exceedance frequency at that lambda.
    """
    if kind not in ("weak", "strong", "cv-weak", "cv-strong"):
        raise ValueError(f"cannot estimate kind {kind!r}")
    if reps < 100:
        raise ValueError("reps must be >= 100")
    cv_kind = kind.startswith("cv-")
    strong_kind = kind.endswith("strong")
    if cv_kind and scheme.kappa > support_cap:
        raise ValueError(
            f"scheme support {scheme.kappa} exceeds the cv-kind cap {support_cap}"
        )
    if strong_kind and probes is None:
        grid = data_law.probe_eval_set(32)
        draws = data_law.sample_eval_set(32, seed, stream=(1 << 21))
        probes = EvalSet(
            xs=np.vstack([grid.xs, draws.xs]),
            ys=np.append(grid.ys, draws.ys),
            us=np.append(grid.us, draws.us),
        )

    n = scheme.n
    denom = (2.0 * scheme.p) ** alpha
    masks = [vec for vec, _ in scheme.support] if cv_kind else [scheme.support[0][0]]

    def ratio_for(data: LearningSet, ref: EvalSet) -> float:
        psi_full = learner.fit(data)
        worst = 0.0
        for vec in masks:
            psi_masked = learner.fit(data.subset(vec.train_indices()))
            worst = max(worst, dist_between(psi_masked, psi_full, distance, ref).value)
        return worst / denom

    fixed_ref = _fixed_distance_ref(data_law, distance, dinf_grid)
    ratios = np.empty(reps)
    for rep in range(reps):
        if fixed_ref is not None:
            ref = fixed_ref
        else:
            ref = data_law.sample_eval_set(eval_draws, seed, stream=(1 << 20) + rep)
        if strong_kind:
            base = data_law.sample(n - 1, seed, stream=rep)
            worst = 0.0
            for i in range(probes.size):
                data = _append_example(base, probes.xs[i], probes.ys[i], probes.us[i])
                worst = max(worst, ratio_for(data, ref))
            ratios[rep] = worst
        else:
            ratios[rep] = ratio_for(data_law.sample(n, seed, stream=rep), ref)

    lam_hat = float(np.quantile(ratios, 1.0 - target_delta, method="higher"))
    exceed = int(np.sum(ratios > lam_hat))
    delta_hat = exceed / reps
    grid_points = np.unique(np.concatenate([[0.0], ratios]))
    curve = []
    for lam in grid_points:
        dh = float(np.mean(ratios >= lam))
        curve.append((float(lam), dh, binomial_stderr(dh, reps)))
    curve = tuple(curve)
    lam_table = tuple(
        (dt, float(np.quantile(ratios, 1.0 - dt, method="higher"))) for dt in delta_targets
    )
    notes = "strong-kind estimates are lower bounds on badness (finite probe set)" if strong_kind else ""
    return StabilityProfile(
        kind=kind,
        distance=distance,
        alpha=alpha,
        lam=lam_hat,
        delta=delta_hat,
        provenance="estimated",
        reps=reps,
        seed=seed,
        curve=curve,
        lambda_at_delta=lam_table,
        delta_wilson=wilson_interval(exceed, reps),
        notes=notes,
    )


def survival_at(profile: StabilityProfile, lam: float) -> float:
    """delta-hat(lam) = fraction of measured ratios >= lam, off the stored curve.

    The curve rows sit at the jump points of the empirical survival function;
    between jumps {ratio >= lam} equals {ratio >= next jump}.
    """
    if profile.curve is None:
        raise ValueError("profile carries no curve")
    if lam <= 0.0:
        return 1.0
    for grid_lam, delta_hat, _ in profile.curve:
        if grid_lam >= lam:
            return delta_hat
    return 0.0
