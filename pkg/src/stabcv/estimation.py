"""The three error functionals and synthetic data laws with computable risk.

r_cv  : expectation over the scheme's masks of the held-out mean loss of the
        predictor refit on the masked training rows.
r_hat : resubstitution (training) error of the full-data fit.
r_tilde : conditional risk of the full-data fit under the data law -- exact
        for discrete laws, Monte Carlo with a standard error otherwise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .learners import Learner, LearningSet, Predictor
from .resampling import ResamplingScheme
from .util import halton_points, pairwise_mean, pairwise_sum, rng_for_stream

# Exact-mode loss evaluation pins the tie-break coordinate here; tie-sensitive
# predictors on discrete laws should use Monte Carlo mode instead.
EXACT_EVAL_U = 0.5


class CvFoldError(RuntimeError):
    """A learner failed while refitting one fold; carries the fold index."""

    def __init__(self, fold_index: int, message: str):
        super().__init__(f"fold {fold_index}: {message}")
        self.fold_index = fold_index


class RiskEstimate(NamedTuple):
    value: float
    stderr: float


@dataclass(frozen=True)
class EvalSet:
    """Evaluation points (x, y, u), optionally weighted by exact probabilities."""

    xs: np.ndarray
    ys: np.ndarray
    us: np.ndarray
    probs: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.xs.shape[0]

    @property
    def exact(self) -> bool:
        return self.probs is not None


class SyntheticDistribution:
    """Data law with a deterministic (seed, stream)-indexed sampling protocol."""

    dim: int = 1

    def spec(self) -> dict:
        raise NotImplementedError

    def sample(self, n: int, seed: int, stream: int = 0) -> LearningSet:
        raise NotImplementedError

    def support_eval_set(self) -> EvalSet | None:
        """Exact weighted support, or None for continuous laws."""
        return None

    def sample_eval_set(self, m: int, seed: int, stream: int = 0) -> EvalSet:
        data = self.sample(m, seed, stream)
        return EvalSet(xs=data.x, ys=data.y, us=data.u)

    def probe_eval_set(self, size: int) -> EvalSet:
        """Deterministic probe grid over the law's declared (x, y) box.

        Stands in for sup-norm evaluation; discrete laws probe their support.
        """
        raise NotImplementedError


@dataclass(frozen=True)
class DiscreteJointLaw(SyntheticDistribution):
    """Finite table of atoms ((x...), y) with probabilities summing to 1."""

    atoms: tuple[tuple[tuple[float, ...], float], ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.atoms) != len(self.probs) or not self.atoms:
            raise ValueError("atoms and probs must be nonempty and aligned")
        if any(p < 0 for p in self.probs):
            raise ValueError("probabilities must be nonnegative")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {sum(self.probs)!r}, not 1")
        dims = {len(x) for x, _ in self.atoms}
        if len(dims) != 1:
            raise ValueError("all atoms must share the x dimension")

    @classmethod
    def from_table(cls, table) -> "DiscreteJointLaw":
        atoms = []
        probs = []
        for x, y, p in table:
            xt = tuple(float(v) for v in (x if hasattr(x, "__len__") else (x,)))
            atoms.append((xt, float(y)))
            probs.append(float(p))
        return cls(atoms=tuple(atoms), probs=tuple(probs))

    @property
    def dim(self) -> int:
        return len(self.atoms[0][0])

    def spec(self) -> dict:
        return {
            "kind": "discrete-joint",
            "atoms": [[list(x), y, p] for (x, y), p in zip(self.atoms, self.probs)],
        }

    def sample(self, n: int, seed: int, stream: int = 0) -> LearningSet:
        rng = rng_for_stream(seed, stream)
        idx = rng.choice(len(self.atoms), size=n, p=np.asarray(self.probs))
        xs = np.array([self.atoms[i][0] for i in idx], dtype=float)
        ys = np.array([self.atoms[i][1] for i in idx], dtype=float)
        us = rng.uniform(size=n)
        return LearningSet(x=xs, y=ys, u=us)

    def support_eval_set(self) -> EvalSet:
        xs = np.array([x for x, _ in self.atoms], dtype=float)
        ys = np.array([y for _, y in self.atoms], dtype=float)
        us = np.full(len(self.atoms), EXACT_EVAL_U)
        return EvalSet(xs=xs, ys=ys, us=us, probs=np.asarray(self.probs, dtype=float))

    def probe_eval_set(self, size: int) -> EvalSet:
        support = self.support_eval_set()
        return EvalSet(xs=support.xs, ys=support.ys, us=support.us)


@dataclass(frozen=True)
class GaussianRegressionLaw(SyntheticDistribution):
    """y = slope . x + noise * N(0,1), x gaussian or uniform on a box."""

    slope: tuple[float, ...] = (1.0,)
    noise: float = 0.1
    x_kind: str = "gaussian"
    low: float = -1.0
    high: float = 1.0

    def __post_init__(self):
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        if self.x_kind not in ("gaussian", "uniform"):
            raise ValueError(f"unknown x law {self.x_kind!r}")
        if self.low >= self.high:
            raise ValueError("need low < high")

    @property
    def dim(self) -> int:
        return len(self.slope)

    def spec(self) -> dict:
        return {
            "kind": "gaussian-regression",
            "slope": list(self.slope),
            "noise": self.noise,
            "x_kind": self.x_kind,
            "low": self.low,
            "high": self.high,
        }

    def sample(self, n: int, seed: int, stream: int = 0) -> LearningSet:
        rng = rng_for_stream(seed, stream)
        d = self.dim
        if self.x_kind == "gaussian":
            xs = rng.standard_normal((n, d))
        else:
            xs = rng.uniform(self.low, self.high, size=(n, d))
        ys = xs @ np.asarray(self.slope) + self.noise * rng.standard_normal(n)
        us = rng.uniform(size=n)
        return LearningSet(x=xs, y=ys, u=us)

    def _x_box(self) -> tuple[float, float]:
        if self.x_kind == "uniform":
            return self.low, self.high
        return -3.0, 3.0  # three-sigma box for standard-normal inputs

    def probe_eval_set(self, size: int) -> EvalSet:
        d = self.dim
        lo, hi = self._x_box()
        pts = halton_points(size, d + 2)
        xs = lo + (hi - lo) * pts[:, :d]
        slope = np.asarray(self.slope)
        y_center = xs @ slope
        y_spread = 3.0 * self.noise + 1e-12
        ys = y_center + (2.0 * pts[:, d] - 1.0) * y_spread
        return EvalSet(xs=xs, ys=ys, us=pts[:, d + 1])


@dataclass(frozen=True)
class TwoClassGaussianLaw(SyntheticDistribution):
    """Label 1 with the given prior; x ~ N(mean_label, sigma^2 I)."""

    mean0: tuple[float, ...] = (-1.0,)
    mean1: tuple[float, ...] = (1.0,)
    sigma: float = 1.0
    prior1: float = 0.5

    def __post_init__(self):
        if len(self.mean0) != len(self.mean1):
            raise ValueError("class means must share a dimension")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if not 0.0 < self.prior1 < 1.0:
            raise ValueError("prior must be in (0, 1)")

    @property
    def dim(self) -> int:
        return len(self.mean0)

    def spec(self) -> dict:
        return {
            "kind": "two-class-gaussian",
            "mean0": list(self.mean0),
            "mean1": list(self.mean1),
            "sigma": self.sigma,
            "prior1": self.prior1,
        }

    def sample(self, n: int, seed: int, stream: int = 0) -> LearningSet:
        rng = rng_for_stream(seed, stream)
        labels = (rng.uniform(size=n) < self.prior1).astype(float)
        means = np.where(labels[:, None] > 0, np.asarray(self.mean1), np.asarray(self.mean0))
        xs = means + self.sigma * rng.standard_normal((n, self.dim))
        us = rng.uniform(size=n)
        return LearningSet(x=xs, y=labels, u=us)

    def probe_eval_set(self, size: int) -> EvalSet:
        d = self.dim
        lo = min(min(self.mean0), min(self.mean1)) - 3.0 * self.sigma
        hi = max(max(self.mean0), max(self.mean1)) + 3.0 * self.sigma
        pts = halton_points(size, d + 1)
        xs = lo + (hi - lo) * pts[:, :d]
        ys = (np.arange(size) % 2).astype(float)
        return EvalSet(xs=xs, ys=ys, us=pts[:, d])


@dataclass(frozen=True)
class ErrorTriple:
    """The three estimates for one (learner, sample, scheme, law) run."""

    r_cv: float
    r_tilde: float
    r_tilde_stderr: float
    r_hat: float

    @property
    def gap(self) -> float:
        return abs(self.r_cv - self.r_tilde)

    def to_json_dict(self) -> dict:
        return {
            "r_cv": self.r_cv,
            "r_tilde": self.r_tilde,
            "r_tilde_stderr": self.r_tilde_stderr,
            "r_hat": self.r_hat,
            "gap": self.gap,
        }


def load_learning_set_csv(path, y_column: str = "y", u_column: str = "u",
                          seed: int = 0) -> LearningSet:
    """Read a learning set from a headed CSV file.

    Every column except the label (and the optional tie-break column) is a
    feature; absent tie-break values are drawn once from the seed.
    """
    with Path(path).open(newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or y_column not in reader.fieldnames:
            raise ValueError(f"CSV must carry a {y_column!r} column: {path}")
        x_cols = [c for c in reader.fieldnames if c not in (y_column, u_column)]
        if not x_cols:
            raise ValueError(f"CSV carries no feature columns: {path}")
        xs, ys, us = [], [], []
        for row in reader:
            xs.append([float(row[c]) for c in x_cols])
            ys.append(float(row[y_column]))
            if u_column in row and row[u_column] not in (None, ""):
                us.append(float(row[u_column]))
    if not ys:
        raise ValueError(f"CSV contains no data rows: {path}")
    if us and len(us) != len(ys):
        raise ValueError(f"CSV has partial {u_column!r} values: {path}")
    return LearningSet.from_arrays(np.array(xs), np.array(ys),
                                   u=np.array(us) if us else None, seed=seed)


def mean_loss_on(predictor: Predictor, eval_set: EvalSet) -> RiskEstimate:
    """Mean loss over an evaluation set; exact when probabilities are carried."""
    losses = predictor.eval_losses(eval_set.xs, eval_set.ys, eval_set.us)
    if eval_set.exact:
        return RiskEstimate(float(np.dot(eval_set.probs, losses)), 0.0)
    value = pairwise_mean(losses.tolist())
    stderr = float(np.std(losses, ddof=1) / np.sqrt(eval_set.size)) if eval_set.size > 1 else 0.0
    return RiskEstimate(value, stderr)


def cv_estimate(learner: Learner, data: LearningSet, scheme: ResamplingScheme) -> float:
    """Cross-validation estimate: sum over masks of prob * held-out mean loss."""
    if scheme.n != data.n:
        raise ValueError(f"scheme built for n={scheme.n} but data has n={data.n}")
    contributions = []
    for fold_index, (vec, prob) in enumerate(scheme.support):
        train = data.subset(vec.train_indices())
        try:
            predictor = learner.fit(train)
        except Exception as exc:
            raise CvFoldError(fold_index, str(exc)) from exc
        test_idx = vec.test_indices()
        losses = predictor.eval_losses(data.x[test_idx], data.y[test_idx], data.u[test_idx])
        contributions.append(prob * pairwise_mean(losses.tolist()))
    return pairwise_sum(contributions)


def resub_estimate(learner: Learner, data: LearningSet) -> float:
    """Training error of the full-data fit."""
    if data.n == 0:
        raise ValueError("empty data")
    predictor = learner.fit(data)
    losses = predictor.eval_losses(data.x, data.y, data.u)
    return pairwise_mean(losses.tolist())


def oracle_risk(
    predictor: Predictor,
    law: SyntheticDistribution,
    mc_draws: int | None = None,
    seed: int = 0,
    stream: int = 0,
) -> RiskEstimate:
    """Generalization error of a fitted predictor under a known law.

    Discrete laws are summed exactly (tie-break coordinate pinned at 0.5)
    unless mc_draws forces Monte Carlo; continuous laws require mc_draws.
    """
    support = law.support_eval_set()
    if mc_draws is None:
        if support is None:
            raise ValueError("continuous law: mc_draws is required")
        return mean_loss_on(predictor, support)
    if mc_draws < 2:
        raise ValueError("mc_draws must be >= 2")
    return mean_loss_on(predictor, law.sample_eval_set(mc_draws, seed, stream))


def error_triple(
    learner: Learner,
    data: LearningSet,
    scheme: ResamplingScheme,
    law: SyntheticDistribution,
    mc_draws: int | None = None,
    seed: int = 0,
    stream: int = 0,
) -> ErrorTriple:
    """Bundle r_cv, r_tilde and r_hat for one sample."""
    r_cv = cv_estimate(learner, data, scheme)
    full = learner.fit(data)
    r_tilde, r_tilde_stderr = oracle_risk(full, law, mc_draws, seed, stream)
    losses = full.eval_losses(data.x, data.y, data.u)
    r_hat = pairwise_mean(losses.tolist())
    return ErrorTriple(r_cv=r_cv, r_tilde=r_tilde, r_tilde_stderr=r_tilde_stderr, r_hat=r_hat)
