"""Learning algorithms mapping a (sub)sample to an immutable predictor.

Every predictor exposes pointwise loss evaluation with values in [0, 1]
(classification uses zero-one loss, regression a squared loss clipped at a
declared bound M).  Each example carries an auxiliary tie-break coordinate
u in [0, 1], drawn once at data-creation time and reused verbatim on refits,
so that nearest-neighbor tie-breaking is reproducible across subsamples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .util import rng_for_stream

EPS_CLAMP = 1e-10  # boosting round error clamp when the weak learner is perfect


class LassoConvergenceError(RuntimeError):
    """Coordinate descent did not converge; carries the last iterate."""

    def __init__(self, message: str, last_coefficients: np.ndarray):
        super().__init__(message)
        self.last_coefficients = last_coefficients


@dataclass(frozen=True)
class LearningSet:
    """Ordered sample of examples (x_i, y_i, u_i) with shared feature dimension."""

    x: np.ndarray
    y: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        u = np.asarray(self.u, dtype=float).ravel()
        if x.shape[0] != y.shape[0] or x.shape[0] != u.shape[0]:
            raise ValueError("x, y, u must agree on the number of examples")
        for arr in (x, y, u):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "u", u)

    @classmethod
    def from_arrays(cls, x, y, u=None, seed: int = 0) -> "LearningSet":
        """Build a learning set; tie-break uniforms are drawn here if absent."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[0] == 1 and np.asarray(y).size != 1:
            x = x.T
        y = np.asarray(y, dtype=float).ravel()
        if u is None:
            u = rng_for_stream(seed, 0xD1CE).uniform(size=y.shape[0])
        return cls(x=x, y=y, u=np.asarray(u, dtype=float))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def subset(self, indices) -> "LearningSet":
        idx = np.asarray(indices, dtype=int)
        return LearningSet(x=self.x[idx], y=self.y[idx], u=self.u[idx])


@dataclass(frozen=True)
class LossKind:
    """Bounded loss: zero-one for labels, or min((y - yhat)^2 / m, 1)."""

    kind: str = "zero-one"
    m: float = 1.0

    def __post_init__(self):
        if self.kind not in ("zero-one", "squared-clipped"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "squared-clipped" and self.m <= 0:
            raise ValueError("squared-clipped loss needs m > 0")

    def loss(self, y_true: float, y_pred: float) -> float:
        if self.kind == "zero-one":
            return 0.0 if y_true == y_pred else 1.0
        return min((y_true - y_pred) ** 2 / self.m, 1.0)

    def loss_batch(self, y_true: np.ndarray, y_pred: np.ndarray) -> np.ndarray:
        if self.kind == "zero-one":
            return (np.asarray(y_true) != np.asarray(y_pred)).astype(float)
        return np.minimum((np.asarray(y_true) - np.asarray(y_pred)) ** 2 / self.m, 1.0)


ZERO_ONE = LossKind("zero-one")


class Predictor:
    """Immutable fitted hypothesis; subclasses implement _predict."""

    def __init__(self, loss: LossKind, dim: int):
        self.loss_kind = loss
        self.dim = dim

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        if x.shape[0] != self.dim:
            raise ValueError(f"example dimension {x.shape[0]} != fitted dimension {self.dim}")
        return x

    def _predict(self, x: np.ndarray, u: float) -> float:
        raise NotImplementedError

    def predict(self, x, u: float = 0.5) -> float:
        return self._predict(self._check(x), u)

    def predict_batch(self, xs: np.ndarray, us: np.ndarray | None = None) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if us is None:
            us = np.full(xs.shape[0], 0.5)
        return np.array([self._predict(self._check(x), float(u)) for x, u in zip(xs, us)])

    def eval_loss(self, x, y: float, u: float = 0.5) -> float:
        return self.loss_kind.loss(float(y), self.predict(x, u))

    def eval_losses(self, xs, ys, us=None) -> np.ndarray:
        preds = self.predict_batch(xs, us)
        return self.loss_kind.loss_batch(np.asarray(ys, dtype=float).ravel(), preds)


def eval_loss(predictor: Predictor, z) -> float:
    """Loss of the predictor at an example z = (x, y) or (x, y, u)."""
    if len(z) == 2:
        x, y = z
        u = 0.5
    else:
        x, y, u = z
    return predictor.eval_loss(x, y, u)


class ConstantPredictor(Predictor):
    """Predicts a fixed value regardless of the input."""

    def __init__(self, value: float, loss: LossKind = ZERO_ONE, dim: int | None = None):
        super().__init__(loss, -1 if dim is None else dim)
        self.value = float(value)

    def _check(self, x):
        x = np.asarray(x, dtype=float).ravel()
        if self.dim >= 0 and x.shape[0] != self.dim:
            raise ValueError(f"example dimension {x.shape[0]} != fitted dimension {self.dim}")
        return x

    def _predict(self, x, u):
        return self.value

    def predict_batch(self, xs, us=None):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        return np.full(xs.shape[0], self.value)


class ThresholdPredictor(Predictor):
    """Axis-aligned split: emits hi when x[feature] > cut, else lo."""

    def __init__(self, feature: int, cut: float, lo: float, hi: float,
                 loss: LossKind = ZERO_ONE, dim: int | None = None):
        super().__init__(loss, -1 if dim is None else dim)
        self.feature = int(feature)
        self.cut = float(cut)
        self.lo = float(lo)
        self.hi = float(hi)

    def _check(self, x):
        x = np.asarray(x, dtype=float).ravel()
        if self.dim >= 0 and x.shape[0] != self.dim:
            raise ValueError(f"example dimension {x.shape[0]} != fitted dimension {self.dim}")
        return x

    def _predict(self, x, u):
        return self.hi if x[self.feature] > self.cut else self.lo

    def predict_batch(self, xs, us=None):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        return np.where(xs[:, self.feature] > self.cut, self.hi, self.lo)


# ---------------------------------------------------------------------------
# k-nearest neighbors
# ---------------------------------------------------------------------------


class KnnPredictor(Predictor):
    """k nearest neighbors with randomized tie-breaking.

    Neighbor order is lexicographic on (euclidean distance to the query,
    |u_i - u_query|, index); the stored tie-break uniforms make the order a
    deterministic function of the data.
    """

    def __init__(self, train: LearningSet, k: int, task: str, loss: LossKind):
        super().__init__(loss, train.dim)
        self.train = train
        self.k = int(k)
        self.task = task

    def _predict(self, x, u):
        return float(self.predict_batch(x[None, :], np.array([u]))[0])

    def predict_batch(self, xs, us=None):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if xs.shape[1] != self.dim:
            raise ValueError(f"example dimension {xs.shape[1]} != fitted dimension {self.dim}")
        if us is None:
            us = np.full(xs.shape[0], 0.5)
        us = np.asarray(us, dtype=float).ravel()
        tx = self.train.x
        sq = (
            np.sum(xs * xs, axis=1)[:, None]
            + np.sum(tx * tx, axis=1)[None, :]
            - 2.0 * (xs @ tx.T)
        )
        dist = np.sqrt(np.maximum(sq, 0.0))
        tie = np.abs(self.train.u[None, :] - us[:, None])
        idx = np.broadcast_to(np.arange(self.train.n), dist.shape)
        # row-wise lexicographic order on (distance, |u gap|, index)
        order = np.lexsort((idx, tie, dist), axis=-1)[:, : self.k]
        labels = self.train.y[order]
        if self.task == "regress":
            return labels.mean(axis=1)
        out = np.empty(xs.shape[0])
        best = np.full(xs.shape[0], -1)
        for lbl in np.unique(self.train.y):
            cnt = np.sum(labels == lbl, axis=1)
            take = cnt > best  # strict: earlier (smaller) labels win count ties
            out[take] = lbl
            best = np.maximum(best, cnt)
        return out


def fit_knn(train: LearningSet, k: int, task: str = "classify",
            loss: LossKind | None = None) -> KnnPredictor:
    if train.n == 0:
        raise ValueError("empty training set")
    if not 1 <= k <= train.n:
        raise ValueError(f"k must be in [1, {train.n}], got {k}")
    if task not in ("classify", "regress"):
        raise ValueError(f"unknown task {task!r}")
    if loss is None:
        loss = ZERO_ONE if task == "classify" else LossKind("squared-clipped", 1.0)
    return KnnPredictor(train, k, task, loss)


# ---------------------------------------------------------------------------
# regularization network (kernel ridge in an RKHS)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Kernel:
    """Gaussian exp(-gamma ||x-x'||^2) (norm bound kappa=1) or linear x.x' + 1."""

    kind: str = "gaussian"
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "linear"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind == "gaussian" and self.gamma <= 0:
            raise ValueError("gaussian kernel needs gamma > 0")

    def matrix(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.atleast_2d(a)
        b = np.atleast_2d(b)
        if self.kind == "linear":
            return a @ b.T + 1.0
        sq = (
            np.sum(a * a, axis=1)[:, None]
            + np.sum(b * b, axis=1)[None, :]
            - 2.0 * (a @ b.T)
        )
        return np.exp(-self.gamma * np.maximum(sq, 0.0))


class RegnetPredictor(Predictor):
    """Kernel expansion phi(x) = sum_i c_i k(x_i, x)."""

    def __init__(self, x_train: np.ndarray, coef: np.ndarray, kernel: Kernel, loss: LossKind):
        super().__init__(loss, x_train.shape[1])
        self.x_train = x_train
        self.coef = coef
        self.kernel = kernel

    def _predict(self, x, u):
        return float(self.kernel.matrix(x[None, :], self.x_train)[0] @ self.coef)

    def predict_batch(self, xs, us=None):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if xs.shape[1] != self.dim:
            raise ValueError(f"example dimension {xs.shape[1]} != fitted dimension {self.dim}")
        return self.kernel.matrix(xs, self.x_train) @ self.coef


def fit_regnet(train: LearningSet, kernel: Kernel, reg: float,
               m_bound: float = 1.0) -> RegnetPredictor:
    """Minimize (1/n) sum (y_i - phi(x_i))^2 + reg * ||phi||^2 over the RKHS.

    The representer coefficients solve (K + n*reg*I) c = y.  The system is
    positive definite for reg > 0; a singular factorization is guarded
    against anyway.
    """
    if train.n == 0:
        raise ValueError("empty training set")
    if reg <= 0:
        raise ValueError("reg must be > 0")
    gram = kernel.matrix(train.x, train.x)
    system = gram + train.n * reg * np.eye(train.n)
    try:
        factor = cho_factor(system, lower=True, check_finite=False)
        coef = cho_solve(factor, train.y, check_finite=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - reg > 0 prevents this
        raise ValueError(f"singular regularization-network system: {exc}") from exc
    return RegnetPredictor(train.x, coef, kernel, LossKind("squared-clipped", m_bound))


# ---------------------------------------------------------------------------
# empirical risk minimization over a finite class
# ---------------------------------------------------------------------------


def empirical_risk(predictor: Predictor, data: LearningSet) -> float:
    return float(np.mean(predictor.eval_losses(data.x, data.y, data.u)))


def fit_erm_finite(train: LearningSet, hypotheses: Sequence[Predictor]) -> Predictor:
    """Pick the hypothesis with the smallest training risk (ties: lowest index)."""
    if not hypotheses:
        raise ValueError("empty hypothesis list")
    risks = [empirical_risk(h, train) for h in hypotheses]
    return hypotheses[int(np.argmin(risks))]


# ---------------------------------------------------------------------------
# boosting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoostRound:
    eps: float
    beta: float
    alpha: float
    z_next: float


class AdaboostPredictor(Predictor):
    """Weighted vote H(x) = sum_t alpha_t phi_t(x), thresholded at half the alpha mass."""

    def __init__(self, bases: tuple[Predictor, ...], alphas: tuple[float, ...],
                 rounds: tuple[BoostRound, ...], dim: int):
        super().__init__(ZERO_ONE, dim)
        self.bases = bases
        self.alphas = alphas
        self.rounds = rounds

    def score(self, x, u: float = 0.5) -> float:
        x = self._check(x)
        return float(sum(a * b._predict(x, u) for a, b in zip(self.alphas, self.bases)))

    def _predict(self, x, u):
        return 1.0 if self.score(x, u) > 0.5 * sum(self.alphas) else 0.0

    def predict_batch(self, xs, us=None):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if not self.bases:
            return np.zeros(xs.shape[0])
        scores = sum(a * b.predict_batch(xs, us) for a, b in zip(self.alphas, self.bases))
        return (scores > 0.5 * sum(self.alphas)).astype(float)


WeightedBaseLearner = Callable[[LearningSet, np.ndarray], Predictor]


def fit_adaboost(train: LearningSet, base: WeightedBaseLearner, rounds: int) -> AdaboostPredictor:
    """Boost a weighted base learner for the given number of rounds.

    Per round t: train on weights p_t, measure eps_t = sum_i p_i |phi(x_i)-y_i|,
    set beta_t = eps_t/(1-eps_t), alpha_t = ln(1/beta_t), multiply the weight of
    each correctly classified point by beta_t, renormalize.  A perfect round
    (eps_t = 0) is clamped to eps_t = 1e-10 so alpha_t stays finite; a round
    with eps_t >= 1/2 stops boosting and returns the vote built so far.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if not set(np.unique(train.y)).issubset({0.0, 1.0}):
        raise ValueError("boosting expects labels in {0, 1}")
    weights = np.full(train.n, 1.0 / train.n)
    bases: list[Predictor] = []
    alphas: list[float] = []
    log: list[BoostRound] = []
    for _ in range(rounds):
        phi = base(train, weights)
        miss = np.abs(phi.predict_batch(train.x, train.u) - train.y)
        eps_t = float(np.dot(weights, miss))
        if eps_t >= 0.5:
            break
        eps_t = max(eps_t, EPS_CLAMP)
        beta_t = eps_t / (1.0 - eps_t)
        alpha_t = math.log(1.0 / beta_t)
        raw = weights * beta_t ** (1.0 - miss)
        z_next = float(np.sum(raw))
        weights = raw / z_next
        bases.append(phi)
        alphas.append(alpha_t)
        log.append(BoostRound(eps=eps_t, beta=beta_t, alpha=alpha_t, z_next=z_next))
    return AdaboostPredictor(tuple(bases), tuple(alphas), tuple(log), train.dim)


def stump_base_learner(train: LearningSet, weights: np.ndarray) -> Predictor:
    """Best weighted decision stump (including the two constant votes).

    Keeps the weighted error at most min(P(y=0), P(y=1)) <= 1/2, which is all
    the boosting loop needs from a weak learner.
    """
    y = train.y
    best_err = float(np.dot(weights, y))  # constant-0 vote errs on the label-1 mass
    best: Predictor = ConstantPredictor(0.0, ZERO_ONE)
    err_one = float(np.dot(weights, 1.0 - y))
    if err_one < best_err - 1e-15:
        best_err, best = err_one, ConstantPredictor(1.0, ZERO_ONE)
    for j in range(train.dim):
        col = train.x[:, j]
        cuts = np.unique(col)
        mids = (cuts[:-1] + cuts[1:]) / 2.0 if cuts.size > 1 else cuts
        for cut in mids:
            above = (col > cut).astype(float)
            for lo, hi in ((0.0, 1.0), (1.0, 0.0)):
                pred = np.where(above > 0, hi, lo)
                err = float(np.dot(weights, np.abs(pred - y)))
                if err < best_err - 1e-15:
                    best_err = err
                    best = ThresholdPredictor(j, float(cut), lo, hi)
    return best


# ---------------------------------------------------------------------------
# lasso-type penalized least squares
# ---------------------------------------------------------------------------


class LassoPredictor(Predictor):
    """Dictionary expansion f(x) = sum_j coef_j f_j(x) with clipped squared loss."""

    def __init__(self, dictionary: tuple[Callable, ...], coef: np.ndarray,
                 loss: LossKind, dim: int, weights: np.ndarray, tuning: float):
        super().__init__(loss, dim)
        self.dictionary = dictionary
        self.coef = coef
        self.penalty_weights = weights
        self.tuning = tuning

    @property
    def n_nonzero(self) -> int:
        """Number of active dictionary coordinates in the fit."""
        return int(np.count_nonzero(self.coef))

    def _features(self, xs: np.ndarray) -> np.ndarray:
        return np.column_stack([[f(x) for x in xs] for f in self.dictionary])

    def _predict(self, x, u):
        return float(sum(c * f(x) for c, f in zip(self.coef, self.dictionary)))

    def predict_batch(self, xs, us=None):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        return self._features(xs) @ self.coef


def soft_threshold(value: float, threshold: float) -> float:
    return math.copysign(max(abs(value) - threshold, 0.0), value)


def fit_lasso(train: LearningSet, dictionary: Sequence[Callable], a_tuning: float,
              max_sweeps: int = 10**4, tol: float = 1e-8,
              m_bound: float = 1.0) -> LassoPredictor:
    """Cyclic coordinate descent on (1/n)||y - F coef||^2 + 2 sum_j w_j |coef_j|.

    The penalty weights are w_j = A sqrt(log(M)/n) * ||f_j||_n with ||.||_n the
    empirical L2 norm of the dictionary column.  Each coordinate update is an
    exact soft-threshold step; sweeps stop when the largest coefficient change
    drops below tol.
    """
    if not dictionary:
        raise ValueError("dictionary must contain at least one function")
    if a_tuning <= 0:
        raise ValueError("tuning constant must be > 0")
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be >= 1")
    m_dict = len(dictionary)
    feats = np.column_stack([[f(x) for x in train.x] for f in dictionary])
    n = train.n
    norms = np.sqrt(np.mean(feats * feats, axis=0))
    r_nm = a_tuning * math.sqrt(math.log(m_dict) / n)
    pen = r_nm * norms
    col_sq = np.einsum("ij,ij->j", feats, feats) / n

    coef = np.zeros(m_dict)
    residual = train.y.astype(float).copy()
    delta_max = math.inf
    for _ in range(max_sweeps):
        delta_max = 0.0
        for j in range(m_dict):
            old = coef[j]
            if col_sq[j] == 0.0:
                new = 0.0
            else:
                rho = (feats[:, j] @ residual) / n + col_sq[j] * old
                new = soft_threshold(rho, pen[j]) / col_sq[j]
            if new != old:
                residual += feats[:, j] * (old - new)
                coef[j] = new
                delta_max = max(delta_max, abs(new - old))
        if delta_max <= tol:
            break
    else:
        raise LassoConvergenceError(
            f"coordinate descent did not converge in {max_sweeps} sweeps "
            f"(last max step {delta_max:.3e})",
            last_coefficients=coef,
        )
    return LassoPredictor(tuple(dictionary), coef, LossKind("squared-clipped", m_bound),
                          train.dim, pen, r_nm)


# ---------------------------------------------------------------------------
# learner wrappers for the estimation / experiment layers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Learner:
    """A named fit function plus its config echo for reports."""

    name: str
    fit_fn: Callable[[LearningSet], Predictor]
    spec: dict = field(default_factory=dict)

    def fit(self, train: LearningSet) -> Predictor:
        return self.fit_fn(train)


def knn_learner(k: int, task: str = "classify", loss: LossKind | None = None) -> Learner:
    return Learner("knn", lambda d: fit_knn(d, k, task, loss),
                   {"learner": "knn", "k": k, "task": task})


def regnet_learner(kernel: Kernel, reg: float, m_bound: float = 1.0) -> Learner:
    return Learner("regnet", lambda d: fit_regnet(d, kernel, reg, m_bound),
                   {"learner": "regnet", "kernel": kernel.kind, "gamma": kernel.gamma,
                    "reg": reg, "m_bound": m_bound})


def erm_learner(hypotheses: Sequence[Predictor], spec: dict | None = None) -> Learner:
    hyps = tuple(hypotheses)
    return Learner("erm", lambda d: fit_erm_finite(d, hyps),
                   spec or {"learner": "erm", "n_hypotheses": len(hyps)})


def adaboost_learner(rounds: int, base: WeightedBaseLearner = stump_base_learner) -> Learner:
    return Learner("adaboost", lambda d: fit_adaboost(d, base, rounds),
                   {"learner": "adaboost", "rounds": rounds})


def lasso_learner(dictionary: Sequence[Callable], a_tuning: float,
                  m_bound: float = 1.0, spec: dict | None = None) -> Learner:
    funcs = tuple(dictionary)
    return Learner("lasso", lambda d: fit_lasso(d, funcs, a_tuning, m_bound=m_bound),
                   spec or {"learner": "lasso", "dictionary_size": len(funcs), "A": a_tuning})


def constant_learner(value: float, loss: LossKind = ZERO_ONE) -> Learner:
    """Fits nothing: always returns the same predictor.  Surely stable."""
    pred = ConstantPredictor(value, loss)
    return Learner("constant", lambda d: pred, {"learner": "constant", "value": value})
