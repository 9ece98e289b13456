"""Train/test masks, distributions over them, and distances between the induced measures.

A cross-validation procedure is a finite distribution Q over binary masks of
length n with a constant number of training ones.  Leave-one-out, k-fold,
hold-out and leave-nu-out are all instances; everything downstream (the CV
estimator, the stability definitions, the concentration bounds) consumes a
scheme only through its support and probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Sequence

import numpy as np

from .util import rng_for_stream

DEFAULT_SUPPORT_CAP = 10**6
SYMMETRY_TOL = 1e-12
PROB_TOL = 1e-12


class SchemeError(ValueError):
    """Invalid resampling-scheme request."""


class SupportTooLargeError(SchemeError):
    """Exact enumeration would exceed the configured support cap."""


@dataclass(frozen=True)
class BinaryVector:
    """A {0,1} mask of length n selecting training rows (1 = in training set).

    At least one coordinate must be 1.  The test mask is the complement.
    """

    bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) < 1:
            raise ValueError("binary vector must have length >= 1")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("binary vector entries must be 0 or 1")
        if sum(self.bits) == 0:
            raise ValueError("binary vector must have at least one 1")

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "BinaryVector":
        return cls(tuple(int(b) for b in bits))

    @classmethod
    def ones(cls, n: int) -> "BinaryVector":
        return cls(tuple([1] * n))

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def train_count(self) -> int:
        return sum(self.bits)

    def complement(self) -> "BinaryVector":
        return BinaryVector(tuple(1 - b for b in self.bits))

    def train_indices(self) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.bits))

    def test_indices(self) -> np.ndarray:
        return np.flatnonzero(1 - np.asarray(self.bits))


@dataclass(frozen=True)
class WeightedEmpiricalMeasure:
    """Uniform probability masses on the rows selected by a mask.

    Masses are kept as exact rationals so distances between measures come out
    exact (e.g. leave-one-out vs full sample is exactly 2/n).
    """

    masses: tuple[Fraction, ...]

    def __post_init__(self):
        if any(m < 0 for m in self.masses):
            raise ValueError("masses must be nonnegative")
        if sum(self.masses) != 1:
            raise ValueError("masses must sum to 1")

    @classmethod
    def from_vector(cls, v: BinaryVector) -> "WeightedEmpiricalMeasure":
        s = v.train_count
        return cls(tuple(Fraction(b, s) for b in v.bits))

    def as_array(self) -> np.ndarray:
        return np.array([float(m) for m in self.masses])


def total_variation(u: BinaryVector, v: BinaryVector) -> float:
    """Distance between the weighted empirical measures induced by two masks.

    Computed as the total absolute mass difference sum_i |u_i/s_u - v_i/s_v|,
    the convention under which a leave-nu-out mask sits at exactly 2*nu/n from
    the full sample.  Range [0, 2].
    """
    if u.n != v.n:
        raise ValueError(f"mask length mismatch: {u.n} != {v.n}")
    su, sv = u.train_count, v.train_count
    acc = Fraction(0)
    for bu, bv in zip(u.bits, v.bits):
        acc += abs(Fraction(bu, su) - Fraction(bv, sv))
    return float(acc)


@dataclass(frozen=True)
class ResamplingScheme:
    """A finite distribution over training masks with constant training size.

    kappa (the support size) is what multiplies delta when moving from
    per-mask to uniform-over-support stability statements.
    """

    n: int
    kind: str
    params: dict
    seed: int
    support: tuple[tuple[BinaryVector, float], ...]

    def __post_init__(self):
        if not self.support:
            raise SchemeError("scheme support is empty")
        total = math.fsum(prob for _, prob in self.support)
        if abs(total - 1.0) > PROB_TOL:
            raise SchemeError(f"support probabilities sum to {total!r}, not 1")
        sizes = {vec.train_count for vec, _ in self.support}
        if len(sizes) != 1:
            raise SchemeError(f"training-set size varies across support: {sorted(sizes)}")
        if any(vec.n != self.n for vec, _ in self.support):
            raise SchemeError("support vector length differs from scheme n")
        train = sizes.pop()
        if not 0 < train < self.n:
            raise SchemeError("training size must be in (0, n) so the test set is nonempty")

    @property
    def train_size(self) -> int:
        return self.support[0][0].train_count

    @property
    def test_size(self) -> int:
        return self.n - self.train_size

    @property
    def p(self) -> float:
        """Test fraction in (0, 1)."""
        return self.test_size / self.n

    @property
    def kappa(self) -> int:
        """Number of masks in the support."""
        return len(self.support)

    def inclusion_probabilities(self) -> np.ndarray:
        """Pr(i in training set) for every index i."""
        probs = np.zeros(self.n)
        for vec, prob in self.support:
            probs += prob * np.asarray(vec.bits, dtype=float)
        return probs

    @property
    def is_symmetric(self) -> bool:
        incl = self.inclusion_probabilities()
        return bool(np.max(incl) - np.min(incl) <= SYMMETRY_TOL)

    def to_json_dict(self, support_cap: int = 10**4) -> dict:
        """Wire format {n, p, kind, params, seed, support?}.

        The support listing is omitted for Monte-Carlo schemes larger than
        support_cap; the (kind, params, seed) triple reconstructs them.
        """
        out = {
            "n": self.n,
            "p": self.p,
            "kind": self.kind,
            "params": dict(self.params),
            "seed": self.seed,
        }
        monte_carlo = self.kind == "leave-nu-out-monte-carlo"
        if not (monte_carlo and self.kappa > support_cap):
            out["support"] = [[list(vec.bits), prob] for vec, prob in self.support]
        return out


def scheme_symmetry_check(scheme: ResamplingScheme) -> tuple[np.ndarray, bool]:
    """Per-index inclusion probabilities plus the symmetry verdict."""
    incl = scheme.inclusion_probabilities()
    return incl, bool(np.max(incl) - np.min(incl) <= SYMMETRY_TOL)


def _mask_without(n: int, test_idx: Sequence[int]) -> BinaryVector:
    bits = [1] * n
    for i in test_idx:
        bits[i] = 0
    return BinaryVector(tuple(bits))


def build_scheme(
    n: int,
    kind: str,
    params: dict | None = None,
    seed: int = 0,
    support_cap: int = DEFAULT_SUPPORT_CAP,
) -> ResamplingScheme:
    """Construct a resampling scheme.

    Kinds and their params:
      - "leave-one-out": none
      - "k-fold": {"k": int}, k must divide n (uneven folds would break the
        constant-test-size hypothesis)
      - "hold-out": {"mask": sequence of 0/1}, the fixed training mask
      - "leave-nu-out-exact": {"nu": int}, all C(n, nu) masks, capped
      - "leave-nu-out-monte-carlo": {"nu": int, "draws": int}, nu-subsets
        drawn uniformly with replacement, each with mass 1/draws
    """
    params = dict(params or {})
    if n < 2:
        raise SchemeError("n must be >= 2")

    if kind == "leave-one-out":
        support = tuple((_mask_without(n, [i]), 1.0 / n) for i in range(n))

    elif kind == "k-fold":
        k = int(params.get("k", 0))
        if k < 2 or n % k != 0:
            raise SchemeError(f"k-fold requires 2 <= k dividing n, got k={k}, n={n}")
        fold = n // k
        support = tuple(
            (_mask_without(n, range(j * fold, (j + 1) * fold)), 1.0 / k) for j in range(k)
        )

    elif kind == "hold-out":
        if "mask" not in params:
            raise SchemeError("hold-out requires a 'mask' param")
        vec = BinaryVector.from_bits(params["mask"])
        if vec.n != n:
            raise SchemeError(f"hold-out mask length {vec.n} != n={n}")
        if vec.train_count == n:
            raise SchemeError("hold-out mask must leave at least one test element")
        params["mask"] = list(vec.bits)
        support = ((vec, 1.0),)

    elif kind == "leave-nu-out-exact":
        nu = int(params.get("nu", 0))
        if not 1 <= nu < n:
            raise SchemeError(f"leave-nu-out requires 1 <= nu < n, got nu={nu}")
        count = math.comb(n, nu)
        if count > support_cap:
            raise SupportTooLargeError(
                f"C({n},{nu}) = {count} exceeds the cap {support_cap}; "
                "use leave-nu-out-monte-carlo instead"
            )
        support = tuple((_mask_without(n, combo), 1.0 / count) for combo in combinations(range(n), nu))

    elif kind == "leave-nu-out-monte-carlo":
        nu = int(params.get("nu", 0))
        draws = int(params.get("draws", 0))
        if not 1 <= nu < n:
            raise SchemeError(f"leave-nu-out requires 1 <= nu < n, got nu={nu}")
        if draws < 1:
            raise SchemeError("monte-carlo scheme requires draws >= 1")
        rng = rng_for_stream(seed, 0)
        masks = []
        for _ in range(draws):
            test_idx = rng.choice(n, size=nu, replace=False)
            masks.append((_mask_without(n, test_idx), 1.0 / draws))
        support = tuple(masks)

    else:
        raise SchemeError(f"unknown scheme kind {kind!r}")

    return ResamplingScheme(n=n, kind=kind, params=params, seed=seed, support=support)
