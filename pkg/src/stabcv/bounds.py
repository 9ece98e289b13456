"""Closed-form evaluators for the concentration bounds.

Values >= 1 are kept raw and flagged vacuous rather than silently clipped:
at desk scale many of these bounds carry no information and that has to stay
visible in reports.

The composite failure probability delta' is assembled differently by each
sup-norm variant, so every evaluator takes its delta components explicitly;
the combinations each variant uses:

  cv-strong d_inf:   delta' = delta + (n+1) * delta_loo_next   (at size n+1)
  hold-out d_inf:    delta' = delta + n * delta_loo            (at size n)
  cv-weak d_inf:     delta' = 2 * delta_loo + delta            (caller-assembled)
  weak d_inf:        delta' = delta_loo + kappa * delta        (caller-assembled)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence


@dataclass(frozen=True)
class TailBound:
    """One evaluated tail bound.

    threshold_shift is the additive term inside the deviation event (e.g.
    lambda*(2p)^alpha), raw_value the displayed right-hand side, and
    clipped_value = min(raw, 1) what verdict logic consumes.
    """

    threshold_shift: float
    raw_value: float
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.threshold_shift < 0:
            raise ValueError("threshold_shift must be >= 0")
        if self.raw_value < 0:
            raise ValueError("raw_value must be >= 0")

    @property
    def clipped_value(self) -> float:
        return min(self.raw_value, 1.0)

    @property
    def vacuous(self) -> bool:
        return self.raw_value >= 1.0


class SplitRule(NamedTuple):
    p_star: float
    bound_at_p_star: float


def _check_np_eps(n: int, p: float, eps: float) -> None:
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    if eps < 0:
        raise ValueError("eps must be >= 0")


def vc_baseline(
    n: int,
    p: float,
    eps: float,
    vc_dim: int,
    v_log_with_n: bool = False,
) -> TailBound:
    """VC baseline B(n,p,eps) + V(n,p,eps) for empirical risk minimization.

    B = 5 (2n(1-p)+1)^(4 Vc / (1-p)) exp(-n eps^2 / 64)
    V = min( exp(-2 n p eps^2 / 25),
             (16/eps) sqrt( Vc (ln(2(1-p)+1) + 4) / (n(1-p)) ) )

    The log argument defaults to "2(1-p)+1"; v_log_with_n=True switches it to
    "2n(1-p)+1" for sensitivity runs.
    """
    _check_np_eps(n, p, eps)
    if vc_dim < 1:
        raise ValueError("vc_dim must be >= 1")
    # log space: the covering-number power overflows floats long before the
    # bound stops being astronomically vacuous
    log_b = (
        math.log(5.0)
        + (4.0 * vc_dim / (1.0 - p)) * math.log(2.0 * n * (1.0 - p) + 1.0)
        - n * eps * eps / 64.0
    )
    b_term = math.exp(log_b) if log_b < 709.0 else math.inf
    log_arg = 2.0 * n * (1.0 - p) + 1.0 if v_log_with_n else 2.0 * (1.0 - p) + 1.0
    v_first = math.exp(-2.0 * n * p * eps * eps / 25.0)
    if eps > 0:
        v_second = (16.0 / eps) * math.sqrt(vc_dim * (math.log(log_arg) + 4.0) / (n * (1.0 - p)))
    else:
        v_second = math.inf
    return TailBound(
        threshold_shift=0.0,
        raw_value=b_term + min(v_first, v_second),
        inputs={
            "formula": "vc-baseline",
            "n": n,
            "p": p,
            "eps": eps,
            "vc_dim": vc_dim,
            "B": b_term,
            "V_exp_branch": v_first,
            "V_sqrt_branch": v_second,
            "v_log_with_n": v_log_with_n,
        },
    )


def generic_stability_tail(
    n: int,
    p: float,
    eps: float,
    lam: float,
    alpha: float = 1.0,
    delta: float = 0.0,
    multiplier: float = 1.0,
) -> TailBound:
    """Pr(|gap| >= eps + lam(2p)^alpha) <= 2 exp(-2 n p eps^2) + multiplier*delta.

    multiplier = 1 under a uniform-over-support premise, kappa(n) when passing
    from a per-mask premise via the union bound.
    """
    _check_np_eps(n, p, eps)
    if lam < 0 or delta < 0 or multiplier < 0:
        raise ValueError("lam, delta, multiplier must be >= 0")
    shift = lam * (2.0 * p) ** alpha
    raw = 2.0 * math.exp(-2.0 * n * p * eps * eps) + multiplier * delta
    return TailBound(
        threshold_shift=shift,
        raw_value=raw,
        inputs={
            "formula": "generic-stability",
            "n": n,
            "p": p,
            "eps": eps,
            "lam": lam,
            "alpha": alpha,
            "delta": delta,
            "multiplier": multiplier,
        },
    )


def uniform_stability_tail_strong(
    n: int,
    p: float,
    eps: float,
    lam: float,
    alpha: float = 1.0,
    delta: float = 0.0,
    delta_loo_next: float = 0.0,
    alpha_prime: float | None = None,
) -> TailBound:
    """Sup-norm strong-stability tail for symmetric schemes.

    Event shift is delta + lam(2p)^alpha.  With delta' = delta +
    (n+1)*delta_loo_next and free parameter alpha' > 0:

        4 ( exp(-eps^2 / (8 n (5 lam (2p)^alpha + alpha')^2)) + (n/alpha') delta' )

    alpha' defaults to 5 lam (2p)^alpha, which collapses the general form to
    4(exp(-eps^2 / (8 (10 lam)^2 n (2p)^(2 alpha))) + ...) exactly (same
    expression, same evaluation order).  lam = 0 then requires an explicit
    alpha_prime.
    """
    _check_np_eps(n, p, eps)
    if lam < 0 or delta < 0 or delta_loo_next < 0:
        raise ValueError("lam and delta inputs must be >= 0")
    c = 5.0 * lam * (2.0 * p) ** alpha
    if alpha_prime is None:
        if c <= 0.0:
            raise ValueError("lam = 0: supply an explicit alpha_prime > 0")
        alpha_prime = c
    if alpha_prime <= 0:
        raise ValueError("alpha_prime must be > 0")
    delta_prime = delta + (n + 1.0) * delta_loo_next
    shift = delta + lam * (2.0 * p) ** alpha
    raw = 4.0 * (
        math.exp(-eps * eps / (8.0 * n * (c + alpha_prime) ** 2))
        + (n / alpha_prime) * delta_prime
    )
    return TailBound(
        threshold_shift=shift,
        raw_value=raw,
        inputs={
            "formula": "uniform-strong",
            "n": n,
            "p": p,
            "eps": eps,
            "lam": lam,
            "alpha": alpha,
            "delta": delta,
            "delta_loo_next": delta_loo_next,
            "alpha_prime": alpha_prime,
            "delta_prime": delta_prime,
        },
    )


def uniform_stability_tail_weak(
    n: int,
    p: float,
    eps: float,
    lam: float,
    alpha: float = 1.0,
    delta_prime: float = 0.0,
    delta: float = 0.0,
) -> TailBound:
    """Sup-norm weak-stability tail, with c = 5 lam (2p)^alpha:

        4 ( exp(-eps^2 / (10 n c^2 (1 + 2 eps / (15 n c))^2))
            + (2 n sqrt(delta') / c) exp(eps n / (4 n c^2))
            + n sqrt(delta') )

    delta' is caller-assembled (2*delta_loo + delta for the sup-over-support
    premise, delta_loo + kappa*delta for the per-mask one).  The optional
    delta enters only the event shift delta + lam(2p)^alpha.
    """
    _check_np_eps(n, p, eps)
    if lam <= 0:
        raise ValueError("lam must be > 0 for the weak sup-norm tail")
    if delta_prime < 0 or delta < 0:
        raise ValueError("delta inputs must be >= 0")
    c = 5.0 * lam * (2.0 * p) ** alpha
    shift = delta + lam * (2.0 * p) ** alpha
    bulge = (1.0 + 2.0 * eps / (15.0 * n * c)) ** 2
    first = math.exp(-eps * eps / (10.0 * n * c * c * bulge))
    sq = math.sqrt(delta_prime)
    if sq > 0.0:
        grow = eps * n / (4.0 * n * c * c)
        boost = math.exp(grow) if grow < 709.0 else math.inf
        extra = (2.0 * n * sq / c) * boost + n * sq
    else:
        extra = 0.0
    return TailBound(
        threshold_shift=shift,
        raw_value=4.0 * (first + extra),
        inputs={
            "formula": "uniform-weak",
            "n": n,
            "p": p,
            "eps": eps,
            "lam": lam,
            "alpha": alpha,
            "delta_prime": delta_prime,
            "delta": delta,
            "c": c,
        },
    )


def holdout_uniform_tail(
    n: int,
    p: float,
    eps: float,
    lam: float,
    alpha: float = 1.0,
    delta: float = 0.0,
    delta_loo: float = 0.0,
    exponent_with_n: bool = False,
) -> TailBound:
    """Sup-norm tail for the (non-symmetric) hold-out split.

    With D = 4 lam (2p)^alpha + 1/(n p) and delta' = delta + n*delta_loo:

        4 ( exp(-eps^2 / (8 D^2)) + (n^2 / D) delta' )

    The exponent denominator carries no n factor, unlike the symmetric-scheme
    variants; exponent_with_n=True inserts one for sensitivity runs.
    """
    _check_np_eps(n, p, eps)
    if lam < 0 or delta < 0 or delta_loo < 0:
        raise ValueError("lam and delta inputs must be >= 0")
    d_scale = 4.0 * lam * (2.0 * p) ** alpha + 1.0 / (n * p)
    delta_prime = delta + n * delta_loo
    denom = 8.0 * d_scale * d_scale
    if exponent_with_n:
        denom *= n
    raw = 4.0 * (math.exp(-eps * eps / denom) + (n * n / d_scale) * delta_prime)
    return TailBound(
        threshold_shift=delta + lam * (2.0 * p) ** alpha,
        raw_value=raw,
        inputs={
            "formula": "holdout-uniform",
            "n": n,
            "p": p,
            "eps": eps,
            "lam": lam,
            "alpha": alpha,
            "delta": delta,
            "delta_loo": delta_loo,
            "delta_prime": delta_prime,
            "exponent_with_n": exponent_with_n,
        },
    )


def l1_bound(
    kind: str,
    n: int,
    p: float,
    lam: float,
    delta: float = 0.0,
    delta_prime: float = 0.0,
) -> float:
    """Bound on the expected |cv-estimate - risk| gap.

    weak-general:   2 lam p + sqrt(2/(n p)) + delta
    strong-uniform: delta + 2 lam p + 51 lam sqrt(n) p + (n / (9 lam p)) delta'
    """
    if n < 1 or not 0.0 < p < 1.0:
        raise ValueError("need n >= 1 and p in (0, 1)")
    if lam < 0 or delta < 0 or delta_prime < 0:
        raise ValueError("lam and delta inputs must be >= 0")
    if kind == "weak-general":
        return 2.0 * lam * p + math.sqrt(2.0 / (n * p)) + delta
    if kind == "strong-uniform":
        if lam <= 0:
            raise ValueError("strong-uniform l1 bound requires lam > 0")
        return delta + 2.0 * lam * p + 51.0 * lam * math.sqrt(n) * p + (n / (9.0 * lam * p)) * delta_prime
    raise ValueError(f"unknown l1 bound kind {kind!r}")


def optimal_split(kind: str, n: int, lam: float) -> SplitRule:
    """Test fraction minimizing the expected-gap bound.

    weak-general:   p* = (1/(4 sqrt(2) lam))^(2/3) n^(-1/3), clamped to
                    [1/n, 1/2]; objective 4 lam p + sqrt(2/(n p)) at p*.
    strong-uniform: p* = 1/n (leave-one-out), objective from the
                    strong-uniform l1 bound with the delta terms at zero.
    """
    if lam <= 0:
        raise ValueError("lam must be > 0")
    if n < 2:
        raise ValueError("n must be >= 2")
    if kind == "weak-general":
        p_star = (1.0 / (4.0 * math.sqrt(2.0) * lam)) ** (2.0 / 3.0) * n ** (-1.0 / 3.0)
        p_star = min(max(p_star, 1.0 / n), 0.5)
        return SplitRule(p_star, 4.0 * lam * p_star + math.sqrt(2.0 / (n * p_star)))
    if kind == "strong-uniform":
        p_star = 1.0 / n
        return SplitRule(p_star, l1_bound("strong-uniform", n, p_star, lam))
    raise ValueError(f"unknown split kind {kind!r}")


def _range_widths(ranges, n: int) -> list[float]:
    if isinstance(ranges, (int, float)):
        return [float(ranges)] * n
    widths = []
    for r in ranges:
        if isinstance(r, (tuple, list)):
            a, b = r
            widths.append(float(b) - float(a))
        else:
            widths.append(float(r))
    if len(widths) != n:
        raise ValueError(f"got {len(widths)} ranges for n={n}")
    return widths


def hoeffding_tail(n: int, eps: float, ranges) -> float:
    """Pr(sum X_i - E sum X_i >= n eps) <= exp(-2 n^2 eps^2 / sum (b_i-a_i)^2).

    ranges: a single width applied to all n variables, a sequence of widths,
    or a sequence of (a_i, b_i) pairs.
    """
    if n < 1 or eps < 0:
        raise ValueError("need n >= 1 and eps >= 0")
    widths = _range_widths(ranges, n)
    if any(w <= 0 for w in widths):
        raise ValueError("all ranges must have positive width")
    return math.exp(-2.0 * n * n * eps * eps / math.fsum(w * w for w in widths))


def mcdiarmid_tail(eps: float, c: Sequence[float]) -> float:
    """Bounded-differences tail exp(-2 eps^2 / sum c_i^2)."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    cs = [float(ci) for ci in c]
    if not cs or any(ci <= 0 for ci in cs):
        raise ValueError("bounded-difference constants must be positive")
    return math.exp(-2.0 * eps * eps / math.fsum(ci * ci for ci in cs))


def kutin_strong_tail(
    n: int,
    tau: float,
    b: float,
    c: float,
    delta: float,
    alpha_prime: float,
) -> float:
    """Strongly difference-bounded (b, c, delta) variables, free alpha' > 0:

        2 ( exp(-tau^2 / (8 n (c + b alpha')^2)) + (n / alpha') delta )
    """
    if not b >= c >= 0:
        raise ValueError("need b >= c >= 0")
    if alpha_prime <= 0:
        raise ValueError("alpha_prime must be > 0")
    if n < 1 or tau < 0 or delta < 0:
        raise ValueError("need n >= 1, tau >= 0, delta >= 0")
    return 2.0 * (
        math.exp(-tau * tau / (8.0 * n * (c + b * alpha_prime) ** 2))
        + (n / alpha_prime) * delta
    )


def kutin_weak_tail(n: int, eps: float, b: float, c: float, delta: float) -> float:
    """Weakly difference-bounded (b, c, delta) variables:

        2 exp(-eps^2 / (10 n c^2 (1 + 2 eps/(15 n c))^2))
        + (2 n b sqrt(delta) / c) exp(eps b / (4 n c^2))
        + 2 n sqrt(delta)
    """
    if not b >= c > 0:
        raise ValueError("need b >= c > 0")
    if n < 1 or eps < 0 or delta < 0:
        raise ValueError("need n >= 1, eps >= 0, delta >= 0")
    bulge = (1.0 + 2.0 * eps / (15.0 * n * c)) ** 2
    first = 2.0 * math.exp(-eps * eps / (10.0 * n * c * c * bulge))
    sq = math.sqrt(delta)
    if sq == 0.0:
        return first
    grow = eps * b / (4.0 * n * c * c)
    boost = math.exp(grow) if grow < 709.0 else math.inf
    return first + (2.0 * n * b * sq / c) * boost + 2.0 * n * sq


def expectation_from_tail(big_c: float, big_k: float) -> float:
    """E X <= sqrt((ln C + 2) / K) when Pr(X >= eps) <= C exp(-K eps^2), C >= 1."""
    if big_c < 1.0:
        raise ValueError("C must be >= 1")
    if big_k <= 0.0:
        raise ValueError("K must be > 0")
    return math.sqrt((math.log(big_c) + 2.0) / big_k)


def delta_heuristic(n: int, p: float, c0: float = 1.0) -> float:
    """The delta_{n,p} family c0 * p * exp(-n(1-p)) used as a default premise."""
    if n < 1 or not 0.0 < p < 1.0 or c0 < 0:
        raise ValueError("need n >= 1, p in (0,1), c0 >= 0")
    return c0 * p * math.exp(-n * (1.0 - p))
