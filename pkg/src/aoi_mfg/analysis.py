"""Analytic bound evaluators: optimality-gap exponent, the erasure-free AoI
cap, tail thresholds with their population-size conditions, and the
auxiliary penalty used in the optimality-gap argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .estimator import WeightTable
from .threshold import f_tail


def std_normal_cdf(z: float) -> float:
    """Standard normal CDF via erfc (deterministic, |error| well below 1e-12)."""
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _std_normal_ppf(prob: float) -> float:
    """Inverse CDF by bisection on std_normal_cdf."""
    if not 0.0 < prob < 1.0:
        raise DomainError(f"quantile argument must lie in (0, 1), got {prob}")
    lo, hi = -40.0, 40.0
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if std_normal_cdf(mid) < prob:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def kl_divergence(x: float, y: float) -> float:
    """Bernoulli Kullback-Leibler divergence D(x||y)."""
    if not (0.0 < x < 1.0 and 0.0 < y < 1.0):
        raise DomainError(f"kl_divergence needs arguments in (0, 1), got ({x}, {y})")
    return x * math.log(x / y) + (1.0 - x) * math.log((1.0 - x) / (1.0 - y))


def gap_bound(alpha: float, q: float, U: float, N: int) -> float:
    """Exponential optimality-gap bound U * exp(-D(alpha||q) N).

    Vacuous (equal to U) when alpha == q.
    """
    if alpha == q:
        return U
    return U * math.exp(-kl_divergence(alpha, q) * N)


def p0_aoi_cap(kbar_max: int, alpha: float) -> int:
    """Uniform AoI cap for the erasure-free channel: 2 max(kbar_max, ceil(1/alpha))."""
    if alpha <= 0:
        raise DomainError(f"alpha must be > 0, got {alpha}")
    return 2 * max(int(kbar_max), math.ceil(1.0 / alpha))


@dataclass(frozen=True)
class TailThreshold:
    """Half-event threshold x; AoI exceeds 2x with probability at most delta
    once the population-size conditions hold."""

    x: int
    aoi_threshold: int          # 2x, from the union of the two half events
    n_min_clt: float            # Berry-Esseen condition, at the evaluation point x
    n_min_gauss: float          # Gaussian-tail condition on the centering term
    delta: float

    def conditions_met(self, N: int) -> bool:
        return N >= self.n_min_clt and N >= self.n_min_gauss


def tail_threshold(delta: float, p: float, alpha: float) -> TailThreshold:
    """Smallest x covering both tail half-events.

    x = ceil(max((2/(alpha(1-p)))^2, log(2/delta)/log(1/p))); the AoI
    threshold is 2x. The Berry-Esseen N-condition is evaluated at x (the
    sqrt(x alpha N) form), the Gaussian condition requires
    Phi(-sqrt(N/(alpha p (1-p)))) <= delta/4.
    """
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1) for the tail bound, got {p}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    x_clt = (2.0 / (alpha * (1.0 - p))) ** 2
    x_geom = math.log(2.0 / delta) / math.log(1.0 / p)
    x = math.ceil(max(x_clt, x_geom))

    # Berry-Esseen: 0.3354 (1-p+0.415)/sqrt(x alpha N) <= delta/4
    n_min_clt = (0.3354 * (1.0 - p + 0.415) * 4.0 / delta) ** 2 / (x * alpha)
    # Gaussian centering: Phi(-sqrt(N/(alpha p (1-p)))) <= delta/4
    z = -_std_normal_ppf(delta / 4.0)
    n_min_gauss = alpha * p * (1.0 - p) * z * z
    return TailThreshold(x=x, aoi_threshold=2 * x, n_min_clt=n_min_clt,
                         n_min_gauss=n_min_gauss, delta=delta)


def aux_penalty(tau: int, y: int, A, C_W, p: float, n_lambda: int, C: int,
                delta_bar: int) -> float:
    """Penalty charged per unscheduled over-threshold agent.

    Zero unless n_lambda > C and tau >= y. With a perfect channel the charge
    is the capped running cost c(delta_bar); with erasures it is the series
    sum_{l>=1} p^l c(tau+l) = p f(tau+1), finite under the erasure
    compatibility condition.
    """
    if n_lambda <= C or tau < y:
        return 0.0
    if p == 0.0:
        return WeightTable(A, C_W).c(delta_bar)
    return p * f_tail(tau + 1, A, C_W, p)


@dataclass(frozen=True)
class BoundReport:
    kl_exponent: float
    gap_bound: float
    p0_aoi_cap: int
    tail: TailThreshold | None
    U: float
    alpha: float
    q: float
    N: int
    vacuous: bool

    def to_dict(self) -> dict:
        out = {
            "kl_exponent": self.kl_exponent,
            "gap_bound": self.gap_bound,
            "p0_aoi_cap": self.p0_aoi_cap,
            "U": self.U,
            "alpha": self.alpha,
            "q": self.q,
            "N": self.N,
            "vacuous": self.vacuous,
        }
        if self.tail is not None:
            out["tail"] = {
                "x": self.tail.x,
                "aoi_threshold": self.tail.aoi_threshold,
                "n_min_clt": self.tail.n_min_clt,
                "n_min_gauss": self.tail.n_min_gauss,
                "delta": self.tail.delta,
            }
        return out


def bound_report(config, policy, delta: float = 0.05) -> BoundReport:
    """Assemble the analytic bounds for one scenario and its relaxed policy."""
    alpha = config.alpha
    q = policy.q
    cap = p0_aoi_cap(policy.kbar_max, alpha)
    U = max(WeightTable(t.A, t.C_W).c(cap) for t in config.types)
    vacuous = (alpha == q) or not (0.0 < q < 1.0)
    exponent = 0.0 if vacuous else kl_divergence(alpha, q)
    bound = U if vacuous else gap_bound(alpha, q, U, config.N)
    tail = tail_threshold(delta, config.p, alpha) if config.p > 0 else None
    return BoundReport(kl_exponent=exponent, gap_bound=bound, p0_aoi_cap=cap,
                       tail=tail, U=U, alpha=alpha, q=q, N=config.N, vacuous=vacuous)
