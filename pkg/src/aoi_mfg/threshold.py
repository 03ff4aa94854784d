"""Single-agent priced transmission MDP: threshold computation and AoI chain analytics.

The agent pays the running cost c(tau) every step plus a price lambda per
transmission attempt; an attempt succeeds (AoI resets to 0) with probability
1 - p. The optimal policy transmits iff tau >= kappa. `solve_kappa` computes
kappa from the implicit interpolated-cost equation; `value_iteration_oracle`
is the independent truncated-MDP check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AssumptionViolationError, NoConvergenceError
from .estimator import WeightTable

_KAPPA_CAP = 10**6


def _scalar_of(M):
    """Return the scalar if M is effectively 1x1, else None."""
    m = np.atleast_2d(np.asarray(M, dtype=float))
    if m.size == 1:
        return float(m.ravel()[0])
    return None


@dataclass(frozen=True)
class ThresholdSolution:
    """Threshold kappa, interpolation offset eta, and optimal average cost."""

    kappa: int
    eta: float
    sigma_star: float
    lam: float


@dataclass(frozen=True)
class AoIChain:
    """Stationary law of the AoI chain under the dual-threshold mixture policy.

    Explicit probabilities up to kbar; above kbar the law is geometric with
    ratio p: pi(kbar + j) = head[kbar] * p**j.
    """

    klow: int
    kbar: int
    q: float
    p: float
    head: np.ndarray  # pi(0..kbar)
    tail_ratio: float

    def pmf(self, tau: int) -> float:
        if tau <= self.kbar:
            return float(self.head[tau])
        return float(self.head[self.kbar] * self.tail_ratio ** (tau - self.kbar))

    def total_mass(self) -> float:
        head = float(self.head[:-1].sum())
        top = float(self.head[-1]) / (1.0 - self.tail_ratio) if self.tail_ratio < 1 else math.inf
        return head + top


def _check_assumption(A, C_W, p):
    a = float(np.sum(np.atleast_2d(np.asarray(A, dtype=float)) ** 2))
    if a * p >= 1.0:
        raise AssumptionViolationError("<inline>", a * p)
    return a


def f_tail(x: int, A, C_W, p: float) -> float:
    """Discounted-by-erasure tail cost f(x) = sum_{r>=0} c(x+r) p^r.

    Scalar systems use the closed form (with the series-consistent
    p/(1-p)^2 term); matrix systems sum the series until the geometric
    tail bound drops below 1e-12 relative.
    """
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    if not 0.0 <= p < 1.0:
        raise ValueError(f"p must lie in [0, 1), got {p}")
    a = _check_assumption(A, C_W, p)
    sa, sc = _scalar_of(A), _scalar_of(C_W)
    if sa is not None and sc is not None:
        return _f_tail_scalar(x, sa * sa, sc, p)
    return _f_tail_series(x, WeightTable(A, C_W), a, p)


def _f_tail_scalar(x, a, cw, p):
    if p == 0.0:
        # series collapses to its first term c(x)
        return cw * x * (x if a == 1.0 else (1.0 - a**x) / (1.0 - a))
    if a == 1.0:
        return cw * (x * x / (1 - p) + 2 * x * p / (1 - p) ** 2 + p * (1 + p) / (1 - p) ** 3)
    geo = x / (1 - p) + p / (1 - p) ** 2
    geo_a = a**x * (x / (1 - a * p) + a * p / (1 - a * p) ** 2)
    return cw / (1 - a) * (geo - geo_a)


def _f_tail_series(x, table, a, p, rel=1e-12):
    if p == 0.0:
        return table.c(x)
    ratio = max(p, a * p)
    acc = 0.0
    term_p = 1.0
    for r in range(200000):
        term = table.c(x + r) * term_p
        acc += term
        term_p *= p
        # remaining tail is geometric in max(p, a*p) up to the linear tau factor
        if acc > 0 and term * ratio / (1.0 - ratio) < rel * acc and r > 2:
            return acc
    raise NoConvergenceError("f_tail series did not meet its tail bound (mis-scaled inputs?)")


def solve_kappa(A, C_W, p: float, lam: float) -> ThresholdSolution:
    """Smallest integer threshold kappa and eta in [0, 1] solving the
    interpolated implicit equation (1 + kappa(1-p)) f(kappa+eta) =
    lam/(1-p) + f(kappa) + sum_{i<kappa} c(i), with f between integers
    defined by linear interpolation; sigma* = (1-p) f(kappa+eta).

    kappa is nondecreasing in lam.
    """
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    _check_assumption(A, C_W, p)
    table = WeightTable(A, C_W)
    cum = 0.0  # sum_{i=1}^{kappa-1} c(i)
    f_k = f_tail(0, A, C_W, p)
    for kappa in range(_KAPPA_CAP):
        f_k1 = f_tail(kappa + 1, A, C_W, p)
        rhs = lam / (1.0 - p) + f_k + cum
        target = rhs / (1.0 + kappa * (1.0 - p))  # = sigma(kappa) / (1-p)
        if f_k1 >= target - 1e-12 * max(1.0, abs(target)):
            eta = _solve_eta(f_k, f_k1, target)
            f_interp = (1.0 - eta) * f_k + eta * f_k1
            return ThresholdSolution(kappa=kappa, eta=eta, sigma_star=(1.0 - p) * f_interp, lam=lam)
        cum += table.c(kappa)
        f_k = f_k1
    raise NoConvergenceError("kappa scan exceeded cap; inputs are likely mis-scaled")


def _solve_eta(f0, f1, target, tol=1e-9):
    """Bisection for eta with (1-eta) f0 + eta f1 = target, clamped to [0, 1]."""
    if target <= f0:
        return 0.0
    if target >= f1:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if (1.0 - mid) * f0 + mid * f1 < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def value_iteration_oracle(A, C_W, p: float, lam: float, state_cap: int = 500,
                           tol: float = 1e-9, max_iter: int = 200000):
    """Relative value iteration on the truncated AoI MDP {0..state_cap}.

    Returns (policy, sigma_star): the optimal action per state (ties broken
    toward transmitting) and the average cost. Uses a 0.5 damping step so the
    iteration also converges on the periodic p = 0 chains. Convergence is
    measured per state relative to the value scale there (values span many
    orders of magnitude for unstable dynamics, so an absolute span can sit
    permanently at the float64 resolution of the largest entries); the
    average cost is read off state 0, where values are well scaled. The
    truncation is audited post hoc: residual stationary mass above the cap
    must be < 1e-9.
    """
    _check_assumption(A, C_W, p)
    table = WeightTable(A, C_W)
    c = table.c_table(state_cap)
    S = state_cap + 1
    V = np.zeros(S)
    nxt = np.minimum(np.arange(S) + 1, state_cap)
    damping = 0.5
    sigma = math.nan
    for _ in range(max_iter):
        q0 = c + V[nxt]
        q1 = c + lam + p * V[nxt] + (1.0 - p) * V[0]
        tv = np.minimum(q0, q1)
        diff = tv - V
        sigma_prev = sigma
        sigma = float(diff[0])
        scale = np.maximum(1.0, np.abs(V))
        err = float(np.max(np.abs(diff - sigma) / scale))
        V = V + damping * diff
        V -= V[0]
        if (err < tol and sigma_prev == sigma_prev
                and abs(sigma - sigma_prev) < tol * max(1.0, abs(sigma))):
            break
    else:
        raise NoConvergenceError(f"relative value iteration: error {err:.3e} after {max_iter} iters")
    q0 = c + V[nxt]
    q1 = c + lam + p * V[nxt] + (1.0 - p) * V[0]
    policy = (q1 <= q0 + 1e-12 * np.maximum(1.0, np.abs(q0))).astype(int)
    ones = np.flatnonzero(policy)
    kappa = int(ones[0]) if ones.size else state_cap
    residual = p ** (state_cap - kappa) if p > 0 else 0.0
    if residual >= 1e-9:
        raise NoConvergenceError(
            f"truncation audit failed: stationary mass above cap ~{residual:.2e}")
    return policy, sigma


def transmission_rate(klow: int, kbar: int, q: float, p: float) -> float:
    """Exact long-run attempt rate of the dual-threshold mixture policy.

    Renewal-reward on the AoI chain: expected attempts per return cycle over
    expected cycle length. For q = 1 (single threshold kappa) this reduces
    to 1 / ((1-p) kappa + 1).
    """
    _validate_chain_args(klow, kbar, q, p)
    length, attempts, _ = _cycle_stats(klow, kbar, q, p)
    return attempts / length


def _validate_chain_args(klow, kbar, q, p):
    if klow < 0 or kbar < klow:
        raise ValueError(f"need 0 <= klow <= kbar, got ({klow}, {kbar})")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    if not 0.0 <= p < 1.0:
        raise ValueError(f"p must lie in [0, 1), got {p}")


def _cycle_stats(klow, kbar, q, p):
    """(expected cycle length, expected attempts per cycle, visit probs rho).

    rho[tau] = probability that a renewal cycle starting at tau = 0 visits tau.
    Middle states klow <= tau < kbar survive with s = 1 - q(1-p); above kbar
    the survival ratio is p.
    """
    s = 1.0 - q * (1.0 - p)
    mid = kbar - klow
    rho = np.empty(kbar + 1)
    rho[: klow + 1] = 1.0
    if mid > 0:
        rho[klow: kbar + 1] = s ** np.arange(mid + 1)
    mid_sum = float(rho[klow:kbar].sum())  # states klow..kbar-1
    top = rho[kbar] / (1.0 - p)
    length = klow + mid_sum + top
    attempts = q * mid_sum + top
    return length, attempts, rho


def stationary_distribution(klow: int, kbar: int, q: float, p: float) -> AoIChain:
    """Closed-form stationary law of the AoI chain (unique by irreducibility)."""
    _validate_chain_args(klow, kbar, q, p)
    length, _, rho = _cycle_stats(klow, kbar, q, p)
    return AoIChain(klow=klow, kbar=kbar, q=q, p=p, head=rho / length, tail_ratio=p)


def return_rate_approx(kappa: int, p: float) -> float:
    """Approximate closed-form return rate for a single threshold.

    Kept for comparison only: its defining weights (1-p)^{r+1} p^r do not
    normalize, so it differs from the exact renewal-reward rate for p > 0.
    """
    num = ((1.0 - p) * p - 1.0) ** 2
    den = (1.0 - p) * ((p - 1.0) * p * (kappa + 1) + (1.0 - p) * p + kappa + 1)
    return num / den
