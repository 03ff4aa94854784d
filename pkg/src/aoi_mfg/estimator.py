"""Decoder-side state estimation and the AoI-to-error weight map.

The decoder keeps the minimum mean-squared estimate of the plant state: a
received packet replaces the estimate with the exact state, otherwise the
estimate is propagated open-loop through the known dynamics. The expected
squared estimation error then depends on the age of the newest received
sample only, through `error_weight`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError


@dataclass
class DecoderState:
    """Estimate Z, last applied control, and the current AoI."""

    Z: np.ndarray
    last_U: np.ndarray
    tau: int = 0


def decoder_update(state: DecoderState, X, U_prev, received: int, A, B) -> DecoderState:
    """One decoder step: adopt X on reception, else propagate Z through (A, B)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    X = np.atleast_1d(np.asarray(X, dtype=float)).ravel()
    U_prev = np.atleast_1d(np.asarray(U_prev, dtype=float)).ravel()
    Z = np.atleast_1d(np.asarray(state.Z, dtype=float)).ravel()
    if A.shape[0] != A.shape[1] or A.shape[0] != Z.size or X.size != Z.size:
        raise DimensionMismatchError(f"A {A.shape} vs state dim {Z.size} / X {X.size}")
    if B.shape[0] != A.shape[0] or B.shape[1] != U_prev.size:
        raise DimensionMismatchError(f"B {B.shape} vs U dim {U_prev.size}")
    if received:
        return DecoderState(Z=X.copy(), last_U=U_prev.copy(), tau=0)
    return DecoderState(Z=A @ Z + B @ U_prev, last_U=U_prev.copy(), tau=state.tau + 1)


class WeightTable:
    """Memoized error weights w(tau) and running costs c(tau) for one type.

    Accumulates matrix powers incrementally (M <- A M), extending the cache
    on demand; no truncation.
    """

    def __init__(self, A, C_W):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.C_W = np.atleast_2d(np.asarray(C_W, dtype=float))
        if self.A.shape != self.C_W.shape or self.A.shape[0] != self.A.shape[1]:
            raise DimensionMismatchError(f"A {self.A.shape} vs C_W {self.C_W.shape}")
        # _w[t] = sum_{l=1..t} tr((A^{l-1})' A^{l-1} C_W); _w[0] = 0
        self._w = [0.0]
        self._power = np.eye(self.A.shape[0])

    def _extend(self, tau: int) -> None:
        while len(self._w) <= tau:
            term = float(np.trace(self._power.T @ self._power @ self.C_W))
            self._w.append(self._w[-1] + term)
            self._power = self.A @ self._power

    def w(self, tau: int) -> float:
        self._extend(tau)
        return self._w[tau]

    def c(self, tau: int) -> float:
        return self.w(tau) * tau

    def c_table(self, max_tau: int) -> np.ndarray:
        """Vector of c(0..max_tau) for vectorized lookups."""
        self._extend(max_tau)
        w = np.asarray(self._w[: max_tau + 1])
        return w * np.arange(max_tau + 1)


def error_weight(tau: int, A, C_W) -> float:
    """Expected squared estimation error at age tau:
    w(tau) = sum_{l=1}^{tau} tr((A^{l-1})' A^{l-1} C_W); w(0) = 0.
    """
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    return WeightTable(A, C_W).w(int(tau))


def running_cost(tau: int, A, C_W) -> float:
    """Per-step scheduling cost c(tau) = w(tau) * tau."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    return WeightTable(A, C_W).c(int(tau))
