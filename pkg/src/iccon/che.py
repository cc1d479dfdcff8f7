"""Characteristic time of a shared LRU cache under Che's approximation.

A cache of ``c`` items serves ``alpha`` UEs, each issuing Zipf(s) requests at
rate ``lambda_c``, so item ``i`` arrives at rate ``q_i = alpha*lambda_c*p_i``.
The characteristic time ``tau`` solves ``sum_i (1 - exp(-q_i tau)) = c`` and
item ``i`` is then a hit with probability ``1 - exp(-q_i tau)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .catalogue import build_catalogue
from .errors import ConfigError

DEFAULT_ALPHAS = (1.0, 10.0, 100.0, 1e3, 1e4, 1e5)
DEFAULT_C_RATIOS = (1e-4, 1e-3, 1e-2, 1e-1)

G_TOL = 1e-9
MAX_DOUBLINGS = 2000
MAX_BISECTIONS = 400


@dataclass(frozen=True)
class CheInput:
    C: int
    s: float
    c: int
    alpha: float
    lambda_c: float

    def validate(self):
        if not 0 < self.c < self.C:
            raise ConfigError(f"cache size must satisfy 0 < c < C={self.C}, got c={self.c}")
        if not self.alpha >= 1:
            raise ConfigError(f"aggregation level must be >= 1, got {self.alpha}")
        if not self.lambda_c > 0:
            raise ConfigError(f"request rate must be positive, got {self.lambda_c}")
        return self


@dataclass(frozen=True)
class CheSolution:
    tau: float
    r: float
    chr: float


@lru_cache(maxsize=8)
def _popularity(C, s):
    return build_catalogue(C, s).p


def _rates(inp):
    return inp.alpha * inp.lambda_c * _popularity(inp.C, inp.s)


def occupancy_excess(inp, tau, q=None):
    """``g(tau) = sum_i (1 - exp(-q_i tau)) - c``; increasing from ``-c``."""
    if q is None:
        q = _rates(inp)
    return float(np.sum(-np.expm1(-q * tau))) - inp.c


def characteristic_time(inp, trace=None):
    """Solve for ``tau`` by bracket doubling then bisection.

    ``trace``, if given, receives ``(lo, g(lo), hi, g(hi))`` for every bracket
    the bisection visits.
    """
    inp.validate()
    q = _rates(inp)
    tol = G_TOL * inp.c

    def g(t):
        return occupancy_excess(inp, t, q)

    hi = 1.0 / (inp.alpha * inp.lambda_c)
    g_hi = g(hi)
    lo, g_lo = 0.0, -float(inp.c)
    for _ in range(MAX_DOUBLINGS):
        if g_hi > 0:
            break
        lo, g_lo = hi, g_hi
        hi *= 2.0
        g_hi = g(hi)
    else:
        raise ConfigError("no finite characteristic time: bracket did not close")

    for _ in range(MAX_BISECTIONS):
        if trace is not None:
            trace.append((lo, g_lo, hi, g_hi))
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        g_mid = g(mid)
        if abs(g_mid) <= tol:
            return mid
        if g_mid < 0:
            lo, g_lo = mid, g_mid
        else:
            hi, g_hi = mid, g_mid
    # bracket collapsed to adjacent floats
    return lo if abs(g_lo) <= abs(g_hi) else hi


def r_value(tau, lambda_c):
    if not (tau > 0 and lambda_c > 0):
        raise ConfigError("tau and lambda_c must be positive")
    return tau * lambda_c


def predicted_chr(inp, tau):
    """``sum_i p_i (1 - exp(-q_i tau))``."""
    p = _popularity(inp.C, inp.s)
    return float(np.sum(p * -np.expm1(-_rates(inp) * tau)))


def solve(inp):
    tau = characteristic_time(inp)
    return CheSolution(tau=tau, r=r_value(tau, inp.lambda_c), chr=predicted_chr(inp, tau))


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    c_ratio: float
    c_items: int
    tau_seconds: float | None
    r: float | None
    chr: float | None
    error: str | None = None


def cache_items(C, c_ratio):
    """``floor(c_ratio * C)``, at least 1."""
    return max(1, math.floor(c_ratio * C + 1e-9))


def sweep(alphas, c_ratios, C, s, lambda_c):
    """One row per ``(alpha, c_ratio)`` pair, alpha-major.

    Invalid cells are returned with ``error`` set instead of aborting.
    """
    rows = []
    for alpha in alphas:
        for ratio in c_ratios:
            c = cache_items(C, ratio)
            try:
                sol = solve(CheInput(C=C, s=s, c=c, alpha=alpha, lambda_c=lambda_c))
            except ConfigError as exc:
                rows.append(SweepRow(alpha, ratio, c, None, None, None, str(exc)))
            else:
                rows.append(SweepRow(alpha, ratio, c, sol.tau, sol.r, sol.chr))
    return rows
