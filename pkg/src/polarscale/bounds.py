"""Closed-form quantities: list-doubling lower bounds, blocklength
thresholds, random-ensemble and dispersion approximations, and the
scaling-exponent fit.

Everything here is a pure function of scalars (plus one least-squares fit).
Threshold evaluation runs in 50-digit arithmetic internally because the
nested log arguments span many orders of magnitude when pe is small; results
are returned as ordinary floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import mpmath
import numpy as np

_SQRT2 = math.sqrt(2.0)


def qfunc(x: float) -> float:
    """Gaussian tail Q(x) = P(Normal(0,1) > x), via the complementary erf."""
    return 0.5 * math.erfc(x / _SQRT2)


def qfunc_inv(p: float, tol: float = 1e-14) -> float:
    """Inverse of qfunc by bisection; p must lie in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0,1)")
    lo, hi = -40.0, 40.0
    # Q is decreasing: Q(lo) ~ 1, Q(hi) ~ 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if qfunc(mid) > p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# list-doubling recursion and bound reports
# ---------------------------------------------------------------------------


DOUBLING_CONSTANT = 3.0 / 16.0


@dataclass(frozen=True)
class DIBoundReport:
    pe_L: float
    pe_next: float
    rhs: float
    conditions_met: bool
    holds: bool


def di_recursion(pe_init: float, steps: int) -> list[float]:
    """Iterate pe -> (3/16) pe^2 for ``steps`` steps, start included.

    Both fixed points (0 and 16/3) lie outside (0,1), so from any start in
    (0,1) the sequence decreases strictly towards 0.
    """
    if not 0.0 < pe_init < 1.0:
        raise ValueError("pe_init must be in (0,1)")
    out = [pe_init]
    for _ in range(steps):
        out.append(DOUBLING_CONSTANT * out[-1] * out[-1])
    return out


def di_bound_check(
    pe_L: float,
    pe_next: float,
    dmin: int,
    z: float,
    pe_floor: float,
    tol: float = 1e-12,
) -> DIBoundReport:
    """Check the list-doubling lower bound pe_next >= (3/16) pe_L^2.

    The bound is only guaranteed when pe_L exceeds the floor and the minimum
    distance keeps every single codeword event below pe_floor/8, i.e.
    dmin > ln(pe_floor/8)/ln z; ``conditions_met`` records that, ``holds``
    records the inequality itself (with slack ``tol``).
    """
    rhs = DOUBLING_CONSTANT * pe_L * pe_L
    conditions = pe_L > pe_floor and dmin > math.log(pe_floor / 8.0) / math.log(z)
    return DIBoundReport(pe_L, pe_next, rhs, conditions, pe_next >= rhs - tol)


def genie_step_check(
    pe_k: float, pe_next: float, pe_floor: float, tol: float = 1e-12
) -> DIBoundReport:
    """Same doubling inequality for one extra genie use.

    Guaranteed when 1/4 > pe_k > pe_floor; ``conditions_met`` records that
    window, ``holds`` the inequality pe_next >= (3/16) pe_k^2.
    """
    rhs = DOUBLING_CONSTANT * pe_k * pe_k
    conditions = 0.25 > pe_k > pe_floor
    return DIBoundReport(pe_k, pe_next, rhs, conditions, pe_next >= rhs - tol)


def composed_lower_bound_general(pe_map1: float, L: int) -> float:
    """Lower bound on MAP list-(L+1) error from the list-1 error.

    Composing the doubling step L times: (3/16)^(2^L - 1) * pe^(2^L).
    """
    if L < 0:
        raise ValueError("L must be >= 0")
    e = 1 << L
    return DOUBLING_CONSTANT ** (e - 1) * pe_map1**e


def composed_lower_bound_bec(pe_map1: float, L: int) -> float:
    """Erasure-channel variant: bound on the MAP list-(2L) error.

    Power-of-two list equivalence sharpens the composition to
    (3/16)^(2L - 1) * pe^(2L).
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    return DOUBLING_CONSTANT ** (2 * L - 1) * pe_map1 ** (2 * L)


# ---------------------------------------------------------------------------
# blocklength thresholds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdSet:
    c: int
    mbar: float
    nbar: float
    kbar: int


def _thresholds(base, exponent_scale, nbar_log, pe):
    """Shared 50-digit evaluation; see thresholds_bec/thresholds_bmsc.

    ``base`` is eps (erasure case) or z (general case); ``exponent_scale``
    is the 2 or 4 in base^(scale * ln(pe/8)/ln base); ``nbar_log`` is a
    callable producing the log term of nbar at working precision.
    """
    with mpmath.workdps(50):
        b = mpmath.mpf(base)
        lnpe8 = mpmath.log(mpmath.mpf(pe) / 8)
        lnb = mpmath.log(b)
        c = int(mpmath.ceil(mpmath.log(lnpe8 / lnb, 2)))
        inner = mpmath.log1p(-(b ** (exponent_scale * lnpe8 / lnb)))
        ln1mb = mpmath.log1p(-b)
        mbar = mpmath.log(2 * lnpe8 * ln1mb / (lnb * inner), 2)
        lnn = nbar_log()
        nbar = 2 * mbar - lnn + mpmath.sqrt(-4 * mbar * lnn + lnn**2)
        kbar = int(mpmath.ceil(mpmath.log(ln1mb / inner, 2)))
        return ThresholdSet(c, float(mbar), float(nbar), kbar)


def thresholds_bec(epsilon: float, pe: float) -> ThresholdSet:
    """Blocklength thresholds for the erasure channel.

    With C = ln(pe/8)/ln(eps):
      c    = ceil(log2 C)
      mbar = log2( 2 ln(pe/8) ln(1-eps) / (ln eps * ln(1 - eps^(2C))) )
      nbar = 2 mbar - ln eps + sqrt(-4 mbar ln eps + (ln eps)^2)
      kbar = ceil(log2( ln(1-eps) / ln(1 - eps^(2C)) ))
    Note eps^(2C) = (pe/8)^2 identically, which the tests exploit.
    """
    if not (0.0 < epsilon < 1.0 and 0.0 < pe < 1.0):
        raise ValueError("epsilon and pe must be in (0,1)")
    return _thresholds(epsilon, 2, lambda: mpmath.log(mpmath.mpf(epsilon)), pe)


def thresholds_bmsc(z: float, capacity: float, pe: float) -> ThresholdSet:
    """General-channel thresholds from the Bhattacharyya parameter z.

    Same shape as thresholds_bec with exponent 4 ln(pe/8)/ln z inside the
    logs and ln(1-capacity) in place of ln(eps) inside nbar.
    """
    if not (0.0 < z < 1.0 and 0.0 < capacity < 1.0 and 0.0 < pe < 1.0):
        raise ValueError("z, capacity, pe must all be in (0,1)")
    return _thresholds(z, 4, lambda: mpmath.log1p(-mpmath.mpf(capacity)), pe)


# ---------------------------------------------------------------------------
# approximations
# ---------------------------------------------------------------------------


def random_list_pe_approx(
    n_block: int, rate: float, epsilon: float, list_size: int
) -> float:
    """Gaussian approximation of the random-ensemble list-L error on BEC.

    Q( log2(L)/sqrt(N eps(1-eps)) + sqrt(N)(1-eps-R)/sqrt(eps(1-eps)) ).
    """
    if list_size < 1:
        raise ValueError("list_size must be >= 1")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must be in (0,1)")
    sd = math.sqrt(epsilon * (1.0 - epsilon))
    arg = math.log2(list_size) / (math.sqrt(n_block) * sd)
    arg += math.sqrt(n_block) * (1.0 - epsilon - rate) / sd
    return qfunc(arg)


def dispersion_blocklength(pe: float, gap: float, v: float) -> float:
    """Blocklength needed for error pe at capacity gap, dispersion v.

    N ~ v * Qinv(pe)^2 / gap^2; for the BEC, v = eps(1-eps).
    """
    if gap <= 0.0:
        raise ValueError("gap must be positive")
    q = qfunc_inv(pe)
    return v * q * q / (gap * gap)


# ---------------------------------------------------------------------------
# scaling-exponent fit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingFit:
    samples: tuple[tuple[int, float], ...]
    target_pe: float
    mu: float
    residual: float

    def __post_init__(self):
        ns = [n for n, _ in self.samples]
        if ns != sorted(set(ns)):
            raise ValueError("samples must have strictly increasing N")


def scaling_mu_fit(
    samples: Sequence[tuple[int, float]],
    capacity: float,
    target_pe: float = float("nan"),
) -> ScalingFit:
    """Fit the scaling exponent from (N, rate-at-fixed-error) samples.

    If the capacity gap closes like N^(-1/mu) at a fixed target error, then
    log(C - R) is linear in log N with slope -1/mu; mu comes from the
    least-squares slope and ``residual`` is the sum of squared residuals.
    """
    if len(samples) < 2:
        raise ValueError("need at least 2 samples")
    for n, r in samples:
        if r >= capacity:
            raise ValueError(f"rate {r} at N={n} is not below capacity {capacity}")
    x = np.log([n for n, _ in samples])
    y = np.log([capacity - r for _, r in samples])
    (slope, intercept), res = np.polyfit(x, y, 1, full=True)[:2]
    if slope >= 0:
        raise ValueError("gap does not shrink with N; no scaling law to fit")
    residual = float(res[0]) if len(res) else 0.0
    return ScalingFit(tuple(samples), target_pe, -1.0 / float(slope), residual)
