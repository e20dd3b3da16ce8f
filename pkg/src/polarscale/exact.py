"""Exhaustive-enumeration probability engine for small N.

Every probability here is an exact sum over all 2^N erasure patterns under
the product measure P(y) = eps^w(y) (1-eps)^(N-w(y)).  Patterns are swept in
ascending integer order and bucketed by Hamming weight with integer counts,
so the only floating-point work is one compensated sum of at most N+1
exactly-counted terms — immune to the scale disparities that plague naive
accumulation when eps is far from 1/2.

The engine caps N at 20 by default (about a million patterns); raise
``cap_n`` explicitly to go beyond at your own patience.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from math import fsum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from polarscale.decoders import (
    Decoder,
    erased_channel_mask,
    list_decode_profile,
)
from polarscale.polar import (
    BhattacharyyaProfile,
    PolarCodeSpec,
    generator_row_masks,
    min_distance,
    reliability_order,
)

DEFAULT_CAP_N = 20


class ConditionViolated(ValueError):
    """A theorem precondition failed for the supplied instance."""


class InfeasibleSplit(RuntimeError):
    """Greedy subset accumulation could not land inside the target window."""


@dataclass(frozen=True)
class ExactProb:
    value: float
    method: str
    pattern_count: int

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0 + 1e-15:
            raise ValueError("probability out of range")


class FkgCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


@dataclass(frozen=True)
class CorrelationReport:
    """Pearson correlations of the info-channel erasure indicators.

    ``rho`` is indexed like ``info`` (the unfrozen channels, ascending);
    undefined entries (degenerate indicators) are NaN and excluded from
    ``rho_sum_with_diagonal``.
    """

    info: tuple[int, ...]
    rho: np.ndarray
    rho_sum_with_diagonal: float
    bound: float


def _check_cap(spec: PolarCodeSpec, cap_n: int) -> None:
    # the engine walks all 2^N erasure patterns, so the bound is on N itself
    if spec.N > cap_n:
        raise ValueError(
            f"N={spec.N} needs 2^{spec.N} patterns, over the enumeration cap "
            f"2^{cap_n}; pass cap_n explicitly to override"
        )


@lru_cache(maxsize=8)
def _popcounts(N: int) -> np.ndarray:
    v = np.arange(1 << N, dtype=np.int64)
    # SWAR popcount, enough for N <= 20 bits
    v = v - ((v >> 1) & 0x5555555555555555)
    v = (v & 0x3333333333333333) + ((v >> 2) & 0x3333333333333333)
    v = (v + (v >> 4)) & 0x0F0F0F0F0F0F0F0F
    return ((v * 0x0101010101010101) >> 56).astype(np.int64)


@lru_cache(maxsize=8)
def _all_masks(N: int) -> np.ndarray:
    return np.arange(1 << N, dtype=np.int64)


@lru_cache(maxsize=8)
def _channel_masks_all(n: int) -> np.ndarray:
    """erased_channel_mask applied to every pattern of length 2^n at once."""
    from polarscale.decoders import _butterfly_masks

    p = _all_masks(1 << n).copy()
    for half, amask in _butterfly_masks(n):
        a = p & amask
        b = (p >> half) & amask
        p = (a | b) | ((a & b) << half)
    return p


def _weight_probs(N: int, epsilon: float) -> list[float]:
    return [epsilon**w * (1.0 - epsilon) ** (N - w) for w in range(N + 1)]


def _prob_from_weight_counts(counts: Sequence[int], N: int, epsilon: float) -> float:
    pw = _weight_probs(N, epsilon)
    return fsum(int(c) * pw[w] for w, c in enumerate(counts) if c)


def _prob_of_indicator(ind: np.ndarray, N: int, epsilon: float) -> float:
    counts = np.bincount(_popcounts(N)[ind], minlength=N + 1)
    return _prob_from_weight_counts(counts, N, epsilon)


# ---------------------------------------------------------------------------
# per-decoder weight-bucketed failure statistics, cached per code
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _sc_count_table(spec: PolarCodeSpec) -> np.ndarray:
    """cnt[w, c] = patterns of weight w with exactly c erased info channels."""
    N = spec.N
    info_mask = 0
    for i in spec.info:
        info_mask |= 1 << (i - 1)
    cm = _channel_masks_all(spec.n) & info_mask
    # popcount of cm per pattern (cm values are < 2^N, reuse the SWAR table)
    c = _popcounts(N)[cm]
    w = _popcounts(N)
    table = np.zeros((N + 1, spec.K + 1), dtype=np.int64)
    np.add.at(table, (w, c), 1)
    return table


@lru_cache(maxsize=64)
def _map_dim_table(spec: PolarCodeSpec) -> np.ndarray:
    """cnt[w, d] = patterns of weight w with MAP solution dimension d."""
    N = spec.N
    rows = generator_row_masks(spec)
    full = (1 << N) - 1
    table = [[0] * (spec.K + 1) for _ in range(N + 1)]
    bit_count = int.bit_count
    for mask in range(1 << N):
        keep = ~mask & full
        pivots: dict[int, int] = {}
        rank = 0
        for row in rows:
            r = row & keep
            while r:
                low = r & -r
                piv = pivots.get(low)
                if piv is None:
                    pivots[low] = r
                    rank += 1
                    break
                r ^= piv
        table[bit_count(mask)][spec.K - rank] += 1
    return np.array(table, dtype=np.int64)


@lru_cache(maxsize=64)
def _scl_peak_table(spec: PolarCodeSpec) -> np.ndarray:
    """cnt[w, p] = patterns of weight w with peak path dimension p."""
    N = spec.N
    table = [[0] * (spec.K + 1) for _ in range(N + 1)]
    bit_count = int.bit_count
    for mask in range(1 << N):
        prof = list_decode_profile(spec, mask)
        table[bit_count(mask)][prof.peak_dim] += 1
    return np.array(table, dtype=np.int64)


def exact_error_probability(
    spec: PolarCodeSpec,
    epsilon: float,
    decoder: Decoder,
    cap_n: int = DEFAULT_CAP_N,
) -> ExactProb:
    """Exact block-error probability of the chosen decoder at BEC(epsilon).

    map(L) fails iff the compatible-codeword count 2^d exceeds L; sc/genie(k)
    fails iff more than k info channels erase; scl(cap) fails iff the path
    count ever exceeds cap.
    """
    _check_cap(spec, cap_n)
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must be in (0,1)")
    N = spec.N
    if decoder.kind in ("sc", "genie"):
        table = _sc_count_table(spec)
        fail = table[:, decoder.param + 1 :].sum(axis=1)
    elif decoder.kind == "map":
        table = _map_dim_table(spec)
        fail = table[:, decoder.param.bit_length() :].sum(axis=1)
    elif decoder.kind == "scl":
        table = _scl_peak_table(spec)
        fail = table[:, decoder.param.bit_length() :].sum(axis=1)
    else:  # pragma: no cover - Decoder validates kinds
        raise ValueError(decoder.kind)
    value = _prob_from_weight_counts(fail, N, epsilon)
    return ExactProb(min(value, 1.0), "enumeration", 1 << N)


# ---------------------------------------------------------------------------
# codeword events E_u
# ---------------------------------------------------------------------------


def info_vector_mask(spec: PolarCodeSpec, u: Sequence[int]) -> int:
    """Packed support of uG: the positions where the codeword of u is 1."""
    if len(u) != spec.K:
        raise ValueError(f"info vector length {len(u)} != K {spec.K}")
    rows = generator_row_masks(spec)
    x = 0
    for bit, row in zip(u, rows):
        if bit & 1:
            x ^= row
    return x


def event_prob_Eu(
    spec: PolarCodeSpec,
    epsilon: float,
    u: Sequence[int],
    cap_n: int = DEFAULT_CAP_N,
) -> ExactProb:
    """P(E_u): the probability that u survives as a MAP solution.

    E_u occurs iff every position of I_u = supp(uG) is erased, so the closed
    form is eps^|I_u|.  The value returned is the full enumeration sum; the
    closed form is recomputed independently and a disagreement beyond 1e-12
    raises, since it could only mean a bug.
    """
    _check_cap(spec, cap_n)
    N = spec.N
    xu = info_vector_mask(spec, u)
    closed = epsilon ** xu.bit_count()
    ind = (_all_masks(N) & xu) == xu
    value = _prob_of_indicator(ind, N, epsilon)
    if abs(value - closed) > 1e-12:
        raise RuntimeError(
            f"enumeration {value!r} disagrees with closed form {closed!r}"
        )
    return ExactProb(value, "enumeration", 1 << N)


def _union_indicator(spec: PolarCodeSpec, vectors: Iterable[Sequence[int]]) -> np.ndarray:
    N = spec.N
    masks = _all_masks(N)
    ind = np.zeros(1 << N, dtype=bool)
    for u in vectors:
        xu = info_vector_mask(spec, u)
        ind |= (masks & xu) == xu
    return ind


def fkg_pair_check(
    spec: PolarCodeSpec,
    epsilon: float,
    U1: Iterable[Sequence[int]],
    U2: Iterable[Sequence[int]],
    cap_n: int = DEFAULT_CAP_N,
) -> FkgCheck:
    """Positive correlation of the two union events, computed exactly.

    Both unions are increasing in the erasure pattern, so
    P(union1 AND union2) >= P(union1) * P(union2) must hold; ``holds`` is
    evaluated with a 1e-12 slack.
    """
    _check_cap(spec, cap_n)
    N = spec.N
    ind1 = _union_indicator(spec, U1)
    ind2 = _union_indicator(spec, U2)
    lhs = _prob_of_indicator(ind1 & ind2, N, epsilon)
    rhs = _prob_of_indicator(ind1, N, epsilon) * _prob_of_indicator(ind2, N, epsilon)
    return FkgCheck(lhs, rhs, lhs >= rhs - 1e-12)


# ---------------------------------------------------------------------------
# correlation of erasure indicators
# ---------------------------------------------------------------------------


def correlation_matrix(
    spec: PolarCodeSpec, epsilon: float, cap_n: int = DEFAULT_CAP_N
) -> CorrelationReport:
    """Exact Pearson correlations of B_i = 1{channel i erases}, i unfrozen.

    Degenerate indicators (Z_i exactly 0 or 1) have undefined correlation;
    those entries are NaN, excluded from the sum, and warned about.  The
    reference bound is N^(3 - log2 3).
    """
    _check_cap(spec, cap_n)
    N = spec.N
    info = spec.info
    K = len(info)
    cm = _channel_masks_all(spec.n)
    cols = [((cm >> (i - 1)) & 1).astype(bool) for i in info]
    z = [_prob_of_indicator(c, N, epsilon) for c in cols]
    var = [zi * (1.0 - zi) for zi in z]
    rho = np.full((K, K), np.nan)
    degenerate = [v == 0.0 for v in var]
    if any(degenerate):
        warnings.warn(
            "degenerate erasure indicator(s): correlation undefined, "
            "excluded from the sum"
        )
    total = 0.0
    for a in range(K):
        if degenerate[a]:
            continue
        rho[a, a] = 1.0
        total += 1.0
        for b in range(a + 1, K):
            if degenerate[b]:
                continue
            both = _prob_of_indicator(cols[a] & cols[b], N, epsilon)
            r = (both - z[a] * z[b]) / math.sqrt(var[a] * var[b])
            rho[a, b] = rho[b, a] = r
            total += 2.0 * r
    return CorrelationReport(info, rho, total, float(N) ** (3 - math.log2(3)))


# ---------------------------------------------------------------------------
# divide-step machinery
# ---------------------------------------------------------------------------


def no_big_jumps_check(
    spec: PolarCodeSpec, epsilon: float, pe: float, cap_n: int = DEFAULT_CAP_N
) -> bool:
    """True iff every event is small: max P(E_u) < pe/8 and max info Z_i < pe/8.

    The first half follows from eps^d_min < pe/8 (the largest event is a
    minimum-weight codeword's); the second bounds single-channel erasures.
    Vacuously true at rate 0.
    """
    _check_cap(spec, cap_n)
    if spec.K == 0:
        return True
    from polarscale.polar import evolve_profile

    zmax = max(evolve_profile(epsilon, spec.n).z[i - 1] for i in spec.info)
    return epsilon ** min_distance(spec) < pe / 8.0 and zmax < pe / 8.0


def find_divide_subset(
    spec: PolarCodeSpec,
    epsilon: float,
    pe: float,
    cap_n: int = DEFAULT_CAP_N,
) -> list[tuple[int, ...]]:
    """Construct U1 with 3/8 * Pmap <= P(union of E_u over U1) <= 1/2 * Pmap.

    Preconditions (raising ConditionViolated otherwise): the exact MAP error
    Pmap = P_e^MAP(L=1) must exceed the floor ``pe``, and d_min must exceed
    ln(pe/8)/ln(eps) — which caps every single event below pe/8, so greedy
    accumulation of events in ascending-probability order cannot jump over
    the half-window and must land inside it.  InfeasibleSplit signals that
    the jump bound failed after all (an implementation or precondition bug).

    Returns the accumulated info vectors in insertion order.
    """
    _check_cap(spec, cap_n)
    if not 0.0 < pe < 1.0:
        raise ValueError("pe must be in (0,1)")
    pmap = exact_error_probability(spec, epsilon, Decoder("map", 1), cap_n).value
    if not pmap > pe:
        raise ConditionViolated(f"exact MAP error {pmap} must exceed pe {pe}")
    dmin = min_distance(spec)
    threshold = math.log(pe / 8.0) / math.log(epsilon)
    if not dmin > threshold:
        raise ConditionViolated(
            f"d_min {dmin} must exceed ln(pe/8)/ln(eps) = {threshold:.4f}"
        )
    N = spec.N
    masks = _all_masks(N)
    rows = generator_row_masks(spec)
    items = []
    for uval in range(1, 1 << spec.K):
        x = 0
        v = uval
        while v:
            low = v & -v
            x ^= rows[low.bit_length() - 1]
            v ^= low
        items.append((x.bit_count(), uval, x))
    # ascending P(E_u) = descending |I_u|; value order breaks ties
    items.sort(key=lambda t: (-t[0], t[1]))
    lo, hi = 0.375 * pmap, 0.5 * pmap
    covered = np.zeros(1 << N, dtype=bool)
    chosen: list[tuple[int, ...]] = []
    for _, uval, x in items:
        cand = covered | ((masks & x) == x)
        prob = _prob_of_indicator(cand, N, epsilon)
        if prob > hi:
            raise InfeasibleSplit(
                f"union jumped to {prob} past {hi} before reaching {lo}"
            )
        covered = cand
        chosen.append(tuple((uval >> j) & 1 for j in range(spec.K)))
        if prob >= lo:
            return chosen
    raise InfeasibleSplit("exhausted all events below the window floor")


# ---------------------------------------------------------------------------
# linear spans (list sizes beyond 1 as explicit events)
# ---------------------------------------------------------------------------


def two_dim_spans(K: int) -> list[tuple[int, int]]:
    """Canonical basis pairs (a, b) of all 2-dimensional subspaces of GF(2)^K.

    Each subspace {0, a, b, a^b} is listed once, with a < b < a^b.
    Supported for K <= 10; the count grows as (2^K-1)(2^K-2)/6.
    """
    if K > 10:
        raise ValueError("span enumeration supported for K <= 10 only")
    out = []
    for a in range(1, 1 << K):
        for b in range(a + 1, 1 << K):
            if a ^ b > b:
                out.append((a, b))
    return out


def span_event_prob(
    spec: PolarCodeSpec, epsilon: float, basis: Sequence[int]
) -> float:
    """P(every vector of the span of ``basis`` solves uG_y = 0).

    The span event requires every position touched by any nonzero combination
    to be erased; closed form eps^|union of I_u|.  Basis vectors are packed
    ints over the K info bits; dimension up to 2 is supported.
    """
    if len(basis) > 2:
        raise ValueError("span dimension capped at 2")
    rows = generator_row_masks(spec)

    def codeword(uval: int) -> int:
        x = 0
        while uval:
            low = uval & -uval
            x ^= rows[low.bit_length() - 1]
            uval ^= low
        return x

    union = 0
    seen = set()
    for m in range(1, 1 << len(basis)):
        uval = 0
        for j, b in enumerate(basis):
            if (m >> j) & 1:
                uval ^= b
        if uval and uval not in seen:
            seen.add(uval)
            union |= codeword(uval)
    return epsilon ** union.bit_count()


# ---------------------------------------------------------------------------
# whole-rate-range sweeps (shared enumeration for the theorem grids)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateSweepTables:
    """Per-rate failure statistics from a single pattern sweep.

    For each K in 0..N (information sets nested along the reliability
    order), ``map_dim[K][w][d]`` counts weight-w patterns with MAP solution
    dimension d, and ``erased_info[K][w][c]`` counts weight-w patterns with c
    erased info channels.  All rates come from one enumeration because the
    designed information sets are nested: rank updates are incremental in K.
    """

    profile: BhattacharyyaProfile
    order: tuple[int, ...]
    map_dim: np.ndarray
    erased_info: np.ndarray

    def spec_at(self, K: int) -> PolarCodeSpec:
        frozen = tuple(sorted(self.order[K:]))
        return PolarCodeSpec(self.profile.n, frozen, self.profile.epsilon)

    def map_error(self, K: int, L: int, epsilon: float | None = None) -> float:
        eps = self.profile.epsilon if epsilon is None else epsilon
        N = self.profile.N
        fail = self.map_dim[K][:, L.bit_length() :].sum(axis=1)
        return _prob_from_weight_counts(fail, N, eps)

    def sc_error(self, K: int, k: int, epsilon: float | None = None) -> float:
        eps = self.profile.epsilon if epsilon is None else epsilon
        N = self.profile.N
        fail = self.erased_info[K][:, k + 1 :].sum(axis=1)
        return _prob_from_weight_counts(fail, N, eps)


def rate_sweep_tables(profile: BhattacharyyaProfile, cap_n: int = 16) -> RateSweepTables:
    """Sweep all patterns once, extracting statistics for every rate K.

    Rows enter the elimination in reliability order, so after K insertions
    the rank (hence MAP dimension) matches the rate-K designed code; the
    erased-info counters share the same nesting.
    """
    n, N = profile.n, profile.N
    if N > cap_n:
        raise ValueError(
            f"N={N} needs 2^{N} patterns, over the sweep cap 2^{cap_n}"
        )
    order = reliability_order(profile)
    all_rows = generator_row_masks(PolarCodeSpec(n, (), None))
    ordered_rows = [all_rows[i - 1] for i in order]
    order0 = [i - 1 for i in order]
    full = (1 << N) - 1
    size = (N + 1) * (N + 1) * (N + 1)
    map_cnt = [0] * size
    sc_cnt = [0] * size
    stride_k = (N + 1) * (N + 1)
    bit_count = int.bit_count
    for mask in range(1 << N):
        w = bit_count(mask)
        keep = ~mask & full
        cm = erased_channel_mask(n, mask)
        base_w = w * (N + 1)
        pivots: dict[int, int] = {}
        rank = 0
        erased = 0
        for K1, (row, ch0) in enumerate(zip(ordered_rows, order0), start=1):
            r = row & keep
            while r:
                low = r & -r
                piv = pivots.get(low)
                if piv is None:
                    pivots[low] = r
                    rank += 1
                    break
                r ^= piv
            erased += (cm >> ch0) & 1
            base = K1 * stride_k + base_w
            map_cnt[base + (K1 - rank)] += 1
            sc_cnt[base + erased] += 1
        # K = 0: dimension 0, zero erased info bits, always
        map_cnt[base_w] += 1
        sc_cnt[base_w] += 1
    shape = (N + 1, N + 1, N + 1)
    return RateSweepTables(
        profile,
        order,
        np.array(map_cnt, dtype=np.int64).reshape(shape),
        np.array(sc_cnt, dtype=np.int64).reshape(shape),
    )
