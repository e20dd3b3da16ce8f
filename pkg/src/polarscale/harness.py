"""Monte Carlo estimation, rate search, the random-ensemble rank
experiment, and scaling sweeps.

Randomness is counter-based: trial t consumes exactly ``_words_per_trial``
raw outputs of a Philox stream keyed by the master seed, starting at offset
t * words_per_trial.  Results are therefore bit-identical however trials are
batched or partitioned, and different decoders evaluated on the same
(seed, trials) share per-trial erasure patterns — which is what makes the
per-trial dominance checks meaningful rather than merely statistical.

Each pattern position consumes one full 64-bit word (erased iff
word < round(eps * 2^64), so eps is quantized to 2^-64).  Wasteful, but it
keeps the counter arithmetic trivially alignable.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.random import Philox

from polarscale.bounds import ScalingFit, scaling_mu_fit
from polarscale.decoders import Decoder, list_decode_profile
from polarscale.polar import (
    PolarCodeSpec,
    evolve_profile,
    load_frozen_set,
    reliability_order,
    select_frozen,
)

WILSON_Z95 = 1.959963984540054
MC_MAX_N_LOG2 = 16
RANK_ROWS_CAP = 4096

# chunk sizing: keep raw uint64 buffers near 128 MB
_CHUNK_WORD_BUDGET = 1 << 24

CSV_FIELDS = [
    "n", "N", "rate", "epsilon", "decoder", "param",
    "trials", "failures", "pe", "ci_low", "ci_high", "seed",
]


def wilson_interval(
    failures: int, trials: int, z: float = WILSON_Z95
) -> tuple[float, float]:
    """Wilson score interval; well-behaved at zero failure counts."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    phat = failures / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z2 / (4 * trials * trials))
    half /= denom
    # at the extremes center-half is 0 or 1 exactly; don't let rounding
    # push the bound past the point estimate
    lo = 0.0 if failures == 0 else max(0.0, center - half)
    hi = 1.0 if failures == trials else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class EstimateWithCI:
    value: float
    trials: int
    failures: int
    ci_low: float
    ci_high: float
    seed: int

    def __post_init__(self):
        if not self.ci_low <= self.value <= self.ci_high:
            raise ValueError("estimate must lie inside its own interval")

    @property
    def width(self) -> float:
        return self.ci_high - self.ci_low


def _estimate(failures: int, trials: int, seed: int) -> EstimateWithCI:
    lo, hi = wilson_interval(failures, trials)
    return EstimateWithCI(failures / trials, trials, failures, lo, hi, seed)


@dataclass(frozen=True)
class RunConfig:
    """One Monte Carlo run: code, channel, decoder, budget, seed.

    The code is given either as a target rate (channels picked by the
    designed reliability order at ``epsilon``) or as a file of frozen
    indices written by save_frozen_set.
    """

    n: int
    epsilon: float
    decoder: str = "sc"
    param: int = 0
    rate: float | None = None
    frozen_file: str | None = None
    trials: int = 10_000
    seed: int = 1
    out: str | None = None

    def __post_init__(self):
        if self.n < 1 or self.n > MC_MAX_N_LOG2:
            raise ValueError(f"n must be in 1..{MC_MAX_N_LOG2}")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must be in [0,1)")
        if (self.rate is None) == (self.frozen_file is None):
            raise ValueError("give exactly one of rate / frozen_file")
        if self.rate is not None and not 0.0 <= self.rate <= 1.0:
            raise ValueError("rate must be in [0,1]")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must fit in 64 bits")
        Decoder(self.decoder, self.param)  # validates kind/param

    def decoder_obj(self) -> Decoder:
        return Decoder(self.decoder, self.param)

    def code_spec(self) -> PolarCodeSpec:
        if self.frozen_file is not None:
            return load_frozen_set(self.frozen_file, self.n)
        design_eps = self.epsilon if self.epsilon > 0.0 else 0.5
        profile = evolve_profile(design_eps, self.n)
        return select_frozen(profile, round(self.rate * (1 << self.n)))

    def to_json(self) -> str:
        return json.dumps(
            {k: v for k, v in self.__dict__.items() if v is not None}, indent=2
        )

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls(**json.load(fh))


# ---------------------------------------------------------------------------
# counter-based pattern stream
# ---------------------------------------------------------------------------


def _words_per_trial(items: int) -> int:
    """Raw words one trial consumes; multiple of 4 so streams stay alignable
    (Philox advance() moves the counter in four-word steps)."""
    return max(4, (items + 3) & ~3)


def _raw_words(seed: int, start_trial: int, n_trials: int, wpt: int) -> np.ndarray:
    bg = Philox(key=seed)
    bg.advance(start_trial * wpt // 4)
    return bg.random_raw(n_trials * wpt).reshape(n_trials, wpt)


def _erasure_threshold(epsilon: float) -> np.uint64:
    t = round(epsilon * 2.0**64)
    return np.uint64(min(max(t, 0), (1 << 64) - 1))


def _chunk_sizes(trials: int, wpt: int) -> list[tuple[int, int]]:
    """(start, count) chunks with count a multiple of 64 where possible."""
    per = max(64, (_CHUNK_WORD_BUDGET // wpt) & ~63)
    out = []
    start = 0
    while start < trials:
        cnt = min(per, trials - start)
        out.append((start, cnt))
        start += cnt
    return out


def _packed_channel_erasures(bits: np.ndarray) -> np.ndarray:
    """(B, N) pattern bools -> (N, ceil(B/64)) uint64 of post-transform
    channel erasures, one trial per bit position."""
    from polarscale.decoders import erased_channel_words

    B = bits.shape[0]
    cols = np.packbits(bits.T, axis=1, bitorder="little")
    pad = (-cols.shape[1]) % 8
    if pad:
        cols = np.pad(cols, ((0, 0), (0, pad)))
    words = np.ascontiguousarray(cols).view(np.uint64)
    return erased_channel_words(words)


def _pattern_ints(bits: np.ndarray) -> list[int]:
    packed = np.packbits(bits, axis=1, bitorder="little")
    return [int.from_bytes(row.tobytes(), "little") for row in packed]


# ---------------------------------------------------------------------------
# per-trial statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialProfiles:
    """Per-trial decoding statistics on one shared pattern stream.

    erased_info[t] counts erased info channels (what a genie budget must
    cover); peak_dim[t] and final_dim[t] are log2 of the worst-case and
    surviving list sizes.  All decoder failure counts derive from these, so
    any cross-decoder comparison is exact per trial by construction.
    """

    spec: PolarCodeSpec
    epsilon: float
    seed: int
    erased_info: np.ndarray
    peak_dim: np.ndarray
    final_dim: np.ndarray

    @property
    def trials(self) -> int:
        return len(self.erased_info)

    def failures_sc(self, k: int = 0) -> int:
        return int(np.count_nonzero(self.erased_info > k))

    def failures_scl(self, cap: int) -> int:
        return int(np.count_nonzero(self.peak_dim >= cap.bit_length()))

    def failures_map(self, list_size: int) -> int:
        return int(np.count_nonzero(self.final_dim >= list_size.bit_length()))


def trial_erased_info_counts(
    spec: PolarCodeSpec, epsilon: float, trials: int, seed: int
) -> np.ndarray:
    """Number of erased info channels per trial (vectorized, no tracker)."""
    N = 1 << spec.n
    wpt = _words_per_trial(N)
    thr = _erasure_threshold(epsilon)
    info_idx = np.array([i - 1 for i in spec.info], dtype=np.int64)
    out = np.zeros(trials, dtype=np.uint16)
    for start, cnt in _chunk_sizes(trials, wpt):
        raw = _raw_words(seed, start, cnt, wpt)
        bits = raw[:, :N] < thr
        if len(info_idx) == 0:
            continue
        ech = _packed_channel_erasures(bits)
        info_bits = np.unpackbits(
            ech[info_idx].view(np.uint8), axis=1, bitorder="little"
        )[:, :cnt]
        out[start : start + cnt] = info_bits.sum(axis=0, dtype=np.uint16)
    return out


def trial_decode_profiles(
    spec: PolarCodeSpec, epsilon: float, trials: int, seed: int
) -> TrialProfiles:
    """Full per-trial statistics; the symbolic path tracker runs only on
    trials with at least one erased info channel (the others decode
    uniquely, every statistic 0)."""
    N = 1 << spec.n
    wpt = _words_per_trial(N)
    thr = _erasure_threshold(epsilon)
    info_idx = np.array([i - 1 for i in spec.info], dtype=np.int64)
    erased = np.zeros(trials, dtype=np.uint16)
    peak = np.zeros(trials, dtype=np.uint8)
    final = np.zeros(trials, dtype=np.uint8)
    for start, cnt in _chunk_sizes(trials, wpt):
        raw = _raw_words(seed, start, cnt, wpt)
        bits = raw[:, :N] < thr
        if len(info_idx) == 0:
            continue
        ech = _packed_channel_erasures(bits)
        info_bits = np.unpackbits(
            ech[info_idx].view(np.uint8), axis=1, bitorder="little"
        )[:, :cnt]
        counts = info_bits.sum(axis=0, dtype=np.uint16)
        erased[start : start + cnt] = counts
        events = np.flatnonzero(counts > 0)
        if len(events):
            masks = _pattern_ints(bits[events])
            for local, mask in zip(events, masks):
                prof = list_decode_profile(spec, mask)
                peak[start + local] = prof.peak_dim
                final[start + local] = prof.final_dim
    return TrialProfiles(spec, epsilon, seed, erased, peak, final)


def mc_estimate(config: RunConfig) -> EstimateWithCI:
    """Monte Carlo block-error estimate with a 95% Wilson interval.

    sc/genie failures come from the vectorized erasure-count path; scl/map
    additionally run the path tracker on event trials.  Bit-reproducible
    from (config, seed); see the module docstring.
    """
    spec = config.code_spec()
    dec = config.decoder_obj()
    if dec.kind in ("sc", "genie"):
        counts = trial_erased_info_counts(spec, config.epsilon, config.trials, config.seed)
        failures = int(np.count_nonzero(counts > dec.param))
    else:
        profiles = trial_decode_profiles(spec, config.epsilon, config.trials, config.seed)
        if dec.kind == "scl":
            failures = profiles.failures_scl(dec.param)
        else:
            failures = profiles.failures_map(dec.param)
    est = _estimate(failures, config.trials, config.seed)
    if config.out:
        write_estimate_csv(config.out, config, est)
    return est


def write_estimate_csv(path, config: RunConfig, est: EstimateWithCI) -> None:
    spec = config.code_spec()
    row = {
        "n": config.n,
        "N": 1 << config.n,
        "rate": spec.K / (1 << config.n),
        "epsilon": config.epsilon,
        "decoder": config.decoder,
        "param": config.param,
        "trials": est.trials,
        "failures": est.failures,
        "pe": est.value,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "seed": est.seed,
    }
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        writer.writerow(row)


# ---------------------------------------------------------------------------
# rate search and scaling sweep
# ---------------------------------------------------------------------------


def _erased_rank_order_stat(
    n: int, epsilon: float, trials: int, seed: int, order: Sequence[int], k: int
) -> np.ndarray:
    """Per trial, the (k+1)-th smallest reliability rank among erased
    channels (N if fewer than k+1 are erased).

    A rate-K design fails under a k-genie exactly when more than k of its
    info channels order[:K] erase, i.e. when this statistic is < K — so one
    pattern stream yields the whole failure-vs-K curve at once.
    """
    N = 1 << n
    wpt = _words_per_trial(N)
    thr = _erasure_threshold(epsilon)
    rank_of_channel = np.empty(N, dtype=np.int32)
    for r, ch in enumerate(order):
        rank_of_channel[ch - 1] = r
    out = np.full(trials, N, dtype=np.int32)
    for start, cnt in _chunk_sizes(trials, wpt):
        raw = _raw_words(seed, start, cnt, wpt)
        bits = raw[:, :N] < thr
        ech = _packed_channel_erasures(bits)
        chan_bits = np.unpackbits(ech.view(np.uint8), axis=1, bitorder="little")[:, :cnt]
        ranked = np.where(chan_bits.astype(bool), rank_of_channel[:, None], N)
        if k == 0:
            out[start : start + cnt] = ranked.min(axis=0)
        else:
            out[start : start + cnt] = np.partition(ranked, k, axis=0)[k]
    return out


def rate_search_at_pe(
    n: int,
    epsilon: float,
    decoder: Decoder,
    target_pe: float,
    trials: int,
    seed: int,
) -> float:
    """Largest designed rate whose estimated error is <= target_pe.

    Failure counts are monotone in K on shared patterns (designs are nested
    along the reliability order), so the whole failure curve comes from one
    order-statistic pass; the returned K/N is the value rate bisection over
    the same common random numbers would converge to.  Resolution is one
    channel, 1/N.  Only sc/genie decoders are supported here — scl/map
    would need a tracker pass per candidate rate.
    """
    if decoder.kind not in ("sc", "genie"):
        raise ValueError("rate search supports sc/genie decoders only")
    if not 0.0 < target_pe:
        raise ValueError("target_pe must be positive")
    order = reliability_order(evolve_profile(epsilon if epsilon > 0 else 0.5, n))
    stat = _erased_rank_order_stat(n, epsilon, trials, seed, order, decoder.param)
    N = 1 << n
    hist = np.bincount(np.minimum(stat, N), minlength=N + 1)
    fails_below = np.cumsum(hist)  # fails_below[K-1] = failures at rate K/N
    budget = target_pe * trials
    feasible = np.flatnonzero(fails_below[:N] <= budget)
    if len(feasible) == 0:
        raise RuntimeError(
            f"target {target_pe} unreachable even at rate 1/{N} "
            f"({int(fails_below[0])}/{trials} failures)"
        )
    return (int(feasible[-1]) + 1) / N


def run_scaling_sweep(
    ns: Sequence[int],
    epsilon: float,
    target_pe: float,
    trials: int,
    seed: int,
    decoder: Decoder = Decoder("sc", 0),
    out_csv=None,
) -> ScalingFit:
    """Rate search at each blocklength, then fit the scaling exponent.

    Per-point seeds are seed + n (distinct, deterministic).  The optional
    CSV gets one row per point: N, rate, capacity gap, and the collapse
    coordinate z = N^(1/mu) * gap under the fitted mu.
    """
    if len(ns) < 3:
        raise ValueError("need at least 3 block lengths")
    if sorted(set(ns)) != list(ns):
        raise ValueError("block lengths must be strictly increasing")
    capacity = 1.0 - epsilon
    samples = []
    for n in ns:
        rate = rate_search_at_pe(n, epsilon, decoder, target_pe, trials, seed + n)
        samples.append((1 << n, rate))
    fit = scaling_mu_fit(samples, capacity, target_pe)
    if out_csv is not None:
        with open(out_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["N", "rate", "gap", "z"])
            for N, rate in samples:
                gap = capacity - rate
                writer.writerow([N, rate, repr(gap), repr(N ** (1 / fit.mu) * gap)])
    return fit


# ---------------------------------------------------------------------------
# random-ensemble rank experiment
# ---------------------------------------------------------------------------


def _rank_kernel_factory():
    import numba

    @numba.njit(cache=True, nogil=True)
    def kernel(raw, N, NR, WR, thr, ranks):  # pragma: no cover - jitted
        B = raw.shape[0]
        basis = np.zeros((N, WR), dtype=np.uint64)
        occupied = np.zeros(N, dtype=np.uint8)
        used = np.empty(N, dtype=np.int64)
        row = np.empty(WR, dtype=np.uint64)
        for t in range(B):
            E = 0
            for j in range(N):
                if raw[t, j] < thr:
                    E += 1
            M = N - E
            full_words = M >> 6
            rem = M & 63
            n_used = 0
            rank = 0
            for r in range(NR):
                base = N + r * WR
                nz = False
                for w in range(WR):
                    v = raw[t, base + w]
                    if w > full_words:
                        v = np.uint64(0)
                    elif w == full_words:
                        if rem == 0:
                            v = np.uint64(0)
                        else:
                            v &= (np.uint64(1) << np.uint64(rem)) - np.uint64(1)
                    row[w] = v
                    if v != np.uint64(0):
                        nz = True
                while nz:
                    pivot = -1
                    for w in range(WR):
                        if row[w] != np.uint64(0):
                            v = row[w]
                            tz = 0
                            while (v >> np.uint64(tz)) & np.uint64(1) == np.uint64(0):
                                tz += 1
                            pivot = (w << 6) + tz
                            break
                    if pivot < 0:
                        break
                    if occupied[pivot] == 0:
                        for w in range(WR):
                            basis[pivot, w] = row[w]
                        occupied[pivot] = 1
                        used[n_used] = pivot
                        n_used += 1
                        rank += 1
                        break
                    nz = False
                    for w in range(WR):
                        row[w] ^= basis[pivot, w]
                        if row[w] != np.uint64(0):
                            nz = True
            ranks[t] = rank
            for u in range(n_used):
                occupied[used[u]] = 0
        return ranks

    return kernel


_rank_kernel = None


def _trial_ranks(
    n_block: int, rate: float, epsilon: float, trials: int, seed: int
) -> tuple[np.ndarray, int]:
    """GF(2) ranks of per-trial random NR x (N - E) bit matrices."""
    global _rank_kernel
    N = n_block
    NR = round(rate * N)
    if NR > RANK_ROWS_CAP:
        raise ValueError(f"NR={NR} exceeds cap {RANK_ROWS_CAP}")
    if N & (N - 1):
        raise ValueError("n_block must be a power of two")
    if _rank_kernel is None:
        _rank_kernel = _rank_kernel_factory()
    WR = (N + 63) // 64
    wpt = _words_per_trial(N + NR * WR)
    thr = _erasure_threshold(epsilon)
    ranks = np.empty(trials, dtype=np.int64)
    for start, cnt in _chunk_sizes(trials, wpt):
        raw = _raw_words(seed, start, cnt, wpt)
        _rank_kernel(raw, N, NR, WR, thr, ranks[start : start + cnt])
    return ranks, NR


def random_rank_joint(
    n_block: int,
    rate: float,
    epsilon: float,
    list_sizes: Sequence[int],
    trials: int,
    seed: int,
) -> dict[int, EstimateWithCI]:
    """One rank pass serving several list sizes.

    A trial fails for list size L iff its matrix rank is below
    NR - log2(L); the rank itself does not depend on L.
    """
    for L in list_sizes:
        if L < 1 or L & (L - 1):
            raise ValueError("list sizes must be powers of two")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ranks, NR = _trial_ranks(n_block, rate, epsilon, trials, seed)
    out = {}
    for L in list_sizes:
        failures = int(np.count_nonzero(ranks < NR - int(math.log2(L))))
        out[L] = _estimate(failures, trials, seed)
    return out


def random_rank_experiment(
    n_block: int,
    rate: float,
    epsilon: float,
    list_size: int,
    trials: int,
    seed: int,
) -> EstimateWithCI:
    """Error frequency of the random linear ensemble under list decoding.

    Per trial: E ~ Binomial(N, eps) positions erase, the remaining N - E
    columns of a fresh uniform NR x N generator stay; failure iff that
    matrix has GF(2) rank < NR - log2(L)."""
    return random_rank_joint(n_block, rate, epsilon, [list_size], trials, seed)[
        list_size
    ]
