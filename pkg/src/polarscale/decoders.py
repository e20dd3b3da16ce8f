"""Per-erasure-pattern decoding outcomes over the BEC.

All-zero codeword transmission is assumed throughout (channel symmetry makes
this lossless): an observed position carries the known value 0, an erased
position carries nothing.  Under that convention every quantity of interest —
which synthetic channels erase, how many list paths survive, the dimension of
the MAP solution space — is a deterministic function of the erasure pattern
alone, never of transmitted values.

Three engines coexist:

* an integer butterfly (`erased_channel_mask`) giving the set of erased
  synthetic channels for one pattern in O(log N) word operations;
* a bit-sliced numpy butterfly (`erased_channel_words`) doing the same for 64
  patterns per machine word, used by the Monte Carlo harness;
* a symbolic successive decoder (`list_decode_profile`) that tracks the list
  decoder's path set as a GF(2) affine subspace — free variables for erased
  information bits, a constraint basis from observed frozen bits — yielding
  the exact peak and final path counts without enumerating paths.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from polarscale import gf2
from polarscale.polar import PolarCodeSpec, generator_row_masks


@dataclass(frozen=True)
class ErasurePattern:
    """A BEC realisation: bit i = 1 means position i+1 was erased."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be 0/1")

    @classmethod
    def from_mask(cls, mask: int, N: int) -> "ErasurePattern":
        return cls(tuple((mask >> j) & 1 for j in range(N)))

    @property
    def mask(self) -> int:
        return sum(1 << j for j, b in enumerate(self.bits) if b)

    @property
    def weight(self) -> int:
        return sum(self.bits)

    def __len__(self) -> int:
        return len(self.bits)


@dataclass(frozen=True)
class Decoder:
    """Decoder selector: kind in {sc, genie, scl, map} plus its parameter.

    ``sc`` and ``genie`` share semantics (k allowed helps; sc(0) is plain SC);
    ``scl`` takes the path cap; ``map`` takes the list size.
    """

    kind: str
    param: int

    def __post_init__(self):
        if self.kind not in ("sc", "genie", "scl", "map"):
            raise ValueError(f"unknown decoder kind {self.kind!r}")
        if self.kind in ("sc", "genie") and self.param < 0:
            raise ValueError("k must be >= 0")
        if self.kind in ("scl", "map") and self.param < 1:
            raise ValueError("list size / cap must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "Decoder":
        """Parse 'kind:param' (param defaults to 0 for sc/genie, 1 otherwise)."""
        kind, _, param = text.partition(":")
        if param:
            return cls(kind, int(param))
        return cls(kind, 0 if kind in ("sc", "genie") else 1)


@dataclass(frozen=True)
class DecodeOutcome:
    """Uniform result record; exactly one detail field is set per kind."""

    success: bool
    erased_info: tuple[int, ...] | None = None
    peak_paths: int | None = None
    solution_dim: int | None = None


def _pattern_mask(y, N: int) -> int:
    """Accept ErasurePattern, packed int, or a 0/1 sequence of length N."""
    if isinstance(y, ErasurePattern):
        if len(y) != N:
            raise ValueError(f"pattern length {len(y)} != N {N}")
        return y.mask
    if isinstance(y, int):
        if not 0 <= y < (1 << N):
            raise ValueError("pattern mask out of range")
        return y
    bits = tuple(y)
    if len(bits) != N:
        raise ValueError(f"pattern length {len(bits)} != N {N}")
    return sum(1 << j for j, b in enumerate(bits) if b)


@lru_cache(maxsize=None)
def _butterfly_masks(n: int) -> tuple[tuple[int, int], ...]:
    # Per level, (half, mask of the low half of every block), outermost first.
    out = []
    half = 1 << (n - 1) if n else 0
    while half:
        block = (1 << half) - 1
        mask = 0
        step = 2 * half
        for off in range(0, 1 << n, step):
            mask |= block << off
        out.append((half, mask))
        half >>= 1
    return tuple(out)


def erased_channel_mask(n: int, pattern_mask: int) -> int:
    """Bitmask of synthetic channels that erase under the given pattern.

    Bit i-1 of the result corresponds to channel i in the natural order.  At
    each butterfly level a pair of sub-channel erasure flags (a, b) combines
    to (a|b) for the minus half and (a&b) for the plus half, the erasure-
    domain image of the check/variable operations of successive decoding.
    """
    p = pattern_mask
    for half, amask in _butterfly_masks(n):
        a = p & amask
        b = (p >> half) & amask
        p = (a | b) | ((a & b) << half)
    return p


def erased_channel_words(E: np.ndarray) -> np.ndarray:
    """Bit-sliced butterfly: E is (N, W) uint64, one trial per bit. In place."""
    size = E.shape[0]
    while size > 1:
        half = size // 2
        blocks = E.reshape(-1, size, E.shape[1])
        a = blocks[:, :half, :].copy()
        blocks[:, :half, :] = a | blocks[:, half:, :]
        blocks[:, half:, :] &= a
        size = half
    return E


@lru_cache(maxsize=None)
def _info_mask(spec: PolarCodeSpec) -> int:
    mask = 0
    for i in spec.info:
        mask |= 1 << (i - 1)
    return mask


def sc_erasure_set(spec: PolarCodeSpec, y) -> frozenset[int]:
    """Information channels the (genie-aided) SC decoder cannot determine.

    Genie semantics: every earlier bit is fed back as correct, so membership
    of channel i depends on the pattern only.  Plain SC fails iff the set is
    nonempty; the genie-aided decoder with k helps fails iff |set| > k.
    """
    mask = _pattern_mask(y, spec.N)
    erased = erased_channel_mask(spec.n, mask) & _info_mask(spec)
    out = set()
    while erased:
        low = erased & -erased
        out.add(low.bit_length())
        erased ^= low
    return frozenset(out)


def genie_sc_success(spec: PolarCodeSpec, y, k: int) -> bool:
    """True iff SC needs at most k helps on this pattern."""
    if k < 0:
        raise ValueError("k must be >= 0")
    mask = _pattern_mask(y, spec.N)
    erased = erased_channel_mask(spec.n, mask) & _info_mask(spec)
    return erased.bit_count() <= k


@dataclass(frozen=True)
class ListDecodeProfile:
    """Path-count trajectory summary of the symbolic list decoder.

    free_vars  -- number of path doublings (= erased information channels)
    peak_dim   -- high-water log2 of the stored path count
    final_dim  -- log2 of the surviving path count, which equals the MAP
                  solution-space dimension (the final list is exactly the
                  set of codewords compatible with the pattern)
    """

    free_vars: int
    peak_dim: int
    final_dim: int


@lru_cache(maxsize=None)
def _frozen_flags(spec: PolarCodeSpec) -> tuple[tuple[bool, ...], tuple[int, ...]]:
    # Per-position frozen flag and prefix counts of info positions.
    fr = set(spec.frozen)
    flags = tuple((i + 1) in fr for i in range(spec.N))
    prefix = [0]
    for f in flags:
        prefix.append(prefix[-1] + (0 if f else 1))
    return flags, tuple(prefix)


def list_decode_profile(spec: PolarCodeSpec, y) -> ListDecodeProfile:
    """Run the symbolic list decoder over one pattern.

    The path set after each bit is an affine subspace: a free GF(2) variable
    per erased information bit, and one homogeneous constraint per observed
    frozen bit whose value is determined by earlier free bits.  The stored
    path count is 2^(free - rank); doubling happens at erased info bits,
    pruning at observed frozen bits.  Expressions are int bitmasks over the
    free variables (the known constant part is always 0 here).
    """
    mask = _pattern_mask(y, spec.N)
    frozen, info_prefix = _frozen_flags(spec)
    basis: dict[int, int] = {}
    state = [0, 0, 0]  # free, rank, peak

    def rec(chan: list, base: int) -> list:
        m = len(chan)
        if m == 1:
            e = chan[0]
            if frozen[base]:
                if e:  # observed frozen bit: expression must equal 0
                    while e:
                        low = e & -e
                        piv = basis.get(low)
                        if piv is None:
                            basis[low] = e
                            state[1] += 1
                            break
                        e ^= piv
                return [0]
            if e is None:  # erased info bit: the path set doubles
                v = 1 << state[0]
                state[0] += 1
                d = state[0] - state[1]
                if d > state[2]:
                    state[2] = d
                return [v]
            return [e]
        # whole block already known to decode to zero: nothing can change
        if all(type(c) is int and c == 0 for c in chan):
            return [0] * m
        # fully erased all-frozen block: no info in, zeros out
        if (
            info_prefix[base + m] == info_prefix[base]
            and all(c is None for c in chan)
        ):
            return [0] * m
        h = m // 2
        a = chan[:h]
        b = chan[h:]
        minus = [
            None if (x is None or z is None) else x ^ z for x, z in zip(a, b)
        ]
        enc_a = rec(minus, base)
        plus = [
            z if z is not None else (None if x is None else x ^ ca)
            for x, z, ca in zip(a, b, enc_a)
        ]
        enc_b = rec(plus, base + h)
        return [x ^ z for x, z in zip(enc_a, enc_b)] + enc_b

    chan0 = [None if (mask >> j) & 1 else 0 for j in range(spec.N)]
    rec(chan0, 0)
    return ListDecodeProfile(state[0], state[2], state[0] - state[1])


def scl_peak_paths(spec: PolarCodeSpec, y, cap: int) -> tuple[bool, int]:
    """(success, peak path count) for the list decoder with the given cap.

    The decoder fails as soon as it would have to store more than ``cap``
    paths; the peak reported is the exact high-water count either way.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    prof = list_decode_profile(spec, y)
    peak = 1 << prof.peak_dim
    return peak <= cap, peak


def map_solution_dim(spec: PolarCodeSpec, y) -> int:
    """Dimension d of {u : u G_y = 0}; list-L MAP succeeds iff 2^d <= L.

    Computed from the generator rank restricted to observed columns; the
    symbolic decoder's final dimension must (and does, see tests) agree.
    """
    mask = _pattern_mask(y, spec.N)
    keep = ~mask & ((1 << spec.N) - 1)
    rows = generator_row_masks(spec)
    return spec.K - gf2.rank_of_rows(r & keep for r in rows)


def decode(spec: PolarCodeSpec, y, decoder: Decoder) -> DecodeOutcome:
    """Dispatch one pattern through the selected decoder."""
    if decoder.kind in ("sc", "genie"):
        erased = tuple(sorted(sc_erasure_set(spec, y)))
        return DecodeOutcome(len(erased) <= decoder.param, erased_info=erased)
    if decoder.kind == "scl":
        ok, peak = scl_peak_paths(spec, y, decoder.param)
        return DecodeOutcome(ok, peak_paths=peak)
    dim = map_solution_dim(spec, y)
    return DecodeOutcome((1 << dim) <= decoder.param, solution_dim=dim)
