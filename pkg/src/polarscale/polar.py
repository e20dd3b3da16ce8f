"""Polar-code construction over the BEC.

Bhattacharyya profile evolution, frozen-set selection, generator rows,
minimum distance, and the min/max envelopes for synthetic-channel
reliabilities.

Index convention
----------------
Synthetic channels are numbered 1..N by the natural per-level recursion:
each level maps channel value Z to the adjacent pair (f0(Z), f1(Z)) with
f0(x) = 1-(1-x)^2 and f1(x) = x^2, so the profile at level l+1 is the
interleave [f0(Z_1), f1(Z_1), f0(Z_2), f1(Z_2), ...] of level l.  The
construction, the decoders, and the exact-enumeration engine all share this
labelling.  A bit-reversed labelling of the same Z multiset also circulates
in the literature; only the channel labels differ — frozen-set content,
rates, distances and every probability in this package are unaffected.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from polarscale import gf2

#: Arikan's 2x2 kernel [[1,0],[1,1]] in packed form.
KERNEL = gf2.BitMatrix(2, 2, (1, 3))


@dataclass(frozen=True)
class PolarCodeSpec:
    """A polar code: block-size exponent, frozen set, and design erasure rate.

    ``frozen`` holds 1-based synthetic-channel indices in the natural order
    (see module docstring).  ``design_epsilon`` records the BEC parameter the
    frozen set was selected for; it is informational and may be None for
    hand-built codes.
    """

    n: int
    frozen: tuple[int, ...]
    design_epsilon: float | None = None

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if list(self.frozen) != sorted(set(self.frozen)):
            raise ValueError("frozen set must be strictly increasing")
        if self.frozen and (self.frozen[0] < 1 or self.frozen[-1] > self.N):
            raise ValueError("frozen indices must lie in 1..N")

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def K(self) -> int:
        return self.N - len(self.frozen)

    @property
    def rate(self) -> float:
        return self.K / self.N

    @property
    def info(self) -> tuple[int, ...]:
        """Unfrozen (information) channel indices, increasing, 1-based."""
        fr = set(self.frozen)
        return tuple(i for i in range(1, self.N + 1) if i not in fr)


@dataclass(frozen=True)
class BhattacharyyaProfile:
    """Synthetic-channel Bhattacharyya parameters for BEC(epsilon) at size 2^n."""

    epsilon: float
    n: int
    z: tuple[float, ...]

    def __post_init__(self):
        if len(self.z) != 1 << self.n:
            raise ValueError("profile length must be 2^n")

    @property
    def N(self) -> int:
        return 1 << self.n


@dataclass(frozen=True)
class ZInterval:
    """Guaranteed enclosure [lo, hi] of a synthetic Bhattacharyya parameter."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 <= self.lo <= self.hi <= 1.0):
            raise ValueError("need 0 <= lo <= hi <= 1")


def evolve_profile(epsilon: float, n: int) -> BhattacharyyaProfile:
    """Evolve the Bhattacharyya profile of BEC(epsilon) through n levels."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0,1]")
    if n < 0:
        raise ValueError("n must be >= 0")
    z = np.array([epsilon], dtype=np.float64)
    for _ in range(n):
        nxt = np.empty(2 * z.size, dtype=np.float64)
        nxt[0::2] = 1.0 - (1.0 - z) ** 2
        nxt[1::2] = z * z
        z = nxt
    return BhattacharyyaProfile(epsilon, n, tuple(z.tolist()))


def evolve_profile_exact(epsilon: Fraction, n: int) -> list[Fraction]:
    """Rational-arithmetic profile, the rounding oracle for small n (<= 10)."""
    z = [Fraction(epsilon)]
    for _ in range(n):
        nxt: list[Fraction] = []
        for x in z:
            nxt.append(1 - (1 - x) ** 2)
            nxt.append(x * x)
        z = nxt
    return z


def select_frozen(profile: BhattacharyyaProfile, K: int) -> PolarCodeSpec:
    """Freeze the N-K least reliable channels (largest Z).

    Ties in Z are broken by freezing the smaller index; this makes the
    selection deterministic and, for K' < K, the frozen sets nested.
    """
    N = profile.N
    if not 0 <= K <= N:
        raise ValueError("K must be in 0..N")
    order = sorted(range(1, N + 1), key=lambda i: (-profile.z[i - 1], i))
    frozen = tuple(sorted(order[: N - K]))
    return PolarCodeSpec(profile.n, frozen, profile.epsilon)


def reliability_order(profile: BhattacharyyaProfile) -> tuple[int, ...]:
    """Channel indices from most to least reliable.

    The first K entries are exactly the information set select_frozen keeps
    at rate K/N (same tie-break rule, reversed).
    """
    N = profile.N
    return tuple(sorted(range(1, N + 1), key=lambda i: (profile.z[i - 1], -i)))


def generator_matrix(spec: PolarCodeSpec) -> gf2.BitMatrix:
    """K x N generator: the unfrozen rows of the n-th Kronecker power of KERNEL."""
    full = gf2.kronecker_power(KERNEL, spec.n)
    rows = tuple(full.data[i - 1] for i in spec.info)
    return gf2.BitMatrix(spec.K, spec.N, rows)


def generator_row_masks(spec: PolarCodeSpec) -> list[int]:
    """Packed unfrozen rows without materialising the full Kronecker power.

    Row i of the n-th Kronecker power has ones exactly on the columns j with
    supp(j-1) ⊆ supp(i-1), so each row is enumerated as the submasks of i-1.
    """
    rows = []
    for i in spec.info:
        m = i - 1
        row = 0
        s = m
        while True:
            row |= 1 << s
            if s == 0:
                break
            s = (s - 1) & m
        rows.append(row)
    return rows


def row_weight(i: int, n: int) -> int:
    """Hamming weight of row i (1-based) of the n-th Kronecker power: 2^popcount(i-1)."""
    if not 1 <= i <= 1 << n:
        raise ValueError("index out of range")
    return 1 << (i - 1).bit_count()


def min_distance(spec: PolarCodeSpec) -> int:
    """Minimum distance: the least row weight among unfrozen rows."""
    if spec.K == 0:
        raise ValueError("distance undefined for a rate-0 code")
    return 1 << min((i - 1).bit_count() for i in spec.info)


def z_extremes(z: float, n: int, m: int) -> tuple[float, float]:
    """Min/max of Z over all synthetic indices whose bit-path has exactly m ones.

    zmin takes the m squaring steps first, zmax takes them last:
    zmin = 1-(1-z^{2^m})^{2^{n-m}},  zmax = (1-(1-z)^{2^{n-m}})^{2^m}.
    """
    if not 0 <= m <= n:
        raise ValueError("need 0 <= m <= n")
    zmin = 1.0 - (1.0 - z ** (1 << m)) ** (1 << (n - m))
    zmax = (1.0 - (1.0 - z) ** (1 << (n - m))) ** (1 << m)
    return zmin, zmax


def _f0_lower(x: float) -> float:
    # Lower envelope of the minus transform over BMS channels.
    return math.sqrt(max(0.0, 1.0 - (1.0 - x * x) ** 2))


def _f0_upper(x: float) -> float:
    # Upper envelope; coincides with the exact BEC minus transform.
    return 1.0 - (1.0 - x) ** 2


def z_interval_evolve(z0, bitpath: Sequence[int]) -> ZInterval:
    """Propagate guaranteed Z bounds for a BMS channel along a transform path.

    Each 1-bit applies the exact squaring map to both endpoints; each 0-bit
    applies the lower/upper envelopes of the minus transform.  ``z0`` may be
    a float or an existing ZInterval.  Bits are applied first-to-last.
    """
    if isinstance(z0, ZInterval):
        lo, hi = z0.lo, z0.hi
    else:
        lo = hi = float(z0)
    for b in bitpath:
        if b:
            lo, hi = lo * lo, hi * hi
        else:
            lo, hi = _f0_lower(lo), _f0_upper(hi)
    return ZInterval(lo, hi)


def save_frozen_set(spec: PolarCodeSpec, path) -> None:
    """Write the frozen set as newline-delimited 1-based indices."""
    with open(path, "w") as fh:
        for i in spec.frozen:
            fh.write(f"{i}\n")


def load_frozen_set(path, n: int, design_epsilon: float | None = None) -> PolarCodeSpec:
    """Read a frozen set written by save_frozen_set."""
    with open(path) as fh:
        frozen = tuple(sorted(int(line) for line in fh if line.strip()))
    return PolarCodeSpec(n, frozen, design_epsilon)


def save_profile_csv(profile: BhattacharyyaProfile, path) -> None:
    """Write (index, Z) rows, 1-based indices."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "Z"])
        for i, zi in enumerate(profile.z, start=1):
            writer.writerow([i, repr(zi)])
