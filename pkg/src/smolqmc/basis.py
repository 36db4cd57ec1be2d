"""Base-b digit arithmetic, elementary intervals and multi-index enumeration.

Everything here is exact: digit extraction goes through integer arithmetic
on the binary representation of the input double, so no float-accumulation
error can leak into the net checker or the wavelet supports.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

MultiIndex = tuple[int, ...]


def total(v: MultiIndex) -> int:
    """Sum of the entries of a multi-index."""
    return sum(v)


def default_digit_depth(b: int) -> int:
    """Digit depth covering double precision: 32 for b=2, ceil(52/log2 b) else."""
    if b == 2:
        return 32
    return int(np.ceil(52.0 / np.log2(b)))


def _validate_base(b: int) -> None:
    if not isinstance(b, (int, np.integer)) or b < 2:
        raise ValueError(f"base must be an integer >= 2, got {b!r}")


def digits_of(x: float, b: int, depth: int) -> list[int]:
    """Base-b digits of x in [0,1), most significant first.

    Inputs within float noise of a b-adic rational take the terminating
    representation (e.g. float(1/3) in base 3 yields [1, 0, ...], not the
    non-terminating expansion of the slightly smaller double).
    """
    K, _ = _digit_int_of(x, b, depth)
    return _int_to_digits(K, b, depth)


def _digit_int_of(x: float, b: int, depth: int) -> tuple[int, float]:
    """(prefix integer K in [0, b^depth), remainder in [0,1)) for x in [0,1).

    x == (K + remainder) * b**-depth exactly, up to the snap described in
    digits_of. All arithmetic is on exact integers.
    """
    _validate_base(b)
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    x = float(x)
    if not (0.0 <= x < 1.0):
        raise ValueError(f"x must lie in [0, 1), got {x!r}")
    num, den = x.as_integer_ratio()  # x = num / den, den a power of two
    scale = b**depth
    K, rem = divmod(num * scale, den)
    # snap up when within the representation noise of the next lattice point;
    # refuse if that would carry out to 1.0
    if rem > 0 and (den - rem) << 51 < den * scale and K + 1 < scale:
        return K + 1, 0.0
    return K, rem / den


def value_of(digits: list[int], b: int, remainder: float = 0.0) -> float:
    """Reconstruct the value represented by base-b digits plus remainder."""
    _validate_base(b)
    K = 0
    for d in digits:
        if not 0 <= d < b:
            raise ValueError(f"digit {d} out of range for base {b}")
        K = K * b + d
    return (K + remainder) / float(b ** len(digits))


def _int_to_digits(K: int, b: int, depth: int) -> list[int]:
    out = [0] * depth
    for r in range(depth - 1, -1, -1):
        K, out[r] = divmod(K, b)
    return out


@dataclass(frozen=True)
class DigitPoint:
    """A point of [0,1)^s held as per-coordinate base-b digits plus remainder."""

    b: int
    digits: tuple[tuple[int, ...], ...]  # per coordinate, most significant first
    remainder: tuple[float, ...]

    def __post_init__(self):
        _validate_base(self.b)
        for coord in self.digits:
            for d in coord:
                if not 0 <= d < self.b:
                    raise ValueError(f"digit {d} out of range for base {self.b}")
        for r in self.remainder:
            if not 0.0 <= r < 1.0:
                raise ValueError(f"remainder {r} outside [0, 1)")

    @property
    def dim(self) -> int:
        return len(self.digits)

    @property
    def depth(self) -> int:
        return len(self.digits[0]) if self.digits else 0

    def prefix_ints(self, depth: int | None = None) -> np.ndarray:
        """Per-coordinate integer of the first `depth` digits."""
        depth = self.depth if depth is None else depth
        if depth > self.depth:
            raise ValueError(f"requested depth {depth} exceeds stored {self.depth}")
        out = np.zeros(self.dim, dtype=np.int64)
        for t, coord in enumerate(self.digits):
            K = 0
            for d in coord[:depth]:
                K = K * self.b + d
            out[t] = K
        return out

    def values(self) -> np.ndarray:
        return np.array(
            [value_of(list(d), self.b, r) for d, r in zip(self.digits, self.remainder)]
        )


def digit_point(x, b: int, depth: int | None = None) -> DigitPoint:
    """Decompose each coordinate of x into base-b digits (terminating when possible)."""
    depth = default_digit_depth(b) if depth is None else depth
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    digs, rems = [], []
    for xt in xs:
        K, rem = _digit_int_of(float(xt), b, depth)
        digs.append(tuple(_int_to_digits(K, b, depth)))
        rems.append(rem)
    return DigitPoint(b=b, digits=tuple(digs), remainder=tuple(rems))


@dataclass(frozen=True)
class ElementaryInterval:
    """Half-open b-adic box: product of [k b^-j, (k+1) b^-j), with j=-1,0 meaning [0,1)."""

    b: int
    resolutions: MultiIndex  # entries >= -1
    shifts: MultiIndex

    def __post_init__(self):
        _validate_base(self.b)
        if len(self.resolutions) != len(self.shifts):
            raise ValueError("resolution and shift vectors must have equal length")
        for j, k in zip(self.resolutions, self.shifts):
            if j < -1:
                raise ValueError(f"resolution {j} < -1")
            hi = self.b**j if j >= 1 else 1
            if not 0 <= k < hi:
                raise ValueError(f"shift {k} not admissible for resolution {j}")

    @property
    def dim(self) -> int:
        return len(self.resolutions)

    @property
    def volume(self) -> float:
        return float(self.b) ** -sum(max(j, 0) for j in self.resolutions)

    def contains(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape[0] != self.dim:
            raise ValueError(f"point dimension {x.shape[0]} != interval dimension {self.dim}")
        for xt, j, k in zip(x, self.resolutions, self.shifts):
            if not 0.0 <= xt < 1.0:
                return False
            if j >= 1:
                w = float(self.b) ** -j
                if not k * w <= xt < (k + 1) * w:
                    return False
        return True


def interval_contains(interval: ElementaryInterval, x) -> bool:
    return interval.contains(x)


def compositions(
    total: int,
    parts: int,
    min_per_part: int = 0,
    caps: MultiIndex | None = None,
) -> list[MultiIndex]:
    """All vectors of length `parts` with the given sum, entry lower bound and
    optional entrywise caps, in lexicographic order."""
    if total < 0 or parts < 1 or min_per_part < 0:
        raise ValueError("total, parts and min_per_part must be nonnegative (parts >= 1)")
    if caps is not None and len(caps) != parts:
        raise ValueError(f"caps length {len(caps)} != parts {parts}")

    out: list[MultiIndex] = []
    entry = [0] * parts

    def rec(pos: int, remaining: int) -> None:
        if pos == parts - 1:
            cap = caps[pos] if caps is not None else remaining
            if min_per_part <= remaining <= cap:
                entry[pos] = remaining
                out.append(tuple(entry))
            return
        cap = caps[pos] if caps is not None else remaining
        hi = min(cap, remaining - min_per_part * (parts - 1 - pos))
        for v in range(min_per_part, hi + 1):
            entry[pos] = v
            rec(pos + 1, remaining - v)

    rec(0, total)
    return out


def composition_count(total: int, parts: int, min_per_part: int = 0) -> int:
    """Closed-form count for the cap-free case."""
    free = total - parts * min_per_part
    if free < 0:
        return 0
    return comb(free + parts - 1, parts - 1)
