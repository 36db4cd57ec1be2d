"""Deterministic (0,m,s)-nets in base b and the exhaustive net-property checker.

Points are held digit-exactly as per-coordinate prefix integers (the first m
base-b digits read as one integer), so both construction and checking are
free of floating-point error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .basis import _digit_int_of, compositions


@dataclass(frozen=True)
class NetParams:
    b: int
    m: int
    s: int

    def __post_init__(self):
        if self.b < 2:
            raise ValueError(f"base must be >= 2, got {self.b}")
        if self.m < 0:
            raise ValueError(f"level must be >= 0, got {self.m}")
        if self.s < 1:
            raise ValueError(f"dimension must be >= 1, got {self.s}")

    @property
    def n_points(self) -> int:
        return self.b**self.m


@dataclass(frozen=True)
class PointSet:
    """b^m points of [0,1)^s as depth-m prefix integers, one row per point."""

    params: NetParams
    ints: np.ndarray = field(repr=False)  # int64[b^m, s]

    def __post_init__(self):
        p = self.params
        if self.ints.shape != (p.n_points, p.s):
            raise ValueError(
                f"expected {p.n_points} x {p.s} integer matrix, got {self.ints.shape}"
            )
        if p.m > 0 and (self.ints.min() < 0 or self.ints.max() >= p.b**p.m):
            raise ValueError("prefix integers out of range for the stated level")

    def values(self) -> np.ndarray:
        """Point coordinates as doubles (left endpoints of the depth-m cells)."""
        return self.ints.astype(np.float64) / float(self.params.b**self.params.m)


@dataclass(frozen=True)
class NetCheckWitness:
    resolutions: tuple[int, ...]
    shifts: tuple[int, ...]
    count: int


def stratified_grid(b: int, m: int) -> PointSet:
    """The one-dimensional net {k b^-m : k = 0..b^m-1}."""
    params = NetParams(b=b, m=m, s=1)
    ints = np.arange(params.n_points, dtype=np.int64).reshape(-1, 1)
    return PointSet(params=params, ints=ints)


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    f = 2
    while f * f <= n:
        if n % f == 0:
            return False
        f += 1
    return True


def _pascal_power(m: int, power: int, b: int) -> np.ndarray:
    """power-th power of the upper-triangular m x m Pascal matrix, mod b."""
    P = np.zeros((m, m), dtype=np.int64)
    for r in range(m):
        for c in range(r, m):
            P[r, c] = comb(c, r) % b
    out = np.eye(m, dtype=np.int64)
    for _ in range(power):
        out = (out @ P) % b
    return out


def faure_net(b: int, m: int, s: int) -> PointSet:
    """Faure (0,m,s)-net in prime base b, valid for s <= b.

    Coordinate r uses the (r-1)-th power of the Pascal matrix mod b as its
    generator; point index digits are taken least significant first.
    """
    if not _is_prime(b):
        raise ValueError(f"Faure construction needs a prime base, got b={b}")
    if not 1 <= s <= b:
        raise ValueError(f"Faure construction needs 1 <= s <= b, got s={s}, b={b}")
    params = NetParams(b=b, m=m, s=s)
    n = params.n_points
    if m == 0:
        return PointSet(params=params, ints=np.zeros((1, s), dtype=np.int64))

    # digits of all point indices, a[p, c] = c-th base-b digit of p (LSB first)
    idx = np.arange(n, dtype=np.int64)
    a = np.empty((n, m), dtype=np.int64)
    rest = idx.copy()
    for c in range(m):
        a[:, c] = rest % b
        rest //= b

    ints = np.empty((n, s), dtype=np.int64)
    msb_weight = b ** np.arange(m - 1, -1, -1, dtype=np.int64)
    for r in range(s):
        C = _pascal_power(m, r, b)
        y = (a @ C.T) % b  # y[p, row] = digit `row` of coordinate r, MSB first
        ints[:, r] = y @ msb_weight
    return PointSet(params=params, ints=ints)


def default_net(b: int, m: int, s: int) -> PointSet:
    """Stratified grid for s=1 (any base), Faure otherwise (prime base, s <= b)."""
    if s == 1:
        return stratified_grid(b, m)
    return faure_net(b, m, s)


def is_net(ints: np.ndarray | PointSet, b: int | None = None, m: int | None = None,
           s: int | None = None) -> tuple[bool, NetCheckWitness | None]:
    """Exhaustively verify the (0,m,s)-net property.

    Accepts a PointSet or a raw int64[b^m, s] matrix of depth-m prefix
    integers. Checks every resolution shape |j| = m and every b-adic box;
    returns (True, None) or (False, witness of the first violated box).
    A cardinality mismatch raises instead of returning False.
    """
    if isinstance(ints, PointSet):
        p = ints.params
        b, m, s = p.b, p.m, p.s
        ints = ints.ints
    ints = np.asarray(ints, dtype=np.int64)
    n_expected = b**m
    if ints.shape != (n_expected, s):
        raise ValueError(
            f"cardinality mismatch: expected {n_expected} x {s}, got {ints.shape}"
        )
    for shape in compositions(m, s, min_per_part=0):
        # cell index per coordinate at resolution shape[t] is the digit prefix
        cells = np.zeros(n_expected, dtype=np.int64)
        for t in range(s):
            pref = ints[:, t] // b ** (m - shape[t])
            cells = cells * b ** shape[t] + pref
        counts = np.bincount(cells, minlength=n_expected)
        if counts.max() > 1:
            bad = int(np.argmax(counts > 1))
            shifts = []
            rest = bad
            for t in range(s - 1, -1, -1):
                rest, kt = divmod(rest, b ** shape[t])
                shifts.append(kt)
            witness = NetCheckWitness(
                resolutions=shape, shifts=tuple(reversed(shifts)),
                count=int(counts[bad]),
            )
            return False, witness
    return True, None


def is_net_values(values: np.ndarray, b: int, m: int, s: int) -> tuple[bool, NetCheckWitness | None]:
    """Net check for float points: digits are recovered exactly (with the
    terminating-representation snap), then delegated to the integer checker."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != s:
        raise ValueError(f"expected a (n, {s}) array of points, got {values.shape}")
    ints = np.empty(values.shape, dtype=np.int64)
    if m == 0:
        ints[:] = 0
    else:
        for p in range(values.shape[0]):
            for t in range(s):
                K, _ = _digit_int_of(float(values[p, t]), b, m)
                ints[p, t] = K
    return is_net(ints, b, m, s)
