"""Random base-b digit scrambling of nets and the RQMC building-block quadratures.

A scrambling of depth l applies a nested tree of uniformly random digit
permutations to the first l base-b digits of each coordinate, zeroes the
deeper digits and adds an independent uniform remainder scaled by b^-l.
Permutations are realized lazily through a keyed PRF (the materialized tree
would have b^l nodes per coordinate); the distribution is the same.

The level-l building block averages a freshly scrambled (0,l-1,s)-net with
equal weights b^-(l-1); the scrambling depth equals l-1. Level 0 is the null
quadrature and never produces nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .basis import DigitPoint
from .nets import NetParams, PointSet, default_net


@dataclass(frozen=True)
class ScramblerKey:
    """Identifies one independent scrambling stream.

    Distinct (block, level, replication) tuples give statistically independent
    permutation and remainder streams; equal keys reproduce bit-identical
    scramblings. identity=True short-circuits every permutation to the
    identity (debug mode, remainders unaffected).
    """

    master_seed: int
    block: int = 1
    level: int = 1
    replication: int = 0
    identity: bool = False

    def key_value(self) -> int:
        return kernels.derive_key(self.master_seed, self.replication, self.block, self.level)


def permutation_for(prefix: tuple[int, ...] | list[int], key: ScramblerKey,
                    b: int, coordinate: int = 0) -> np.ndarray:
    """The digit permutation applied at tree node `prefix` (earlier digits of
    the coordinate, possibly empty). Deterministic per (prefix, key)."""
    for d in prefix:
        if not 0 <= d < b:
            raise ValueError(f"prefix digit {d} out of range for base {b}")
    if key.identity:
        return np.arange(b, dtype=np.int64)
    position = len(prefix) + 1
    pref_int = 0
    for d in prefix:
        pref_int = pref_int * b + d
    ck = kernels.coordinate_key(key.key_value(), coordinate)
    seed = kernels.permutation_seed(ck, position, pref_int)
    return kernels.permutation_from_seed(seed, b)


@dataclass(frozen=True)
class ScrambledNet:
    """One scrambled net: scrambled digit prefixes, remainder terms and the
    source provenance. Remains a (0,m,s)-net (checkable exactly on `ints`)."""

    params: NetParams
    ints: np.ndarray = field(repr=False)       # int64[n, s], scrambled prefixes
    xi: np.ndarray = field(repr=False)         # float64[n, s], remainders in [0,1)
    key: ScramblerKey | None = None

    def values(self) -> np.ndarray:
        scale = float(self.params.b**self.params.m)
        v = (self.ints + self.xi) / scale
        # emission guard: float rounding must not push a coordinate to 1.0
        return np.minimum(v, np.nextafter(1.0, 0.0))


def scramble_net_batch(net: PointSet, keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scramble one net under many keys at once (depth = net level m).

    keys: uint64[R]. Returns (ints int64[R,n,s], xi float64[R,n,s]).
    """
    p = net.params
    return kernels.scramble_batch(net.ints, p.m, p.b, np.asarray(keys, dtype=np.uint64))


def scramble_net(net: PointSet, key: ScramblerKey) -> ScrambledNet:
    p = net.params
    if key.identity:
        n = p.n_points
        ints = net.ints.copy()
        xi = np.zeros((n, p.s))
    else:
        keys = np.array([key.key_value()], dtype=np.uint64)
        ints_b, xi_b = scramble_net_batch(net, keys)
        ints, xi = ints_b[0], xi_b[0]
    return ScrambledNet(params=p, ints=ints, xi=xi, key=key)


def scramble_point(p: DigitPoint, depth: int, key: ScramblerKey,
                   remainders: np.ndarray | None = None) -> np.ndarray:
    """Scramble the first `depth` digits of one point; remaining value comes
    from the remainder term scaled by b^-depth. Returns the point in [0,1)^s."""
    if depth > p.depth:
        raise ValueError(f"scrambling depth {depth} exceeds stored digit depth {p.depth}")
    b, s = p.b, p.dim
    prefix = p.prefix_ints(depth).reshape(1, s) if depth > 0 else np.zeros((1, s), dtype=np.int64)
    if key.identity:
        ints = prefix[0]
        xi = np.array([kernels.remainder_uniform(
            kernels.coordinate_key(key.key_value(), t), 0) for t in range(s)])
    else:
        keys = np.array([key.key_value()], dtype=np.uint64)
        ints_b, xi_b = kernels.scramble_batch(prefix, depth, b, keys)
        ints, xi = ints_b[0, 0], xi_b[0, 0]
    if remainders is not None:
        xi = np.asarray(remainders, dtype=np.float64)
        if xi.shape != (s,):
            raise ValueError(f"remainders must have shape ({s},)")
    v = (ints + xi) / float(b**depth)
    return np.minimum(v, np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class RealizedQuadrature:
    """One random draw of a quadrature: explicit nodes and (signed) weights."""

    nodes: np.ndarray = field(repr=False)    # float64[N, D]
    weights: np.ndarray = field(repr=False)  # float64[N]
    b: int = 2
    s: int = 1
    d: int = 1
    level: int = 1
    master_seed: int = 0
    replication: int = 0
    block_keys: dict = field(default_factory=dict, repr=False)  # (block, level) -> uint64

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def weight_sum(self) -> float:
        import math

        return math.fsum(self.weights.tolist())


def realize_building_block(block: int, level: int, s: int, b: int,
                           master_seed: int, replication: int = 0,
                           generator=default_net) -> RealizedQuadrature:
    """Draw the level-`level` building block: an equal-weight quadrature on a
    freshly scrambled (0, level-1, s)-net. level=1 is one uniform point."""
    if level < 1:
        raise ValueError(f"level must be >= 1, got {level}")
    net = generator(b, level - 1, s)
    key = ScramblerKey(master_seed=master_seed, block=block, level=level,
                       replication=replication)
    sc = scramble_net(net, key)
    nodes = sc.values()
    n = nodes.shape[0]
    weights = np.full(n, 1.0 / n)
    return RealizedQuadrature(
        nodes=nodes, weights=weights, b=b, s=s, d=1, level=level,
        master_seed=master_seed, replication=replication,
        block_keys={(block, level): key.key_value()},
    )
