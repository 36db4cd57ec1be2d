"""The randomized sparse-grid combination quadrature on [0,1)^(d s).

The method of level L over d blocks combines tensor products of the
building-block quadratures with signed binomial coefficients:

    sum over level vectors l (each entry >= 1, L-d+1 <= |l| <= L) of
    (-1)^(L-|l|) C(d-1, L-|l|) (x) U^(1)_{l_1} ... (x) U^(d)_{l_d}

One scrambled net is drawn per (block, level) pair per replication and
reused by every combination term referencing that pair; the representation
is an identity in those random objects, so sharing is required for the
variance structure the analysis module measures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np

from . import kernels
from .basis import MultiIndex, compositions
from .nets import default_net
from .scrambling import RealizedQuadrature, scramble_net_batch

__all__ = [
    "SmolyakPlan", "RealizedQuadrature", "combination_terms", "make_plan",
    "realize", "apply_quadrature", "node_count", "weight_sum_formula",
    "dimension_reduction_check",
]


def combination_terms(L: int, d: int) -> list[tuple[MultiIndex, int]]:
    """Complete term list [(levels, coefficient)] of the level-L combination."""
    if d < 1:
        raise ValueError(f"need d >= 1, got {d}")
    if L < d:
        raise ValueError(f"need L >= d, got L={L}, d={d}")
    terms = []
    for tot in range(max(L - d + 1, d), L + 1):
        coeff = (-1) ** (L - tot) * comb(d - 1, L - tot)
        for levels in compositions(tot, d, min_per_part=1):
            terms.append((levels, coeff))
    return terms


def weight_sum_formula(L: int, d: int) -> int:
    """Alternative closed form of the total weight: alternating binomial sum
    over the term groups; equals 1 for every valid (L, d)."""
    return sum(
        (-1) ** nu * comb(d - 1, nu) * comb(L - nu - 1, d - 1)
        for nu in range(min(d - 1, L - d) + 1)
    )


@dataclass(frozen=True)
class SmolyakPlan:
    """The deterministic combination structure: bases, block layout and terms."""

    b: int
    s: int
    d: int
    L: int
    terms: tuple[tuple[MultiIndex, int], ...] = field(repr=False)

    @property
    def D(self) -> int:
        return self.d * self.s

    def levels_used(self) -> list[tuple[int, int]]:
        """All (block, level) pairs appearing in any term."""
        pairs = set()
        for levels, _ in self.terms:
            for n, l in enumerate(levels):
                pairs.add((n + 1, l))
        return sorted(pairs)


def make_plan(b: int, s: int, d: int, L: int) -> SmolyakPlan:
    if b < 2 or s < 1:
        raise ValueError(f"need base >= 2 and block dimension >= 1, got b={b}, s={s}")
    return SmolyakPlan(b=b, s=s, d=d, L=L, terms=tuple(combination_terms(L, d)))


def node_count(L: int, d: int, s: int = 1, b: int = 2) -> int:
    """Total node count: sum over terms of b^(|l|-d). Independent of s."""
    return sum(b ** (sum(levels) - d) for levels, _ in combination_terms(L, d))


def realize(plan: SmolyakPlan, master_seed: int, replication: int = 0,
            generator=default_net, block_ids: tuple[int, ...] | None = None) -> RealizedQuadrature:
    """Draw one realization: explicit tensor-product nodes and signed weights.

    block_ids overrides the key identity of each block position (used to
    couple realizations across plans sharing building blocks); default is
    positions 1..d. Weights are assembled in exact rational arithmetic and
    emitted as doubles.
    """
    if block_ids is None:
        block_ids = tuple(range(1, plan.d + 1))
    if len(block_ids) != plan.d:
        raise ValueError(f"need {plan.d} block ids, got {len(block_ids)}")

    nets: dict[tuple[int, int], np.ndarray] = {}
    keys: dict[tuple[int, int], int] = {}
    for n, l in plan.levels_used():
        kid = block_ids[n - 1]
        key = kernels.derive_key(master_seed, replication, kid, l)
        keys[(n, l)] = key
        net = generator(plan.b, l - 1, plan.s)
        ints, xi = scramble_net_batch(net, np.array([key], dtype=np.uint64))
        vals = (ints[0] + xi[0]) / float(plan.b ** (l - 1))
        nets[(n, l)] = np.minimum(vals, np.nextafter(1.0, 0.0))

    node_chunks, weight_chunks = [], []
    for levels, coeff in plan.terms:
        w = float(Fraction(coeff, plan.b ** (sum(levels) - plan.d)))
        blocks = [nets[(n + 1, l)] for n, l in enumerate(levels)]
        counts = [blk.shape[0] for blk in blocks]
        n_nodes = int(np.prod(counts))
        tensor = np.empty((n_nodes, plan.D))
        grids = np.meshgrid(*[np.arange(c) for c in counts], indexing="ij")
        for n, blk in enumerate(blocks):
            sel = grids[n].reshape(-1)
            tensor[:, n * plan.s:(n + 1) * plan.s] = blk[sel]
        node_chunks.append(tensor)
        weight_chunks.append(np.full(n_nodes, w))

    return RealizedQuadrature(
        nodes=np.concatenate(node_chunks, axis=0),
        weights=np.concatenate(weight_chunks),
        b=plan.b, s=plan.s, d=plan.d, level=plan.L,
        master_seed=master_seed, replication=replication,
        block_keys=keys,
    )


def apply_quadrature(q: RealizedQuadrature, f, cache: bool = False) -> float:
    """Evaluate sum_nu w_nu f(x_nu). f receives an [N, D] array and should
    return [N] values (a scalar fallback per node is attempted otherwise).
    Accumulation is pairwise (np.dot); non-finite values are reported."""
    try:
        fx = np.asarray(f(q.nodes), dtype=np.float64)
        if fx.shape != (q.n_nodes,):
            raise TypeError
    except TypeError:
        if cache:
            seen: dict[bytes, float] = {}
            fx = np.empty(q.n_nodes)
            for nu in range(q.n_nodes):
                key = q.nodes[nu].tobytes()
                if key not in seen:
                    seen[key] = float(f(q.nodes[nu]))
                fx[nu] = seen[key]
        else:
            fx = np.array([float(f(q.nodes[nu])) for nu in range(q.n_nodes)])
    bad = ~np.isfinite(fx)
    if bad.any():
        nu = int(np.argmax(bad))
        raise ValueError(f"integrand returned {fx[nu]!r} at node {q.nodes[nu].tolist()}")
    return float(np.dot(q.weights, fx))


def dimension_reduction_check(idx, L: int, d: int, master_seed: int,
                              n_reps: int = 1024, coupled: bool = True):
    """Samples of the quadrature applied to a wavelet with inactive blocks,
    next to samples of the reduced quadrature applied to the restricted
    wavelet. With coupled=True the active blocks share their scrambling keys
    and the two samples agree realization-wise (up to float cancellation);
    otherwise they agree in distribution only.

    Returns (full_samples, reduced_samples), each float64[n_reps].
    """
    from .analysis import BlockEnsemble  # local import: analysis builds on this module

    if idx.dim % d:
        raise ValueError(f"wavelet dimension {idx.dim} is not divisible into {d} blocks")
    s = idx.dim // d
    active = idx.active_blocks(s)
    t_inactive = d - len(active)
    if t_inactive == 0:
        raise ValueError("all blocks are active; nothing to reduce")
    if not active:
        raise ValueError("constant wavelet: use apply_quadrature directly")

    full_plan = make_plan(idx.b, s, d, L)
    red_plan = make_plan(idx.b, s, d - t_inactive, L - t_inactive)

    keep = [t for n in active for t in range(n * s, (n + 1) * s)]
    from .wavelets import WaveletIndex

    reduced_idx = WaveletIndex(
        b=idx.b,
        j=tuple(idx.j[t] for t in keep),
        i=tuple(idx.i[t] for t in keep),
        k=tuple(idx.k[t] for t in keep),
    )

    full = BlockEnsemble(full_plan, master_seed, 0, n_reps)
    red_ids = tuple(a + 1 for a in active) if coupled else tuple(
        d + 1 + a for a in range(len(active)))
    reduced = BlockEnsemble(red_plan, master_seed, 0, n_reps, block_ids=red_ids)
    return full.wavelet_samples(idx), reduced.wavelet_samples(reduced_idx)
