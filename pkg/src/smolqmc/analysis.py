"""Empirical variance analysis of the randomized combination quadrature:
building-block moment estimates, covariance blocks of the scaled wavelets,
the spectral-radius randomized-error estimator and convergence-rate studies.

Estimation is replication-based throughout. All tolerances downstream are
quoted as multiples of the estimated standard error, never absolute. Samples
of the quadrature applied to product wavelets use the tensor factorization
of the combination terms (per-block quadrature values multiplied across
blocks), which equals materializing the nodes because the same scrambled net
backs every term referencing a (block, level) pair.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import kernels
from .basis import MultiIndex, compositions
from .nets import default_net
from .scrambling import scramble_net_batch
from .smolyak import SmolyakPlan, make_plan, node_count
from .wavelets import WaveletIndex, scaled_wavelet_factor


# ----------------------------------------------------------------------
# replication ensembles
# ----------------------------------------------------------------------

def building_block_points(block: int, level: int, s: int, b: int, master_seed: int,
                          rep_start: int, n_reps: int, generator=default_net) -> np.ndarray:
    """Scrambled nets of the level-`level` building block for a range of
    replications: float64[n_reps, b^(level-1), s]."""
    if level < 1:
        raise ValueError(f"level must be >= 1, got {level}")
    net = generator(b, level - 1, s)
    keys = kernels.derive_key_array(master_seed, rep_start, n_reps, block, level)
    ints, xi = scramble_net_batch(net, keys)
    vals = (ints + xi) / float(b ** (level - 1))
    return np.minimum(vals, np.nextafter(1.0, 0.0))


class BlockEnsemble:
    """Scrambled building-block nets for one plan over a replication range,
    with cached per-block quadrature values of wavelet factors."""

    def __init__(self, plan: SmolyakPlan, master_seed: int, rep_start: int,
                 n_reps: int, generator=default_net,
                 block_ids: tuple[int, ...] | None = None):
        self.plan = plan
        self.n_reps = n_reps
        if block_ids is None:
            block_ids = tuple(range(1, plan.d + 1))
        self.points: dict[tuple[int, int], np.ndarray] = {}
        for n, l in plan.levels_used():
            self.points[(n, l)] = building_block_points(
                block_ids[n - 1], l, plan.s, plan.b, master_seed,
                rep_start, n_reps, generator)
        self._quad_cache: dict = {}

    def block_quad(self, n: int, level: int, bidx: WaveletIndex) -> np.ndarray:
        """U^(n)_level applied to the block wavelet, one value per replication."""
        if not bidx.active_coords():
            return np.ones(self.n_reps)
        key = (n, level, bidx.j, bidx.i, bidx.k)
        out = self._quad_cache.get(key)
        if out is None:
            out = kernels.wavelet_block_quad(
                self.points[(n, level)],
                np.array(bidx.j, dtype=np.int64),
                np.array(bidx.i, dtype=np.int64),
                np.array(bidx.k, dtype=np.int64),
                self.plan.b)
            self._quad_cache[key] = out
        return out

    def wavelet_samples(self, idx: WaveletIndex) -> np.ndarray:
        """Quadrature applied to the product wavelet, one value per replication."""
        s = self.plan.s
        if idx.dim != self.plan.D:
            raise ValueError(f"wavelet dimension {idx.dim} != plan dimension {self.plan.D}")
        blocks = [idx.block(n, s) for n in range(self.plan.d)]
        acc = np.zeros(self.n_reps)
        for levels, coeff in self.plan.terms:
            prod = self.block_quad(1, levels[0], blocks[0]).copy()
            for n in range(1, self.plan.d):
                prod *= self.block_quad(n + 1, levels[n], blocks[n])
            acc += coeff * prod
        return acc

    def product_samples(self) -> np.ndarray:
        """Quadrature applied to f(x) = prod_t x_t, one value per replication."""
        pvals = {nl: kernels.product_block_quad(arr) for nl, arr in self.points.items()}
        acc = np.zeros(self.n_reps)
        for levels, coeff in self.plan.terms:
            prod = pvals[(1, levels[0])].copy()
            for n in range(1, self.plan.d):
                prod *= pvals[(n + 1, levels[n])]
            acc += coeff * prod
        return acc


def _chunks(n_reps: int, n_groups: int = 8) -> list[tuple[int, int]]:
    size = max(1, n_reps // n_groups)
    out, start = [], 0
    while start < n_reps:
        sz = min(size, n_reps - start)
        out.append((start, sz))
        start += sz
    return out


def _run_chunks(worker, n_reps: int, threads: int = 1, n_groups: int = 8) -> list:
    """Run worker(rep_start, n) over a fixed partition of the replication
    range; results come back in partition order regardless of thread count."""
    parts = _chunks(n_reps, n_groups)
    if threads <= 1:
        return [worker(st, sz) for st, sz in parts]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        futs = [ex.submit(worker, st, sz) for st, sz in parts]
        return [f.result() for f in futs]


# ----------------------------------------------------------------------
# moment estimates
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class MomentEstimate:
    """Replication summary: mean and second moment with their standard errors."""

    mean: float
    se: float
    second_moment: float
    second_moment_se: float
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise ValueError("need at least 2 replications for a standard error")


def _moments_of(samples: np.ndarray) -> MomentEstimate:
    R = samples.shape[0]
    sq = samples * samples
    return MomentEstimate(
        mean=float(samples.mean()),
        se=float(samples.std(ddof=1) / math.sqrt(R)),
        second_moment=float(sq.mean()),
        second_moment_se=float(sq.std(ddof=1) / math.sqrt(R)),
        count=R,
    )


def second_moment_bb(level: int, idx: WaveletIndex, n_reps: int, master_seed: int,
                     block: int = 1, enforce_admissible: bool = True,
                     generator=default_net) -> MomentEstimate:
    """Monte Carlo estimate of E[(U_level Psi)^2] over independent scramblings.

    The two-sided bracket with the explicit constants b^(2-2s) b^-level and
    b^(1+s) b^-level is claimed for |j| >= level + s - 1 only; estimating
    outside that region requires enforce_admissible=False (used as an
    exactness contrast, where the value is 0).
    """
    s = idx.dim
    if enforce_admissible and idx.total_resolution < level + s - 1:
        raise ValueError(
            f"|j|={idx.total_resolution} < level+s-1={level + s - 1}: "
            "the second-moment bracket is not claimed there")
    pts = building_block_points(block, level, s, idx.b, master_seed, 0, n_reps, generator)
    vals = kernels.wavelet_block_quad(
        pts, np.array(idx.j, dtype=np.int64), np.array(idx.i, dtype=np.int64),
        np.array(idx.k, dtype=np.int64), idx.b)
    return _moments_of(vals)


def second_moment_bracket(level: int, s: int, b: int) -> tuple[float, float]:
    """The proof constants: [b^(2-2s) b^-level, b^(1+s) b^-level]."""
    return float(b) ** (2 - 2 * s - level), float(b) ** (1 + s - level)


def cross_moment(target, idx: WaveletIndex, idx2: WaveletIndex, n_reps: int,
                 master_seed: int, level2: int | None = None) -> MomentEstimate:
    """Empirical E[(A Psi)(A Psi')] for wavelets differing in j or k.

    target: a SmolyakPlan (full combination quadrature on both factors) or a
    building-block level (then level2 selects the second factor's level;
    equal levels share one scrambled net, distinct levels are independent).
    """
    if idx.j == idx2.j and idx.k == idx2.k:
        raise ValueError("cross moments are only claimed for j != j' or k != k'")
    if isinstance(target, SmolyakPlan):
        ens = BlockEnsemble(target, master_seed, 0, n_reps)
        x = ens.wavelet_samples(idx)
        y = ens.wavelet_samples(idx2)
    else:
        level = int(target)
        l2 = level if level2 is None else level2
        pts1 = building_block_points(1, level, idx.dim, idx.b, master_seed, 0, n_reps)
        pts2 = pts1 if l2 == level else building_block_points(
            1, l2, idx2.dim, idx2.b, master_seed, 0, n_reps)
        x = kernels.wavelet_block_quad(
            pts1, np.array(idx.j, dtype=np.int64), np.array(idx.i, dtype=np.int64),
            np.array(idx.k, dtype=np.int64), idx.b)
        y = kernels.wavelet_block_quad(
            pts2, np.array(idx2.j, dtype=np.int64), np.array(idx2.i, dtype=np.int64),
            np.array(idx2.k, dtype=np.int64), idx2.b)
    return _moments_of(x * y)


# ----------------------------------------------------------------------
# covariance blocks of the scaled wavelets
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class LambdaBlock:
    """Empirical covariance block of the quadrature applied to the scaled
    wavelets sharing (j, k); indexed by the admissible shape tuples i."""

    j: MultiIndex
    k: MultiIndex
    matrix: np.ndarray = field(repr=False)
    group_rhos: np.ndarray = field(repr=False)  # per-chunk spectral radii
    count: int = 0

    def spectral_radius(self) -> float:
        return spectral_radius(self.matrix)

    def rho_se(self) -> float:
        g = self.group_rhos
        if g.size < 2:
            return float("nan")
        return float(g.std(ddof=1) / math.sqrt(g.size))


def _i_variants(b: int, j: MultiIndex) -> list[MultiIndex]:
    import itertools

    ranges = [range(1) if jt == 0 else range(b) for jt in j]
    return [tuple(v) for v in itertools.product(*ranges)]


def _lambda_accumulate(plan: SmolyakPlan, cand: list[tuple[MultiIndex, MultiIndex]],
                       alpha: float, master_seed: int, n_reps: int,
                       threads: int = 1, generator=default_net):
    """Per-candidate Gram accumulation over a deterministic chunk partition.

    Returns for each candidate (sum_outer [ni, ni], per-chunk rho array).
    """
    variants = [_i_variants(plan.b, j) for j, _ in cand]

    def worker(rep_start: int, n: int):
        ens = BlockEnsemble(plan, master_seed, rep_start, n, generator=generator)
        out = []
        for (j, k), ivars in zip(cand, variants):
            scale = float(plan.b) ** (-alpha * sum(j))
            V = np.empty((len(ivars), n))
            for a, i in enumerate(ivars):
                idx = WaveletIndex(b=plan.b, j=j, i=i, k=k)
                V[a] = ens.wavelet_samples(idx)
            V *= scale
            out.append(V @ V.T)
        return out

    chunk_results = _run_chunks(worker, n_reps, threads=threads)
    merged = []
    for c in range(len(cand)):
        grams = [res[c] for res in chunk_results]
        total = np.zeros_like(grams[0])
        for g in grams:  # fixed merge order
            total += g
        sizes = [sz for _, sz in _chunks(n_reps)]
        rhos = np.array([spectral_radius(0.5 * (g + g.T) / sz)
                         for g, sz in zip(grams, sizes)])
        merged.append((total, rhos))
    return merged


def lambda_block(plan: SmolyakPlan, j: MultiIndex, k: MultiIndex, alpha: float,
                 n_reps: int, master_seed: int, threads: int = 1,
                 generator=default_net) -> LambdaBlock:
    """Empirical covariance block over n_reps replications, symmetrized."""
    if alpha <= 0.5:
        raise ValueError(f"smoothness parameter must exceed 1/2, got {alpha}")
    if all(jt == 0 for jt in j):
        return LambdaBlock(j=tuple(j), k=tuple(k), matrix=np.zeros((1, 1)),
                           group_rhos=np.zeros(1), count=n_reps)
    (total, rhos), = _lambda_accumulate(
        plan, [(tuple(j), tuple(k))], alpha, master_seed, n_reps,
        threads=threads, generator=generator)
    M = total / n_reps
    return LambdaBlock(j=tuple(j), k=tuple(k), matrix=0.5 * (M + M.T),
                       group_rhos=rhos, count=n_reps)


# ----------------------------------------------------------------------
# small symmetric eigenproblems
# ----------------------------------------------------------------------

def jacobi_eigenvalues(M: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60) -> np.ndarray:
    """All eigenvalues of a symmetric matrix by cyclic Jacobi rotations."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"need a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix entries must be finite")
    scale = np.abs(M).max()
    if not np.allclose(M, M.T, rtol=0.0, atol=1e-12 * max(scale, 1.0)):
        raise ValueError("matrix is not symmetric")
    n = M.shape[0]
    A = 0.5 * (M + M.T)
    if n == 1 or scale == 0.0:
        return np.diag(A).copy()
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off = max(off, abs(A[p, q]))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = 0.5 * (A[q, q] - A[p, p]) / apq
                t = np.sign(theta) / (abs(theta) + math.sqrt(1.0 + theta * theta))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp, cq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
    return np.sort(np.diag(A))


def spectral_radius(M: np.ndarray, tol: float = 1e-12) -> float:
    """Largest absolute eigenvalue of a symmetric matrix (cyclic Jacobi)."""
    ev = jacobi_eigenvalues(M, tol=tol)
    return float(np.abs(ev).max())


# ----------------------------------------------------------------------
# worst-case candidates and admissible-level counting
# ----------------------------------------------------------------------

def candidate_worst_index(L: int, d: int) -> MultiIndex:
    """Block resolutions (floor(2L/d), ..., floor(2L/d), 2L - (d-1) floor(2L/d)):
    the probe on which the quadrature variance grows like L^(d-1) b^-L."""
    if L < d:
        raise ValueError(f"need L >= d, got L={L}, d={d}")
    base = (2 * L) // d
    return tuple([base] * (d - 1) + [2 * L - (d - 1) * base])


def count_admissible_levels(j_blocks: MultiIndex, mu: int) -> int:
    """|{l in N^d : |l| = mu, l_n <= j_n}| by exact enumeration."""
    return len(compositions(mu, len(j_blocks), min_per_part=1, caps=tuple(j_blocks)))


# ----------------------------------------------------------------------
# randomized-error estimation and convergence studies
# ----------------------------------------------------------------------

def _spread_block_totals(block_totals: MultiIndex, s: int) -> MultiIndex:
    """D-dimensional resolution vector putting each block total on the first
    coordinate of its block."""
    j = []
    for tot in block_totals:
        j.extend([tot] + [0] * (s - 1))
    return tuple(j)


def _zero_shift(b: int, j: MultiIndex) -> MultiIndex:
    return tuple(0 for _ in j)


def candidate_resolutions(plan: SmolyakPlan, j_budget: int) -> list[MultiIndex]:
    """All D-dimensional resolutions with L-d < |j| <= L+j_budget, plus the
    worst-case probe (which usually lies beyond the sweep)."""
    out = []
    for tot in range(plan.L - plan.d + 1, plan.L + j_budget + 1):
        out.extend(compositions(tot, plan.D, min_per_part=0))
    worst = _spread_block_totals(candidate_worst_index(plan.L, plan.d), plan.s)
    if worst not in out:
        out.append(worst)
    return out


@dataclass(frozen=True)
class ErrorEstimate:
    estimate: float
    se: float
    argmax_j: MultiIndex
    argmax_on_boundary: bool
    candidates: tuple = ()  # (j, rho) pairs, diagnostics


def randomized_error_estimate(plan: SmolyakPlan, alpha: float, n_reps: int,
                              master_seed: int, j_budget: int | None = None,
                              threads: int = 1, generator=default_net) -> ErrorEstimate:
    """Worst-case root-mean-square error estimate: the maximum over candidate
    (j, k) of sqrt(spectral radius of the empirical covariance block of the
    scaled wavelets). One representative k per j (the scrambling law is
    shift-invariant across k); candidates truncated at |j| <= L + j_budget
    with the boundary maximizer reported so truncation bias is visible.
    """
    if alpha <= 0.5:
        raise ValueError(f"smoothness parameter must exceed 1/2, got {alpha}")
    if j_budget is None:
        j_budget = 2 * plan.d
    cands = [(j, _zero_shift(plan.b, j)) for j in candidate_resolutions(plan, j_budget)]
    results = _lambda_accumulate(plan, cands, alpha, master_seed, n_reps,
                                 threads=threads, generator=generator)
    rhos, blocks = [], []
    for (j, k), (total, group_rhos) in zip(cands, results):
        M = total / n_reps
        blk = LambdaBlock(j=j, k=k, matrix=0.5 * (M + M.T),
                          group_rhos=group_rhos, count=n_reps)
        blocks.append(blk)
        rhos.append(blk.spectral_radius())
    best = int(np.argmax(rhos))
    rho = rhos[best]
    est = math.sqrt(rho)
    rho_se = blocks[best].rho_se()
    se = rho_se / (2.0 * est) if est > 0 else float("nan")
    return ErrorEstimate(
        estimate=est, se=se, argmax_j=cands[best][0],
        argmax_on_boundary=(sum(cands[best][0]) == plan.L + j_budget),
        candidates=tuple((cands[a][0], rhos[a]) for a in range(len(cands))),
    )


@dataclass(frozen=True)
class ConvergenceRecord:
    L: int
    n_nodes: int
    error: float
    se: float
    argmax_j: MultiIndex


def convergence_study(d: int, s: int, b: int, alpha: float, L_values,
                      n_reps: int, master_seed: int, j_budget: int | None = None,
                      threads: int = 1, generator=default_net
                      ) -> tuple[list[ConvergenceRecord], dict]:
    """Randomized-error estimates across levels plus rate fits.

    Fits (natural logs): a free-slope fit of log e against log N; residuals
    of the theoretical model with both exponents fixed; a fit with the N
    exponent pinned to -(alpha+1/2) and the log-log-N exponent free
    (bootstrap CI); and the compensated quantity
    e N^(alpha+1/2) / (log N)^((d-1)(1+alpha)) with its max/min band.
    """
    records = []
    for L in L_values:
        plan = make_plan(b, s, d, L)
        seed_L = kernels.mix_int(master_seed, L)  # independent draws per level
        res = randomized_error_estimate(plan, alpha, n_reps, seed_L,
                                        j_budget=j_budget, threads=threads,
                                        generator=generator)
        records.append(ConvergenceRecord(
            L=L, n_nodes=node_count(L, d, s, b), error=res.estimate,
            se=res.se, argmax_j=res.argmax_j))
    if len(records) >= 3:
        fits = rate_fits(records, alpha, d, master_seed)
    else:
        fits = {"error": "need at least 3 levels for a fit"}
    return records, fits


def rate_fits(records: list[ConvergenceRecord], alpha: float, d: int,
              seed: int = 0, n_boot: int = 200) -> dict:
    if len(records) < 3:
        raise ValueError("rate fit needs at least 3 levels")
    N = np.array([r.n_nodes for r in records], dtype=np.float64)
    e = np.array([r.error for r in records], dtype=np.float64)
    logN, loge = np.log(N), np.log(e)
    loglogN = np.log(np.log(N))
    rate = alpha + 0.5
    logexp = (d - 1) * (1.0 + alpha)

    # free slope: log e = a log N + c
    a, c = np.polyfit(logN, loge, 1)
    slope_ci = _bootstrap_slope_ci(logN, loge, seed, n_boot)

    # both exponents fixed: residuals around the theoretical shape
    model = -rate * logN + logexp * loglogN
    const = float(np.mean(loge - model))
    residuals = loge - model - const

    # N exponent pinned, log-log exponent free
    y = loge + rate * logN
    beta, beta_c = np.polyfit(loglogN, y, 1)
    beta_ci = _bootstrap_slope_ci(loglogN, y, seed + 1, n_boot)

    comp = e * N**rate / np.log(N) ** logexp
    return {
        "free_slope": {"slope": float(a), "intercept": float(c), "ci": slope_ci},
        "fixed": {"const": const, "residuals": residuals.tolist(),
                  "max_abs_residual": float(np.abs(residuals).max())},
        "free_log": {"exponent": float(beta), "intercept": float(beta_c),
                     "ci": beta_ci, "theoretical": logexp},
        "compensated": {"values": comp.tolist(),
                        "band": float(comp.max() / comp.min())},
    }


def _bootstrap_slope_ci(x: np.ndarray, y: np.ndarray, seed: int,
                        n_boot: int = 200) -> tuple[float, float]:
    """Residual-bootstrap 95% interval for the slope of y ~ x."""
    a, c = np.polyfit(x, y, 1)
    fitted = a * x + c
    resid = y - fitted
    rng = np.random.default_rng(seed)
    slopes = np.empty(n_boot)
    for t in range(n_boot):
        yb = fitted + rng.choice(resid, size=resid.size, replace=True)
        slopes[t] = np.polyfit(x, yb, 1)[0]
    return float(np.percentile(slopes, 2.5)), float(np.percentile(slopes, 97.5))


def lower_bound_probe(d: int, s: int, b: int, L_values, n_reps: int,
                      master_seed: int, threads: int = 1) -> list[MomentEstimate]:
    """E[(A Psi)^2] at the worst-case block resolutions, per level."""
    out = []
    for L in L_values:
        plan = make_plan(b, s, d, L)
        j = _spread_block_totals(candidate_worst_index(L, d), s)
        idx = WaveletIndex(b=b, j=j, i=tuple(0 for _ in j), k=tuple(0 for _ in j))
        seed_L = kernels.mix_int(master_seed, L)

        def worker(rep_start: int, n: int):
            ens = BlockEnsemble(plan, seed_L, rep_start, n)
            return ens.wavelet_samples(idx)

        samples = np.concatenate(_run_chunks(worker, n_reps, threads=threads))
        out.append(_moments_of(samples))
    return out
