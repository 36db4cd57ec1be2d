"""Hot kernels: keyed-hash digit scrambling and wavelet quadrature evaluation.

Every kernel exists twice with bit-identical output: a numba @njit version
(loops) and a pure-numpy version (vectorized). The numba path is used when
available unless the environment variable SMOLQMC_DISABLE_NUMBA is set to a
non-empty value. benchmarks/bench_kernels.py compares the two.

All randomness is counter-mode: a splitmix64-style finalizer applied to a
chain of (key, salt, index) mixes. uint64 arithmetic wraps mod 2^64 in all
three realizations (python ints are masked explicitly).
"""

from __future__ import annotations

import os

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MULT = 0xD1342543DE82EF95
_SM1 = 0xBF58476D1CE4E5B9
_SM2 = 0x94D049BB133111EB

# domain-separation salts for the independent streams
SALT_KEY = 0x5EED0B10C0FFEE00
SALT_COORD = 0x00C0081D17E5A1F1
SALT_PERM = 0x9E26A5B1D3C7F00D
SALT_REM = 0x7E5712B8F00DCAFE

U64 = np.uint64
_G = U64(_GAMMA)
_M = U64(_MULT)
_S1 = U64(_SM1)
_S2 = U64(_SM2)
_R30 = U64(30)
_R27 = U64(27)
_R31 = U64(31)

HAS_NUMBA = False
try:
    if not os.environ.get("SMOLQMC_DISABLE_NUMBA"):
        from numba import njit

        HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised via env flag instead
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ----------------------------------------------------------------------
# python-int scalar hash (exact reference, used for key derivation)
# ----------------------------------------------------------------------

def _finalize_int(z: int) -> int:
    z ^= z >> 30
    z = (z * _SM1) & _MASK
    z ^= z >> 27
    z = (z * _SM2) & _MASK
    z ^= z >> 31
    return z


def mix_int(h: int, v: int) -> int:
    """One PRF step: absorb value v into state h (both uint64 as python ints)."""
    return _finalize_int(((h ^ ((v * _MULT) & _MASK)) + _GAMMA) & _MASK)


def derive_key(master_seed: int, replication: int, block: int, level: int) -> int:
    """The scrambling key of building block (block, level) in one replication."""
    h = mix_int(master_seed & _MASK, SALT_KEY)
    h = mix_int(h, replication & _MASK)
    h = mix_int(h, block & _MASK)
    return mix_int(h, level & _MASK)


def coordinate_key(key: int, t: int) -> int:
    return mix_int(mix_int(key, SALT_COORD), t)


def permutation_seed(coord_key: int, position: int, prefix: int) -> int:
    return mix_int(mix_int(mix_int(coord_key, SALT_PERM), position), prefix)


def permutation_from_seed(seed: int, b: int) -> np.ndarray:
    """Uniform permutation of {0..b-1}: rank b counter-mode draws, ties by index."""
    ranks = [mix_int(seed, v) for v in range(b)]
    perm = np.empty(b, dtype=np.int64)
    for x in range(b):
        r = 0
        for v in range(b):
            if ranks[v] < ranks[x] or (ranks[v] == ranks[x] and v < x):
                r += 1
        perm[x] = r
    return perm


def remainder_uniform(coord_key: int, point_index: int) -> float:
    h = mix_int(mix_int(coord_key, SALT_REM), point_index)
    return (h >> 11) * 2.0**-53


# ----------------------------------------------------------------------
# numpy-array hash and kernels
# ----------------------------------------------------------------------

def _finalize_np(z):
    z = z ^ (z >> _R30)
    z = z * _S1
    z = z ^ (z >> _R27)
    z = z * _S2
    z = z ^ (z >> _R31)
    return z


def _mix_np(h, v):
    # 0-d arrays keep numpy's wrapping silent (uint64 scalars warn on overflow)
    h = np.asarray(h, dtype=np.uint64)
    v = np.asarray(v, dtype=np.uint64)
    return _finalize_np((h ^ (v * _M)) + _G)


def derive_key_array(master_seed: int, rep_start: int, n_reps: int, block: int, level: int) -> np.ndarray:
    """Per-replication keys for replications rep_start .. rep_start+n_reps-1."""
    h0 = _mix_np(np.full(n_reps, master_seed & _MASK, dtype=np.uint64), U64(SALT_KEY))
    reps = np.arange(rep_start, rep_start + n_reps, dtype=np.uint64)
    h = _mix_np(h0, reps)
    h = _mix_np(h, U64(block & _MASK))
    return _mix_np(h, U64(level & _MASK))


def scramble_batch_numpy(prefix_ints: np.ndarray, depth: int, b: int, keys: np.ndarray):
    """Nested-permutation scrambling of depth `depth` plus remainder draws.

    prefix_ints: int64[n, s], each entry the first `depth` base-b digits of a
    coordinate read as an integer. keys: uint64[R], one per replication.
    Returns (ints int64[R, n, s], xi float64[R, n, s]).
    """
    n, s = prefix_ints.shape
    R = keys.shape[0]
    kc = _mix_np(_mix_np(keys[:, None], U64(SALT_COORD)),
                 np.arange(s, dtype=np.uint64)[None, :])          # [R, s]
    out = np.zeros((R, n, s), dtype=np.int64)
    if depth > 0:
        kp = _mix_np(kc, U64(SALT_PERM))                          # [R, s]
        K = prefix_ints.astype(np.int64)
        for r in range(1, depth + 1):
            hi_stride = b ** (depth - r + 1)
            lo_stride = b ** (depth - r)
            pref = (K // hi_stride).astype(np.uint64)             # [n, s]
            digit = (K // lo_stride) % b                          # [n, s]
            hp = _mix_np(_mix_np(kp, U64(r))[:, None, :], pref[None, :, :])  # [R, n, s]
            rank_d = _mix_np(hp, digit.astype(np.uint64)[None, :, :])
            pi = np.zeros((R, n, s), dtype=np.int64)
            for v in range(b):
                rv = _mix_np(hp, U64(v))
                pi += (rv < rank_d)
                pi += (rv == rank_d) & (v < digit)[None, :, :]
            out = out * b + pi
    kr = _mix_np(kc, U64(SALT_REM))                               # [R, s]
    hx = _mix_np(kr[:, None, :], np.arange(n, dtype=np.uint64)[None, :, None])
    xi = (hx >> U64(11)).astype(np.float64) * 2.0**-53
    return out, xi


def wavelet_block_quad_numpy(values: np.ndarray, j: np.ndarray, i: np.ndarray,
                             k: np.ndarray, b: int) -> np.ndarray:
    """Equal-weight quadrature of a product Haar wavelet over scrambled nets.

    values: float64[R, n, s] scrambled points; (j, i, k): int64[s] wavelet index
    per coordinate of the block. Returns float64[R].
    """
    R, n, s = values.shape
    prod = np.ones((R, n))
    for t in range(s):
        jt = int(j[t])
        if jt == 0:
            continue
        x = values[:, :, t]
        c = float(b) ** ((jt - 2) / 2.0)
        hi = np.floor(x * float(b) ** jt).astype(np.int64) == b * int(k[t]) + int(i[t])
        lo = np.floor(x * float(b) ** (jt - 1)).astype(np.int64) == int(k[t])
        prod *= c * (b * hi.astype(np.float64) - lo.astype(np.float64))
    return prod.mean(axis=1)


def product_block_quad_numpy(values: np.ndarray) -> np.ndarray:
    """Equal-weight quadrature of f(x) = prod_t x_t over scrambled nets."""
    return values.prod(axis=2).mean(axis=1)


def wavelet_values_numpy(points: np.ndarray, j: np.ndarray, i: np.ndarray,
                         k: np.ndarray, b: int) -> np.ndarray:
    """Pointwise product-wavelet values at points float64[N, D] -> float64[N]."""
    N, D = points.shape
    out = np.ones(N)
    for t in range(D):
        jt = int(j[t])
        if jt == 0:
            continue
        x = points[:, t]
        c = float(b) ** ((jt - 2) / 2.0)
        hi = np.floor(x * float(b) ** jt).astype(np.int64) == b * int(k[t]) + int(i[t])
        lo = np.floor(x * float(b) ** (jt - 1)).astype(np.int64) == int(k[t])
        out *= c * (b * hi.astype(np.float64) - lo.astype(np.float64))
    return out


# ----------------------------------------------------------------------
# numba twins
# ----------------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True, nogil=True)
    def _finalize_nb(z):
        z ^= z >> _R30
        z *= _S1
        z ^= z >> _R27
        z *= _S2
        z ^= z >> _R31
        return z

    @njit(cache=True, nogil=True)
    def _mix_nb(h, v):
        return _finalize_nb((h ^ (v * _M)) + _G)

    @njit(cache=True, nogil=True)
    def _scramble_batch_nb(prefix_ints, depth, b, keys):
        n, s = prefix_ints.shape
        R = keys.shape[0]
        out = np.zeros((R, n, s), dtype=np.int64)
        xi = np.empty((R, n, s), dtype=np.float64)
        salt_coord = U64(SALT_COORD)
        salt_perm = U64(SALT_PERM)
        salt_rem = U64(SALT_REM)
        ranks = np.empty(b, dtype=np.uint64)
        for rep in range(R):
            for t in range(s):
                kc = _mix_nb(_mix_nb(keys[rep], salt_coord), U64(t))
                kp = _mix_nb(kc, salt_perm)
                kr = _mix_nb(kc, salt_rem)
                for p in range(n):
                    K = prefix_ints[p, t]
                    Y = np.int64(0)
                    hi_stride = np.int64(b) ** np.int64(depth)
                    for r in range(1, depth + 1):
                        lo_stride = hi_stride // b
                        pref = K // hi_stride
                        digit = (K // lo_stride) % b
                        hp = _mix_nb(_mix_nb(kp, U64(r)), U64(pref))
                        for v in range(b):
                            ranks[v] = _mix_nb(hp, U64(v))
                        rd = ranks[digit]
                        pi = np.int64(0)
                        for v in range(b):
                            if ranks[v] < rd or (ranks[v] == rd and v < digit):
                                pi += 1
                        Y = Y * b + pi
                        hi_stride = lo_stride
                    out[rep, p, t] = Y
                    hx = _mix_nb(kr, U64(p))
                    xi[rep, p, t] = np.float64(hx >> U64(11)) * 2.0**-53
        return out, xi

    @njit(cache=True, nogil=True)
    def _wavelet_block_quad_nb(values, j, i, k, b):
        R, n, s = values.shape
        out = np.empty(R, dtype=np.float64)
        bf = np.float64(b)
        c = np.empty(s, dtype=np.float64)
        bj = np.empty(s, dtype=np.float64)
        bj1 = np.empty(s, dtype=np.float64)
        tgt_hi = np.empty(s, dtype=np.int64)
        for t in range(s):
            c[t] = bf ** ((j[t] - 2) / 2.0)
            bj[t] = bf ** np.float64(j[t])
            bj1[t] = bf ** np.float64(j[t] - 1)
            tgt_hi[t] = b * k[t] + i[t]
        for rep in range(R):
            acc = 0.0
            for p in range(n):
                prod = 1.0
                for t in range(s):
                    if j[t] == 0:
                        continue
                    x = values[rep, p, t]
                    hi = 1.0 if np.int64(np.floor(x * bj[t])) == tgt_hi[t] else 0.0
                    lo = 1.0 if np.int64(np.floor(x * bj1[t])) == k[t] else 0.0
                    prod *= c[t] * (bf * hi - lo)
                acc += prod
            out[rep] = acc / n
        return out

    @njit(cache=True, nogil=True)
    def _product_block_quad_nb(values):
        R, n, s = values.shape
        out = np.empty(R, dtype=np.float64)
        for rep in range(R):
            acc = 0.0
            for p in range(n):
                prod = 1.0
                for t in range(s):
                    prod *= values[rep, p, t]
                acc += prod
            out[rep] = acc / n
        return out

    @njit(cache=True, nogil=True)
    def _wavelet_values_nb(points, j, i, k, b):
        N, D = points.shape
        out = np.ones(N, dtype=np.float64)
        bf = np.float64(b)
        c = np.empty(D, dtype=np.float64)
        bj = np.empty(D, dtype=np.float64)
        bj1 = np.empty(D, dtype=np.float64)
        tgt_hi = np.empty(D, dtype=np.int64)
        for t in range(D):
            c[t] = bf ** ((j[t] - 2) / 2.0)
            bj[t] = bf ** np.float64(j[t])
            bj1[t] = bf ** np.float64(j[t] - 1)
            tgt_hi[t] = b * k[t] + i[t]
        for p in range(N):
            prod = 1.0
            for t in range(D):
                if j[t] == 0:
                    continue
                x = points[p, t]
                hi = 1.0 if np.int64(np.floor(x * bj[t])) == tgt_hi[t] else 0.0
                lo = 1.0 if np.int64(np.floor(x * bj1[t])) == k[t] else 0.0
                prod *= c[t] * (bf * hi - lo)
            out[p] = prod
        return out

    def scramble_batch_numba(prefix_ints, depth, b, keys):
        return _scramble_batch_nb(np.ascontiguousarray(prefix_ints, dtype=np.int64),
                                  depth, b, np.ascontiguousarray(keys, dtype=np.uint64))

    def wavelet_block_quad_numba(values, j, i, k, b):
        return _wavelet_block_quad_nb(np.ascontiguousarray(values),
                                      np.ascontiguousarray(j, dtype=np.int64),
                                      np.ascontiguousarray(i, dtype=np.int64),
                                      np.ascontiguousarray(k, dtype=np.int64), b)

    def product_block_quad_numba(values):
        return _product_block_quad_nb(np.ascontiguousarray(values))

    def wavelet_values_numba(points, j, i, k, b):
        return _wavelet_values_nb(np.ascontiguousarray(points),
                                  np.ascontiguousarray(j, dtype=np.int64),
                                  np.ascontiguousarray(i, dtype=np.int64),
                                  np.ascontiguousarray(k, dtype=np.int64), b)

else:
    scramble_batch_numba = None
    wavelet_block_quad_numba = None
    product_block_quad_numba = None
    wavelet_values_numba = None


# public dispatch
if USE_NUMBA:
    scramble_batch = scramble_batch_numba
    wavelet_block_quad = wavelet_block_quad_numba
    product_block_quad = product_block_quad_numba
    wavelet_values_nd = wavelet_values_numba
else:
    scramble_batch = scramble_batch_numpy
    wavelet_block_quad = wavelet_block_quad_numpy
    product_block_quad = product_block_quad_numpy
    wavelet_values_nd = wavelet_values_numpy
