"""Haar wavelets in base b: evaluation, admissible index enumeration,
canonical coefficients and the smoothness-weighted norm.

The one-dimensional wavelets are

    psi_i(x)     = b^(1/2) 1{floor(bx) = i} - b^(-1/2) 1{floor(x) = 0},  i = 0..b-1
    psi^j_{i,k}  = b^((j-1)/2) psi_i(b^(j-1) x - k)   for j >= 1, k in 0..b^(j-1)-1
    psi^0_{0,0}  = 1 on [0,1)

normalized in L2; the multivariate ones are coordinate products. They form a
tight frame (constant 1), not a basis, so norms are defined on canonical
coefficients only.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import kernels
from .basis import ElementaryInterval, MultiIndex


@dataclass(frozen=True)
class WaveletIndex:
    """Admissible triple (j, i, k): i_t in {0} or {0..b-1}, k_t in {0} or
    {0..b^(j_t-1)-1} depending on the per-coordinate resolution j_t."""

    b: int
    j: MultiIndex
    i: MultiIndex
    k: MultiIndex

    def __post_init__(self):
        if not (len(self.j) == len(self.i) == len(self.k)):
            raise ValueError("j, i, k must have equal length")
        if self.b < 2:
            raise ValueError(f"base must be >= 2, got {self.b}")
        for jt, it, kt in zip(self.j, self.i, self.k):
            if jt < 0:
                raise ValueError(f"resolution {jt} < 0")
            i_hi = 1 if jt == 0 else self.b
            k_hi = 1 if jt <= 1 else self.b ** (jt - 1)
            if not 0 <= it < i_hi:
                raise ValueError(f"shape index {it} inadmissible at resolution {jt}")
            if not 0 <= kt < k_hi:
                raise ValueError(f"shift {kt} inadmissible at resolution {jt}")

    @property
    def dim(self) -> int:
        return len(self.j)

    @property
    def total_resolution(self) -> int:
        return sum(self.j)

    def active_coords(self) -> tuple[int, ...]:
        return tuple(t for t, jt in enumerate(self.j) if jt != 0)

    def active_blocks(self, s: int) -> tuple[int, ...]:
        """Indices of the size-s coordinate groups that meet an active coordinate."""
        if self.dim % s:
            raise ValueError(f"dimension {self.dim} is not a multiple of block size {s}")
        return tuple(sorted({t // s for t in self.active_coords()}))

    def support(self) -> ElementaryInterval:
        return ElementaryInterval(
            b=self.b,
            resolutions=tuple(jt - 1 for jt in self.j),
            shifts=self.k,
        )

    def block(self, n: int, s: int) -> "WaveletIndex":
        """The s-dimensional factor living on block n."""
        sl = slice(n * s, (n + 1) * s)
        return WaveletIndex(b=self.b, j=self.j[sl], i=self.i[sl], k=self.k[sl])


def psi_eval_1d(j: int, i: int, k: int, x, b: int):
    """Exact pointwise value of the one-dimensional wavelet (scalar or array x)."""
    idx = WaveletIndex(b=b, j=(j,), i=(i,), k=(k,))  # validates admissibility
    x_arr = np.asarray(x, dtype=np.float64)
    if np.any(x_arr < 0.0) or np.any(x_arr >= 1.0):
        raise ValueError("x must lie in [0, 1)")
    out = kernels.wavelet_values_nd(
        np.atleast_1d(x_arr).reshape(-1, 1),
        np.array(idx.j, dtype=np.int64),
        np.array(idx.i, dtype=np.int64),
        np.array(idx.k, dtype=np.int64),
        b,
    )
    return float(out[0]) if x_arr.ndim == 0 else out.reshape(x_arr.shape)


def psi_eval_multi(idx: WaveletIndex, x):
    """Product wavelet value at one point or an array of points [N, D]."""
    x_arr = np.asarray(x, dtype=np.float64)
    single = x_arr.ndim == 1
    pts = x_arr.reshape(1, -1) if single else x_arr
    if pts.shape[1] != idx.dim:
        raise ValueError(f"point dimension {pts.shape[1]} != index dimension {idx.dim}")
    out = kernels.wavelet_values_nd(
        pts,
        np.array(idx.j, dtype=np.int64),
        np.array(idx.i, dtype=np.int64),
        np.array(idx.k, dtype=np.int64),
        idx.b,
    )
    return float(out[0]) if single else out


def scaled_wavelet_factor(idx: WaveletIndex, alpha: float) -> float:
    """Scale factor b^(-alpha |j|) turning the wavelet into its normalized
    smoothness-alpha version."""
    return float(idx.b) ** (-alpha * idx.total_resolution)


def integral_of_wavelet(idx: WaveletIndex) -> float:
    """1 for the constant wavelet, 0 as soon as any coordinate is active."""
    return 1.0 if not idx.active_coords() else 0.0


def indices_of_resolution(
    D: int,
    b: int,
    total: int | None = None,
    max_total: int | None = None,
    coordinate_cap: int | None = None,
) -> Iterator[WaveletIndex]:
    """Enumerate admissible indices with |j| = total or |j| <= max_total,
    optionally capping each j_t. Deterministic lexicographic order."""
    if (total is None) == (max_total is None):
        raise ValueError("specify exactly one of total / max_total")
    totals = [total] if total is not None else range(max_total + 1)
    for tot in totals:
        for j in _resolution_vectors(D, tot, coordinate_cap):
            i_ranges = [range(1) if jt == 0 else range(b) for jt in j]
            k_ranges = [range(1) if jt <= 1 else range(b ** (jt - 1)) for jt in j]
            for i in itertools.product(*i_ranges):
                for k in itertools.product(*k_ranges):
                    yield WaveletIndex(b=b, j=j, i=i, k=k)


def _resolution_vectors(D: int, total: int, cap: int | None) -> Iterator[MultiIndex]:
    from .basis import compositions

    caps = None if cap is None else (cap,) * D
    yield from compositions(total, D, min_per_part=0, caps=caps)


CoefficientMap = dict  # WaveletIndex -> float


def canonical_coefficients(f_cells: np.ndarray, b: int, j_max: int) -> CoefficientMap:
    """Canonical Haar coefficients <f, Psi> of a function given by its values
    on the uniform b-adic grid (one axis per coordinate, b^R cells each).

    Exact cell-sum inner products: the wavelet is constant on resolution-R
    cells whenever R >= j_max, which is required.
    """
    f_cells = np.asarray(f_cells, dtype=np.float64)
    D = f_cells.ndim
    n_cells = f_cells.shape[0]
    R = int(round(np.log(n_cells) / np.log(b)))
    if b**R != n_cells or any(sz != n_cells for sz in f_cells.shape):
        raise ValueError(f"grid must be b^R cells per axis, got shape {f_cells.shape}")
    if j_max > R:
        raise ValueError(f"grid resolution {R} is finer than no wavelet: need R >= j_max={j_max}")

    centers = (np.arange(n_cells) + 0.5) / n_cells
    cell_w = 1.0 / n_cells
    out: CoefficientMap = {}
    for idx in indices_of_resolution(D, b, max_total=j_max, coordinate_cap=j_max):
        coeff = f_cells
        for t in range(D):
            w = psi_eval_1d(idx.j[t], idx.i[t], idx.k[t], centers, b) * cell_w
            coeff = np.tensordot(coeff, w, axes=([0], [0]))
        out[idx] = float(coeff)
    return out


def haar_alpha_norm(coeffs: CoefficientMap, alpha: float) -> float:
    """sqrt(sum over indices of b^(2 alpha |j|) coeff^2), alpha > 1/2."""
    if alpha <= 0.5:
        raise ValueError(f"smoothness parameter must exceed 1/2, got {alpha}")
    acc = 0.0
    for idx, c in coeffs.items():
        acc += float(idx.b) ** (2.0 * alpha * idx.total_resolution) * c * c
    return float(np.sqrt(acc))


@dataclass(frozen=True)
class SpaceParams:
    alpha: float
    b: int
    D: int

    def __post_init__(self):
        if self.alpha <= 0.5:
            raise ValueError(f"smoothness parameter must exceed 1/2, got {self.alpha}")
        if self.b < 2 or self.D < 1:
            raise ValueError("need base >= 2 and dimension >= 1")
