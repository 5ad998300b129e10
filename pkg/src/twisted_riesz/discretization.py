"""Grids, sampled fields and discretized integral operators.

Operators act by weighted quadrature, (Tf)(x_i) = sum_j w_j K(x_i, y_j) f(y_j),
and all L^p norms use the same weights.  Besides dense matrices there are two
structured representations:

* ``TwistedConvolution`` for kernels F(z - z') exp(i beta (z2 z1' - z1 z2')) on a
  uniform square grid, applied in O(N^3 log N) per product without forming the
  N^2 x N^2 matrix;
* ``LowRankOperator`` for kernels sum_k c_k u_k(x) v_k(y).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

DEFAULT_MEMORY_CAP = 1 << 30  # bytes for any single dense matrix


class MemoryCapExceededError(MemoryError):
    pass


def worker_count() -> int:
    """Thread count for FFT work, capped by TWISTED_RIESZ_THREADS."""
    env = os.environ.get("TWISTED_RIESZ_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class Grid2D:
    """Cell-centred rectangular grid with nx x ny nodes.

    Node (p, q) sits at (x0 + (p + 1/2) hx, y0 + (q + 1/2) hy).  Fields are
    stored as arrays of shape (nx, ny).
    """

    x0: float
    x1: float
    y0: float
    y1: float
    nx: int
    ny: int

    @classmethod
    def square(cls, half_width: float, n: int, center=(0.0, 0.0)) -> "Grid2D":
        cx, cy = center
        return cls(cx - half_width, cx + half_width, cy - half_width, cy + half_width, n, n)

    @property
    def hx(self) -> float:
        return (self.x1 - self.x0) / self.nx

    @property
    def hy(self) -> float:
        return (self.y1 - self.y0) / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + (np.arange(self.nx) + 0.5) * self.hx

    @property
    def ys(self) -> np.ndarray:
        return self.y0 + (np.arange(self.ny) + 0.5) * self.hy

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xs, self.ys, indexing="ij")

    def points(self) -> np.ndarray:
        x, y = self.mesh()
        return np.stack([x.ravel(), y.ravel()], axis=-1)

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.size, self.cell_area)

    def refine(self, factor: int = 2) -> "Grid2D":
        return Grid2D(self.x0, self.x1, self.y0, self.y1, self.nx * factor, self.ny * factor)

    def describe(self) -> dict:
        return {"x0": self.x0, "x1": self.x1, "y0": self.y0, "y1": self.y1, "nx": self.nx, "ny": self.ny}


@dataclass(frozen=True)
class RadialGrid:
    """Composite Gauss-Legendre nodes on [0, r_max] with the planar measure 2 pi r dr."""

    r_max: float
    panels: int
    order: int = 16

    @property
    def nodes(self) -> np.ndarray:
        from .quadrature import composite_nodes

        return composite_nodes(np.linspace(0.0, self.r_max, self.panels + 1), self.order)[0]

    @property
    def weights(self) -> np.ndarray:
        from .quadrature import composite_nodes

        r, w = composite_nodes(np.linspace(0.0, self.r_max, self.panels + 1), self.order)
        return 2.0 * math.pi * r * w

    @property
    def size(self) -> int:
        return self.panels * self.order

    def describe(self) -> dict:
        return {"r_max": self.r_max, "panels": self.panels, "order": self.order}


@dataclass
class SampledField:
    """Complex samples of a function on a ``Grid2D`` (array of shape grid.shape)."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex).reshape(self.grid.shape)

    @classmethod
    def from_function(cls, grid: Grid2D, fn) -> "SampledField":
        x, y = grid.mesh()
        return cls(grid, fn(x, y))

    def lp_norm(self, p: float) -> float:
        return lp_norm(self.values.ravel(), self.grid.weights, p)

    def __sub__(self, other: "SampledField") -> "SampledField":
        return SampledField(self.grid, self.values - other.values)

    def __add__(self, other: "SampledField") -> "SampledField":
        return SampledField(self.grid, self.values + other.values)

    def __mul__(self, c) -> "SampledField":
        return SampledField(self.grid, self.values * c)

    __rmul__ = __mul__


def lp_norm(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    a = np.abs(values)
    if math.isinf(p):
        return float(a.max()) if a.size else 0.0
    m = a.max() if a.size else 0.0
    if m == 0.0:
        return 0.0
    return float(m * (np.sum(weights * (a / m) ** p)) ** (1.0 / p))


# ---------------------------------------------------------------------------
# operators


class DiscreteOperator:
    """Base class: target/source grids with quadrature weights and a matvec."""

    src_weights: np.ndarray
    tgt_weights: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.tgt_weights), len(self.src_weights))

    def matvec(self, f: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def rmatvec(self, g: np.ndarray) -> np.ndarray:
        """Adjoint for the weighted inner products: <Tf, g>_tgt = <f, T* g>_src."""
        raise NotImplementedError  # pragma: no cover - abstract

    def adjoint(self) -> "DiscreteOperator":
        return _AdjointOperator(self)

    def apply(self, f: SampledField) -> SampledField:
        grid = getattr(self, "tgt_grid", None)
        return SampledField(grid, self.matvec(f.values.ravel()))

    def inner(self, a: np.ndarray, b: np.ndarray, side: str = "tgt") -> complex:
        w = self.tgt_weights if side == "tgt" else self.src_weights
        return complex(np.sum(w * a * np.conj(b)))

    def to_dense(self) -> np.ndarray:
        """Kernel matrix K[i, j] (without weights)."""
        n = self.shape[1]
        out = np.empty(self.shape, dtype=complex)
        for j in range(n):
            e = np.zeros(n, dtype=complex)
            e[j] = 1.0 / self.src_weights[j]
            out[:, j] = self.matvec(e)
        return out

    def scaled(self, c: complex) -> "DiscreteOperator":
        return _ScaledOperator(self, c)


class _ScaledOperator(DiscreteOperator):
    def __init__(self, base: DiscreteOperator, c: complex):
        self.base, self.c = base, c
        self.src_weights, self.tgt_weights = base.src_weights, base.tgt_weights
        self.src_grid = getattr(base, "src_grid", None)
        self.tgt_grid = getattr(base, "tgt_grid", None)

    def matvec(self, f):
        return self.c * self.base.matvec(f)

    def rmatvec(self, g):
        return np.conj(self.c) * self.base.rmatvec(g)


class _AdjointOperator(DiscreteOperator):
    def __init__(self, base: DiscreteOperator):
        self.base = base
        self.src_weights, self.tgt_weights = base.tgt_weights, base.src_weights
        self.src_grid = getattr(base, "tgt_grid", None)
        self.tgt_grid = getattr(base, "src_grid", None)

    def matvec(self, f):
        return self.base.rmatvec(f)

    def rmatvec(self, g):
        return self.base.matvec(g)

    def adjoint(self):
        return self.base


class DenseOperator(DiscreteOperator):
    """Kernel matrix K (target x source) applied with source quadrature weights."""

    def __init__(self, matrix: np.ndarray, src_weights, tgt_weights, src_grid=None, tgt_grid=None):
        self.matrix = np.asarray(matrix, dtype=complex)
        self.src_weights = np.asarray(src_weights, dtype=float)
        self.tgt_weights = np.asarray(tgt_weights, dtype=float)
        self.src_grid, self.tgt_grid = src_grid, tgt_grid
        if self.matrix.shape != (len(self.tgt_weights), len(self.src_weights)):
            raise ValueError("matrix shape does not match the weights")

    @classmethod
    def on_grids(cls, matrix, src_grid, tgt_grid) -> "DenseOperator":
        return cls(matrix, src_grid.weights, tgt_grid.weights, src_grid, tgt_grid)

    @classmethod
    def diagonal(cls, values, weights) -> "DenseOperator":
        """Multiplication by ``values`` (kernel diag(values / w))."""
        weights = np.asarray(weights, dtype=float)
        return cls(np.diag(np.asarray(values, dtype=complex) / weights), weights, weights)

    def matvec(self, f):
        return self.matrix @ (self.src_weights * np.asarray(f))

    def rmatvec(self, g):
        return self.matrix.conj().T @ (self.tgt_weights * np.asarray(g))

    def to_dense(self):
        return self.matrix

    def abs_row_sums(self) -> np.ndarray:
        return np.abs(self.matrix) @ self.src_weights


class LowRankOperator(DiscreteOperator):
    """Kernel sum_k core_k left[i, k] right[j, k]."""

    def __init__(self, left, core, right, src_weights, tgt_weights, src_grid=None, tgt_grid=None):
        self.left = np.asarray(left)
        self.core = np.asarray(core, dtype=complex)
        self.right = np.asarray(right)
        self.src_weights = np.asarray(src_weights, dtype=float)
        self.tgt_weights = np.asarray(tgt_weights, dtype=float)
        self.src_grid, self.tgt_grid = src_grid, tgt_grid

    def matvec(self, f):
        return self.left @ (self.core * (self.right.T @ (self.src_weights * np.asarray(f))))

    def rmatvec(self, g):
        return np.conj(self.right) @ (np.conj(self.core) * (self.left.conj().T @ (self.tgt_weights * np.asarray(g))))

    def to_dense(self):
        return (self.left * self.core[None, :]) @ self.right.T

    def abs_row_sums(self, chunk: int = 512) -> np.ndarray:
        out = np.empty(self.left.shape[0])
        for i in range(0, self.left.shape[0], chunk):
            rows = (self.left[i : i + chunk] * self.core[None, :]) @ self.right.T
            out[i : i + chunk] = np.abs(rows) @ self.src_weights
        return out


class TwistedConvolution(DiscreteOperator):
    """Kernel F(z - z') exp(i beta (z2 z1' - z1 z2')) on a square-cell grid.

    ``table[a + nx - 1, b + ny - 1] = F(a hx, b hy)`` for the offsets
    a in (-nx, nx), b in (-ny, ny).  Writing z' = z - d the kernel becomes
    F(d) exp(i beta (z1 d2 - z2 d1)), so

        Tf(p, q) = w sum_b e^{i beta x_p b h} sum_a [F(a, b) e^{-i beta y_q a h}] f(p - a, q - b),

    a batch of one-dimensional convolutions along p for every offset b.
    """

    def __init__(self, grid: Grid2D, table: np.ndarray, beta: float, *, cache_bytes: int = 600 << 20):
        if not math.isclose(grid.hx, grid.hy, rel_tol=1e-12):
            raise ValueError("twisted convolution needs square cells")
        nx, ny = grid.shape
        if table.shape != (2 * nx - 1, 2 * ny - 1):
            raise ValueError("offset table has the wrong shape")
        self.grid = self.src_grid = self.tgt_grid = grid
        self.table = np.asarray(table, dtype=complex)
        self.beta = float(beta)
        self.src_weights = self.tgt_weights = grid.weights
        self._len = sfft.next_fast_len(3 * nx - 2)
        self._cache_bytes = cache_bytes
        self._kernel_fft = None

    @classmethod
    def from_radial(cls, grid: Grid2D, radial_fn, beta: float, **kw) -> "TwistedConvolution":
        """Build the table from F(d) = radial_fn(|d|^2), evaluated once per distinct |d|^2."""
        nx, ny = grid.shape
        h = grid.hx
        a = np.arange(-(nx - 1), nx)
        b = np.arange(-(ny - 1), ny)
        ia = np.abs(a)[:, None] ** 2 + np.abs(b)[None, :] ** 2
        keys, inv = np.unique(ia.ravel(), return_inverse=True)
        vals = np.asarray(radial_fn(keys.astype(float) * h * h), dtype=complex)
        return cls(grid, vals[inv].reshape(ia.shape), beta, **kw)

    def _kernel_spectra(self, table, sign, rows: slice = slice(None)):
        """FFT along a of F(a, b) e^{-i beta y_q a h} for every q and the offsets b in ``rows``."""
        nx, ny = self.grid.shape
        h = self.grid.hx
        a = np.arange(-(nx - 1), nx)
        ys = self.grid.ys
        mod = np.exp(-1j * sign * self.beta * h * ys[:, None] * a[None, :])  # (ny, 2nx-1)
        # k[b, q, a] = F(a, b) * mod[q, a]
        k = table.T[rows, None, :] * mod[None, :, :]
        return sfft.fft(k, n=self._len, axis=-1, workers=worker_count())

    def _spectra(self):
        """All kernel spectra when they fit the cache budget, else None (built blockwise on use)."""
        if self._kernel_fft is not None:
            return self._kernel_fft
        nx, ny = self.grid.shape
        nbytes = (2 * ny - 1) * ny * self._len * 16
        if nbytes > self._cache_bytes:
            return None
        self._kernel_fft = self._kernel_spectra(self.table, 1.0)
        return self._kernel_fft

    def _apply(self, f, spectra, table_sign):
        nx, ny = self.grid.shape
        h = self.grid.hx
        w = self.grid.cell_area
        f = np.asarray(f, dtype=complex).reshape(nx, ny)
        # F_f[q'', kappa]: FFT along p of column q''
        fhat = sfft.fft(f.T, n=self._len, axis=-1, workers=worker_count())
        xs = self.grid.xs
        out = np.zeros((nx, ny), dtype=complex)
        block = max(1, self._cache_bytes // (ny * self._len * 16))
        blk0, blk = 0, spectra
        for ib, b in enumerate(range(-(ny - 1), ny)):
            q_lo, q_hi = max(0, b), min(ny, ny + b)
            if q_lo >= q_hi:
                continue
            if spectra is None and not blk0 <= ib < blk0 + (0 if blk is None else len(blk)):
                blk0, blk = ib, self._kernel_spectra(self.table, 1.0, slice(ib, ib + block))
            prod = blk[ib - (0 if spectra is not None else blk0), q_lo:q_hi, :] * fhat[q_lo - b : q_hi - b, :]
            conv = sfft.ifft(prod, axis=-1, workers=worker_count())[:, nx - 1 : 2 * nx - 1]
            out[:, q_lo:q_hi] += np.exp(1j * table_sign * self.beta * xs * b * h)[:, None] * conv.T
        return w * out.ravel()

    def matvec(self, f):
        return self._apply(f, self._spectra(), 1.0)

    def rmatvec(self, g):
        adj = self._adjoint_op()
        return adj.matvec(g)

    def _adjoint_op(self) -> "TwistedConvolution":
        if getattr(self, "_adj", None) is None:
            # conj K(z, z') as a kernel in (z', z) is conj F(-d') with the same twist
            table = np.conj(self.table[::-1, ::-1])
            self._adj = TwistedConvolution(self.grid, table, self.beta, cache_bytes=self._cache_bytes)
        return self._adj

    def adjoint(self):
        return self._adjoint_op()

    def dense_kernel(self) -> np.ndarray:
        pts = self.grid.points()
        nx, ny = self.grid.shape
        p = np.arange(nx).repeat(ny)
        q = np.tile(np.arange(ny), nx)
        da = p[:, None] - p[None, :] + nx - 1
        db = q[:, None] - q[None, :] + ny - 1
        z, zp = pts[:, None, :], pts[None, :, :]
        twist = np.exp(1j * self.beta * (z[..., 1] * zp[..., 0] - z[..., 0] * zp[..., 1]))
        return self.table[da, db] * twist

    def to_dense(self):
        return self.dense_kernel()

    def abs_row_sums(self) -> np.ndarray:
        """sum_j w |K(z_i, z_j)|; the twist has modulus one so this is a plain convolution."""
        nx, ny = self.grid.shape
        from scipy.signal import fftconvolve

        ones = np.ones((nx, ny))
        full = fftconvolve(ones, np.abs(self.table), mode="full")
        # output (p, q) collects offsets a = p - p', b = q - q'
        return self.grid.cell_area * full[nx - 1 : 2 * nx - 1, ny - 1 : 2 * ny - 1].ravel()


def dense_bytes(n_tgt: int, n_src: int) -> int:
    return 16 * n_tgt * n_src


def discretize(kernel, src_grid, tgt_grid, *, memory_cap: int = DEFAULT_MEMORY_CAP, chunk: int = 1024) -> DenseOperator:
    """Dense operator with entries kernel(z_i, z'_j) on the given grids.

    ``kernel`` takes arrays of target points (m, 1, 2) and source points (1, n, 2)
    and returns the (m, n) block of kernel values.
    """
    src_pts = _points(src_grid)
    tgt_pts = _points(tgt_grid)
    nbytes = dense_bytes(len(tgt_pts), len(src_pts))
    if nbytes > memory_cap:
        raise MemoryCapExceededError(f"dense matrix needs {nbytes} bytes, cap is {memory_cap}")
    mat = np.empty((len(tgt_pts), len(src_pts)), dtype=complex)
    for i in range(0, len(tgt_pts), chunk):
        mat[i : i + chunk] = kernel(tgt_pts[i : i + chunk, None, :], src_pts[None, :, :])
    return DenseOperator(mat, src_grid.weights, tgt_grid.weights, src_grid, tgt_grid)


def _points(grid) -> np.ndarray:
    if isinstance(grid, RadialGrid):
        r = grid.nodes
        return np.stack([r, np.zeros_like(r)], axis=-1)
    return grid.points()
