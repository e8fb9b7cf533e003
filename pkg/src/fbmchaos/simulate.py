"""Exact fBm simulation, time-domain basis kernels and Monte Carlo checks.

Paths are drawn by Cholesky factorization of the covariance on the nonzero
grid points, with ``X(0) = 0`` inserted exactly. Normal variates come from a
Philox counter-based generator keyed by ``(seed, path_index)`` and
transformed by numpy's ``Generator.standard_normal`` (ziggurat), so every
path is reproducible on its own.

Time-domain kernels are stored as cell averages
``v_k = (W(t_{k+1}) - W(t_k)) / dt`` of ``W(s) = int_0^s xi_n``. For
``H > 1/2`` the functions ``xi_n`` have an integrable ``|s|^(1/2-H)``
singularity at the origin; cell averages stay finite, and the left-point sum
``sum_k v_k (X(t_{k+1}) - X(t_k))`` is the stochastic integral of the
piecewise-constant projection of ``xi_n``.
"""

from __future__ import annotations

import functools
import io
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DomainError, NumericalError
from .quadrature import QuadratureSpec, fourier_tail, grade_toward_zero, integrate_panels, phase_edges, algebraic_tail
from .spectral import SpectralModel, _xi_hat_fast, fbm_covariance

MAX_POINTS = 4096
PATH_BLOCK = 256
_ROW_CHUNK = 96


class SimulationError(NumericalError):
    """Covariance factorization failed."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``start + k * step``, ``k = 0..n``, containing the origin."""

    start: float
    step: float
    n: int

    def __post_init__(self):
        if self.n < 1 or not self.step > 0:
            raise DomainError("grid needs at least one positive step")
        k0 = -self.start / self.step
        if abs(k0 - round(k0)) > 1e-9 or not 0 <= round(k0) <= self.n:
            raise DomainError("grid must contain the origin")

    @classmethod
    def span(cls, lo: float, hi: float, n: int) -> "TimeGrid":
        """``n`` equal cells on ``[lo, hi]``."""
        if not hi > lo:
            raise DomainError(f"empty interval [{lo}, {hi}]")
        return cls(float(lo), (hi - lo) / n, int(n))

    @classmethod
    def from_points(cls, points) -> "TimeGrid":
        p = np.asarray(points, dtype=float)
        if p.ndim != 1 or len(p) < 2:
            raise DomainError("grid needs at least two points")
        d = np.diff(p)
        if np.max(np.abs(d - d[0])) > 1e-12 * max(1.0, np.max(np.abs(p))):
            raise DomainError("grid is not uniform")
        return cls(float(p[0]), float(d[0]), len(p) - 1)

    @property
    def zero_index(self) -> int:
        return int(round(-self.start / self.step))

    @property
    def points(self) -> np.ndarray:
        pts = self.start + self.step * np.arange(self.n + 1)
        pts[self.zero_index] = 0.0
        return pts

    @property
    def end(self) -> float:
        return float(self.points[-1])

    def index_of(self, t: float) -> int:
        k = (t - self.start) / self.step
        if abs(k - round(k)) > 1e-9 or not 0 <= round(k) <= self.n:
            raise DomainError(f"{t} is not a grid point")
        return int(round(k))


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Process values on a uniform grid, pinned to zero at the origin."""

    hurst: float
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n + 1,):
            raise DomainError("values do not match the grid")
        if v[self.grid.zero_index] != 0.0:
            raise DomainError("path must vanish at the origin")

    @property
    def times(self) -> np.ndarray:
        return self.grid.points

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,x\n")
        for t, x in zip(self.times, self.values):
            buf.write(f"{t:.17g},{x:.17g}\n")
        return buf.getvalue()


# Simulation ------------------------------------------------------------------


@functools.lru_cache(maxsize=2)
def _cholesky(hurst: float, grid: TimeGrid) -> np.ndarray:
    if grid.n > MAX_POINTS:
        raise DomainError(f"exact simulation is limited to {MAX_POINTS} steps")
    t = np.delete(grid.points, grid.zero_index)
    two_h = 2 * hurst
    at = np.abs(t) ** two_h
    cov = 0.5 * (at[:, None] + at[None, :] - np.abs(t[:, None] - t[None, :]) ** two_h)
    scale = float(np.max(np.diag(cov)))
    for jitter in (0.0, 1e-14, 1e-12, 1e-10):
        try:
            return scipy.linalg.cholesky(cov + jitter * scale * np.eye(len(t)), lower=True)
        except np.linalg.LinAlgError:
            continue
    w, vecs = np.linalg.eigh(cov)
    if w.min() < -1e-8 * scale:
        raise SimulationError("covariance matrix is not positive semi-definite", min_eigenvalue=float(w.min()))
    # Square-root factor from the clipped spectrum.
    return vecs * np.sqrt(np.clip(w, 0.0, None))


def _normals(seed: int, first: int, count: int, dim: int) -> np.ndarray:
    out = np.empty((count, dim))
    for i in range(count):
        ss = np.random.SeedSequence([int(seed), first + i])
        out[i] = np.random.Generator(np.random.Philox(ss)).standard_normal(dim)
    return out


def _path_block(m: SpectralModel, grid: TimeGrid, seed: int, block: int) -> np.ndarray:
    factor = _cholesky(m.hurst, grid)
    z = _normals(seed, block * PATH_BLOCK, PATH_BLOCK, factor.shape[1])
    inner = z @ factor.T
    return np.insert(inner, grid.zero_index, 0.0, axis=1)


def fbm_paths(m: SpectralModel, grid: TimeGrid, n_paths: int, seed: int, first: int = 0) -> np.ndarray:
    """``n_paths`` exact fBm paths on ``grid`` as rows, path indices ``first..``.

    Path ``i`` depends only on ``(seed, i)``: variates are drawn per path and
    transformed in fixed blocks of ``PATH_BLOCK`` paths.
    """
    if n_paths < 0:
        raise DomainError("n_paths must be nonnegative")
    out = np.empty((n_paths, grid.n + 1))
    i = 0
    while i < n_paths:
        idx = first + i
        block, offset = divmod(idx, PATH_BLOCK)
        take = min(PATH_BLOCK - offset, n_paths - i)
        out[i : i + take] = _path_block(m, grid, seed, block)[offset : offset + take]
        i += take
    return out


def fbm_sample(m: SpectralModel, grid: TimeGrid, seed: int, path_index: int = 0) -> SamplePath:
    """One exact fBm path; identical to row ``path_index`` of :func:`fbm_paths`."""
    values = fbm_paths(m, grid, 1, seed, first=path_index)[0]
    return SamplePath(m.hurst, grid, values)


def increment_covariance(hurst: float, step: float, n: int) -> np.ndarray:
    """First column of the Toeplitz covariance of ``n`` fBm increments of length ``step``."""
    k = np.arange(n, dtype=float)
    two_h = 2 * hurst
    return 0.5 * step**two_h * (np.abs(k + 1) ** two_h + np.abs(k - 1) ** two_h - 2 * k**two_h)


# Time-domain kernels ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TimeKernel:
    """Cell-average samples of a deterministic integrand on a grid.

    ``values[k]`` applies to the cell ``[t_k, t_{k+1})``. ``tail_energy`` bounds
    the squared L2 error caused by the frequency integration, relative to the
    kernel's squared L2 norm on the grid.
    """

    index: int | None
    hurst: float
    grid: TimeGrid
    values: np.ndarray
    tail_energy: float = 0.0

    @classmethod
    def from_function(cls, f, grid: TimeGrid, hurst: float = 0.5) -> "TimeKernel":
        """Left-point samples ``f(t_k)`` of an ordinary function."""
        return cls(None, hurst, grid, np.asarray(f(grid.points[:-1]), dtype=float))

    def energy(self) -> float:
        """``||k||^2_Delta`` of the piecewise-constant kernel under the fBm increments."""
        c = increment_covariance(self.hurst, self.grid.step, self.grid.n)
        return float(self.values @ scipy.linalg.matmul_toeplitz(c, self.values))


def xi_antiderivative(m: SpectralModel, ns, s, q: QuadratureSpec | None = None):
    """``W_n(s) = int_0^s xi_n(u) du`` for every ``n`` in ``ns`` and ``s`` in ``s``.

    ``W_n(s) = (1/2pi) int xi_hat_n(g) conj(z_s(g)) dg`` by Parseval; the
    integrand decays like ``|g|^(H-5/2)``. Returns ``(values, errors)`` of
    shape ``(len(ns), len(s))``.
    """
    q = q or QuadratureSpec()
    ns = np.atleast_1d(np.asarray(ns, dtype=int))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    values = np.zeros((len(ns), len(s)))
    errors = np.zeros((len(ns), len(s)))
    nonzero = np.flatnonzero(s != 0)
    for start in range(0, len(nonzero), _ROW_CHUNK):
        cols = nonzero[start : start + _ROW_CHUNK]
        v, e = _antiderivative_chunk(m, ns, s[cols], q)
        values[:, cols] = v
        errors[:, cols] = e
    return values, errors


def _antiderivative_chunk(m, ns, s, q):
    part = q.scaled(0.25)
    nn = np.repeat(ns, len(s)).astype(float)[:, None]
    ss = np.tile(s, len(ns))[:, None]
    order = float(np.max(np.abs(ns + 1)))
    shift = float(np.max(np.abs(s)))
    cut = max(q.gamma_max, math.sqrt(20.0 * order / float(np.min(np.abs(s)))) if order else q.gamma_max)
    cut = min(cut, 8.0 * q.gamma_max)

    n_col = ns.astype(float)[:, None]
    s_col = s[:, None]

    # W = (1/pi) Re int_0^inf xi_hat_n(g) (exp(-i g s) - 1) / (-i g) dg,
    # evaluated as an outer product over (n, s) on shared nodes.
    def full(g):
        xi = _xi_hat_fast(m, n_col, g) / math.pi
        z = np.expm1(-1j * g * s_col) / (-1j * g)
        return (xi[:, None, :] * z[None, :, :]).reshape(-1, g.shape[-1])

    edges = grade_toward_zero(phase_edges(lambda g: shift * g + 2 * order * np.arctan(g), 0.0, cut))
    head = integrate_panels(full, edges, part)

    def osc(g):
        return _xi_hat_fast(m, nn, g) / (-1j * g) / math.pi

    tail_osc = fourier_tail(osc, -ss[:, 0], cut, part)

    def flat(g):
        return -_xi_hat_fast(m, n_col, g) / (-1j * g) / math.pi

    tail_flat = algebraic_tail(flat, cut, part, rate=2.0 * order)
    flat_val = np.repeat(tail_flat.value, len(s))
    flat_err = np.repeat(tail_flat.error, len(s))
    total = head.value + tail_osc.value + flat_val
    err = head.error + tail_osc.error + flat_err
    shape = (len(ns), len(s))
    return np.real(total).reshape(shape), err.reshape(shape)


def xi_time(m: SpectralModel, n: int, grid: TimeGrid, q: QuadratureSpec | None = None) -> TimeKernel:
    """Basis function ``xi_n`` on ``grid`` as cell averages."""
    return xi_kernels(m, [n], grid, q)[0]


def xi_kernels(m: SpectralModel, ns, grid: TimeGrid, q: QuadratureSpec | None = None) -> list[TimeKernel]:
    """Cell-average kernels for several indices sharing one grid."""
    q = q or QuadratureSpec()
    pts = grid.points
    w, err = xi_antiderivative(m, ns, pts, q)
    cells = np.diff(w, axis=1) / grid.step
    cell_err = (err[:, 1:] + err[:, :-1]) / grid.step
    out = []
    for i, n in enumerate(np.atleast_1d(ns)):
        norm2 = float(np.sum(cells[i] ** 2) * grid.step)
        lost = float(np.sum(cell_err[i] ** 2) * grid.step)
        rel = lost / norm2 if norm2 > 0 else 0.0
        if rel > 1e-4:
            raise NumericalError("frequency integration too inaccurate for kernel", index=int(n), tail_energy=rel)
        out.append(TimeKernel(int(n), m.hurst, grid, cells[i], rel))
    return out


# Pathwise integrals and Monte Carlo -------------------------------------------


def pathwise_integral(p: SamplePath, k: TimeKernel) -> float:
    """Left-point Riemann-Stieltjes sum ``sum_k v_k (X(t_{k+1}) - X(t_k))``."""
    if p.grid != k.grid:
        raise DomainError("path and kernel live on different grids")
    return float(np.dot(k.values, np.diff(p.values)))


def pathwise_integrals(paths: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """Integrals of every kernel row against every path row: ``(paths, kernels)``."""
    return np.diff(paths, axis=1) @ np.asarray(kernels).T


def discretized_gram(kernels: list[TimeKernel]) -> np.ndarray:
    """Exact covariance of the pathwise integrals of piecewise-constant kernels."""
    grid = kernels[0].grid
    c = increment_covariance(kernels[0].hurst, grid.step, grid.n)
    v = np.array([k.values for k in kernels])
    sv = scipy.linalg.matmul_toeplitz(c, v.T)
    return v @ sv


@dataclass(frozen=True, eq=False)
class GramEstimate:
    """Monte Carlo second moments of basis integrals with standard errors."""

    indices: tuple[int, ...]
    matrix: np.ndarray
    stderr: np.ndarray
    expected: np.ndarray
    n_paths: int

    def z_scores(self, target: np.ndarray | None = None) -> np.ndarray:
        target = np.eye(len(self.indices)) if target is None else target
        return (self.matrix - target) / self.stderr

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("i,j,empirical,stderr,discretized\n")
        for a, i in enumerate(self.indices):
            for b, j in enumerate(self.indices):
                buf.write(f"{i},{j},{self.matrix[a, b]:.17g},{self.stderr[a, b]:.17g},{self.expected[a, b]:.17g}\n")
        return buf.getvalue()


def _iterate_paths(m, grid, n_paths, seed):
    done = 0
    while done < n_paths:
        take = min(PATH_BLOCK, n_paths - done)
        yield fbm_paths(m, grid, take, seed, first=done)
        done += take


def mc_gram(m: SpectralModel, window: tuple[int, int], grid: TimeGrid, n_paths: int, seed: int,
            q: QuadratureSpec | None = None) -> GramEstimate:
    """Empirical Gram matrix of ``I(xi_n)`` for ``n`` in ``window`` over simulated paths."""
    lo, hi = int(window[0]), int(window[1])
    if hi < lo or hi - lo + 1 > 17:
        raise DomainError("window must hold between 1 and 17 indices")
    if n_paths < 1000:
        raise DomainError("mc_gram needs at least 1000 paths")
    ns = list(range(lo, hi + 1))
    kernels = xi_kernels(m, ns, grid, q)
    v = np.array([k.values for k in kernels])
    k = len(ns)
    s1 = np.zeros((k, k))
    s2 = np.zeros((k, k))
    for block in _iterate_paths(m, grid, n_paths, seed):
        y = pathwise_integrals(block, v)
        prod = y[:, :, None] * y[:, None, :]
        s1 += prod.sum(0)
        s2 += (prod**2).sum(0)
    mean = s1 / n_paths
    var = np.maximum(s2 / n_paths - mean**2, 0.0)
    se = np.sqrt(var / (n_paths - 1))
    return GramEstimate(tuple(ns), mean, se, discretized_gram(kernels), n_paths)


@dataclass(frozen=True)
class PredictionReport:
    """Monte Carlo check of the chaos predictor of ``X(t)``."""

    hurst: float
    t: float
    n_paths: int
    ms_residual: float
    ms_residual_se: float
    exact_error: float
    discretized_error: float
    predictor_energy: float
    max_abs_z: float

    @property
    def ratio(self) -> float:
        return self.ms_residual / self.exact_error if self.exact_error else math.nan

    def to_csv(self) -> str:
        return (
            "n_paths,ms_residual,exact_error,ratio,ms_residual_se,discretized_error,predictor_energy,max_abs_corr_z\n"
            f"{self.n_paths},{self.ms_residual:.17g},{self.exact_error:.17g},{self.ratio:.17g},"
            f"{self.ms_residual_se:.17g},{self.discretized_error:.17g},{self.predictor_energy:.17g},"
            f"{self.max_abs_z:.17g}\n"
        )


def predictor_kernel(m: SpectralModel, t: float, window: tuple[int, int], grid: TimeGrid,
                     q: QuadratureSpec | None = None) -> np.ndarray:
    """Cell kernel of ``sum_{past j} r_j(t) xi_j`` restricted to cells left of 0."""
    from .prediction import coeff_table

    q = q or QuadratureSpec()
    tbl = coeff_table(m, float(t), int(window[0]), int(window[1]), q)
    past = [int(j) for j in tbl.indices[tbl.is_past]]
    kern = np.zeros(grid.n)
    if not past:
        return kern
    zero = grid.zero_index
    left = TimeGrid(grid.start, grid.step, zero) if zero > 0 else None
    if left is None:
        return kern
    ks = xi_kernels(m, past, left, q)
    for j, k in zip(past, ks):
        kern[:zero] += tbl.coefficient(j) * k.values
    return kern


def mc_prediction_experiment(m: SpectralModel, t: float, window: tuple[int, int], grid: TimeGrid,
                             n_paths: int, seed: int, q: QuadratureSpec | None = None,
                             probes: int = 16) -> PredictionReport:
    """Predict ``X(t)`` from samples at ``s <= 0`` on simulated paths.

    The predictor is ``sum_{past j} r_j(t) I(xi_j)`` with the integrals taken
    over the observed part of the grid. Reports the mean-square residual, the
    exact discretized error of the same linear functional, and the largest
    correlation z-score between the residual and ``probes`` past samples.
    """
    from .prediction import exact_error

    if t <= 0:
        raise DomainError("prediction horizon must be positive")
    length = -grid.start
    if length < 8 * max(1.0, t) - 1e-12:
        raise DomainError("grid must reach back to -8 max(1, t)")
    it = grid.index_of(t)
    kern = predictor_kernel(m, t, window, grid, q)
    zero = grid.zero_index
    probe_idx = np.unique(np.linspace(0, zero - 1, probes).round().astype(int))
    res_sum = 0.0
    res_sq = 0.0
    res4 = 0.0
    pred_sq = 0.0
    cross = np.zeros(len(probe_idx))
    probe_sq = np.zeros(len(probe_idx))
    cross_sq = np.zeros(len(probe_idx))
    for block in _iterate_paths(m, grid, n_paths, seed):
        pred = np.diff(block, axis=1) @ kern
        res = block[:, it] - pred
        res_sum += res.sum()
        res_sq += (res**2).sum()
        res4 += (res**4).sum()
        pred_sq += (pred**2).sum()
        xp = block[:, probe_idx]
        cross += (res[:, None] * xp).sum(0)
        cross_sq += ((res[:, None] * xp) ** 2).sum(0)
        probe_sq += (xp**2).sum(0)
    n = n_paths
    ms = res_sq / n
    ms_se = math.sqrt(max(res4 / n - ms**2, 0.0) / (n - 1))
    mean_cross = cross / n
    se_cross = np.sqrt(np.maximum(cross_sq / n - mean_cross**2, 0.0) / (n - 1))
    z = np.abs(mean_cross) / np.where(se_cross > 0, se_cross, np.inf)
    # Exact error of the same discretized linear functional.
    full = np.zeros(grid.n)
    full[zero:it] = 1.0
    diff_kernel = full - kern
    c = increment_covariance(m.hurst, grid.step, grid.n)
    disc = float(diff_kernel @ scipy.linalg.matmul_toeplitz(c, diff_kernel))
    return PredictionReport(
        hurst=m.hurst, t=float(t), n_paths=n, ms_residual=ms, ms_residual_se=ms_se,
        exact_error=exact_error(m, t), discretized_error=disc, predictor_energy=pred_sq / n,
        max_abs_z=float(z.max()) if len(z) else 0.0,
    )


def covariance_check(m: SpectralModel, grid: TimeGrid, n_paths: int, seed: int, points: int = 16):
    """Empirical covariance on a subgrid versus the closed form, as z-scores."""
    idx = np.unique(np.linspace(0, grid.n, points).round().astype(int))
    idx = idx[idx != grid.zero_index]
    t = grid.points[idx]
    s1 = np.zeros((len(idx), len(idx)))
    s2 = np.zeros_like(s1)
    for block in _iterate_paths(m, grid, n_paths, seed):
        x = block[:, idx]
        prod = x[:, :, None] * x[:, None, :]
        s1 += prod.sum(0)
        s2 += (prod**2).sum(0)
    mean = s1 / n_paths
    se = np.sqrt(np.maximum(s2 / n_paths - mean**2, 0.0) / (n_paths - 1))
    exact = np.array([[fbm_covariance(m, a, b) for b in t] for a in t])
    return t, mean, se, exact
