"""Data behind the coefficient, error-convergence and path-decomposition plots."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .prediction import CoefficientTable, _coefficients, coeff_table, exact_error, past_boundary
from .quadrature import QuadratureSpec
from .simulate import TimeGrid, fbm_sample, xi_kernels
from .spectral import SpectralModel
from .svg import Figure


def coefficient_figure(tbl: CoefficientTable) -> Figure:
    fig = Figure(title=f"chaos coefficients r_j(t), H={tbl.hurst:g}, t={tbl.t:g}", xlabel="j", ylabel="r_j")
    idx = tbl.indices
    past = tbl.is_past
    fig.add(idx[past], tbl.r[past], label="past", style="stem", color="#1f77b4")
    fig.add(idx[~past], tbl.r[~past], label="future", style="stem", color="#d62728")
    return fig


@dataclass(frozen=True, eq=False)
class ErrorCurve:
    """Residual variance after keeping the ``k`` largest past coefficients."""

    hurst: float
    t: float
    k: np.ndarray
    residual: np.ndarray
    exact: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("k,residual_after_k_coeffs,exact\n")
        for k, r in zip(self.k, self.residual):
            buf.write(f"{k},{r:.17g},{self.exact:.17g}\n")
        return buf.getvalue()

    def figure(self) -> Figure:
        fig = Figure(title=f"prediction error vs number of past coefficients, H={self.hurst:g}, t={self.t:g}",
                     xlabel="k", ylabel="mean-square error")
        fig.add(self.k, self.residual, label="truncated predictor")
        fig.add([self.k[0], self.k[-1]], [self.exact, self.exact], label="exact error", style="dashed")
        return fig


def error_curve(m: SpectralModel, t: float, window: tuple[int, int], q: QuadratureSpec | None = None) -> ErrorCurve:
    """``|t|^2H - sum of the k largest squared past coefficients``, ``k = 0..#past``."""
    tbl = coeff_table(m, float(t), int(window[0]), int(window[1]), q or QuadratureSpec())
    past = np.sort(np.abs(tbl.r[tbl.is_past]))[::-1]
    # cumulative sums are formed in order of decreasing magnitude
    captured = np.concatenate(([0.0], np.cumsum(past**2)))
    residual = m.variance(t) - captured
    return ErrorCurve(m.hurst, float(t), np.arange(len(captured)), residual,
                      exact_error(m, t) if t >= 0 else 0.0)


@dataclass(frozen=True, eq=False)
class PathRender:
    """One simulated path split into its past-measurable and future parts."""

    hurst: float
    t: np.ndarray
    past: np.ndarray
    future: np.ndarray
    path: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.past + self.future

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,past_component,future_component,total\n")
        for t, p, f, s in zip(self.t, self.past, self.future, self.total):
            buf.write(f"{t:.17g},{p:.17g},{f:.17g},{s:.17g}\n")
        return buf.getvalue()

    def figure(self) -> Figure:
        fig = Figure(title=f"path decomposition, H={self.hurst:g}", xlabel="t", ylabel="value")
        fig.add(self.t, self.path, label="simulated path", color="#bbbbbb")
        fig.add(self.t, self.past, label="past component")
        fig.add(self.t, self.future, label="future component")
        fig.add(self.t, self.total, label="sum", style="dashed")
        return fig


def render_path(m: SpectralModel, window: tuple[int, int], grid: TimeGrid, seed: int,
                t_max: float = 2.0, stride: int = 4, q: QuadratureSpec | None = None) -> PathRender:
    """Split a simulated path into ``sum_{past j}`` and ``sum_{future j}`` of ``r_j(t) I(xi_j)``.

    The basis integrals ``I(xi_j)`` are computed once from the path on
    ``grid``; the components are evaluated at every ``stride``-th grid point
    with ``|t| <= t_max``.
    """
    q = q or QuadratureSpec()
    js = np.arange(int(window[0]), int(window[1]) + 1)
    path = fbm_sample(m, grid, seed)
    kernels = xi_kernels(m, js, grid, q)
    integrals = np.array([np.dot(k.values, np.diff(path.values)) for k in kernels])
    j_star = past_boundary(m, q)
    is_past = js <= j_star
    pts = grid.points
    zero = grid.zero_index
    sel = [i for i in range(len(pts)) if abs(pts[i]) <= t_max + 1e-12 and (i - zero) % stride == 0]
    times = pts[sel]
    past = np.zeros(len(sel))
    future = np.zeros(len(sel))
    for a, t in enumerate(times):
        r, _ = _coefficients(m, js, float(t), q)
        past[a] = np.dot(r[is_past], integrals[is_past])
        future[a] = np.dot(r[~is_past], integrals[~is_past])
    return PathRender(m.hurst, times, past, future, path.values[sel])
