"""Chaos coefficients of fBm values, past/future split and prediction error.

``X(t) = sum_j r_j(t) I(xi_j)`` with ``r_j(t) = (1_t, xi_j)_Delta``. The basis
variables ``I(xi_j)`` are either measurable with respect to the past
``{X(s), s <= 0}`` or independent of it, so the best predictor of ``X(t)``
keeps the past terms and the prediction error is the energy of the rest.

Which indices are "past" is decided by probing: a basis element belongs to
the past when it correlates with some ``X(s)``, ``s < 0``. With the
normalization ``xi_hat_j ~ e_{j+1}`` this yields the half-line ``j <= -2``.
"""

from __future__ import annotations

import functools
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .hermite_chaos import ChaosExpansion, MultiIndex, PastSet, chaos_condition, wick_square
from .quadrature import QuadratureSpec
from .spectral import SpectralModel, gamma_fn, indicator_transform, inner_product_delta, xi_hat_function

PROBE_TIMES = (-0.25, -0.5, -1.0, -2.0, -4.0)
PAST_THRESHOLD = 1e-3
AMBIGUOUS_THRESHOLD = 1e-4
CLASSIFY_BAND = 8
MAX_WINDOW = 4096
_BATCH = 64


class ClassificationError(NumericalError):
    """Probe correlations do not separate past from future cleanly."""


def _batches(js: np.ndarray):
    """Deterministic partition of indices into batches of similar oscillation."""
    order = np.lexsort((js, np.abs(js + 1)))
    return [order[k : k + _BATCH] for k in range(0, len(js), _BATCH)]


def _coefficients(m: SpectralModel, js: np.ndarray, t: float, q: QuadratureSpec, workers: int = 1):
    js = np.asarray(js, dtype=int)
    values = np.zeros(len(js))
    errors = np.zeros(len(js))
    if t == 0 or len(js) == 0:
        return values, errors
    z = indicator_transform(t)
    parts = _batches(js)

    def run(idx):
        res = inner_product_delta(z, xi_hat_function(m, js[idx]), m, q)
        return np.atleast_1d(res.value), np.atleast_1d(res.error)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, parts))
    else:
        results = [run(idx) for idx in parts]
    for idx, (v, e) in zip(parts, results):
        values[idx] = v
        errors[idx] = e
    return values, errors


def coeff_r(m: SpectralModel, j: int, t: float, q: QuadratureSpec | None = None) -> tuple[float, float]:
    """``r_j(t) = (1_t, xi_j)_Delta`` and its quadrature error estimate.

    Written out, ``r_j(t) = sqrt(C_H) int z_t(g) conj(e_{j+1}(g))
    exp(-i pi (2H-1)/4 sign g) |g|^(1/2-H) dg`` with
    ``z_t(g) = (exp(i g t) - 1)/(i g)``. The integrand decays like
    ``|g|^(-3/2-H)``. The integral is folded onto ``g > 0`` so the value is
    real by construction.
    """
    v, e = _coefficients(m, np.array([j]), float(t), q or QuadratureSpec())
    return float(v[0]), float(e[0])


def _probe_correlations(m: SpectralModel, js: np.ndarray, q: QuadratureSpec) -> np.ndarray:
    """``max_s |E[I(xi_j) X(s)]| / ||X(s)||`` over the probe times, per index."""
    worst = np.zeros(len(js))
    for s in PROBE_TIMES:
        v, _ = _coefficients(m, js, s, q)
        worst = np.maximum(worst, np.abs(v) / abs(s) ** m.hurst)
    return worst


def classify_past(m: SpectralModel, j: int, q: QuadratureSpec | None = None) -> bool:
    """Whether ``I(xi_j)`` correlates with the observed past ``{X(s), s < 0}``."""
    q = q or QuadratureSpec()
    corr = float(_probe_correlations(m, np.array([j]), q)[0])
    if AMBIGUOUS_THRESHOLD < corr <= PAST_THRESHOLD:
        raise ClassificationError(
            "probe correlation in the ambiguous band; tighten the quadrature",
            index=int(j), correlation=corr,
        )
    return corr > PAST_THRESHOLD


@functools.lru_cache(maxsize=64)
def past_boundary(m: SpectralModel, q: QuadratureSpec | None = None, band: int = CLASSIFY_BAND) -> int:
    """Largest past index ``j*``, found by probing indices ``-band..band``.

    The probed classes must form a half-line ``{j <= j*}`` with both classes
    present inside the band; anything else raises ``ClassificationError``.
    """
    q = q or QuadratureSpec()
    js = np.arange(-band, band + 1)
    corr = _probe_correlations(m, js, q)
    ambiguous = (corr > AMBIGUOUS_THRESHOLD) & (corr <= PAST_THRESHOLD)
    if ambiguous.any():
        raise ClassificationError(
            "probe correlation in the ambiguous band; tighten the quadrature",
            indices=js[ambiguous].tolist(), correlations=corr[ambiguous].tolist(),
        )
    past = corr > PAST_THRESHOLD
    if not past.any() or past.all():
        raise ClassificationError("no past/future boundary inside the probe band", band=band)
    j_star = int(js[past].max())
    if not np.array_equal(past, js <= j_star):
        raise ClassificationError("past indices do not form a half-line", past=js[past].tolist())
    return j_star


def past_set(m: SpectralModel, q: QuadratureSpec | None = None) -> PastSet:
    return PastSet.half_line(past_boundary(m, q or QuadratureSpec()))


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    """``r_j(t)`` over ``j_min..j_max`` with error estimates and classes."""

    hurst: float
    t: float
    j_min: int
    j_max: int
    r: np.ndarray
    abs_err: np.ndarray
    boundary: int

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.j_min, self.j_max + 1)

    @property
    def is_past(self) -> np.ndarray:
        return self.indices <= self.boundary

    @property
    def past(self) -> PastSet:
        return PastSet.half_line(self.boundary)

    @property
    def past_classification(self) -> frozenset[int]:
        return frozenset(int(j) for j in self.indices[self.is_past])

    def coefficient(self, j: int) -> float:
        return float(self.r[j - self.j_min])

    def as_dict(self) -> dict[int, float]:
        return {int(j): float(v) for j, v in zip(self.indices, self.r)}

    @property
    def energy(self) -> float:
        return math.fsum(self.r**2)

    @property
    def past_energy(self) -> float:
        return math.fsum(self.r[self.is_past] ** 2)

    @property
    def future_energy(self) -> float:
        return math.fsum(self.r[~self.is_past] ** 2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("j,r,abs_err,class\n")
        for j, v, e, p in zip(self.indices, self.r, self.abs_err, self.is_past):
            buf.write(f"{j},{v:.17g},{e:.17g},{'past' if p else 'future'}\n")
        return buf.getvalue()


@functools.lru_cache(maxsize=32)
def coeff_table(m: SpectralModel, t: float, j_min: int, j_max: int,
                q: QuadratureSpec | None = None, workers: int = 1) -> CoefficientTable:
    """Coefficient table over ``j_min..j_max`` with the probed past class.

    Indices are integrated in fixed batches, so results do not depend on
    ``workers``.
    """
    q = q or QuadratureSpec()
    if j_min > j_max:
        raise ValueError(f"empty window [{j_min}, {j_max}]")
    if max(abs(j_min), abs(j_max)) > MAX_WINDOW:
        raise ValueError(f"window exceeds +-{MAX_WINDOW}")
    js = np.arange(j_min, j_max + 1)
    r, err = _coefficients(m, js, float(t), q, workers)
    r.setflags(write=False)
    err.setflags(write=False)
    return CoefficientTable(m.hurst, float(t), int(j_min), int(j_max), r, err, past_boundary(m, q))


def error_variance_truncated(tbl: CoefficientTable) -> float:
    """Energy of the future-classified coefficients: the windowed prediction error."""
    return tbl.future_energy


def exact_error(m: SpectralModel, t: float) -> float:
    """Closed-form prediction error variance of ``X(t)`` given the whole past.

    ``sinc(H - 1/2) Gamma(3/2 - H)^2 / Gamma(2 - 2H) * t^(2H)`` with
    ``sinc(x) = sin(pi x)/(pi x)``, continuous at ``H = 1/2`` where it equals ``t``.
    """
    if t < 0:
        raise ValueError("exact_error needs t >= 0")
    h = m.hurst
    return float(np.sinc(h - 0.5)) * gamma_fn(1.5 - h) ** 2 / gamma_fn(2 - 2 * h) * t ** (2 * h)


@dataclass(frozen=True)
class PredictionResult:
    """Chaos predictor of ``X(t)`` from the past and its error budget."""

    predictor: ChaosExpansion
    square: ChaosExpansion
    predictor_variance: float
    residual_variance: float
    exact_error: float


def conditional_expansions(m: SpectralModel, t: float, window: tuple[int, int],
                           q: QuadratureSpec | None = None) -> tuple[ChaosExpansion, ChaosExpansion]:
    """Conditional expectations of ``X(t)`` and ``X(t)^2`` given the past.

    The predictor is the first-order expansion over past indices. The square
    is the Wick expansion of ``X(t)^2`` (constant ``|t|^2H``) conditioned by
    truncation, so it equals ``mu^2 + sigma^2`` with ``mu`` the predictor and
    ``sigma^2`` the windowed error variance.
    """
    tbl = coeff_table(m, float(t), int(window[0]), int(window[1]), q or QuadratureSpec())
    past = tbl.past
    first = {MultiIndex.unit(j): c for j, c in tbl.as_dict().items() if j in past}
    predictor = ChaosExpansion(first, basis_window=(tbl.j_min, tbl.j_max))
    square = chaos_condition(wick_square(tbl.as_dict(), m.variance(t), rtol=math.inf), past)
    return predictor, square


def predict(m: SpectralModel, t: float, window: tuple[int, int] = (-512, 512),
            q: QuadratureSpec | None = None) -> PredictionResult:
    """Predictor, conditional square and error variances for ``X(t)``."""
    q = q or QuadratureSpec()
    predictor, square = conditional_expansions(m, t, window, q)
    tbl = coeff_table(m, float(t), int(window[0]), int(window[1]), q)
    return PredictionResult(
        predictor=predictor,
        square=square,
        predictor_variance=tbl.past_energy,
        residual_variance=tbl.future_energy,
        exact_error=exact_error(m, t) if t >= 0 else 0.0,
    )
