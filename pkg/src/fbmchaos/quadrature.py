"""Vectorized Gauss-Kronrod panel quadrature for oscillatory half-line integrals.

Integrals over ``(0, inf)`` are split at a cutoff ``G``. The finite part uses
21-point Kronrod panels whose boundaries follow half-periods of a supplied
phase function, with geometric grading toward the origin (the origin itself
is never a node). Beyond ``G`` the integrand is described as a sum of
components ``exp(i tau gamma) a(gamma)`` with slowly varying amplitudes ``a``:

* ``tau == 0``: substitute ``u = 1/gamma`` and integrate on ``(0, 1/G]``;
* ``tau != 0``: integrate half-period by half-period and accelerate the
  partial sums with Wynn's epsilon algorithm.

All routines work on batches: integrands map a node array to values with an
optional leading batch axis, and every estimate is returned per batch row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NumericalError

# 21-point Kronrod rule and its embedded 10-point Gauss rule on [-1, 1].
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525255386,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

NODES = np.concatenate((-_XGK, _XGK[-2::-1]))
KRONROD_WEIGHTS = np.concatenate((_WGK, _WGK[-2::-1]))
GAUSS_WEIGHTS = np.zeros(21)
GAUSS_WEIGHTS[[1, 3, 5, 7, 9]] = _WG
GAUSS_WEIGHTS[[19, 17, 15, 13, 11]] = _WG

Integrand = Callable[[np.ndarray], np.ndarray]


class QuadratureError(NumericalError):
    """Quadrature could not certify the requested accuracy."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Accuracy and resource limits for spectral integrals.

    Parameters
    ----------
    abs_tol, rel_tol : float
        Requested accuracy ``max(abs_tol, rel_tol * |value|)``.
    gamma_max : float
        Split point between the panel region and the extrapolated tail.
    max_panels : int
        Panel budget for the finite part of one integral.
    """

    abs_tol: float = 1e-8
    rel_tol: float = 1e-6
    gamma_max: float = 64.0
    max_panels: int = 20000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("quadrature tolerances must be positive")
        if not self.gamma_max >= 1:
            raise DomainError("gamma_max must be at least 1")
        if self.max_panels < 1:
            raise DomainError("max_panels must be positive")

    def scaled(self, factor: float) -> "QuadratureSpec":
        return QuadratureSpec(self.abs_tol * factor, self.rel_tol * factor, self.gamma_max, self.max_panels)


@dataclass(frozen=True)
class QuadResult:
    """Quadrature estimate with an error bound and the number of panels used."""

    value: np.ndarray
    error: np.ndarray
    panels: int

    def __iter__(self):
        yield self.value
        yield self.error


def panel_sums(f: Integrand, edges: np.ndarray):
    """Kronrod estimates and ``|Kronrod - Gauss|`` for every panel.

    ``edges`` has shape ``(P + 1,)`` (shared nodes) or ``(B, P + 1)``
    (per-row nodes). ``f`` receives nodes of shape ``(P * 21,)`` or
    ``(B, P * 21)`` and returns values broadcastable to ``(..., P * 21)``.
    Results have shape ``(..., P)``.
    """
    edges = np.asarray(edges, dtype=float)
    a, b = edges[..., :-1], edges[..., 1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[..., None] + half[..., None] * NODES
    flat = x.reshape(x.shape[:-2] + (-1,))
    v = np.asarray(f(flat))
    v = np.broadcast_to(v, np.broadcast_shapes(v.shape, flat.shape))
    v = v.reshape(v.shape[:-1] + x.shape[-2:])
    kron = (v @ KRONROD_WEIGHTS) * half
    gauss = (v @ GAUSS_WEIGHTS) * half
    return kron, np.abs(kron - gauss)


def _tolerance(value, spec: QuadratureSpec):
    return np.maximum(spec.abs_tol, spec.rel_tol * np.abs(value))


def interval_sums(f: Integrand, lo: np.ndarray, hi: np.ndarray):
    """Kronrod estimates and ``|Kronrod - Gauss|`` for shared intervals ``[lo, hi]``.

    Returns two arrays of shape ``(B, P)``.
    """
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * NODES
    v = np.asarray(f(x.ravel()))
    v = np.broadcast_to(v, np.broadcast_shapes(v.shape, (x.size,)))
    v = v.reshape(v.shape[:-1] + x.shape)
    if v.ndim == 2:
        v = v[None]
    if not np.all(np.isfinite(v)):
        raise QuadratureError("integrand is not finite on a quadrature node",
                              interval=(float(lo.min()), float(hi.max())))
    kron = (v @ KRONROD_WEIGHTS) * half
    gauss = (v @ GAUSS_WEIGHTS) * half
    return kron, np.abs(kron - gauss)


def integrate_panels(f: Integrand, edges, spec: QuadratureSpec) -> QuadResult:
    """Adaptive integration over consecutive panels given by ``edges``.

    Every round evaluates the active panels for all batch rows at once.
    Panels whose error exceeds a fair share of the tolerance in any row are
    bisected, the rest are frozen, until each row meets
    ``max(abs_tol, rel_tol * |value|)``.
    """
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1], edges[1:]
    frozen_val = 0.0
    frozen_err = 0.0
    n_panels = len(lo)
    while True:
        kron, err = interval_sums(f, lo, hi)
        val = frozen_val + kron.sum(-1)
        tot = frozen_err + err.sum(-1)
        tol = _tolerance(val, spec)
        if np.all(tot <= tol):
            return QuadResult(val, tot, n_panels)
        share = (err / tol[:, None]).max(axis=0)
        bad = share > 0.25 / n_panels
        if not bad.any():
            bad = share >= share.max()
        frozen_val = frozen_val + kron[:, ~bad].sum(-1)
        frozen_err = frozen_err + err[:, ~bad].sum(-1)
        n_panels += int(bad.sum())
        if n_panels > spec.max_panels:
            raise QuadratureError(
                "panel budget exhausted",
                value=np.asarray(val).ravel()[:4].tolist(),
                error=np.asarray(tot).ravel()[:4].tolist(),
                panels=n_panels,
            )
        mid = 0.5 * (lo[bad] + hi[bad])
        lo, hi = np.concatenate((lo[bad], mid)), np.concatenate((mid, hi[bad]))


def phase_edges(phase: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, step: float = math.pi):
    """Points where a monotone phase advances by ``step``, from ``lo`` to ``hi``.

    The inverse is found by vectorized bisection; edge placement only needs
    to be approximate.
    """
    p_lo = float(phase(np.array([lo]))[0])
    p_hi = float(phase(np.array([hi]))[0])
    count = max(1, int(math.ceil((p_hi - p_lo) / step)))
    targets = p_lo + step * np.arange(1, count)
    a = np.full(targets.shape, float(lo))
    b = np.full(targets.shape, float(hi))
    for _ in range(60):
        m = 0.5 * (a + b)
        below = phase(m) < targets
        a = np.where(below, m, a)
        b = np.where(below, b, m)
    inner = 0.5 * (a + b)
    return np.concatenate(([lo], inner, [hi]))


def grade_toward_zero(edges: np.ndarray, levels: int = 56):
    """Replace the first panel ``[0, e1]`` by geometric panels ``e1 * 2**-k``.

    The last panel ``[0, e1 * 2**-levels]`` stays open at the origin; the
    Kronrod rule never evaluates its endpoints.
    """
    e1 = edges[1]
    geo = e1 * 2.0 ** -np.arange(levels, 0, -1)
    return np.concatenate(([edges[0]], geo, edges[1:]))


def wynn_epsilon(partial: np.ndarray) -> np.ndarray:
    """Wynn epsilon extrapolation of the sequences along the last axis.

    Returns the deepest even-column entry built from the latest terms.
    """
    s = np.asarray(partial, dtype=complex)
    n = s.shape[-1]
    best = s[..., -1].copy()
    prev = np.zeros_like(s)
    cur = s
    col = 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        while cur.shape[-1] > 1:
            diff = cur[..., 1:] - cur[..., :-1]
            nxt = prev[..., 1 : cur.shape[-1]] + 1.0 / diff
            prev, cur = cur, nxt
            col += 1
            if col % 2 == 0:
                cand = cur[..., -1]
                ok = np.isfinite(cand)
                best = np.where(ok, cand, best)
    del n
    return best


def fourier_tail(amp: Integrand, tau, start: float, spec: QuadratureSpec,
                 min_terms: int = 24, max_terms: int = 3072) -> QuadResult:
    """``int_start^inf exp(i tau g) amp(g) dg`` for nonzero ``tau``.

    ``tau`` may be a scalar or one frequency per batch row. The integral is
    summed over half-periods ``pi/|tau|`` and the partial sums are
    extrapolated; the error estimate compares extrapolations built from one
    and two fewer terms.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau == 0):
        raise DomainError("fourier_tail needs nonzero frequencies")
    width = math.pi / np.abs(tau)
    rows = tau.shape[0]
    terms = min_terms
    contributions = None
    have = 0
    while True:
        k = np.arange(have, terms)
        edges = start + width[:, None] * np.arange(have, terms + 1)[None, :]

        def g(x, _tau=tau):
            return np.exp(1j * _tau[:, None] * x) * amp(x)

        kron, err = panel_sums(g, edges)
        contributions = kron if contributions is None else np.concatenate((contributions, kron), axis=-1)
        have = terms
        partial = np.cumsum(contributions, axis=-1)
        window = min(partial.shape[-1], 41)
        p = partial[..., -window:]
        e0 = wynn_epsilon(p)
        e1 = wynn_epsilon(p[..., :-1])
        e2 = wynn_epsilon(p[..., :-2])
        est_err = np.maximum(np.abs(e0 - e1), np.abs(e0 - e2)) + err.sum(-1)
        tol = _tolerance(e0, spec)
        if np.all(est_err <= tol):
            return QuadResult(e0, est_err, terms)
        if terms >= max_terms:
            raise QuadratureError(
                "oscillatory tail extrapolation did not converge",
                estimate=np.asarray(e0).ravel()[:4].tolist(),
                error=np.asarray(est_err).ravel()[:4].tolist(),
                half_periods=terms,
            )
        terms *= 2


def algebraic_tail(amp: Integrand, start: float, spec: QuadratureSpec, rate: float = 0.0) -> QuadResult:
    """``int_start^inf amp(g) dg`` for a decaying, non-oscillating amplitude.

    Uses ``u = 1/g`` on ``(0, 1/start]`` with panels graded toward ``u = 0``;
    ``rate`` bounds any residual phase speed ``d(phase)/du`` for panel sizing.
    """
    top = 1.0 / start

    def g(u):
        return amp(1.0 / u) / (u * u)

    if rate > 0:
        count = max(1, int(math.ceil(rate * top / math.pi)))
        edges = np.linspace(0.0, top, count + 1)
    else:
        edges = np.array([0.0, top])
    edges = grade_toward_zero(edges, levels=40)
    return integrate_panels(g, edges, spec)


@dataclass(frozen=True)
class TailComponent:
    """``exp(i shift g) * amplitude(g)`` describing an integrand beyond the cutoff."""

    shift: float
    amplitude: Integrand


def half_line_integral(full: Integrand, components: Sequence[TailComponent], spec: QuadratureSpec, *,
                       phase: Callable[[np.ndarray], np.ndarray] | None = None,
                       cutoff: float | None = None, mobius_rate: float = 0.0) -> QuadResult:
    """``int_0^inf full(g) dg`` with the tail described by ``components``.

    Parameters
    ----------
    full : callable
        Integrand valid on all of ``(0, inf)``.
    components : sequence of TailComponent
        Decomposition of ``full`` valid beyond the cutoff. Components sharing
        a shift are merged.
    phase : callable, optional
        Monotone dominant phase used to align the finite panels.
    cutoff : float, optional
        Split point; defaults to ``spec.gamma_max``.
    mobius_rate : float
        Residual phase speed of the amplitudes in ``u = 1/g`` near zero.
    """
    cut = float(spec.gamma_max if cutoff is None else cutoff)
    part = spec.scaled(0.25)
    if phase is None:
        edges = np.linspace(0.0, cut, 9)
    else:
        edges = phase_edges(phase, 0.0, cut)
    edges = grade_toward_zero(edges)
    head = integrate_panels(full, edges, part)
    value = head.value
    error = head.error
    panels = head.panels
    merged: dict[float, list[Integrand]] = {}
    for comp in components:
        merged.setdefault(float(comp.shift), []).append(comp.amplitude)
    for shift, amps in merged.items():
        def amp(x, _amps=amps):
            out = _amps[0](x)
            for a in _amps[1:]:
                out = out + a(x)
            return out

        if shift == 0.0:
            tail = algebraic_tail(amp, cut, part, rate=mobius_rate)
        else:
            tail = fourier_tail(lambda x, _a=amp: np.atleast_2d(_a(x)), shift, cut, part)
        value = value + tail.value
        error = error + tail.error
        panels += tail.panels
    return QuadResult(value, error, panels)
