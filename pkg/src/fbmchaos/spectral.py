"""Spectral description of fractional Brownian motion.

Conventions: ``f_hat(g) = int f(t) exp(i g t) dt``, so the indicator of the
oriented interval between 0 and ``t`` has transform
``z_t(g) = (exp(i g t) - 1) / (i g)`` and
``E[X(t) X(s)] = int z_t conj(z_s) dDelta`` with
``dDelta = C_H |g|^(1 - 2H) dg``.

The density factors as ``Delta'(g) / (1 + g^2) = |h(g)|^2`` with ``h`` outer
in the upper half-plane:
``h(g) = sqrt(C_H) (-i g)^(1/2 - H) (i - g) / (1 + g^2)``, principal branch,
which on the real axis is ``exp(i pi (2H - 1)/4 sign g) |g|^(1/2 - H)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError
from .quadrature import QuadratureSpec, QuadResult, TailComponent, half_line_integral

# +1 gives the outer factor; the acceptance mutation check flips it.
_PHASE_SIGN = 1.0

SQRT_PI = math.sqrt(math.pi)


def gamma_fn(x: float) -> float:
    """Euler Gamma function, raising ``DomainError`` at the poles."""
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise DomainError(f"Gamma has a pole at {x}")
    return math.gamma(x)


@dataclass(frozen=True)
class SpectralModel:
    """Fractional Brownian motion with Hurst index ``hurst`` in (0, 1)."""

    hurst: float
    c_h: float = field(init=False)

    def __post_init__(self):
        h = float(self.hurst)
        if not 0.0 < h < 1.0:
            raise DomainError(f"Hurst index must lie in (0, 1), got {self.hurst}")
        object.__setattr__(self, "hurst", h)
        object.__setattr__(self, "c_h", gamma_fn(1 + 2 * h) * math.sin(math.pi * h) / (2 * math.pi))

    def density(self, g):
        """Vectorized ``C_H |g|^(1-2H)`` (nonzero ``g``)."""
        return self.c_h * np.abs(g) ** (1.0 - 2.0 * self.hurst)

    def variance(self, t: float) -> float:
        return abs(t) ** (2 * self.hurst)


def spectral_density(m: SpectralModel, g: float) -> float:
    """``C_H |g|^(1-2H)``; at ``g = 0`` returns ``inf``, ``0`` or ``C_H``."""
    g = float(g)
    if g == 0.0:
        if m.hurst > 0.5:
            return math.inf
        if m.hurst < 0.5:
            return 0.0
        return m.c_h
    return m.c_h * abs(g) ** (1.0 - 2.0 * m.hurst)


def fbm_covariance(m: SpectralModel, t: float, s: float) -> float:
    """``(|t|^2H + |s|^2H - |t - s|^2H) / 2``."""
    two_h = 2 * m.hurst
    return 0.5 * (abs(t) ** two_h + abs(s) ** two_h - abs(t - s) ** two_h)


def _phase(m: SpectralModel, g):
    return np.exp(1j * _PHASE_SIGN * math.pi * (2 * m.hurst - 1) / 4 * np.sign(g))


def _outer(m: SpectralModel, g):
    g = np.asarray(g, dtype=float)
    return math.sqrt(m.c_h) * _phase(m, g) * (1j - g) / (1 + g * g) * np.abs(g) ** (0.5 - m.hurst)


def outer_h(m: SpectralModel, g):
    """Outer factor ``h`` with ``|h(g)|^2 (1 + g^2) = Delta'(g)``."""
    arr = np.asarray(g, dtype=float)
    if np.any(arr == 0):
        raise DomainError("outer function is singular at g = 0")
    out = _outer(m, arr)
    return complex(out) if out.ndim == 0 else out


def _mobius(n, g):
    """``((1 + i g)/(1 - i g))**n`` computed as ``exp(2 i n arctan g)``."""
    return np.exp(2j * np.asarray(n, dtype=float) * np.arctan(g))


def _laguerre(n, g):
    g = np.asarray(g, dtype=float)
    return _mobius(n, g) / (SQRT_PI * (1 - 1j * g))


def laguerre_freq(n, g):
    """``e_n(g) = (1/sqrt(pi)) (1/(1 - i g)) ((1 + i g)/(1 - i g))**n``.

    ``{e_n}`` is orthonormal in ``L2(dg)``; ``e_n`` for ``n >= 0`` extends
    analytically to the upper half-plane, ``n < 0`` to the lower one.
    """
    out = _laguerre(n, g)
    return complex(out) if np.ndim(out) == 0 else out


def _xi_hat(m: SpectralModel, n, g):
    g = np.asarray(g, dtype=float)
    return _laguerre(n, g) / ((g + 1j) * np.conj(_outer(m, g)))


def xi_hat(m: SpectralModel, n, g):
    """Frequency-domain basis element ``e_n / ((g + i) conj(h))``.

    Simplifies to ``e_{n+1}(g) (i g)^(H - 1/2) / sqrt(C_H)``; at ``H = 1/2``
    this is ``sqrt(2 pi) e_{n+1}``.
    """
    arr = np.asarray(g, dtype=float)
    if np.any(arr == 0):
        raise DomainError("basis element is singular at g = 0")
    out = _xi_hat(m, n, arr)
    return complex(out) if out.ndim == 0 else out


def _xi_hat_fast(m: SpectralModel, n, g):
    """Same as ``_xi_hat`` via the simplified closed form (vectorized over ``n``)."""
    g = np.asarray(g, dtype=float)
    h = m.hurst
    phase = np.exp(1j * _PHASE_SIGN * math.pi * (2 * h - 1) / 4 * np.sign(g))
    return (
        _mobius(np.asarray(n) + 1, g)
        / (SQRT_PI * (1 - 1j * g))
        * phase
        * np.abs(g) ** (h - 0.5)
        / math.sqrt(m.c_h)
    )


# Frequency functions ---------------------------------------------------------


@dataclass(frozen=True)
class FrequencyFunction:
    """A function of frequency together with what quadrature needs to know.

    Parameters
    ----------
    evaluate : callable
        Vectorized evaluator on nonzero frequencies. May return a leading
        batch axis.
    components : tuple of (shift, amplitude)
        ``f(g) = sum exp(i shift g) amplitude(g)`` for ``|g|`` beyond the
        quadrature cutoff, with non-oscillating amplitudes.
    symmetry : {"hermitian", "even", "none"}
        ``f(-g) = conj f(g)`` or ``f(-g) = f(g)`` when declared.
    zero_exponent, inf_exponent : float
        ``|f(g)| ~ |g|**p`` near 0 and infinity.
    mobius_order : int
        Largest ``|n|`` of any ``exp(2 i n arctan g)`` factor, used to align
        panels with the oscillation near the origin.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    components: tuple[tuple[float, Callable[[np.ndarray], np.ndarray]], ...]
    symmetry: str = "hermitian"
    zero_exponent: float = 0.0
    inf_exponent: float = -1.0
    mobius_order: float = 0.0

    def __post_init__(self):
        if self.symmetry not in ("hermitian", "even", "none"):
            raise DomainError(f"unknown symmetry tag {self.symmetry!r}")

    def __call__(self, g):
        return self.evaluate(np.asarray(g, dtype=float))

    @property
    def max_shift(self) -> float:
        return max((abs(s) for s, _ in self.components), default=0.0)


def indicator_transform(t: float) -> FrequencyFunction:
    """``z_t(g) = (exp(i g t) - 1)/(i g)``, transform of the oriented indicator of ``[0, t]``."""
    t = float(t)

    def ev(g):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(g == 0, t, np.expm1(1j * g * t) / (1j * g))

    def amp_shift(g):
        return 1.0 / (1j * g)

    def amp_const(g):
        return -1.0 / (1j * g)

    comps = ((t, amp_shift), (0.0, amp_const)) if t != 0 else ()
    return FrequencyFunction(ev, comps, "hermitian", 0.0, -1.0, 0.0)


def laguerre_function(n) -> FrequencyFunction:
    """``e_n`` as a frequency function (batched when ``n`` is an array)."""
    n_arr = np.asarray(n, dtype=float)
    nn = n_arr[:, None] if n_arr.ndim else n_arr

    def ev(g):
        return _laguerre(nn, g)

    order = float(np.max(np.abs(n_arr + 0.5))) + 0.5
    return FrequencyFunction(ev, ((0.0, ev),), "none", 0.0, -1.0, order)


def xi_hat_function(m: SpectralModel, n) -> FrequencyFunction:
    """``xi_hat_n`` as a frequency function (batched when ``n`` is an array)."""
    n_arr = np.asarray(n, dtype=float)
    nn = n_arr[:, None] if n_arr.ndim else n_arr

    def ev(g):
        return _xi_hat_fast(m, nn, g)

    order = float(np.max(np.abs(n_arr + 1)))
    return FrequencyFunction(ev, ((0.0, ev),), "hermitian", m.hurst - 0.5, m.hurst - 1.5, order)


# Inner products ----------------------------------------------------------------


def _check_exponents(f: FrequencyFunction, g: FrequencyFunction, m: SpectralModel):
    dens = 1.0 - 2.0 * m.hurst
    at_zero = f.zero_exponent + g.zero_exponent + dens
    at_inf = f.inf_exponent + g.inf_exponent + dens
    if at_zero <= -1.0:
        raise DomainError(f"integrand ~ |g|^{at_zero:.3g} is not integrable at 0")
    has_const = any(
        sf - sg == 0.0 for sf, _ in f.components for sg, _ in g.components
    ) or not f.components or not g.components
    if at_inf >= 0.0 or (has_const and at_inf >= -1.0):
        raise DomainError(f"integrand ~ |g|^{at_inf:.3g} does not converge at infinity")


def _cutoff(spec: QuadratureSpec, shift: float, order: float) -> float:
    """Push the split point out until Mobius phases vary slowly per half-period."""
    cut = spec.gamma_max
    if shift > 0 and order > 0:
        cut = max(cut, math.sqrt(20.0 * order / shift))
    return cut


def _side_integral(f, g, m, spec, sign):
    """``int_0^inf F(sign * x) dx`` with ``F = f conj(g) Delta'``."""
    s = float(sign)

    def full(x):
        y = s * x
        return f.evaluate(y) * np.conj(g.evaluate(y)) * m.density(y)

    comps = []
    for sf, af in f.components:
        for sg, ag in g.components:
            def amp(x, _af=af, _ag=ag):
                y = s * x
                return _af(y) * np.conj(_ag(y)) * m.density(y)

            comps.append(TailComponent(s * (sf - sg), amp))
    shift = f.max_shift + g.max_shift
    order = f.mobius_order + g.mobius_order

    def phase(x):
        return shift * x + 2.0 * order * np.arctan(x)

    cut = _cutoff(spec, shift, order)
    return half_line_integral(full, comps, spec, phase=phase, cutoff=cut, mobius_rate=2.0 * order)


def inner_product_delta(f: FrequencyFunction, g: FrequencyFunction, m: SpectralModel,
                        q: QuadratureSpec | None = None) -> QuadResult:
    """``(f, g)_Delta = int f conj(g) dDelta`` by quadrature.

    Returns a :class:`QuadResult` whose ``value`` is real when both inputs
    are hermitian (the integral is folded onto ``(0, inf)``) and complex
    otherwise. Batched inputs give one value per row.
    """
    q = q or QuadratureSpec()
    _check_exponents(f, g, m)
    if f.symmetry == "hermitian" and g.symmetry == "hermitian":
        pos = _side_integral(f, g, m, q.scaled(0.5), 1)
        val = 2.0 * np.real(pos.value)
        return QuadResult(_squeeze(val), _squeeze(2.0 * pos.error), pos.panels)
    if f.symmetry == "even" and g.symmetry == "even":
        pos = _side_integral(f, g, m, q.scaled(0.5), 1)
        return QuadResult(_squeeze(2.0 * pos.value), _squeeze(2.0 * pos.error), pos.panels)
    pos = _side_integral(f, g, m, q.scaled(0.5), 1)
    neg = _side_integral(f, g, m, q.scaled(0.5), -1)
    return QuadResult(_squeeze(pos.value + neg.value), _squeeze(pos.error + neg.error),
                      pos.panels + neg.panels)


def _squeeze(a):
    a = np.asarray(a)
    if a.size == 1:
        return a.reshape(()).item()
    return a
