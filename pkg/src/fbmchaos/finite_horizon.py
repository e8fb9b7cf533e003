"""Orthogonal basis for fBm observed on a bounded interval ``[-T, T]``.

The closed span of ``{z_t : |t| <= T}`` in ``L2(dDelta)`` is a space of entire
functions with reproducing kernel built from

    A(x) = |x|^H J_{-H}(|x|)          (even)
    B(x) = sign(x) |x|^H J_{1-H}(|x|)  (odd)

as ``S(eta, g) = k [A(T eta) B(T g) - B(T eta) A(T g)] / (g - eta)`` with
``k = (2 - 2H) Gamma(1 - H)^2 / (4^H T)``, normalized so ``S(0, 0) = 1``.
Kernels at the zeros ``eta_n = gamma_n / T`` of ``B(T .)`` (``gamma_n`` the
zeros of ``J_{1-H}``) are mutually orthogonal.

On the diagonal ``A' = -B`` and ``B' = A + (2H - 1) B / x`` give
``S(g, g) = (2 - 2H) Gamma(1 - H)^2 4^-H [A^2 + B^2 + (2H - 1) A B / x]``
at ``x = T g``, which equals
``(2 - 2H) Gamma(1 - H)^2 (T g/2)^(2H) [J_{1-H}^2 + (2H-1)/(T g) J_{-H} J_{1-H} + J_{-H}^2]``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.special

from .errors import DomainError, NumericalError
from .quadrature import QuadratureSpec
from .spectral import FrequencyFunction, SpectralModel, inner_product_delta

DIAGONAL_SWITCH = 1e-8
MAX_ZEROS = 200
MAX_GRAM = 20
_SERIES_BELOW = 1.0
_SERIES_TERMS = 18
_HANKEL_ASYMPTOTIC = 1e10


@dataclass(frozen=True)
class BesselOrder:
    """Order ``nu`` of a Bessel function of the first kind, ``-1 < nu < 2``."""

    nu: float

    def __post_init__(self):
        if not -1.0 < float(self.nu) < 2.0:
            raise DomainError(f"Bessel order {self.nu} outside (-1, 2)")
        object.__setattr__(self, "nu", float(self.nu))


def _order(o) -> float:
    return o.nu if isinstance(o, BesselOrder) else BesselOrder(o).nu


def bessel_j(o, x):
    """``J_nu(x)`` for ``x >= 0`` (vectorized)."""
    nu = _order(o)
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise DomainError("bessel_j needs x >= 0")
    out = scipy.special.jv(nu, arr)
    return float(out) if out.ndim == 0 else out


def bessel_zeros(o, count: int) -> np.ndarray:
    """First ``count`` positive zeros of ``J_nu``, bracketed on a scan and refined."""
    nu = _order(o)
    if not 1 <= count <= MAX_ZEROS:
        raise DomainError(f"count must be in [1, {MAX_ZEROS}]")
    # McMahon: j_{nu,k} ~ (k + nu/2 - 1/4) pi, so this scan reaches past the last zero.
    top = (count + nu / 2 + 1.25) * math.pi
    x = np.linspace(1e-6, top, int(top / 0.05) + 2)
    y = scipy.special.jv(nu, x)
    flips = np.flatnonzero(np.signbit(y[:-1]) != np.signbit(y[1:]))
    if len(flips) < count:
        raise NumericalError("failed to bracket the requested Bessel zeros", nu=nu, found=len(flips), wanted=count)
    zeros = np.empty(count)
    for i, k in enumerate(flips[:count]):
        zeros[i] = scipy.optimize.brentq(lambda z: scipy.special.jv(nu, z), x[k], x[k + 1], xtol=1e-15, rtol=1e-15)
    return zeros


# Entire building blocks --------------------------------------------------------


def _series(h, x, shift):
    """``sum_k (-1)^k (x/2)^(2k) / (k! Gamma(k + 1 + shift - h))``."""
    q = -(x * x) / 4.0
    term = np.full_like(x, 1.0 / math.gamma(1 + shift - h))
    total = term.copy()
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * (k + shift - h))
        total = total + term
    return total


def entire_a(h: float, x):
    """``A(x) = |x|^H J_{-H}(|x|)``, with ``A(0) = 2^H / Gamma(1 - H)``."""
    ax = np.abs(np.asarray(x, dtype=float))
    small = ax < _SERIES_BELOW
    with np.errstate(invalid="ignore", divide="ignore"):
        big = ax**h * scipy.special.jv(-h, ax)
    return np.where(small, 2.0**h * _series(h, ax, 0.0), big)


def entire_b_over_x(h: float, x):
    """``B(x) / x = |x|^(H-1) J_{1-H}(|x|)`` (even), with value ``2^(H-1)/Gamma(2-H)`` at 0."""
    ax = np.abs(np.asarray(x, dtype=float))
    small = ax < _SERIES_BELOW
    with np.errstate(invalid="ignore", divide="ignore"):
        big = ax ** (h - 1) * scipy.special.jv(1 - h, ax)
    return np.where(small, 2.0 ** (h - 1) * _series(h, ax, 1.0), big)


def entire_b(h: float, x):
    """``B(x) = sign(x) |x|^H J_{1-H}(|x|)``."""
    x = np.asarray(x, dtype=float)
    return x * entire_b_over_x(h, x)


def _hankel_parts(h: float, nu: float, x):
    """Amplitudes of ``exp(+i|x|)`` and ``exp(-i|x|)`` in ``|x|^H J_nu(|x|)``."""
    ax = np.abs(x)
    scale = 0.5 * ax**h
    far = ax > _HANKEL_ASYMPTOTIC
    safe = np.where(far, 1.0, ax)
    h1 = scipy.special.hankel1e(nu, safe)
    h2 = scipy.special.hankel2e(nu, safe)
    if np.any(far):
        # two-term Hankel expansion; the library routine overflows near 1e15
        mu = 4 * nu * nu
        lead = np.sqrt(2 / (np.pi * ax)) * np.exp(-1j * (nu * np.pi / 2 + np.pi / 4)) * (1 + 1j * (mu - 1) / (8 * ax))
        h1 = np.where(far, lead, h1)
        h2 = np.where(far, np.conj(lead), h2)
    return scale * h1, scale * h2


def _norm_const(h: float) -> float:
    return (2 - 2 * h) * math.gamma(1 - h) ** 2 / 4.0**h


def kernel_S(m: SpectralModel, T: float, eta, g, centered: bool = True):
    """Reproducing kernel ``S(eta, g)`` of the span of ``{z_t : |t| <= T}``.

    Normalized by ``S(0, 0) = 1``. With ``centered=False`` the kernel is
    multiplied by ``exp(i T (g - eta))``, which describes the interval
    ``[0, 2T]`` instead of ``[-T, T]``. Vectorized over broadcast ``eta, g``.
    """
    if not T > 0:
        raise DomainError("horizon must be positive")
    h = m.hurst
    eta, g = np.broadcast_arrays(np.asarray(eta, dtype=float), np.asarray(g, dtype=float))
    xe, xg = T * eta, T * g
    ae, ag = entire_a(h, xe), entire_a(h, xg)
    be, bg = entire_b(h, xe), entire_b(h, xg)
    c = _norm_const(h)
    diag = np.abs(g - eta) < DIAGONAL_SWITCH * np.maximum(1.0, np.abs(g))
    with np.errstate(invalid="ignore", divide="ignore"):
        off = c * (ae * bg - be * ag) / (xg - xe)
    on = c * (ag * ag + bg * bg + (2 * h - 1) * ag * entire_b_over_x(h, xg))
    out = np.where(diag, on, off).astype(complex)
    if not centered:
        out = out * np.exp(1j * T * (g - eta))
    return complex(out) if out.ndim == 0 else out


def kernel_function(m: SpectralModel, T: float, eta) -> FrequencyFunction:
    """``g -> S(eta, g)`` as a frequency function (batched over an array ``eta``)."""
    h = m.hurst
    eta_arr = np.asarray(eta, dtype=float)
    e = eta_arr[:, None] if eta_arr.ndim else eta_arr
    a_eta = entire_a(h, T * e)
    b_eta = entire_b(h, T * e)
    c = _norm_const(h)

    def ev(g):
        return np.real(kernel_S(m, T, e, g))

    def amp(sign):
        def f(g):
            # coefficients of exp(+-i T g): swap Hankel parts on the negative side
            a1, a2 = _hankel_parts(h, -h, T * g)
            b1, b2 = _hankel_parts(h, 1 - h, T * g)
            pos = g > 0
            if sign > 0:
                ap, bp = np.where(pos, a1, a2), np.where(pos, b1, b2)
            else:
                ap, bp = np.where(pos, a2, a1), np.where(pos, b2, b1)
            bp = np.sign(g) * bp
            return c * (a_eta * bp - b_eta * ap) / (T * (g - e))

        return f

    comps = ((float(T), amp(1)), (-float(T), amp(-1)))
    return FrequencyFunction(ev, comps, "none", 0.0, h - 1.5, 0.0)


@dataclass(frozen=True, eq=False)
class HorizonBasis:
    """Kernel nodes ``eta_n = gamma_n / T`` and the norms of ``S(eta_n, .)``."""

    hurst: float
    T: float
    zeros: np.ndarray
    norms: np.ndarray

    @property
    def nodes(self) -> np.ndarray:
        return self.zeros / self.T

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("n,zero,node,norm\n")
        for i, (z, e, nrm) in enumerate(zip(self.zeros, self.nodes, self.norms)):
            buf.write(f"{i},{z:.17g},{e:.17g},{nrm:.17g}\n")
        return buf.getvalue()


def _zero_list(h: float, count: int, include_zero: bool) -> np.ndarray:
    if include_zero:
        return np.concatenate(([0.0], bessel_zeros(1 - h, count - 1))) if count > 1 else np.array([0.0])
    return bessel_zeros(1 - h, count)


def _raw_gram(m: SpectralModel, T: float, nodes: np.ndarray, q: QuadratureSpec):
    k = len(nodes)
    ii, jj = np.triu_indices(k)
    f = kernel_function(m, T, nodes[ii])
    g = kernel_function(m, T, nodes[jj])
    res = inner_product_delta(f, g, m, q)
    vals = np.real(np.atleast_1d(res.value))
    errs = np.atleast_1d(res.error)
    gram = np.zeros((k, k))
    err = np.zeros((k, k))
    gram[ii, jj] = vals
    gram[jj, ii] = vals
    err[ii, jj] = errs
    err[jj, ii] = errs
    return gram, err


def horizon_basis(m: SpectralModel, T: float, count: int, q: QuadratureSpec | None = None,
                  include_zero: bool = False) -> HorizonBasis:
    """Zeros of ``J_{1-H}`` and the ``L2(dDelta)`` norms of the matching kernels."""
    q = q or QuadratureSpec()
    zeros = _zero_list(m.hurst, count, include_zero)
    gram, _ = _raw_gram(m, T, zeros / T, q)
    return HorizonBasis(m.hurst, float(T), zeros, np.sqrt(np.diag(gram)))


def fh_basis_gram(m: SpectralModel, T: float, count: int, q: QuadratureSpec | None = None,
                  include_zero: bool = False) -> np.ndarray:
    """Gram matrix of the normalized kernels ``S(eta_n, .)/||S(eta_n, .)||_Delta``."""
    if not 1 <= count <= MAX_GRAM:
        raise DomainError(f"count must be in [1, {MAX_GRAM}]")
    if not T > 0:
        raise DomainError("horizon must be positive")
    q = q or QuadratureSpec()
    zeros = _zero_list(m.hurst, count, include_zero)
    gram, _ = _raw_gram(m, T, zeros / T, q)
    d = np.sqrt(np.diag(gram))
    out = gram / np.outer(d, d)
    np.fill_diagonal(out, 1.0)
    return out


def gram_to_csv(gram: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write("i,j,value\n")
    for i in range(gram.shape[0]):
        for j in range(gram.shape[1]):
            buf.write(f"{i},{j},{gram[i, j]:.17g}\n")
    return buf.getvalue()
