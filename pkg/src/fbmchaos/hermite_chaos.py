"""Hermite polynomials, multi-indices and sparse Wiener-chaos expansions.

Chaos elements are products ``H_alpha = prod_j h_{alpha_j}(E_j)`` of
probabilists' Hermite polynomials in independent standard normal variables
``E_j``. An expansion is a sparse map from multi-indices to real
coefficients. Conditioning on a set of "past" basis variables keeps the terms
whose multi-index is supported inside that set.
"""

from __future__ import annotations

import itertools
import math
import warnings
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from .errors import DomainError

MAX_DEGREE = 170
DEFAULT_MAX_ORDER = 12
DROP_BELOW = 1e-15


def _check_degree(n):
    if isinstance(n, bool) or int(n) != n:
        raise DomainError(f"degree must be an integer, got {n!r}")
    n = int(n)
    if n < 0 or n > MAX_DEGREE:
        raise DomainError(f"degree {n} outside [0, {MAX_DEGREE}]")
    return n


def hermite_param_eval(n, alpha, x):
    """Evaluate the parametrized Hermite polynomial ``h_n^[alpha](x)``.

    The family is defined by ``h_0 = 1``, ``h_1 = x`` and the three-term
    recurrence ``h_{k+1} = x h_k - k alpha h_{k-1}``. ``alpha = 1`` gives the
    probabilists' polynomials and ``alpha = 0`` gives ``x**n``.

    Works on Python ints and fractions (exact) as well as floats and numpy
    arrays (elementwise).
    """
    n = _check_degree(n)
    if isinstance(x, (list, tuple)):
        x = np.asarray(x, dtype=float)
    prev = x * 0 + 1
    if n == 0:
        return prev
    cur = x
    for k in range(1, n):
        prev, cur = cur, x * cur - k * alpha * prev
    return cur


def hermite_eval(n, x):
    """Probabilists' Hermite polynomial ``h_n(x)`` via the three-term recurrence."""
    return hermite_param_eval(n, 1, x)


def conditional_moment(n, mu, sigma2):
    """n-th raw moment of a normal variable with mean ``mu`` and variance ``sigma2``.

    Equals ``h_n^[-sigma2](mu)``.
    """
    if sigma2 < 0:
        raise DomainError(f"variance must be nonnegative, got {sigma2}")
    return hermite_param_eval(n, -sigma2, mu)


def conditional_hermite(n, mu, sigma2):
    """Return ``h_n^[sigma2](mu)``.

    For a unit-variance normal ``U`` whose conditional law given some
    sigma-field is ``N(mu, 1 - v)``, ``E[h_n(U) | .] = h_n^[v](mu)`` where
    ``v = Var(mu)`` is the variance of the predictor, not the conditional
    (mean-square error) variance ``1 - v``. Callers pass ``v`` here. The
    identity follows from ``conditional_moment`` and the binomial-type
    addition rule of the parametrized family.
    """
    if sigma2 < 0:
        raise DomainError(f"variance must be nonnegative, got {sigma2}")
    return hermite_param_eval(n, sigma2, mu)


@dataclass(frozen=True, order=True)
class MultiIndex:
    """Finitely supported map ``index -> multiplicity`` in canonical form.

    ``entries`` is a tuple of ``(index, multiplicity)`` pairs sorted by index
    with every multiplicity at least one, so equality and hashing are
    structural.
    """

    entries: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        merged: dict[int, int] = {}
        for idx, mult in self.entries:
            if int(idx) != idx or int(mult) != mult:
                raise DomainError(f"non-integer multi-index entry {(idx, mult)!r}")
            if mult < 0:
                raise DomainError(f"negative multiplicity in {(idx, mult)!r}")
            merged[int(idx)] = merged.get(int(idx), 0) + int(mult)
        canon = tuple(sorted((i, m) for i, m in merged.items() if m > 0))
        object.__setattr__(self, "entries", canon)

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, int]) -> "MultiIndex":
        return cls(tuple(mapping.items()))

    @classmethod
    def unit(cls, index: int, multiplicity: int = 1) -> "MultiIndex":
        return cls(((index, multiplicity),))

    @classmethod
    def pair(cls, i: int, j: int) -> "MultiIndex":
        return cls(((i, 1), (j, 1)))

    @property
    def order(self) -> int:
        return sum(m for _, m in self.entries)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.entries)

    def is_empty(self) -> bool:
        return not self.entries

    def as_dict(self) -> dict[int, int]:
        return dict(self.entries)

    def to_text(self) -> str:
        if not self.entries:
            return "-"
        return ",".join(f"{i}:{m}" for i, m in self.entries)

    @classmethod
    def from_text(cls, text: str) -> "MultiIndex":
        text = text.strip()
        if text == "-":
            return cls()
        pairs = []
        for item in text.split(","):
            idx, _, mult = item.partition(":")
            if not mult:
                raise DomainError(f"malformed multi-index entry {item!r}")
            pairs.append((int(idx), int(mult)))
        return cls(tuple(pairs))

    def __str__(self):
        return self.to_text()


def multiindex_factorial(a: MultiIndex) -> float:
    """``alpha! = prod_j alpha_j!``, the squared norm of ``H_alpha``."""
    out = 1.0
    for _, mult in a.entries:
        if mult > MAX_DEGREE:
            raise DomainError(f"multiplicity {mult} overflows the factorial")
        out *= math.factorial(mult)
    return out


@dataclass(frozen=True)
class PastSet:
    """Membership predicate on basis indices.

    Either a half-line ``{j <= threshold}``, an explicit set of indices, or
    the union of both. ``PastSet()`` is empty and ``PastSet.everything()``
    contains every index.
    """

    threshold: float | None = None
    indices: frozenset[int] = frozenset()

    @classmethod
    def half_line(cls, threshold: int) -> "PastSet":
        return cls(threshold=threshold)

    @classmethod
    def of(cls, indices: Iterable[int]) -> "PastSet":
        return cls(indices=frozenset(int(i) for i in indices))

    @classmethod
    def everything(cls) -> "PastSet":
        return cls(threshold=math.inf)

    @classmethod
    def nothing(cls) -> "PastSet":
        return cls()

    def __contains__(self, j) -> bool:
        if self.threshold is not None and j <= self.threshold:
            return True
        return j in self.indices

    def contains_support(self, a: MultiIndex) -> bool:
        return all(j in self for j in a.support)


@dataclass(frozen=True)
class ChaosExpansion:
    """Sparse chaos expansion ``sum_alpha c_alpha H_alpha``.

    Parameters
    ----------
    terms : mapping MultiIndex -> float
        Coefficients. Entries with ``|c| < 1e-15`` are dropped.
    basis_window : (int, int), optional
        Admissible index interval. Defaults to the hull of the supports.
    max_order : int
        Largest total order accepted.
    """

    terms: Mapping[MultiIndex, float] = field(default_factory=dict)
    basis_window: tuple[int, int] | None = None
    max_order: int = DEFAULT_MAX_ORDER

    def __post_init__(self):
        clean: dict[MultiIndex, float] = {}
        for key, coef in self.terms.items():
            if not isinstance(key, MultiIndex):
                key = MultiIndex.from_mapping(key) if isinstance(key, Mapping) else MultiIndex(tuple(key))
            coef = float(coef)
            if not math.isfinite(coef):
                raise DomainError(f"non-finite coefficient for {key}")
            if key.order > self.max_order:
                raise DomainError(f"multi-index {key} exceeds order cap {self.max_order}")
            if abs(coef) >= DROP_BELOW:
                clean[key] = clean.get(key, 0.0) + coef
        clean = {k: v for k, v in clean.items() if abs(v) >= DROP_BELOW}
        support = sorted({j for k in clean for j in k.support})
        window = self.basis_window
        if window is None:
            window = (support[0], support[-1]) if support else (0, 0)
        else:
            window = (int(window[0]), int(window[1]))
            if window[0] > window[1]:
                raise DomainError(f"empty basis window {window}")
            if support and (support[0] < window[0] or support[-1] > window[1]):
                raise DomainError(f"support {support[0]}..{support[-1]} outside window {window}")
        object.__setattr__(self, "terms", MappingProxyType(dict(sorted(clean.items()))))
        object.__setattr__(self, "basis_window", window)

    def coefficient(self, a: MultiIndex) -> float:
        return self.terms.get(a, 0.0)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(sorted({j for k in self.terms for j in k.support}))

    def __len__(self):
        return len(self.terms)

    def to_text(self) -> str:
        """One line per term: ``j1:m1,j2:m2 <coef>``; the constant is ``- <coef>``."""
        return "".join(f"{k.to_text()} {c:.17g}\n" for k, c in self.terms.items())

    @classmethod
    def from_text(cls, text: str, basis_window=None, max_order=DEFAULT_MAX_ORDER) -> "ChaosExpansion":
        terms: dict[MultiIndex, float] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, coef = line.rpartition(" ")
            if not key:
                raise DomainError(f"malformed term line {line!r}")
            terms[MultiIndex.from_text(key)] = float(coef)
        return cls(terms, basis_window=basis_window, max_order=max_order)


def chaos_eval(e: ChaosExpansion, draws: Mapping[int, float]):
    """Evaluate ``sum_alpha c_alpha prod_j h_{alpha_j}(draws[j])``.

    ``draws`` values may be scalars or equally shaped arrays, in which case
    the expansion is evaluated elementwise.
    """
    missing = [j for j in e.support if j not in draws]
    if missing:
        raise DomainError(f"no draw supplied for indices {missing}")
    cache: dict[tuple[int, int], object] = {}
    total = 0.0
    for key, coef in e.terms.items():
        term = coef
        for j, mult in key.entries:
            hk = cache.get((j, mult))
            if hk is None:
                hk = hermite_eval(mult, np.asarray(draws[j], dtype=float))
                cache[(j, mult)] = hk
            term = term * hk
        total = total + term
    return total if np.ndim(total) else float(total)


def chaos_condition(e: ChaosExpansion, past: PastSet) -> ChaosExpansion:
    """Conditional expectation given the past basis variables.

    Keeps exactly the terms whose support lies inside ``past``.
    """
    kept = {k: c for k, c in e.terms.items() if past.contains_support(k)}
    return ChaosExpansion(kept, basis_window=e.basis_window, max_order=e.max_order)


def chaos_mean_variance(e: ChaosExpansion) -> tuple[float, float]:
    """Mean ``c_empty`` and variance ``sum_{alpha != empty} c_alpha^2 alpha!``."""
    mean = e.coefficient(MultiIndex())
    var = math.fsum(c * c * multiindex_factorial(k) for k, c in e.terms.items() if not k.is_empty())
    return mean, var


def wick_square(r: Mapping[int, float], total_variance: float, *, rtol: float = 0.05) -> ChaosExpansion:
    """Chaos expansion of ``(sum_j r_j E_j)**2``.

    The constant term is ``total_variance``. The squared first-order sum is
    ``sum r_j^2 + sum r_j^2 h_2(E_j) + sum_{i<j} 2 r_i r_j E_i E_j``, so the
    constant should equal ``sum r_j^2``. When the two differ by more than
    ``rtol`` relative, a warning is emitted and the supplied value is kept
    (a truncated window typically underestimates ``sum r_j^2``).
    """
    items = sorted((int(j), float(c)) for j, c in r.items())
    energy = math.fsum(c * c for _, c in items)
    if abs(energy - total_variance) > rtol * max(abs(total_variance), 1e-300):
        warnings.warn(
            f"sum of squared coefficients {energy:.6g} differs from the declared variance {total_variance:.6g}",
            RuntimeWarning,
            stacklevel=2,
        )
    terms: dict[MultiIndex, float] = {MultiIndex(): float(total_variance)}
    for j, c in items:
        terms[MultiIndex.unit(j, 2)] = c * c
    for (i, a), (j, b) in itertools.combinations(items, 2):
        terms[MultiIndex.pair(i, j)] = 2.0 * a * b
    window = (items[0][0], items[-1][0]) if items else None
    return ChaosExpansion(terms, basis_window=window, max_order=2)


def _compositions(total, parts):
    """All tuples of ``parts`` nonnegative integers summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def wick_exponential(c: Mapping[int, float], order: int) -> ChaosExpansion:
    """Truncated chaos expansion of the Wick exponential of ``sum_n c_n E_n``.

    The coefficient of ``H_alpha`` is ``prod_n c_n**alpha_n / alpha_n!`` and all
    multi-indices of total order at most ``order`` over the support of ``c``
    are included. The full series equals ``exp(X - Var(X)/2)`` with
    ``X = sum c_n E_n``.
    """
    if isinstance(order, bool) or int(order) != order or not 1 <= order <= DEFAULT_MAX_ORDER:
        raise DomainError(f"order must be an integer in [1, {DEFAULT_MAX_ORDER}], got {order!r}")
    items = sorted((int(j), float(v)) for j, v in c.items())
    idx = [j for j, _ in items]
    vals = [v for _, v in items]
    terms: dict[MultiIndex, float] = {MultiIndex(): 1.0}
    for k in range(1, order + 1):
        for comp in _compositions(k, len(idx)) if idx else ():
            coef = 1.0
            for v, m in zip(vals, comp):
                if m:
                    coef *= v**m / math.factorial(m)
            terms[MultiIndex(tuple(zip(idx, comp)))] = coef
    window = (idx[0], idx[-1]) if idx else None
    return ChaosExpansion(terms, basis_window=window, max_order=max(order, DEFAULT_MAX_ORDER))
