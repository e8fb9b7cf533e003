"""Acceptance checks shared by ``fbmchaos verify`` and the test suite.

Every check returns ``(passed, detail)``; ``run_checks`` times them against
their budgets and a check only passes when it is also within budget.
"""

from __future__ import annotations

import csv
import io
import math
import tempfile
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.integrate

from . import spectral
from .finite_horizon import bessel_zeros, fh_basis_gram, kernel_S
from .hermite_chaos import (
    ChaosExpansion,
    MultiIndex,
    PastSet,
    chaos_condition,
    chaos_eval,
    chaos_mean_variance,
    conditional_moment,
    hermite_eval,
    hermite_param_eval,
    wick_exponential,
    wick_square,
)
from .prediction import coeff_table, conditional_expansions, exact_error
from .quadrature import QuadratureSpec
from .simulate import TimeGrid, discretized_gram, mc_gram, mc_prediction_experiment, xi_kernels
from .spectral import SpectralModel, inner_product_delta, outer_h, xi_hat_function

FACTOR_HURSTS = (0.2, 0.35, 0.5, 0.7, 0.9)
BASIS_HURSTS = (0.2, 0.5, 0.7)
MC_HURST = 0.7


@dataclass(frozen=True)
class CheckResult:
    number: int
    name: str
    status: str  # PASS | FAIL | SKIP
    seconds: float
    budget: float
    detail: str

    @property
    def passed(self) -> bool:
        return self.status == "PASS"

    def line(self) -> str:
        return f"[{self.status}] {self.number:2d} {self.name} ({self.seconds:.1f}s / {self.budget:g}s): {self.detail}"


# 1. Hermite algebra ----------------------------------------------------------


def _taylor_coefficient(n: int, alpha: Fraction, x: Fraction) -> Fraction:
    """``n! [s^n] exp(x s - alpha s^2 / 2)`` in exact arithmetic."""
    total = Fraction(0)
    for k in range(n // 2 + 1):
        total += x ** (n - 2 * k) / math.factorial(n - 2 * k) * (-alpha / 2) ** k / math.factorial(k)
    return total * math.factorial(n)


def _difference_derivative(p: Callable[[Fraction], Fraction], x: Fraction, degree: int) -> Fraction:
    """Exact derivative of a polynomial from forward differences with unit step."""
    values = [p(x + k) for k in range(degree + 1)]
    total = Fraction(0)
    for k in range(1, degree + 1):
        values = [b - a for a, b in zip(values, values[1:])]
        total += Fraction((-1) ** (k - 1), k) * values[0]
    return total


def check_hermite() -> tuple[bool, str]:
    failures = []
    xs = [Fraction(v) for v in (-3, -1, 0, 2, 5)] + [Fraction(7, 3), Fraction(-5, 2)]
    alphas = [Fraction(a) for a in (-2, 0, 1, 3)] + [Fraction(1, 2)]
    for n in range(0, 11):
        for x in xs:
            for a in alphas:
                h = hermite_param_eval(n, a, x)
                if n >= 1 and hermite_param_eval(n + 1, a, x) != x * h - n * a * hermite_param_eval(n - 1, a, x):
                    failures.append(f"recurrence n={n}")
                if h != _taylor_coefficient(n, a, x):
                    failures.append(f"generating function n={n}")
                if n >= 1:
                    d = _difference_derivative(lambda y: hermite_param_eval(n, a, y), x, n)
                    if d != n * hermite_param_eval(n - 1, a, x):
                        failures.append(f"derivative n={n}")
            if hermite_param_eval(n, 0, x) != x**n:
                failures.append(f"alpha=0 n={n}")
            if hermite_param_eval(n, 1, x) != hermite_eval(n, x):
                failures.append(f"alpha=1 n={n}")
            # scaling: h^[4]_n(x) = 2^n h_n(x / 2)
            if hermite_param_eval(n, 4, x) != 2**n * hermite_eval(n, x / 2):
                failures.append(f"scaling n={n}")
            # N(x, 2) moments against the binomial expansion with Gaussian moments
            exact = sum(
                math.comb(n, k) * x ** (n - k) * 2 ** (k // 2) * _double_factorial(k - 1)
                for k in range(0, n + 1, 2)
            )
            if conditional_moment(n, x, 2) != exact:
                failures.append(f"moment n={n}")
    worst = 0.0
    for x in np.linspace(-6.0, 6.0, 25):
        for a in (-1.5, 0.5, 1.0, 2.25):
            for n in range(0, 51):
                got = hermite_param_eval(n, a, float(x))
                ref = float(_exact_param(n, Fraction(a), Fraction(float(x))))
                worst = max(worst, abs(got - ref) / max(1.0, abs(ref)))
    s = 0.3
    for x in (-2.0, 0.5, 1.7):
        series = math.fsum(hermite_eval(n, x) * s**n / math.factorial(n) for n in range(51))
        worst = max(worst, abs(series - math.exp(x * s - s * s / 2)))
    if worst > 1e-12:
        failures.append(f"floating error {worst:.2e}")
    ok = not failures
    detail = "exact checks n<=10 and float n<=50" if ok else "; ".join(sorted(set(failures))[:6])
    return ok, f"{detail}, max float rel err {worst:.1e}"


def _double_factorial(k: int) -> int:
    return 1 if k <= 0 else k * _double_factorial(k - 2)


def _exact_param(n: int, a: Fraction, x: Fraction) -> Fraction:
    """Reference ``h_n^[a](x)`` from the explicit sum ``sum_k n!/(k!(n-2k)!) (-a/2)^k x^(n-2k)``.

    Evaluated over the common denominator ``(2 a_den)^(n//2) x_den^n`` in integers.
    """
    num_a, den_a = a.numerator, 2 * a.denominator
    num_x, den_x = x.numerator, x.denominator
    half = n // 2
    total = 0
    for k in range(half + 1):
        coef = math.factorial(n) // (math.factorial(k) * math.factorial(n - 2 * k))
        total += coef * (-num_a) ** k * den_a ** (half - k) * num_x ** (n - 2 * k) * den_x ** (2 * k)
    return Fraction(total, den_a**half * den_x**n)


# 2. Outer factorization ------------------------------------------------------


def _cauchy_residual(m: SpectralModel, w: complex = -1j) -> float:
    """``|int h(g) / (g - w) dg|`` for ``w`` in the lower half-plane.

    Vanishes when ``h`` is the boundary value of a function analytic and
    square integrable in the upper half-plane.
    """
    def part(x, which):
        g = x * x
        v = (outer_h(m, g) / (g - w) + outer_h(m, -g) / (-g - w)) * 2 * x
        return v.real if which == 0 else v.imag

    total = 0j
    for which, unit in ((0, 1.0), (1, 1j)):
        for lo, hi in ((0.0, 1.0), (1.0, np.inf)):
            v, _ = scipy.integrate.quad(part, lo, hi, args=(which,), limit=200, epsabs=1e-13)
            total += unit * v
    return abs(total)


def check_factorization() -> tuple[bool, str]:
    g = np.logspace(-6, 6, 200)
    worst_id = worst_real = worst_cauchy = 0.0
    for h in FACTOR_HURSTS:
        m = SpectralModel(h)
        for gg in (g, -g):
            hv = outer_h(m, gg)
            lhs = np.abs(hv) ** 2 * (1 + gg * gg)
            rhs = m.c_h * np.abs(gg) ** (1 - 2 * h)
            worst_id = max(worst_id, float(np.max(np.abs(lhs - rhs) / rhs)))
        # (-g - i) h(-g) = (g + i) conj(h(g))
        lhs = (-g - 1j) * outer_h(m, -g)
        rhs = (g + 1j) * np.conj(outer_h(m, g))
        worst_real = max(worst_real, float(np.max(np.abs(lhs - rhs) / np.abs(rhs))))
        worst_cauchy = max(worst_cauchy, _cauchy_residual(m))
    ok = worst_id < 1e-12 and worst_real < 1e-12 and worst_cauchy < 1e-9
    return ok, f"identity {worst_id:.1e}, reality {worst_real:.1e}, analyticity {worst_cauchy:.1e}"


# 3. Basis orthonormality -----------------------------------------------------


def basis_gram(m: SpectralModel, lo: int, hi: int, q: QuadratureSpec | None = None) -> np.ndarray:
    ns = np.arange(lo, hi + 1)
    ii, jj = np.triu_indices(len(ns))
    res = inner_product_delta(xi_hat_function(m, ns[ii]), xi_hat_function(m, ns[jj]), m, q or QuadratureSpec())
    vals = np.real(np.atleast_1d(res.value))
    gram = np.zeros((len(ns), len(ns)))
    gram[ii, jj] = vals
    gram[jj, ii] = vals
    return gram


def check_basis_gram() -> tuple[bool, str]:
    worst = {}
    for h in BASIS_HURSTS:
        gram = basis_gram(SpectralModel(h), -3, 3)
        worst[h] = float(np.max(np.abs(gram - np.eye(7))))
    ok = max(worst.values()) < 1e-4
    return ok, ", ".join(f"H={h}: {v:.1e}" for h, v in worst.items())


# 4. / 5. Coefficient energies ------------------------------------------------


def check_variance_identity() -> tuple[bool, str]:
    parts = []
    ok = True
    for h in BASIS_HURSTS:
        tbl = coeff_table(SpectralModel(h), 1.0, -512, 512)
        rel = abs(tbl.energy - 1.0)
        ok &= rel < 0.02
        parts.append(f"H={h}: sum r^2={tbl.energy:.4f}")
    return ok, ", ".join(parts)


def check_error_identity() -> tuple[bool, str]:
    m7 = SpectralModel(0.7)
    tbl = coeff_table(m7, 1.0, -512, 512)
    exact = exact_error(m7, 1.0)
    rel7 = abs(tbl.future_energy - exact) / exact
    half = coeff_table(SpectralModel(0.5), 1.0, -512, 512)
    rel5 = abs(half.future_energy - 1.0)
    ok = rel7 < 0.02 and rel5 < 0.02 and half.past_energy < 1e-3
    return ok, (f"H=0.7 future {tbl.future_energy:.4f} vs {exact:.4f}; "
                f"H=0.5 future {half.future_energy:.4f}, past {half.past_energy:.1e}; boundary j*={tbl.boundary}")


# 6. / 7. Monte Carlo -----------------------------------------------------------


def check_mc_gram() -> tuple[bool, str]:
    m = SpectralModel(MC_HURST)
    est = mc_gram(m, (-4, 4), TimeGrid.span(-16, 16, 2048), 10_000, seed=20240601)
    z = float(np.max(np.abs(est.z_scores())))
    bias16 = float(np.max(np.abs(est.expected - np.eye(9))))
    wide = discretized_gram(xi_kernels(m, list(range(-4, 5)), TimeGrid.span(-32, 32, 4096)))
    bias32 = float(np.max(np.abs(wide - np.eye(9))))
    ok = z < 5 and bias32 < bias16
    return ok, f"max |z|={z:.2f}; bias L=16: {bias16:.2e}, L=32: {bias32:.2e}"


def check_mc_prediction() -> tuple[bool, str]:
    m = SpectralModel(MC_HURST)
    rep = mc_prediction_experiment(m, 1.0, (-32, 32), TimeGrid.span(-8, 1, 576), 10_000, seed=20240602)
    ok = abs(rep.ratio - 1) < 0.10 and rep.max_abs_z < 5
    return ok, (f"ms residual {rep.ms_residual:.4f}+-{rep.ms_residual_se:.4f} vs exact {rep.exact_error:.4f} "
                f"(ratio {rep.ratio:.3f}, discretized {rep.discretized_error:.4f}); max |corr z|={rep.max_abs_z:.2f}")


# 8. Wick identities ----------------------------------------------------------


def check_wick() -> tuple[bool, str]:
    rng = np.random.default_rng(8)
    m = SpectralModel(0.7)
    window = (-8, 2)
    js = list(range(window[0], window[1] + 1))
    draws = {j: rng.standard_normal(1000) for j in js}
    notes = []
    ok = True

    # square of a first-order sum
    tbl = coeff_table(m, 1.0, *window)
    r = tbl.as_dict()
    x = sum(c * draws[j] for j, c in r.items())
    sq = chaos_eval(wick_square(r, tbl.energy), draws)
    err_sq = float(np.max(np.abs(sq - x * x) / np.maximum(1.0, x * x)))
    ok &= err_sq < 1e-10
    notes.append(f"square {err_sq:.1e}")

    # E[X^2 | past] = mu^2 + sigma^2 term by term
    predictor, square = conditional_expansions(m, 1.0, window)
    mu = {k.support[0]: c for k, c in predictor.terms.items()}
    past = sorted(mu)
    mu_energy = math.fsum(c * c for c in mu.values())
    sigma2 = m.variance(1.0) - mu_energy
    expected = {MultiIndex(): mu_energy + sigma2}
    for a, i in enumerate(past):
        expected[MultiIndex.unit(i, 2)] = mu[i] ** 2
        for j in past[a + 1:]:
            expected[MultiIndex.pair(i, j)] = 2.0 * mu[i] * mu[j]
    expected = ChaosExpansion(expected).terms
    same = dict(square.terms) == dict(expected) and set(mu) == set(tbl.past_classification)
    ok &= same
    notes.append("conditional square exact" if same else "conditional square MISMATCH")

    # Wick exponential of a small-variance sum
    c = coeff_table(m, 0.25, *window).as_dict()
    var = math.fsum(v * v for v in c.values())
    expo = wick_exponential(c, 6)
    mean, _ = chaos_mean_variance(expo)
    xs = sum(v * draws[j] for j, v in c.items())
    err_exp = float(np.max(np.abs(chaos_eval(expo, draws) - np.exp(xs - var / 2))))
    cond = chaos_condition(expo, PastSet.half_line(tbl.boundary))
    direct = wick_exponential({j: v for j, v in c.items() if j <= tbl.boundary}, 6)
    cond_ok = cond.terms.keys() == direct.terms.keys() and all(
        cond.terms[k] == direct.terms[k] for k in cond.terms
    )
    ok &= mean == 1.0 and err_exp < 1e-3 and cond_ok
    notes.append(f"exp mean {mean:g}, identity err {err_exp:.1e} (var {var:.3f}), conditioning {'exact' if cond_ok else 'MISMATCH'}")
    return ok, "; ".join(notes)


# 9. Finite horizon -----------------------------------------------------------


def check_finite_horizon() -> tuple[bool, str]:
    z = bessel_zeros(0.5, 50)
    zero_err = float(np.max(np.abs(z - np.pi * np.arange(1, 51))))
    off = {}
    gap = 0.0
    for h in (0.5, 0.7):
        m = SpectralModel(h)
        gram = fh_basis_gram(m, 1.0, 5)
        off[h] = float(np.max(np.abs(gram - np.eye(5))))
        for g in (0.37, 2.5, 11.0, -4.2, 40.0):
            on = kernel_S(m, 1.0, g, g)
            for rel in (1e-7, -1e-7):
                near = kernel_S(m, 1.0, g * (1 + rel), g)
                gap = max(gap, abs(on - near) / abs(on))
    ok = zero_err < 1e-10 and max(off.values()) < 1e-2 and gap < 1e-6
    return ok, (f"zero err {zero_err:.1e}; off-diagonal " + ", ".join(f"H={h}: {v:.1e}" for h, v in off.items())
                + f"; continuity gap {gap:.1e}")


# 10. Figure outputs ----------------------------------------------------------


def _read_csv(path: Path) -> list[dict[str, str]]:
    text = path.read_text()
    rows = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(rows))))


def check_figures(workdir: str | Path | None = None) -> tuple[bool, str]:
    from .cli import main

    with tempfile.TemporaryDirectory() as tmp:
        out = Path(workdir or tmp)
        out.mkdir(parents=True, exist_ok=True)
        base = ["--hurst", "0.7", "--t", "1", "--format", "both"]
        codes = [
            main(["coeffs", *base, "--jmin", "-512", "--jmax", "512", "--out", str(out / "coeffs")]),
            main(["error-curve", *base, "--jmin", "-512", "--jmax", "512", "--out", str(out / "error_curve")]),
            main(["render-path", *base, "--jmin", "-32", "--jmax", "32", "--grid-l", "16", "--grid-n", "2048",
                  "--seed", "1", "--out", str(out / "render_path")]),
        ]
        svgs = [out / f"{stem}.svg" for stem in ("coeffs", "error_curve", "render_path")]
        svg_ok = all(p.exists() and 'viewBox="0 0 800 500"' in p.read_text() for p in svgs)
        coeffs = _read_csv(out / "coeffs.csv")
        curve = _read_csv(out / "error_curve.csv")
        path = _read_csv(out / "render_path.csv")
    res = np.array([float(row["residual_after_k_coeffs"]) for row in curve])
    exact = float(curve[0]["exact"])
    monotone = bool(np.all(np.diff(res) <= 0))
    end_rel = abs(res[-1] - exact) / exact
    t = np.array([float(row["t"]) for row in path])
    future = np.array([float(row["future_component"]) for row in path])
    total = np.array([float(row["total"]) for row in path])
    scale = float(np.max(np.abs(total)))
    leak = float(np.max(np.abs(future[t <= 0]))) / scale
    ok = (codes == [0, 0, 0] and svg_ok and len(coeffs) == 1025 and monotone and end_rel < 0.05 and leak < 0.02)
    return ok, (f"exit codes {codes}, svg {'ok' if svg_ok else 'missing'}; error curve monotone={monotone}, "
                f"end {res[-1]:.4f} vs {exact:.4f}; future leak for t<=0 {leak:.1e}")


# Registry --------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    number: int
    name: str
    budget: float
    run: Callable[[], tuple[bool, str]]
    monte_carlo: bool = False


CHECKS = (
    Check(1, "hermite algebra", 1.0, check_hermite),
    Check(2, "outer factorization", 1.0, check_factorization),
    Check(3, "basis orthonormality", 60.0, check_basis_gram),
    Check(4, "variance identity", 300.0, check_variance_identity),
    Check(5, "closed-form prediction error", 300.0, check_error_identity),
    Check(6, "monte carlo orthonormality", 600.0, check_mc_gram, monte_carlo=True),
    Check(7, "monte carlo prediction", 600.0, check_mc_prediction, monte_carlo=True),
    Check(8, "wick identities", 60.0, check_wick),
    Check(9, "finite horizon basis", 120.0, check_finite_horizon),
    Check(10, "figure outputs", 300.0, check_figures),
)


def run_check(check: Check) -> CheckResult:
    start = time.perf_counter()
    try:
        ok, detail = check.run()
    except Exception as exc:  # a crash is reported as a failure of that check
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    seconds = time.perf_counter() - start
    if ok and seconds > check.budget:
        ok, detail = False, f"over budget; {detail}"
    return CheckResult(check.number, check.name, "PASS" if ok else "FAIL", seconds, check.budget, detail)


def run_checks(quick: bool = False, only: set[int] | None = None, echo: Callable[[str], None] | None = None):
    results = []
    for check in CHECKS:
        if only is not None and check.number not in only:
            continue
        if quick and check.monte_carlo:
            res = CheckResult(check.number, check.name, "SKIP", 0.0, check.budget, "monte carlo skipped (--quick)")
        else:
            res = run_check(check)
        results.append(res)
        if echo is not None:
            echo(res.line())
    return results


def report_csv(results) -> str:
    buf = io.StringIO()
    buf.write("criterion,name,status,seconds,budget_seconds,detail\n")
    for r in results:
        detail = r.detail.replace('"', "'")
        buf.write(f'{r.number},{r.name},{r.status},{r.seconds:.3f},{r.budget:g},"{detail}"\n')
    return buf.getvalue()
