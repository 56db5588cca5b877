"""Argument-tracked complex arithmetic and quasi power series.

Arguments are real numbers and are never reduced mod 2*pi; branch choices are
made at construction sites.  Quasi power series have exponents in a finite
set of coset representatives plus nonnegative integers, and evaluation
reports a heuristic geometric tail bound from the ratio of successive
total-degree sums.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (NoConvergenceEvidenceError, PathThroughZeroError,
                     RadialLimitError)
from .graded import frac


@dataclass(frozen=True)
class AngledComplex:
    """Nonzero complex number with a tracked (unreduced) argument."""

    modulus: float
    argument: float

    def __post_init__(self):
        if self.modulus <= 0:
            raise ValueError("AngledComplex needs positive modulus")

    @staticmethod
    def from_complex(z: complex, argument: float = None) -> "AngledComplex":
        arg = cmath.phase(z) if argument is None else argument
        return AngledComplex(abs(z), arg)

    @staticmethod
    def positive(x: float) -> "AngledComplex":
        return AngledComplex(float(x), 0.0)

    @property
    def value(self) -> complex:
        return self.modulus * cmath.exp(1j * self.argument)

    def conjugate(self) -> "AngledComplex":
        return AngledComplex(self.modulus, -self.argument)

    def __repr__(self):
        return f"AngledComplex({self.modulus:.6g}, arg={self.argument:.6g})"


def ac_mul(a: AngledComplex, b: AngledComplex) -> AngledComplex:
    """Moduli multiply, arguments add (never reduced)."""
    return AngledComplex(a.modulus * b.modulus, a.argument + b.argument)


def ac_div(a: AngledComplex, b: AngledComplex) -> AngledComplex:
    return AngledComplex(a.modulus / b.modulus, a.argument - b.argument)


def ac_pow(a: AngledComplex, s) -> AngledComplex:
    """a^s with arg(a^s) = s*arg(a)."""
    s = float(s)
    return AngledComplex(a.modulus ** s, s * a.argument)


def ac_value_pow(a: AngledComplex, s) -> complex:
    """The complex value of a^s under the tracked-argument convention."""
    s = float(s)
    return (a.modulus ** s) * cmath.exp(1j * s * a.argument)


def arg_transport(f, t0: float, t1: float, start_arg: float = None,
                  samples: int = 64, max_depth: int = 24) -> float:
    """Continuous argument of f at t1, transported from t0 along [t0, t1].

    f maps a real parameter to a nonzero complex value.  Sampling is refined
    adaptively until successive raw arguments differ by less than pi/2.
    Returns the unwrapped argument at t1; the start argument defaults to the
    principal argument of f(t0).
    """
    z0 = f(t0)
    if z0 == 0:
        raise PathThroughZeroError("path through zero at start")
    arg = cmath.phase(z0) if start_arg is None else start_arg
    prev = z0
    n = samples
    for depth in range(max_depth):
        ok = True
        arg_run = arg
        prev = z0
        for k in range(1, n + 1):
            t = t0 + (t1 - t0) * k / n
            z = f(t)
            if z == 0:
                raise PathThroughZeroError(f"path through zero at t={t}")
            delta = cmath.phase(z / prev)
            if abs(delta) >= math.pi / 2:
                ok = False
                break
            arg_run += delta
            prev = z
        if ok:
            return arg_run
        n *= 2
    raise PathThroughZeroError("argument transport failed to refine")


def arg_close_to(f_of_eps, target_arg_at_zero: float, eps: float = 1.0) -> float:
    """Argument of f(eps) that is 'close to' the given argument as eps -> 0.

    Transports the argument from the limit configuration at parameter 0
    (where the argument is known) out to parameter eps.
    """
    lo = 1e-9
    return arg_transport(f_of_eps, lo, eps, start_arg=target_arg_at_zero)


@dataclass
class QuasiPowerSeries:
    """Series sum_mu c_mu * prod z_m^{mu_m}, exponents in cosets + Z>=0.

    cosets: per-variable tuple of Fractions (the finite base-exponent sets).
    coefficients: dict exponent-tuple (Fractions) -> complex.
    """

    nvars: int
    cosets: tuple[tuple[Fraction, ...], ...]
    coefficients: dict[tuple[Fraction, ...], complex] = field(default_factory=dict)

    def __post_init__(self):
        if self.nvars < 1:
            raise ValueError("need at least one variable")
        for expo in self.coefficients:
            self._check_exponent(expo)

    def _check_exponent(self, expo):
        if len(expo) != self.nvars:
            raise ValueError("exponent tuple has wrong arity")
        for m, e in enumerate(expo):
            if not any((e - base).denominator == 1 and e - base >= 0
                       for base in self.cosets[m]):
                raise ValueError(f"exponent {e} not in declared cosets of variable {m}")

    def add_term(self, expo, coeff):
        expo = tuple(frac(e) for e in expo)
        self._check_exponent(expo)
        self.coefficients[expo] = self.coefficients.get(expo, 0j) + complex(coeff)

    def degree(self, expo) -> int:
        """Total integer degree above the per-variable minimal base exponent."""
        total = 0
        for m, e in enumerate(expo):
            base = min(b for b in self.cosets[m]
                       if (e - b).denominator == 1 and e - b >= 0)
            total += int(e - base)
        return total

    def truncated(self, max_degree: int) -> "QuasiPowerSeries":
        coeffs = {e: c for e, c in self.coefficients.items()
                  if self.degree(e) <= max_degree}
        return QuasiPowerSeries(self.nvars, self.cosets, coeffs)

    def max_degree(self) -> int:
        return max((self.degree(e) for e in self.coefficients), default=0)


def qps_eval(series: QuasiPowerSeries, point: tuple[AngledComplex, ...]
             ) -> tuple[complex, float, float]:
    """Evaluate at an argument-tracked point; return (value, tail_bound, ratio).

    The tail bound groups terms by total degree, fits the geometric ratio of
    successive degree sums over the top half of stored degrees, and reports
    last_sum * rho / (1 - rho).  rho >= 1 raises NoConvergenceEvidenceError.
    """
    if len(point) != series.nvars:
        raise ValueError("point arity mismatch")
    if not series.coefficients:
        return 0j, 0.0, 0.0
    by_degree: dict[int, complex] = {}
    by_degree_abs: dict[int, float] = {}
    for expo, c in series.coefficients.items():
        term = complex(c)
        for m, e in enumerate(expo):
            term *= ac_value_pow(point[m], e)
        d = series.degree(expo)
        by_degree[d] = by_degree.get(d, 0j) + term
        by_degree_abs[d] = by_degree_abs.get(d, 0.0) + abs(term)
    value = sum(by_degree.values())
    degrees = sorted(by_degree_abs)
    if len(degrees) == 1:
        return value, 0.0, 0.0
    top = degrees[len(degrees) // 2:]
    ratios = []
    for d0, d1 in zip(top, top[1:]):
        a0, a1 = by_degree_abs[d0], by_degree_abs[d1]
        if a0 > 0:
            ratios.append((a1 / a0) ** (1.0 / (d1 - d0)))
    if not ratios:
        return value, 0.0, 0.0
    rho = float(np.median(ratios))
    last = by_degree_abs[degrees[-1]]
    if last == 0.0:
        nz = [d for d in degrees if by_degree_abs[d] > 0]
        last = by_degree_abs[nz[-1]] if nz else 0.0
    if rho >= 1.0:
        raise NoConvergenceEvidenceError(rho)
    tail = last * rho / (1.0 - rho)
    return value, tail, rho


def qps_eval_iterated(series: QuasiPowerSeries, point) -> complex:
    """Sum one variable at a time (innermost first); same value as qps_eval."""
    groups: dict[tuple, dict] = {}
    for expo, c in series.coefficients.items():
        groups.setdefault(expo[1:], {})[expo[0]] = c
    total = 0j
    for rest, inner_terms in sorted(groups.items()):
        inner = sum(complex(c) * ac_value_pow(point[0], e)
                    for e, c in sorted(inner_terms.items()))
        outer = inner
        for m, e in enumerate(rest, start=1):
            outer *= ac_value_pow(point[m], e)
        total += outer
    return total


def qps_assert_zero_by_sampling(series: QuasiPowerSeries, samples,
                                tol: float = 1e-9) -> bool:
    """True when sampled values vanish and leading coefficients vanish.

    samples: iterable of points (tuples of AngledComplex) converging to zero.
    Also extracts the leading coefficient as lim f(z) z^{-mu} on the sample
    sequence and requires it to vanish.
    """
    scale = max((abs(c) for c in series.coefficients.values()), default=0.0)
    if scale == 0.0:
        return True
    for pt in samples:
        val, _, _ = qps_eval(series, pt)
        if abs(val) > tol * scale:
            return False
    lead = leading_coefficient_estimate(series, samples)
    if lead is not None and abs(lead) > tol * scale:
        return False
    min_deg = min(series.degree(e) for e in series.coefficients)
    leading = [c for e, c in series.coefficients.items()
               if series.degree(e) == min_deg]
    return all(abs(c) <= tol * scale for c in leading)


def leading_coefficient_estimate(series: QuasiPowerSeries, samples):
    """lim f(z) * z^{-mu} along the samples, mu = exponent of smallest degree."""
    if not series.coefficients:
        return None
    lead_expo = min(series.coefficients,
                    key=lambda e: (series.degree(e), tuple(map(float, e))))
    vals = []
    for pt in samples:
        val, _, _ = qps_eval(series, pt)
        denom = 1.0 + 0j
        for m, e in enumerate(lead_expo):
            denom *= ac_value_pow(pt[m], e)
        vals.append(val / denom)
    return vals[-1] if vals else None


def radial_limit(evaluator, k_min: int = 3, k_max: int = 12, order: int = 2,
                 rtol: float = 1e-6) -> tuple[complex, float]:
    """Limit as r -> 1 of evaluator(r), r = 1 - 2^-k, Richardson order 2.

    Returns (limit, error_estimate); raises RadialLimitError when the last
    two extrapolants disagree badly.
    """
    ks = list(range(k_min, k_max + 1))
    vals = [complex(evaluator(1.0 - 2.0 ** -k)) for k in ks]
    rows = [vals]
    for level in range(1, order + 1):
        prev = rows[-1]
        fac = 2.0 ** level
        rows.append([(fac * prev[i + 1] - prev[i]) / (fac - 1.0)
                     for i in range(len(prev) - 1)])
    top = rows[-1]
    if len(top) < 2:
        raise RadialLimitError("not enough radii for extrapolation")
    err = abs(top[-1] - top[-2])
    scale = max(abs(top[-1]), 1e-300)
    if err > max(rtol * scale, 1e-12) * 1e4:
        raise RadialLimitError(
            f"radial limit not stabilizing: last extrapolants differ by {err:.3g}")
    return top[-1], err
