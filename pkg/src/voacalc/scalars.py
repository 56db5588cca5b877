"""Exact and floating scalar backends.

The exact backend works in the cyclotomic field Q(z) with z = exp(i*pi/4),
i.e. rationals extended by an eighth root of unity.  This field contains i
and sqrt(2), which is everything the built-in models need: all phases that
occur are integer powers of z and all structure constants are rational
multiples of sqrt(2)-powers.

Rationals are gmpy2.mpq when available (much faster), Fraction otherwise.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

try:
    from gmpy2 import mpq as _mpq

    def rat(p, q=1):
        return _mpq(p, q)

    RAT_TYPES = (int, Fraction, type(_mpq(0)))
except ImportError:  # pragma: no cover
    def rat(p, q=1):
        return Fraction(p, q)

    RAT_TYPES = (int, Fraction)

RAT_ZERO = rat(0)
RAT_ONE = rat(1)


def as_fraction(x) -> Fraction:
    """Convert an exact rational (mpq/Fraction/int) to Fraction."""
    if isinstance(x, Fraction):
        return x
    return Fraction(x.numerator, x.denominator) if not isinstance(x, int) else Fraction(x)


_SQRT_HALF = 2 ** -0.5
# complex values of z^k for k = 0..7, z = exp(i*pi/4)
_Z8_COMPLEX = tuple(
    complex(round(np.cos(k * np.pi / 4), 15), round(np.sin(k * np.pi / 4), 15))
    for k in range(8)
)


class Cyclo8:
    """Element a + b*z + c*z^2 + d*z^3 of Q(z), z = exp(i*pi/4), z^4 = -1."""

    __slots__ = ("c",)

    def __init__(self, c0=0, c1=0, c2=0, c3=0):
        self.c = (rat(c0), rat(c1), rat(c2), rat(c3))

    @staticmethod
    def _raw(c):
        out = Cyclo8.__new__(Cyclo8)
        out.c = c
        return out

    @staticmethod
    def from_rat(x):
        return Cyclo8._raw((rat(x.numerator, x.denominator) if not isinstance(x, int) else rat(x),
                            RAT_ZERO, RAT_ZERO, RAT_ZERO))

    @staticmethod
    def zeta(k: int) -> "Cyclo8":
        """z^k for any integer k."""
        k %= 8
        sign = RAT_ONE if k < 4 else -RAT_ONE
        c = [RAT_ZERO] * 4
        c[k % 4] = sign
        return Cyclo8._raw(tuple(c))

    @staticmethod
    def sqrt2() -> "Cyclo8":
        return Cyclo8(0, 1, 0, -1)

    @staticmethod
    def i() -> "Cyclo8":
        return Cyclo8(0, 0, 1, 0)

    def _coerce(self, other):
        if isinstance(other, Cyclo8):
            return other
        if isinstance(other, RAT_TYPES):
            return Cyclo8.from_rat(other)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        a, b = self.c, o.c
        return Cyclo8._raw((a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]))

    __radd__ = __add__

    def __neg__(self):
        a = self.c
        return Cyclo8._raw((-a[0], -a[1], -a[2], -a[3]))

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        a, b = self.c, o.c
        return Cyclo8._raw((a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]))

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        a0, a1, a2, a3 = self.c
        b0, b1, b2, b3 = o.c
        # z^4 = -1
        return Cyclo8._raw((
            a0 * b0 - a1 * b3 - a2 * b2 - a3 * b1,
            a0 * b1 + a1 * b0 - a2 * b3 - a3 * b2,
            a0 * b2 + a1 * b1 + a2 * b0 - a3 * b3,
            a0 * b3 + a1 * b2 + a2 * b1 + a3 * b0,
        ))

    __rmul__ = __mul__

    def inverse(self) -> "Cyclo8":
        # multiply by the three Galois conjugates; the product is rational
        g1 = self.galois(3)
        g2 = self.galois(5)
        g3 = self.galois(7)
        num = g1 * g2 * g3
        den = (self * num).c
        if den[1] or den[2] or den[3] or not den[0]:
            if not any(self.c):
                raise ZeroDivisionError("division by zero Cyclo8")
            raise ArithmeticError("norm computation failed")
        d = den[0]
        return Cyclo8._raw(tuple(x / d for x in num.c))

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def galois(self, k: int) -> "Cyclo8":
        """The automorphism z -> z^k, k odd."""
        out = [RAT_ZERO] * 4
        for j, cj in enumerate(self.c):
            if cj:
                e = (j * k) % 8
                if e < 4:
                    out[e] += cj
                else:
                    out[e - 4] -= cj
        return Cyclo8._raw(tuple(out))

    def conjugate(self) -> "Cyclo8":
        return self.galois(7)

    def __eq__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self.c == o.c

    def __hash__(self):
        return hash(self.c)

    def __bool__(self):
        return any(self.c)

    def __complex__(self):
        return (complex(self.c[0]) + complex(self.c[1]) * _Z8_COMPLEX[1]
                + complex(self.c[2]) * 1j + complex(self.c[3]) * _Z8_COMPLEX[3])

    def is_rational(self) -> bool:
        return not (self.c[1] or self.c[2] or self.c[3])

    def rational_part(self):
        return self.c[0]

    def __repr__(self):
        names = ("", "*z8", "*i", "*z8**3")
        terms = [f"{c}{n}" for c, n in zip(self.c, names) if c]
        return "Cyclo8(" + (" + ".join(terms) if terms else "0") + ")"


C8_ZERO = Cyclo8()
C8_ONE = Cyclo8(1)


def exact_phase_half_turns(t) -> Cyclo8:
    """exp(i*pi*t) for a rational t with denominator dividing 4."""
    t = rat(t.numerator, t.denominator) if not isinstance(t, int) else rat(t)
    k = t * 4
    if k.denominator != 1:
        raise ValueError(f"phase exp(i*pi*{t}) is not an eighth root of unity")
    return Cyclo8.zeta(int(k))


def to_complex(x) -> complex:
    if isinstance(x, Cyclo8):
        return complex(x)
    if isinstance(x, RAT_TYPES):
        return complex(float(x), 0.0)
    return complex(x)


def conj_scalar(x):
    if isinstance(x, Cyclo8):
        return x.conjugate()
    if isinstance(x, RAT_TYPES):
        return x
    return x.conjugate() if isinstance(x, complex) else np.conjugate(x)


def snap_to_cyclo8(value: complex, max_den: int = 64, tol: float = 1e-6):
    """Recognize a float as an element of Q(z8) with small denominators.

    Returns (Cyclo8, residual) or (None, inf) when nothing matches within tol.
    Searches a + b*sqrt(2)/2 forms on real and imaginary parts jointly via the
    basis (1, z, i, z^3).
    """
    # solve value = c0 + c1/sqrt(2) + i*(c2 + c1/sqrt(2)) style decomposition:
    # Re = c0 + (c1 - c3)/sqrt(2),  Im = c2 + (c1 + c3)/sqrt(2)
    best = (None, float("inf"))
    for b_re_num in _snap_candidates(value.real, max_den):
        c0, u = b_re_num  # Re = c0 + u/sqrt(2)
        for b_im_num in _snap_candidates(value.imag, max_den):
            c2, v = b_im_num  # Im = c2 + v/sqrt(2)
            # u = c1 - c3, v = c1 + c3  ->  c1 = (u+v)/2, c3 = (v-u)/2
            c1 = (u + v) / 2
            c3 = (v - u) / 2
            cand = Cyclo8(c0, c1, c2, c3)
            res = abs(complex(cand) - value)
            if res < best[1]:
                best = (cand, res)
    cand, res = best
    if cand is not None and res <= tol:
        return cand, res
    return None, float("inf")


def _snap_candidates(x: float, max_den: int):
    """Yield (a, u) rational pairs with x ~ a + u/sqrt(2)."""
    seen = set()
    for u_frac in ({Fraction(0)} | {Fraction(round(x * _SQRT_HALF ** -1 * d), d)
                                    for d in (1, 2, 4)}):
        rem = x - float(u_frac) * _SQRT_HALF
        for d in (1, 2, 4, 8, 16, max_den):
            a = Fraction(round(rem * d), d)
            key = (a, u_frac)
            if key not in seen:
                seen.add(key)
                yield rat(a.numerator, a.denominator), rat(u_frac.numerator, u_frac.denominator)
