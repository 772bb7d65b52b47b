"""Truncated Laurent series in a perturbation symbol with RatFunc
coefficients.

The perturbation symbol is implicit (a single shared epsilon); coefficients
are exact rational functions in whatever free symbols the orbit carries
(initial data, parameters).  Series are exact up to their truncation order.
"""

from __future__ import annotations

from fractions import Fraction

from .algebra import MPoly, RatFunc, _as_ratfunc
from .errors import PrecisionExhausted

DEFAULT_TRUNCATION = 12
MAX_TRUNCATION = 96

_ZERO = RatFunc.zero()

# Optional coefficient filter applied on construction; used to work with
# jets of a perturbation symbol instead of exact rational functions, which
# would blow up in degree along an orbit.
_COEFF_FILTER = None


class jet_coefficients:
    """Context manager: carry every series coefficient as a TJet of `var`
    (var-power factored exactly, a window of `order` mantissa digits).

    Cancellations at var = 0 consume guard digits silently, so results of
    a jet run are first-order data that must be confirmed exactly."""

    def __init__(self, var, order=8):
        self.var = var
        self.order = order
        self.saved = None

    def __enter__(self):
        global _COEFF_FILTER
        from . import algebra
        self.saved = (_COEFF_FILTER, algebra._JET_WIDTH)
        algebra._JET_WIDTH = self.order
        var = self.var
        _COEFF_FILTER = lambda c: algebra.as_tjet(c, var)
        return self

    def __exit__(self, *exc):
        global _COEFF_FILTER
        from . import algebra
        _COEFF_FILTER, algebra._JET_WIDTH = self.saved
        return False


class LaurentSeries:
    """coeffs[i] is the coefficient of eps^(valuation + i); the window
    [valuation, truncation) is exact.  A series that vanishes identically
    up to truncation has empty coeffs and valuation == truncation."""

    __slots__ = ("valuation", "coeffs", "truncation")

    def __init__(self, valuation, coeffs, truncation):
        if _COEFF_FILTER is not None:
            coeffs = [_COEFF_FILTER(c) for c in coeffs]
        else:
            coeffs = [_as_ratfunc(c) for c in coeffs]
        # strip leading zeros, clip to the window
        while coeffs and coeffs[0].is_zero():
            coeffs.pop(0)
            valuation += 1
        if valuation + len(coeffs) > truncation:
            coeffs = coeffs[: truncation - valuation]
        while coeffs and coeffs[-1].is_zero():
            coeffs.pop()
        if not coeffs:
            valuation = truncation
        object.__setattr__(self, "valuation", valuation)
        object.__setattr__(self, "coeffs", tuple(coeffs))
        object.__setattr__(self, "truncation", truncation)

    def __setattr__(self, *a):
        raise AttributeError("LaurentSeries is immutable")

    # -- constructors -------------------------------------------------

    @staticmethod
    def constant(value, truncation=DEFAULT_TRUNCATION):
        return LaurentSeries(0, [_as_ratfunc(value)], truncation)

    @staticmethod
    def eps(truncation=DEFAULT_TRUNCATION, power=1, coeff=1):
        return LaurentSeries(power, [_as_ratfunc(coeff)], truncation)

    @staticmethod
    def zero(truncation=DEFAULT_TRUNCATION):
        return LaurentSeries(truncation, [], truncation)

    # -- queries ------------------------------------------------------

    def is_zero(self):
        return not self.coeffs

    def coeff(self, k):
        """Coefficient of eps^k; raises PrecisionExhausted outside the
        exact window."""
        if k >= self.truncation:
            raise PrecisionExhausted(f"coefficient {k} beyond truncation")
        if k < self.valuation:
            return _ZERO
        return self.coeffs[k - self.valuation]

    def leading(self):
        if not self.coeffs:
            raise PrecisionExhausted("series vanishes up to truncation")
        return self.coeffs[0]

    def epsilon_zero(self):
        """The eps^0 part as an extended value.

        Negative valuation means infinity; positive means exactly 0
        (within the window)."""
        from .algebra import ExtValue, INF
        if self.is_zero():
            if self.truncation <= 0:
                raise PrecisionExhausted("sign of the leading term unknown")
            return ExtValue.finite(0)
        if self.valuation < 0:
            return INF
        if self.truncation <= 0:
            raise PrecisionExhausted("eps^0 coefficient beyond truncation")
        return ExtValue.finite(self.coeff(0))

    def depends_on(self, symbols):
        """True when any exact coefficient involves any of the symbols."""
        for c in self.coeffs:
            for s in symbols:
                if c.depends_on(s):
                    return True
        return False

    def __eq__(self, other):
        if not isinstance(other, LaurentSeries):
            return NotImplemented
        return (self.valuation == other.valuation
                and self.coeffs == other.coeffs
                and self.truncation == other.truncation)

    def __str__(self):
        if not self.coeffs:
            return f"O(eps^{self.truncation})"
        parts = []
        for i, c in enumerate(self.coeffs):
            k = self.valuation + i
            if c.is_zero():
                continue
            cs = str(c)
            if k == 0:
                parts.append(cs)
            else:
                term = "eps" if k == 1 else f"eps^{k}"
                parts.append(f"({cs})*{term}")
        parts.append(f"O(eps^{self.truncation})")
        return " + ".join(parts)

    __repr__ = __str__

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, Fraction, RatFunc, MPoly)):
            other = LaurentSeries.constant(other, self.truncation)
        if not isinstance(other, LaurentSeries):
            return NotImplemented
        trunc = min(self.truncation, other.truncation)
        lo = min(self.valuation, other.valuation, trunc)
        out = []
        for k in range(lo, trunc):
            a = self.coeffs[k - self.valuation] if self.valuation <= k < self.valuation + len(self.coeffs) else _ZERO
            b = other.coeffs[k - other.valuation] if other.valuation <= k < other.valuation + len(other.coeffs) else _ZERO
            out.append(a + b)
        return LaurentSeries(lo, out, trunc)

    __radd__ = __add__

    def __neg__(self):
        return LaurentSeries(self.valuation, [-c for c in self.coeffs],
                             self.truncation)

    def __sub__(self, other):
        if isinstance(other, (int, Fraction, RatFunc, MPoly)):
            other = LaurentSeries.constant(other, self.truncation)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, RatFunc, MPoly)):
            c = _as_ratfunc(other)
            if c.is_zero():
                return LaurentSeries.zero(self.truncation)
            return LaurentSeries(self.valuation,
                                 [x * c for x in self.coeffs],
                                 self.truncation)
        if not isinstance(other, LaurentSeries):
            return NotImplemented
        if self.is_zero() or other.is_zero():
            # product exact at least to the best available bound
            trunc = min(self.truncation + other.valuation,
                        other.truncation + self.valuation)
            return LaurentSeries.zero(trunc)
        trunc = min(self.truncation + other.valuation,
                    other.truncation + self.valuation)
        lo = self.valuation + other.valuation
        n = trunc - lo
        out = [_ZERO] * n
        for i, a in enumerate(self.coeffs):
            if a.is_zero():
                continue
            for j, b in enumerate(other.coeffs):
                k = i + j
                if k >= n:
                    break
                if not b.is_zero():
                    out[k] = out[k] + a * b
        return LaurentSeries(lo, out, trunc)

    __rmul__ = __mul__

    def inverse(self):
        if self.is_zero():
            raise PrecisionExhausted("cannot invert a series that vanishes "
                                     "up to truncation")
        b0 = self.coeffs[0]
        n = self.truncation - self.valuation
        inv = [b0.inverse()]
        for k in range(1, n):
            s = RatFunc.zero()
            for i in range(1, k + 1):
                bi = self.coeffs[i] if i < len(self.coeffs) else _ZERO
                if not bi.is_zero():
                    s = s + bi * inv[k - i]
            inv.append(-s / b0)
        return LaurentSeries(-self.valuation, inv,
                             -self.valuation + n)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction, RatFunc, MPoly)):
            return self * _as_ratfunc(other).inverse()
        if not isinstance(other, LaurentSeries):
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        return LaurentSeries.constant(other, self.truncation) / self

    def __pow__(self, k):
        if not isinstance(k, int):
            raise ValueError("integer powers only")
        if k < 0:
            return self.inverse() ** (-k)
        result = LaurentSeries.constant(1, self.truncation)
        base = self
        first = True
        while k:
            if k & 1:
                result = base if first else result * base
                first = False
            k >>= 1
            if k:
                base = base * base
        return result

    def refine(self, truncation):
        """Widen the declared window (coefficients stay exact only if the
        series was exact; used when rebuilding from scratch)."""
        if truncation <= self.truncation:
            return LaurentSeries(self.valuation, list(self.coeffs), truncation)
        raise PrecisionExhausted("cannot extend an already-truncated series")


def series_arith(a, b, op):
    """Named arithmetic entry point: op in add|sub|mul|div."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown op {op!r}")


def poly_on_series(poly, bindings, truncation=DEFAULT_TRUNCATION):
    """Evaluate an MPoly with some variables bound to series.

    Unbound variables stay symbolic inside the RatFunc coefficients."""
    total = LaurentSeries.zero(truncation)
    powers = {}
    for e, c in poly.terms.items():
        term = LaurentSeries.constant(c, truncation)
        sym = RatFunc.one()
        for v, p in zip(poly.vars, e):
            if p == 0:
                continue
            if v in bindings:
                key = (v, p)
                if key not in powers:
                    powers[key] = bindings[v] ** p
                term = term * powers[key]
            else:
                sym = sym * RatFunc.from_poly(MPoly.var(v, p))
        if not (sym == RatFunc.one()):
            term = term * sym
        total = total + term
    return total


def ratfunc_on_series(rf, bindings, truncation=DEFAULT_TRUNCATION):
    num = poly_on_series(rf.num, bindings, truncation)
    den = poly_on_series(rf.den, bindings, truncation)
    return num / den
