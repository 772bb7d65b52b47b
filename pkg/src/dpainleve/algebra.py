"""Exact sparse multivariate polynomial and rational-function arithmetic.

Polynomials live over the integers with named variables; rational functions
are canonical reduced integer-polynomial pairs.  Monomial order is graded
lexicographic with variables sorted alphabetically by name.  Everything is
immutable and pure.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction

from .errors import (
    DivisionByZero,
    IndeterminateForm,
    JetPrecisionLost,
    VariableAbsent,
    ZeroDenominator,
)

_rng = random.Random(0x5EED)


def _grlex_key(exps):
    return (sum(exps), exps)


class MPoly:
    """Sparse multivariate polynomial with integer coefficients.

    ``terms`` maps exponent tuples (one entry per variable in ``vars``) to
    nonzero integer coefficients.  ``vars`` is always sorted; variables not
    actually occurring are dropped, so equal polynomials compare equal
    regardless of how they were built.
    """

    __slots__ = ("vars", "terms")

    def __init__(self, terms=None, variables=()):
        variables = tuple(variables)
        clean = {}
        used = [False] * len(variables)
        if terms:
            for exps, c in terms.items():
                if c == 0:
                    continue
                exps = tuple(exps)
                if len(exps) != len(variables):
                    raise ValueError("exponent vector length mismatch")
                clean[exps] = clean.get(exps, 0) + c
                for i, e in enumerate(exps):
                    if e:
                        used[i] = True
        clean = {e: c for e, c in clean.items() if c != 0}
        if not all(used):
            keep = [i for i, u in enumerate(used) if u]
            variables = tuple(variables[i] for i in keep)
            clean = {tuple(e[i] for i in keep): c for e, c in clean.items()}
        if list(variables) != sorted(variables):
            order = sorted(range(len(variables)), key=lambda i: variables[i])
            variables = tuple(variables[i] for i in order)
            clean = {tuple(e[i] for i in order): c for e, c in clean.items()}
        object.__setattr__(self, "vars", variables)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, *a):
        raise AttributeError("MPoly is immutable")

    # -- constructors -------------------------------------------------

    @staticmethod
    def const(c):
        c = int(c)
        return MPoly({(): c} if c else {}, ())

    @staticmethod
    def var(name, power=1):
        if power < 0:
            raise ValueError("negative power")
        if power == 0:
            return MPoly.const(1)
        return MPoly({(power,): 1}, (name,))

    # -- basic queries ------------------------------------------------

    def is_zero(self):
        return not self.terms

    def is_constant(self):
        return not self.vars

    def const_value(self):
        if self.vars:
            raise ValueError("not a constant")
        return self.terms.get((), 0)

    def degree(self, var):
        if var not in self.vars:
            return 0
        i = self.vars.index(var)
        return max((e[i] for e in self.terms), default=0)

    def total_degree(self):
        return max((sum(e) for e in self.terms), default=0)

    def leading_term(self):
        """(exponents, coeff) of the graded-lex leading term."""
        if not self.terms:
            raise ValueError("zero polynomial has no leading term")
        e = max(self.terms, key=_grlex_key)
        return e, self.terms[e]

    def leading_coeff(self):
        return self.leading_term()[1] if self.terms else 0

    def content(self):
        return math.gcd(*self.terms.values()) if self.terms else 0

    def __bool__(self):
        return bool(self.terms)

    def __hash__(self):
        return hash((self.vars, frozenset(self.terms.items())))

    def __eq__(self, other):
        if isinstance(other, int):
            other = MPoly.const(other)
        if not isinstance(other, MPoly):
            return NotImplemented
        return self.vars == other.vars and self.terms == other.terms

    # -- variable alignment -------------------------------------------

    def _embed(self, variables):
        """Re-express over the (sorted) superset ``variables``."""
        if variables == self.vars:
            return self.terms
        idx = [variables.index(v) for v in self.vars]
        n = len(variables)
        out = {}
        for e, c in self.terms.items():
            ne = [0] * n
            for i, p in zip(idx, e):
                ne[i] = p
            out[tuple(ne)] = c
        return out

    @staticmethod
    def _common_vars(a, b):
        if a.vars == b.vars:
            return a.vars
        return tuple(sorted(set(a.vars) | set(b.vars)))

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other):
        if isinstance(other, int):
            other = MPoly.const(other)
        if not isinstance(other, MPoly):
            return NotImplemented
        cv = MPoly._common_vars(self, other)
        ta = dict(self._embed(cv))
        for e, c in other._embed(cv).items():
            ta[e] = ta.get(e, 0) + c
        return MPoly(ta, cv)

    __radd__ = __add__

    def __neg__(self):
        return MPoly({e: -c for e, c in self.terms.items()}, self.vars)

    def __sub__(self, other):
        if isinstance(other, int):
            other = MPoly.const(other)
        if not isinstance(other, MPoly):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, int):
            other = MPoly.const(other)
        if not isinstance(other, MPoly):
            return NotImplemented
        if not self.terms or not other.terms:
            return MPoly.const(0)
        cv = MPoly._common_vars(self, other)
        ta, tb = self._embed(cv), other._embed(cv)
        out = {}
        for ea, ca in ta.items():
            for eb, cb in tb.items():
                e = tuple(x + y for x, y in zip(ea, eb))
                out[e] = out.get(e, 0) + ca * cb
        return MPoly(out, cv)

    __rmul__ = __mul__

    def __pow__(self, k):
        if not isinstance(k, int) or k < 0:
            raise ValueError("nonnegative integer powers only")
        result = MPoly.const(1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    # -- univariate views ---------------------------------------------

    def as_univariate(self, var):
        """Map degree-in-var -> coefficient MPoly in the other variables."""
        if var not in self.vars:
            return {0: self} if self.terms else {}
        i = self.vars.index(var)
        rest = self.vars[:i] + self.vars[i + 1:]
        out = {}
        for e, c in self.terms.items():
            k = e[i]
            re = e[:i] + e[i + 1:]
            out.setdefault(k, {})[re] = c
        return {k: MPoly(t, rest) for k, t in out.items()}

    @staticmethod
    def from_univariate(var, coeffs):
        """Inverse of :meth:`as_univariate`."""
        acc = MPoly.const(0)
        xv = MPoly.var(var)
        for k, p in coeffs.items():
            acc = acc + p * xv ** k
        return acc

    def coeff_of(self, var, k):
        return self.as_univariate(var).get(k, MPoly.const(0))

    def derivative(self, var):
        if var not in self.vars:
            return MPoly.const(0)
        i = self.vars.index(var)
        out = {}
        for e, c in self.terms.items():
            if e[i] == 0:
                continue
            ne = e[:i] + (e[i] - 1,) + e[i + 1:]
            out[ne] = out.get(ne, 0) + c * e[i]
        return MPoly(out, self.vars)

    # -- substitution --------------------------------------------------

    def subs(self, bindings):
        """Substitute values for variables.

        Values may be int, Fraction, MPoly or RatFunc; the result is a
        RatFunc (exact).  Unbound variables stay symbolic.
        """
        acc = RatFunc.zero()
        cache = {}
        for e, c in self.terms.items():
            term = RatFunc.const(c)
            for v, p in zip(self.vars, e):
                if p == 0:
                    continue
                if v in bindings:
                    key = (v, p)
                    if key not in cache:
                        cache[key] = _as_ratfunc(bindings[v]) ** p
                    term = term * cache[key]
                else:
                    term = term * RatFunc.from_poly(MPoly.var(v, p))
            acc = acc + term
        return acc

    def eval_fraction(self, bindings):
        """Full numeric evaluation; every variable must be bound."""
        total = Fraction(0)
        for e, c in self.terms.items():
            t = Fraction(c)
            for v, p in zip(self.vars, e):
                t *= Fraction(bindings[v]) ** p
            total += t
        return total

    def subs_int(self, var, value):
        """Substitute one variable by an integer, staying polynomial."""
        if var not in self.vars:
            return self
        uni = self.as_univariate(var)
        acc = MPoly.const(0)
        for k, p in uni.items():
            acc = acc + p * (value ** k)
        return acc

    def rename(self, mapping):
        """Rename variables; the mapping must be injective on self.vars."""
        newvars = tuple(mapping.get(v, v) for v in self.vars)
        if len(set(newvars)) != len(newvars):
            raise ValueError("rename collision")
        return MPoly(dict(self.terms), newvars)

    # -- rendering ----------------------------------------------------

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for e in sorted(self.terms, key=_grlex_key, reverse=True):
            c = self.terms[e]
            mono = "*".join(
                v if p == 1 else f"{v}^{p}"
                for v, p in zip(self.vars, e)
                if p
            )
            mag = abs(c)
            if mono:
                body = mono if mag == 1 else f"{mag}*{mono}"
            else:
                body = str(mag)
            if not parts:
                parts.append(body if c > 0 else f"-{body}")
            else:
                parts.append(f"+ {body}" if c > 0 else f"- {body}")
        return " ".join(parts)

    def __repr__(self):
        return f"MPoly({self})"


# ---------------------------------------------------------------------------
# division, gcd, resultant
# ---------------------------------------------------------------------------


def exact_div(p, q):
    """Exact polynomial division; raises ValueError if q does not divide p."""
    if isinstance(q, int):
        q = MPoly.const(q)
    if q.is_zero():
        raise DivisionByZero("division by zero polynomial")
    if p.is_zero():
        return p
    if q.is_constant():
        d = q.const_value()
        out = {}
        for e, c in p.terms.items():
            if c % d:
                raise ValueError("not divisible")
            out[e] = c // d
        return MPoly(out, p.vars)
    cv = MPoly._common_vars(p, q)
    rem = dict(p._embed(cv))
    qt = q._embed(cv)
    qe, qc = max(qt, key=_grlex_key), None
    qc = qt[qe]
    out = {}
    while rem:
        re = max(rem, key=_grlex_key)
        rc = rem[re]
        de = tuple(a - b for a, b in zip(re, qe))
        if any(d < 0 for d in de) or rc % qc:
            raise ValueError("not divisible")
        f = rc // qc
        out[de] = f
        for e, c in qt.items():
            ne = tuple(a + b for a, b in zip(de, e))
            nv = rem.get(ne, 0) - f * c
            if nv:
                rem[ne] = nv
            else:
                rem.pop(ne, None)
    return MPoly(out, cv)


def divides(q, p):
    try:
        exact_div(p, q)
        return True
    except ValueError:
        return False


def _prem(p, q, var):
    """Pseudo-remainder of p by q with respect to var."""
    dp, dq = p.degree(var), q.degree(var)
    if dp < dq:
        return p
    lq = q.coeff_of(var, dq)
    x = MPoly.var(var)
    r = p
    e = dp - dq + 1
    while not r.is_zero() and r.degree(var) >= dq:
        dr = r.degree(var)
        lr = r.coeff_of(var, dr)
        r = r * lq - q * lr * x ** (dr - dq)
        e -= 1
    if e > 0:
        r = r * lq ** e
    return r


def _poly_primitive(p, var):
    """(content, primitive part) with respect to var."""
    uni = p.as_univariate(var)
    cont = MPoly.const(0)
    for c in uni.values():
        cont = gcd(cont, c)
        if cont.is_constant() and abs(cont.const_value()) == 1:
            cont = MPoly.const(1)
            break
    if cont.is_zero():
        return MPoly.const(0), MPoly.const(0)
    return cont, exact_div(p, cont)


def _is_prime(n):
    # deterministic Miller-Rabin, valid far beyond 2^31
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % a == 0:
            return n == a
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _first_primes_below(bound, count):
    out, n = [], bound
    while len(out) < count:
        n -= 1
        if _is_prime(n):
            out.append(n)
    return out


_GCD_PRIMES = _first_primes_below(1 << 31, 40)


def _uni_coeffs(p, var):
    d = p.degree(var)
    uni = p.as_univariate(var)
    out = [0] * (d + 1)
    for k, c in uni.items():
        out[k] = c.const_value()
    return out


def _mod_gcd_lists(a, b, pr):
    a = [x % pr for x in a]
    b = [x % pr for x in b]
    def trim(v):
        while v and v[-1] == 0:
            v.pop()
        return v
    a, b = trim(a), trim(b)
    while b:
        inv = pow(b[-1], pr - 2, pr)
        bm = [(x * inv) % pr for x in b]
        r = a[:]
        for i in range(len(r) - 1, len(b) - 2, -1):
            c = r[i]
            if c:
                off = i - (len(b) - 1)
                for j, bc in enumerate(bm):
                    r[off + j] = (r[off + j] - c * bc) % pr
        a, b = b, trim(r)
    if not a:
        return []
    inv = pow(a[-1], pr - 2, pr)
    return [(x * inv) % pr for x in a]


def _gcd_univariate(p, q, var):
    """Modular gcd for univariate integer polynomials (primitive result)."""
    ap, aq = _uni_coeffs(p, var), _uni_coeffs(q, var)
    cp = math.gcd(*[abs(c) for c in ap])
    cq = math.gcd(*[abs(c) for c in aq])
    cg = math.gcd(cp, cq)
    app = [c // cp for c in ap]
    aqq = [c // cq for c in aq]
    lc = math.gcd(abs(app[-1]), abs(aqq[-1]))
    acc, mod, deg = None, 1, None
    prev = None
    for pr in _prime_stream():
        if app[-1] % pr == 0 or aqq[-1] % pr == 0:
            continue
        g = _mod_gcd_lists(app, aqq, pr)
        if len(g) == 1:
            return MPoly.const(cg)
        d = len(g) - 1
        scaled = [(c * lc) % pr for c in g]
        if deg is None or d < deg:
            acc, mod, deg = scaled, pr, d
            prev = None
        elif d == deg:
            acc = [_crt(c0, mod, c1, pr) for c0, c1 in zip(acc, scaled)]
            mod *= pr
        else:
            continue  # unlucky prime
        half = mod // 2
        cand = [c - mod if c > half else c for c in acc]
        g0 = math.gcd(*[abs(c) for c in cand]) or 1
        cand = [c // g0 for c in cand]
        # verify only once the reconstruction has stabilized
        if cand != prev:
            prev = cand
            continue
        gp = MPoly.from_univariate(
            var, {i: MPoly.const(c) for i, c in enumerate(cand)})
        if divides(gp, p) and divides(gp, q):
            return gp * cg if cg != 1 else gp
        prev = None          # all primes so far were unlucky; keep going


def _prime_stream():
    n = 1 << 31
    while n > 3:
        n -= 1
        if _is_prime(n):
            yield n
    raise ArithmeticError("prime supply exhausted")


def _crt(a, m, b, n):
    # m, n coprime
    t = ((b - a) * pow(m, -1, n)) % n
    return (a + m * t) % (m * n)


def _gcd_prs(p, q):
    """Subresultant PRS gcd, recursive over variables."""
    if p.is_zero():
        return _make_canonical_gcd(q)
    if q.is_zero():
        return _make_canonical_gcd(p)
    if p.is_constant() or q.is_constant():
        return MPoly.const(math.gcd(p.content(), q.content()))
    common = sorted(set(p.vars) & set(q.vars))
    if not common:
        return MPoly.const(math.gcd(p.content(), q.content()))
    var = min(common, key=lambda v: min(p.degree(v), q.degree(v)))
    cp, pp = _poly_primitive(p, var)
    cq, qq = _poly_primitive(q, var)
    cont = gcd(cp, cq)
    if pp.degree(var) < qq.degree(var):
        pp, qq = qq, pp
    # quick certificate that the primitive gcd is trivial
    if _probably_coprime(pp, qq, var):
        return _make_canonical_gcd(cont)
    g, h = MPoly.const(1), MPoly.const(1)
    a, b = pp, qq
    while True:
        delta = a.degree(var) - b.degree(var)
        r = _prem(a, b, var)
        if r.is_zero():
            break
        if r.degree(var) == 0:
            b = MPoly.const(1)
            break
        a, b = b, exact_div(r, g * h ** delta)
        g = a.coeff_of(var, a.degree(var))
        if delta >= 1:
            h = exact_div(g ** delta, h ** (delta - 1))
        else:
            h = h  # delta == 0 cannot occur after the first step
    if b.is_constant():
        return _make_canonical_gcd(cont)
    _, res = _poly_primitive(b, var)
    return _make_canonical_gcd(cont * res)


def _probably_coprime(p, q, var):
    """Exact one-sided test: univariate images with unit gcd certify a
    trivial primitive gcd in ``var`` (valid when leading coeffs survive)."""
    others = sorted((set(p.vars) | set(q.vars)) - {var})
    if not others:
        return False
    for _ in range(3):
        point = {v: _rng.randrange(3, APPROX_EVAL_BOUND) for v in others}
        ip, iq = p, q
        for v, val in point.items():
            ip = ip.subs_int(v, val)
            iq = iq.subs_int(v, val)
        if ip.degree(var) != p.degree(var) or iq.degree(var) != q.degree(var):
            continue
        g = _gcd_univariate(ip, iq, var) if not ip.is_constant() and not iq.is_constant() else MPoly.const(1)
        if g.is_constant() or g.degree(var) == 0:
            return True
        return False
    return False


APPROX_EVAL_BOUND = 1 << 20


def _make_canonical_gcd(p):
    if p.is_zero():
        return p
    c = p.content()
    p = exact_div(p, c)
    if p.leading_coeff() < 0:
        p = -p
    return p


def gcd(p, q):
    """Polynomial gcd, primitive with positive leading coefficient."""
    if isinstance(p, int):
        p = MPoly.const(p)
    if isinstance(q, int):
        q = MPoly.const(q)
    if p.is_zero():
        return _make_canonical_gcd(q)
    if q.is_zero():
        return _make_canonical_gcd(p)
    if p.is_constant() or q.is_constant():
        return MPoly.const(math.gcd(p.content(), q.content()))
    if p == q or p == -q:
        return _make_canonical_gcd(p)
    if len(p.vars) == 1 and p.vars == q.vars:
        return _make_canonical_gcd(_gcd_univariate(p, q, p.vars[0]))
    return _gcd_prs(p, q)


def _jet_mantissa(p, var, order):
    """(m, p/var**m truncated modulo var**order); m is the var-adic
    valuation of p."""
    if var not in p.vars:
        return 0, p
    uni = p.as_univariate(var)
    m = min(uni)
    acc = MPoly.const(0)
    v = MPoly.var(var)
    for k, c in uni.items():
        if k - m < order:
            acc = acc + c * v ** (k - m)
    return m, acc


def truncate_jet(rf, var, order):
    """rf with numerator and denominator reduced to var-adic jets: the
    var-power is factored out exactly and the mantissa kept modulo
    var**order.  Guard terms absorb cancellations at var = 0; the
    relative precision is not tracked, so downstream users must verify
    conclusions drawn from jet runs by exact means."""
    if var not in rf.num.vars and var not in rf.den.vars:
        return rf
    mn, num = _jet_mantissa(rf.num, var, order)
    md, den = _jet_mantissa(rf.den, var, order)
    m = mn - md
    v = MPoly.var(var)
    if m > 0:
        num = num * v ** m
    elif m < 0:
        den = den * v ** (-m)
    return RatFunc(num, den)


def resultant(p, q, var):
    """Resultant with the Sylvester-matrix determinant convention."""
    m, n = p.degree(var), q.degree(var)
    if m <= 0 or n <= 0:
        raise VariableAbsent(f"both arguments must depend on {var!r}")
    pu = p.as_univariate(var)
    qu = q.as_univariate(var)
    size = m + n
    zero = MPoly.const(0)
    rows = []
    for i in range(n):
        row = [zero] * size
        for k, c in pu.items():
            row[i + (m - k)] = c
        rows.append(row)
    for i in range(m):
        row = [zero] * size
        for k, c in qu.items():
            row[i + (n - k)] = c
        rows.append(row)
    return _bareiss_det(rows)


def _bareiss_det(rows):
    n = len(rows)
    if n == 0:
        return MPoly.const(1)
    m = [row[:] for row in rows]
    sign = 1
    prev = MPoly.const(1)
    for k in range(n - 1):
        if m[k][k].is_zero():
            for i in range(k + 1, n):
                if not m[i][k].is_zero():
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return MPoly.const(0)
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                num = m[i][j] * m[k][k] - m[i][k] * m[k][j]
                m[i][j] = exact_div(num, prev)
            m[i][k] = MPoly.const(0)
        prev = m[k][k]
    det = m[n - 1][n - 1]
    return -det if sign < 0 else det


def poly_sqrt(p):
    """Exact square root of a polynomial, or None."""
    if p.is_zero():
        return MPoly.const(0)
    if p.is_constant():
        c = p.const_value()
        if c < 0:
            return None
        r = math.isqrt(c)
        return MPoly.const(r) if r * r == c else None
    le, lc = p.leading_term()
    if lc < 0 or any(e % 2 for e in le):
        return None
    r = math.isqrt(lc)
    if r * r != lc:
        return None
    s = MPoly({tuple(e // 2 for e in le): r}, p.vars)
    rem = p - s * s
    twos = s * 2
    while not rem.is_zero():
        re, rc = rem.leading_term()
        cv = MPoly._common_vars(rem, twos)
        te, tc = max(twos._embed(cv), key=_grlex_key), None
        twem = twos._embed(cv)
        te = max(twem, key=_grlex_key)
        tc = twem[te]
        rem_e = rem._embed(cv)
        re = max(rem_e, key=_grlex_key)
        rc = rem_e[re]
        de = tuple(a - b for a, b in zip(re, te))
        if any(d < 0 for d in de) or rc % tc:
            return None
        t = MPoly({de: rc // tc}, cv)
        s = s + t
        rem = rem - twos * t - t * t
        twos = s * 2
        if s.total_degree() * 2 > p.total_degree():
            return None
    return s


# ---------------------------------------------------------------------------
# rational functions
# ---------------------------------------------------------------------------


def _as_ratfunc(x):
    if isinstance(x, RatFunc):
        return x
    if isinstance(x, MPoly):
        return RatFunc.from_poly(x)
    if isinstance(x, int):
        return RatFunc.const(x)
    if isinstance(x, Fraction):
        return RatFunc.const(x)
    if isinstance(x, ExtValue):
        if x.is_infinite:
            raise ValueError("infinite value in polynomial context")
        return x.value
    raise TypeError(f"cannot coerce {type(x)!r} to RatFunc")


class RatFunc:
    """Canonical reduced ratio of integer polynomials.

    Invariants: nonzero denominator, gcd(num, den) a unit, joint integer
    content 1, positive leading coefficient of the denominator.
    """

    __slots__ = ("num", "den")

    def __init__(self, num, den=None):
        if isinstance(num, int):
            num = MPoly.const(num)
        if den is None:
            den = MPoly.const(1)
        if isinstance(den, int):
            den = MPoly.const(den)
        if den.is_zero():
            raise ZeroDenominator("zero denominator")
        if num.is_zero():
            num, den = MPoly.const(0), MPoly.const(1)
        else:
            g = gcd(num, den)
            if not (g.is_constant() and g.const_value() == 1):
                num, den = exact_div(num, g), exact_div(den, g)
            ic = math.gcd(num.content(), den.content())
            if ic > 1:
                num, den = exact_div(num, ic), exact_div(den, ic)
            if den.leading_coeff() < 0:
                num, den = -num, -den
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __setattr__(self, *a):
        raise AttributeError("RatFunc is immutable")

    @staticmethod
    def const(c):
        if isinstance(c, Fraction):
            return RatFunc(MPoly.const(c.numerator), MPoly.const(c.denominator))
        return RatFunc(MPoly.const(int(c)))

    @staticmethod
    def from_poly(p):
        return RatFunc(p)

    @staticmethod
    def var(name):
        return RatFunc(MPoly.var(name))

    @staticmethod
    def zero():
        return RatFunc(MPoly.const(0))

    @staticmethod
    def one():
        return RatFunc(MPoly.const(1))

    # -- queries -------------------------------------------------------

    def is_zero(self):
        return self.num.is_zero()

    def is_constant(self):
        return self.num.is_constant() and self.den.is_constant()

    def as_fraction(self):
        return Fraction(self.num.const_value(), self.den.const_value())

    @property
    def variables(self):
        return tuple(sorted(set(self.num.vars) | set(self.den.vars)))

    def degree(self, var):
        return max(self.num.degree(var), self.den.degree(var))

    def depends_on(self, var):
        return var in self.num.vars or var in self.den.vars

    def is_polynomial(self):
        return self.den.is_constant()

    def __hash__(self):
        return hash((self.num, self.den))

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = RatFunc.const(other)
        elif isinstance(other, MPoly):
            other = RatFunc.from_poly(other)
        if not isinstance(other, RatFunc):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        if isinstance(other, TJet):
            return NotImplemented
        other = _as_ratfunc(other)
        return RatFunc(self.num * other.den + other.num * self.den,
                       self.den * other.den)

    __radd__ = __add__

    def __neg__(self):
        return RatFunc(-self.num, self.den)

    def __sub__(self, other):
        if isinstance(other, TJet):
            return NotImplemented
        other = _as_ratfunc(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, TJet):
            return NotImplemented
        other = _as_ratfunc(other)
        return RatFunc(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TJet):
            return NotImplemented
        other = _as_ratfunc(other)
        if other.is_zero():
            raise DivisionByZero("division by zero")
        return RatFunc(self.num * other.den, self.den * other.num)

    def __rtruediv__(self, other):
        return _as_ratfunc(other) / self

    def __pow__(self, k):
        if not isinstance(k, int):
            raise ValueError("integer powers only")
        if k < 0:
            if self.is_zero():
                raise DivisionByZero("zero to a negative power")
            return RatFunc(self.den ** (-k), self.num ** (-k))
        return RatFunc(self.num ** k, self.den ** k)

    def inverse(self):
        if self.is_zero():
            raise DivisionByZero("inverse of zero")
        return RatFunc(self.den, self.num)

    # -- substitution --------------------------------------------------

    def subs(self, bindings):
        """Symbolic substitution of finite values; stays a RatFunc.

        Raises ZeroDenominator on a pole and IndeterminateForm on 0/0.
        """
        clean = {k: _as_ratfunc(v) for k, v in bindings.items()
                 if not (isinstance(v, ExtValue) and v.is_infinite)}
        if any(isinstance(v, ExtValue) and v.is_infinite
               for v in bindings.values()):
            raise ValueError("use substitute() for infinite bindings")
        n = self.num.subs(clean)
        d = self.den.subs(clean)
        if d.is_zero():
            if n.is_zero():
                raise IndeterminateForm("0/0 under substitution")
            raise ZeroDenominator("pole under substitution")
        return n / d

    def eval_fraction(self, bindings):
        d = self.den.eval_fraction(bindings)
        if d == 0:
            n = self.num.eval_fraction(bindings)
            if n == 0:
                raise IndeterminateForm("0/0 at the evaluation point")
            raise ZeroDenominator("pole at the evaluation point")
        return self.num.eval_fraction(bindings) / d

    def rename(self, mapping):
        return RatFunc(self.num.rename(mapping), self.den.rename(mapping))

    def __str__(self):
        if self.den == MPoly.const(1):
            return str(self.num)
        ns = str(self.num)
        ds = str(self.den)
        if len(self.num.terms) > 1:
            ns = f"({ns})"
        if len(self.den.terms) > 1:
            ds = f"({ds})"
        return f"{ns}/{ds}"

    def __repr__(self):
        return f"RatFunc({self})"


# ---------------------------------------------------------------------------
# jets of a single perturbation symbol
# ---------------------------------------------------------------------------

# Working window of var-digits kept by TJet arithmetic; set by
# series.jet_coefficients for the duration of a probe.
_JET_WIDTH = 8

# Sentinel precision for values known exactly (all higher digits zero).
_JET_EXACT = 1 << 60


class TJet:
    """var**val * sum(m[i] * var**i), every var-exponent below prec known.

    A drop-in series coefficient for perturbation probes: the exact
    rational functions of the perturbation blow up in degree along an
    orbit, while only a bounded window of digits is ever consumed.  The
    mantissa is capped at _JET_WIDTH fractions; cancellations at var = 0
    consume guard digits silently, and once none remain the arithmetic
    raises JetPrecisionLost so the caller can retry with a wider window.
    """

    __slots__ = ("var", "val", "m", "prec")

    def __init__(self, var, val, m, prec):
        m = [c if isinstance(c, Fraction) else Fraction(c) for c in m]
        if prec < val + len(m):
            del m[max(0, prec - val):]
        while m and not m[0]:
            m.pop(0)
            val += 1
        if len(m) > _JET_WIDTH:
            del m[_JET_WIDTH:]
            prec = min(prec, val + _JET_WIDTH)
        while m and not m[-1]:
            m.pop()
        if not m:
            val = prec
        self.var = var
        self.val = val
        self.m = tuple(m)
        self.prec = prec

    # -- queries ------------------------------------------------------

    def is_zero(self):
        """True when every known digit vanishes; a jet run treats this
        as zero, which is what makes its results first-order data."""
        return not self.m

    def is_constant(self):
        return not self.m or (self.val == 0 and len(self.m) == 1)

    def depends_on(self, symbol):
        return symbol == self.var and not self.is_constant()

    def digit(self, k):
        """Coefficient of var**k; JetPrecisionLost beyond the window."""
        if k >= self.prec:
            raise JetPrecisionLost(f"digit {k} of a jet known below "
                                   f"{self.prec}")
        i = k - self.val
        if 0 <= i < len(self.m):
            return self.m[i]
        return Fraction(0)

    def at_zero(self):
        """Value at var = 0; JetPrecisionLost on a negative valuation."""
        if self.m and self.val < 0:
            raise JetPrecisionLost("jet is singular at zero")
        return self.digit(0) if self.prec > 0 else Fraction(0)

    # -- coercion ------------------------------------------------------

    def _coerced(self, other):
        if isinstance(other, TJet):
            return other if other.var == self.var else None
        if isinstance(other, (int, Fraction)):
            return TJet(self.var, 0, [Fraction(other)], _JET_EXACT)
        if isinstance(other, (MPoly, RatFunc)):
            try:
                return as_tjet(other, self.var)
            except VariableAbsent:
                return None
        return None

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        o = self._coerced(other)
        if o is None:
            return NotImplemented
        prec = min(self.prec, o.prec)
        ends = [p.val + len(p.m) for p in (self, o) if p.m]
        if not ends:
            return TJet(self.var, 0, [], prec)
        starts = [p.val for p in (self, o) if p.m]
        lo = min(min(starts), prec)
        hi = min(max(ends), prec)
        out = [Fraction(0)] * max(0, hi - lo)
        for part in (self, o):
            for j, c in enumerate(part.m):
                k = part.val + j - lo
                if 0 <= k < len(out):
                    out[k] += c
        return TJet(self.var, lo, out, prec)

    __radd__ = __add__

    def __neg__(self):
        return TJet(self.var, self.val, [-c for c in self.m], self.prec)

    def __sub__(self, other):
        o = self._coerced(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerced(other)
        if o is None:
            return NotImplemented
        prec = min(self.prec + o.val, o.prec + self.val)
        if not self.m or not o.m:
            return TJet(self.var, 0, [], prec)
        lo = self.val + o.val
        n = min(prec - lo, len(self.m) + len(o.m) - 1, _JET_WIDTH)
        out = [Fraction(0)] * max(0, n)
        for i, a in enumerate(self.m):
            if i >= n:
                break
            if not a:
                continue
            for j, b in enumerate(o.m):
                k = i + j
                if k >= n:
                    break
                if b:
                    out[k] += a * b
        return TJet(self.var, lo, out, prec)

    __rmul__ = __mul__

    def inverse(self):
        if not self.m:
            raise JetPrecisionLost("inverting a jet with no known digits")
        nd = min(self.prec - self.val, _JET_WIDTH)
        b0 = self.m[0]
        inv = [1 / b0]
        for k in range(1, nd):
            s = Fraction(0)
            for i in range(1, min(k, len(self.m) - 1) + 1):
                s += self.m[i] * inv[k - i]
            inv.append(-s / b0)
        return TJet(self.var, -self.val, inv, self.prec - 2 * self.val)

    def __truediv__(self, other):
        o = self._coerced(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerced(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, k):
        if not isinstance(k, int):
            raise ValueError("integer powers only")
        if k < 0:
            return self.inverse() ** (-k)
        result = TJet(self.var, 0, [Fraction(1)], _JET_EXACT)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other):
        o = self._coerced(other) if not isinstance(other, TJet) else other
        if o is None:
            return NotImplemented
        return self.val == o.val and self.m == o.m

    def __hash__(self):
        return hash((self.var, self.val, self.m))

    def __str__(self):
        if not self.m:
            return f"O({self.var}^{self.prec})"
        parts = []
        for i, c in enumerate(self.m):
            if not c:
                continue
            k = self.val + i
            if k == 0:
                parts.append(str(c))
            else:
                t = self.var if k == 1 else f"{self.var}^{k}"
                parts.append(f"({c})*{t}")
        if self.prec < _JET_EXACT:
            parts.append(f"O({self.var}^{self.prec})")
        return " + ".join(parts)

    __repr__ = __str__


def as_tjet(x, var):
    """Coerce a scalar, MPoly, or RatFunc univariate in var to a TJet."""
    if isinstance(x, TJet):
        if x.var != var:
            raise VariableAbsent(f"jet in {x.var}, expected {var}")
        return x
    if isinstance(x, (int, Fraction)):
        return TJet(var, 0, [Fraction(x)], _JET_EXACT)
    if isinstance(x, RatFunc):
        return as_tjet(x.num, var) / as_tjet(x.den, var)
    if isinstance(x, MPoly):
        digits = {}
        for e, c in x.terms.items():
            deg = 0
            for v, p in zip(x.vars, e):
                if p == 0:
                    continue
                if v != var:
                    raise VariableAbsent(
                        f"polynomial involves {v}, not a jet in {var}")
                deg = p
            digits[deg] = digits.get(deg, Fraction(0)) + c
        if not digits:
            return TJet(var, 0, [], _JET_EXACT)
        top = max(digits)
        return TJet(var, 0,
                    [digits.get(i, Fraction(0)) for i in range(top + 1)],
                    _JET_EXACT)
    raise VariableAbsent(f"cannot coerce {type(x)!r} to a jet")


# ---------------------------------------------------------------------------
# extended values
# ---------------------------------------------------------------------------


class ExtValue:
    """A finite rational value or the point at infinity (per coordinate)."""

    __slots__ = ("value",)

    def __init__(self, value=None):
        if value is not None:
            value = _as_ratfunc(value)
        object.__setattr__(self, "value", value)

    def __setattr__(self, *a):
        raise AttributeError("ExtValue is immutable")

    @staticmethod
    def finite(v):
        return ExtValue(_as_ratfunc(v))

    @staticmethod
    def infinity():
        return ExtValue(None)

    @property
    def is_infinite(self):
        return self.value is None

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, RatFunc, MPoly)):
            other = ExtValue.finite(other)
        if not isinstance(other, ExtValue):
            return NotImplemented
        return self.value == other.value

    def __hash__(self):
        return hash(self.value)

    def __str__(self):
        return "∞" if self.is_infinite else str(self.value)

    def __repr__(self):
        return f"ExtValue({self})"


INF = ExtValue.infinity()


def normalize(num, den):
    """Canonical reduced representative of a raw numerator/denominator pair."""
    if isinstance(num, RatFunc) or isinstance(den, RatFunc):
        num = _as_ratfunc(num)
        den = _as_ratfunc(den)
        if den.is_zero():
            raise ZeroDenominator("zero denominator")
        return num / den
    return RatFunc(num, den)


def substitute(target, bindings):
    """Exact substitution with per-coordinate infinities.

    ``target`` is a RatFunc or a raw (num, den) MPoly pair; bindings map
    symbols to finite values or ExtValue.infinity().  Returns an ExtValue.
    Raises IndeterminateForm on 0/0 outcomes.
    """
    if isinstance(target, tuple):
        num, den = target
    else:
        rf = _as_ratfunc(target)
        num, den = rf.num, rf.den
    finite = {}
    infinite = []
    for k, v in bindings.items():
        if isinstance(v, ExtValue) and v.is_infinite:
            infinite.append(k)
        else:
            finite[k] = _as_ratfunc(v)
    n = num.subs(finite)
    d = den.subs(finite)
    # n, d are RatFuncs over the remaining symbols; clear to a poly pair
    pn = n.num * d.den
    pd = n.den * d.num
    for var in infinite:
        pn, pd = _limit_at_infinity(pn, pd, var)
    if pd.is_zero():
        if pn.is_zero():
            raise IndeterminateForm("0/0 after substitution")
        return INF
    if pn.is_zero():
        return ExtValue.finite(0)
    return ExtValue.finite(RatFunc(pn, pd))


def _limit_at_infinity(pn, pd, var):
    """Leading behaviour of pn/pd as var -> infinity (x -> 1/u, u -> 0)."""
    if pn.is_zero() or pd.is_zero():
        return pn, pd
    dn, dd = pn.degree(var), pd.degree(var)
    if dn == 0 and dd == 0:
        return pn, pd
    top = max(dn, dd)
    # coefficient of u^(top-k) after x -> 1/u is the coefficient of x^k
    un = pn.as_univariate(var)
    ud = pd.as_univariate(var)
    vn = min(top - k for k in un)
    vd = min(top - k for k in ud)
    if vn > vd:
        return MPoly.const(0), MPoly.const(1)
    if vn < vd:
        return MPoly.const(1), MPoly.const(0)
    return un[top - vn], ud[top - vd]
