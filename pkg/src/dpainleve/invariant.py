"""Biquadratic invariants of plane birational maps.

An invariant is K(x, y) + mu with K biquadratic over biquadratic; for the
staggered pairs x, y name (X_n, Y_n), for three-point equations in one
variable y names the previous iterate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .algebra import (ExtValue, INF, MPoly, RatFunc, _as_ratfunc, exact_div,
                      gcd, resultant)
from .errors import NotBiquadratic, NotQuadratic
from .mapping import BirationalSystem, join_offset, solve_linear

PENCIL_SYMBOL = "_K"


@dataclass(frozen=True)
class Invariant:
    K: RatFunc
    mu: RatFunc = field(default_factory=RatFunc.zero)
    variables: tuple = ("x", "y")

    def __post_init__(self):
        object.__setattr__(self, "K", _as_ratfunc(self.K))
        object.__setattr__(self, "mu", _as_ratfunc(self.mu))
        for v in self.variables:
            for part in (self.K.num, self.K.den):
                if part.degree(v) > 2:
                    raise NotBiquadratic(
                        f"degree {part.degree(v)} in {v}")
            if self.mu.depends_on(v):
                raise NotBiquadratic(f"mu depends on state variable {v}")

    def value(self, x, y):
        vx, vy = self.variables
        return self.K.subs({vx: x, vy: y}) + self.mu

    def total(self):
        """K + mu as a single rational function."""
        return self.K + self.mu

    def parameters(self):
        out = set()
        for v in self.K.variables:
            if v not in self.variables:
                out.add(v)
        return sorted(out)


@dataclass(frozen=True)
class TwoInvariantLaw:
    """The chained conservation K2(x_n, y_{n-1}) = K1(x_n, y_n)
    = K2(x_{n+1}, y_n)."""

    K1: Invariant
    K2: Invariant


def _graph_step(system, x0, y0):
    """Symbolic (x_{n+1}, y_{n+1}) from symbolic (x_n, y_n) for a pair;
    coefficients are evaluated at index 0 (autonomous usage keeps them as
    plain parameter symbols)."""
    x = system.state_vars[0]
    y = system.state_vars[1]
    x1 = system.rule_at("x1", 0).subs({x: x0, y: y0})
    y1 = system.rule_at("y1", 0).subs({join_offset(x, 1): x1, y: y0})
    return x1, y1


def check_invariant(system, inv):
    """The fully reduced difference of inv across one step; identically
    zero certifies conservation.

    Coefficient symbols are kept symbolic, so the certificate covers all
    parameter values at once (the symbols must then be constant in n)."""
    if system.kind == "symmetric-3point":
        xv = system.state_vars[0]
        u = RatFunc.var("_u")
        v = RatFunc.var("_v")
        rule = system.rule_at("fwd", 0).rename(
            {xv: "_u", join_offset(xv, -1): "_v"})
        before = inv.value(u, v)
        after = inv.value(rule, u)
        return (after - before)
    u = RatFunc.var("_u")
    v = RatFunc.var("_v")
    x = system.state_vars[0]
    y = system.state_vars[1]
    x1, y1 = _graph_step(system, u, v)
    return inv.value(x1, y1) - inv.value(u, v)


def _subs_unreduced(poly, binds):
    """Substitute rational pairs (num, den) into an MPoly without any gcd
    reduction; returns an (num, den) MPoly pair."""
    degs = {v: poly.degree(v) for v in binds}
    den = MPoly.const(1)
    for v, (_, d) in binds.items():
        den = den * d ** degs[v] if degs[v] else den
    total = MPoly.const(0)
    for exps, c in poly.terms.items():
        t = MPoly.const(c)
        for v, p in zip(poly.vars, exps):
            if v in binds:
                n, d = binds[v]
                t = t * n ** p * d ** (degs[v] - p)
            elif p:
                t = t * MPoly.var(v, p)
        total = total + t
    return total, den


def _value_unreduced(rf, binds):
    """rf composed with rational pairs, unreduced."""
    n1, d1 = _subs_unreduced(rf.num, binds)
    n2, d2 = _subs_unreduced(rf.den, binds)
    return n1 * d2, d1 * n2


def _pair_of(v):
    rf = _as_ratfunc(v) if not isinstance(v, RatFunc) else v
    return rf.num, rf.den


def _diff_unreduced(a, b):
    """a - b for unreduced pairs, returned as a RatFunc only when nonzero
    (the zero certificate needs no reduction)."""
    num = a[0] * b[1] - b[0] * a[1]
    if num.is_zero():
        return RatFunc.zero()
    return RatFunc(num, a[1] * b[1])


def check_two_invariant_law(system, law):
    """Residuals (K1(x_n,y_n) - K2(x_n,y_{n-1}),
    K2(x_{n+1},y_n) - K1(x_n,y_n)) on the map's graph; both must vanish.

    Compositions stay unreduced so the zero certificate is a plain
    polynomial identity."""
    x = system.state_vars[0]
    y = system.state_vars[1]
    u = RatFunc.var("_u")      # x_n
    w = RatFunc.var("_w")      # y_{n-1}
    ry = solve_linear(system.relations[1], y)
    b = system.coeff_bindings(ry, 0)
    y0 = _value_unreduced(ry.subs(b) if b else ry,
                          {x: _pair_of(u), join_offset(y, -1): _pair_of(w)})
    x1 = _value_unreduced(system.rule_at("x1", 0),
                          {x: _pair_of(u), y: y0})
    vx1, vy1 = law.K1.variables
    vx2, vy2 = law.K2.variables
    k1_uy0 = _value_unreduced(law.K1.total(), {vx1: _pair_of(u), vy1: y0})
    k2_uw = _value_unreduced(law.K2.total(), {vx2: _pair_of(u),
                                              vy2: _pair_of(w)})
    k2_x1y0 = _value_unreduced(law.K2.total(), {vx2: x1, vy2: y0})
    r1 = _diff_unreduced(k1_uy0, k2_uw)
    r2 = _diff_unreduced(k2_x1y0, k1_uy0)
    return r1, r2


def _pencil_coeffs(inv, var):
    """P - K*Q collected as a quadratic in var; coefficients are MPolys in
    the other variable, the pencil symbol and parameters."""
    P, Q = inv.K.num, inv.K.den
    Ksym = MPoly.var(PENCIL_SYMBOL)
    pencil = P - Ksym * Q
    return pencil.as_univariate(var)


def qrt_from_invariant(inv, leg):
    """Root-swap map of one QRT leg.

    leg=vertical moves y at fixed x, leg=horizontal moves x at fixed y.
    Returns the partner value as a RatFunc in both variables (Vieta sum of
    roots with the pencil value eliminated at the current point).
    """
    vx, vy = inv.variables
    var = vy if leg == "vertical" else vx
    uni = _pencil_coeffs(inv, var)
    c2 = uni.get(2, MPoly.const(0))
    c1 = uni.get(1, MPoly.const(0))
    P, Q = inv.K.num, inv.K.den
    # eliminate the pencil symbol via K = P/Q at the current point
    def elim(c):
        parts = c.as_univariate(PENCIL_SYMBOL)
        out = RatFunc.zero()
        KP = RatFunc(P, Q)
        for k, coeff in parts.items():
            out = out + RatFunc.from_poly(coeff) * KP ** k
        return out
    c2e = elim(c2)
    if c2e.is_zero():
        raise NotQuadratic(f"pencil degenerates to degree <2 in {var}")
    swap = -elim(c1) / c2e - RatFunc.var(var)
    return swap


def qrt_system_from_invariant(inv):
    """Recombine both legs into a staggered pair.

    Vertical leg: y_{n-1} as partner of y_n at fixed x_n (relation b);
    horizontal leg: x_{n+1} as partner of x_n at fixed y_n (relation a)."""
    vx, vy = inv.variables
    sv = qrt_from_invariant(inv, "vertical")
    sh = qrt_from_invariant(inv, "horizontal")
    x1 = RatFunc.var(join_offset("x", 1))
    ym = RatFunc.var(join_offset("y", -1))
    ra = (x1 - sh.rename({vx: "x", vy: "y"}))
    rb = (ym - sv.rename({vx: "x", vy: "y"}))
    return BirationalSystem("asymmetric-pair",
                            [ra.num, rb.num])


def _discriminant(p, var):
    d = p.degree(var)
    if d < 2:
        return MPoly.const(1) if d == 1 else p
    dp = p.derivative(var)
    res = resultant(p, dp, var)
    lc = p.as_univariate(var)[d]
    try:
        return exact_div(res, lc)
    except ValueError:
        return res


def _squarefree(p, var):
    d = p.derivative(var)
    if d.is_zero():
        return p
    g = gcd(p, d)
    if g.is_constant():
        return p
    return exact_div(p, g)


def singular_fibers(inv):
    """Pencil values where the biquadratic fiber curve degenerates.

    Double discriminant: disc in x of P - K*Q, then disc in y; returns the
    K-roots (RatFunc in parameters for linear factors, raw MPoly
    conditions otherwise) plus the infinity fiber marker."""
    vx, vy = inv.variables
    P, Q = inv.K.num, inv.K.den
    pencil = P - MPoly.var(PENCIL_SYMBOL) * Q
    d1 = _discriminant(pencil, vx) if pencil.degree(vx) > 0 else pencil
    out = [INF]   # the Q = 0 fiber
    # split off the content in vy: its K-roots kill the whole discriminant
    if d1.degree(vy) > 0:
        cont = _content_in(d1, vy)
        if not cont.is_constant() and cont.degree(PENCIL_SYMBOL) > 0:
            out.extend(_k_conditions(cont))
        prim = exact_div(d1, cont) if not cont.is_constant() else d1
        d2 = _discriminant(_squarefree(prim, vy), vy) \
            if prim.degree(vy) > 0 else prim
    else:
        d2 = d1
    if d2.is_zero() or d2.degree(PENCIL_SYMBOL) == 0:
        return out
    out.extend(_k_conditions(d2))
    return out


def _k_conditions(p):
    """Pencil values (or raw conditions) from a polynomial in the pencil
    symbol and parameters."""
    p = _squarefree(p, PENCIL_SYMBOL)
    uni = p.as_univariate(PENCIL_SYMBOL)
    if len(uni) == 2 and 0 in uni and 1 in uni:
        return [ExtValue.finite(RatFunc(-uni[0], uni[1]))]
    factors = _linear_k_factors(p)
    if factors:
        return [ExtValue.finite(f) for f in factors]
    return [p]


def _content_in(p, var):
    """gcd of the coefficients of p as a univariate polynomial in var."""
    uni = p.as_univariate(var)
    g = None
    for c in uni.values():
        g = c if g is None else gcd(g, c)
        if g.is_constant():
            return MPoly.const(1)
    return g


def _linear_k_factors(p):
    """Rational roots in the pencil symbol when its coefficients are
    numeric; used for parameter-free invariants."""
    uni = p.as_univariate(PENCIL_SYMBOL)
    if any(not c.is_constant() for c in uni.values()):
        return []
    d = max(uni)
    lead = uni[d].const_value()
    const = uni.get(0, MPoly.const(0)).const_value()
    cands = set()
    for a in _divisors(abs(const) or 1):
        for b in _divisors(abs(lead)):
            from fractions import Fraction
            cands.add(Fraction(a, b))
            cands.add(Fraction(-a, b))
    roots = []
    from fractions import Fraction
    for r in sorted(cands):
        val = sum(Fraction(c.const_value()) * r ** k for k, c in uni.items())
        if val == 0:
            roots.append(RatFunc.const(r))
    return roots


def _divisors(n):
    n = abs(n)
    out = [d for d in range(1, n + 1) if n % d == 0]
    return out or [1]
