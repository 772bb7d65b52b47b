"""Birational lattice systems: three-point equations and staggered pairs.

Symbols follow an offset convention: ``x`` is the value at the current
index n, ``x@1`` the next, ``y@-1`` the previous; a prime in the input DSL
is sugar for ``@1``.  Coefficient symbols carry offsets the same way, so a
relation is a single polynomial whose symbols name lattice data relative
to the index at which the relation is imposed.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .algebra import (ExtValue, INF, MPoly, RatFunc, _as_ratfunc, gcd,
                      substitute)
from .errors import (DegenerateHomography, IndeterminateForm,
                     NonBirationalRule, NotTrihomographic, PrecisionExhausted,
                     ZeroDenominator)
from .series import (DEFAULT_TRUNCATION, LaurentSeries, ratfunc_on_series)


# ---------------------------------------------------------------------------
# symbol offsets
# ---------------------------------------------------------------------------


def split_offset(name):
    if "@" in name:
        base, off = name.split("@", 1)
        return base, int(off)
    return name, 0


def join_offset(base, off):
    return base if off == 0 else f"{base}@{off}"


def shift_offsets(obj, k, skip=()):
    """Shift every symbol offset by k, except bases listed in skip."""
    if k == 0:
        return obj
    if isinstance(obj, MPoly):
        names = obj.vars
    else:
        names = obj.variables
    mapping = {}
    for v in names:
        base, off = split_offset(v)
        if base in skip:
            continue
        mapping[v] = join_offset(base, off + k)
    return obj.rename(mapping)


def index_symbol(base, n):
    """Plain symbol naming the n-th member of a free sequence."""
    return f"{base}_{n}" if n >= 0 else f"{base}_m{-n}"


# ---------------------------------------------------------------------------
# coefficient specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    """An n-independent coefficient; the value may involve parameters."""

    value: RatFunc

    def __post_init__(self):
        object.__setattr__(self, "value", _as_ratfunc(self.value))

    def at(self, n):
        return self.value


@dataclass(frozen=True)
class Sequence:
    """A coefficient governed by an explicit law (anything with value(n))."""

    law: object

    def at(self, n):
        return _as_ratfunc(self.law.value(n))


@dataclass(frozen=True)
class FreeSymbolic:
    """An unconstrained sequence: each index is its own fresh symbol."""

    name: str

    def at(self, n):
        return RatFunc.var(index_symbol(self.name, n))


# ---------------------------------------------------------------------------
# homographies
# ---------------------------------------------------------------------------


class Homography:
    """v -> (a v + b)/(c v + d); entries are exact rational functions in
    parameters (and possibly offset-bearing sequence symbols)."""

    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a, b, c, d):
        a, b, c, d = (_as_ratfunc(t) for t in (a, b, c, d))
        if (a * d - b * c).is_zero():
            raise DegenerateHomography("zero determinant")
        for nm, t in (("a", a), ("b", b), ("c", c), ("d", d)):
            object.__setattr__(self, nm, t)

    def __setattr__(self, *a):
        raise AttributeError("Homography is immutable")

    @staticmethod
    def identity():
        return Homography(1, 0, 0, 1)

    @staticmethod
    def shift(s):
        return Homography(1, s, 0, 1)

    @staticmethod
    def scale(s):
        return Homography(s, 0, 0, 1)

    def det(self):
        return self.a * self.d - self.b * self.c

    def inverse(self):
        return Homography(self.d, -self.b, -self.c, self.a)

    def compose(self, other):
        """self after other."""
        return Homography(self.a * other.a + self.b * other.c,
                          self.a * other.b + self.b * other.d,
                          self.c * other.a + self.d * other.c,
                          self.c * other.b + self.d * other.d)

    def shifted(self, k, skip=()):
        return Homography(shift_offsets(self.a, k, skip),
                          shift_offsets(self.b, k, skip),
                          shift_offsets(self.c, k, skip),
                          shift_offsets(self.d, k, skip))

    def as_ratfunc(self, var):
        v = RatFunc.var(var)
        return (self.a * v + self.b) / (self.c * v + self.d)

    def apply(self, value):
        if isinstance(value, ExtValue) and value.is_infinite:
            if self.c.is_zero():
                return INF
            return ExtValue.finite(self.a / self.c)
        if isinstance(value, LaurentSeries):
            num = self.a * value + self.b
            den = self.c * value + self.d
            return num / den
        v = _as_ratfunc(value if not isinstance(value, ExtValue)
                        else value.value)
        den = self.c * v + self.d
        if den.is_zero():
            num = self.a * v + self.b
            if num.is_zero():
                raise IndeterminateForm("homography at its own pole")
            return INF
        return ExtValue.finite((self.a * v + self.b) / den)

    def __eq__(self, other):
        if not isinstance(other, Homography):
            return NotImplemented
        # equality up to overall scale
        return (self.a * other.b == self.b * other.a
                and self.a * other.c == self.c * other.a
                and self.a * other.d == self.d * other.a
                and self.b * other.c == self.c * other.b
                and self.b * other.d == self.d * other.b
                and self.c * other.d == self.d * other.c)

    def __str__(self):
        return f"[{self.a}, {self.b}; {self.c}, {self.d}]"

    __repr__ = __str__


# ---------------------------------------------------------------------------
# relation helpers
# ---------------------------------------------------------------------------


def solve_linear(rel, var):
    """Solve a cleared relation of degree one in var; returns a RatFunc in
    the remaining symbols."""
    d = rel.degree(var)
    if d != 1:
        raise NonBirationalRule(f"relation has degree {d} in {var}")
    uni = rel.as_univariate(var)
    c1 = uni.get(1, MPoly.const(0))
    c0 = uni.get(0, MPoly.const(0))
    return RatFunc(-c0, c1)


def canonical_relation(rel):
    """Integer-primitive with positive leading coefficient."""
    if rel.is_zero():
        return rel
    c = rel.content()
    if rel.leading_coeff() < 0:
        c = -c
    if c != 1:
        from .algebra import exact_div
        rel = exact_div(rel, MPoly.const(c))
    return rel


def primitive_wrt(rel, keep_vars):
    """Divide out any polynomial content in the symbols outside keep_vars."""
    keep = set(keep_vars)
    buckets = {}
    for e, c in rel.terms.items():
        key = tuple(p if v in keep else 0 for v, p in zip(rel.vars, e))
        rest = tuple(0 if v in keep else p for v, p in zip(rel.vars, e))
        buckets.setdefault(key, {})[rest] = c
    content = None
    for key, terms in buckets.items():
        part = MPoly(terms, rel.vars)
        content = part if content is None else gcd(content, part)
        if content.is_constant():
            return rel
    if content is None or content.is_constant():
        return rel
    from .algebra import exact_div
    return exact_div(rel, content)


def substitute_var_rational(rel, var, num, den):
    """Replace var by num/den in a cleared relation and re-clear."""
    d = rel.degree(var)
    if d == 0:
        return rel
    uni = rel.as_univariate(var)
    out = MPoly.const(0)
    num_p = [MPoly.const(1)]
    den_p = [MPoly.const(1)]
    for _ in range(d):
        num_p.append(num_p[-1] * num)
        den_p.append(den_p[-1] * den)
    for k, coeff in uni.items():
        out = out + coeff * num_p[k] * den_p[d - k]
    return out


# ---------------------------------------------------------------------------
# the system itself
# ---------------------------------------------------------------------------

KINDS = ("symmetric-3point", "asymmetric-pair", "trihomographic-pair")


class BirationalSystem:
    """A lattice recurrence, either a single three-point equation in one
    variable or a staggered pair.

    Symmetric kind: one relation in {x@1, x, x@-1}; state is (x_n, x_{n-1}).

    Pair kinds: relation_a in {x@1, x, y} and relation_b in {y, x, y@-1},
    both imposed at index n; state is (x_n, y_{n-1}).  The trihomographic
    kind additionally requires every relation to have degree at most one
    in each state symbol.
    """

    __slots__ = ("kind", "state_vars", "relations", "coefficients",
                 "_rules")

    def __init__(self, kind, relations, coefficients=None,
                 state_vars=None):
        if kind not in KINDS:
            raise ValueError(f"unknown kind {kind!r}")
        relations = tuple(relations)
        coefficients = dict(coefficients or {})
        if kind == "symmetric-3point":
            if state_vars is None:
                state_vars = ("x",)
            if len(relations) != 1 or len(state_vars) != 1:
                raise ValueError("symmetric kind takes one relation, one "
                                 "state variable")
        else:
            if state_vars is None:
                state_vars = ("x", "y")
            if len(relations) != 2 or len(state_vars) != 2:
                raise ValueError("pair kinds take two relations, two state "
                                 "variables")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "state_vars", tuple(state_vars))
        object.__setattr__(self, "relations",
                           tuple(canonical_relation(primitive_wrt(
                               r, self._state_symbols(state_vars)))
                               for r in relations))
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "_rules", {})
        self._check_birational()

    def __setattr__(self, *a):
        raise AttributeError("BirationalSystem is immutable")

    @staticmethod
    def _state_symbols(state_vars):
        syms = []
        for v in state_vars:
            syms += [join_offset(v, k) for k in (-1, 0, 1)]
        return syms

    def _check_birational(self):
        x = self.state_vars[0]
        if self.kind == "symmetric-3point":
            rel = self.relations[0]
            for v in (join_offset(x, 1), join_offset(x, -1)):
                if rel.degree(v) != 1:
                    raise NonBirationalRule(
                        f"relation not degree one in {v}")
        else:
            y = self.state_vars[1]
            ra, rb = self.relations
            checks = [(ra, join_offset(x, 1)), (ra, x),
                      (rb, y), (rb, join_offset(y, -1))]
            for rel, v in checks:
                if rel.degree(v) != 1:
                    raise NonBirationalRule(
                        f"relation not degree one in {v}")
            if self.kind == "trihomographic-pair":
                for rel in self.relations:
                    for v in rel.vars:
                        base, _ = split_offset(v)
                        if base in self.state_vars and rel.degree(v) > 1:
                            raise NotTrihomographic(
                                f"degree {rel.degree(v)} in {v}")

    # -- solved rules -------------------------------------------------

    def rule(self, name):
        """Solved update rules, cached.

        symmetric:  "fwd"  x@1  from {x, x@-1}        (relation at n)
                    "bwd"  x@-1 from {x, x@1}
        pairs:      "x1"   x@1  from {x, y}           (relation a at n)
                    "y1"   y@1  from {x@1, y}         (relation b at n+1)
                    "x0"   x    from {x@1, y}         (relation a at n)
                    "y-1"  y@-1 from {x, y}           (relation b at n)
        """
        if name in self._rules:
            return self._rules[name]
        x = self.state_vars[0]
        if self.kind == "symmetric-3point":
            rel = self.relations[0]
            if name == "fwd":
                r = solve_linear(rel, join_offset(x, 1))
            elif name == "bwd":
                r = solve_linear(rel, join_offset(x, -1))
            else:
                raise KeyError(name)
        else:
            y = self.state_vars[1]
            ra, rb = self.relations
            if name == "x1":
                r = solve_linear(ra, join_offset(x, 1))
            elif name == "y1":
                r = solve_linear(shift_offsets(rb, 1), join_offset(y, 1))
            elif name == "x0":
                r = solve_linear(ra, x)
            elif name == "y-1":
                r = solve_linear(rb, join_offset(y, -1))
            else:
                raise KeyError(name)
        self._rules[name] = r
        return r

    # -- coefficient evaluation --------------------------------------

    def coeff_bindings(self, rf, n):
        """Bindings for every coefficient symbol of rf, evaluated at the
        lattice index n plus the symbol's own offset.  Symbols without a
        declared law are left untouched (fixed parameters)."""
        out = {}
        for v in rf.variables:
            base, off = split_offset(v)
            if base in self.state_vars:
                continue
            if base in self.coefficients:
                out[v] = self.coefficients[base].at(n + off)
            elif off:
                # undeclared symbols are fixed parameters; collapse offsets
                out[v] = RatFunc.var(base)
        return out

    def rule_at(self, name, n):
        """A solved rule with its coefficient symbols evaluated at index n;
        remaining symbols are state symbols and fixed parameters."""
        r = self.rule(name)
        b = self.coeff_bindings(r, n)
        return r.subs(b) if b else r

    # -- stepping -----------------------------------------------------

    def step(self, state, n, truncation=None):
        """One full step at index n.

        symmetric: (x_n, x_{n-1}) -> (x_{n+1}, x_n)
        pairs:     (x_n, y_{n-1}) -> (x_{n+1}, y_n)

        Accepts exact values (ints, Fractions, RatFuncs, ExtValue) or
        LaurentSeries; exact 0/0 outcomes are escalated to a shared-epsilon
        series probe and the eps^0 value is returned with is_singular set
        on the result.
        """
        if any(isinstance(s, LaurentSeries) for s in state):
            return self.step_series(state, n, truncation)
        try:
            return StepResult(self._step_exact(state, n), False)
        except IndeterminateForm:
            pass
        trunc = truncation or DEFAULT_TRUNCATION
        while True:
            try:
                probe = [_perturb(s, trunc) for s in state]
                out = self.step_series(tuple(probe), n, trunc).state
                return StepResult(tuple(s.epsilon_zero() for s in out), True)
            except PrecisionExhausted:
                if trunc >= 96:
                    raise
                trunc = min(96, trunc * 2)

    def _step_exact(self, state, n):
        x = self.state_vars[0]
        if self.kind == "symmetric-3point":
            xn, xp = (_as_ext(s) for s in state)
            rule = self.rule_at("fwd", n)
            nxt = substitute(rule, {x: xn, join_offset(x, -1): xp})
            return (nxt, xn)
        y = self.state_vars[1]
        xn, yp = (_as_ext(s) for s in state)
        yn = substitute(self._rule_y_now(n),
                        {x: xn, join_offset(y, -1): yp})
        x1 = substitute(self.rule_at("x1", n), {x: xn, y: yn})
        return (x1, yn)

    def _rule_y_now(self, n):
        """y from {x, y@-1}: relation b at index n solved for y."""
        if "ynow" not in self._rules:
            yv = self.state_vars[1]
            self._rules["ynow"] = solve_linear(self.relations[1], yv)
        r = self._rules["ynow"]
        b = self.coeff_bindings(r, n)
        return r.subs(b) if b else r

    def step_series(self, state, n, truncation=None):
        trunc = truncation or max(s.truncation for s in state
                                  if isinstance(s, LaurentSeries))
        state = tuple(s if isinstance(s, LaurentSeries)
                      else LaurentSeries.constant(_as_ratfunc(
                          s.value if isinstance(s, ExtValue) else s), trunc)
                      for s in state)
        x = self.state_vars[0]
        if self.kind == "symmetric-3point":
            xn, xp = state
            rule = self.rule_at("fwd", n)
            nxt = ratfunc_on_series(rule, {x: xn, join_offset(x, -1): xp},
                                    trunc)
            return StepResult((nxt, xn), nxt.valuation != 0)
        y = self.state_vars[1]
        xn, yp = state
        ry = self._rule_y_now(n)
        yn = ratfunc_on_series(ry, {x: xn, join_offset(y, -1): yp}, trunc)
        rx = self.rule_at("x1", n)
        x1 = ratfunc_on_series(rx, {x: xn, y: yn}, trunc)
        flag = yn.valuation != 0 or x1.valuation != 0
        return StepResult((x1, yn), flag)

    def step_back(self, state, n):
        """Inverse step: symmetric (x_{n+1}, x_n) at n -> (x_n, x_{n-1});
        pairs (x_{n+1}, y_n) at n -> (x_n, y_{n-1})."""
        x = self.state_vars[0]
        if self.kind == "symmetric-3point":
            x1, xn = (_as_ext(s) for s in state)
            rule = self.rule_at("bwd", n)
            prev = substitute(rule, {join_offset(x, 1): x1, x: xn})
            return (xn, prev)
        y = self.state_vars[1]
        x1, yn = (_as_ext(s) for s in state)
        xn = substitute(self.rule_at("x0", n),
                        {join_offset(x, 1): x1, y: yn})
        yp = substitute(self.rule_at("y-1", n), {x: xn, y: yn})
        return (xn, yp)

    def orbit(self, state, n0, steps, truncation=None):
        """The list of states after 1..steps full steps from index n0."""
        out = []
        for k in range(steps):
            res = self.step(state, n0 + k, truncation)
            state = res.state if isinstance(res, StepResult) else res
            out.append(state)
        return out

    # -- half-step trace (pairs) --------------------------------------

    def half_trace(self, x0, y0, n0, halves, truncation=None):
        """Alternating values x_{n0+1}, y_{n0+1}, x_{n0+2}, ... seeded by
        (x_{n0}, y_{n0}); series in, series out."""
        if self.kind == "symmetric-3point":
            raise ValueError("half_trace is for pair kinds")
        trunc = truncation or DEFAULT_TRUNCATION
        x = self.state_vars[0]
        y = self.state_vars[1]
        xs = x0 if isinstance(x0, LaurentSeries) else \
            LaurentSeries.constant(_as_ratfunc(x0), trunc)
        ys = y0 if isinstance(y0, LaurentSeries) else \
            LaurentSeries.constant(_as_ratfunc(y0), trunc)
        out = []
        n = n0
        for k in range(halves):
            if k % 2 == 0:
                rx = self.rule_at("x1", n)
                xs = ratfunc_on_series(rx, {x: xs, y: ys}, trunc)
                out.append(xs)
            else:
                ry = self.rule_at("y1", n)
                ys = ratfunc_on_series(ry, {join_offset(x, 1): xs, y: ys},
                                       trunc)
                out.append(ys)
                n += 1
        return out

    def __str__(self):
        rels = "; ".join(str(r) + " = 0" for r in self.relations)
        return f"<{self.kind}: {rels}>"

    __repr__ = __str__


@dataclass(frozen=True)
class StepResult:
    state: tuple
    is_singular: bool


def _as_ext(v):
    if isinstance(v, ExtValue):
        return v
    return ExtValue.finite(_as_ratfunc(v))


def _perturb(v, trunc):
    e = LaurentSeries.eps(trunc)
    if isinstance(v, ExtValue):
        if v.is_infinite:
            return e.inverse()
        v = v.value
    return LaurentSeries.constant(_as_ratfunc(v), trunc) + e


# ---------------------------------------------------------------------------
# changes of variables
# ---------------------------------------------------------------------------


def apply_homography_to_system(system, hs):
    """Conjugate a system by per-variable homographies.

    ``hs`` maps state variable names to Homography; the new state variable
    u_n is h(old value): orbits transform as u_n = h(x_n).  Homography
    entries may carry sequence symbols with offsets, which are shifted to
    match each occurrence's lattice offset.
    """
    new_rels = []
    state = set(system.state_vars)
    for rel in system.relations:
        cur = rel
        for v in list(rel.vars):
            base, off = split_offset(v)
            if base not in state or base not in hs:
                continue
            # old = hinv(new); clear entry denominators to polynomials
            hinv = hs[base].inverse().shifted(off, skip=state)
            a, b, c, d = hinv.a, hinv.b, hinv.c, hinv.d
            common = RatFunc.from_poly(a.den * b.den * c.den * d.den)
            vn = MPoly.var(v)
            num_p = ((a * common).num * vn + (b * common).num)
            den_p = ((c * common).num * vn + (d * common).num)
            cur = substitute_var_rational(cur, v, num_p, den_p)
        cur = primitive_wrt(cur, [w for w in cur.vars
                                  if split_offset(w)[0] in state])
        new_rels.append(cur)
    return BirationalSystem(system.kind, new_rels,
                            coefficients=dict(system.coefficients),
                            state_vars=system.state_vars)


def translate_and_scale(system, shifts=None, scales=None):
    """Affine conjugation u_n = scale * v_n + shift per variable.

    Shifts and scales may carry sequence symbols with offsets (so a
    translation by Z_n shifts different lattice sites by Z at matching
    offsets)."""
    hs = {}
    for v in system.state_vars:
        s = _as_ratfunc((shifts or {}).get(v, 0))
        m = _as_ratfunc((scales or {}).get(v, 1))
        if s.is_zero() and m == RatFunc.one():
            continue
        hs[v] = Homography(m, s, RatFunc.zero(), RatFunc.one())
    if not hs:
        return system
    return apply_homography_to_system(system, hs)


def map_step_on_series(system, state, n, truncation=None):
    """One full step with LaurentSeries state; infinities live at negative
    valuation."""
    return system.step_series(state, n, truncation).state
