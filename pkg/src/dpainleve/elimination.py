"""Variable elimination, Miura certificates, and double/triple-step systems.

A staggered pair determines a three-point equation for either of its two
variables; the pair is then a Miura transformation between the two
eliminations.  Composing an equation with itself along the lattice yields
double- and triple-step evolutions.  All derivations are exact: resultant
chains with solve-and-substitute shortcuts, declared (never silent)
spurious-factor stripping, and orbit-level consistency checks on random
exact data.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .algebra import (MPoly, RatFunc, _as_ratfunc, divides, exact_div,
                      resultant)
from .errors import (EliminationDegenerate, MultistepImpossible,
                     ZeroDenominator)
from .mapping import (BirationalSystem, canonical_relation, join_offset,
                      primitive_wrt, shift_offsets, solve_linear,
                      split_offset, substitute_var_rational)


# ---------------------------------------------------------------------------
# elimination primitives
# ---------------------------------------------------------------------------


def _eliminate_symbol(p, q, var):
    """A consequence of {p = 0, q = 0} free of var.

    Solve-and-substitute when either input is degree one in var (no
    extraneous factors that way); resultant otherwise.
    """
    dp, dq = p.degree(var), q.degree(var)
    if dp == 0 or dq == 0:
        raise EliminationDegenerate(f"{var} absent from an input relation")
    if dp == 1:
        uni = p.as_univariate(var)
        num = -uni.get(0, MPoly.const(0))
        return substitute_var_rational(q, var, num, uni[1])
    if dq == 1:
        uni = q.as_univariate(var)
        num = -uni.get(0, MPoly.const(0))
        return substitute_var_rational(p, var, num, uni[1])
    return resultant(p, q, var)


def _strip_declared(rel, spurious):
    """Divide out each annotated spurious factor as often as it divides."""
    stripped = []
    for f in spurious:
        f = canonical_relation(f)
        if f.is_constant():
            continue
        while divides(f, rel):
            rel = exact_div(rel, f)
            stripped.append(f)
    return rel, tuple(stripped)


def _finish_relation(rel, keep_syms, spurious):
    if rel.is_zero():
        raise EliminationDegenerate("relations share a common factor")
    rel = primitive_wrt(rel, keep_syms)
    rel, stripped = _strip_declared(rel, spurious)
    rel = primitive_wrt(rel, keep_syms)
    if all(rel.degree(s) == 0 for s in keep_syms):
        raise EliminationDegenerate("elimination left no state dependence")
    return canonical_relation(rel), stripped


@dataclass(frozen=True)
class EliminationResult:
    """A three-point equation for the kept variable, plus what was divided
    out on the way there."""

    equation: BirationalSystem
    variable: str
    stripped: tuple

    @property
    def relation(self):
        return self.equation.relations[0]


def eliminate(system, drop, spurious=()):
    """Eliminate one variable of a staggered pair.

    Dropping y combines the forward relation at n and n-1 with the
    staggered relation at n; dropping x combines the staggered relation at
    n and n+1 with the forward relation at n.  ``spurious`` lists factors
    (from the catalog annotations) to divide out of the raw eliminant.
    """
    if system.kind == "symmetric-3point":
        raise EliminationDegenerate("nothing to eliminate in a "
                                    "single-variable equation")
    x, y = system.state_vars
    if drop not in (x, y):
        raise EliminationDegenerate(f"{drop!r} is not a variable of the "
                                    "pair")
    ra, rb = system.relations
    if drop == y:
        keep = x
        r1 = _eliminate_symbol(shift_offsets(ra, -1), rb,
                               join_offset(y, -1))
        rel = _eliminate_symbol(ra, r1, y)
    else:
        keep = y
        r1 = _eliminate_symbol(shift_offsets(rb, 1), ra,
                               join_offset(x, 1))
        rel = _eliminate_symbol(r1, rb, x)
    keep_syms = [join_offset(keep, k) for k in (-1, 0, 1)]
    rel, stripped = _finish_relation(rel, keep_syms, spurious)
    eq = BirationalSystem("symmetric-3point", [rel],
                          coefficients=dict(system.coefficients),
                          state_vars=(keep,))
    return EliminationResult(eq, keep, stripped)


def substitute_coefficients(system, mapping):
    """Rewrite coefficient symbols of every relation.

    ``mapping`` sends a coefficient base name to a rational expression in
    other coefficient symbols; an occurrence at lattice offset k receives
    the expression with all its offsets shifted by k.
    """
    mapping = {b: _as_ratfunc(e) for b, e in mapping.items()}
    new_rels = []
    for rel in system.relations:
        bindings = {}
        for v in rel.vars:
            base, off = split_offset(v)
            if base in mapping:
                bindings[v] = shift_offsets(mapping[base], off)
        if not bindings:
            new_rels.append(rel)
            continue
        rf = RatFunc.from_poly(rel).subs(bindings)
        new_rels.append(rf.num)
    coeffs = {b: law for b, law in system.coefficients.items()
              if b not in mapping}
    return BirationalSystem(system.kind, new_rels, coefficients=coeffs,
                            state_vars=system.state_vars)


# ---------------------------------------------------------------------------
# numeric orbit machinery
#
# Orbits with a free coefficient sequence are generic (non-integrable), so
# their rational heights grow exponentially with the step count; length-50
# checks are run instead in a prime field of ~60 bits, which keeps the
# arithmetic exact and the verdicts deterministic for a given seed.
# ---------------------------------------------------------------------------


def _random_prime(rng):
    from .algebra import _is_prime
    while True:
        p = rng.randrange(1 << 59, 1 << 60) | 1
        if _is_prime(p):
            return p


def _fraction_mod(c, mod):
    c = Fraction(c)
    den = c.denominator % mod
    if den == 0:
        raise ZeroDenominator("coefficient denominator divisible by the "
                              "working prime")
    return c.numerator % mod * pow(den, -1, mod) % mod


def _poly_mod(p, bindings, mod):
    total = 0
    for exps, c in p.terms.items():
        t = _fraction_mod(c, mod)
        for v, e in zip(p.vars, exps):
            if e:
                t = t * pow(bindings[v], e, mod) % mod
        total = (total + t) % mod
    return total


def _rf_mod(rf, bindings, mod):
    den = _poly_mod(rf.den, bindings, mod)
    if den == 0:
        raise ZeroDenominator("singular value on verification orbit")
    return _poly_mod(rf.num, bindings, mod) * pow(den, -1, mod) % mod


class _SampledCoefficients:
    """Coefficient values per (base, index) in GF(mod); unknown bases get
    fresh random residues, memoized so every consumer sees the same
    sequence.  ``samplers`` pins a base to callable(self, n) so declared
    laws (constants, recurrences) are honoured by the random data."""

    def __init__(self, rng, mod, samplers=None):
        self.rng = rng
        self.mod = mod
        self.samplers = dict(samplers or {})
        self.cache = {}

    def random(self):
        return self.rng.randrange(1, self.mod)

    def value(self, base, n):
        key = (base, n)
        if key not in self.cache:
            if base in self.samplers:
                self.cache[key] = self.samplers[base](self, n) % self.mod
            else:
                self.cache[key] = self.random()
        return self.cache[key]

    def bindings(self, names, n, state_bases=()):
        out = {}
        for v in names:
            base, off = split_offset(v)
            if base in state_bases:
                continue
            out[v] = self.value(base, n + off)
        return out


def _eval_rf(rf, n, state_bindings, coeffs, state_bases):
    b = dict(state_bindings)
    b.update(coeffs.bindings(rf.variables, n, state_bases))
    return _rf_mod(rf, b, coeffs.mod)


def _relation_residual(rel, n, values, coeffs, state_bases):
    """Evaluate a cleared relation in GF(mod); values maps full symbol
    names ('x@1' etc.) of the state to residues."""
    b = dict(values)
    b.update(coeffs.bindings(rel.vars, n, state_bases))
    return _poly_mod(rel, b, coeffs.mod)


def _pair_orbit(pair, coeffs, n0, length):
    """Values x_{n0..n0+length}, y_{n0-1..n0+length-1} of a pair from a
    random seed; raises ZeroDenominator on singular orbits."""
    x, y = pair.state_vars
    xs = {n0: coeffs.random()}
    ys = {n0 - 1: coeffs.random()}
    rule_y = solve_linear(pair.relations[1], y)
    rule_x = pair.rule("x1")
    for k in range(length):
        n = n0 + k
        state = {x: xs[n], join_offset(y, -1): ys[n - 1]}
        ys[n] = _eval_rf(rule_y, n, state, coeffs, (x, y))
        state[y] = ys[n]
        xs[n + 1] = _eval_rf(rule_x, n, state, coeffs, (x, y))
    return xs, ys


def _symmetric_orbit(eq, coeffs, n0, length):
    x = eq.state_vars[0]
    xs = {n0 - 1: coeffs.random(), n0: coeffs.random()}
    rule = eq.rule("fwd")
    for k in range(length):
        n = n0 + k
        state = {x: xs[n], join_offset(x, -1): xs[n - 1]}
        xs[n + 1] = _eval_rf(rule, n, state, coeffs, (x,))
    return xs


# ---------------------------------------------------------------------------
# Miura certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MiuraCertificate:
    """Outcome of checking that a pair is a Miura transformation between
    two single-variable equations.  A negative certificate is a valid
    answer; ``failures`` says where the first discrepancy appeared."""

    holds: bool
    symbolic: bool
    orbits_checked: int
    failures: tuple = ()


def _apply_dictionary(rel, dictionary):
    if not dictionary:
        return rel
    mapping = {b: _as_ratfunc(e) for b, e in dictionary.items()}
    bindings = {}
    for v in rel.vars:
        base, off = split_offset(v)
        if base in mapping:
            bindings[v] = shift_offsets(mapping[base], off)
    if not bindings:
        return rel
    return RatFunc.from_poly(rel).subs(bindings).num


def _miura_symbolic(pair, eq_x, eq_y, dictionary):
    """Substitution identities: neighbours of x (resp. y) expressed through
    the pair's rules turn each single-variable relation into zero."""
    x, y = pair.state_vars
    rb = pair.relations[1]
    failures = []

    rel_x = _apply_dictionary(eq_x.relations[0], dictionary)
    fwd = pair.rule("x1")                       # x@1 from {x, y}
    bwd = solve_linear(shift_offsets(pair.relations[0], -1),
                       join_offset(x, -1))      # x@-1 from {x, y@-1}
    hx = RatFunc.from_poly(rel_x).subs({
        join_offset(eq_x.state_vars[0], 1): fwd,
        eq_x.state_vars[0]: RatFunc.var(x),
        join_offset(eq_x.state_vars[0], -1): bwd})
    # impose the staggered relation by eliminating y@-1
    yprev = solve_linear(rb, join_offset(y, -1))
    hx = hx.subs({join_offset(y, -1): yprev})
    if not hx.num.is_zero():
        failures.append(("x-equation", "substitution identity nonzero"))

    rel_y = _apply_dictionary(eq_y.relations[0], dictionary)
    ynext = pair.rule("y1").subs({join_offset(x, 1): fwd})
    yprev = solve_linear(rb, join_offset(y, -1))
    hy = RatFunc.from_poly(rel_y).subs({
        join_offset(eq_y.state_vars[0], 1): ynext,
        eq_y.state_vars[0]: RatFunc.var(y),
        join_offset(eq_y.state_vars[0], -1): yprev})
    if not hy.num.is_zero():
        failures.append(("y-equation", "substitution identity nonzero"))
    return failures


def verify_miura(pair, eq_x, eq_y, dictionary=None, *, rng=None,
                 orbits=20, length=50, samplers=None):
    """Certify that pair orbits project to solutions of both equations.

    ``dictionary`` rewrites the equations' coefficient symbols in terms of
    the pair's (e.g. the equations may use products of the pair's
    coefficients at neighbouring indices).  ``samplers`` optionally pins
    coefficient sequences (base name -> callable of n) so that laws such
    as a multiplicative recurrence are honoured by the random data.
    """
    import random
    rng = rng or random.Random(0)
    failures = list(_miura_symbolic(pair, eq_x, eq_y, dictionary))
    symbolic_ok = not failures

    checked = 0
    attempts = 0
    mod = _random_prime(rng)
    while checked < orbits and attempts < 8 * orbits:
        attempts += 1
        coeffs = _SampledCoefficients(rng, mod, samplers)
        try:
            xs, ys = _pair_orbit(pair, coeffs, 0, length)
        except (ZeroDenominator, ZeroDivisionError):
            continue
        bad = _check_projection(eq_x, dictionary, xs, coeffs, length)
        if bad is None:
            bad = _check_projection(eq_y, dictionary, ys, coeffs, length,
                                    lo=0)
        if bad is not None:
            failures.append(bad)
            checked += 1
            break
        checked += 1
    if checked < orbits and not failures:
        failures.append(("orbits", "too many singular random orbits"))
    return MiuraCertificate(not failures, symbolic_ok, checked,
                            tuple(failures))


def _check_projection(eq, dictionary, values, coeffs, length, lo=1):
    v = eq.state_vars[0]
    rel = _apply_dictionary(eq.relations[0], dictionary)
    for n in range(lo + 1, length - 1):
        if n - 1 not in values or n + 1 not in values:
            continue
        try:
            r = _relation_residual(
                rel, n,
                {join_offset(v, -1): values[n - 1], v: values[n],
                 join_offset(v, 1): values[n + 1]},
                coeffs, (v,))
        except (ZeroDenominator, ZeroDivisionError):
            continue
        if r != 0:
            return (f"{v}-equation", f"nonzero residual at index {n}")
    return None


# ---------------------------------------------------------------------------
# multistep evolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MultistepResult:
    """Relations tying lattice sites k steps apart.

    For a double step there is one relation in {v@2, v, v@-2}; for a
    triple step, two relations on the pair's variables at stride-three
    sites.  ``verified`` reports the orbit comparison performed at
    construction time.
    """

    stride: int
    relations: tuple
    variables: tuple
    source: BirationalSystem
    stripped: tuple
    verified: int


def _monic_in_center(rel, var):
    """Divide out the monomial content in var (the paper's 'constant term
    cancels' normalization); require degree at most one afterwards."""
    low = min(e[rel.vars.index(var)] for e in rel.terms) if var in rel.vars \
        else 0
    if low:
        rel = exact_div(rel, MPoly.var(var, low))
    if rel.degree(var) > 1:
        raise MultistepImpossible(
            f"relation is not linear in {var} after clearing; no "
            "double-step evolution exists")
    return rel


def _double_step(eq, spurious):
    x = eq.state_vars[0]
    rel = _monic_in_center(eq.relations[0], x)
    up = shift_offsets(rel, 1)       # {x@2, x@1, x}
    dn = shift_offsets(rel, -1)      # {x, x@-1, x@-2}
    mid = eq.relations[0]            # {x@1, x, x@-1}
    r1 = _eliminate_symbol(up, mid, join_offset(x, 1))
    r2 = _eliminate_symbol(r1, dn, join_offset(x, -1))
    keep = [join_offset(x, k) for k in (-2, 0, 2)]
    rel2, stripped = _finish_relation(r2, keep, spurious)
    return (rel2,), (x,), stripped


def _triple_step(pair, spurious):
    x, y = pair.state_vars
    ra, rb = pair.relations

    def at(rel, k):
        return shift_offsets(rel, k)

    # relation between x@1, x@-2 and y@-1
    t1 = _eliminate_symbol(rb, ra, y)                      # {x@1, x, y@-1}
    t2 = _eliminate_symbol(at(rb, -1), at(ra, -2),
                           join_offset(y, -2))             # {y@-1, x@-1, x@-2}
    t3 = _eliminate_symbol(t2, at(ra, -1),
                           join_offset(x, -1))             # {x, x@-2, y@-1}
    rel_a = _eliminate_symbol(t1, t3, x)
    keep_a = [join_offset(x, 1), join_offset(x, -2), join_offset(y, -1)]
    rel_a, strip_a = _finish_relation(rel_a, keep_a, spurious)

    # relation between y@2, y@-1 and x@1
    s1 = _eliminate_symbol(at(rb, 2), at(ra, 1),
                           join_offset(x, 2))              # {y@2, y@1, x@1}
    s2 = _eliminate_symbol(ra, rb, x)                      # {x@1, y, y@-1}
    s3 = _eliminate_symbol(s1, at(rb, 1),
                           join_offset(y, 1))              # {y@2, y, x@1}
    rel_b = _eliminate_symbol(s3, s2, y)
    keep_b = [join_offset(y, 2), join_offset(y, -1), join_offset(x, 1)]
    rel_b, strip_b = _finish_relation(rel_b, keep_b, spurious)
    return (rel_a, rel_b), (x, y), strip_a + strip_b


def _verify_double(eq, rel2, rng, orbits, length):
    x = eq.state_vars[0]
    done = 0
    attempts = 0
    mod = _random_prime(rng)
    while done < orbits and attempts < 8 * orbits:
        attempts += 1
        coeffs = _SampledCoefficients(rng, mod)
        try:
            xs = _symmetric_orbit(eq, coeffs, 0, length)
        except (ZeroDenominator, ZeroDivisionError):
            continue
        for n in range(2, length - 2):
            try:
                r = _relation_residual(
                    rel2, n,
                    {join_offset(x, -2): xs[n - 2], x: xs[n],
                     join_offset(x, 2): xs[n + 2]},
                    coeffs, (x,))
            except (ZeroDenominator, ZeroDivisionError):
                continue
            if r != 0:
                raise MultistepImpossible(
                    f"double-step relation fails on orbit data at {n}")
        done += 1
    return done


def _verify_triple(pair, rels, rng, orbits, length):
    x, y = pair.state_vars
    rel_a, rel_b = rels
    done = 0
    attempts = 0
    mod = _random_prime(rng)
    while done < orbits and attempts < 8 * orbits:
        attempts += 1
        coeffs = _SampledCoefficients(rng, mod)
        try:
            xs, ys = _pair_orbit(pair, coeffs, 0, length)
        except (ZeroDenominator, ZeroDivisionError):
            continue
        for n in range(2, length - 2):
            try:
                r = _relation_residual(
                    rel_a, n,
                    {join_offset(x, 1): xs[n + 1],
                     join_offset(x, -2): xs[n - 2],
                     join_offset(y, -1): ys[n - 1]},
                    coeffs, (x, y))
                s = _relation_residual(
                    rel_b, n,
                    {join_offset(y, 2): ys[n + 2],
                     join_offset(y, -1): ys[n - 1],
                     join_offset(x, 1): xs[n + 1]},
                    coeffs, (x, y))
            except (ZeroDenominator, ZeroDivisionError):
                continue
            if r != 0 or s != 0:
                raise MultistepImpossible(
                    f"triple-step relations fail on orbit data at {n}")
        done += 1
    return done


def multistep(system, k, spurious=(), *, rng=None, orbits=20, length=50):
    """Derive the k-step evolution of an equation, verified on random
    exact orbits before being returned.

    k = 2 applies to single-variable three-point equations whose relation
    is linear in the central variable once the monomial content is
    cleared; k = 3 applies to staggered pairs.  Staggered pairs are
    already a two-stride evolution of their own half-steps, so k = 2 on a
    pair is refused.
    """
    import random
    rng = rng or random.Random(0)
    if k == 2:
        if system.kind != "symmetric-3point":
            raise MultistepImpossible(
                "a staggered pair is already a double-step evolution of "
                "its half-steps")
        rels, variables, stripped = _double_step(system, spurious)
        done = _verify_double(system, rels[0], rng, orbits, length)
    elif k == 3:
        if system.kind == "symmetric-3point":
            raise MultistepImpossible(
                "triple-step derivation starts from a staggered pair")
        rels, variables, stripped = _triple_step(system, spurious)
        done = _verify_triple(system, rels, rng, orbits, length)
    else:
        raise MultistepImpossible(f"stride {k} is out of scope")
    if done == 0:
        raise MultistepImpossible("no nonsingular verification orbit found")
    return MultistepResult(k, rels, variables, system, stripped, done)


def relation_equal(a, b):
    """Exact equality of cleared relations up to overall normalization."""
    return canonical_relation(a) == canonical_relation(b)
