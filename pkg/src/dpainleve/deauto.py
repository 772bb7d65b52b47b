"""Deautonomisation: promote constant coefficients to index-dependent
sequences, demand that every confined singularity pattern survive, and
solve the resulting constraint recurrences into secular-plus-periodic
laws.

The constant coefficients themselves always solve the deautonomised
family, so the admissible sequences form a linear space (or a
multiplicative group) through the autonomous point.  A first-order
perturbation A_k -> a + t*u_k therefore recovers the constraint exactly:
the coefficient of t in the first broken slot of the epsilon-series trace
is a linear functional of the direction u whose kernel is the constraint
recurrence.  Probing with randomly chosen rational directions keeps every
intermediate rational function univariate in t."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from fractions import Fraction

from .algebra import RatFunc
from .errors import (ConfinementLost, JetPrecisionLost, NonlinearConstraint,
                     NonUnityRoots, PrecisionExhausted)
from .mapping import BirationalSystem, Sequence
from .series import jet_coefficients
from .singularity import (PROBE_SEEDS, _slot_stream, confinement_test,
                          find_singular_entries)

MAX_ROUNDS = 8
PERTURBATION = "_t"
JET_ORDER = 8
MAX_JET_ORDER = 128
WINDOW_MARGIN = 3


# ---------------------------------------------------------------------------
# integer polynomial helpers (coefficient lists, low degree first)
# ---------------------------------------------------------------------------


def _poly_trim(p):
    while p and p[-1] == 0:
        p.pop()
    return p


def _poly_mul(p, q):
    out = [0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return out


def _poly_divmod(p, q):
    """Division of integer coefficient lists; exact only when the leading
    coefficient of q divides along the way (cyclotomics are monic)."""
    p = list(p)
    out = [0] * (max(len(p) - len(q) + 1, 0))
    while len(p) >= len(q) and p:
        if p[-1] % q[-1] != 0:
            return None, None
        f = p[-1] // q[-1]
        k = len(p) - len(q)
        out[k] = f
        for i, c in enumerate(q):
            p[i + k] -= f * c
        _poly_trim(p)
    return out, p


def cyclotomic(m):
    """Coefficient list of the m-th cyclotomic polynomial."""
    if m == 1:
        return [-1, 1]
    p = [0] * m + [1]
    p[0] = -1                               # lambda^m - 1
    for d in range(1, m):
        if m % d == 0:
            q, r = _poly_divmod(p, cyclotomic(d))
            assert r == []
            p = q
    return p


def cyclotomic_factorization(p):
    """Multiset {m: multiplicity} of cyclotomic factors; raises
    NonUnityRoots on a non-cyclotomic remainder."""
    p = _poly_trim([int(c) for c in p])
    deg = len(p) - 1
    mult = {}
    for m in range(1, 2 * deg + 3):
        cyc = cyclotomic(m)
        while len(p) >= len(cyc):
            q, r = _poly_divmod(p, cyc)
            if q is None or r != []:
                break
            p = q
            mult[m] = mult.get(m, 0) + 1
        if len(p) == 1:
            break
    if len(p) > 1:
        raise NonUnityRoots(
            f"characteristic polynomial has a non-cyclotomic factor of "
            f"degree {len(p) - 1}")
    return mult


# ---------------------------------------------------------------------------
# constraint recurrences and their solutions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintRecurrence:
    """Homogeneous linear recurrence sum_i coeffs[i] * C_{n+i} = 0 on one
    coefficient sequence (multiplicative: prod_i C_{n+i}^{coeffs[i]} = 1,
    the same recurrence acting on logarithms)."""

    base: str
    coeffs: tuple
    origin: str = ""
    multiplicative: bool = False

    def __post_init__(self):
        if (len(self.coeffs) < 2 or self.coeffs[0] == 0
                or self.coeffs[-1] == 0):
            raise ValueError("leading and trailing coefficients must be "
                             "nonzero")

    def order(self):
        return len(self.coeffs) - 1

    def characteristic(self):
        return list(self.coeffs)

    def holds_for(self, values, window=None):
        """Exact check of value(n) over a window of starting indices."""
        order = self.order()
        if window is None:
            window = range(3 * order + 1)
        for n in window:
            if self.multiplicative:
                acc = Fraction(1)
                for i, c in enumerate(self.coeffs):
                    acc *= Fraction(values(n + i)) ** c
                if acc != 1:
                    return False
            else:
                acc = sum(Fraction(c) * Fraction(values(n + i))
                          for i, c in enumerate(self.coeffs))
                if acc != 0:
                    return False
        return True

    def extend(self, initial, length, start=0):
        """Solution values on range(start, start + length) from `order`
        initial values at indices start..start+order-1 (additive form)."""
        order = self.order()
        vals = [Fraction(v) for v in initial]
        assert len(vals) == order
        while len(vals) < length:
            nxt = -sum(Fraction(self.coeffs[i]) * vals[-order + i]
                       for i in range(order)) / self.coeffs[order]
            vals.append(nxt)
        return vals

    def extend_back(self, vals, count):
        """Prepend `count` values using the recurrence downward."""
        order = self.order()
        vals = [Fraction(v) for v in vals]
        for _ in range(count):
            head = -sum(Fraction(self.coeffs[i]) * vals[i - 1]
                        for i in range(1, order + 1)) / self.coeffs[0]
            vals.insert(0, head)
        return vals

    def __str__(self):
        parts = []
        for i in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[i]
            if c == 0:
                continue
            term = f"{self.base}_n" if i == 0 else f"{self.base}_n+{i}"
            if c == 1:
                parts.append(f"+{term}")
            elif c == -1:
                parts.append(f"-{term}")
            else:
                parts.append(f"{c:+d}*{term}")
        body = "".join(parts).lstrip("+")
        if self.multiplicative:
            return f"prod form: {body} = 0 on logs"
        return f"{body} = 0"


@dataclass(frozen=True)
class NSequenceLaw:
    """alpha*n + beta + sum phi_m(n) + sum chi_p(n) + delta*n*(-1)^n.

    phi_m is zero-mean m-periodic (m-1 free amplitudes), chi_p is
    antiperiodic with full period p (p/2 free amplitudes).  For a
    multiplicative coefficient the same shape lives on the logarithm:
    secular means a geometric ratio and periodic factors multiply to one
    over a period."""

    alpha: bool = False
    beta: bool = False
    periodic: tuple = ()
    alternating: tuple = ()
    special: bool = False
    multiplicative: bool = False

    def free_amplitude_count(self):
        return (int(self.alpha) + int(self.beta)
                + sum(m - 1 for m in self.periodic)
                + sum(p // 2 for p in self.alternating)
                + int(self.special))

    def render(self):
        parts = []
        if self.alpha:
            parts.append("alpha*n")
        if self.beta:
            parts.append("beta")
        for m in sorted(self.periodic):
            parts.append(f"phi{m}(n)")
        for p in sorted(self.alternating):
            parts.append(f"chi{p}(n)")
        if self.special:
            parts.append("delta*n*(-1)^n")
        body = " + ".join(parts) if parts else "0"
        return f"exp({body})" if self.multiplicative else body

    def instantiate(self, rng=None, amplitudes=None):
        """A concrete value(n) callable with exact rational amplitudes."""
        rng = rng or random.Random(20240817)
        amplitudes = amplitudes or {}

        def draw():
            return Fraction(rng.randint(1, 60), rng.randint(1, 9))

        a = amplitudes.get("alpha", draw()) if self.alpha else Fraction(0)
        b = amplitudes.get("beta", draw()) if self.beta else Fraction(0)
        d = amplitudes.get("delta", draw()) if self.special else Fraction(0)
        periodics = []
        for m in self.periodic:
            vals = amplitudes.get(f"phi{m}",
                                  [draw() for _ in range(m - 1)])
            vals = [Fraction(v) for v in vals]
            vals = vals + [-sum(vals, Fraction(0))]
            periodics.append(vals)
        alternats = []
        for p in self.alternating:
            vals = amplitudes.get(f"chi{p}",
                                  [draw() for _ in range(p // 2)])
            alternats.append([Fraction(v) for v in vals])

        def log_value(n):
            acc = a * n + b
            for vals in periodics:
                acc += vals[n % len(vals)]
            for vals in alternats:
                q, r = divmod(n, len(vals))
                acc += vals[r] if q % 2 == 0 else -vals[r]
            if self.special:
                acc += d * n * (-1) ** n
            return acc

        if not self.multiplicative:
            return log_value

        # multiplicative: same structure acting through exponentials of a
        # rational base; keep everything exact with base 2
        base = amplitudes.get("base", Fraction(2))

        def value(n):
            e = log_value(n)
            if e.denominator != 1:
                raise NonlinearConstraint(
                    "non-integer exponent in a multiplicative law")
            return Fraction(base) ** int(e)

        return value


@dataclass(frozen=True)
class DeautoResult:
    constraints: tuple            # raw ConstraintRecurrence per obstruction
    laws: dict                    # base -> NSequenceLaw
    rules: dict                   # base -> merged ConstraintRecurrence
    entries: tuple                # entries that produced constraints

    def genuine_parameter_count(self, gauge_dim=0):
        """Free amplitudes minus the secular step (absorbed by the index
        shift) minus the declared gauge dimension."""
        total = sum(law.free_amplitude_count() for law in self.laws.values())
        steps = 1 if any(law.alpha for law in self.laws.values()) else 0
        return total - steps - gauge_dim


def solve_linear_recurrence(rec):
    """Map the cyclotomic factorization of the characteristic polynomial
    onto secular and periodic law components."""
    mult = cyclotomic_factorization(rec.characteristic())
    e1 = mult.pop(1, 0)
    e2 = mult.pop(2, 0)
    if e1 > 2 or e2 > 2 or any(e > 1 for e in mult.values()):
        raise NonUnityRoots("root multiplicity outside the secular plus "
                            "periodic solution class")
    alpha = e1 == 2
    beta = e1 >= 1
    special = e2 == 2
    periodic = []
    alternating = []
    S = set(mult)
    if e2 == 2:
        periodic.append(2)       # the (-1)^n companion of n*(-1)^n
    elif e2 == 1:
        S.add(2)
    while S:
        M = max(S)
        div_all = {d for d in range(2, M + 1) if M % d == 0}
        if div_all <= S:
            periodic.append(M)
            S -= div_all
            continue
        if M % 2 == 0:
            half = M // 2
            anti = {d for d in range(2, M + 1) if M % d == 0 and half % d}
            if anti <= S:
                alternating.append(M)
                S -= anti
                continue
        raise NonUnityRoots(
            f"cyclotomic factors {sorted(S)} do not assemble into "
            f"periodic or antiperiodic components")
    return NSequenceLaw(alpha=alpha, beta=beta,
                        periodic=tuple(sorted(periodic)),
                        alternating=tuple(sorted(alternating)),
                        special=special,
                        multiplicative=rec.multiplicative)


def _merge_recurrences(r1, r2):
    """Common solutions of two recurrences: the product of the shared
    cyclotomic factors of the characteristic polynomials."""
    if r1.coeffs == r2.coeffs:
        return r1
    m1 = cyclotomic_factorization(r1.characteristic())
    m2 = cyclotomic_factorization(r2.characteristic())
    shared = {m: min(m1[m], m2[m]) for m in m1 if m in m2}
    poly = [1]
    for m, e in sorted(shared.items()):
        for _ in range(e):
            poly = _poly_mul(poly, cyclotomic(m))
    if len(poly) < 2:
        raise NonlinearConstraint(
            "incompatible constraints: no common nontrivial solution")
    return ConstraintRecurrence(r1.base, tuple(poly),
                                f"{r1.origin} & {r2.origin}",
                                r1.multiplicative or r2.multiplicative)


# ---------------------------------------------------------------------------
# exact linear algebra over the rationals
# ---------------------------------------------------------------------------


def _solve_exact(rows, rhs):
    """Unique solution of an overdetermined consistent system, or None
    when the rows are rank-deficient or inconsistent."""
    n = len(rows[0])
    aug = [[Fraction(x) for x in row] + [Fraction(b)]
           for row, b in zip(rows, rhs)]
    pivots = []
    r = 0
    for c in range(n):
        pivot = next((i for i in range(r, len(aug)) if aug[i][c] != 0),
                     None)
        if pivot is None:
            return None                      # rank deficient
        aug[r], aug[pivot] = aug[pivot], aug[r]
        pv = aug[r][c]
        aug[r] = [x / pv for x in aug[r]]
        for i in range(len(aug)):
            if i != r and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[r])]
        pivots.append(c)
        r += 1
    for i in range(r, len(aug)):
        if aug[i][n] != 0:
            return None                      # inconsistent
    return [aug[i][n] for i in range(n)]


def _integerize(vec):
    """Scale a rational vector to a primitive integer vector with a
    positive trailing entry."""
    from math import gcd as igcd, lcm
    den = 1
    for v in vec:
        den = lcm(den, Fraction(v).denominator)
    ints = [int(Fraction(v) * den) for v in vec]
    g = 0
    for v in ints:
        g = igcd(g, abs(v))
    if g == 0:
        return None
    ints = [v // g for v in ints]
    last = next(i for i in range(len(ints) - 1, -1, -1) if ints[i])
    if ints[last] < 0:
        ints = [-v for v in ints]
    return ints


# ---------------------------------------------------------------------------
# perturbation probes
# ---------------------------------------------------------------------------


class _PerturbedLaw:
    """a + t * u_n with a shared symbolic perturbation scale t."""

    def __init__(self, base_value, direction, offset):
        self.base_value = base_value
        self.direction = direction
        self.offset = offset
        self.t = RatFunc.var(PERTURBATION)

    def value(self, n):
        k = n - self.offset
        if not 0 <= k < len(self.direction):
            raise IndexError(f"direction window exhausted at index {n}")
        return self.base_value + self.t * self.direction[k]


def _autonomous_value(system, name):
    v = system.coefficients[name].at(0)
    if not v.is_constant():
        raise ConfinementLost(
            f"coefficient {name} is not an explicit constant")
    return v.as_fraction()


def _perturbed_system(system, directions, lo):
    coeffs = dict(system.coefficients)
    for name, (a, u) in directions.items():
        coeffs[name] = Sequence(_PerturbedLaw(a, u, lo))
    return BirationalSystem(system.kind, system.relations, coeffs,
                            system.state_vars)


def _reference_profile(system, entry, trunc, halves):
    """Slot valuations of the autonomous trace, cut directly after the
    first full state pair recovered beyond the lost stretch."""
    streams = [_slot_stream(system, entry, trunc, seed)
               for seed in PROBE_SEEDS[:2]]
    profile = []
    prev_dep = False
    lost = False
    for _ in range(halves):
        picked = [next(st) for st in streams]
        s0 = picked[0][1]
        vals = [s.epsilon_zero() for _, s in picked]
        dep = not all(
            (v.is_infinite and vals[0].is_infinite)
            or (not v.is_infinite and not vals[0].is_infinite
                and v.value == vals[0].value) for v in vals)
        profile.append(None if s0.is_zero() else s0.valuation)
        lost = lost or not dep
        if lost and dep and prev_dep:
            return profile
        prev_dep = dep
    raise ConfinementLost(
        f"autonomous pattern from {entry} never recovers a state pair")


def _probe_obstruction(system, entry, directions, lo, reference, trunc):
    """(slot index, slot label, first-order obstruction value) of the
    first slot whose valuation drops below the autonomous reference, or
    None when the perturbed trace matches the reference throughout.

    The jet order is doubled whenever guard digits run out, which is
    detectable because the autonomous trace is the exact t = 0 limit."""
    order = JET_ORDER
    while True:
        try:
            return _probe_once(system, entry, directions, lo, reference,
                               trunc, order)
        except JetPrecisionLost:
            order *= 2
            if order > MAX_JET_ORDER:
                raise ConfinementLost(
                    f"jet precision exhausted probing from {entry}")


def _probe_once(system, entry, directions, lo, reference, trunc, order):
    pert = _perturbed_system(system, directions, lo)
    lifted = _lift_perturbed_entry(pert, entry)
    with jet_coefficients(PERTURBATION, order):
        stream = _slot_stream(pert, lifted, trunc, PROBE_SEEDS[0])
        for k, ref_val in enumerate(reference):
            label, s = next(stream)
            val = None if s.is_zero() else s.valuation
            if ref_val is None or val is None:
                continue
            if val > ref_val:
                # A multiple pole of the reference splits into nearby
                # poles separated by O(t): around eps = 0 only part of it
                # is seen, with 1/t powers in the coefficients resumming
                # the rest.  Anything else is a cancelled lead digit.
                lead = s.coeff(val)
                if lead.val < 0:
                    continue
                raise JetPrecisionLost(f"lead digit of slot {label} lost")
            if val < ref_val:
                lead = s.coeff(val)
                if lead.val <= 0:
                    raise JetPrecisionLost(
                        f"slot {label} inconsistent with the autonomous "
                        f"trace at zeroth order")
                c1 = lead.digit(1)
                if c1 == 0:
                    # the deviation is second order in the perturbation
                    # (a tangent direction off the exact variety)
                    continue
                return k, label, c1
    return None


def _lift_perturbed_entry(pert, entry):
    """The singular entry of the perturbed system reducing to `entry` at
    zero perturbation; singular values may move with the coefficients."""
    if entry.value.is_infinite:
        return entry
    target = entry.value.value
    for cand in find_singular_entries(pert):
        if cand.variable != entry.variable or cand.phase != entry.phase:
            continue
        if cand.value.is_infinite:
            continue
        v = cand.value.value
        if PERTURBATION in v.num.vars or PERTURBATION in v.den.vars:
            num0 = v.num.subs_int(PERTURBATION, 0)
            den0 = v.den.subs_int(PERTURBATION, 0)
            if den0.is_zero():
                continue
            v0 = RatFunc(num0, den0)
        else:
            v0 = v
        if v0 == target:
            return cand
    return entry


def _direction_window(reference):
    halves = len(reference)
    lo = -WINDOW_MARGIN
    hi = (halves + 1) // 2 + WINDOW_MARGIN
    return lo, hi


def _random_direction(rng, length):
    return [Fraction(rng.randint(-40, 40), rng.randint(1, 7))
            for _ in range(length)]


def _constrained_direction(rng, rec, lo, hi):
    """A random solution of the active recurrence on range(lo, hi)."""
    order = rec.order()
    initial = [Fraction(rng.randint(-40, 40), rng.randint(1, 7))
               for _ in range(order)]
    # initial values sit at indices 0..order-1
    vals = rec.extend(initial, hi)
    vals = rec.extend_back(vals, -lo)
    return vals


def _functional_to_recurrence(d, lo, base, origin, rules):
    """Turn the solved functional into a constraint recurrence.

    Without an active rule the trimmed coefficient vector is the
    recurrence itself.  With an active rule the functional acts on the
    solution space; the refined rule is the largest product of cyclotomic
    factors of the rule whose solutions annihilate the functional."""
    rule = rules.get(base)
    if rule is None:
        ints = _integerize(d)
        if ints is None:
            return None
        first = next(i for i, v in enumerate(ints) if v)
        last = next(i for i in range(len(ints) - 1, -1, -1) if ints[i])
        vec = ints[first:last + 1]
        if len(vec) < 2:
            raise ConfinementLost(
                f"obstruction at {origin} pins {base} to a constant")
        return ConstraintRecurrence(base, tuple(vec), origin)
    # refine: functional on window initial values of rule solutions
    mult = cyclotomic_factorization(rule.characteristic())
    factors = [m for m in sorted(mult) for _ in range(mult[m])]
    best = None
    for keep in range(1, 1 << len(factors)):
        poly = [1]
        for i, m in enumerate(factors):
            if keep >> i & 1:
                poly = _poly_mul(poly, cyclotomic(m))
        if len(poly) < 2 or (best is not None
                             and len(poly) <= len(best)):
            continue
        cand = ConstraintRecurrence(base, tuple(poly), origin,
                                    rule.multiplicative)
        ok = True
        for j in range(cand.order()):
            unit = [Fraction(i == j) for i in range(cand.order())]
            vals = cand.extend(unit, len(d))
            if sum(Fraction(di) * v for di, v in zip(d, vals)) != 0:
                ok = False
                break
        if ok:
            best = poly
    if best is None:
        raise NonlinearConstraint(
            f"obstruction at {origin} is not solved by any unit-root "
            f"subfamily of {rule}")
    return ConstraintRecurrence(base, tuple(best), origin,
                                rule.multiplicative)


def _confirm_rules(system, rules, lengths, rng):
    """Instantiate every rule with an exact non-infinitesimal solution and
    check the instantiated system still has confined patterns of the
    autonomous lengths."""
    lo, hi = -8, 48
    tval = Fraction(3, 7)

    class _Law:
        def __init__(self, a, u, mult):
            self.a, self.u, self.mult = a, u, mult

        def value(self, n):
            k = n - lo
            if self.mult:
                e = self.u[k]
                if e.denominator != 1:
                    raise NonlinearConstraint(
                        "non-integer exponent in a multiplicative law")
                return self.a * Fraction(2) ** int(e)
            return self.a + tval * self.u[k]

    coeffs = dict(system.coefficients)
    for base, rec in rules.items():
        a = _autonomous_value(system, base)
        if rec.multiplicative:
            u = _integer_solution(rec, lo, hi, rng)
        else:
            u = _constrained_direction(rng, rec, lo, hi)
        coeffs[base] = Sequence(_Law(a, u, rec.multiplicative))
    lawful = BirationalSystem(system.kind, system.relations, coeffs,
                              system.state_vars)
    found = set()
    for e in find_singular_entries(lawful):
        try:
            pat = confinement_test(lawful, e)
        except Exception:
            continue
        if pat.verdict == "Confined":
            found.add(pat.length)
    return lengths <= found


def _integer_solution(rec, lo, hi, rng):
    """An integer-valued solution of the recurrence (for multiplicative
    exponents): an integer combination of shifted unit solutions stays
    integral only when the recurrence is monic both ways, which holds for
    products of cyclotomics."""
    order = rec.order()
    initial = [Fraction(rng.randint(-5, 5)) for _ in range(order)]
    vals = rec.extend(initial, hi)
    vals = rec.extend_back(vals, -lo)
    if any(v.denominator != 1 for v in vals):
        raise NonlinearConstraint(
            "no integer exponent solution for the multiplicative law")
    return vals


# ---------------------------------------------------------------------------
# the driver
# ---------------------------------------------------------------------------


def _with_adaptive_truncation(fn, start=12, cap=96):
    trunc = start
    while True:
        try:
            return fn(trunc)
        except PrecisionExhausted:
            trunc *= 2
            if trunc > cap:
                raise


def deautonomise(system, which, rng=None):
    """Promote the named constant coefficients, preserve every confined
    pattern, and solve the collected obstruction recurrences."""
    if isinstance(which, str):
        which = (which,)
    rng = rng or random.Random(1105)
    confined = []
    lengths = set()
    for e in find_singular_entries(system):
        try:
            pat = confinement_test(system, e)
        except Exception:
            continue
        if pat.verdict == "Confined":
            confined.append(e)
            lengths.add(pat.length)
    if not confined:
        raise ConfinementLost("no confined pattern to preserve")
    rules = {}
    constraints = []
    used = []
    for entry in confined:
        got = _with_adaptive_truncation(
            lambda trunc: _constraints_for_entry(system, which, entry,
                                                 rules, trunc, rng))
        constraints.extend(got)
        if got:
            used.append(entry)
    # decide additive versus multiplicative by explicit verification
    if rules and not _confirm_rules(system, rules, lengths, rng):
        flipped = {b: ConstraintRecurrence(r.base, r.coeffs, r.origin,
                                           not r.multiplicative)
                   for b, r in rules.items()}
        if not _confirm_rules(system, flipped, lengths, rng):
            raise NonlinearConstraint(
                "constraints hold to first order only")
        rules = flipped
        constraints = [flipped[c.base]
                       if c.coeffs == flipped[c.base].coeffs else c
                       for c in constraints]
    laws = {name: solve_linear_recurrence(rec)
            for name, rec in rules.items()}
    return DeautoResult(tuple(constraints), laws, dict(rules), tuple(used))


class _ProbeNonlinear(Exception):
    """The obstruction values are not a linear functional of the probe
    directions (division by split-pole leads makes them rational); the
    constraint must be found by candidate enumeration instead."""


def _constraints_for_entry(system, which, entry, rules, trunc, rng):
    reference = _reference_profile(system, entry, trunc, 64)
    lo, hi = _direction_window(reference)
    width = hi - lo
    autonomous = {name: _autonomous_value(system, name) for name in which}
    collected = []
    for _ in range(MAX_ROUNDS):
        try:
            finding = _find_functional(system, which, entry, rules, trunc,
                                       rng, reference, lo, hi, width,
                                       autonomous)
        except _ProbeNonlinear:
            recs = _candidate_rules(system, which, entry, rules, trunc,
                                    rng, reference, lo, hi, width,
                                    autonomous)
            collected.extend(recs)
            continue
        if finding is None:
            return collected
        origin, per_base = finding
        progressed = False
        for base, d in per_base.items():
            rec = _functional_to_recurrence(d, lo, base, origin, rules)
            if rec is None:
                continue
            old = rules.get(base)
            if old is not None and old.coeffs == rec.coeffs:
                continue
            rules[base] = rec
            collected.append(rec)
            progressed = True
        if not progressed:
            raise ConfinementLost(
                f"obstruction at {origin} involves none of {which} or "
                f"repeats a known constraint")
    raise ConfinementLost(
        f"more than {MAX_ROUNDS} constraint rounds from entry {entry}")


def _rule_direction(rec, rng, lo, hi):
    initial = [Fraction(rng.randint(-40, 40), rng.randint(1, 7))
               for _ in range(rec.order())]
    u = rec.extend(initial, hi)
    return rec.extend_back(u, -lo)


# Candidate cyclotomic factors tested for admissibility, as
# (root order, multiplicity) in test order; lower powers first so a
# failed power prunes the higher one.
_CANDIDATE_FACTORS = ((1, 2), (2, 1), (2, 2), (3, 1), (4, 1), (6, 1),
                      (8, 1), (12, 1))


def _candidate_rules(system, which, entry, rules, trunc, rng, reference,
                     lo, hi, width, autonomous):
    """Per-base constraint recurrences by factor enumeration.

    A candidate recurrence passes when its solutions, used as
    perturbation directions, raise no first-order obstruction; the
    passing candidates are exactly the divisors of the true constraint,
    so the constraint is the product of the maximal passing cyclotomic
    powers."""
    zero = [Fraction(0)] * width

    def probe(active):
        directions = {name: (autonomous[name], active.get(name, zero))
                      for name in which}
        return _probe_obstruction(system, entry, directions, lo,
                                  reference, trunc)

    def passes(poly, base, repeats=2):
        rec = ConstraintRecurrence(base, tuple(poly))
        return all(
            probe({base: _rule_direction(rec, rng, lo, hi)}) is None
            for _ in range(repeats))

    open_bases = [b for b in which if b not in rules]
    if not open_bases:
        raise NonlinearConstraint(
            f"obstruction from {entry} persists for directions solving "
            f"{[str(r) for r in rules.values()]} and is not separable "
            f"per coefficient")
    found = []
    for base in open_bases:
        if probe({base: _random_direction(rng, width)}) is None:
            continue  # this base alone does not break confinement
        # the constant direction (root 1) is always admissible: it only
        # shifts the autonomous point
        kept = {1: 1}
        for d, mult in _CANDIDATE_FACTORS:
            if kept.get(d, 0) != mult - 1:
                continue
            p = [1]
            for _ in range(mult):
                p = _poly_mul(p, cyclotomic(d))
            if len(p) <= width and passes(p, base):
                kept[d] = mult
        p = [1]
        for d, mult in kept.items():
            for _ in range(mult):
                p = _poly_mul(p, cyclotomic(d))
        rec = ConstraintRecurrence(base, tuple(p),
                                   origin=f"{entry}@enumerated")
        if len(p) > width or not passes(rec.coeffs, base):
            raise NonlinearConstraint(
                f"admissible directions for {base} do not combine into "
                f"a linear constraint removing the obstruction from "
                f"{entry}")
        rules[base] = rec
        found.append(rec)
    if not found:
        raise ConfinementLost(
            f"obstruction from {entry} involves none of {which} "
            f"individually")
    return found


def _find_functional(system, which, entry, rules, trunc, rng, reference,
                     lo, hi, width, autonomous):
    """Solve for the first-order obstruction functional under the current
    rules; None when no slot breaks."""
    unknowns = []
    for name in which:
        rec = rules.get(name)
        n = rec.order() if rec is not None else width
        unknowns.append((name, n))
    total = sum(n for _, n in unknowns)
    rows, rhs = [], []
    slot_seen = None
    for _ in range(total + 3):
        directions = {}
        row = []
        for name, n in unknowns:
            rec = rules.get(name)
            if rec is None:
                u = _random_direction(rng, width)
                row.extend(u)
            else:
                initial = [Fraction(rng.randint(-40, 40),
                                    rng.randint(1, 7))
                           for _ in range(rec.order())]
                u = rec.extend(initial, hi)
                u = rec.extend_back(u, -lo)
                row.extend(initial)
            directions[name] = (autonomous[name], u)
        got = _probe_obstruction(system, entry, directions, lo,
                                 reference, trunc)
        if got is None:
            if not rows:
                return None
            raise _ProbeNonlinear(entry)
        k, label, value = got
        if slot_seen is None:
            slot_seen = k
        elif k != slot_seen:
            raise ConfinementLost(
                f"probes from {entry} break at different slots "
                f"({slot_seen} vs {k})")
        rows.append(row)
        rhs.append(value)
    sol = _solve_exact(rows, rhs)
    if sol is None:
        raise _ProbeNonlinear(entry)
    per_base = {}
    at = 0
    for name, n in unknowns:
        part = sol[at:at + n]
        at += n
        if any(v != 0 for v in part):
            per_base[name] = part
    if not per_base:
        raise ConfinementLost(
            f"obstruction from {entry} does not involve {which}")
    origin = f"{entry}@slot{slot_seen}"
    return origin, per_base


def verify_law(system, which, laws, indices=range(4), rng=None):
    """Instantiate the laws with random rational amplitudes and check a
    confined pattern survives at several starting indices."""
    if isinstance(which, str):
        which = (which,)
    rng = rng or random.Random(97)
    values = {name: laws[name].instantiate(rng)
              for name in which if name in laws}

    class _Law:
        def __init__(self, f):
            self.f = f

        def value(self, n):
            return self.f(n)

    coeffs = dict(system.coefficients)
    for name, f in values.items():
        coeffs[name] = Sequence(_Law(f))
    lawful = BirationalSystem(system.kind, system.relations, coeffs,
                              system.state_vars)
    shapes = []
    for n0 in indices:
        found = None
        for e in find_singular_entries(lawful, n0):
            try:
                pat = confinement_test(lawful, e, n0=n0)
            except Exception:
                continue
            if pat.verdict == "Confined":
                found = pat
                break
        if found is None:
            return False, shapes
        shapes.append((n0, found.length))
    lengths = {ln for _, ln in shapes}
    return len(lengths) == 1, shapes
