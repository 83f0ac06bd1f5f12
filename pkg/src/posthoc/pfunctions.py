"""Randomized test functions and p-functions.

A p-function is the quantile transform of a randomized test function; the
two are linked by the Galois adjunction tf(alpha) >= u <=> p(u) <= alpha.
Per outcome, a p-function is stored piecewise on (0, 1] with each piece in
reciprocal power-sum form

    p(u) = 1 / sum_j a_j * u^(-g_j),      a_j > 0, g_j >= 0,

which is automatically nondecreasing in u, covers step functions (g = 0),
uniform randomization (p * u), the u^(1/n) shapes, and is closed under both
harmonic and product merging.  An empty term list encodes the value +inf
(never rejecting with that probability).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from ._numbers import INF, TOL, Number, is_inf, mul0, pow_ext, recip
from .core import (
    E_SCALE,
    EvidenceVariable,
    Hypothesis,
    P_SCALE,
    TestFunction,
    ValidityReport,
)

_GRID = 65  # numeric refinement for multi-term suprema


def _inv_pow(x: Number, g: Number) -> Number:
    """x ** (1/g) preserving exactness when 1/g is an integer."""
    return pow_ext(x, recip(g) if isinstance(g, (int, Fraction)) else 1.0 / g)


# ---------------------------------------------------------------------------
# per-outcome curves


@dataclass(frozen=True)
class PCurve:
    """One outcome's p-function on (0, 1]: callal, nondecreasing."""

    segments: tuple  # ((u_hi, terms), ...); terms = ((a, g), ...)

    def __init__(self, segments: Iterable):
        segs = []
        for u_hi, terms in segments:
            terms = tuple((a, g) for a, g in terms)
            for a, g in terms:
                if a <= 0:
                    raise ValueError("term coefficients must be positive")
                if g < 0:
                    raise ValueError("term powers must be nonnegative")
            segs.append((u_hi, terms))
        if not segs:
            raise ValueError("p-curve needs at least one segment")
        segs.sort(key=lambda s: s[0])
        if segs[-1][0] != 1:
            raise ValueError("segments must cover (0, 1]")
        u_lo = 0
        for u_hi, _ in segs:
            if u_hi <= u_lo:
                raise ValueError("segment breakpoints must strictly increase")
            u_lo = u_hi
        prev_end = None
        u_lo = 0
        for u_hi, terms in segs:
            start = _eval_terms(terms, u_hi if u_lo == 0 else u_lo)
            if prev_end is not None and start < prev_end and not _close(start, prev_end):
                raise ValueError("p-curve must be nondecreasing in u")
            prev_end = _eval_terms(terms, u_hi)
            u_lo = u_hi
        object.__setattr__(self, "segments", tuple(segs))

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, p: Number) -> "PCurve":
        if is_inf(p):
            return cls([(1, ())])
        return cls([(1, ((recip(p), 0),))])

    @classmethod
    def power(cls, coef: Number, power: Number) -> "PCurve":
        """p(u) = coef * u^power on all of (0, 1]."""
        if is_inf(coef):
            return cls([(1, ())])
        return cls([(1, ((recip(coef), power),))])

    @classmethod
    def steps(cls, pairs: Sequence) -> "PCurve":
        """Pure step function from (u_hi, level) pairs; last u_hi must be 1."""
        return cls([
            (u_hi, (() if is_inf(v) else ((recip(v), 0),)))
            for u_hi, v in pairs
        ])

    # -- queries -------------------------------------------------------------

    def value(self, u: Number) -> Number:
        if not (0 < u <= 1):
            raise ValueError("u must lie in (0, 1]")
        u_lo = 0
        for u_hi, terms in self.segments:
            if u_lo < u <= u_hi:
                return _eval_terms(terms, u)
            u_lo = u_hi
        raise AssertionError("unreachable: segments cover (0, 1]")

    def head(self) -> Number:
        """p(1), the non-randomized p-value this curve dominates."""
        return _eval_terms(self.segments[-1][1], 1)

    def is_constant(self) -> bool:
        if len(self.segments) > 1:
            first = self.segments[0][1]
            if any(terms != first for _, terms in self.segments):
                return False
        return all(g == 0 for _, terms in self.segments for _, g in terms)

    def breakpoints(self) -> list:
        return [u_hi for u_hi, _ in self.segments]

    def statistic(self) -> Number:
        """sup over u of u / p(u), including the u -> 0+ limit."""
        best = 0
        u_lo = 0
        for u_hi, terms in self.segments:
            best = max(best, _sup_ratio(terms, u_lo, u_hi))
            u_lo = u_hi
        return best

    # -- algebra ---------------------------------------------------------------

    def scaled(self, factor: Number) -> "PCurve":
        """Pointwise factor * p(u)."""
        if is_inf(factor):
            return PCurve([(1, ())])
        inv = recip(factor)
        return PCurve([
            (u_hi, tuple((a * inv, g) for a, g in terms))
            for u_hi, terms in self.segments
        ])


def _close(a: Number, b: Number) -> bool:
    if is_inf(a) or is_inf(b):
        return is_inf(a) and is_inf(b)
    return abs(float(a) - float(b)) <= 1e-9 * max(1.0, abs(float(b)))


def _eval_terms(terms, u: Number) -> Number:
    if not terms:
        return INF
    total = 0
    for a, g in terms:
        total += mul0(a, pow_ext(u, -g))
    return recip(total)


def _ratio_terms(terms, u: Number) -> Number:
    """u / p(u) = sum a * u^(1-g)."""
    if not terms:
        return 0
    total = 0
    for a, g in terms:
        total += mul0(a, pow_ext(u, 1 - g))
    return total


def _sup_ratio(terms, u_lo: Number, u_hi: Number) -> Number:
    """sup of sum a*u^(1-g) on (u_lo, u_hi]; exact for single terms."""
    if not terms:
        return 0
    cands = [_ratio_terms(terms, u_hi)]
    if u_lo > 0:
        cands.append(_ratio_terms(terms, u_lo))
    else:
        # limit as u -> 0+: terms with g > 1 diverge, g == 1 persist
        if any(g > 1 for _, g in terms):
            return INF
        cands.append(sum(a for a, g in terms if g == 1))
    if len(terms) > 1:
        lo = float(u_lo) if u_lo > 0 else float(u_hi) / 2 ** 20
        hi = float(u_hi)
        for i in range(1, _GRID):
            u = lo * (hi / lo) ** (i / _GRID)
            cands.append(_ratio_terms(terms, u))
    return max(cands)


@dataclass(frozen=True)
class TCurve:
    """One outcome's randomized test function: cadlag, nondecreasing, [0, 1].

    Segments are (alpha_lo, coef, power): value coef * alpha^power on
    [alpha_lo, next alpha_lo), with value 0 before the first breakpoint and
    the final segment extending to infinity.
    """

    segments: tuple

    def __init__(self, segments: Iterable):
        segs = sorted(((alo, c, m) for alo, c, m in segments), key=lambda s: s[0])
        prev_end = 0
        for i, (alo, c, m) in enumerate(segs):
            if alo < 0:
                raise ValueError("alpha breakpoints must be nonnegative")
            if c < 0 or m < 0:
                raise ValueError("segment value must be nondecreasing in alpha")
            a_hi = segs[i + 1][0] if i + 1 < len(segs) else INF
            start = mul0(c, pow_ext(alo, m)) if alo > 0 else (c if m == 0 else 0)
            if start < prev_end and not _close(start, prev_end):
                raise ValueError("test function must be nondecreasing in alpha")
            end = mul0(c, pow_ext(a_hi, m)) if not is_inf(a_hi) else (
                c if m == 0 else INF)
            if end > 1 and not _close(end, 1):
                raise ValueError("test function values must stay within [0, 1]")
            prev_end = end
        object.__setattr__(self, "segments", tuple(segs))

    @classmethod
    def indicator(cls, p: Number) -> "TCurve":
        """The non-randomized test 1{p <= alpha}."""
        if is_inf(p):
            return cls([])
        return cls([(p, 1, 0)])

    def value(self, alpha: Number) -> Number:
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        current = 0
        for alo, c, m in self.segments:
            if alpha < alo:
                break
            current = mul0(c, pow_ext(alpha, m))
        return min(current, 1)

    def breakpoints(self) -> list:
        return [alo for alo, _, _ in self.segments if alo > 0]

    def statistic(self) -> Number:
        """sup over alpha of tf(alpha)/alpha; exact (each piece is monotone)."""
        best = 0
        for i, (alo, c, m) in enumerate(self.segments):
            a_hi = self.segments[i + 1][0] if i + 1 < len(self.segments) else INF
            if alo > 0:
                best = max(best, mul0(c, pow_ext(alo, m)) / alo)
            elif m == 1:
                best = max(best, c)
            elif m < 1 and c > 0:
                return INF
            if not is_inf(a_hi) and a_hi > 0:
                best = max(best, mul0(c, pow_ext(a_hi, m)) / a_hi)
            elif m == 1:
                best = max(best, c)
        return best


# ---------------------------------------------------------------------------
# outcome-indexed wrappers


@dataclass(frozen=True)
class PFunction:
    """Per-outcome p-function (quantile representation of a randomized test)."""

    curves: Mapping

    def __init__(self, curves: Mapping):
        object.__setattr__(self, "curves", dict(curves))

    def __getitem__(self, outcome) -> PCurve:
        return self.curves[outcome]

    @property
    def outcomes(self) -> tuple:
        return tuple(self.curves)

    def is_randomized(self) -> bool:
        return not all(c.is_constant() for c in self.curves.values())

    def to_rows(self) -> list:
        """Plot-ready (outcome, u, p) rows sampled at breakpoints."""
        rows = []
        for x, curve in self.curves.items():
            for u in curve.breakpoints():
                rows.append((x, float(u), float(curve.value(u))))
        return rows


@dataclass(frozen=True)
class RandomizedTestFunction:
    curves: Mapping

    def __init__(self, curves: Mapping):
        object.__setattr__(self, "curves", dict(curves))

    def __getitem__(self, outcome) -> TCurve:
        return self.curves[outcome]

    @property
    def outcomes(self) -> tuple:
        return tuple(self.curves)

    @classmethod
    def from_test_function(cls, tf: TestFunction) -> "RandomizedTestFunction":
        return cls({x: TCurve.indicator(tf.p[x]) for x in tf.p.outcomes})

    def to_rows(self) -> list:
        rows = []
        for x, curve in self.curves.items():
            for a in curve.breakpoints():
                rows.append((x, float(a), float(curve.value(a))))
        return rows


# ---------------------------------------------------------------------------
# Galois transforms (single power term per piece)


def _single_term(terms):
    if len(terms) != 1:
        raise ValueError("Galois transforms need one power term per piece")
    return terms[0]


def _pcurve_to_tcurve(pc: PCurve) -> TCurve:
    out = []
    u_lo = 0
    for u_hi, terms in pc.segments:
        if not terms:
            break  # p = inf: the test never climbs past u_lo
        a, g = _single_term(terms)
        c = recip(a)  # p(u) = c * u^g
        if g == 0:
            # flat piece: jump of the test function up to u_hi at alpha = c
            out.append((c, u_hi, 0))
        else:
            v_lo = mul0(c, pow_ext(u_lo, g)) if u_lo > 0 else 0
            v_hi = mul0(c, pow_ext(u_hi, g))
            # inverted piece on [v_lo, v_hi), then flat at u_hi; a later
            # piece starting at v_hi overrides the flat via deduplication
            out.append((v_lo, _inv_pow(recip(c), g), recip(g)
                        if isinstance(g, (int, Fraction)) else 1.0 / g))
            out.append((v_hi, u_hi, 0))
        u_lo = u_hi
    # deduplicate segments that share a breakpoint (the later one wins)
    dedup = {}
    for alo, c, m in out:
        dedup[alo] = (alo, c, m)
    return TCurve(sorted(dedup.values()))


def _tcurve_to_pcurve(tc: TCurve) -> PCurve:
    out = []
    u_cur = 0
    for i, (alo, c, m) in enumerate(tc.segments):
        a_hi = tc.segments[i + 1][0] if i + 1 < len(tc.segments) else INF
        if m == 0:
            level = min(c, 1)
            if level > u_cur:
                out.append((level, ((recip(alo), 0),)))
                u_cur = level
        else:
            v_lo = mul0(c, pow_ext(alo, m)) if alo > 0 else 0
            if v_lo > u_cur:
                # jump of the test at alo covers p(u) = alo on (u_cur, v_lo]
                out.append((v_lo, ((recip(alo), 0),)))
                u_cur = v_lo
            v_hi = min(mul0(c, pow_ext(a_hi, m)) if not is_inf(a_hi) else INF, 1)
            if v_hi > u_cur:
                # invert u = c * alpha^m  =>  alpha = (u/c)^(1/m)
                coef = _inv_pow(recip(c), m)
                out.append((v_hi, ((recip(coef), recip(m)
                                    if isinstance(m, (int, Fraction))
                                    else 1.0 / m),)))
                u_cur = v_hi
    if u_cur < 1:
        out.append((1, ()))  # never reached: p(u) = inf above the max level
    return PCurve(out)


def pfunction_of(tf) -> PFunction:
    """Quantile transform of a (randomized) test function."""
    if isinstance(tf, TestFunction):
        tf = RandomizedTestFunction.from_test_function(tf)
    return PFunction({x: _tcurve_to_pcurve(c) for x, c in tf.curves.items()})


def test_function_of(pf: PFunction) -> RandomizedTestFunction:
    """Inverse transform: tf(alpha) = sup{u : p(u) <= alpha}."""
    return RandomizedTestFunction(
        {x: _pcurve_to_tcurve(c) for x, c in pf.curves.items()})


test_function_of.__test__ = False  # not a pytest item despite the name


# ---------------------------------------------------------------------------
# validity and construction


def check_pfunction_posthoc(pf: PFunction, H: Hypothesis,
                            tol: float = TOL) -> ValidityReport:
    """E[sup_u u/p(u)] at most 1, supremum over hypothesis members."""
    stats = {x: pf[x].statistic() for x in pf.outcomes}
    worst, worst_i = None, 0
    for i, m in enumerate(H.members):
        v = m.expectation(lambda x: stats[x])
        if worst is None or v > worst:
            worst, worst_i = v, i
    return ValidityReport(
        valid=(not is_inf(worst)) and worst <= 1 + tol,
        statistic=worst,
        witness=worst_i,
        kind="posthoc-pfunction",
        detail="sup over members of E[sup_u u/p(u)]",
    )


def randomized_statistic(rtf: RandomizedTestFunction, H: Hypothesis) -> Number:
    """sup over members of E[sup_alpha tf(alpha)/alpha]."""
    stats = {x: rtf[x].statistic() for x in rtf.outcomes}
    return max(m.expectation(lambda x: stats[x]) for m in H.members)


def uniform_randomize(p_ev: EvidenceVariable) -> PFunction:
    """p(u) = u * p: the canonical strict improvement of a post-hoc p-value."""
    p = p_ev.as_scale(P_SCALE)
    return PFunction({x: PCurve.power(p[x], 1) for x in p.outcomes})


def soft_test_function(e_ev: EvidenceVariable) -> RandomizedTestFunction:
    """alpha -> (alpha * e) ^ 1: post-hoc valid exactly when e is an e-value."""
    e = e_ev.as_scale(E_SCALE)
    curves = {}
    for x in e.outcomes:
        ex = e[x]
        if ex == 0:
            curves[x] = TCurve([])
        elif is_inf(ex):
            curves[x] = TCurve([(0, 1, 0)])
        else:
            curves[x] = TCurve([(0, ex, 1), (recip(ex), 1, 0)])
    return RandomizedTestFunction(curves)


def p_value_head(pf: PFunction) -> EvidenceVariable:
    """The u = 1 slice, a post-hoc p-value whenever the p-function is valid."""
    return EvidenceVariable({x: pf[x].head() for x in pf.outcomes}, P_SCALE)


# ---------------------------------------------------------------------------
# curve combination (used by merging)


def _active_terms(curve: PCurve, u_lo, u_hi):
    prev = 0
    for hi, terms in curve.segments:
        if prev <= u_lo and u_hi <= hi:
            return terms
        prev = hi
    raise AssertionError("refinement must align with segment breakpoints")


def harmonic_combine(curves: Sequence[PCurve], weights: Sequence[Number]) -> PCurve:
    """Pointwise weighted harmonic mean: 1 / sum_i w_i / p_i(u)."""
    cuts = sorted({u for c in curves for u in c.breakpoints()})
    out = []
    u_lo = 0
    for u_hi in cuts:
        terms = []
        for c, w in zip(curves, weights):
            if w == 0:
                continue
            for a, g in _active_terms(c, u_lo, u_hi):
                terms.append((w * a, g))
        out.append((u_hi, tuple(terms)))
        u_lo = u_hi
    return PCurve(out)


def product_combine(curves: Sequence[PCurve]) -> PCurve:
    """Pointwise product; closed under the reciprocal power-sum form."""
    cuts = sorted({u for c in curves for u in c.breakpoints()})
    out = []
    u_lo = 0
    for u_hi in cuts:
        terms = [(1, 0)]  # multiplicative identity: p = 1
        dead = False
        for c in curves:
            seg = _active_terms(c, u_lo, u_hi)
            if not seg:
                dead = True
                break
            terms = [(a1 * a2, g1 + g2) for a1, g1 in terms for a2, g2 in seg]
        out.append((u_hi, () if dead else tuple(terms)))
        u_lo = u_hi
    return PCurve(out)


def product_shape_condition(curves: Sequence[PCurve], tol: float = TOL):
    """Check prod_i p_i(1)/p_i(u) <= 1/u on (0, 1].

    Returns (ok, witness_u, worst_value) where the condition is recast as
    F(u) = u * prod_i p_i(1)/p_i(u) <= 1 and F is evaluated at segment
    endpoints, the u -> 0+ limit, and a numeric refinement grid.
    """
    heads = [c.head() for c in curves]
    cuts = sorted({u for c in curves for u in c.breakpoints()})
    worst, witness = 0, None

    def f(u):
        val = u
        for c, h in zip(curves, heads):
            pu = c.value(u)
            if is_inf(pu):
                ratio = 1 if is_inf(h) else 0
            elif is_inf(h):
                return INF
            else:
                ratio = h / pu
            val = mul0(val, ratio)
            if is_inf(val):
                return INF
        return val

    u_lo = 0
    for u_hi in cuts:
        cands = [u_hi]
        if u_lo > 0:
            cands.append(u_lo)
        else:
            cands.append(float(u_hi) / 2 ** 30)  # probe the u -> 0+ limit
        lo = float(u_lo) if u_lo > 0 else float(u_hi) / 2 ** 20
        for i in range(1, _GRID):
            cands.append(lo * (float(u_hi) / lo) ** (i / _GRID))
        for u in cands:
            v = f(u)
            if v > worst:
                worst, witness = v, u
        u_lo = u_hi
    return worst <= 1 + tol, witness, worst


def product_merge_failure_witness(pf: PFunction, max_n: int = 64,
                                  tol: float = TOL) -> int:
    """Smallest n for which the n-fold product of i.i.d. copies of a properly
    randomized p-function has a post-hoc statistic above 1.

    The copies are deterministic replicas of the per-outcome curves, so the
    statistic is sup_u u / p(u)^n evaluated per outcome (worst case over
    outcomes).
    """
    if not pf.is_randomized():
        raise ValueError("a non-randomized p-function admits no witness")
    for n in range(2, max_n + 1):
        worst = 0
        for x in pf.outcomes:
            prod = product_combine([pf[x]] * n)
            worst = max(worst, prod.statistic())
            if is_inf(worst):
                break
        if worst > 1 + tol:
            return n
    raise RuntimeError(f"no divergence found up to n = {max_n}")
