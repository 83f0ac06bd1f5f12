"""Expected-utility-optimal evidence against a simple null.

For a simple null P versus simple alternative Q and a nondecreasing concave
utility U, the optimal e-value satisfies lambda * f_P/f_Q in dU(e*) Q-a.s.
together with the normalization E_P[e*] = 1 (or lambda = 0).  The log
utility gives the likelihood ratio; power (CRRA) utilities give tilted
likelihood ratios found by bisection on lambda; the truncated-linear
utility x -> x AND 1/alpha* gives the three-branch post-hoc analogue of the
Neyman-Pearson test.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from scipy.stats import norm

from ._numbers import INF, TOL, Number, is_inf, mul0, pow_ext, recip
from .core import DiscreteSpace, E_SCALE, EvidenceVariable, P_SCALE, dual

LOG = "LOG"
POWER = "POWER"
NEYMAN_PEARSON = "NEYMAN_PEARSON"

_BISECT_TOL = 1e-10
_BRACKET = (1e-8, 1e8)


@dataclass(frozen=True)
class UtilitySpec:
    """Nondecreasing concave utility on [0, inf]."""

    kind: str
    param: Number = None

    def __post_init__(self):
        if self.kind == LOG:
            if self.param is not None:
                raise ValueError("LOG takes no parameter")
        elif self.kind == POWER:
            if self.param is None or self.param <= 0 or self.param == 1:
                raise ValueError("POWER needs gamma > 0, gamma != 1")
        elif self.kind == NEYMAN_PEARSON:
            if self.param is None or not (0 < self.param < 1):
                raise ValueError("NEYMAN_PEARSON needs a level in (0, 1)")
        else:
            raise ValueError(f"unknown utility kind {self.kind!r}")

    @classmethod
    def log(cls) -> "UtilitySpec":
        return cls(LOG)

    @classmethod
    def power(cls, gamma: Number) -> "UtilitySpec":
        return cls(POWER, gamma)

    @classmethod
    def neyman_pearson(cls, alpha_star: Number) -> "UtilitySpec":
        return cls(NEYMAN_PEARSON, alpha_star)

    def value(self, x: Number) -> float:
        if self.kind == LOG:
            if x == 0:
                return -math.inf
            if is_inf(x):
                return math.inf
            return math.log(float(x))
        if self.kind == POWER:
            g = float(self.param)
            if x == 0:
                return -math.inf if g > 1 else -1.0 / (1.0 - g)
            if is_inf(x):
                return 1.0 / (g - 1.0) if g > 1 else math.inf
            return (float(x) ** (1.0 - g) - 1.0) / (1.0 - g)
        cap = recip(self.param)
        return min(x, cap)

    def inv_derivative(self, y: Number) -> Number:
        """(U')^{-1}(y), the generalized inverse of the marginal utility."""
        if self.kind == LOG:
            return recip(y)
        if self.kind == POWER:
            g = self.param
            return pow_ext(y, -1.0 / float(g))
        raise ValueError("truncated-linear utility has a kink; use np_optimal")


@dataclass(frozen=True)
class SimplePair:
    """Simple null P versus simple alternative Q on a common outcome set."""

    P: DiscreteSpace
    Q: DiscreteSpace

    def __post_init__(self):
        if set(self.P.outcomes) != set(self.Q.outcomes):
            raise ValueError("P and Q must share an outcome set")

    def density_ratio(self, outcome) -> Number:
        """f_P/f_Q; 0/0 is reported as 1 (the outcome is null under both)."""
        fp, fq = self.P.prob(outcome), self.Q.prob(outcome)
        if fp == 0 and fq == 0:
            return 1
        return mul0(fp, recip(fq)) if fq > 0 else INF

    def check_mutual_absolute_continuity(self):
        for x in self.P.outcomes:
            fp, fq = self.P.prob(x), self.Q.prob(x)
            if (fp == 0) != (fq == 0):
                raise ValueError(
                    f"absolute continuity fails at outcome {x!r}: "
                    f"f_P = {fp}, f_Q = {fq}")


def log_optimal(pair: SimplePair) -> EvidenceVariable:
    """Log-utility optimum: p*(x) = f_P(x)/f_Q(x)."""
    return EvidenceVariable(
        {x: pair.density_ratio(x) for x in pair.P.outcomes}, P_SCALE)


def expected_utility(ev: EvidenceVariable, Q: DiscreteSpace,
                     U: UtilitySpec) -> Number:
    e = ev.as_scale(E_SCALE)
    total = 0
    for x, q in zip(Q.outcomes, Q.probs):
        if q == 0:
            continue
        u = U.value(e[x])
        if u == -math.inf:
            return -math.inf
        total = total + q * u if not is_inf(u) else INF
        if is_inf(total):
            return INF
    return total


def utility_optimal(pair: SimplePair, U: UtilitySpec,
                    max_expansions: int = 200):
    """Maximize E_Q[U(e)] subject to E_P[e] <= 1.

    Returns (e*, lambda).  LOG has the closed form e* = f_Q/f_P with
    lambda = 1; the truncated-linear utility dispatches to the three-branch
    rule of :func:`np_optimal` with lambda the likelihood-ratio threshold;
    POWER solves E_P[e*_lambda] = 1 by bisection (decreasing in lambda) and
    normalizes the result exactly.
    """
    if U.kind == LOG:
        return dual(log_optimal(pair)), 1
    if U.kind == NEYMAN_PEARSON:
        p_star, c = np_optimal(pair, U.param, return_threshold=True)
        return dual(p_star), c

    ratios = {x: pair.density_ratio(x) for x in pair.P.outcomes}

    def mean_p(lam: float) -> float:
        total = 0.0
        for x, fp in zip(pair.P.outcomes, pair.P.probs):
            if fp == 0:
                continue
            total += float(fp) * float(U.inv_derivative(lam * float(ratios[x])))
        return total

    lo, hi = _BRACKET
    for _ in range(max_expansions):
        if mean_p(lo) >= 1.0:
            break
        lo /= 8.0
    for _ in range(max_expansions):
        if mean_p(hi) <= 1.0:
            break
        hi *= 8.0
    if mean_p(lo) < 1.0 or mean_p(hi) > 1.0:
        raise RuntimeError(
            f"no normalization constant found in [{lo}, {hi}]: "
            f"E_P at bracket = ({mean_p(lo)}, {mean_p(hi)})")
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        val = mean_p(mid)
        # bracket invariant from lambda-monotonicity: E_P decreasing in lambda
        if not (mean_p(lo) + 1e-9 >= val >= mean_p(hi) - 1e-9):
            raise AssertionError("E_P[e*_lambda] must be nonincreasing in lambda")
        if abs(val - 1.0) <= _BISECT_TOL:
            lo = hi = mid
            break
        if val > 1.0:
            lo = mid
        else:
            hi = mid
    lam = math.sqrt(lo * hi)
    values = {x: U.inv_derivative(lam * float(ratios[x]))
              for x in pair.P.outcomes}
    norm_const = sum(mul0(fp, values[x])
                     for x, fp in zip(pair.P.outcomes, pair.P.probs))
    values = {x: v / norm_const for x, v in values.items()}
    return EvidenceVariable(values, E_SCALE), lam


def np_optimal(pair: SimplePair, alpha_star: Number,
               return_threshold: bool = False):
    """Optimal post-hoc p-value for the utility x -> x AND 1/alpha*.

    Three branches on r = f_P/f_Q: p* = alpha* where r < c, a boundary value
    k in [alpha*, inf] where r = c, and inf where r > c; c is the largest
    value with P(r < c) <= alpha* and k makes E_P[1/p*] = 1 (k = inf when
    the sub-boundary mass already equals alpha*).
    """
    if not (0 < alpha_star < 1):
        raise ValueError("alpha* must lie in (0, 1)")
    ratios = {x: pair.density_ratio(x) for x in pair.P.outcomes}
    levels = sorted(set(ratios.values()), key=float)

    def mass_below(c):
        return sum(fp for x, fp in zip(pair.P.outcomes, pair.P.probs)
                   if float(ratios[x]) < float(c))

    c = levels[0]
    for v in levels:
        if mass_below(v) <= alpha_star:
            c = v
    below = mass_below(c)
    at = sum(fp for x, fp in zip(pair.P.outcomes, pair.P.probs)
             if ratios[x] == c)
    if below == alpha_star or at == 0:
        k = INF
    else:
        k = mul0(alpha_star, at) / (alpha_star - below)
    values = {}
    for x in pair.P.outcomes:
        r = ratios[x]
        if float(r) < float(c):
            values[x] = alpha_star
        elif r == c:
            values[x] = k
        else:
            values[x] = INF
    p_star = EvidenceVariable(values, P_SCALE)
    if return_threshold:
        return p_star, c
    return p_star


def np_rejection_region(pair: SimplePair, alpha_star: Number,
                        p_star: EvidenceVariable | None = None) -> frozenset:
    """Outcomes with p*(x) <= alpha*: the induced non-randomized test."""
    if p_star is None:
        p_star = np_optimal(pair, alpha_star)
    p = p_star.as_scale(P_SCALE)
    return frozenset(x for x in p.outcomes if p[x] <= alpha_star)


def best_region_exhaustive(pair: SimplePair, alpha_star: Number) -> frozenset:
    """Exhaustive-search best rejection region with P-mass at most alpha*.

    Ties in Q-power are broken toward the region preferred by likelihood
    ratio: highest f_Q/f_P first, then fewer outcomes, then lexicographic.
    """
    outcomes = list(pair.P.outcomes)
    if len(outcomes) > 12:
        raise ValueError("exhaustive search limited to 12 outcomes")
    order = {x: i for i, x in enumerate(sorted(
        outcomes, key=lambda x: (-float(recip(pair.density_ratio(x))),
                                 str(x))))}
    best, best_key = frozenset(), None
    for mask in range(1 << len(outcomes)):
        region = [x for i, x in enumerate(outcomes) if mask >> i & 1]
        p_mass = sum(pair.P.prob(x) for x in region)
        if p_mass > alpha_star:
            continue
        q_mass = sum(pair.Q.prob(x) for x in region)
        key = (-float(q_mass), len(region), sorted(order[x] for x in region))
        if best_key is None or key < best_key:
            best, best_key = frozenset(region), key
    return best


def brute_force_optimal(pair: SimplePair, U: UtilitySpec,
                        resolution: int = 40) -> EvidenceVariable:
    """Grid oracle: best e on the simplex slice E_P[e] = 1.

    Enumerates e(x) = t_x / (resolution * f_P(x)) over integer allocations
    t summing to resolution, so the constraint holds exactly; P-null
    outcomes get e = inf (they are free).  Intended for <= 6 outcomes.
    """
    supp = [x for x, fp in zip(pair.P.outcomes, pair.P.probs) if fp > 0]
    if len(pair.P.outcomes) > 6:
        raise ValueError("oracle limited to 6 outcomes")
    nulls = {x: INF for x in pair.P.outcomes if x not in supp}
    best_ev, best_val = None, None

    def rec(i, remaining, alloc):
        nonlocal best_ev, best_val
        if i == len(supp) - 1:
            alloc = alloc + [remaining]
            values = {
                x: Fraction(t, resolution) * recip(pair.P.prob(x))
                for x, t in zip(supp, alloc)
            }
            values.update(nulls)
            ev = EvidenceVariable(values, E_SCALE)
            val = expected_utility(ev, pair.Q, U)
            if best_val is None or val > best_val:
                best_ev, best_val = ev, val
            return
        for t in range(remaining + 1):
            rec(i + 1, remaining - t, alloc + [t])

    rec(0, resolution, [])
    return best_ev


def double_posthoc_check(pair: SimplePair, tol: float = TOL) -> bool:
    """The likelihood ratio is post-hoc valid in both directions:
    E_P[f_Q/f_P] <= 1 and E_Q[f_P/f_Q] <= 1 (both exactly 1 for the LR)."""
    pair.check_mutual_absolute_continuity()
    forward = sum(
        fq for x, fq in zip(pair.Q.outcomes, pair.Q.probs)
        if pair.P.prob(x) > 0
    )
    backward = sum(
        fp for x, fp in zip(pair.P.outcomes, pair.P.probs)
        if pair.Q.prob(x) > 0
    )
    return forward <= 1 + tol and backward <= 1 + tol


# ---------------------------------------------------------------------------
# fixtures


def bernoulli_pair(p0=Fraction(1, 2), p1=Fraction(3, 4)) -> SimplePair:
    """Bern(p0) null versus Bern(p1) alternative on outcomes {0, 1}."""
    return SimplePair(
        P=DiscreteSpace((0, 1), (1 - p0, p0)),
        Q=DiscreteSpace((0, 1), (1 - p1, p1)),
    )


def gaussian_shift_pair(n_cells: int = 2001, clip: float = 8.0) -> SimplePair:
    """N(0,1) versus N(1,1) discretized into P-equiprobable quantile cells.

    Cells are represented by the P-quantile midpoints clipped to [-clip,
    clip]; the alternative mass is proportional to the shift likelihood
    ratio exp(x - 1/2) and renormalized.
    """
    centers = [
        min(max(float(norm.ppf((i + 0.5) / n_cells)), -clip), clip)
        for i in range(n_cells)
    ]
    p_mass = Fraction(1, n_cells)
    lr = [math.exp(x - 0.5) for x in centers]
    total = sum(lr)
    q_probs = tuple(v / total for v in lr)
    return SimplePair(
        P=DiscreteSpace(tuple(range(n_cells)), (p_mass,) * n_cells),
        Q=DiscreteSpace(tuple(range(n_cells)), q_probs),
    )


def gaussian_log_optimal_report(alpha: float = 0.05,
                                n_cells: int = 2001) -> dict:
    """Classical-versus-post-hoc comparison on the unit-shift Gaussian pair.

    Classical: reject for the largest likelihood ratios subject to size
    alpha; the reported critical value is the smallest LR in the rejection
    region.  Post-hoc: reject at level alpha iff LR >= 1/alpha.
    """
    pair = gaussian_shift_pair(n_cells=n_cells)
    p_star = log_optimal(pair)
    lr = {x: recip(p_star[x]) for x in p_star.outcomes}
    by_lr = sorted(p_star.outcomes, key=lambda x: -float(lr[x]))
    k = int(alpha * n_cells)  # equiprobable cells: top-k region has size k/n
    region = by_lr[:k]
    # critical value at the cell boundary: geometric midpoint between the
    # smallest rejected and the largest accepted likelihood ratio
    classical_critical = math.sqrt(
        float(lr[by_lr[k - 1]]) * float(lr[by_lr[k]]))
    classical_power = float(sum(pair.Q.prob(x) for x in region))
    threshold = recip(alpha)
    posthoc_power = float(sum(
        pair.Q.prob(x) for x in p_star.outcomes
        if float(lr[x]) >= float(threshold)))
    return {
        "alpha": alpha,
        "classical_critical": classical_critical,
        "posthoc_threshold": float(threshold),
        "classical_power": classical_power,
        "posthoc_power": posthoc_power,
        "classical_size": k / n_cells,
    }
