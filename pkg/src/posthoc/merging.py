"""Combination rules for post-hoc p-values, e-values, and p-functions.

Independent inputs merge by pointwise product (declared structurally via a
product-space construction); arbitrarily dependent inputs merge by weighted
harmonic mean on the p-scale, by product on the geometric (h = 0) scale, or
by weighted power mean on the e^h scale.  The p-function product requires a
joint shape condition; its failure for properly randomized inputs is
witnessed by the smallest diverging copy count.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Sequence

from ._numbers import INF, TOL, Number, is_inf, mul0, pow_ext, recip
from .core import DiscreteSpace, E_SCALE, EvidenceVariable, P_SCALE
from .pfunctions import (
    PFunction,
    harmonic_combine,
    product_combine,
    product_merge_failure_witness,
    product_shape_condition,
)

__all__ = [
    "merge_product_independent",
    "merge_harmonic",
    "merge_geometric",
    "merge_h_mean",
    "merge_pfunctions_harmonic",
    "merge_pfunctions_product",
    "product_merge_failure_witness",
    "ShapeConditionError",
]


def _check_weights(weights: Sequence[Number], n: int) -> list:
    weights = list(weights)
    if len(weights) != n:
        raise ValueError("one weight per input required")
    if any(w < 0 for w in weights):
        raise ValueError("weights must be nonnegative")
    if sum(weights) != 1 and abs(float(sum(weights)) - 1.0) > TOL:
        raise ValueError("weights must sum to 1")
    return weights


def _common_outcomes(evs: Sequence[EvidenceVariable]) -> tuple:
    if not evs:
        raise ValueError("at least one input required")
    outcomes = evs[0].outcomes
    for ev in evs[1:]:
        if set(ev.outcomes) != set(outcomes):
            raise ValueError("inputs must share a common outcome set")
    return outcomes


def merge_product_independent(components: Sequence):
    """Product of independent evidence variables.

    Independence is declared structurally: each input is an
    (EvidenceVariable, DiscreteSpace) pair and the merge is performed on the
    product space.  Returns (merged EvidenceVariable on E_SCALE, product
    DiscreteSpace with tuple outcomes).
    """
    components = list(components)
    if not components:
        raise ValueError("at least one component required")
    for ev, space in components:
        if set(ev.outcomes) != set(space.outcomes):
            raise ValueError("evidence variable does not match its space")
    es = [ev.as_scale(E_SCALE) for ev, _ in components]
    spaces = [space for _, space in components]
    outcomes, probs, values = [], [], {}
    for combo in itertools.product(*(s.outcomes for s in spaces)):
        prob = 1
        for s, x in zip(spaces, combo):
            prob = mul0(prob, s.prob(x))
        e = 1
        for ev, x in zip(es, combo):
            e = mul0(e, ev[x])
        outcomes.append(combo)
        probs.append(prob)
        values[combo] = e
    return (EvidenceVariable(values, E_SCALE),
            DiscreteSpace(tuple(outcomes), tuple(probs)))


def merge_harmonic(evs: Sequence[EvidenceVariable],
                   weights: Sequence[Number]) -> EvidenceVariable:
    """Weighted harmonic mean on the p-scale: p = 1 / sum_i w_i / p_i.

    Valid under arbitrary dependence whenever each input is post-hoc valid.
    """
    outcomes = _common_outcomes(evs)
    weights = _check_weights(weights, len(evs))
    ps = [ev.as_scale(P_SCALE) for ev in evs]
    merged = {}
    for x in outcomes:
        total = 0
        for p, w in zip(ps, weights):
            total += mul0(w, recip(p[x]))
        merged[x] = recip(total)
    return EvidenceVariable(merged, P_SCALE)


def merge_geometric(evs: Sequence[EvidenceVariable]) -> EvidenceVariable:
    """Pointwise product on the e-scale; preserves geometric (h = 0)
    validity under arbitrary dependence."""
    outcomes = _common_outcomes(evs)
    es = [ev.as_scale(E_SCALE) for ev in evs]
    merged = {}
    for x in outcomes:
        prod = 1
        for e in es:
            prod = mul0(prod, e[x])
        merged[x] = prod
    return EvidenceVariable(merged, E_SCALE)


def merge_h_mean(evs: Sequence[EvidenceVariable], weights: Sequence[Number],
                 h: Number) -> EvidenceVariable:
    """Weighted power mean on the e^h scale: (sum_i w_i e_i^h)^(1/h).

    h = 0 is the weighted geometric mean prod e_i^(w_i).  Preserves
    h-validity under arbitrary dependence.
    """
    outcomes = _common_outcomes(evs)
    weights = _check_weights(weights, len(evs))
    es = [ev.as_scale(E_SCALE) for ev in evs]
    merged = {}
    for x in outcomes:
        if h == 0:
            log_sum, hit_zero, hit_inf = 0.0, False, False
            for e, w in zip(es, weights):
                if w == 0:
                    continue
                if e[x] == 0:
                    hit_zero = True
                elif is_inf(e[x]):
                    hit_inf = True
                else:
                    log_sum += float(w) * math.log(float(e[x]))
            if hit_zero:
                merged[x] = 0
            elif hit_inf:
                merged[x] = INF
            else:
                merged[x] = math.exp(log_sum)
        else:
            moment = 0
            for e, w in zip(es, weights):
                moment += mul0(w, pow_ext(e[x], h))
            if is_inf(moment):
                merged[x] = INF if h > 0 else 0
            elif moment == 0:
                merged[x] = 0 if h > 0 else INF
            else:
                merged[x] = pow_ext(
                    moment,
                    recip(h) if isinstance(h, (int, Fraction)) else 1.0 / h)
    return EvidenceVariable(merged, E_SCALE)


def merge_pfunctions_harmonic(pfs: Sequence[PFunction],
                              weights: Sequence[Number]) -> PFunction:
    """Pointwise-in-u weighted harmonic mean of p-functions."""
    weights = _check_weights(weights, len(pfs))
    if not pfs:
        raise ValueError("at least one input required")
    outcomes = pfs[0].outcomes
    for pf in pfs[1:]:
        if set(pf.outcomes) != set(outcomes):
            raise ValueError("inputs must share a common outcome set")
    return PFunction({
        x: harmonic_combine([pf[x] for pf in pfs], weights)
        for x in outcomes
    })


class ShapeConditionError(ValueError):
    """Raised when the product-merge shape condition fails; carries the
    witness u and the worst value of u * prod_i p_i(1)/p_i(u)."""

    def __init__(self, witness_u, worst):
        self.witness_u = witness_u
        self.worst = worst
        super().__init__(
            f"shape condition violated at u = {witness_u}: "
            f"u * prod p_i(1)/p_i(u) = {worst} > 1")


def merge_pfunctions_product(pfs: Sequence[PFunction]) -> PFunction:
    """Pointwise product of independent p-functions.

    Requires the joint shape condition prod_i p_i(1)/p_i(u) <= 1/u for every
    u in (0, 1] and every outcome; violated inputs are rejected with a
    witness u.
    """
    if not pfs:
        raise ValueError("at least one input required")
    outcomes = pfs[0].outcomes
    for pf in pfs[1:]:
        if set(pf.outcomes) != set(outcomes):
            raise ValueError("inputs must share a common outcome set")
    for x in outcomes:
        ok, witness, worst = product_shape_condition([pf[x] for pf in pfs])
        if not ok:
            raise ShapeConditionError(witness, worst)
    return PFunction({
        x: product_combine([pf[x] for pf in pfs]) for x in outcomes
    })
