"""Discrete-time nonnegative processes, stopping rules, and the Markov and
Ville equalities, plus familywise / averaged multiple-testing merges.

Processes are multiplicative with a finite-support i.i.d. factor, so the
martingale and supermartingale moment conditions are checkable exactly at
construction; e-process claims are not checkable from the one-step law and
are verified by simulation against a finite battery of bounded stopping
rules instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from ._numbers import INF, TOL, Number, is_inf, mul0, recip
from .core import (
    DiscreteSpace,
    E_SCALE,
    EvidenceVariable,
    Hypothesis,
    P_SCALE,
    TestFunction,
)
from .pfunctions import RandomizedTestFunction, TCurve

MARTINGALE = "MARTINGALE"
SUPERMARTINGALE = "SUPERMARTINGALE"
EPROCESS = "EPROCESS"


@dataclass(frozen=True)
class ProcessModel:
    """M_t = M_0 * Z_1 * ... * Z_t with i.i.d. finite-support Z >= 0.

    The declared class is verified against the one-step mean at
    construction for martingales and supermartingales.  EPROCESS makes no
    one-step claim (the contract is about stopped expectations), so it is
    deliberately unchecked here and certified or refuted by
    :func:`anytime_validity_check`.
    """

    initial: Number
    multiplier: DiscreteSpace  # outcomes are the numeric factor values
    kind: str
    horizon: int

    def __post_init__(self):
        if self.initial < 0:
            raise ValueError("initial value must be nonnegative")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if any(v < 0 for v in self.multiplier.outcomes):
            raise ValueError("multiplicative factors must be nonnegative")
        mean = self.multiplier.expectation(lambda v: v)
        if self.kind == MARTINGALE:
            if not (abs(float(mean) - 1.0) <= TOL or mean == 1):
                raise ValueError(f"martingale needs E[Z] = 1, got {mean}")
        elif self.kind == SUPERMARTINGALE:
            if mean > 1 + TOL:
                raise ValueError(f"supermartingale needs E[Z] <= 1, got {mean}")
        elif self.kind != EPROCESS:
            raise ValueError(f"unknown process class {self.kind!r}")

    def step_mean(self) -> Number:
        return self.multiplier.expectation(lambda v: v)


@dataclass(frozen=True)
class StoppingRule:
    """Adapted rule: stop as soon as decide(prefix) is true, capped at the
    horizon.  ``vectorized`` optionally maps a path matrix (n, T+1) to stop
    indices for fast simulation; it must agree with ``decide``."""

    name: str
    decide: Callable[[Sequence[float]], bool]
    vectorized: Callable | None = None

    @classmethod
    def fixed_time(cls, t: int) -> "StoppingRule":
        def vec(paths):
            n, width = paths.shape
            return np.full(n, min(t, width - 1), dtype=np.int64)

        return cls(f"fixed@{t}", lambda prefix: len(prefix) - 1 >= t, vec)

    @classmethod
    def hitting_time(cls, threshold: float) -> "StoppingRule":
        def vec(paths):
            hits = paths >= threshold
            idx = np.argmax(hits, axis=1)
            idx[~hits.any(axis=1)] = paths.shape[1] - 1
            return idx

        return cls(f"hit@{threshold}",
                   lambda prefix: prefix[-1] >= threshold, vec)

    def stop_indices(self, paths: np.ndarray) -> np.ndarray:
        if self.vectorized is not None:
            return self.vectorized(paths)
        out = np.empty(paths.shape[0], dtype=np.int64)
        for i, path in enumerate(paths):
            t = paths.shape[1] - 1
            for j in range(paths.shape[1]):
                if self.decide(path[: j + 1]):
                    t = j
                    break
            out[i] = t
        return out


def simulate_paths(model: ProcessModel, n: int, seed: int) -> np.ndarray:
    """n i.i.d. paths (M_0, ..., M_T) as an (n, T+1) array."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    vals = np.array([float(v) for v in model.multiplier.outcomes])
    probs = np.array([float(p) for p in model.multiplier.probs])
    probs = probs / probs.sum()  # exact masses may not be float-normalized
    factors = rng.choice(vals, size=(n, model.horizon), p=probs)
    paths = np.empty((n, model.horizon + 1))
    paths[:, 0] = float(model.initial)
    np.cumprod(factors, axis=1, out=factors)
    paths[:, 1:] = float(model.initial) * factors
    return paths


# ---------------------------------------------------------------------------
# Markov equalities


def _posthoc_sup(x: Number, candidates) -> Number:
    """sup_c 1{x >= 1/c}/c over the candidate grid of realized values."""
    best = 0
    for v in candidates:  # c = 1/v
        if v > 0 and x >= v and v > best:
            best = v
    return best


def markov_equality_check(X: EvidenceVariable, H: Hypothesis):
    """Both sides of E[sup_c 1{X >= 1/c}/c] = E[X].

    The left side is evaluated from the definition on the grid of realized
    values (where the deterministic identity attains the supremum); the
    right side is the plain mean.  Returns the worst-case (lhs, rhs) over
    hypothesis members; raises if any member breaks the equality.
    """
    e = X.as_scale(E_SCALE)
    candidates = [e[x] for x in e.outcomes]
    lhs_w = rhs_w = None
    for m in H.members:
        lhs = m.expectation(lambda x: _posthoc_sup(e[x], candidates))
        rhs = m.expectation(lambda x: e[x])
        same = (lhs == rhs) or (
            not is_inf(lhs) and not is_inf(rhs)
            and abs(float(lhs) - float(rhs)) <= TOL * max(1.0, abs(float(rhs))))
        if not same and not (is_inf(lhs) and is_inf(rhs)):
            raise AssertionError(f"Markov equality failed: {lhs} != {rhs}")
        if rhs_w is None or rhs > rhs_w:
            lhs_w, rhs_w = lhs, rhs
    return lhs_w, rhs_w


def mrmw_sandwich(X: EvidenceVariable, c: Number, H: Hypothesis):
    """(P(X >= 1/c), E[cX AND 1], cE[X]) for the worst hypothesis member;
    asserts the sandwich ordering for every member."""
    if c <= 0:
        raise ValueError("c must be positive")
    e = X.as_scale(E_SCALE)
    inv_c = recip(c)
    worst = None
    for m in H.members:
        a = m.expectation(lambda x: 1 if e[x] >= inv_c else 0)
        b = m.expectation(lambda x: min(mul0(c, e[x]), 1))
        r = mul0(c, m.expectation(lambda x: e[x]))
        if not (a <= b + TOL and (is_inf(r) or b <= r + TOL)):
            raise AssertionError(f"sandwich violated: {a}, {b}, {r}")
        if worst is None or r > worst[2]:
            worst = (a, b, r)
    return worst


# ---------------------------------------------------------------------------
# Ville / anytime validity


@dataclass(frozen=True)
class VilleReport:
    rule: str
    kind: str
    n: int
    mean: float
    se: float
    initial: float
    valid: bool
    detail: str

    def __bool__(self) -> bool:
        return self.valid

    def to_dict(self) -> dict:
        return {
            "rule": self.rule, "kind": self.kind, "n": self.n,
            "mean": self.mean, "se": self.se, "initial": self.initial,
            "valid": self.valid, "detail": self.detail,
        }


def _stopped_values(model: ProcessModel, rule: StoppingRule,
                    n: int, seed: int) -> np.ndarray:
    paths = simulate_paths(model, n, seed)
    idx = rule.stop_indices(paths)
    stopped = paths[np.arange(n), idx]
    # per-path post-hoc statistic sup 1{M_tau >= 1/a}/a equals M_tau itself
    grid = np.unique(stopped[:64])
    for v in stopped[:8]:
        sup = max((g for g in grid if g > 0 and v >= g), default=0.0)
        if not math.isclose(sup, v, rel_tol=1e-12, abs_tol=1e-300):
            raise AssertionError("deterministic Markov identity violated")
    return stopped


def ville_equality_check(model: ProcessModel, rule: StoppingRule,
                         n: int, seed: int) -> VilleReport:
    """Optional-stopping check of E[M_tau] against M_0.

    Martingales must match within 3 standard errors; supermartingales must
    not exceed M_0 + 3 SE (tau = 0 attains equality exactly and is checked
    directly when the rule is the immediate stop).
    """
    stopped = _stopped_values(model, rule, n, seed)
    mean = float(stopped.mean())
    se = float(stopped.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    m0 = float(model.initial)
    if model.kind == MARTINGALE:
        valid = abs(mean - m0) <= 3 * se + TOL
        detail = "optional stopping equality within 3 SE"
    else:
        valid = mean <= m0 + 3 * se + TOL
        detail = "stopped mean bounded by the initial value"
    return VilleReport(rule.name, model.kind, n, mean, se, m0, valid, detail)


def anytime_validity_check(models, rules: Sequence[StoppingRule],
                           n: int, seed: int) -> dict:
    """sup over rules (and hypothesis members) of the stopped mean E[M_tau].

    ``models`` is a ProcessModel or a mapping member-name -> ProcessModel.
    Valid iff every stopped mean stays below the initial value within 3 SE.
    """
    if not rules:
        raise ValueError("at least one stopping rule required")
    if isinstance(models, ProcessModel):
        models = {"null": models}
    rows, valid = [], True
    worst = None
    for name, model in models.items():
        for j, rule in enumerate(rules):
            stopped = _stopped_values(model, rule, n, seed + j)
            mean = float(stopped.mean())
            se = float(stopped.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
            ok = mean <= float(model.initial) + 3 * se + TOL
            valid = valid and ok
            rows.append({"member": name, "rule": rule.name, "mean": mean,
                         "se": se, "valid": ok})
            if worst is None or mean > worst:
                worst = mean
    return {"valid": valid, "sup_mean": worst, "rows": rows}


# ---------------------------------------------------------------------------
# multiple testing


@dataclass(frozen=True)
class TestFamilyCollection:
    """Finite family of test functions on a common outcome set."""

    __test__ = False  # not a pytest class despite the name

    members: tuple

    def __init__(self, members: Sequence[TestFunction]):
        members = tuple(members)
        if not members:
            raise ValueError("family must be nonempty")
        outcomes = set(members[0].p.outcomes)
        for tf in members[1:]:
            if set(tf.p.outcomes) != outcomes:
                raise ValueError("family members must share an outcome set")
        object.__setattr__(self, "members", members)

    @property
    def outcomes(self) -> tuple:
        return self.members[0].p.outcomes


def fwer_merge(fam: TestFamilyCollection) -> TestFunction:
    """Union test phi-bar(alpha) = sup_i phi_i(alpha), i.e. the pointwise
    minimum p-value (equivalently the pointwise maximum e-value)."""
    merged = {
        x: min(tf.p[x] for tf in fam.members)
        for x in fam.outcomes
    }
    return TestFunction(EvidenceVariable(merged, P_SCALE))


def fdr_average(fam: TestFamilyCollection,
                weights: Sequence[Number] | None = None) -> RandomizedTestFunction:
    """Weighted average phi-tilde(alpha) = sum_i w_i 1{p_i <= alpha}: the
    expected rejection proportion as a randomized test function."""
    k = len(fam.members)
    if weights is None:
        weights = [Fraction(1, k)] * k
    weights = list(weights)
    if len(weights) != k or any(w < 0 for w in weights):
        raise ValueError("need one nonnegative weight per member")
    if sum(weights) != 1 and abs(float(sum(weights)) - 1.0) > TOL:
        raise ValueError("weights must sum to 1")
    curves = {}
    for x in fam.outcomes:
        jumps = sorted(
            (tf.p[x], w) for tf, w in zip(fam.members, weights)
            if not is_inf(tf.p[x])
        )
        segs, level = [], 0
        for p, w in jumps:
            level = level + w
            segs.append((p, min(level, 1), 0))
        dedup = {alo: (alo, v, m) for alo, v, m in segs}
        curves[x] = TCurve(sorted(dedup.values()))
    return RandomizedTestFunction(curves)


# ---------------------------------------------------------------------------
# fixtures


def martingale_fixture(horizon: int = 50) -> ProcessModel:
    z = DiscreteSpace((Fraction(1, 2), Fraction(3, 2)),
                      (Fraction(1, 2), Fraction(1, 2)))
    return ProcessModel(1, z, MARTINGALE, horizon)


def supermartingale_fixture(horizon: int = 50) -> ProcessModel:
    z = DiscreteSpace((Fraction(1, 2), Fraction(7, 5)),
                      (Fraction(1, 2), Fraction(1, 2)))
    return ProcessModel(1, z, SUPERMARTINGALE, horizon)


def invalid_eprocess_fixture(horizon: int = 50) -> ProcessModel:
    """Declared EPROCESS but E[Z] = 1.1: anytime validity must fail."""
    z = DiscreteSpace((Fraction(3, 5), Fraction(8, 5)),
                      (Fraction(1, 2), Fraction(1, 2)))
    return ProcessModel(1, z, EPROCESS, horizon)
