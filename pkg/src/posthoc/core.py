"""Finite probability spaces, evidence variables and validity checks.

Evidence variables live on an extended nonnegative scale and carry a tag
saying whether large values mean strong evidence (e-scale) or weak evidence
(p-scale).  The two scales are reciprocal duals of each other.  Classical
validity bounds P(p <= a)/a uniformly in a; the stronger notion checked by
:func:`check_posthoc_validity` bounds E[1/p] instead, which is what licenses
rejecting at a level chosen after seeing the data.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping, Sequence

from ._numbers import INF, TOL, Number, fmt_number, is_inf, mul0, parse_number, recip

E_SCALE = "e"
P_SCALE = "p"


# ---------------------------------------------------------------------------
# spaces and hypotheses


@dataclass(frozen=True)
class DiscreteSpace:
    """Finite outcome set with one probability weight per outcome."""

    outcomes: tuple
    probs: tuple

    def __init__(self, outcomes: Sequence, probs: Sequence[Number]):
        outcomes = tuple(outcomes)
        probs = tuple(probs)
        if len(outcomes) != len(probs):
            raise ValueError("outcomes and probs must have equal length")
        if len(set(outcomes)) != len(outcomes):
            raise ValueError("outcome ids must be unique")
        if any(p < 0 for p in probs):
            raise ValueError("probabilities must be nonnegative")
        total = sum(probs)
        if all(isinstance(p, (int, Fraction)) for p in probs):
            if total != 1:
                raise ValueError(f"probabilities must sum to 1, got {total}")
        elif abs(total - 1) > TOL:
            raise ValueError(f"probabilities must sum to 1, got {total}")
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "probs", probs)

    def prob(self, outcome) -> Number:
        return self.probs[self.outcomes.index(outcome)]

    def expectation(self, f: Callable[[Any], Number]) -> Number:
        """E[f(X)] with 0 * inf = 0 so mass-zero outcomes never matter."""
        total = 0
        for x, p in zip(self.outcomes, self.probs):
            total = total + mul0(p, f(x))
        return total

    def to_dict(self) -> dict:
        return {
            "outcomes": list(self.outcomes),
            "probs": [fmt_number(p) for p in self.probs],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "DiscreteSpace":
        return cls(d["outcomes"], [parse_number(p) for p in d["probs"]])


@dataclass(frozen=True)
class Hypothesis:
    """Finite composite hypothesis: a set of distributions on one outcome set.

    The composite expectation is the supremum (here: max) over members.
    """

    members: tuple

    def __init__(self, members: Iterable[DiscreteSpace]):
        members = tuple(members)
        if not members:
            raise ValueError("hypothesis must contain at least one distribution")
        base = members[0].outcomes
        for m in members[1:]:
            if m.outcomes != base:
                raise ValueError("all members must share the same outcome set")
        object.__setattr__(self, "members", members)

    @classmethod
    def simple(cls, space: DiscreteSpace) -> "Hypothesis":
        return cls((space,))

    @property
    def outcomes(self) -> tuple:
        return self.members[0].outcomes

    def sup_expectation(self, f: Callable[[Any], Number]):
        """(sup_P E_P[f], index of a worst-case member)."""
        best, best_i = None, 0
        for i, m in enumerate(self.members):
            v = m.expectation(f)
            if best is None or v > best:
                best, best_i = v, i
        return best, best_i


# ---------------------------------------------------------------------------
# evidence variables and test functions


@dataclass(frozen=True)
class EvidenceVariable:
    """Per-outcome evidence in [0, inf], tagged e-scale or p-scale."""

    values: Mapping[Any, Number]
    scale: str

    def __init__(self, values: Mapping[Any, Number], scale: str):
        if scale not in (E_SCALE, P_SCALE):
            raise ValueError(f"unknown scale {scale!r}")
        vals = dict(values)
        for x, v in vals.items():
            if not is_inf(v) and v < 0:
                raise ValueError(f"negative evidence value {v!r} at {x!r}")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "scale", scale)

    def __getitem__(self, outcome) -> Number:
        return self.values[outcome]

    @property
    def outcomes(self) -> tuple:
        return tuple(self.values)

    def as_scale(self, scale: str) -> "EvidenceVariable":
        if scale == self.scale:
            return self
        return dual(self)

    def to_dict(self) -> dict:
        return {
            "values": {str(k): fmt_number(v) for k, v in self.values.items()},
            "scale": self.scale,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvidenceVariable":
        return cls({k: parse_number(v) for k, v in d["values"].items()}, d["scale"])


def dual(ev: EvidenceVariable) -> EvidenceVariable:
    """Pointwise reciprocal with the scale flipped; an exact involution."""
    other = P_SCALE if ev.scale == E_SCALE else E_SCALE
    return EvidenceVariable({x: recip(v) for x, v in ev.values.items()}, other)


@dataclass(frozen=True)
class TestFunction:
    """Nondecreasing family of level-alpha tests, summarized by its jump point."""

    __test__ = False  # not a pytest class despite the name

    p: EvidenceVariable

    def __init__(self, p: EvidenceVariable):
        if p.scale != P_SCALE:
            raise ValueError("a test function is parameterized by a p-scale variable")
        if any(v == 0 for v in p.values.values()):
            raise ValueError("p-values must be strictly positive")
        object.__setattr__(self, "p", p)

    @classmethod
    def from_evidence(cls, ev: EvidenceVariable) -> "TestFunction":
        return cls(ev.as_scale(P_SCALE))

    def __call__(self, alpha: Number, outcome) -> int:
        return 1 if self.p[outcome] <= alpha else 0

    def p_value(self, outcome) -> Number:
        """Smallest alpha at which the test rejects for this outcome."""
        if outcome not in self.p.values:
            raise KeyError(f"unknown outcome {outcome!r}")
        return self.p[outcome]


def p_value(tf: TestFunction, outcome) -> Number:
    return tf.p_value(outcome)


# ---------------------------------------------------------------------------
# p-value laws (atoms + uniform-density pieces)


@dataclass(frozen=True)
class PValueLaw:
    """Distribution of a p-value: point masses plus uniform-density intervals.

    Atoms are (location, mass) with location > 0 (inf allowed for the mass a
    test never converts into a rejection).  Pieces are (a, b, mass) carrying
    uniform density on the half-open interval (a, b].
    """

    atoms: tuple
    pieces: tuple

    def __init__(self, atoms: Iterable = (), pieces: Iterable = ()):
        atoms = tuple((loc, m) for loc, m in atoms)
        pieces = tuple((a, b, m) for a, b, m in pieces)
        locs = [loc for loc, _ in atoms]
        if len(set(locs)) != len(locs):
            raise ValueError("atom locations must be distinct")
        for loc, m in atoms:
            if not is_inf(loc) and loc <= 0:
                raise ValueError("atom locations must be positive")
            if m < 0:
                raise ValueError("atom masses must be nonnegative")
        spans = []
        for a, b, m in pieces:
            if not (0 <= a < b):
                raise ValueError(f"bad piece interval ({a}, {b}]")
            if is_inf(b):
                raise ValueError("pieces must be bounded")
            if m < 0:
                raise ValueError("piece masses must be nonnegative")
            spans.append((a, b))
        spans.sort()
        for (a1, b1), (a2, b2) in zip(spans, spans[1:]):
            if a2 < b1:
                raise ValueError("piece intervals must be disjoint")
        total = sum(m for _, m in atoms) + sum(m for _, _, m in pieces)
        exact = all(
            isinstance(m, (int, Fraction)) for m in
            [m for _, m in atoms] + [m for _, _, m in pieces]
        )
        if exact:
            if total != 1:
                raise ValueError(f"masses must sum to 1, got {total}")
        elif abs(total - 1) > TOL:
            raise ValueError(f"masses must sum to 1, got {total}")
        object.__setattr__(self, "atoms", tuple(sorted(atoms)))
        object.__setattr__(self, "pieces", tuple(sorted(pieces)))

    # -- exact integration ------------------------------------------------

    def cdf(self, alpha: Number) -> Number:
        """P(p <= alpha)."""
        total = 0
        for loc, m in self.atoms:
            if loc <= alpha:
                total += m
        for a, b, m in self.pieces:
            if alpha >= b:
                total += m
            elif alpha > a:
                total += m * (alpha - a) / (b - a)
        return total

    def mass_interval(self, lo: Number, hi: Number) -> Number:
        """P(p in (lo, hi])."""
        if hi <= lo:
            return 0
        total = 0
        for loc, m in self.atoms:
            if lo < loc <= hi:
                total += m
        for a, b, m in self.pieces:
            left, right = max(a, lo), min(b, hi)
            if right > left:
                total += m * (right - left) / (b - a)
        return total

    def expect_recip(self) -> Number:
        """E[1/p]; +inf when a piece touches 0 with positive mass."""
        total = 0
        for loc, m in self.atoms:
            if m > 0:
                total += mul0(m, recip(loc))
            if is_inf(total):
                return INF
        for a, b, m in self.pieces:
            if m == 0:
                continue
            if a == 0:
                return INF
            total += m * (math.log(float(b)) - math.log(float(a))) / float(b - a)
        return total

    def expect_identity(self) -> Number:
        """E[p]."""
        total = 0
        for loc, m in self.atoms:
            total += mul0(m, loc)
            if is_inf(total):
                return INF
        for a, b, m in self.pieces:
            total += m * (a + b) / 2
        return total

    def ess_inf(self) -> Number:
        """Infimum of the support."""
        cands = [loc for loc, m in self.atoms if m > 0]
        cands += [a for a, b, m in self.pieces if m > 0]
        return min(cands) if cands else INF

    def support_breakpoints(self) -> list:
        pts = [loc for loc, m in self.atoms if m > 0 and not is_inf(loc)]
        for a, b, m in self.pieces:
            if m > 0:
                if a > 0:
                    pts.append(a)
                pts.append(b)
        return sorted(set(pts))

    # -- sampling ----------------------------------------------------------

    def sample(self, n: int, rng) -> "np.ndarray":
        """n i.i.d. float draws via inverse-mixture sampling."""
        import numpy as np

        comps = [(float(m), ("atom", float(loc))) for loc, m in self.atoms]
        comps += [(float(m), ("piece", float(a), float(b))) for a, b, m in self.pieces]
        weights = np.array([w for w, _ in comps])
        weights = weights / weights.sum()
        idx = rng.choice(len(comps), size=n, p=weights)
        u = rng.random(n)
        out = np.empty(n)
        for i, (_, spec) in enumerate(comps):
            sel = idx == i
            if spec[0] == "atom":
                out[sel] = spec[1]
            else:
                a, b = spec[1], spec[2]
                out[sel] = a + (b - a) * u[sel]
        return out

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "atoms": [[fmt_number(loc), fmt_number(m)] for loc, m in self.atoms],
            "pieces": [
                [fmt_number(a), fmt_number(b), fmt_number(m)]
                for a, b, m in self.pieces
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PValueLaw":
        atoms = [(parse_number(l), parse_number(m)) for l, m in d.get("atoms", [])]
        pieces = [
            (parse_number(a), parse_number(b), parse_number(m))
            for a, b, m in d.get("pieces", [])
        ]
        return cls(atoms, pieces)


def law_of(ev: EvidenceVariable, space: DiscreteSpace) -> PValueLaw:
    """Push a discrete p-scale evidence variable through a space's law."""
    p = ev.as_scale(P_SCALE)
    masses: dict = {}
    for x, w in zip(space.outcomes, space.probs):
        if w > 0:
            v = p[x]
            masses[v] = masses.get(v, 0) + w
    return PValueLaw(atoms=list(masses.items()))


# ---------------------------------------------------------------------------
# validity reports


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    statistic: Number
    witness: Any = None
    kind: str = ""
    detail: str = ""

    def __bool__(self) -> bool:
        return self.valid

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "statistic": fmt_number(self.statistic),
            "witness": self.witness if not isinstance(self.witness, Fraction)
            else fmt_number(self.witness),
            "kind": self.kind,
            "detail": self.detail,
        }


def check_classical_validity(p_law: PValueLaw, tol: float = TOL) -> ValidityReport:
    """sup_a P(p <= a)/a, searched over the law's breakpoints.

    Between breakpoints P(p <= a)/a is monotone for piecewise-uniform laws,
    so the finite candidate set of atom locations and piece endpoints is
    exhaustive.  Levels a >= 1 satisfy P(p <= a) <= a trivially, so the
    search runs over a < 1 plus the left-limit at 1.
    """
    best, witness = 0, None
    candidates = [a for a in p_law.support_breakpoints() if a < 1]
    for a in candidates:
        ratio = p_law.cdf(a) / a
        if ratio > best:
            best, witness = ratio, a
    # left-limit at 1: the cdf just below 1 excludes an atom sitting at 1
    atom_at_one = sum(m for loc, m in p_law.atoms if loc == 1)
    limit_ratio = p_law.cdf(1) - atom_at_one
    if limit_ratio > best:
        best, witness = limit_ratio, 1
    return ValidityReport(
        valid=best <= 1 + tol,
        statistic=best,
        witness=witness,
        kind="classical",
        detail="sup over alpha of P(p <= alpha)/alpha",
    )


def check_posthoc_validity(obj, H: Hypothesis | None = None,
                           tol: float = TOL) -> ValidityReport:
    """E[1/p] (= E[e]) must be at most 1; supremum over hypothesis members."""
    if isinstance(obj, PValueLaw):
        stat = obj.expect_recip()
        return ValidityReport(
            valid=(not is_inf(stat)) and stat <= 1 + tol,
            statistic=stat,
            witness=None,
            kind="posthoc",
            detail="E[1/p] for the given p-value law",
        )
    if not isinstance(obj, EvidenceVariable):
        raise TypeError("expected an EvidenceVariable or PValueLaw")
    if H is None:
        raise ValueError("an EvidenceVariable needs a hypothesis to integrate over")
    e = obj.as_scale(E_SCALE)
    stat, worst = H.sup_expectation(lambda x: e[x])
    return ValidityReport(
        valid=(not is_inf(stat)) and stat <= 1 + tol,
        statistic=stat,
        witness=worst,
        kind="posthoc",
        detail="sup over members of E[e]",
    )


# ---------------------------------------------------------------------------
# abstract evidence lattices


@dataclass(frozen=True)
class EvidenceLattice:
    """Finite totally ordered evidence space with bottom '0' and top 'inf'."""

    elements: tuple

    def __init__(self, elements: Sequence):
        elements = tuple(elements)
        if len(elements) < 2:
            raise ValueError("lattice needs at least bottom and top")
        if len(set(elements)) != len(elements):
            raise ValueError("lattice elements must be distinct")
        object.__setattr__(self, "elements", elements)

    @property
    def bottom(self):
        return self.elements[0]

    @property
    def top(self):
        return self.elements[-1]

    def index(self, d) -> int:
        return self.elements.index(d)

    def leq(self, a, b) -> bool:
        return self.index(a) <= self.index(b)

    def sup(self, items) -> Any:
        items = list(items)
        if not items:
            return self.bottom
        return max(items, key=self.index)


def posthoc_evidence_of_family(phi: Mapping[Any, Mapping[Any, Any]],
                               L: EvidenceLattice) -> dict:
    """Collapse a family of binary lattice tests into one evidence variable.

    ``phi[d][x]`` must be either the lattice bottom or ``d``; the result maps
    each outcome to the strongest evidence any test in the family returns.
    """
    outcomes = None
    for d, test in phi.items():
        for x, v in test.items():
            if v != L.bottom and v != d:
                raise ValueError(f"test at {d!r} returns {v!r}, not bottom or {d!r}")
        outs = set(test)
        if outcomes is None:
            outcomes = outs
        elif outs != outcomes:
            raise ValueError("tests must share one outcome set")
    if outcomes is None:
        raise ValueError("empty test family")
    return {x: L.sup(test[x] for test in phi.values()) for x in outcomes}


def family_of_evidence(epsilon: Mapping[Any, Any], L: EvidenceLattice) -> dict:
    """The canonical test family whose post-hoc evidence variable is epsilon."""
    return {
        d: {x: (d if L.leq(d, epsilon[x]) else L.bottom) for x in epsilon}
        for d in L.elements
    }


# ---------------------------------------------------------------------------
# JSON helpers shared by the CLI


def to_json(obj) -> str:
    return json.dumps(obj.to_dict(), indent=2, sort_keys=True)


def from_json(cls, text: str):
    return cls.from_dict(json.loads(text))
