"""Data-dependent level strategies and size-distortion analysis.

A strategy maps the realized p-value to a significance level through a
piecewise-constant rule on (0, inf].  Conditional size, expected distortion
and maximum distortion are integrated exactly against a :class:`PValueLaw`;
a Monte Carlo engine cross-checks the exact integrals.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from ._numbers import INF, Number, fmt_number, frac, is_inf, recip
from .core import PValueLaw


@dataclass(frozen=True)
class AlphaStrategy:
    """Piecewise-constant data-dependent level: pieces (lo, hi, level).

    The intervals (lo, hi] must partition (0, inf] and every level must be
    positive.  The realized level is the one whose interval contains the
    observed p-value; the comparison "p <= level" is non-strict, matching
    the half-open integration convention.
    """

    pieces: tuple

    def __init__(self, pieces: Iterable):
        pieces = tuple(sorted((lo, hi, lvl) for lo, hi, lvl in pieces))
        if not pieces:
            raise ValueError("strategy needs at least one piece")
        if pieces[0][0] != 0:
            raise ValueError("strategy pieces must start at 0")
        if not is_inf(pieces[-1][1]):
            raise ValueError("strategy pieces must extend to inf")
        for (l1, h1, _), (l2, h2, _) in zip(pieces, pieces[1:]):
            if l2 != h1:
                raise ValueError("strategy pieces must tile (0, inf]")
        for lo, hi, lvl in pieces:
            if lvl <= 0:
                raise ValueError("levels must be positive")
            if hi <= lo:
                raise ValueError(f"bad strategy interval ({lo}, {hi}]")
        object.__setattr__(self, "pieces", pieces)

    @classmethod
    def constant(cls, alpha: Number) -> "AlphaStrategy":
        return cls([(0, INF, alpha)])

    def level_of(self, p: Number) -> Number:
        for lo, hi, lvl in self.pieces:
            if lo < p <= hi:
                return lvl
        raise ValueError(f"p-value {p!r} outside (0, inf]")

    def levels(self) -> list:
        seen = []
        for _, _, lvl in self.pieces:
            if lvl not in seen:
                seen.append(lvl)
        return seen

    def level_mass(self, p_law: PValueLaw, a: Number) -> Number:
        """P(level = a) under the p-value law."""
        return sum(
            p_law.mass_interval(lo, hi)
            for lo, hi, lvl in self.pieces
            if lvl == a
        )

    def rejection_mass(self, p_law: PValueLaw, a: Number) -> Number:
        """P(p <= level and level = a)."""
        total = 0
        for lo, hi, lvl in self.pieces:
            if lvl == a and lvl > lo:
                total += p_law.mass_interval(lo, min(hi, lvl))
        return total


@dataclass(frozen=True)
class DistortionReport:
    """Per-level conditional sizes plus the expected and maximum distortion."""

    per_level: tuple  # rows of (level, mass, size, distortion)
    expected_distortion: Number
    max_distortion: Number

    def to_rows(self) -> list:
        return [
            {
                "level": fmt_number(lvl),
                "mass": fmt_number(mass),
                "size": fmt_number(size),
                "distortion": fmt_number(dist),
            }
            for lvl, mass, size, dist in self.per_level
        ]

    def to_json(self) -> str:
        return json.dumps(
            {
                "per_level": self.to_rows(),
                "expected_distortion": fmt_number(self.expected_distortion),
                "max_distortion": fmt_number(self.max_distortion),
            },
            indent=2,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["level", "mass", "size", "distortion"])
        for lvl, mass, size, dist in self.per_level:
            writer.writerow([fmt_number(lvl), fmt_number(mass),
                             fmt_number(size), fmt_number(dist)])
        return buf.getvalue()


def conditional_size(p_law: PValueLaw, s: AlphaStrategy, a: Number) -> Number:
    """P(p <= level | level = a), exact."""
    mass = s.level_mass(p_law, a)
    if mass == 0:
        raise ValueError(f"level {a!r} has zero probability; cannot condition")
    return s.rejection_mass(p_law, a) / mass


def expected_size_distortion(p_law: PValueLaw, s: AlphaStrategy) -> Number:
    """E[ I{p <= level} / level ], exact; +inf when divergent."""
    total = 0
    for lo, hi, lvl in s.pieces:
        if lvl > lo:
            total += p_law.mass_interval(lo, min(hi, lvl)) / lvl
    return total


def max_size_distortion(p_law: PValueLaw, s: AlphaStrategy) -> Number:
    """sup over levels in the strategy's support of size(a)/a."""
    best = 0
    for a in s.levels():
        mass = s.level_mass(p_law, a)
        if mass == 0:
            continue  # essential-supremum semantics: ignore null levels
        dist = conditional_size(p_law, s, a) / a
        if dist > best:
            best = dist
    return best


def distortion_report(p_law: PValueLaw, s: AlphaStrategy) -> DistortionReport:
    rows = []
    for a in s.levels():
        mass = s.level_mass(p_law, a)
        if mass == 0:
            continue
        size = conditional_size(p_law, s, a)
        rows.append((a, mass, size, size / a))
    expected = expected_size_distortion(p_law, s)
    maximum = max_size_distortion(p_law, s)
    return DistortionReport(tuple(rows), expected, maximum)


def monte_carlo_distortion(sampler, s: AlphaStrategy, n: int, seed: int):
    """Unbiased MC estimate of the expected size distortion, with its SE.

    ``sampler`` is a PValueLaw or a callable (n, rng) -> float array.
    Deterministic for a fixed seed (counter-based Philox stream).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    if isinstance(sampler, PValueLaw):
        draws = sampler.sample(n, rng)
    else:
        draws = np.asarray(sampler(n, rng), dtype=float)
    vals = np.zeros(n)
    lower = np.full(n, False)
    for lo, hi, lvl in s.pieces:
        sel = (draws > float(lo)) & (draws <= float(hi))
        vals[sel] = np.where(draws[sel] <= float(lvl), 1.0 / float(lvl), 0.0)
        lower |= sel
    if not lower.all():
        raise ValueError("sampler produced p-values outside (0, inf]")
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else INF
    return est, se


@dataclass(frozen=True)
class ImpossibilityVerdict:
    controls: bool
    ess_inf: Number
    witness_strategy: AlphaStrategy | None
    witness_max_distortion: Number

    def __bool__(self) -> bool:
        return self.controls


def impossibility_audit(p_law: PValueLaw) -> ImpossibilityVerdict:
    """Maximum size distortion is controllable iff the p-value never drops
    below 1; otherwise "reject at level p" witnesses a distortion of
    1 / inf(support)."""
    lo = p_law.ess_inf()
    if lo >= 1:
        return ImpossibilityVerdict(True, lo, None, 1)
    # witness: follow the realized p-value on its support below 1.  Atom-only
    # laws get the exact witness; continuous pieces get a geometric
    # refinement whose distortion grows without bound as it is refined, and
    # the reported witness distortion is the limiting value 1/ess-inf.
    breaks = set(b for b in p_law.support_breakpoints() if b < 1)
    for a, b, m in p_law.pieces:
        if m > 0 and a < 1:
            left = float(a) if a > 0 else float(min(b, 1)) / 256.0
            right = float(min(b, 1))
            x = left
            while x < right:
                breaks.add(x)
                x *= 2.0
    breaks = sorted(breaks)
    pieces = []
    prev = 0
    for b in breaks:
        pieces.append((prev, b, b))
        prev = b
    pieces.append((prev, INF, 1))
    witness = AlphaStrategy(pieces)
    return ImpossibilityVerdict(False, lo, witness, recip(lo))


# ---------------------------------------------------------------------------
# named fixtures for the worked examples (exact-rational backend)


def uniform_p_law() -> PValueLaw:
    """Exactly valid p-value: Unif(0, 1]."""
    return PValueLaw(pieces=[(Fraction(0), Fraction(1), Fraction(1))])


def valid_hacking_law() -> PValueLaw:
    """Conservative p-value: Unif(0, 1) w.p. 1/2, the constant 1 w.p. 1/2."""
    return PValueLaw(
        atoms=[(Fraction(1), Fraction(1, 2))],
        pieces=[(Fraction(0), Fraction(1), Fraction(1, 2))],
    )


def decreasing_alpha_strategy() -> AlphaStrategy:
    """Claim the 1% level when p <= .01, otherwise the 5% level."""
    one, five = frac(1, 100), frac(5, 100)
    return AlphaStrategy([(0, one, one), (one, INF, five)])


def conservative_strategy() -> AlphaStrategy:
    """Report a conservatively large level .02 when p <= .01, else .01."""
    one, two = frac(1, 100), frac(2, 100)
    return AlphaStrategy([(0, one, two), (one, INF, one)])


def fragility_strategy(c: Number) -> AlphaStrategy:
    """Level c when p <= c, else .05; discontinuous max distortion as c -> .05."""
    c = Fraction(c) if not isinstance(c, float) else c
    five = frac(5, 100)
    if c == five:
        return AlphaStrategy.constant(five)
    return AlphaStrategy([(0, c, c), (c, INF, five)])


def reject_at_p_strategy(p_law: PValueLaw) -> AlphaStrategy:
    """The extreme hack: use the smallest level at which the test rejects."""
    verdict = impossibility_audit(p_law)
    if verdict.witness_strategy is None:
        return AlphaStrategy.constant(1)
    return verdict.witness_strategy
