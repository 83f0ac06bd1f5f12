"""Configuration-driven experiment runner.

Every subcommand reproduces a worked example or runs one of the library's
engines on named fixtures, emitting a JSON report (and optional CSV tables)
that is byte-identical for identical (config, seed).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import (
    AlphaStrategy,
    Hypothesis,
    StoppingRule,
    TestFamilyCollection,
    UtilitySpec,
    anytime_validity_check,
    bernoulli_pair,
    check_classical_validity,
    check_pfunction_posthoc,
    check_posthoc_validity,
    conditional_size,
    conservative_strategy,
    decreasing_alpha_strategy,
    distortion_report,
    double_posthoc_check,
    dual,
    expected_size_distortion,
    fmt_number,
    frac,
    fragility_strategy,
    gaussian_log_optimal_report,
    invalid_eprocess_fixture,
    law_of,
    log_optimal,
    markov_equality_check,
    martingale_fixture,
    max_size_distortion,
    merge_harmonic,
    merge_product_independent,
    minimal_h_counterexample,
    monte_carlo_distortion,
    mrmw_sandwich,
    np_optimal,
    pfunction_of,
    product_merge_failure_witness,
    supermartingale_fixture,
    test_function_of,
    uniform_p_law,
    uniform_randomize,
    utility_optimal,
    valid_hacking_law,
    ville_equality_check,
)
from .core import DiscreteSpace, EvidenceVariable, E_SCALE
from .pfunctions import PCurve, PFunction

SCHEMA_VERSION = 1
DEFAULT_SEED = 2026
ENV_SEED = "EVALID_SEED"

P_LAWS = {
    "uniform": uniform_p_law,
    "valid_hacking": valid_hacking_law,
}
STRATEGIES = {
    "decreasing_alpha": decreasing_alpha_strategy,
    "conservative": conservative_strategy,
}


class CliError(Exception):
    pass


def _num(x, backend):
    if backend == "float":
        return float(x)
    return x


def _fmt(x, backend):
    return fmt_number(float(x) if backend == "float" else x)


def _fixture_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# subcommand implementations (each returns report dict + named CSV tables)


def run_distortion(opts):
    law = P_LAWS[opts["fixture"]]()
    strat = STRATEGIES[opts["strategy"]]()
    rep = distortion_report(law, strat)
    est, se = monte_carlo_distortion(law, strat, opts["n"], opts["seed"])
    report = {
        "fixture": opts["fixture"],
        "strategy": opts["strategy"],
        "per_level": rep.to_rows(),
        "expected_distortion": _fmt(rep.expected_distortion, opts["backend"]),
        "max_distortion": _fmt(rep.max_distortion, opts["backend"]),
        "mc_estimate": est,
        "mc_se": se,
        "mc_within_3se": abs(est - float(rep.expected_distortion)) <= 3 * se,
    }
    return report, {"distortion": rep.to_csv()}


def run_optimal(opts):
    gauss = gaussian_log_optimal_report(alpha=0.05)
    pair = bernoulli_pair()
    p_star = log_optimal(pair)
    e_star, lam = utility_optimal(pair, UtilitySpec.power(2))
    report = {
        "gaussian": gauss,
        "bernoulli_log_optimal": {
            str(x): _fmt(p_star[x], opts["backend"]) for x in p_star.outcomes
        },
        "bernoulli_double_posthoc": double_posthoc_check(pair),
        "bernoulli_power2_lambda": lam,
        "np_half": {
            str(x): _fmt(v, opts["backend"])
            for x, v in ((y, np_optimal(pair, frac(1, 2))[y])
                         for y in pair.P.outcomes)
        },
    }
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["quantity", "value"])
    for k, v in gauss.items():
        w.writerow([k, v])
    return report, {"optimal": buf.getvalue()}


def run_merge(opts):
    pair = bernoulli_pair()
    e = dual(log_optimal(pair))
    merged, space = merge_product_independent([(e, pair.P), (e, pair.P)])
    hyp = Hypothesis.simple(space)
    prod_valid = check_posthoc_validity(merged, hyp)
    p1 = EvidenceVariable({0: frac(1, 2), 1: 2}, "p")
    p2 = EvidenceVariable({0: 2, 1: frac(2, 3)}, "p")
    harm = merge_harmonic([p1, p2], [frac(1, 2), frac(1, 2)])
    witness = product_merge_failure_witness(
        PFunction({"x": PCurve.power(1, 1)}))
    report = {
        "product_independent_valid": bool(prod_valid),
        "product_statistic": _fmt(prod_valid.statistic, opts["backend"]),
        "harmonic_merge": {
            str(x): _fmt(harm[x], opts["backend"]) for x in harm.outcomes},
        "uniform_product_failure_witness_n": witness,
    }
    return report, {}


def run_pfunction(opts):
    p = EvidenceVariable({0: frac(1, 2), 1: 2}, "p")
    pf = uniform_randomize(p)
    # masses chosen so E[1/p] = 1 exactly: the boundary post-hoc p-value
    space_hyp = Hypothesis.simple(
        DiscreteSpace((0, 1), (frac(1, 3), frac(2, 3))))
    rep = check_pfunction_posthoc(pf, space_hyp)
    rt = pfunction_of(test_function_of(pf))
    round_trip_ok = all(
        pf[x].value(u) == rt[x].value(u)
        for x in pf.outcomes for u in pf[x].breakpoints()
    )
    report = {
        "statistic": _fmt(rep.statistic, opts["backend"]),
        "valid": bool(rep),
        "round_trip_exact": round_trip_ok,
    }
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["outcome", "u", "p"])
    for row in pf.to_rows():
        w.writerow(row)
    return report, {"pfunction": buf.getvalue()}


def run_sequential(opts):
    space = DiscreteSpace(("a", "b"), (frac(1, 2), frac(1, 2)))
    hyp = Hypothesis.simple(space)
    X = EvidenceVariable({"a": frac(1, 2), "b": frac(3, 2)}, E_SCALE)
    lhs, rhs = markov_equality_check(X, hyp)
    a, b, r = mrmw_sandwich(X, 1, hyp)
    rules = [StoppingRule.fixed_time(0), StoppingRule.hitting_time(2.0)]
    anytime = anytime_validity_check(
        martingale_fixture(), rules, opts["n"], opts["seed"])
    report = {
        "markov_equality": [_fmt(lhs, opts["backend"]),
                            _fmt(rhs, opts["backend"])],
        "mrmw_sandwich": [_fmt(a, opts["backend"]),
                          _fmt(b, opts["backend"]),
                          _fmt(r, opts["backend"])],
        "anytime": anytime,
    }
    return report, {}


def run_ville(opts):
    rule = StoppingRule.hitting_time(2.0)
    rows = []
    mart = ville_equality_check(
        martingale_fixture(), rule, opts["n"], opts["seed"])
    superm = ville_equality_check(
        supermartingale_fixture(), StoppingRule.fixed_time(0),
        opts["n"], opts["seed"])
    invalid = anytime_validity_check(
        invalid_eprocess_fixture(), [StoppingRule.fixed_time(50)],
        opts["n"], opts["seed"])
    rows = [mart.to_dict(), superm.to_dict()]
    report = {
        "martingale": mart.to_dict(),
        "supermartingale": superm.to_dict(),
        "invalid_process_flagged": not invalid["valid"],
        "verdict": "PASS" if (mart.valid and superm.valid
                              and not invalid["valid"]) else "FAIL",
    }
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return report, {"ville": buf.getvalue()}


def reproduce_examples(opts=None):
    """Golden-number table for every worked example; raises on mismatch."""
    opts = opts or {"backend": "exact"}
    rows, failures = [], []

    def check(example, got, want):
        ok = got == want if opts["backend"] == "exact" else (
            abs(float(got) - float(want)) <= 1e-10)
        rows.append({"example": example, "got": fmt_number(got),
                     "want": fmt_number(want), "ok": ok})
        if not ok:
            failures.append(example)

    law = uniform_p_law()
    dec, cons = decreasing_alpha_strategy(), conservative_strategy()
    check("decreasing_alpha/cond@.01",
          conditional_size(law, dec, frac(1, 100)), 1)
    check("decreasing_alpha/cond@.05",
          conditional_size(law, dec, frac(5, 100)), frac(4, 99))
    check("decreasing_alpha/expected",
          expected_size_distortion(law, dec), frac(9, 5))
    check("decreasing_alpha/max", max_size_distortion(law, dec), 100)
    check("conservative/expected",
          expected_size_distortion(law, cons), frac(1, 2))
    check("conservative/max", max_size_distortion(law, cons), 50)
    hack = valid_hacking_law()
    check("valid_hacking/expected",
          expected_size_distortion(hack, dec), frac(9, 10))
    check("valid_hacking/max", max_size_distortion(hack, dec), 100)
    check("valid_hacking/classical_sup",
          check_classical_validity(hack).statistic, frac(1, 2))
    for c in (frac(1, 100), frac(2, 100), frac(3, 100),
              frac(4, 100), frac(49, 1000)):
        strat = fragility_strategy(c)
        check(f"fragility/expected@{fmt_number(c)}",
              expected_size_distortion(law, strat),
              1 + (frac(5, 100) - c) / frac(5, 100))
        check(f"fragility/max@{fmt_number(c)}",
              max_size_distortion(law, strat), 1 / c)
    cx = minimal_h_counterexample(Fraction(1, 2), Fraction(1, 4))
    check("minimal_h/rho", cx.rho_h, 1)
    check("minimal_h/classical_sup", cx.classical_sup, 4)
    pair = bernoulli_pair()
    p_star = log_optimal(pair)
    check("bernoulli/log_optimal@1", p_star[1], frac(2, 3))
    check("bernoulli/log_optimal@0", p_star[0], 2)
    check("bernoulli/double_posthoc", double_posthoc_check(pair), True)
    gauss = gaussian_log_optimal_report(alpha=0.05)
    check("gaussian/posthoc_threshold", gauss["posthoc_threshold"], 20.0)
    ok_crit = abs(gauss["classical_critical"] - 3.137) <= 0.01
    rows.append({"example": "gaussian/classical_critical",
                 "got": repr(gauss["classical_critical"]),
                 "want": "3.137 +/- .01", "ok": ok_crit})
    if not ok_crit:
        failures.append("gaussian/classical_critical")
    report = {"rows": rows, "failures": failures, "ok": not failures}
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["example", "got", "want", "ok"],
                       lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return report, {"examples": buf.getvalue()}


RUNNERS = {
    "distortion": run_distortion,
    "optimal": run_optimal,
    "merge": run_merge,
    "pfunction": run_pfunction,
    "sequential": run_sequential,
    "examples": reproduce_examples,
    "ville": run_ville,
}


# ---------------------------------------------------------------------------
# argument plumbing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posthoc",
        description="post-hoc hypothesis testing experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--out", type=Path, default=None)
        p.add_argument("--backend", choices=["exact", "float"], default=None)
        p.add_argument("--format", choices=["csv", "json"], default=None)
        p.add_argument("--fixture", default=None)
        p.add_argument("--strategy", default=None)
    return parser


def _resolve_options(args) -> dict:
    config = {}
    if args.config is not None:
        if not args.config.exists():
            raise CliError(f"config file not found: {args.config}")
        config = json.loads(args.config.read_text())
    opts = {
        "seed": DEFAULT_SEED,
        "n": 10_000,
        "backend": "exact",
        "format": "json",
        "fixture": "uniform",
        "strategy": "decreasing_alpha",
        "out": None,
    }
    opts.update({k: v for k, v in config.items() if k in opts})
    if os.environ.get(ENV_SEED):
        opts["seed"] = int(os.environ[ENV_SEED])
    for key in ("seed", "n", "backend", "format", "fixture", "strategy", "out"):
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val  # flags win over config and environment
    if opts["n"] < 1:
        raise CliError("n must be at least 1")
    if opts["fixture"] not in P_LAWS:
        raise CliError(f"unknown fixture {opts['fixture']!r}; "
                       f"choose from {sorted(P_LAWS)}")
    if opts["strategy"] not in STRATEGIES:
        raise CliError(f"unknown strategy {opts['strategy']!r}; "
                       f"choose from {sorted(STRATEGIES)}")
    return opts


def _emit(command, opts, report, tables) -> int:
    envelope = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "seed": opts["seed"],
        "backend": opts["backend"],
        "fixture_hash": _fixture_hash({"fixture": opts["fixture"],
                                       "strategy": opts["strategy"]}),
        "report": report,
    }
    text = json.dumps(envelope, indent=2, sort_keys=True, default=str) + "\n"
    out = opts.get("out")
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{command}.json").write_text(text)
        for name, content in tables.items():
            (out / f"{name}.csv").write_text(content)
    if opts["format"] == "csv" and tables:
        for content in tables.values():
            sys.stdout.write(content)
    else:
        sys.stdout.write(text)
    failed = isinstance(report, dict) and report.get("ok") is False
    return 1 if failed else 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        opts = _resolve_options(args)
        report, tables = RUNNERS[args.command](opts)
    except CliError as exc:
        sys.stderr.write(json.dumps({"error": str(exc)}) + "\n")
        return 2
    return _emit(args.command, opts, report, tables)


if __name__ == "__main__":
    sys.exit(main())
