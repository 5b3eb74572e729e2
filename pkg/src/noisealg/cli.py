"""Command-line front end: ``noise <command> [options]``.

Results go to standard output (or ``--out``) as JSON or CSV; diagnostics go
to standard error. Exit codes: 0 success, 1 failed axiom or invariant,
2 unusable input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import jsonio
from .dominance import exploration, fosd_compare, level_exclusion_product, level_independence_defect
from .inequalities import bonferroni_operator
from .noisebool import AxiomError, NotInAlgebraError, verify_axioms
from .operators import (
    equivalent_spectral_independence,
    generalized_multiplier,
    generalized_operator,
    joining_monte_carlo,
    noise_operator,
    noise_operator_bernoulli,
    self_joining,
    spectral_independence_check,
    spectral_independence_from_integral,
)
from .probspace import RandomVariable, cond_exp
from .scenarios import GENERATORS, Scenario
from .spectral import (
    chaos_space,
    chaos_decompose,
    first_chaos_additive,
    functionals_JH1,
    influence,
    resolve,
    sqrt_influence,
    subspace_distance,
)


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


COMMANDS = ("scenario", "verify", "spectral", "chaos", "influence", "semigroup", "joining",
            "bonferroni", "dominance", "explore")


def _parse_value(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def _parse_t(text: str) -> float:
    text = text.strip()
    if text in ("inf", "infinity", "oo"):
        return math.inf
    if text.startswith("ln"):
        return math.log(float(text[2:]))
    return float(text)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario JSON file")
    common.add_argument("--gen", choices=sorted(GENERATORS), help="inline generator name")
    common.add_argument("--param", action="append", default=[], metavar="K=V",
                        help="generator parameter (repeatable); unknown --k v pairs also count")
    common.add_argument("--tol", type=float, default=1e-9)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", help="write the result here instead of standard output")

    parser = argparse.ArgumentParser(prog="noise", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("scenario", parents=[common], help="emit a generated scenario as JSON")
    sub.add_parser("verify", parents=[common], help="check axioms and invariants")
    p = sub.add_parser("spectral", parents=[common], help="spectral measure of a variable")
    p.add_argument("--rv", required=True)
    p.add_argument("--all", action="store_true", help="include zero-mass points")
    p = sub.add_parser("chaos", parents=[common], help="chaos decomposition of a variable")
    p.add_argument("--rv", required=True)
    p = sub.add_parser("influence", parents=[common], help="influences and J/H1 functionals")
    p.add_argument("--rv", required=True)
    p.add_argument("--element", help="element name (atoms joined with '+')")
    p = sub.add_parser("semigroup", parents=[common], help="decay curve <f, U_t f>")
    p.add_argument("--rv", required=True)
    p.add_argument("--grid", default="0,ln2,inf", help="comma-separated t values (inf, lnK allowed)")
    p = sub.add_parser("joining", parents=[common], help="self-joining correlation")
    p.add_argument("--rv", required=True)
    p.add_argument("--rho", required=True, help="one value per partition member, or a single value")
    p.add_argument("--partition", help="members separated by '|', atoms within joined by '+'")
    p.add_argument("--samples", type=int, default=0, help="use Monte Carlo with this many samples")
    p = sub.add_parser("bonferroni", parents=[common], help="Bonferroni operator report")
    p.add_argument("--tuple", required=True, help="comma-separated element names")
    p = sub.add_parser("dominance", parents=[common], help="FOSD check for Bernoulli sums")
    p.add_argument("--p", required=True, help="comma-separated probabilities")
    p = sub.add_parser("explore", parents=[common], help="exploration along the scenario chain")
    p.add_argument("--rv", help="use the normalised spectral measure of this variable")
    return parser


def _gen_params(args, extras: Sequence[str]) -> dict:
    params = {}
    for item in args.param:
        if "=" not in item:
            raise CliError(f"--param expects K=V, got {item!r}", 2)
        k, v = item.split("=", 1)
        params[k] = _parse_value(v)
    it = iter(extras)
    for tok in it:
        if not tok.startswith("--"):
            raise CliError(f"unexpected argument {tok!r}", 2)
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
        else:
            val = next(it, None)
            if val is None:
                raise CliError(f"missing value for {tok}", 2)
        params[key.replace("-", "_")] = _parse_value(val)
    return params


def _load(args, params: dict, strict: bool = True) -> Scenario:
    if args.scenario and args.gen:
        raise CliError("use either --scenario or --gen", 2)
    if args.scenario:
        try:
            return jsonio.load(args.scenario, strict=strict, tol=args.tol)
        except jsonio.ScenarioLoadError as exc:
            raise CliError(str(exc), 2) from exc
        except AxiomError as exc:
            raise CliError(str(exc), 1) from exc
    if args.gen:
        try:
            return GENERATORS[args.gen](**params)
        except (TypeError, ValueError) as exc:
            raise CliError(f"generator {args.gen}: {exc}", 2) from exc
    raise CliError("a scenario (--scenario or --gen) is required", 2)


def _element(scn: Scenario, name: str) -> int:
    B = scn.algebra
    if name == "0":
        return 0
    if name == "1":
        return B.full_mask
    if name in scn.named_fields:
        try:
            return B.mask_of(scn.named_fields[name])
        except NotInAlgebraError:
            raise CliError(f"field {name!r} is not an element of the algebra", 1) from None
    if "+" in name:
        return int(np.bitwise_or.reduce([_element(scn, part) for part in name.split("+")]))
    raise CliError(f"unknown element {name!r}", 2)


def _rv(scn: Scenario, name: str) -> RandomVariable:
    try:
        return scn.rv(name)
    except KeyError as exc:
        raise CliError(str(exc.args[0]), 2) from None


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _emit(args, payload, rows=None, header=None) -> str:
    if args.format == "csv" and rows is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()
    return json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _finite(v: float):
    return v if math.isfinite(v) else str(v)


# -- commands ----------------------------------------------------------------

def cmd_scenario(args, scn):
    return jsonio.dumps(scn) + "\n", 0


def _invariant_suite(scn: Scenario, tol: float, seed: int) -> dict:
    B = scn.algebra
    checks = {}
    res = resolve(B, tol=tol)
    checks["completeness"] = int(res.dims.sum()) == scn.space.n
    rng = np.random.default_rng(seed)
    fs = list(scn.named_rvs.values()) or [RandomVariable(rng.standard_normal(scn.space.n), scn.space)]
    worst = 0.0
    for f in fs:
        mu = res.spectral_measure(f)
        for m, x in enumerate(B.elements):
            worst = max(worst, abs(mu.of_set(m) - cond_exp(f, x).norm2()))
    checks["spectral_identity"] = worst < tol
    if scn.space.n <= 1024:
        dist = subspace_distance(scn.space, first_chaos_additive(B, tol), chaos_space(res, 1))
        checks["first_chaos"] = dist < 1e-8
        t = math.log(2)
        gap = noise_operator(res, t).max_abs_diff(noise_operator_bernoulli(B, t))
        checks["semigroup_bernoulli"] = gap < 1e-10
    return checks


def cmd_verify(args, scn):
    failures = []
    try:
        report = scn.algebra.verify()
    except ValueError as exc:
        report = None
        failures.append({"axiom": "atoms", "witnesses": [], "detail": str(exc)})
    if report is not None:
        failures.extend(report.to_json())
    for k, b in enumerate(scn.chain):
        rep = b.verify()
        for f in rep.to_json():
            f["detail"] = f"chain level {k}: {f['detail']}"
            failures.append(f)
        if k + 1 < len(scn.chain) and not all(a in scn.chain[k + 1] for a in b.atoms):
            failures.append({"axiom": "chain", "witnesses": [], "detail": f"level {k} not nested"})
    checks = {}
    if not failures:
        checks = _invariant_suite(scn, args.tol, args.seed)
        for name, ok in checks.items():
            if not ok:
                failures.append({"axiom": name, "witnesses": [], "detail": "invariant failed"})
    payload = {"passed": not failures, "failures": failures, "checks": checks,
               "n_atoms": scn.algebra.n_atoms, "n_outcomes": scn.space.n}
    return _emit(args, payload), 0 if not failures else 1


def cmd_spectral(args, scn):
    f = _rv(scn, args.rv)
    res = resolve(scn.algebra, tol=args.tol)
    mu = res.spectral_measure(f)
    rows = []
    for m in range(len(scn.algebra)):
        if args.all or mu.mass[m] > args.tol:
            rows.append((scn.element_name(m), m, int(res.counting[m]), float(mu.mass[m])))
    comps = chaos_decompose(res, f)
    chaos = {str(k): c.norm2() for k, c in enumerate(comps)}
    payload = {"rv": args.rv,
               "points": [{"element": e, "mask": m, "K": k, "mass": v} for e, m, k, v in rows],
               "chaos_norms": chaos, "total": mu.total(), "second_moment": f.norm2()}
    return _emit(args, payload, rows, ("element", "atoms_below", "K", "mass")), 0


def cmd_chaos(args, scn):
    f = _rv(scn, args.rv)
    res = resolve(scn.algebra, tol=args.tol)
    comps = chaos_decompose(res, f)
    dims = [int(res.dims[res.counting == k].sum()) for k in range(len(comps))]
    rows = [(k, dims[k], c.norm2()) for k, c in enumerate(comps)]
    payload = {"rv": args.rv, "chaos": [{"k": k, "dim": d, "norm2": v} for k, d, v in rows]}
    return _emit(args, payload, rows, ("k", "dim", "norm2")), 0


def cmd_influence(args, scn):
    f = _rv(scn, args.rv)
    B = scn.algebra
    masks = [_element(scn, args.element)] if args.element else list(range(1, len(B)))
    rows = [(scn.element_name(m), influence(B, m, f), sqrt_influence(B, m, f)) for m in masks]
    J, H1 = functionals_JH1(B, f)
    payload = {"rv": args.rv, "J": J, "H1": H1,
               "influences": [{"element": e, "influence": i, "sqrt_influence": s}
                              for e, i, s in rows]}
    return _emit(args, payload, rows, ("element", "influence", "sqrt_influence")), 0


def cmd_semigroup(args, scn):
    f = _rv(scn, args.rv)
    res = resolve(scn.algebra, tol=args.tol)
    try:
        grid = [_parse_t(t) for t in args.grid.split(",")]
    except ValueError as exc:
        raise CliError(f"bad grid: {exc}", 2) from None
    rows = [(t, noise_operator(res, t).form(f)) for t in grid]
    payload = {"rv": args.rv, "curve": [{"t": _finite(t), "value": v} for t, v in rows]}
    return _emit(args, payload, rows, ("t", "value")), 0


def cmd_joining(args, scn):
    f = _rv(scn, args.rv)
    B = scn.algebra
    if args.partition:
        parts = [_element(scn, p) for p in args.partition.split("|")]
    else:
        parts = [1 << i for i in range(B.n_atoms)]
    rho = _floats(args.rho)
    if len(rho) == 1:
        rho = rho * len(parts)
    res = resolve(B, tol=args.tol)
    try:
        u_form = generalized_operator(res, parts, rho).form(f)
        mu_form = res.spectral_measure(f).integrate(generalized_multiplier(B, parts, rho))
        payload = {"rho": rho, "partition": [scn.element_name(p) for p in parts],
                   "u_rho_form": u_form, "mu_form": mu_form}
        if args.samples:
            est = joining_monte_carlo(B, parts, rho, f, n_samples=args.samples, seed=args.seed)
            payload.update(correlation=est.value, stderr=est.stderr, mode="monte_carlo")
        else:
            payload.update(correlation=self_joining(B, parts, rho).correlation(f), mode="exact")
    except ValueError as exc:
        raise CliError(str(exc), 2) from None
    return _emit(args, payload), 0


def cmd_bonferroni(args, scn):
    masks = [_element(scn, t.strip()) for t in args.tuple.split(",")]
    try:
        rep = bonferroni_operator(scn.algebra, masks, tol=args.tol)
    except ValueError as exc:
        raise CliError(str(exc), 2) from None
    payload = rep.to_dict()
    payload["tuple"] = [scn.element_name(m) for m in masks]
    return _emit(args, payload), 0 if rep.holds else 1


def cmd_dominance(args, scn):
    try:
        result = fosd_compare(_floats(args.p))
    except ValueError as exc:
        raise CliError(str(exc), 2) from None
    payload = result.to_dict()
    rows = [(k, a, b) for k, (a, b) in enumerate(zip(result.pmf.cdf(), result.dominated_pmf.cdf()))]
    return _emit(args, payload, rows, ("k", "cdf", "dominated_cdf")), 0 if result.passed else 1


def cmd_explore(args, scn):
    B = scn.algebra
    chain = list(scn.chain) or [B]
    res = resolve(B, tol=args.tol)
    if args.rv:
        nu = spectral_independence_from_integral(res, _rv(scn, args.rv))
    else:
        nu, _ = equivalent_spectral_independence(B)
    expl = exploration(B, chain, nu)
    labels = expl.labels
    gamma_ok = bool(np.array_equal(labels.gamma_size(len(chain) - 1), res.counting))
    levels = []
    for k in range(len(chain)):
        levels.append({
            "level": k,
            "n_atoms": len(labels.levels[k]),
            "law": expl.level_laws[k].masses.tolist(),
            "independence_defect": level_independence_defect(labels, nu, k),
            "exclusion_product": level_exclusion_product(labels, nu, k),
        })
    payload = {"p0": nu.p0, "spectral_independence": spectral_independence_check(B, nu, args.tol),
               "monotone_exclusion": labels.monotone_exclusion(), "top_level_matches_K": gamma_ok,
               "levels": levels}
    ok = payload["monotone_exclusion"] and gamma_ok
    return _emit(args, payload), 0 if ok else 1


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def _verify_raw_elements(args) -> tuple[str, int] | None:
    """Exhaustive axiom check when the scenario lists its elements explicitly."""
    try:
        doc = json.loads(Path(args.scenario).read_text())
    except (OSError, json.JSONDecodeError):
        return None
    names = doc.get("algebra", {}).get("elements") if isinstance(doc, dict) else None
    if not names:
        return None
    try:
        scn = jsonio.scenario_from_dict(doc, strict=False, tol=args.tol)
        fields = [scn.named_fields[n] for n in names]
    except (jsonio.ScenarioLoadError, KeyError) as exc:
        raise CliError(f"malformed scenario: {exc}", 2) from None
    report = verify_axioms(scn.space, fields)
    payload = {"passed": report.passed, "failures": report.to_json(), "checks": {},
               "n_elements": len(set(fields)), "n_outcomes": scn.space.n}
    return _emit(args, payload), 0 if report.passed else 1


def _parse(argv):
    return build_parser().parse_known_args(argv)


def run(argv: Sequence[str] | None = None) -> tuple[str, int]:
    args, extras = _parse(argv)
    if not 0 < args.tol < 1e-3:
        raise CliError("--tol must lie in (0, 1e-3)", 2)
    if not -(2 ** 63) <= args.seed < 2 ** 64:
        raise CliError("--seed must be a 64-bit integer", 2)
    params = _gen_params(args, extras)
    if args.command == "dominance":
        return HANDLERS["dominance"](args, None)
    if args.command == "verify" and args.scenario:
        raw = _verify_raw_elements(args)
        if raw is not None:
            return raw
    scn = _load(args, params, strict=args.command != "verify")
    return HANDLERS[args.command](args, scn)


def main(argv: Sequence[str] | None = None) -> int:
    args, _ = _parse(argv)
    try:
        text, code = run(argv)
    except CliError as exc:
        print(f"noise: {exc}", file=sys.stderr)
        return exc.code
    except (ArithmeticError, MemoryError) as exc:
        print(f"noise: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
