"""Command-line front end: analyze, check, verify.

Input is one JSON file:

    {"places": [{"case": "L", "signatures": [[1, 2], [2, 1]]}],
     "weight": [[{"kappa": [3], "lambda": [1, 1]}, {"kappa": [2, 2], "lambda": [0]}]],
     "valuations": {"0/1": "1/2", "0/2": "0"}}

Weight blocks and signatures are listed in the input order of the embeddings;
valuation keys are "place/k" with a 0-based place and a 1-based canonical index.
Exit codes: 0 pass, 1 some condition fails, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import continuation, datum as dm, degree_calculus as dc, dieudonne, hecke
from .report import dumps, frac, parse_frac


class ParseError(ValueError):
    def __init__(self, where: str, msg: str):
        self.where = where
        super().__init__(f"{where}: {msg}")


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: str
    grid: int = 4
    prime: int = 2
    trunc: int | None = None
    eps: Fraction = Fraction(1, 100)
    alpha: Fraction = Fraction(1, 20)
    format: str = "json"
    seed: int = 0
    samples: int = 1000
    relaxed: bool = False

    def __post_init__(self):
        if self.grid < 2:
            raise ParseError("--grid", "the grid denominator must be at least 2")
        if not 0 < self.eps < Fraction(1, 2):
            raise ParseError("--eps", "eps must lie in (0, 1/2)")
        if not 0 < self.alpha < 1:
            raise ParseError("--alpha", "alpha must lie in (0, 1)")
        if self.prime < 2 or any(self.prime % q == 0 for q in range(2, int(self.prime ** 0.5) + 1)):
            raise ParseError("--prime", f"{self.prime} is not prime")
        if self.trunc is not None and self.trunc < 1:
            raise ParseError("--trunc", "truncation must be positive")


# ---------------------------------------------------------------- input


@dataclass(frozen=True)
class Problem:
    datum: dm.GlobalDatum
    weight: dm.Weight | None
    valuations: dict | None


def _int_list(x, where: str) -> list[int]:
    if not isinstance(x, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in x):
        raise ParseError(where, "expected a list of integers")
    return x


def parse_problem(raw) -> Problem:
    if not isinstance(raw, dict):
        raise ParseError("$", "expected a JSON object")
    places_raw = raw.get("places")
    if not isinstance(places_raw, list) or not places_raw:
        raise ParseError("$.places", "expected a nonempty list of places")
    places = []
    for n, p in enumerate(places_raw):
        where = f"$.places[{n}]"
        if not isinstance(p, dict):
            raise ParseError(where, "expected an object")
        sigs = p.get("signatures")
        if not isinstance(sigs, list) or not sigs:
            raise ParseError(where + ".signatures", "expected a nonempty list of [a, b] pairs")
        pairs = []
        for m, s in enumerate(sigs):
            s = _int_list(s, f"{where}.signatures[{m}]")
            if len(s) != 2:
                raise ParseError(f"{where}.signatures[{m}]", "expected [a, b]")
            pairs.append(tuple(s))
        if "f" in p and p["f"] != len(pairs):
            raise ParseError(where + ".f", f"f = {p['f']} but {len(pairs)} signatures given")
        try:
            places.append(dm.PlaceDatum(p.get("case"), tuple(pairs)))
        except dm.DatumError as e:
            raise ParseError(where, str(e)) from e
    try:
        datum = dm.GlobalDatum(tuple(places))
    except dm.DatumError as e:
        raise ParseError("$.places", str(e)) from e

    weight = None
    if "weight" in raw:
        w = raw["weight"]
        if not isinstance(w, list) or len(w) != len(places):
            raise ParseError("$.weight", "expected one list of blocks per place")
        blocks = []
        for n, blk in enumerate(w):
            if not isinstance(blk, list):
                raise ParseError(f"$.weight[{n}]", "expected a list of {kappa, lambda} blocks")
            row = []
            for m, b in enumerate(blk):
                where = f"$.weight[{n}][{m}]"
                if not isinstance(b, dict):
                    raise ParseError(where, "expected an object with kappa and lambda")
                row.append((_int_list(b.get("kappa"), where + ".kappa"),
                            _int_list(b.get("lambda"), where + ".lambda")))
            blocks.append(row)
        try:
            weight = dm.Weight.from_input(datum, blocks)
        except dm.DatumError as e:
            raise ParseError("$.weight", str(e)) from e

    valuations = None
    if "valuations" in raw:
        v = raw["valuations"]
        if not isinstance(v, dict):
            raise ParseError("$.valuations", "expected an object keyed by 'place/k'")
        valuations = {}
        for key, val in v.items():
            where = f"$.valuations[{key!r}]"
            try:
                p_idx, k = (int(x) for x in key.split("/"))
            except ValueError:
                raise ParseError(where, "keys are 'place/k'") from None
            try:
                valuations[(p_idx, k)] = parse_frac(val)
            except (ValueError, ZeroDivisionError):
                raise ParseError(where, f"not a rational: {val!r}") from None
    return Problem(datum, weight, valuations)


def load_problem(path: str) -> Problem:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ParseError(path, e.strerror or str(e)) from e
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}:{e.lineno}:{e.colno}", e.msg) from e
    return parse_problem(raw)


# ---------------------------------------------------------------- analyze


def analyze_place(place: dm.PlaceDatum) -> dict:
    heights = dm.canonical_heights(place)
    parts = {}
    for k in range(1, len(heights) + 1):
        pt = dm.partitions(place, {}, k)
        parts[str(k)] = {"S1": sorted(pt.s1), "S2": sorted(pt.s2)}
    out = {
        "case": place.case,
        "f": place.f,
        "signatures": [list(s) for s in place.signatures],
        "input_order": list(place.order),
        "heights": heights,
        "max_degrees": dm.max_degrees(place),
        "decomposition": [{"epsilon": list(e), "multiplicity": m}
                          for e, m in dm.mu_ordinary_decomposition(place)],
        "ordinary": dm.ordinary_exists(place),
        "sigma_classes": [sorted(c) for c in dm.sigma_classes(place)],
        "partitions": parts,
    }
    if place.case == "U":
        out["alpha_sequence"] = dm.alpha_sequence(place)
    return out


def cmd_analyze(cfg: RunConfig, prob: Problem) -> tuple[dict, int]:
    rep = dm.validate(prob.datum)
    return {"command": "analyze",
            "places": [analyze_place(p) for p in prob.datum.places],
            "warnings": list(rep.warnings)}, 0


# ---------------------------------------------------------------- check


def cmd_check(cfg: RunConfig, prob: Problem) -> tuple[dict, int]:
    if prob.weight is None:
        raise ParseError("$.weight", "the check command needs a weight")
    if prob.valuations is None:
        raise ParseError("$.valuations", "the check command needs valuations")
    report = hecke.classicality_check(prob.datum, prob.weight, prob.valuations)
    sched = continuation.extension_schedule(prob.datum, prob.weight, prob.valuations,
                                            cfg.eps, raise_on_failure=False)
    places = []
    for p_idx, place in enumerate(prob.datum.places):
        conds = []
        for c in report.conditions:
            if c.place != p_idx:
                continue
            row = {"k": c.k, "height": c.height, "n": c.n, "v_alpha": frac(c.v_alpha),
                   "lhs": frac(c.n + c.v_alpha), "bound": c.bound, "passed": c.passed}
            if c.closed_form is not None:
                row["closed_form"] = {"label": c.closed_form[0], "value": c.closed_form[1]}
            conds.append(row)
        kl = [(prob.weight.kappa(p_idx, t), prob.weight.lam(p_idx, t)) for t in range(place.f)]
        steps = []
        for s in sched.for_place(p_idx):
            e = hecke.bad_norm_exponent(place, s.k, kl, s.v_alpha, cfg.eps, cfg.alpha,
                                        dict(s.eps_choices))
            steps.append({"k": s.k, "height": s.height, "K": s.K, "S2": list(s.s2),
                          "eps_choices": {str(k): v for k, v in s.eps_choices},
                          "lhs": frac(s.lhs), "rhs": frac(s.rhs), "admissible": s.admissible,
                          "eps_max": None if s.eps_max is None else frac(s.eps_max),
                          "bad_exponent": frac(e),
                          "series_convergent": continuation.series_valuations(e, 0).convergent})
        places.append({"place": p_idx, "case": place.case, "conditions": conds, "schedule": steps})
    failing = [f"place {c.place} k={c.k}" for c in report.conditions if not c.passed]
    out = {"command": "check", "eps": frac(cfg.eps), "alpha": frac(cfg.alpha), "places": places,
           "verdict": report.verdict, "failing": failing,
           "schedule_ok": sched.ok, "schedule_note": sched.note}
    return out, 0 if report.verdict else 1


# ---------------------------------------------------------------- verify


def _search_row(res) -> dict:
    row = {"claim": res.claim, "found": res.found}
    if res.found:
        row["kind"] = res.kind
        row["witness"] = dc.config_to_json(res.config)
    elif res.vacuous:
        row["vacuous"] = True
    return row


def _searches(place: dm.PlaceDatum, D: int, relaxed: bool) -> list[dict]:
    s = len(dm.canonical_heights(place))
    rows = []
    if place.case == "L":
        for i in range(1, s + 1):
            rows.append(_search_row(dc.search_uniqueness_L(place, i, D, relaxed)))
            for j in range(i + 1, s + 1):
                rows.append(_search_row(dc.search_inclusion_L(place, i, j, D, relaxed)))
    else:
        for i in range(1, s + 1):
            rep = dc.search_uniqueness_U(place, i, D, relaxed)
            rows.append(_search_row(rep.uniqueness))
            rows.append(_search_row(rep.isotropy))
            rows.append({"claim": f"dual bound U i={i}", "found": not rep.dual_bound_implied,
                         "bound": None if rep.dual_bound is None else frac(rep.dual_bound)})
    return rows


def verify_place(place: dm.PlaceDatum, cfg: RunConfig) -> dict:
    D = cfg.grid
    checks: dict = {}

    dd = dieudonne.canonical_subgroup_checks(place, cfg.prime, cfg.trunc)
    checks["dieudonne"] = {
        "passed": dd["ok"],
        "kernels": [{"i": r.index, "order_log": r.order_log,
                     "partial_degrees": list(r.partial_degrees)} for r in dd["reports"]],
    }

    rows = _searches(place, D, False)
    checks["searches"] = {"passed": not any(r["found"] for r in rows), "results": rows}
    if cfg.relaxed:
        rel = [r for r in _searches(place, D, True) if r["found"]]
        checks["relaxed"] = {"informational": True, "witnesses": rel}

    tech = []
    for k in range(1, len(dm.canonical_heights(place)) + 1):
        tech.append(_search_row(dc.check_technical(place, k, cfg.eps, D)))
    checks["technical"] = {"passed": not any(r["found"] for r in tech), "results": tech}

    cap = []
    for k in range(1, len(dm.canonical_heights(place)) + 1):
        hit = hecke.search_l_sigma_violation(place, k, cfg.eps, cfg.alpha, D)
        cap.append({"k": k, "found": hit is not None})
    checks["s1_cap"] = {"passed": not any(r["found"] for r in cap), "results": cap}

    samp = []
    for i in range(1, place.flag_length + 1):
        r = hecke.sample_report(hecke.sample_transitions(place, i, cfg.samples, D, cfg.seed + i))
        samp.append({"i": i, "count": r.count, "monotone_failures": r.monotone_failures,
                     "equalities": r.equalities, "equality_failures": r.equality_failures,
                     "passed": r.ok})
    checks["sampling"] = {"passed": all(r["passed"] for r in samp), "operators": samp}

    top = hecke.FlagState.maximal(place, 2)
    fixed = []
    for i in range(1, place.flag_length + 1):
        succ = [tr.successor for tr in hecke.enumerate_transitions(top, i)]
        fixed.append({"i": i, "choices": len(succ),
                      "passed": bool(succ) and all(s == top for s in succ)})
    checks["fixed_point"] = {"passed": all(r["passed"] for r in fixed), "operators": fixed}

    contr = []
    for k in range(1, len(dm.canonical_heights(place)) + 1):
        try:
            res = continuation.contraction_steps(place, k, Fraction(1, 2), D, cfg.eps)
            contr.append({"k": k, "N": res.N, "trajectory": [frac(x) for x in res.trajectory],
                          "passed": True})
        except continuation.StuckState as e:
            contr.append({"k": k, "stuck_at": frac(e.degree), "passed": False})
    checks["contraction"] = {"passed": all(r["passed"] for r in contr), "gamma": "1/2",
                             "indices": contr}
    return {"case": place.case, "signatures": [list(s) for s in place.signatures],
            "checks": checks,
            "passed": all(c["passed"] for c in checks.values() if "passed" in c)}


def cmd_verify(cfg: RunConfig, prob: Problem) -> tuple[dict, int]:
    places = [verify_place(p, cfg) for p in prob.datum.places]
    trees = [{"N": N, "classes": list(t.class_names), "leaves": t.leaf_count,
              "identity": t.identity_holds}
             for N in range(1, 6) for t in [continuation.decompo_expand(N)]]
    ok = all(p["passed"] for p in places) and all(t["identity"] for t in trees)
    return {"command": "verify", "grid": cfg.grid, "prime": cfg.prime, "seed": cfg.seed,
            "places": places, "decompo": trees, "passed": ok}, 0 if ok else 1


# ---------------------------------------------------------------- text output


def _is_flat(v) -> bool:
    return isinstance(v, list) and all(not isinstance(x, (dict, list)) or _is_flat(x) for x in v)


def _text(obj, indent: int = 0) -> list[str]:
    pad = "  " * indent
    lines = []
    if isinstance(obj, dict):
        for k in sorted(obj):
            v = obj[k]
            if (isinstance(v, dict) and v) or (isinstance(v, list) and not _is_flat(v)):
                lines.append(f"{pad}{k}:")
                lines += _text(v, indent + 1)
            else:
                lines.append(f"{pad}{k}: {_scalar(v)}")
    else:
        for v in obj:
            sub = _text(v, indent + 1) if isinstance(v, (dict, list)) else [_scalar(v)]
            lines.append(f"{pad}- " + sub[0].lstrip())
            lines += sub[1:]
    return lines


def _scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "-"
    if isinstance(v, list):
        return "[" + ", ".join(_scalar(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{}"
    return str(v)


def render(report: dict, fmt: str, code: int = 0) -> str:
    if fmt == "json":
        return dumps(report)
    return "\n".join(_text(report) + [f"result: {'PASS' if code == 0 else 'FAIL'}"])


# ---------------------------------------------------------------- main


def _rational(s: str) -> Fraction:
    try:
        return parse_frac(s)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational: {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="muord", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=["analyze", "check", "verify"])
    ap.add_argument("--input", required=True, metavar="PATH")
    ap.add_argument("--grid", type=int, default=4, metavar="D")
    ap.add_argument("--prime", type=int, default=2, metavar="P")
    ap.add_argument("--trunc", type=int, default=None, metavar="N")
    ap.add_argument("--eps", type=_rational, default=Fraction(1, 100), metavar="Q")
    ap.add_argument("--alpha", type=_rational, default=Fraction(1, 20), metavar="Q")
    ap.add_argument("--format", choices=["json", "text"], default="json")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--samples", type=int, default=1000,
                    help="sampled transitions per operator in verify")
    ap.add_argument("--relaxed", action="store_true",
                    help="also list witnesses under relaxed thresholds (informational)")
    return ap


COMMANDS = {"analyze": cmd_analyze, "check": cmd_check, "verify": cmd_verify}


def run(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        ns = build_parser().parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    try:
        cfg = RunConfig(ns.command, ns.input, ns.grid, ns.prime, ns.trunc, ns.eps, ns.alpha,
                        ns.format, ns.seed, ns.samples, ns.relaxed)
        prob = load_problem(cfg.input)
        report, code = COMMANDS[cfg.command](cfg, prob)
    except (ParseError, dm.DatumError, hecke.MissingValuation,
            dieudonne.TruncationTooSmall) as e:
        msg = e.args[0] if isinstance(e, KeyError) else str(e)
        print(f"error: {msg}", file=err)
        return 2
    print(render(report, cfg.format, code), file=out)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
