"""Command-line front end.

Subcommands cover alphabet enumeration, partition/pressure brackets, Bowen
dimension brackets, dimension-spectrum interval certificates, greedy
subsystem construction, dimension gap bounds, transfer-operator lower
bounds, and an end-to-end `reproduce` pipeline that replays the recorded
certification sequence and reports which claims hold.

Exit codes: 0 success (certified where certification was requested), 1
usage or configuration error, 2 counterexample or inconclusive where a
certificate was requested, 3 budget exhaustion. Reports are JSON on stdout
(or --out); CSV output exists only for per-letter margin tables.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from typing import Optional, Tuple

from . import __version__
from .alphabet import (
    GaussianLetter,
    LetterSet,
    box_block,
    enumerate_letters,
    initial_block,
    parse_letter_set,
    tilde_block,
)
from .systems import (
    COMPLEX_CF,
    LINEARIZED_CF,
    REAL_CF,
    SystemDescriptor,
    deriv_norm,
    deriv_norm_inf,
)
from .pressure import (
    BowenBracket,
    BudgetError,
    DEFAULT_WORD_BUDGET,
    bowen_bisect,
    partition_function_with_slack,
    pressure_bracket,
)
from .spectrum import (
    CertificationError,
    ConstructionError,
    GapBoundInput,
    certificate_letters,
    certify_interval,
    chi_lower_default,
    composite_interval,
    construct_subsystem,
    derive_cap_evidence,
    dimension_gap_bound,
    run_reference_ladder,
)
from .transfer import certify_dim_lower

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INCONCLUSIVE = 2
EXIT_BUDGET = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


def _system_arg(s: str) -> SystemDescriptor:
    if s == "ccf":
        return COMPLEX_CF
    if s == "rcf":
        return REAL_CF
    if s == "lccf":
        return LINEARIZED_CF
    if s.startswith("file:"):
        with open(s[5:], "r", encoding="utf-8") as fh:
            return SystemDescriptor.from_json(fh.read())
    raise ValueError(f"unknown system {s!r}; use ccf, rcf, lccf, or file:<path>")


def _subset_arg(s: str) -> LetterSet:
    if s.startswith("file:"):
        with open(s[5:], "r", encoding="utf-8") as fh:
            return parse_letter_set(fh.read())
    if s.startswith("box:"):
        return box_block(int(s[4:]))
    return parse_letter_set(s)


def _box_arg(s: str) -> Tuple[int, int]:
    try:
        w, h = s.lower().split("x")
        return (int(w), int(h))
    except Exception as exc:
        raise ValueError(f"box must look like 128x256, got {s!r}") from exc


def _apply_threads(threads: Optional[int]) -> int:
    env = os.environ.get("THERMO_SPECTRUM_THREADS")
    n = int(env) if env else (threads if threads else 1)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(n))
    return n


def _report(command: str, inputs: dict, results: dict, verdicts: list,
            slack_ledger: list, t0: float) -> dict:
    return {
        "command": command,
        "version": __version__,
        "inputs": inputs,
        "results": results,
        "verdicts": verdicts,
        "slack_ledger": slack_ledger,
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }


def _emit(report: dict, args, csv_rows: Optional[list] = None,
          csv_header: Optional[list] = None) -> None:
    fmt = getattr(args, "format", "json")
    if fmt == "csv":
        if csv_rows is None:
            raise ValueError(
                "csv output is limited to per-letter margin tables; this "
                "command only emits json")
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(csv_header)
        w.writerows(csv_rows)
        text = buf.getvalue()
    else:
        text = json.dumps(report, indent=2, default=str) + "\n"
    out = getattr(args, "out", None)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands

def cmd_enumerate(args) -> int:
    t0 = time.perf_counter()
    system = _system_arg(args.system)
    letters = enumerate_letters(args.count)
    rows = []
    for k, e in enumerate(letters, start=1):
        rows.append({
            "rank": k, "letter": str(e), "m": e.m, "n": e.n, "S": e.s_key,
            "sup_norm": deriv_norm(system, e),
            "inf_norm": deriv_norm_inf(system, e),
        })
    report = _report("enumerate", {"system": args.system, "count": args.count},
                     {"letters": rows}, [], [], t0)
    _emit(report, args)
    return EXIT_OK


def cmd_pressure(args) -> int:
    t0 = time.perf_counter()
    system = _system_arg(args.system)
    subset = _subset_arg(args.subset)
    budget = args.budget_words or DEFAULT_WORD_BUDGET
    z, z_slack = partition_function_with_slack(
        system, subset, args.length, args.t, norm_form=args.form,
        budget=budget)
    bracket = pressure_bracket(
        system, subset, args.length, args.t,
        norm_form="pair" if args.form == "inf" else "sup", budget=budget)
    verdicts = []
    if args.bound is not None:
        margin = args.bound - z
        verdicts.append({
            "claim": f"Z_{args.length}({args.subset}, {args.t}) < {args.bound}",
            "ok": z + z_slack < args.bound,
            "margin": margin, "slack": z_slack, "method": bracket.method,
        })
    report = _report(
        "pressure",
        {"system": args.system, "subset": args.subset, "n": args.length,
         "t": args.t, "form": args.form, "bound": args.bound},
        {"z_value": z,
         "pressure_lower": bracket.lower, "pressure_upper": bracket.upper,
         "method": bracket.method, "norm_form": bracket.norm_form},
        verdicts,
        [{"source": f"partition sum Z_{args.length}", "value": z_slack},
         {"source": "pressure bracket", "value": bracket.slack}],
        t0)
    _emit(report, args)
    if verdicts and not all(v["ok"] for v in verdicts):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def cmd_dimension(args) -> int:
    t0 = time.perf_counter()
    system = _system_arg(args.system)
    subset = _subset_arg(args.subset) if args.subset else None
    if subset is None and system.kind in ("complex_cf", "real_cf",
                                          "linearized_cf"):
        raise ValueError("infinite-alphabet systems need --subset")
    budget = args.budget_words or DEFAULT_WORD_BUDGET
    br = bowen_bisect(system, subset, args.t_lo, args.t_hi, tol=args.tol,
                      n=args.length, method=args.method, budget=budget)
    report = _report(
        "dimension",
        {"system": args.system, "subset": args.subset, "tol": args.tol,
         "method": args.method, "n": args.length},
        {"h_lower": br.h_lower, "h_upper": br.h_upper,
         "iterations": br.iterations, "sufficient_n": br.sufficient_n},
        [{"claim": f"h({args.subset or 'full'}) in "
                   f"[{br.h_lower:.12g}, {br.h_upper:.12g}]",
          "ok": True, "margin": br.h_upper - br.h_lower, "slack": br.slack,
          "method": args.method}],
        [{"source": "pressure curve slack", "value": br.slack}],
        t0)
    _emit(report, args)
    return EXIT_OK


def cmd_certify_spectrum(args) -> int:
    t0 = time.perf_counter()
    system = _system_arg(args.system)
    if (args.d is None) == (args.block is None):
        raise ValueError("give exactly one of --d or --block")
    if args.d is not None:
        d = args.d
    else:
        spec_str = args.block.strip()
        if spec_str.startswith("I:"):
            d = int(spec_str[2:])
        elif spec_str.startswith("T:"):
            _, d = tilde_block(int(spec_str[2:]))
        else:
            raise ValueError(
                "--block must be an initial block I:k or a tilde block T:k")
    excluded = _subset_arg(args.exclude) if args.exclude else None
    box = (256, 512) if args.full_box else args.box
    try:
        cert = certify_interval(system, args.t_low, args.t_high, d, box=box,
                                seed_r=args.seed_box, excluded=excluded,
                                depth=args.depth)
    except CertificationError as exc:
        report = _report(
            "certify-spectrum",
            {"system": args.system, "t_low": args.t_low, "t_high": args.t_high,
             "d": d, "box": list(box), "seed_box": args.seed_box,
             "exclude": args.exclude},
            {"error": {"stage": exc.stage, "letter": exc.letter,
                       "margin": exc.margin, "message": str(exc)}},
            [{"claim": f"[{args.t_low}, {args.t_high}] within the spectrum",
              "ok": False, "margin": exc.margin, "slack": 0.0,
              "method": "interval_certificate"}],
            [], t0)
        _emit(report, args)
        return EXIT_INCONCLUSIVE
    verdict = {
        "claim": f"[{cert.t_low}, {cert.effective_top:.6g}] within the spectrum",
        "ok": True, "margin": cert.min_margin, "slack": 0.0,
        "method": "interval_certificate",
    }
    report = _report(
        "certify-spectrum",
        {"system": args.system, "t_low": args.t_low, "t_high": args.t_high,
         "d": d, "box": list(box), "seed_box": args.seed_box,
         "exclude": args.exclude},
        {"certificate": cert.to_json()},
        [verdict],
        [{"source": "prefix sum rounding allowance (relative)",
          "value": 64.0 * sys.float_info.epsilon}],
        t0)
    csv_rows = None
    csv_header = None
    if args.format == "csv":
        letters = certificate_letters(cert, excluded)
        csv_header = ["letter", "m", "n", "margin"]
        csv_rows = [[str(e), e.m, e.n, float(g)]
                    for e, g in zip(letters, cert.margins)]
    _emit(report, args, csv_rows=csv_rows, csv_header=csv_header)
    return EXIT_OK


def cmd_construct(args) -> int:
    t0 = time.perf_counter()
    system = _system_arg(args.system)
    try:
        letters, bracket = construct_subsystem(system, args.target,
                                               args.max_letters)
    except ConstructionError as exc:
        report = _report(
            "construct", {"system": args.system, "target": args.target,
                          "max_letters": args.max_letters},
            {"error": str(exc), "partial": [str(e) for e in exc.partial]},
            [{"claim": f"subsystem with dimension <= {args.target}",
              "ok": False, "margin": 0.0, "slack": 0.0, "method": "greedy"}],
            [], t0)
        _emit(report, args)
        return EXIT_INCONCLUSIVE
    if isinstance(letters, LetterSet):
        shown = [str(e) for e in letters]
    else:
        shown = [str(e) for e in letters]
    report = _report(
        "construct", {"system": args.system, "target": args.target,
                      "max_letters": args.max_letters},
        {"letters": shown[:200], "n_letters": len(shown),
         "h_bracket": [bracket[0], bracket[1]]},
        [{"claim": f"dim(J_F) in [{bracket[0]:.6g}, {bracket[1]:.6g}]",
          "ok": True, "margin": bracket[1] - bracket[0], "slack": 0.0,
          "method": "greedy"}],
        [], t0)
    _emit(report, args)
    return EXIT_OK


def cmd_gap_bound(args) -> int:
    t0 = time.perf_counter()
    system = _system_arg(args.system)
    block = _subset_arg(args.block)
    chi = args.chi if args.chi is not None else chi_lower_default(system)
    if args.t_eval is not None:
        h_bracket = BowenBracket(F=args.block, h_lower=args.t_eval,
                                 h_upper=args.t_eval, iterations=0)
    else:
        method = "markov" if len(block) <= 400 else "auto"
        h_bracket = bowen_bisect(system, block, 0.05, 2.4, tol=1e-4,
                                 n=2, method=method)
    gbi = GapBoundInput(F=block, h_F=h_bracket, chi_lower=chi)
    bound = dimension_gap_bound(system, gbi, t_eval=args.t_eval,
                                seed_r=args.seed_box)
    report = _report(
        "gap-bound",
        {"system": args.system, "block": args.block, "chi": chi,
         "t_eval": args.t_eval, "seed_box": args.seed_box},
        {"gap_upper_bound": bound,
         "h_bracket": [h_bracket.h_lower, h_bracket.h_upper]},
        [{"claim": f"dim(J) - dim(J_F) <= {bound:.6g}", "ok": math.isfinite(bound),
          "margin": bound, "slack": 0.0, "method": "tail_sum_gap"}],
        [], t0)
    _emit(report, args)
    return EXIT_OK if math.isfinite(bound) else EXIT_INCONCLUSIVE


def cmd_lower_bound(args) -> int:
    t0 = time.perf_counter()
    system = _system_arg(args.system)
    exclude = _subset_arg(args.exclude) if args.exclude else None
    cert = certify_dim_lower(system, args.t, p=args.p,
                             letter_cut=args.letters, iters=args.iters,
                             mode=args.mode, exclude=exclude)
    report = _report(
        "lower-bound",
        {"system": args.system, "t": args.t, "p": args.p,
         "letters": args.letters, "iters": args.iters, "mode": args.mode,
         "exclude": args.exclude},
        cert.to_json(),
        [{"claim": f"dimension >= {args.t}", "ok": cert.certified,
          "margin": cert.lower_bound - 1.0, "slack": cert.slack,
          "method": f"transfer_{cert.mode}"}],
        [{"source": "collatz-wielandt float slack", "value": cert.slack}],
        t0)
    _emit(report, args)
    return EXIT_OK if cert.certified else EXIT_INCONCLUSIVE


def _interval_covered(target: Tuple[float, float], spans: list) -> bool:
    lo, hi = target
    cur = lo
    for a, b in sorted(spans):
        if a > cur + 1e-12:
            break
        cur = max(cur, b)
        if cur >= hi - 1e-12:
            return True
    return cur >= hi - 1e-12


def cmd_reproduce(args) -> int:
    t0 = time.perf_counter()
    system = COMPLEX_CF
    verdicts = []
    ledger = []
    results = {}

    # stage 1: the four recorded two-letter partition inequalities
    t2, _ = tilde_block(2)
    t9, _ = tilde_block(9)
    t10, _ = tilde_block(10)
    t16, _ = tilde_block(16)
    t9_minus_t2 = LetterSet.explicit(set(t9) - set(t2))
    z2_checks = [
        ("Z2(T:2, 0.9) < 0.93", t2, 0.9, 0.93),
        ("Z2(T:9 minus T:2, 1.11) < 0.97", t9_minus_t2, 1.11, 0.97),
        ("Z2(T:10, 1.467) < 0.989", t10, 1.467, 0.989),
        ("Z2(T:16, 1.544) < 0.997", t16, 1.544, 0.997),
    ]
    stage1 = []
    for claim, block, t, bound in z2_checks:
        z, slack = partition_function_with_slack(system, block, 2, t,
                                                 norm_form="inf")
        ok = z + slack < bound
        stage1.append({"claim": claim, "value": z, "ok": ok})
        verdicts.append({"claim": claim, "ok": ok, "margin": bound - z,
                         "slack": slack, "method": "inf_norm_partition"})
        ledger.append({"source": claim, "value": slack})
    results["partition_inequalities"] = stage1

    # stage 2: the recorded interval certificates (issued as printed; a
    # failure is recorded with its diagnosis and later stages still run)
    box = (256, 512) if args.full_box else (128, 256)
    printed_runs = [
        ("[1.544, 1.885] with d=28", 1.544, 1.885, 28, None),
        ("[1.467, 1.545] with d=17", 1.467, 1.545, 17, None),
        ("[0.9, 1.12] with d=3", 0.9, 1.12, 3, None),
        ("[1.11, 1.5] on the complement of T:2, block T:9 minus T:2",
         1.11, 1.5, 15, initial_block(3)),
    ]
    stage2 = []
    for claim, t_low, t_high, d, excl in printed_runs:
        try:
            cert = certify_interval(system, t_low, t_high, d, box=box,
                                    seed_r=args.seed_box, excluded=excl)
            stage2.append({"claim": claim, "ok": True,
                           "certificate": cert.to_json()})
            verdicts.append({"claim": claim, "ok": True,
                             "margin": cert.min_margin, "slack": 0.0,
                             "method": "interval_certificate"})
        except CertificationError as exc:
            stage2.append({"claim": claim, "ok": False, "stage": exc.stage,
                           "diagnosis": str(exc)})
            verdicts.append({"claim": claim, "ok": False,
                             "margin": exc.margin, "slack": 0.0,
                             "method": "interval_certificate"})
    results["interval_certificates_as_printed"] = stage2

    # stage 3: transfer-operator lower bound at t=1.5 on the complement of T:2
    cert = certify_dim_lower(system, 1.5, exclude=initial_block(3))
    results["transfer_lower_bound"] = cert.to_json()
    verdicts.append({"claim": "dimension of the T:2-complement subsystem >= 1.5",
                     "ok": cert.certified, "margin": cert.lower_bound - 1.0,
                     "slack": cert.slack, "method": f"transfer_{cert.mode}"})
    ledger.append({"source": "collatz-wielandt float slack",
                   "value": cert.slack})

    # stage 4: the corrected ladder and its composite coverage
    try:
        ladder = run_reference_ladder(system, box=box, seed_r=args.seed_box)
        caps = derive_cap_evidence()
        comp = composite_interval(ladder, cap_evidence=caps)
        results["corrected_ladder"] = {
            "rungs": [{"tag": rung.tag, "t_low": cert.t_low,
                       "t_high": cert.t_high, "d": cert.d,
                       "exclude_prefix": rung.exclude_prefix,
                       "min_margin": cert.min_margin,
                       "pressure_upper": cert.pressure_upper}
                      for rung, cert in ladder],
            "cap_evidence": {str(k): v for k, v in caps.items()},
            "composite": comp,
        }
        for rung, rcert in ladder:
            verdicts.append({
                "claim": f"ladder rung {rung.tag}: [{rcert.t_low}, "
                         f"{rcert.t_high}] within the spectrum "
                         f"(cut at the rung system's dimension)",
                "ok": True, "margin": rcert.min_margin, "slack": 0.0,
                "method": "interval_certificate"})
        covered = _interval_covered((0.9, 1.885), comp["certified"])
        verdicts.append({
            "claim": "composite coverage of [0.9, 1.885]",
            "ok": covered, "margin": 0.0, "slack": 0.0,
            "method": "composite"})
        results["composite_gap"] = comp.get("conditional_on_dimension", [])
    except CertificationError as exc:
        results["corrected_ladder"] = {"error": str(exc)}
        verdicts.append({"claim": "corrected ladder", "ok": False,
                         "margin": exc.margin, "slack": 0.0,
                         "method": "interval_certificate"})

    report = _report("reproduce", {"full_box": args.full_box,
                                   "seed_box": args.seed_box},
                     results, verdicts, ledger, t0)
    _emit(report, args)
    return EXIT_OK if all(v["ok"] for v in verdicts) else EXIT_INCONCLUSIVE


# ---------------------------------------------------------------------------
# parser

def _build_parser() -> _Parser:
    parser = _Parser(prog="thermo-spectrum",
                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--system", default="ccf",
                        help="ccf, rcf, lccf, or file:<path> (default ccf)")
    common.add_argument("--out", help="write the report to this path")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (THERMO_SPECTRUM_THREADS overrides)")
    common.add_argument("--budget-words", type=int, default=None,
                        help="cap on enumerated words per partition sum")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", parents=[common],
                       help="list the leading letters in natural order")
    p.add_argument("--count", type=int, default=10)
    p.set_defaults(fn=cmd_enumerate)

    p = sub.add_parser("pressure", parents=[common],
                       help="partition sum and pressure bracket on a subset")
    p.add_argument("--subset", required=True,
                   help="I:k, T:k, box:r, file:<path>, or a JSON letter array")
    p.add_argument("-n", "--length", type=int, default=2)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--form", choices=("sup", "inf"), default="sup")
    p.add_argument("--bound", type=float, default=None,
                   help="assert the partition value (plus slack) stays below")
    p.set_defaults(fn=cmd_pressure)

    p = sub.add_parser("dimension", parents=[common],
                       help="Bowen bracket for a finite subsystem's dimension")
    p.add_argument("--subset", default=None)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--t-lo", type=float, default=0.05)
    p.add_argument("--t-hi", type=float, default=2.4)
    p.add_argument("-n", "--length", type=int, default=2)
    p.add_argument("--method", choices=("auto", "markov", "direct"),
                   default="auto")
    p.set_defaults(fn=cmd_dimension)

    p = sub.add_parser("certify-spectrum", parents=[common],
                       help="issue a dimension-spectrum interval certificate")
    p.add_argument("--t-low", type=float, required=True)
    p.add_argument("--t-high", type=float, required=True)
    p.add_argument("--d", type=int, default=None,
                   help="initial block size in natural order")
    p.add_argument("--block", default=None, help="I:k or T:k instead of --d")
    p.add_argument("--box", type=_box_arg, default=(128, 256),
                   help="explicit-check box WxH (default 128x256)")
    p.add_argument("--seed-box", type=int, default=4000,
                   help="half-side of the tail-sum seed box (default 4000)")
    p.add_argument("--full-box", action="store_true",
                   help="use the full-size 256x512 box")
    p.add_argument("--exclude", default=None,
                   help="letters removed from the system, e.g. T:2")
    p.add_argument("--depth", type=int, default=None,
                   help="cylinder conditioning depth for the block pressure")
    p.set_defaults(fn=cmd_certify_spectrum)

    p = sub.add_parser("construct", parents=[common],
                       help="greedy subsystem with dimension below a target")
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--max-letters", type=int, default=20)
    p.set_defaults(fn=cmd_construct)

    p = sub.add_parser("gap-bound", parents=[common],
                       help="upper bound for the dimension gap of a subsystem")
    p.add_argument("--block", required=True)
    p.add_argument("--chi", type=float, default=None,
                   help="Lyapunov lower bound (default: derived)")
    p.add_argument("--t-eval", type=float, default=None,
                   help="evaluate the tail at this exponent instead of the "
                        "computed Bowen lower end")
    p.add_argument("--seed-box", type=int, default=4000)
    p.set_defaults(fn=cmd_gap_bound)

    p = sub.add_parser("lower-bound", parents=[common],
                       help="certified dimension lower bound via the "
                            "discretized transfer operator")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--p", type=int, default=64, help="grid cells per side")
    p.add_argument("--letters", type=int, default=2000)
    p.add_argument("--iters", type=int, default=250)
    p.add_argument("--mode", choices=("cover", "drop"), default="cover")
    p.add_argument("--exclude", default=None,
                   help="letters removed from the system, e.g. T:2")
    p.set_defaults(fn=cmd_lower_bound)

    p = sub.add_parser("reproduce", parents=[common],
                       help="replay the recorded certification sequence and "
                            "report which claims hold")
    p.add_argument("--full-box", action="store_true")
    p.add_argument("--seed-box", type=int, default=4000)
    p.set_defaults(fn=cmd_reproduce)
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    _apply_threads(getattr(args, "threads", None))
    try:
        return args.fn(args)
    except BudgetError as exc:
        sys.stderr.write(f"budget exhausted: {exc}\n")
        return EXIT_BUDGET
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
