"""Command-line entry point.

Exit status is 0 when every check passes, 2 when a check fails and 1 on
usage or configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import bell, ghz, sidon
from .checks import Check, ConsistencyError
from .qudit import EPS_NORM
from .report import Report, outcome_table, render_report

log = logging.getLogger("sepdist")

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2

BELL_CONFIGS = [(2, 3), (2, 4), (3, 7), (4, 15), (5, 31)]
GHZ_PARTIES = [3, 4, 5]
SIDON_CANONICAL = range(2, 13)
SIDON_SEARCH = range(2, 7)
# the character-sum identities cost O(d^4 K); beyond this only integer conditions run
ORTHOGONALITY_MAX_D = 6


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=EPS_NORM, help="absolute tolerance (default 1e-10)")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "text"), default="json")

    p = _Parser(prog="sepdist", description="Simulate and verify entanglement distribution with separable carriers.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bell", parents=[common], help="two-party qudit Bell-state protocol")
    b.add_argument("--d", type=int, default=2, help="local dimension")
    b.add_argument("--K", type=int, help="number of phase states (default: least admissible)")
    b.add_argument("--exponents", type=_int_list, help="exponents s_0,..,s_{d-1} (default 2^i - 1)")

    g = sub.add_parser("ghz", parents=[common], help="N-party qubit GHZ protocol")
    g.add_argument("--parties", type=int, default=3)
    g.add_argument("--K", type=int, help="number of phase states (default 2^N - 1)")
    g.add_argument("--exponents", type=_int_list, help="party exponents e_1,..,e_N (default 2^(j-1))")

    s = sub.add_parser("sidon", parents=[common], help="exponent systems and minimal-K search")
    s.add_argument("--d", type=int, default=3)
    s.add_argument("--K", type=int, help="check the canonical exponents against this K instead")
    s.add_argument("--exponents", type=_int_list, help="check these exponents instead of the canonical ones")
    s.add_argument("--search", action="store_true", help="exhaustive search for the least K")
    s.add_argument("--bound", type=int, help="largest element allowed in the search (default 2^(d-1) - 1)")

    sub.add_parser("verify-all", parents=[common], help="run every protocol configuration")
    return p


def bell_report(config: bell.BellProtocolConfig, tol: float) -> Report:
    cfg = {"d": config.d, "K": config.K, "exponents": list(config.phases.s)}
    trace = bell.run_bell(config, tol, strict=False)
    return Report(
        command="bell",
        config=cfg,
        tolerance=tol,
        checks=trace.checks,
        certificates=trace.certificates,
        outcome_tables=[outcome_table(["C"], trace.outcome_table)],
        success_probability=trace.success_probability,
        results={"expected_success_probability": config.success_probability,
                 "success_fidelity": trace.success_fidelity},
        notes=trace.notes,
    )


def ghz_report(config: ghz.GhzProtocolConfig, tol: float) -> Report:
    cfg = {"parties": config.N, "K": config.K, "exponents": list(config.exponents)}
    report = Report("ghz", cfg, tol, notes=[ghz.EXPONENT_NOTE, ghz.MIXTURE_NOTE])
    try:
        trace = ghz.run_ghz(config, tol, strict=False)
    except ConsistencyError as exc:
        # phase sums that fail to vanish stop the construction; report them
        constraints = ghz.constraint_check(config)
        report.checks = ghz.constraint_checks(constraints, tol)
        report.results = {"aborted": str(exc), "worst_sum": constraints.worst().name}
        return report
    report.checks = trace.checks
    report.certificates = trace.certificates
    report.outcome_tables = [
        outcome_table(list(config.ancillas), trace.outcome_table),
        outcome_table(list(config.labels), trace.full_failure_table),
    ]
    report.success_probability = trace.success_probability
    report.results = {
        "expected_success_probability": config.success_probability,
        "success_fidelity": trace.success_fidelity,
        "constraint_sums": [
            {"name": e.name, "family": e.family, "exponent": e.exponent, "value": e.value, "required": e.required}
            for e in trace.constraints.entries
        ],
    }
    return report


def sidon_report(d: int, tol: float, search: bool = False, bound: int | None = None,
                 exponents=None, K: int | None = None) -> Report:
    canonical = sidon.canonical_system(d)
    s = tuple(exponents) if exponents is not None else canonical.s
    K = K if K is not None else (canonical.K if exponents is None else sidon.minimal_K_for(s))
    cond = sidon.verify_conditions(s, K)
    checks = [Check("phase_conditions", f"exponents {list(s)} with K={K} satisfy the bound and distinct pair sums",
                    0.0, 0.0, cond.ok)]
    results: dict = {"exponents": list(s), "K": K, "violation": cond.violation}
    if cond.ok and len(s) <= ORTHOGONALITY_MAX_D:
        orth = sidon.orthogonality_sums(sidon.PhaseSystem(s, K))
        checks.append(Check.deviation("orthogonality", "character-sum identities over all index tuples",
                                      orth.max_deviation, tol))
    if cond.ok:
        checks.append(Check("minimal_K", "least admissible K equals 2 max(s) + 1",
                            float(sidon.minimal_K_for(s)), float(2 * max(s) + 1),
                            sidon.minimal_K_for(s) == 2 * max(s) + 1))
    results["canonical"] = {"exponents": list(canonical.s), "K": canonical.K}
    if search:
        bound = bound if bound is not None else max(canonical.s)
        found = sidon.search_min_sidon(d, bound)
        results["search"] = {"bound": bound, "exponents": list(found.s), "K": found.K}
        checks.append(Check("search_not_worse", "searched K does not exceed the canonical K",
                            float(found.K), float(canonical.K), found.K <= canonical.K))
    cfg = {"d": d, "K": K, "search": search, "bound": bound}
    return Report("sidon", cfg, tol, checks=checks, results=results)


def verify_all_report(tol: float) -> Report:
    runs = [bell_report(bell.BellProtocolConfig.make(d, K), tol) for d, K in BELL_CONFIGS]
    runs += [ghz_report(ghz.GhzProtocolConfig.make(n), tol) for n in GHZ_PARTIES]
    runs += [sidon_report(d, tol, search=d in SIDON_SEARCH) for d in SIDON_CANONICAL]
    cfg = {"bell": [list(c) for c in BELL_CONFIGS], "ghz": GHZ_PARTIES,
           "sidon_canonical": list(SIDON_CANONICAL), "sidon_search": list(SIDON_SEARCH)}
    return Report("verify-all", cfg, tol, runs=runs)


def _build(args) -> Report:
    if args.command == "bell":
        config = bell.BellProtocolConfig.make(args.d, args.K, args.exponents)
        return bell_report(config, args.tol)
    if args.command == "ghz":
        config = ghz.GhzProtocolConfig.make(args.parties, args.exponents, args.K)
        return ghz_report(config, args.tol)
    if args.command == "sidon":
        return sidon_report(args.d, args.tol, args.search, args.bound, args.exponents, args.K)
    return verify_all_report(args.tol)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"sepdist: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if args.tol < 0:
        print("sepdist: error: --tol must be non-negative", file=sys.stderr)
        return EXIT_USAGE
    try:
        report = _build(args)
    except ValueError as exc:
        print(f"sepdist: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    data = render_report(report, args.format)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    if not report.ok:
        log.warning("%s: one or more checks failed", args.command)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
