"""``bea-mcn`` command line: analytic tables, value solvers, stability reports, Monte Carlo.

Exit codes: 0 ok, 1 manifest verification mismatch, 2 usage, 3 config, 4 singular CMV system.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import tempfile
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .allocation import payoff_vector, traffic_vector
from .config import KEYS, ConfigError, RunManifest, config_from_snapshot, config_snapshot, load_config, now, sha256_file
from .game import PartitionFunction, analytic_catalog, node_label
from .physical import UtilitySpec, power_vector, utility_table
from .simulator import (
    NODE_COUNTS,
    RING_WIDTH_DELTAS,
    SWEEP_AXES,
    Aggregate,
    SimConfig,
    metric_order,
    run_monte_carlo,
    run_sweep,
    service_area_values,
)
from .solvers import CompensationSpec, SingularSystemError, compensated_myerson_value, myerson_value
from .stability import inductive_core, joint_exit_deviations, single_agreement_verdict


EXIT_MISMATCH, EXIT_USAGE, EXIT_CONFIG, EXIT_SINGULAR = 1, 2, 3, 4
TABLES = ("pf", "payoff", "traffic", "power", "utility")


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else str(x.numerator)
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else str(x)


def decimal(x) -> str:
    return f"{float(x):.6f}"


def write_csv(rows: Iterable[Sequence], header: Sequence[str], out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])


def parse_fraction(text: str, what: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"{what}: cannot parse {text!r}") from None


def _cs_label(cs) -> str:
    return f"[{cs}]"


# tables ---------------------------------------------------------------------------

def table_rows(n: int, which: str, rho: Fraction = Fraction(1, 2)):
    catalog = analytic_catalog(n)
    if which == "pf":
        pf = PartitionFunction.from_catalog(catalog)
        header = ["cs", "coalition", "share", "share_decimal"]
        return header, [(_cs_label(cs), str(c), v, decimal(v)) for (c, cs), v in pf.values.items()]
    if which == "utility":
        table = utility_table(catalog, UtilitySpec(rho))
        vectors = table.items()
    else:
        fn = {"payoff": payoff_vector, "traffic": traffic_vector,
              "power": lambda cs: power_vector(cs, catalog.rings)}[which]
        vectors = ((cs, fn(cs)) for cs in PartitionFunction.from_catalog(catalog).structures)
    header = ["cs", "node", which, f"{which}_decimal"]
    return header, [(_cs_label(cs), f"MS{node_label(i)}", x, decimal(x)) for cs, vec in vectors for i, x in vec.items()]


def cmd_tables(args, out) -> int:
    rho = _rho(args.rho)
    header, rows = table_rows(args.n, args.which, rho)
    write_csv(rows, header, out)
    return 0


# solve ----------------------------------------------------------------------------

def solve_values(method: str, n: int, lam):
    catalog = analytic_catalog(n)
    pf = PartitionFunction.from_catalog(catalog)
    ecs = pf.embedded_coalitions()
    if method == "mv":
        return myerson_value(ecs, pf)
    return compensated_myerson_value(ecs, pf, CompensationSpec.from_catalog(catalog, lam))


def _lambdas(args) -> list[Fraction]:
    if args.sweep is None:
        lams = [parse_fraction(args.lam, "--lambda")]
    else:
        parts = args.sweep.split(":")
        if len(parts) != 3:
            raise UsageError("--sweep expects START:STOP:STEP")
        start, stop, step = (parse_fraction(p, "--sweep") for p in parts)
        if step <= 0 or stop < start:
            raise UsageError("--sweep needs STEP > 0 and STOP >= START")
        count = int((stop - start) / step) + 1
        lams = [start + k * step for k in range(count)]
    if any(lam < 0 for lam in lams):
        raise UsageError("lambda must be >= 0")
    return lams


def cmd_solve(args, out) -> int:
    lams = _lambdas(args)
    if args.method == "mv":
        lams = lams[:1]
    rows = []
    for lam in lams:
        phi = solve_values(args.method, args.n, float(lam) if args.float else lam)
        rows += [(lam, f"MS{node_label(i)}", x, decimal(x)) for i, x in phi.items()]
    write_csv(rows, ["lambda", "node", "value", "value_decimal"], out)
    return 0


# stability ------------------------------------------------------------------------

def _rho(text) -> Fraction:
    rho = parse_fraction(str(text), "--rho")
    if not 0 < rho < 1:
        raise UsageError(f"--rho must lie in (0, 1), got {text}")
    return rho


def stability_report(n: int, rho: Fraction):
    catalog = analytic_catalog(n)
    utilities = utility_table(catalog, UtilitySpec(rho))
    core = inductive_core(catalog, utilities)
    in_core = set(core.structures)
    rows, text = [], []
    for cs, u in utilities.items():
        single = len(cs.nontrivial) <= 1
        verdict = single_agreement_verdict(cs, utilities, catalog) if single else None
        joint = joint_exit_deviations(cs, utilities, catalog) if single else []
        cert = core.dominance_certificates.get(cs)
        rows.append((
            _cs_label(cs),
            " ".join(f"{float(u[i]):.4f}" for i in sorted(u)),
            verdict.internally_stable if verdict else None,
            verdict.outsider_wants_to_join if verdict else None,
            verdict.externally_stable if verdict else None,
            ";".join("{" + ",".join(node_label(i) for i in d.nodes) + "}" for d in joint),
            cs in in_core,
            str(cert.deviation) if cert else None,
            _cs_label(cert.outcome) if cert else None,
        ))
        line = f"{_cs_label(cs):<14} U=({rows[-1][1]})"
        if verdict:
            line += f"  internal={'stable' if verdict.internally_stable else 'unstable'}"
            line += f"  outsider_joins={'yes' if verdict.outsider_wants_to_join else 'no'}"
        if joint:
            line += f"  joint_exit={rows[-1][5]}"
        line += "  core" if cs in in_core else f"  dominated by {{{cert.deviation}}} -> {_cs_label(cert.outcome)}"
        text.append(line)
    header = ["cs", "utilities", "internally_stable", "outsider_wants_to_join", "externally_stable",
              "joint_exit", "in_core", "dominating_coalition", "dominating_outcome"]
    text.append("core: " + ", ".join(_cs_label(cs) for cs in core.structures))
    return header, rows, text


def cmd_stability(args, out) -> int:
    header, rows, text = stability_report(args.n, _rho(args.rho))
    if args.format == "csv":
        write_csv(rows, header, out)
    else:
        out.write("\n".join(text) + "\n")
    return 0


# montecarlo -----------------------------------------------------------------------

def default_values(config: SimConfig, axis: str) -> list:
    if axis == "node_count":
        return list(NODE_COUNTS)
    if axis == "service_area":
        return service_area_values(config)
    return list(RING_WIDTH_DELTAS)


def parse_values(axis: str, text: str) -> list:
    out = []
    for item in text.split(","):
        v = parse_fraction(item.strip(), "--values")
        out.append(int(v) if axis == "node_count" and v.denominator == 1 else v if axis == "ring_width_delta" else float(v))
    return out


def metrics_csv(results: Sequence[tuple[object, Aggregate]], axis: str | None) -> str:
    base = sorted({k for _, agg in results for k in agg.mean}, key=metric_order)
    keys = [k for b in base for k in (b, f"{b}_se")]
    buf = io.StringIO()
    lead = [axis] if axis else []
    rows = [([fmt(v)] if axis else []) + [agg.row().get(k) for k in keys] for v, agg in results]
    write_csv(rows, lead + keys, buf)
    return buf.getvalue()


def run_montecarlo(config: SimConfig, axis: str | None, values: list, workers: int, out_dir: Path) -> RunManifest:
    started = now()
    if axis:
        results = run_sweep(config, axis, values, workers)
        name = f"sweep_{axis}.csv"
    else:
        results = [(None, run_monte_carlo(config, workers))]
        name = "metrics.csv"
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(metrics_csv(results, axis))
    return RunManifest(
        config=config_snapshot(config),
        seed=config.seed,
        version=__version__,
        started=started,
        finished=now(),
        run={"axis": axis, "values": [fmt(v) for v in values]},
        outputs={name: sha256_file(path)},
    )


def cmd_montecarlo(args, out) -> int:
    if args.verify:
        return verify_manifest(Path(args.verify), args.workers, out)
    try:
        config = load_config(args.config, args.set or [])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    axis = args.sweep
    values = parse_values(axis, args.values) if axis and args.values else default_values(config, axis) if axis else []
    out_dir = Path(args.out)
    try:
        manifest = run_montecarlo(config, axis, values, args.workers, out_dir)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    manifest.write(out_dir / "manifest.json")
    for name in manifest.outputs:
        out.write(f"wrote {out_dir / name}\n")
    out.write(f"wrote {out_dir / 'manifest.json'}\n")
    return 0


def verify_manifest(path: Path, workers: int, out) -> int:
    try:
        manifest = RunManifest.read(path)
        config = config_from_snapshot(manifest.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    axis = manifest.run.get("axis")
    values = parse_values(axis, ",".join(manifest.run["values"])) if axis else []
    with tempfile.TemporaryDirectory() as tmp:
        again = run_montecarlo(config, axis, values, workers, Path(tmp))
    ok = again.outputs == manifest.outputs
    for name, digest in manifest.outputs.items():
        status = "ok" if again.outputs.get(name) == digest else "MISMATCH"
        out.write(f"{name}: {status}\n")
    return 0 if ok else EXIT_MISMATCH


# entry point ----------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bea-mcn", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("-o", "--output", help="write CSV/report here instead of stdout")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("tables", help="analytic tables of the three- and five-node layouts")
    t.add_argument("--n", type=int, choices=(3, 5), required=True)
    t.add_argument("--which", choices=TABLES, required=True)
    t.add_argument("--rho", default="1/2", help="payoff weight for the utility table")
    t.set_defaults(func=cmd_tables)

    s = sub.add_parser("solve", help="Myerson-type value (mv) or its relay-compensated variant (cmv)")
    s.add_argument("--method", choices=("mv", "cmv"), required=True)
    s.add_argument("--n", type=int, choices=(3, 5), required=True)
    s.add_argument("--lambda", dest="lam", default="0", help="compensation weight, e.g. 1 or 0.25 or 1/3")
    s.add_argument("--sweep", help="START:STOP:STEP lambda grid (cmv only)")
    s.add_argument("--float", action="store_true", help="solve in floating point instead of exact rationals")
    s.set_defaults(func=cmd_solve)

    st = sub.add_parser("stability", help="internal/external stability and the inductive core")
    st.add_argument("--n", type=int, choices=(3, 5), required=True)
    st.add_argument("--rho", default="1/2")
    st.add_argument("--format", choices=("text", "csv"), default="text")
    st.set_defaults(func=cmd_stability)

    m = sub.add_parser("montecarlo", help="random-cell simulation, optionally swept over one axis")
    m.add_argument("--config", help=f"key=value file; keys: {', '.join(KEYS)}")
    m.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
    m.add_argument("--sweep", choices=SWEEP_AXES)
    m.add_argument("--values", help="comma-separated sweep values (service_area in metres, "
                                     "ring_width_delta as fractions of D); defaults to the standard grid")
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--out", default="mc-out", help="output directory (created if missing)")
    m.add_argument("--verify", metavar="MANIFEST", help="re-run a manifest and compare output digests")
    m.set_defaults(func=cmd_montecarlo)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.output:
            with open(args.output, "w", newline="") as fh:
                return args.func(args, fh)
        return args.func(args, sys.stdout)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"bea-mcn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SingularSystemError as exc:
        print(f"bea-mcn: {exc}", file=sys.stderr)
        return EXIT_SINGULAR


if __name__ == "__main__":
    sys.exit(main())
