"""Command-line front end: one subcommand per figure table plus ``verify``.

Every subcommand writes a table (CSV with a unit-carrying header, or JSON
records) to standard output or ``--output``.  Exit status: 0 success,
1 parameter error, 2 numerical failure, 3 verification mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import closedform, fockspace, model, oracle, thermal
from .visibility import (
    max_visibility,
    max_visibility_curve,
    optimal_particle_number,
    partition_visibility,
)
from .exceptions import NumericalError

EXIT_OK = 0
EXIT_PARAM = 1
EXIT_NUMERIC = 2
EXIT_MISMATCH = 3

# physical dimension of each column, used for the header and SI conversion
_UNIT_NAMES = {"E": "u_E", "T": "u_T", "x": "u_x"}
_SI_NAMES = {"E": "J", "T": "K", "x": "m"}


class ParameterError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARAM, f"{self.prog}: error: {message}\n")


@dataclass
class Column:
    name: str
    unit: str | None = None  # one of "E", "T", "x" or None for dimensionless


@dataclass
class Table:
    columns: list[Column]
    rows: list[list] = field(default_factory=list)
    status: int = EXIT_OK


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.12g" % value
    return str(value)


def _json_value(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            return None
        return float("%.12g" % value)
    return value


def _convert(table: Table, units: model.UnitSystem | None) -> tuple[list[str], list[list]]:
    scale = {}
    names = []
    for col in table.columns:
        if col.unit is None:
            names.append(col.name)
        elif units is None:
            names.append(f"{col.name} [{_UNIT_NAMES[col.unit]}]")
        else:
            names.append(f"{col.name} [{_SI_NAMES[col.unit]}]")
            scale[col.name] = {"E": units.energy, "T": units.temperature, "x": units.length}[
                col.unit
            ]
    rows = []
    for row in table.rows:
        out = []
        for col, value in zip(table.columns, row):
            if col.name in scale:
                value = value * scale[col.name]
            out.append(value)
        rows.append(out)
    return names, rows


def render(table: Table, fmt: str = "csv", units: model.UnitSystem | None = None) -> str:
    names, rows = _convert(table, units)
    if fmt == "json":
        records = [{n: _json_value(v) for n, v in zip(names, row)} for row in rows]
        return json.dumps(records, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------- parsing helpers


def _range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a range 'a:b', got {text!r}") from None
    if not lo <= hi:
        raise argparse.ArgumentTypeError(f"range start exceeds end in {text!r}")
    return lo, hi


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None


def _samples(lo: float, hi: float, points: int, log: bool) -> np.ndarray:
    if points < 1:
        raise ParameterError("need at least one grid point")
    if points == 1:
        return np.array([lo])
    if log:
        if lo <= 0:
            raise ParameterError("log spacing needs a positive range")
        return np.logspace(math.log10(lo), math.log10(hi), points)
    return np.linspace(lo, hi, points)


def _check_r(r: float) -> None:
    if not (r >= 0 and math.isfinite(r)):
        raise ParameterError(f"coupling ratio must be finite and >= 0, got {r}")


# ---------------------------------------------------------------- subcommands


def cmd_bipartite_visibility(args) -> Table:
    if not 0 < args.r_min <= args.r_max:
        raise ParameterError("need 0 < r-min <= r-max")
    table = Table([Column("R"), Column("V_max"), Column("E_ground", "E"), Column("E_sep", "E")])
    for r in _samples(args.r_min, args.r_max, args.points, not args.linear):
        rep = max_visibility(model.EnsembleSpec(2, float(r)))
        table.rows.append([float(r), rep.value, rep.expectation, rep.sep_bound])
    return table


def cmd_spectrum(args) -> Table:
    _check_r(args.r)
    spec = model.EnsembleSpec(args.n, args.r)
    std = closedform.enumerate_levels(spec, model.trivial_partition(args.n), args.count)
    sep = closedform.enumerate_levels(spec, model.full_partition(args.n), args.count)
    table = Table([Column("level"), Column("E_standard", "E"), Column("E_separable", "E")])
    for i, (a, b) in enumerate(zip(std, sep)):
        table.rows.append([i, a.value, b.value])
    return table


def cmd_wavefunction_grid(args) -> Table:
    _check_r(args.r)
    spec = model.EnsembleSpec(2, args.r)
    if args.kind == "standard":
        partition = model.trivial_partition(2)
        label = closedform.ExcitationLabel.for_trivial(args.quanta[0], args.quanta[1:])
    else:
        partition = model.full_partition(2)
        label = closedform.ExcitationLabel.for_full(args.quanta)
    label.check(partition)
    axis = np.linspace(-args.extent, args.extent, args.points)
    x1, x2 = np.meshgrid(axis, axis, indexing="ij")
    pts = np.column_stack([x1.ravel(), x2.ravel()])
    amp = closedform.wavefunction_eval(
        closedform.WavefunctionQuery(partition, label, pts, args.normalized), spec
    )
    table = Table([Column("xi_1", "x"), Column("xi_2", "x"), Column("amplitude")])
    table.rows = [[float(p[0]), float(p[1]), float(a)] for p, a in zip(pts, amp)]
    return table


def cmd_visibility_vs_n(args) -> Table:
    _check_r(args.r)
    if not 1 <= args.n_min <= args.n_max:
        raise ParameterError("need 1 <= n-min <= n-max")
    table = Table(
        [Column("N"), Column("role"), Column("V"), Column("E_ground", "E"), Column("E_sep", "E")]
    )
    for n in range(args.n_min, args.n_max + 1):
        rep = max_visibility(model.EnsembleSpec(n, args.r))
        table.rows.append([n, "integer", rep.value, rep.expectation, rep.sep_bound])
    if args.r > 0:
        n_opt = optimal_particle_number(args.r)
        ground = 0.5 * (1.0 + (n_opt - 1.0) * math.sqrt(1.0 + n_opt * args.r))
        sep = 0.5 * n_opt * math.sqrt(1.0 + (n_opt - 1.0) * args.r)
        table.rows.append(
            [n_opt, "optimum", max_visibility_curve(n_opt, args.r), ground, sep]
        )
        lo, hi = math.floor(n_opt), math.ceil(n_opt)
        for n, role in ((lo, "floor"), (hi, "ceil")):
            rep = max_visibility(model.EnsembleSpec(max(n, 1), args.r))
            table.rows.append([max(n, 1), role, rep.value, rep.expectation, rep.sep_bound])
    return table


def cmd_partition_scan(args) -> Table:
    _check_r(args.r)
    spec = model.EnsembleSpec(args.n, args.r)
    if args.k:
        ks = args.k
    else:
        ks = [k for k in (2**i for i in range(args.n.bit_length())) if args.n % k == 0]
    table = Table([Column("K"), Column("V"), Column("E_ground", "E"), Column("E_bound", "E")])
    for k in ks:
        rep = partition_visibility(spec, model.equal_partition(args.n, k))
        table.rows.append([k, rep.value, rep.expectation, rep.sep_bound])
    return table


def cmd_mean_n_visibility(args) -> Table:
    lo, hi = args.nbar
    if lo < 0:
        raise ParameterError("mean particle numbers must be >= 0")
    table = Table(
        [Column("R"), Column("Nbar"), Column("V"), Column("E_ground", "E"), Column("E_sep", "E")]
    )
    for r in args.r:
        _check_r(r)
        for mean in _samples(lo, hi, args.points, args.log):
            rep = fockspace.mean_n_visibility(r, float(mean))
            table.rows.append([r, float(mean), rep.value, rep.expectation, rep.sep_bound])
    return table


def cmd_thermal_grid(args) -> Table:
    _check_r(args.r)
    means = _samples(*args.nbar, args.nbar_points, args.log)
    temps = _samples(*args.t, args.t_points, args.log)
    if means[0] < 0 or temps[0] <= 0:
        raise ParameterError("need Nbar >= 0 and T > 0")
    points = thermal.thermal_grid(args.r, means, temps, tol=args.tol, workers=args.workers)
    table = Table(
        [
            Column("Nbar"),
            Column("T", "T"),
            Column("alpha"),
            Column("E_mean", "E"),
            Column("ln_Z"),
            Column("V"),
        ]
    )
    for m, p in zip(np.repeat(means, temps.size), points):
        table.rows.append([float(m), p.temperature, p.alpha, p.energy, p.log_z, p.visibility])
    return table


# ---------------------------------------------------------------- verify


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def _verify_checks(quick: bool) -> list[tuple[str, Callable[[], tuple[float, float, float]]]]:
    """Each check returns (computed, reference, tolerance); errors are relative."""

    def bipartite_ground():
        spec = model.EnsembleSpec(2, 1.5)
        h = oracle.build_hamiltonian_matrix(spec, oracle.TruncatedBasisConfig(dim=40))
        return oracle.smallest_eigenvalue(h), closedform.ground_energy(spec), 1e-6

    def bipartite_sep():
        spec = model.EnsembleSpec(2, 1.5)
        res = oracle.alternating_separability_solver(
            spec, model.full_partition(2), oracle.TruncatedBasisConfig(dim=30)
        )
        return res.value, closedform.separable_min_energy(spec), 1e-6

    def multipartite(n, r, d):
        def run():
            spec = model.EnsembleSpec(n, r)
            w = oracle.tune_frequency(spec)
            h = oracle.build_hamiltonian_matrix(spec, oracle.TruncatedBasisConfig(dim=d, frequency=w))
            ground = oracle.smallest_eigenvalue(h)
            res = oracle.alternating_separability_solver(
                spec,
                model.full_partition(n),
                oracle.TruncatedBasisConfig(dim=20, frequency=math.sqrt(1.0 + (n - 1) * r)),
            )
            v = (res.value - ground) / (res.value + ground)
            return v, max_visibility(spec).value, 1e-5

        return run

    def fock(seed):
        def run():
            rng = np.random.default_rng(seed)
            worst = 0.0
            for _ in range(20):
                mean = float(rng.uniform(0, 20))
                r = float(10 ** rng.uniform(-2, 2))
                values = fockspace.separable_min_per_n(np.arange(81), r)
                _, brute = oracle.brute_force_distribution_min(values, mean, n_max=80)
                worst = max(worst, _rel(fockspace.sep_min_energy_mean_n(r, mean), brute))
            return worst, 0.0, 1e-10

        return run

    def thermal_fd():
        params = thermal.ThermalParams(1.0 / 0.7, 0.3, 1.0)
        h = 1e-5
        lz = lambda a, b: thermal.log_partition_function(thermal.ThermalParams(b, a, 1.0))[0]
        n_fd = -(lz(params.alpha + h, params.beta) - lz(params.alpha - h, params.beta)) / (2 * h)
        return thermal.mean_particle_number(params), n_fd, 1e-6

    checks = [
        ("ground N=2 R=1.5", bipartite_ground),
        ("separable N=2 R=1.5", bipartite_sep),
        ("visibility N=3 R=1", multipartite(3, 1.0, 20)),
        ("fock-space bound", fock(0)),
        ("thermal <N> vs d lnZ", thermal_fd),
    ]
    if not quick:
        checks += [
            ("visibility N=3 R=10", multipartite(3, 10.0, 20)),
            ("visibility N=4 R=1", multipartite(4, 1.0, 11)),
        ]
    return checks


def cmd_verify(args) -> Table:
    table = Table(
        [
            Column("check"),
            Column("computed"),
            Column("reference"),
            Column("error"),
            Column("tolerance"),
            Column("status"),
        ]
    )
    for name, check in _verify_checks(args.quick):
        computed, reference, tol = check()
        err = computed if reference == 0.0 else _rel(computed, reference)
        ok = err <= tol
        table.rows.append([name, computed, reference, err, tol, "pass" if ok else "FAIL"])
        if not ok:
            table.status = EXIT_MISMATCH
    return table


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--output", "-o", help="write the table here instead of stdout")
    common.add_argument("--mass", type=float, help="particle mass [kg] for SI output")
    common.add_argument("--omega", type=float, help="trap angular frequency [1/s] for SI output")

    parser = _Parser(prog="macroent", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bipartite-visibility", parents=[common], help="V_max(R) for two particles")
    p.add_argument("--r-min", type=float, default=1e-3)
    p.add_argument("--r-max", type=float, default=1e3)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--linear", action="store_true", help="linear instead of log spacing in R")
    p.set_defaults(func=cmd_bipartite_visibility)

    p = sub.add_parser("spectrum", parents=[common], help="lowest standard and separable levels")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--count", type=int, default=10)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("wavefunction-grid", parents=[common], help="two-particle amplitudes")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--kind", choices=("standard", "separable"), default="standard")
    p.add_argument(
        "--quanta",
        type=_int_list,
        default=[0, 0],
        help="n_parallel,n_perp (standard) or n_1,n_2 (separable)",
    )
    p.add_argument("--extent", type=float, default=4.0)
    p.add_argument("--points", type=int, default=81)
    p.add_argument("--normalized", action="store_true")
    p.set_defaults(func=cmd_wavefunction_grid)

    p = sub.add_parser("visibility-vs-n", parents=[common], help="V_max against particle number")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--n-min", type=int, default=1)
    p.add_argument("--n-max", type=int, default=100)
    p.set_defaults(func=cmd_visibility_vs_n)

    p = sub.add_parser("partition-scan", parents=[common], help="V for equal K-block partitions")
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--k", type=_int_list, help="block counts (default: powers of two dividing N)")
    p.set_defaults(func=cmd_partition_scan)

    p = sub.add_parser("mean-n-visibility", parents=[common], help="V at real mean particle number")
    p.add_argument("--r", type=_float_list, default=[0.1, 1.0, 10.0])
    p.add_argument("--nbar", type=_range, default=(0.0, 10.0))
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--log", action="store_true")
    p.set_defaults(func=cmd_mean_n_visibility)

    p = sub.add_parser("thermal-grid", parents=[common], help="thermal V on an (Nbar, T) grid")
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--nbar", type=_range, default=(1.0, 100.0))
    p.add_argument("--t", type=_range, default=(0.01, 100.0), help="temperature range [u_T]")
    p.add_argument("--nbar-points", type=int, default=25)
    p.add_argument("--t-points", type=int, default=41)
    p.add_argument("--log", action="store_true", help="log spacing on both axes")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--workers", type=int, help="threads (default: MACROENT_THREADS or 1)")
    p.set_defaults(func=cmd_thermal_grid)

    p = sub.add_parser("verify", parents=[common], help="oracle checks of the closed forms")
    p.add_argument("--quick", action="store_true", help="skip the slower multipartite checks")
    p.set_defaults(func=cmd_verify)
    return parser


def _units(args) -> model.UnitSystem | None:
    if args.mass is None and args.omega is None:
        return None
    if args.mass is None or args.omega is None:
        raise ParameterError("--mass and --omega must be given together")
    return model.natural_units(model.PhysicalParams(args.mass, args.omega))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        units = _units(args)
        table = args.func(args)
        text = render(table, args.format, units)
    except (NumericalError, ArithmeticError) as exc:
        print(f"macroent: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"macroent: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_PARAM
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"macroent {args.command}: {len(table.rows)} rows in {time.perf_counter() - start:.2f}s",
          file=sys.stderr)
    return table.status


if __name__ == "__main__":
    sys.exit(main())
