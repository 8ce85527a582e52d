"""Command line interface: ``stdgsem <subcommand> [options]``.

Exit status is 0 on success, 1 on usage errors and 2 when a nonlinear solve
fails (Newton nonconvergence, singular systems or nonphysical states).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .errors import AdmissibilityError, NewtonConvergenceError, SingularSystemError
from .lodg import integrate
from .newton import NewtonConfig
from .stdg import element_csv, stdg_integrate
from .time_operators import lobatto_tableau, order_condition_defects, sbp_defect, sbp_operators, to_butcher

EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(cmd: argparse.ArgumentParser, **defaults) -> None:
    cmd.add_argument("--method", choices=ex.METHODS, default=defaults.get("method", "stdg"))
    cmd.add_argument("--ntau", type=int, choices=(2, 3, 4), default=defaults.get("ntau", 2))
    cmd.add_argument("--n", type=int, default=defaults.get("n"), help="cells per direction or max step count")
    cmd.add_argument("--p", type=int, default=defaults.get("p"), help="spatial polynomial degree")
    cmd.add_argument("--dt", type=float, default=defaults.get("dt"))
    cmd.add_argument("--steps", type=int, default=defaults.get("steps"))
    cmd.add_argument("--jac-form", choices=("a", "ainv"), default="ainv", help="LoDG stage Jacobian form")
    cmd.add_argument("--newton-tol", type=float, default=defaults.get("newton_tol", 1e-12))
    cmd.add_argument("--out", type=Path, default=Path("."), help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stdgsem", description="Space-time DG-SEM and Lobatto IIIC experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("tableau", help="Butcher tableau and order-condition defects")
    _common(p)

    p = sub.add_parser("eoc", help="test-equation convergence study")
    _common(p, n=512, newton_tol=1e-14)
    p.add_argument("--norm", choices=("pointwise", "l2_time"), default="pointwise")

    p = sub.add_parser("advdiff", help="rotating pulse advection-diffusion run")
    _common(p, n=8)

    p = sub.add_parser("euler-vortex", help="coarse isentropic vortex run")
    _common(p, n=16, p=1, dt=0.05, steps=10)
    p.add_argument("--allow-large", action="store_true", help=f"permit more than {ex.MAX_VORTEX_CELLS} cells")

    p = sub.add_parser("sparsity", help="Jacobian sparsity patterns of one space-time element")
    _common(p, p=1, ntau=None)

    p = sub.add_parser("dump-field", help="space-time element solutions of the rotating pulse")
    _common(p, n=4)
    return parser


def _write(out: Path, name: str, data) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    if isinstance(data, str):
        data = data.encode("ascii")
    path.write_bytes(data)
    return path


def _cfg(args) -> NewtonConfig:
    if not args.newton_tol > 0:
        raise UsageError("--newton-tol must be positive")
    return NewtonConfig(abs_tol=args.newton_tol, rel_tol=args.newton_tol)


def _jac_form(args) -> str:
    return "a_form" if args.jac_form == "a" else "a_inv_form"


def cmd_tableau(args) -> list:
    n = args.ntau
    ops = sbp_operators(n)
    tab = to_butcher(ops)
    closed = lobatto_tableau(n)
    rows = [("lgl_node", i, "", float(v)) for i, v in enumerate(ops.nodes)]
    rows += [("lgl_weight", i, "", float(v)) for i, v in enumerate(ops.weights)]
    rows += [("D", i, j, float(ops.D[i, j])) for i in range(n) for j in range(n)]
    rows.append(("sbp_defect", "", "", sbp_defect(ops)))
    rows += [("A", i, j, float(tab.A[i, j])) for i in range(n) for j in range(n)]
    rows += [("b", i, "", float(tab.b[i])) for i in range(n)]
    rows += [("c", i, "", float(tab.c[i])) for i in range(n)]
    rows.append(("closed_form_max_diff", "", "", float(np.max(np.abs(tab.A - closed.A)))))
    defects = order_condition_defects(tab, 2 * n)
    for fam in ("B", "C", "D"):
        rows += [(f"defect_{fam}", j + 1, "", float(v)) for j, v in enumerate(getattr(defects, fam))]
    text = ex._rows_csv("tableau", ["entry", "i", "j", "value"], rows)
    return [_write(args.out, f"tableau_ntau{n}.csv", text)]


def cmd_eoc(args) -> list:
    n_max = args.n
    if n_max < 16:
        raise UsageError("--n must be at least 16 for an EOC study")
    Ns = [2**k for k in range(3, int(np.log2(n_max)) + 1)]
    rep = ex.run_eoc_testeq(args.method, args.ntau, args.norm, Ns, _cfg(args), _jac_form(args))
    return [_write(args.out, f"eoc_{args.method}_ntau{args.ntau}_{args.norm}.csv", rep.to_csv())]


def cmd_advdiff(args) -> list:
    res = ex.run_advdiff(args.method, args.ntau, args.n, args.dt, args.p, cfg=_cfg(args), jac_form=_jac_form(args))
    tag = f"{args.method}_ntau{args.ntau}_n{args.n}"
    summary = {
        "method": args.method,
        "ntau": args.ntau,
        "n": args.n,
        "p": res.p,
        "dt": res.dt,
        "steps": res.n_steps,
        "l2_error_final": res.l2_error_final,
        "newton_iterations": res.newton_iterations,
    }
    return [
        _write(args.out, f"advdiff_{tag}.csv", ex.summary_csv("advdiff", summary)),
        _write(args.out, f"advdiff_{tag}_trajectory.csv", ex.trajectory_csv(res.trajectory, res.space)),
    ]


def cmd_euler(args) -> list:
    res = ex.run_euler_vortex(args.method, args.ntau, args.n, args.dt, args.steps, p=args.p,
                              cfg=_cfg(args), jac_form=_jac_form(args), allow_large=args.allow_large)
    summary = {
        "method": args.method,
        "ntau": args.ntau,
        "n": args.n,
        "p": args.p,
        "dt": float(args.dt),
        "steps": args.steps,
        "l2_density_error": res.l2_density_error,
        "min_density": res.min_density,
        "max_newton_iterations": res.max_newton_iterations,
    }
    return [_write(args.out, f"euler_{args.method}_ntau{args.ntau}_n{args.n}.csv", ex.summary_csv("euler-vortex", summary))]


def cmd_sparsity(args) -> list:
    if args.p not in (1, 2, 3):
        raise UsageError("--p must be 1, 2 or 3 for sparsity dumps")
    n_tau = args.p + 1 if args.ntau is None else args.ntau
    written = []
    for form, (pat, pbm, csv_bytes) in ex.dump_sparsity(args.p, n_tau).items():
        stem = f"sparsity_{form}_p{args.p}_ntau{n_tau}"
        written.append(_write(args.out, stem + ".pbm", pbm))
        written.append(_write(args.out, stem + ".csv", csv_bytes))
    return written


def cmd_dump_field(args) -> list:
    N = args.n
    p = args.ntau - 1 if args.p is None else args.p
    dt = 1.0 / N if args.dt is None else args.dt
    steps = args.steps if args.steps is not None else max(1, int(round(1.0 / dt)))
    space, system, u0 = ex.pulse_problem(N, p)
    ops = sbp_operators(args.ntau)
    if args.method == "lodg":
        traj = integrate(system, lobatto_tableau(args.ntau), 0.0, u0, dt * steps, steps, _cfg(args), _jac_form(args))
        traj.element_solutions = traj.stages
    else:
        traj = stdg_integrate(system, ops, 0.0, u0, dt * steps, steps, _cfg(args))
    text = ex.csv_header("elements") + element_csv(traj, ops, space)
    return [_write(args.out, f"field_{args.method}_ntau{args.ntau}_n{N}.csv", text)]


COMMANDS = {
    "tableau": cmd_tableau,
    "eoc": cmd_eoc,
    "advdiff": cmd_advdiff,
    "euler-vortex": cmd_euler,
    "sparsity": cmd_sparsity,
    "dump-field": cmd_dump_field,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        for path in COMMANDS[args.command](args):
            print(path)
    except (NewtonConvergenceError, SingularSystemError, AdmissibilityError) as exc:
        print(f"stdgsem: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (UsageError, ValueError) as exc:
        print(f"stdgsem: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
