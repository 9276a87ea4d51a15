"""Command-line interface: mesh generation, single solves, and convergence studies."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .fem import energy_error, solve_bvp
from .meshes import AssumptionViolated, MeshParams
from .problems import benchmark_problem
from .study import (
    FAMILIES,
    StudyConfig,
    compare_reference,
    family_mesh,
    mesh_report,
    run_study,
)

_PROG = "layermesh"


def _add_mesh_arguments(parser: argparse.ArgumentParser, sigma_required: bool = True):
    parser.add_argument("--family", required=True, choices=FAMILIES, help="mesh family")
    parser.add_argument("--n", required=True, type=int, metavar="N", help="number of cells (even)")
    parser.add_argument("--epsilon", required=True, type=float, help="perturbation parameter")
    if sigma_required:
        parser.add_argument("--sigma", required=True, type=float, help="grading strength")
    else:
        parser.add_argument(
            "--sigma", type=float, default=None, help="grading strength (default: p + 1)"
        )
    parser.add_argument("--beta", type=float, default=1.0, help="convection lower bound")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=_PROG,
        description="Layer-adapted meshes and a 1D Galerkin FEM convergence harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a mesh and write it out")
    _add_mesh_arguments(gen)
    gen.add_argument("--out", type=Path, default=None, help="output file (default: stdout)")
    gen.add_argument("--format", choices=("json", "txt"), default="json")
    gen.add_argument("--plot", type=Path, default=None, help="also render the mesh layout figure")

    solve = sub.add_parser("solve", help="solve the benchmark problem on one mesh")
    _add_mesh_arguments(solve, sigma_required=False)
    solve.add_argument("--p", required=True, type=int, metavar="DEG", help="polynomial degree")
    solve.add_argument(
        "--dump-solution",
        type=Path,
        default=None,
        help="write the discrete solution (.json: full data, otherwise sampled x/u columns)",
    )
    solve.add_argument(
        "--samples", type=int, default=1001, help="sample count for the text dump"
    )

    study = sub.add_parser("study", help="run the convergence study")
    study.add_argument("--config", type=Path, default=None, help="JSON StudyConfig file")
    study.add_argument("--format", choices=("markdown", "csv", "json"), default=None)
    study.add_argument("--out", type=Path, default=None, help="output file (default: stdout)")
    study.add_argument(
        "--no-figures",
        action="store_true",
        help="skip the convergence figure that is otherwise rendered next to --out",
    )

    verify = sub.add_parser("verify", help="run the study and compare against reference data")
    verify.add_argument("--reference", required=True, type=Path, help="reference CSV")
    verify.add_argument("--tol-error", type=float, default=0.02, help="relative error tolerance")
    verify.add_argument("--tol-rate", type=float, default=0.05, help="absolute rate tolerance")

    report = sub.add_parser("mesh-report", help="print mesh-quality quantities")
    _add_mesh_arguments(report)
    report.add_argument("--format", choices=("text", "json"), default="text")
    return parser


def _emit(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text if text.endswith("\n") else text + "\n")


def _cmd_generate(args) -> int:
    params = MeshParams(epsilon=args.epsilon, sigma=args.sigma, beta=args.beta, n_cells=args.n)
    mesh = family_mesh(args.family, params)
    _emit(mesh.to_json() if args.format == "json" else mesh.to_text(), args.out)
    if args.plot is not None:
        from .plots import mesh_figure

        mesh_figure(mesh, args.plot)
    return 0


def _cmd_solve(args) -> int:
    sigma = args.sigma if args.sigma is not None else float(args.p + 1)
    params = MeshParams(epsilon=args.epsilon, sigma=sigma, beta=args.beta, n_cells=args.n)
    mesh = family_mesh(args.family, params)
    bvp, exact = benchmark_problem(args.epsilon)
    solution = solve_bvp(bvp, mesh, args.p)
    err = energy_error(solution, exact, args.epsilon)
    print(f"family={args.family} N={args.n} p={args.p} epsilon={args.epsilon!r} sigma={sigma!r}")
    print(f"dofs={solution.coefficients.size} solver_residual={solution.residual:.3e}")
    print(f"energy_error={err.total:.6e} (grad^2={err.gradient_part:.6e}, l2^2={err.l2_part:.6e})")
    if args.dump_solution is not None:
        path = args.dump_solution
        path.parent.mkdir(parents=True, exist_ok=True)
        if path.suffix == ".json":
            path.write_text(solution.to_json() + "\n")
        else:
            path.write_text(solution.sample_text(args.samples))
    return 0


def _cmd_study(args) -> int:
    if args.config is not None:
        config = StudyConfig.from_json(Path(args.config).read_text())
    else:
        config = StudyConfig()
    table = run_study(config)
    fmt = args.format or config.output_format
    _emit(table.render(fmt), args.out)
    if args.out is not None and not args.no_figures:
        from .plots import convergence_figure

        figure_path = args.out.with_name(args.out.stem + "_convergence.png")
        convergence_figure(table, figure_path)
        print(f"figure written to {figure_path}", file=sys.stderr)
    return 0


def _cmd_verify(args) -> int:
    table = run_study(StudyConfig())
    report = compare_reference(
        table, args.reference, tol_error=args.tol_error, tol_rate=args.tol_rate
    )
    print(report.render_text())
    return 0 if report.passed else 1


def _cmd_mesh_report(args) -> int:
    params = MeshParams(epsilon=args.epsilon, sigma=args.sigma, beta=args.beta, n_cells=args.n)
    data = mesh_report(params, args.family)
    if args.format == "json":
        print(json.dumps(data.to_dict()))
    else:
        print(data.to_text())
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "solve": _cmd_solve,
    "study": _cmd_study,
    "verify": _cmd_verify,
    "mesh-report": _cmd_mesh_report,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (AssumptionViolated, ValueError, OSError) as exc:
        print(f"{_PROG}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
