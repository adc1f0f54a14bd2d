import logging
import time
from contextlib import contextmanager
from functools import partial
from pathlib import Path
from typing import Annotated, List, Optional

import pandas as pd
import typer
from pydantic import ValidationError

from src.cli.convergence import run_convergence, write_dat
from src.cli.export import (
    RunManifest,
    monitors_frame,
    trajectory_frame,
    write_csv,
    write_json,
)
from src.cli.init_expr import initial_data
from src.cli.settings import LabSettings
from src.cli.suites import SuiteContext, report, run_checks, summary_table
from src.errors import (
    DiffeomorphismError,
    InitExprError,
    MuDPError,
    OutOfDomainError,
    SolverFailure,
)
from src.expmap.exponential import exp_map
from src.expmap.jacobian import basis_labels, jacobian_expmap
from src.flows.config import SolverConfig
from src.flows.eulerian import solve_eulerian
from src.flows.lagrangian import solve_lagrangian
from src.flows.trajectory import Termination, Trajectory
from src.grid.periodic import grid_points

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_SOLVER_FAILURE = 4

LAYOUTS = ("long", "wide")

app = typer.Typer(
    help="Numerical laboratory for the muDP equation on the circle.",
    add_completion=False,
    no_args_is_help=True,
)

# Shared options
Init = Annotated[
    Optional[str],
    typer.Option("--init", help="Initial data, e.g. '0.2 + 0.05*cos(2*pi*x)'."),
]
Fourier = Annotated[
    Optional[Path],
    typer.Option("--fourier", help="JSON list of [k, cos-coeff, sin-coeff] triples."),
]
GridSize = Annotated[Optional[int], typer.Option("--n", help="Grid size (even).")]
TimeStep = Annotated[Optional[float], typer.Option("--dt", help="RK4 time step.")]
Horizon = Annotated[float, typer.Option("--t-end", help="Final time.")]
Rhs = Annotated[
    str, typer.Option("--rhs", help="momentum | transport | quasilinear.")
]
Strategy = Annotated[str, typer.Option("--strategy", help="compose | recursion.")]
Interp = Annotated[str, typer.Option("--interp", help="trig | spline.")]
Inverse = Annotated[str, typer.Option("--inverse", help="spectral | closed.")]
Dealias = Annotated[
    bool, typer.Option("--dealias/--no-dealias", help="2/3-rule on products.")
]
Out = Annotated[Optional[Path], typer.Option("--out", help="Output directory.")]
MonitorEvery = Annotated[
    int, typer.Option("--monitor-every", help="Record every k-th step.")
]
Layout = Annotated[
    str, typer.Option("--format", help="Trajectory CSV layout: long | wide.")
]
Jobs = Annotated[Optional[int], typer.Option("--n-jobs", help="joblib workers.")]
Progress = Annotated[bool, typer.Option("--progress/--no-progress")]
UxCap = Annotated[
    Optional[float],
    typer.Option("--u-x-cap", help="Blow-up threshold on sup|u_x|."),
]
SlopeFloor = Annotated[
    Optional[float],
    typer.Option("--slope-floor", help="Blow-up threshold on min phi_x."),
]


@app.callback()
def main(
    ctx: typer.Context,
    log_level: Annotated[
        Optional[str], typer.Option("--log-level", help="DEBUG, INFO, WARNING, ...")
    ] = None,
):
    settings = LabSettings()
    level = (log_level or settings.log_level).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s - %(levelname)s - %(message)s",
    )
    ctx.obj = settings


def _fail(code: int, message: str):
    logger.error(message)
    typer.echo(message, err=True)
    raise typer.Exit(code)


@contextmanager
def _exit_codes():
    """Maps library errors onto the command exit codes."""
    try:
        yield
    except ValidationError as e:
        fields = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}"
            for err in e.errors()
        )
        _fail(EXIT_CONFIG, f"Invalid configuration: {fields}")
    except InitExprError as e:
        hint = f" (expected {', '.join(e.expected)})" if e.expected else ""
        _fail(EXIT_CONFIG, f"Invalid initial data: {e}{hint}")
    except (OutOfDomainError, DiffeomorphismError) as e:
        _fail(EXIT_BLOWUP, f"Blow-up: {e}")
    except SolverFailure as e:
        _fail(EXIT_SOLVER_FAILURE, f"Solver failure: {e}")
    except MuDPError as e:
        _fail(EXIT_CONFIG, str(e))


def _config(settings: LabSettings, **fields) -> SolverConfig:
    """SolverConfig from the flags; unset n and dt fall back to settings."""
    fields = {k: v for k, v in fields.items() if v is not None}
    fields.setdefault("n", settings.n)
    fields.setdefault("dt", settings.dt)
    return SolverConfig(**fields)


def _out_dir(settings: LabSettings, out: Optional[Path]) -> Path:
    path = Path(out or settings.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _check_layout(layout: str):
    if layout not in LAYOUTS:
        raise typer.BadParameter(f"expected one of {LAYOUTS}", param_hint="--format")


def _termination_code(trajectory: Trajectory) -> int:
    if trajectory.termination is Termination.BLOWUP_DETECTED:
        return EXIT_BLOWUP
    if trajectory.termination is Termination.SOLVER_FAILURE:
        return EXIT_SOLVER_FAILURE
    return EXIT_OK


def _write_run(
    command: str,
    trajectory: Trajectory,
    out: Path,
    layout: str,
    started: float,
) -> int:
    """Trajectory CSV, monitors CSV and manifest; written whatever the termination."""
    files = [
        write_csv(
            out / f"{command}_trajectory.csv", trajectory_frame(trajectory, layout)
        ),
        write_csv(out / f"{command}_monitors.csv", monitors_frame(trajectory)),
    ]
    manifest = RunManifest.for_config(
        command,
        trajectory.config,
        termination=trajectory.termination.value,
        message=trajectory.message,
        files=[f.name for f in files] + [f"{command}_manifest.json"],
        extra={"layout": layout, "final_time": trajectory.final_time},
        wall_time=time.perf_counter() - started,
    )
    write_json(out / f"{command}_manifest.json", manifest)

    code = _termination_code(trajectory)
    if code != EXIT_OK:
        status = trajectory.termination.value
        typer.echo(f"{command}: {status}: {trajectory.message}", err=True)
    return code


@app.command()
def solve(
    ctx: typer.Context,
    init: Init = None,
    fourier: Fourier = None,
    n: GridSize = None,
    dt: TimeStep = None,
    t_end: Horizon = 1.0,
    rhs: Rhs = "momentum",
    inverse: Inverse = "spectral",
    dealias: Dealias = False,
    monitor_every: MonitorEvery = 1,
    layout: Layout = "long",
    u_x_cap: UxCap = None,
    slope_floor: SlopeFloor = None,
    out: Out = None,
    progress: Progress = False,
):
    """Eulerian integration of u_t = -A^-1 (3 (Au) u_x + u (Au)_x)."""
    settings: LabSettings = ctx.obj
    started = time.perf_counter()
    _check_layout(layout)
    with _exit_codes():
        cfg = _config(
            settings,
            n=n,
            dt=dt,
            t_end=t_end,
            rhs_mode=rhs,
            inverse=inverse,
            dealias=dealias,
            monitor_every=monitor_every,
            u_x_cap=u_x_cap,
            slope_floor=slope_floor,
        )
        u0 = initial_data(cfg.n, init, fourier)
        trajectory = solve_eulerian(u0, cfg, progress=progress)
        code = _write_run("solve", trajectory, _out_dir(settings, out), layout, started)
    raise typer.Exit(code)


@app.command()
def geodesic(
    ctx: typer.Context,
    init: Init = None,
    fourier: Fourier = None,
    n: GridSize = None,
    dt: TimeStep = None,
    t_end: Horizon = 1.0,
    strategy: Strategy = "compose",
    interp: Interp = "trig",
    inverse: Inverse = "spectral",
    dealias: Dealias = False,
    momentum_path: Annotated[
        str, typer.Option("--momentum-path", help="inversion_free | compose.")
    ] = "inversion_free",
    monitor_every: MonitorEvery = 1,
    layout: Layout = "long",
    u_x_cap: UxCap = None,
    slope_floor: SlopeFloor = None,
    out: Out = None,
    progress: Progress = False,
):
    """Lagrangian integration of the geodesic (phi, xi) from the identity."""
    settings: LabSettings = ctx.obj
    started = time.perf_counter()
    _check_layout(layout)
    with _exit_codes():
        cfg = _config(
            settings,
            n=n,
            dt=dt,
            t_end=t_end,
            strategy=strategy,
            interpolant=interp,
            inverse=inverse,
            dealias=dealias,
            momentum_path=momentum_path,
            monitor_every=monitor_every,
            u_x_cap=u_x_cap,
            slope_floor=slope_floor,
        )
        u0 = initial_data(cfg.n, init, fourier)
        trajectory = solve_lagrangian(u0, cfg, progress=progress)
        out_dir = _out_dir(settings, out)
        code = _write_run("geodesic", trajectory, out_dir, layout, started)
    raise typer.Exit(code)


@app.command()
def expmap(
    ctx: typer.Context,
    init: Init = None,
    fourier: Fourier = None,
    n: GridSize = None,
    dt: TimeStep = None,
    strategy: Strategy = "compose",
    interp: Interp = "trig",
    inverse: Inverse = "spectral",
    dealias: Dealias = False,
    modes: Annotated[
        int,
        typer.Option("--modes", help="Jacobian on 2M+1 basis functions; 0 skips it."),
    ] = 0,
    method: Annotated[
        str, typer.Option("--method", help="sensitivity_ode | finite_difference.")
    ] = "sensitivity_ode",
    n_jobs: Jobs = None,
    out: Out = None,
    progress: Progress = False,
):
    """exp(u0) = phi(1) and, with --modes, its truncated-basis Jacobian."""
    settings: LabSettings = ctx.obj
    started = time.perf_counter()
    with _exit_codes():
        cfg = _config(
            settings,
            n=n,
            dt=dt,
            t_end=1.0,
            strategy=strategy,
            interpolant=interp,
            inverse=inverse,
            dealias=dealias,
        )
        u0 = initial_data(cfg.n, init, fourier)
        out_dir = _out_dir(settings, out)
        try:
            phi = exp_map(u0, cfg)
        except (OutOfDomainError, DiffeomorphismError) as e:
            manifest = RunManifest.for_config(
                "expmap",
                cfg,
                termination=Termination.BLOWUP_DETECTED.value,
                message=str(e),
                files=["expmap_manifest.json"],
                wall_time=time.perf_counter() - started,
            )
            write_json(out_dir / "expmap_manifest.json", manifest)
            raise
        x = grid_points(cfg.n)
        frame = pd.DataFrame(
            {"x": x, "displacement": phi.displacement.values, "phi": phi.lift_values()}
        )
        files = [write_csv(out_dir / "expmap_diffeo.csv", frame)]
        extra = {"min_slope": phi.min_slope}

        if modes:
            jacobian = jacobian_expmap(
                u0,
                modes,
                cfg,
                method,
                n_jobs=n_jobs or settings.n_jobs,
                progress=progress,
            )
            labels = basis_labels(modes)
            matrix = pd.DataFrame(jacobian.matrix, columns=labels)
            matrix.insert(0, "response", labels)
            files.append(write_csv(out_dir / "expmap_jacobian.csv", matrix))
            extra.update(
                {
                    "modes": modes,
                    "method": method,
                    "singular_values": [float(s) for s in jacobian.singular_values],
                    "smallest_singular_value": jacobian.smallest_singular_value,
                }
            )
            sigma = jacobian.smallest_singular_value
            typer.echo(f"smallest singular value: {sigma:.6e}")

        manifest = RunManifest.for_config(
            "expmap",
            cfg,
            files=[f.name for f in files] + ["expmap_manifest.json"],
            extra=extra,
            wall_time=time.perf_counter() - started,
        )
        write_json(out_dir / "expmap_manifest.json", manifest)


@app.command()
def validate(
    ctx: typer.Context,
    n: GridSize = None,
    dt: TimeStep = None,
    only: Annotated[
        Optional[List[str]],
        typer.Option("--only", help="Check name or group; repeatable."),
    ] = None,
    inject_fault: Annotated[
        bool,
        typer.Option("--inject-fault", help="Perturb A^-1 to show the checks bite."),
    ] = False,
    n_jobs: Jobs = None,
    out: Out = None,
):
    """Runs the identity checks and writes a JSON report."""
    settings: LabSettings = ctx.obj
    started = time.perf_counter()
    with _exit_codes():
        suite = SuiteContext(
            n=n if n is not None else settings.n,
            dt=dt if dt is not None else settings.dt,
            inject_fault=inject_fault,
            n_jobs=n_jobs or settings.n_jobs,
        )
        cfg = suite.reference_config
        results = run_checks(suite, only)
        payload = report(results, suite)
        out_dir = _out_dir(settings, out)
        write_json(out_dir / "validation_report.json", payload)
        manifest = RunManifest.for_config(
            "validate",
            cfg,
            files=["validation_report.json", "validate_manifest.json"],
            extra={"only": only or [], "inject_fault": inject_fault},
            wall_time=time.perf_counter() - started,
        )
        write_json(out_dir / "validate_manifest.json", manifest)

    typer.echo(summary_table(results))
    if not payload["passed"]:
        failed = [r.name for r in results if not r.passed]
        typer.echo(f"{len(failed)} check(s) failed: {', '.join(failed)}", err=True)
        raise typer.Exit(EXIT_CHECK_FAILED)
    typer.echo(f"All {len(results)} checks passed.")


def _ladder_values(raw: str) -> List[float]:
    try:
        return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError as e:
        raise typer.BadParameter(f"not a comma-separated list of numbers: {raw}") from e


@app.command()
def converge(
    ctx: typer.Context,
    ladder: Annotated[str, typer.Option("--ladder", help="dt | n.")] = "dt",
    values: Annotated[
        str,
        typer.Option("--values", help="Comma-separated rungs, e.g. 4e-3,2e-3,1e-3."),
    ] = "4e-3,2e-3,1e-3",
    solver: Annotated[
        str, typer.Option("--solver", help="eulerian | lagrangian.")
    ] = "eulerian",
    init: Init = None,
    fourier: Fourier = None,
    n: GridSize = None,
    dt: TimeStep = None,
    t_end: Horizon = 1.0,
    rhs: Rhs = "momentum",
    strategy: Strategy = "compose",
    interp: Interp = "trig",
    inverse: Inverse = "spectral",
    dealias: Dealias = False,
    n_jobs: Jobs = None,
    out: Out = None,
    progress: Progress = False,
):
    """Self-convergence study along a dt or n ladder."""
    settings: LabSettings = ctx.obj
    started = time.perf_counter()
    rungs = _ladder_values(values)
    with _exit_codes():
        cfg = _config(
            settings,
            n=n,
            dt=dt,
            t_end=t_end,
            rhs_mode=rhs,
            strategy=strategy,
            interpolant=interp,
            inverse=inverse,
            dealias=dealias,
        )
        if init is None and fourier is None:
            init = "0.2 + 0.05*cos(2*pi*x)"
        # validate the initial data once before fanning out
        initial_data(cfg.n, init, fourier)
        initial = partial(initial_data, init=init, fourier=fourier)
        result = run_convergence(
            cfg,
            initial,
            ladder,
            rungs,
            solver,
            n_jobs=n_jobs or settings.n_jobs,
            progress=progress,
        )
        out_dir = _out_dir(settings, out)
        write_json(out_dir / "convergence_report.json", result.as_dict())
        write_dat(out_dir / "convergence.dat", result)
        manifest = RunManifest.for_config(
            "converge",
            cfg,
            files=[
                "convergence_report.json",
                "convergence.dat",
                "converge_manifest.json",
            ],
            extra={"ladder": ladder, "values": rungs, "solver": solver},
            wall_time=time.perf_counter() - started,
        )
        write_json(out_dir / "converge_manifest.json", manifest)

    typer.echo(result.table())
    typer.echo(f"observed order: {result.observed_order:.3f}")


if __name__ == "__main__":
    app()
