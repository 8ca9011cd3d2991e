"""Batch command-line front end.

Subcommands cover the whole pipeline (lift / diffuse / project and the
one-shot inpaint drivers), the curve-completion solver, and generators for
synthetic demo scenes.  Exit codes are a stable contract: 0 on success, 2
for configuration or file-format problems, 3 for numerical failures.

Flags take beta squared (--beta2) so that parameter recipes can be quoted
directly; inpaint --steps counts restoration intervals for the dr method
and Crank-Nicolson steps otherwise.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import phantoms
from .curves import BoundaryData, SolverOptions, complete_curve
from .errors import ConvergenceError, FormatError
from .grid import (AngleGrid, Image, load_image, load_lifted, load_mask,
                   save_image, save_lifted)
from .lift import LiftParams, lift, lift_cross, lift_fixed_angle, project_max, project_sum
from .restore import AheParams, ahe, dynamic_restoration
from .spectral import DiffusionParams, SpectralDiffuser
from .varying import VaryingCoeffParams, coefficient_field, diffuse_varying


class ConfigError(ValueError):
    pass


class _Diagnostics:
    def __init__(self, path):
        self.path = path
        self.events = []

    def emit(self, event, **fields):
        self.events.append({"event": event, **fields})

    def write(self):
        if self.path is None:
            return
        with open(self.path, "w") as fh:
            for ev in self.events:
                fh.write(json.dumps(ev) + "\n")


def _lift_params(args) -> LiftParams:
    return LiftParams(smoothing_sigma=args.sigma, gradient_threshold=args.grad_threshold)


def _build_lift(args, img: Image, grid: AngleGrid):
    if args.fixed_angle is not None and args.cross is not None:
        raise ConfigError("--fixed-angle and --cross are mutually exclusive")
    if args.fixed_angle is not None:
        return lift_fixed_angle(img, args.fixed_angle, grid)
    if args.cross is not None:
        struct = load_image(args.cross)
        return lift_cross(struct, img, _lift_params(args), grid)
    return lift(img, grid=grid, params=_lift_params(args))


def _diffusion_params(args, total_time=None, time_steps=None) -> DiffusionParams:
    return DiffusionParams(
        beta=math.sqrt(args.beta2),
        total_time=args.time if total_time is None else total_time,
        time_steps=args.cn_steps if time_steps is None else time_steps,
        grid=AngleGrid(args.angles),
        use_rotation_symmetry=args.rotation_symmetry,
    )


def _varying_params(args) -> VaryingCoeffParams:
    return VaryingCoeffParams(
        beta=math.sqrt(args.beta2),
        a0=args.a0, a1=args.a1, b0=args.b0, b1=args.b1,
        eps_sigma=args.eps_sigma, eps_star=args.eps_star,
        total_time=args.time, time_steps=args.cn_steps,
    )


def _cmd_inpaint(args) -> int:
    diag = _Diagnostics(args.diagnostics)
    t0 = time.perf_counter()
    img = load_image(args.input)
    mask = None
    if args.mask is not None:
        mask = load_mask(args.mask)
        mask.check_matches(img)
    if args.method in ("dr", "varying", "ahe") and mask is None:
        raise ConfigError(f"method {args.method!r} requires --mask")
    if args.method in ("dr", "ahe") and (args.fixed_angle is not None
                                         or args.cross is not None):
        raise ConfigError(
            f"--fixed-angle/--cross apply to pure and varying only, "
            f"not {args.method!r} (its lifts are part of the procedure)")
    if args.beta2 < 0:
        raise ConfigError("--beta2 must be >= 0")
    grid = AngleGrid(args.angles)
    diag.emit("config", method=args.method, beta2=args.beta2, time=args.time,
              angles=args.angles, steps=args.steps, input=str(args.input))

    if args.method == "pure":
        cn = args.cn_steps if args.cn_steps is not None else args.steps
        params = _diffusion_params(args, time_steps=cn)
        field = _build_lift(args, img, grid)
        out_field = SpectralDiffuser(img.width, img.height, params).diffuse(field)
        out = project_sum(out_field)
        diag.emit("mass", before=field.mass, after=out_field.mass)
    elif args.method == "dr":
        params = _diffusion_params(args)
        steps_log = []
        n_intervals = args.steps if args.steps is not None else 60
        out = dynamic_restoration(
            img, mask, args.time, n_intervals, params,
            lift_params=_lift_params(args),
            on_step=lambda st: steps_log.append(st),
        )
        for st in steps_log:
            diag.emit("dr_step", step=st.step_index, bad_pixels=st.bad_count)
        before = float(img.data.sum())
        after = steps_log[-1].field.mass if steps_log else before
        diag.emit("mass", before=before, after=after)
    elif args.method == "varying":
        vp = _varying_params(args)
        field = _build_lift(args, img, grid)
        coeffs = coefficient_field(mask, vp)
        out_field = diffuse_varying(field, coeffs, vp, threads=args.threads)
        out = project_sum(out_field)
        diag.emit("mass", before=field.mass, after=out_field.mass)
    elif args.method == "ahe":
        params = AheParams(
            strong=_varying_params(args),
            mix_weight=args.mix_weight,
            weak_time=args.weak_time,
            fill_cap=args.fill_cap,
            grid=grid,
            lift_params=_lift_params(args),
        )
        out, stages = ahe(img, mask, params, threads=args.threads, return_stages=True)
        diag.emit("mass", before=float(stages["filled"].data.sum()),
                  after=float(stages["mixed"].data.sum()))
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown method {args.method!r}")

    save_image(out.clamped(), args.output)
    diag.emit("done", wall_time_s=time.perf_counter() - t0, output=str(args.output))
    diag.write()
    return 0


def _cmd_lift(args) -> int:
    img = load_image(args.input)
    field = _build_lift(args, img, AngleGrid(args.angles))
    save_lifted(field, args.output)
    return 0


def _cmd_diffuse(args) -> int:
    field = load_lifted(args.input)
    params = DiffusionParams(
        beta=math.sqrt(args.beta2),
        total_time=args.time,
        time_steps=args.cn_steps,
        grid=field.grid,
        use_rotation_symmetry=args.rotation_symmetry,
    )
    out = SpectralDiffuser(field.width, field.height, params).diffuse(field)
    save_lifted(out, args.output)
    return 0


def _cmd_project(args) -> int:
    field = load_lifted(args.input)
    img = project_max(field) if args.mode == "max" else project_sum(field)
    save_image(img.clamped(), args.output)
    return 0


def _read_boundary_file(path) -> dict:
    values = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key=value, got {line!r}")
            key, _, raw = line.partition("=")
            try:
                values[key.strip()] = float(raw)
            except ValueError:
                raise ConfigError(f"{path}:{line_no}: bad number {raw.strip()!r}") from None
    return values


def _cmd_complete_curve(args) -> int:
    if args.boundary_file is not None:
        vals = _read_boundary_file(args.boundary_file)
        try:
            bd = BoundaryData(
                start=(vals["x_in"], vals["y_in"]),
                end=(vals["x_fin"], vals["y_fin"]),
                theta_start=vals["theta_in"],
                theta_end=vals["theta_fin"],
                horizon=(vals.get("a", 0.0), vals.get("b", 1.0)),
            )
        except KeyError as exc:
            raise ConfigError(f"{args.boundary_file}: missing key {exc.args[0]}") from None
    else:
        required = (args.start, args.end, args.theta_in, args.theta_fin)
        if any(v is None for v in required):
            raise ConfigError(
                "provide --boundary-file or all of --start --end --theta-in --theta-fin"
            )
        bd = BoundaryData(start=tuple(args.start), end=tuple(args.end),
                          theta_start=args.theta_in, theta_end=args.theta_fin,
                          horizon=tuple(args.horizon))

    sol = complete_curve(bd, beta=args.beta, m=args.segments,
                         options=SolverOptions(
                             penalty_rounds=args.penalty_rounds,
                             inner_iterations=args.inner_iterations,
                             restore_iterations=args.restore_iterations,
                             n_starts=args.starts,
                         ))
    if args.output is not None:
        with open(args.output, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "x", "y", "theta", "u", "v"])
            m = sol.controls.intervals
            for i in range(m + 1):
                t = sol.trajectory.times[i]
                x, y, th = sol.trajectory.states[i]
                u = sol.controls.u[i] if i < m else ""
                v = sol.controls.v[i] if i < m else ""
                writer.writerow([t, x, y, th, u, v])
    print(f"J = {sol.energy:.9g} (terminal defect {sol.defect:.3e})")
    return 0


def _cmd_make_image(args) -> int:
    maker = phantoms.IMAGES.get(args.name)
    if maker is None:
        raise ConfigError(
            f"unknown image {args.name!r}; choose from {sorted(phantoms.IMAGES)}"
        )
    img = maker(args.size)
    if args.mask is not None:
        mask = load_mask(args.mask)
        mask.check_matches(img)
        img = phantoms.corrupt(img, mask, fill=args.fill)
    save_image(img, args.output)
    return 0


def _cmd_make_mask(args) -> int:
    if args.kind == "random":
        mask = phantoms.random_mask(args.size, fraction=args.fraction, seed=args.seed)
    elif args.kind == "scratches":
        mask = phantoms.scratch_mask(args.size, count=args.count,
                                     thickness=args.thickness, seed=args.seed)
    elif args.kind == "block":
        side = max(2, args.size // 4)
        off = (args.size - side) // 2
        mask = phantoms.block_mask(args.size, off, off, side, side)
    else:  # pragma: no cover
        raise ConfigError(f"unknown mask kind {args.kind!r}")
    save_image(Image(np.where(mask.bad, 1.0, 0.0)), args.output)
    return 0


def _add_lift_flags(p):
    p.add_argument("--angles", type=int, default=30,
                   help="number of orientations N (default 30)")
    p.add_argument("--sigma", type=float, default=1.0,
                   help="pre-smoothing std-dev in pixels")
    p.add_argument("--grad-threshold", type=float, default=1e-4,
                   help="gradient magnitude below which a pixel is flat")
    p.add_argument("--fixed-angle", type=float, default=None, metavar="THETA",
                   help="lift everything at one orientation instead of the gradient")
    p.add_argument("--cross", default=None, metavar="IMAGE",
                   help="take orientations from IMAGE, values from the input")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srinpaint",
        description="Orientation-lift diffusion inpainting and curve completion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inpaint", help="restore an image in one shot")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--method", choices=("pure", "dr", "varying", "ahe"), default="pure")
    p.add_argument("--mask", default=None, help="mask image (>=128 marks corrupted)")
    p.add_argument("--beta2", type=float, default=0.25,
                   help="squared orientation-diffusion weight (default 0.25)")
    p.add_argument("--time", type=float, default=1.0, help="diffusion horizon T")
    p.add_argument("--steps", type=int, default=None,
                   help="dr: restoration intervals (default 60); pure: CN steps")
    p.add_argument("--cn-steps", type=int, default=None,
                   help="Crank-Nicolson steps (default: 32 per unit time)")
    p.add_argument("--rotation-symmetry", action="store_true",
                   help="share factorizations across rotation orbits (square grids)")
    p.add_argument("--a0", type=float, default=0.0)
    p.add_argument("--a1", type=float, default=None,
                   help="fiber-coefficient boost on the corrupted set (default beta2)")
    p.add_argument("--b0", type=float, default=0.0)
    p.add_argument("--b1", type=float, default=1.0)
    p.add_argument("--eps-sigma", type=float, default=2.0)
    p.add_argument("--eps-star", type=float, default=0.1)
    p.add_argument("--mix-weight", type=float, default=0.5,
                   help="ahe: weight of the averaged fill in the blend")
    p.add_argument("--weak-time", type=float, default=None,
                   help="ahe: weak-smoothing horizon (default time/10)")
    p.add_argument("--fill-cap", type=int, default=10_000)
    p.add_argument("--threads", type=int, default=os.cpu_count(),
                   help="worker cap for per-slice solves")
    p.add_argument("--diagnostics", default=None, metavar="PATH",
                   help="write JSON-lines run diagnostics to PATH")
    _add_lift_flags(p)
    p.set_defaults(func=_cmd_inpaint)

    p = sub.add_parser("lift", help="image -> lifted field (SRLF1)")
    p.add_argument("input")
    p.add_argument("output")
    _add_lift_flags(p)
    p.set_defaults(func=_cmd_lift)

    p = sub.add_parser("diffuse", help="evolve a lifted field (SRLF1 -> SRLF1)")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--beta2", type=float, default=0.25)
    p.add_argument("--time", type=float, default=1.0)
    p.add_argument("--cn-steps", type=int, default=None)
    p.add_argument("--rotation-symmetry", action="store_true")
    p.set_defaults(func=_cmd_diffuse)

    p = sub.add_parser("project", help="lifted field -> image")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--mode", choices=("sum", "max"), default="sum")
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("complete-curve", help="solve the endpoint completion problem")
    p.add_argument("--boundary-file", default=None,
                   help="key=value file: x_in y_in x_fin y_fin theta_in theta_fin [a b]")
    p.add_argument("--start", type=float, nargs=2, default=None, metavar=("X", "Y"))
    p.add_argument("--end", type=float, nargs=2, default=None, metavar=("X", "Y"))
    p.add_argument("--theta-in", type=float, default=None)
    p.add_argument("--theta-fin", type=float, default=None)
    p.add_argument("--horizon", type=float, nargs=2, default=(0.0, 1.0), metavar=("A", "B"))
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--segments", type=int, default=200)
    p.add_argument("--penalty-rounds", type=int, default=6)
    p.add_argument("--inner-iterations", type=int, default=400)
    p.add_argument("--restore-iterations", type=int, default=30)
    p.add_argument("--starts", type=int, default=5)
    p.add_argument("--output", default=None, help="trajectory CSV path")
    p.set_defaults(func=_cmd_complete_curve)

    p = sub.add_parser("make-image", help="generate a synthetic demo image")
    p.add_argument("name", help=f"one of {sorted(phantoms.IMAGES)}")
    p.add_argument("output")
    p.add_argument("--size", type=int, default=96)
    p.add_argument("--mask", default=None, help="corrupt with this mask before saving")
    p.add_argument("--fill", type=float, default=0.0)
    p.set_defaults(func=_cmd_make_image)

    p = sub.add_parser("make-mask", help="generate a synthetic corruption mask")
    p.add_argument("kind", choices=("random", "scratches", "block"))
    p.add_argument("output")
    p.add_argument("--size", type=int, default=96)
    p.add_argument("--fraction", type=float, default=0.3)
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--thickness", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_make_mask)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FormatError, FileNotFoundError, ValueError) as exc:
        print(f"srinpaint: error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, RuntimeError, ArithmeticError) as exc:
        print(f"srinpaint: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
