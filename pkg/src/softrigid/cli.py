"""Command-line entry point: ``python -m softrigid <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as sio
from .errors import BlowUpError, SoftRigidError
from .scene import load_scene

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_BLOWUP = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--scene", required=True, help="scene YAML file")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--deterministic", action="store_true", help="fixed accumulation order (always on)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--probe", type=int, nargs="*", default=None, help="node ids to record")
    common.add_argument("--decimate", type=int, default=None)
    common.add_argument("--design", default=None, help="design.csv to evaluate instead of the initial design")
    common.add_argument("--resume", default=None, help="optimizer snapshot (.npz)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="softrigid", description="Soft-rigid co-design simulator")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    sub.add_parser("simulate", parents=[common], help="forward run, writes trajectory.csv")
    o = sub.add_parser("optimize", parents=[common], help="co-design loop")
    o.add_argument("--iters", type=int, default=10)
    g = sub.add_parser("grad-check", parents=[common], help="adjoint vs finite differences")
    g.add_argument("--samples", type=int, default=20)
    g.add_argument("--h", type=float, default=1e-4)
    sub.add_parser("analyze", parents=[common], help="spectrum of the actuation signal")
    sub.add_parser("export", parents=[common], help="design.csv, voltage.csv and a rest-state snapshot")
    return p


def _design(sim, args):
    if args.resume:
        from .optimizer import load_snapshot
        return load_snapshot(args.resume)[0]
    if args.design:
        d = sio.read_design(args.design)
        if d.phi.shape != (sim.n_particles,) or d.gamma.shape != (sim.gs.n_designable,):
            raise SoftRigidError("design file does not match the scene")
        return d
    return sim.initial_design()


def _summary(path, rep, extra=None):
    data = dict(L_x_m=rep.L_x, D_soft_m=rep.D_soft, D_bone_m=rep.D_bone, L_total=rep.L_total,
                C=rep.C, lam=rep.lam, sigma=rep.sigma)
    data.update(extra or {})
    Path(path).write_text(json.dumps(data, indent=2))


def cmd_simulate(args, cfg):
    from .gradients import Multipliers, evaluate_design
    from .stepper import Simulator

    sim = Simulator(cfg)
    d = _design(sim, args)
    if args.probe is not None:
        cfg.simulation.probes = list(args.probe)
    if args.decimate is not None:
        cfg.simulation.decimate = args.decimate
    ev = evaluate_design(sim, d, Multipliers.initial(cfg.optimizer.sigma_init), record=True, checkpoint=False)
    out = Path(args.out)
    sio.export_trajectory(ev.run.trajectory, sim, out)
    _summary(out / "summary.json", ev.report, dict(steps=sim.n_steps, particles=sim.n_particles,
                                                   nodes=sim.net.n_nodes, bars=sim.net.n_bars))
    print(f"L_x = {ev.report.L_x * 1e3:.3f} mm over {sim.n_steps} steps; wrote {out}")


def cmd_optimize(args, cfg):
    from .optimizer import initial_state, load_snapshot, optimize
    from .stepper import Simulator

    sim = Simulator(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.iters < 0:
        raise SoftRigidError("--iters must be non-negative")
    if args.resume:
        design, state = load_snapshot(args.resume)
    else:
        design, state = initial_state(sim, _design(sim, args) if args.design else None)
    design, state, hist = optimize(sim, args.iters, design, state, log_path=out / "optimization_log.csv",
                                   snapshot_path=out / "optimizer_snapshot.npz")
    sio.export_design(sim, out)
    print(f"{len(hist.rows)} iteration(s) done, {hist.skipped} skipped; wrote {out}")


def cmd_grad_check(args, cfg):
    from .gradients import Multipliers, design_fd_check
    from .stepper import Simulator

    sim = Simulator(cfg)
    d = _design(sim, args)
    rng = np.random.default_rng(cfg.seed)
    n = d.flat().size
    subset = np.sort(rng.choice(n, size=min(args.samples, n), replace=False))
    res = design_fd_check(sim, d, Multipliers.initial(cfg.optimizer.sigma_init), subset, h=args.h)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "gradcheck.csv", "w") as fh:
        fh.write("variable_id,analytic,numeric,rel_error\n")
        for i, a, b, e in zip(res.index, res.analytic, res.numeric, res.rel_error):
            fh.write(f"{i},{a!r},{b!r},{e!r}\n")
    print(f"max rel error {res.max_rel:.3e}, median {res.median_rel:.3e}, "
          f"{100 * res.fraction_below(1e-2):.1f}% below 1e-2")


def cmd_analyze(args, cfg):
    from .actuation import synthesize_voltage
    from .spectrum import analyze_spectrum
    from .stepper import Simulator

    sim = Simulator(cfg)
    d = _design(sim, args)
    sig = cfg.actuators.signal
    dt = cfg.dt * (args.decimate or 1)
    t = cfg.phases.t_start_s + np.arange(int(round(cfg.phases.cycle_duration_s / dt))) * dt
    V = synthesize_voltage(d.w, t, sig.pulse_dt_s, sig.pulse_sigma_s, sig.pulse_amp, cfg.phases.cycle_duration_s,
                           cfg.phases.t_start_s, cfg.phases.t_end_s, sig.ceiling, sig.sharpness)
    rep = analyze_spectrum(V, dt, cfg.phases.cycle_duration_s)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = dict(dominant_hz=list(map(float, rep.frequencies_hz)), shared_hz=rep.dominant_hz,
                phase_delay_rad=rep.phase_delay_rad)
    (out / "spectrum.json").write_text(json.dumps(data, indent=2))
    print(json.dumps(data))


def cmd_export(args, cfg):
    from .actuation import synthesize_voltage
    from .stepper import Simulator

    sim = Simulator(cfg)
    sim.set_design(_design(sim, args))
    out = Path(args.out)
    sio.export_design(sim, out)
    sig = cfg.actuators.signal
    dt = cfg.dt * (args.decimate or cfg.simulation.decimate)
    t = np.arange(int(round(cfg.phases.t_end_s / dt)) + 1) * dt
    V = synthesize_voltage(sim.design.w, t, sig.pulse_dt_s, sig.pulse_sigma_s, sig.pulse_amp,
                           cfg.phases.cycle_duration_s, cfg.phases.t_start_s, cfg.phases.t_end_s, sig.ceiling,
                           sig.sharpness)
    sio.write_voltage(out / "voltage.csv", t, V)
    sio.write_snapshot(out / "particles_0000000.bin", sim.x0, sim.phi_hat, 0, 0.0)
    print(f"wrote {out}")


COMMANDS = {"simulate": cmd_simulate, "optimize": cmd_optimize, "grad-check": cmd_grad_check,
            "analyze": cmd_analyze, "export": cmd_export}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_scene(args.scene)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.deterministic:
            cfg.simulation.deterministic = True
        COMMANDS[args.command](args, cfg)
    except BlowUpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except (SoftRigidError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
