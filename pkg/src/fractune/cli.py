"""Command-line entry point.

``fractune <command>`` runs one pipeline stage (or the whole pipeline)
against a JSON manifest, or answers one-shot queries (``apply-rule``,
``simulate``) without a manifest.  Exit status: 0 on success, 2 when a
stage's acceptance diff fails its gate, 1 on any other error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import published
from .lti import ParameterError
from .pipeline import (
    RunManifest,
    Source,
    StageReport,
    _ga_params,
    _spec_from_label,
    _write_csv,
    default_manifest,
    run_pipeline,
    run_stage,
)
from .robustness import is_settled, overshoot_pct, settling_time
from .rules import RULE_SLUGS, SOPTDParams, apply_rule
from .simulation import ControllerKind, FOPIDParams, SimConfig, closed_loop_step, cost_J

_STAGE_COMMANDS = {
    "reduce": "reduce",
    "tune": "tune",
    "evolve-rules": "gp",
    "robustness": "robustness",
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifest", type=Path, default=None,
                        help="JSON run manifest")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the manifest seed")
    parser.add_argument("--out", type=Path, default=None,
                        help="override the manifest output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fractune",
        description="model reduction, controller tuning, and rule evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    for command in ("reduce", "tune", "evolve-rules", "robustness", "pipeline"):
        p = sub.add_parser(command)
        _add_common(p)
        if command == "pipeline":
            p.add_argument("--force", action="store_true",
                           help="rerun stages even when stamps match")

    p = sub.add_parser("apply-rule", help="evaluate one published tuning rule")
    p.add_argument("--rule", required=True, choices=sorted(RULE_SLUGS))
    p.add_argument("--plant", default=None,
                   help="bench label, e.g. P2_alpha0.6 (uses its printed "
                        "reduced model)")
    p.add_argument("--gain", type=float, default=1.0)
    p.add_argument("--tau-max", type=float, default=None)
    p.add_argument("--tau-min", type=float, default=None)
    p.add_argument("--delay", type=float, default=None)
    p.add_argument("--out", type=Path, default=None,
                   help="also write the result under this directory")

    p = sub.add_parser("simulate", help="one closed-loop step response")
    p.add_argument("--plant", required=True, help="bench label")
    p.add_argument("--kind", default="fopid", choices=("pid", "fopid"))
    p.add_argument("--source", default=None,
                   choices=tuple(s.value for s in Source),
                   help="controller provenance (omit to pass explicit gains)")
    p.add_argument("--kp", type=float, default=None)
    p.add_argument("--ki", type=float, default=None)
    p.add_argument("--kd", type=float, default=None)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--horizon", type=float, default=100.0)
    p.add_argument("--out", type=Path, default=Path("fractune_out"))

    return parser


def _manifest_from(args) -> RunManifest:
    if args.manifest is not None:
        manifest = RunManifest.from_json_file(args.manifest)
    else:
        manifest = default_manifest(args.seed or 0,
                                    args.out or Path("fractune_out"))
    if args.seed is not None:
        manifest = RunManifest(args.seed, manifest.stages,
                               manifest.output_dir, manifest.fixture_dir)
    if args.out is not None:
        manifest = RunManifest(manifest.seed, manifest.stages,
                               args.out, manifest.fixture_dir)
    return manifest


def _print_report(report: StageReport) -> None:
    status = "skipped" if report.skipped else \
        ("FAIL" if report.gate_failures else "ok")
    print(f"{report.stage}: {status} ({report.rows} rows, "
          f"{len(report.outputs)} files)")
    for note in report.notes:
        print(f"  note: {note}")
    for failure in report.gate_failures:
        print(f"  gate: {failure}")


def _cmd_stage(args, stage: str) -> int:
    report = run_stage(_manifest_from(args), stage)
    _print_report(report)
    return 2 if report.gate_failures else 0


def _cmd_pipeline(args) -> int:
    reports = run_pipeline(_manifest_from(args), force=args.force)
    failed = False
    for report in reports:
        _print_report(report)
        failed = failed or bool(report.gate_failures)
    return 2 if failed else 0


def _cmd_apply_rule(args) -> int:
    kind = RULE_SLUGS[args.rule]
    if args.plant is not None:
        soptd = published.soptd_for(_spec_from_label(args.plant))
    else:
        missing = [n for n, v in (("--tau-max", args.tau_max),
                                  ("--tau-min", args.tau_min),
                                  ("--delay", args.delay)) if v is None]
        if missing:
            raise ParameterError(
                "give --plant or all of " + ", ".join(missing))
        soptd = SOPTDParams(args.gain, args.tau_max, args.tau_min, args.delay)
    params = apply_rule(kind, soptd)
    doc = {
        "rule": args.rule,
        "inputs": {"K": soptd.K, "tau_max": soptd.tau_max,
                   "tau_min": soptd.tau_min, "L": soptd.L},
        "params": {"Kp": params.Kp, "Ki": params.Ki, "Kd": params.Kd,
                   "lam": params.lam, "mu": params.mu},
    }
    text = json.dumps(doc, indent=2, sort_keys=True)
    print(text)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / f"apply_rule_{args.rule}.json").write_text(text + "\n")
    return 0


def _cmd_simulate(args) -> int:
    from .lti import make_testbench

    spec = _spec_from_label(args.plant)
    kind = ControllerKind(args.kind)
    if args.source is None:
        missing = [n for n, v in (("--kp", args.kp), ("--ki", args.ki),
                                  ("--kd", args.kd)) if v is None]
        if missing:
            raise ParameterError(
                "give --source or all of " + ", ".join(missing))
        params = FOPIDParams(args.kp, args.ki, args.kd, args.lam, args.mu)
        tag = "custom"
    elif Source(args.source) is Source.GA:
        manifest = default_manifest(0, args.out)
        params = _ga_params(manifest, spec, kind)
        if params is None:
            raise ParameterError(f"no printed GA row for {args.plant}")
        tag = "GA"
    else:
        from .rules import GeneMode, RuleKind

        gene = (GeneMode.SINGLE if Source(args.source) is Source.SG_RULE
                else GeneMode.MULTI)
        params = apply_rule(RuleKind(kind, gene), published.soptd_for(spec))
        tag = args.source

    scfg = SimConfig(dt=args.dt, horizon=args.horizon)
    traj = closed_loop_step(make_testbench(spec), params, scfg=scfg, kind=kind)
    J = cost_J(traj, scfg.w_itae, scfg.w_isco)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"sim_{spec.label()}_{kind.value}_{tag}.csv"
    _write_csv(path, ("t", "y", "u", "e"),
               zip(traj.t, traj.y, traj.u, traj.e))
    st = settling_time(traj)
    print(f"{spec.label()} {kind.value} {tag}: J={J:.6g} "
          f"overshoot={overshoot_pct(traj):.3g}% "
          f"settled={is_settled(traj)} "
          f"settling_time={'-' if st is None else format(st, '.6g')} "
          f"-> {path}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in _STAGE_COMMANDS:
            return _cmd_stage(args, _STAGE_COMMANDS[args.command])
        if args.command == "pipeline":
            return _cmd_pipeline(args)
        if args.command == "apply-rule":
            return _cmd_apply_rule(args)
        return _cmd_simulate(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
