"""Command line entry point.

Subcommands: ``gen`` (write a dataset), ``run`` (drive an agent through an
episode), ``eval`` (score a recorded final state), ``replay`` (re-derive a
report from an action log), ``validate`` (solvability check).

Exit codes: 0 success, 1 task failure (unsuccessful run, failed validation,
generation failure), 2 usage or input errors.  Relative input paths that do
not exist are retried under ``$TIDYSIM_DATASET_ROOT``.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from ..generator import (
    DifficultyParams,
    GenerationError,
    NOISE_PRESETS,
    validate_solvable,
)
from . import files
from .agents import OracleAgent, RandomAgent
from .runner import DEFAULT_WATCHDOG_S, run_episode, replay_episode

DATASET_ROOT_VAR = "TIDYSIM_DATASET_ROOT"


class _UsageError(Exception):
    pass


def _resolve(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    root = os.environ.get(DATASET_ROOT_VAR)
    if root and not p.is_absolute():
        candidate = Path(root) / p
        if candidate.exists():
            return candidate
    raise _UsageError(f"no such file: {path}")


def _parse_seeds(text: str) -> range:
    lo, sep, hi = text.partition(":")
    try:
        if sep:
            return range(int(lo), int(hi))
        return range(int(lo), int(lo) + 1)
    except ValueError:
        raise _UsageError(f"--seeds wants N or LO:HI, got {text!r}") from None


def _agent_for(spec: str, seed: int):
    if spec.startswith(("exec:", "tcp:")):
        return spec
    if spec == "oracle":
        return OracleAgent()
    if spec == "random":
        return RandomAgent(seed)
    raise _UsageError(
        f"unknown agent {spec!r}; use exec:COMMAND, tcp:HOST:PORT, oracle, or random"
    )


def _print_report(report, out_path):
    sys.stdout.write(files.dumps_doc(report.as_dict()) + "\n")
    if out_path:
        files.save_report(report, out_path)


def _cmd_gen(args) -> int:
    out = args.out or os.environ.get(DATASET_ROOT_VAR)
    if not out:
        raise _UsageError(f"--out is required when {DATASET_ROOT_VAR} is not set")
    params = DifficultyParams(
        n_task_objects=args.objects,
        n_distractors=args.distractors,
        n_articulated=args.articulated,
        rooms=args.rooms,
        clutter_density=args.clutter,
        require_ordering=args.require_ordering,
        carry_capacity=args.capacity,
        noise=args.noise,
    )
    try:
        manifest = files.write_dataset(out, _parse_seeds(args.seeds), params)
    except GenerationError as e:
        print(f"generation failed: {e}", file=sys.stderr)
        return 1
    print(manifest)
    return 0


def _cmd_run(args) -> int:
    episode = files.load_episode(_resolve(args.episode))
    agent = _agent_for(args.agent, args.agent_seed)
    result = run_episode(agent, episode, watchdog=args.watchdog)
    if result.error:
        print(f"aborted: {result.error}", file=sys.stderr)
    _print_report(result.report, args.report)
    if args.log:
        files.save_action_log(result.actions, episode, args.log)
    if args.final_state:
        files.save_final_state(
            result.final_state,
            episode,
            args.final_state,
            ticks=result.report.ticks,
            energy=result.report.energy,
            agent_path_length=result.report.agent_path_length,
        )
    return 0 if result.report.success else 1


def _cmd_eval(args) -> int:
    from ..metrics import assemble_report

    episode = files.load_episode(_resolve(args.episode))
    state, meta = files.load_final_state(_resolve(args.final_state), episode)
    report = assemble_report(
        episode,
        state,
        ticks=meta["ticks"],
        energy=meta["energy"],
        agent_path_length=meta["agent_path_length"],
    )
    _print_report(report, args.report)
    return 0 if report.success else 1


def _cmd_replay(args) -> int:
    episode = files.load_episode(_resolve(args.episode))
    episode_id, actions = files.load_action_log(_resolve(args.log))
    if episode_id != episode.episode_id:
        raise _UsageError(
            f"action log is for episode {episode_id!r}, not {episode.episode_id!r}"
        )
    result = replay_episode(episode, actions)
    _print_report(result.report, args.report)
    return 0 if result.report.success else 1


def _cmd_validate(args) -> int:
    all_ok = True
    for path in args.episodes:
        episode = files.load_episode(_resolve(path))
        verdict = validate_solvable(episode)
        if verdict.ok:
            print(f"{episode.episode_id}: ok")
        else:
            all_ok = False
            print(f"{episode.episode_id}: UNSOLVABLE")
            for problem in verdict.problems:
                print(f"  - {problem}")
    return 0 if all_ok else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tidysim", description="rearrangement episodes: generate, run, score"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a dataset directory")
    gen.add_argument("--out", help=f"dataset directory (default ${DATASET_ROOT_VAR})")
    gen.add_argument("--seeds", required=True, help="seed N or range LO:HI (half open)")
    gen.add_argument("--objects", type=int, default=1)
    gen.add_argument("--distractors", type=int, default=0)
    gen.add_argument("--articulated", type=int, default=0)
    gen.add_argument("--rooms", type=int, default=1)
    gen.add_argument("--clutter", type=float, default=0.0)
    gen.add_argument("--require-ordering", action="store_true")
    gen.add_argument("--capacity", type=int, default=0)
    gen.add_argument("--noise", choices=sorted(NOISE_PRESETS), default="off")
    gen.set_defaults(func=_cmd_gen)

    run = sub.add_parser("run", help="run one episode against an agent")
    run.add_argument("--episode", required=True)
    run.add_argument("--agent", required=True, help="exec:COMMAND, tcp:HOST:PORT, oracle, random")
    run.add_argument("--agent-seed", type=int, default=0, help="seed for the random agent")
    run.add_argument("--watchdog", type=float, default=DEFAULT_WATCHDOG_S)
    run.add_argument("--report", help="also write the report here")
    run.add_argument("--log", help="write the action log here")
    run.add_argument("--final-state", help="write the final world state here")
    run.set_defaults(func=_cmd_run)

    ev = sub.add_parser("eval", help="score a recorded final state")
    ev.add_argument("--episode", required=True)
    ev.add_argument("--final-state", required=True)
    ev.add_argument("--report")
    ev.set_defaults(func=_cmd_eval)

    rp = sub.add_parser("replay", help="recompute a report from an action log")
    rp.add_argument("--episode", required=True)
    rp.add_argument("--log", required=True)
    rp.add_argument("--report")
    rp.set_defaults(func=_cmd_replay)

    va = sub.add_parser("validate", help="check episodes for solvability")
    va.add_argument("episodes", nargs="+")
    va.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code else 0
    try:
        return args.func(args)
    except (_UsageError, files.FileFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
