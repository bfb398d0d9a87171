"""
bench: closed-loop evaluation, ablation sweeps, timing and encoder analysis.
"""
import argparse
import logging
from pathlib import Path

from attacks import GlobalPerturbation, load_artifact
from commands.common import add_mode_flags, load_artifacts, load_matching_policy, parse_artifact_specs
from envs import DemoDataset
from evaluation import (
    Condition,
    ablation_sweep,
    build_conditions,
    dump_frames,
    emit_ablation,
    emit_encoder_analysis,
    emit_reports,
    emit_timing,
    encoder_analysis,
    first_observations,
    run_benchmark,
    timing_comparison,
)
from evaluation.benchmark import ARTIFACT_KINDS, PER_OBSERVATION_KINDS
from model import AttackMode, ConditionKind, RunConfig
from utils import ConfigError, SeedStreams, run_stamp

logger = logging.getLogger(__name__)

NAME = "bench"
TIMING_OBSERVATIONS = 5


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(NAME, help="Benchmark the policy under attack conditions")
    parser.add_argument("--ckpt", type=str, help="Policy checkpoint (default: runs/policy.dpab)")
    parser.add_argument("--conditions", nargs="+", choices=[k.value for k in ConditionKind],
                        help="Conditions to evaluate (default: clean)")
    parser.add_argument("--modes", nargs="+", choices=[m.value for m in AttackMode],
                        help="Modes of per-observation attacks (default: targeted)")
    parser.add_argument("--artifacts", nargs="*", metavar="KEY=PATH",
                        help="Pre-trained artifacts, keyed offline, patch, targeted-offline, ...")
    parser.add_argument("--episodes", type=int, help="Rollouts per condition (default: 50)")
    parser.add_argument("--episode-len", type=int, help="Env steps per rollout (default: 200)")
    parser.add_argument("--report-dir", type=str, help="Output directory (default: runs/reports)")
    parser.add_argument("--threads", type=int, help="Concurrent episodes (default: 1)")
    parser.add_argument("--sigma", type=float, help="Budget of per-observation attacks (default: 0.03)")
    parser.add_argument("--steps", type=int, help="PGD iterations of per-observation attacks (default: 50)")
    parser.add_argument("--alpha", type=float, help="PGD step size of per-observation attacks (default: 0.001875)")
    parser.add_argument("--ablate", choices=["sigma", "steps"], help="Sweep budget or step count with alpha = 2 sigma / N")
    parser.add_argument("--sigma-values", nargs="+", type=float, help="Budgets of the sigma sweep (default: 0.01 0.03 0.05)")
    parser.add_argument("--step-values", nargs="+", type=int, help="Step counts of the steps sweep (default: 10 20 50)")
    parser.add_argument("--timing", action="store_true", help="Time noise-prediction against end-to-end attacks")
    parser.add_argument("--timing-repetitions", type=int, help="Repetitions per timed method (default: 20)")
    parser.add_argument("--analyze-encoder", action="store_true", help="Encoder feature distances, random vs adversarial")
    parser.add_argument("--encoder-images", type=int, help="Observations for the encoder analysis (default: 1000)")
    parser.add_argument("--encoder-artifact", type=str,
                        help="Offline artifact for the encoder analysis; online attacks are used without it")
    parser.add_argument("--data", type=str, help="Dataset for the encoder analysis (default: runs/demos.dpab)")
    parser.add_argument("--dump-frames", action="store_true", help="Write clean and attacked first frames as PPM")
    add_mode_flags(parser)
    return parser


def overrides(args: argparse.Namespace) -> dict:
    modes = [args.mode] if args.mode else args.modes
    return {
        "paths.checkpoint": args.ckpt,
        "paths.report_dir": args.report_dir,
        "paths.data": args.data,
        "eval.conditions": args.conditions,
        "eval.modes": modes,
        "eval.episodes": args.episodes,
        "eval.threads": args.threads,
        "eval.sigma_values": args.sigma_values,
        "eval.step_values": args.step_values,
        "eval.timing_repetitions": args.timing_repetitions,
        "eval.encoder_images": args.encoder_images,
        "env.episode_len": args.episode_len,
        "attack.sigma": args.sigma,
        "attack.steps": args.steps,
        "attack.alpha": args.alpha,
    }


def validate(args: argparse.Namespace, config: RunConfig) -> None:
    """Reject flag combinations that cannot mean what the user asked for."""
    kinds = set(config.eval.conditions)
    benchmarking = args.conditions is not None or not (args.ablate or args.timing or args.analyze_encoder)
    if args.mode and args.modes:
        raise ConfigError("--targeted/--untargeted cannot be combined with --modes")
    if (args.mode or args.modes) and benchmarking and not args.ablate and not (kinds & set(PER_OBSERVATION_KINDS)):
        raise ConfigError(f"--{args.mode or 'modes'} has no effect on conditions "
                          f"{sorted(k.value for k in kinds)}; add online or e2e conditions")
    if args.sigma_values and args.ablate != "sigma":
        raise ConfigError("--sigma-values requires --ablate sigma")
    if args.step_values and args.ablate != "steps":
        raise ConfigError("--step-values requires --ablate steps")
    if args.timing_repetitions and not args.timing:
        raise ConfigError("--timing-repetitions requires --timing")
    if (args.encoder_images or args.encoder_artifact) and not args.analyze_encoder:
        raise ConfigError("--encoder-images and --encoder-artifact require --analyze-encoder")
    for key in parse_artifact_specs(args.artifacts):
        kind = key.split("-", 1)[1] if key.startswith(("targeted-", "untargeted-")) else key
        if kind not in {k.value for k in ARTIFACT_KINDS}:
            raise ConfigError(f"Unknown artifact key '{key}'")
        if ConditionKind(kind) not in kinds:
            raise ConfigError(f"Artifact '{key}' given but condition '{kind}' was not requested")


async def run(args: argparse.Namespace, config: RunConfig) -> dict:
    validate(args, config)
    policy = load_matching_policy(config)
    stamp = run_stamp(config)
    report_dir = Path(config.paths.report_dir)
    outputs: dict = {}

    if args.conditions is not None or not (args.ablate or args.timing or args.analyze_encoder):
        conditions = build_conditions(config.eval.conditions, config.eval.modes, load_artifacts(args.artifacts))
        reports = await run_benchmark(policy, config.env, conditions, config.eval.episodes, config.seed,
                                      config.attack, config.eval.threads, stamp)
        outputs["benchmark"] = [str(p) for p in emit_reports(reports, report_dir, stamp=stamp)]
        outputs["success_rates"] = {r.condition: r.success_rate for r in reports}
        if args.dump_frames:
            outputs["frames"] = _dump_frames(policy, conditions, config, report_dir / "frames")

    if args.ablate:
        values = config.eval.sigma_values if args.ablate == "sigma" else config.eval.step_values
        mode = AttackMode(config.eval.modes[0])
        table = await ablation_sweep(policy, config.env, args.ablate, values, config.eval.episodes, config.seed,
                                     config.attack, mode=mode, threads=config.eval.threads, stamp=stamp)
        outputs["ablation"] = [str(p) for p in emit_ablation(table, report_dir)]

    if args.timing:
        streams = SeedStreams(config.seed)
        observations = [first_observations(policy, Condition(ConditionKind.CLEAN), i, streams, config.env,
                                           config.attack)[0] for i in range(TIMING_OBSERVATIONS)]
        modes = config.eval.modes if (args.mode or args.modes) else tuple(AttackMode)
        table = timing_comparison(policy, observations, config.attack, config.eval.timing_repetitions, modes,
                                  master_seed=config.seed, threads=config.eval.threads, stamp=stamp)
        outputs["timing"] = [str(p) for p in emit_timing(table, report_dir)]

    if args.analyze_encoder:
        artifact = load_artifact(args.encoder_artifact) if args.encoder_artifact else None
        if artifact is not None and not isinstance(artifact, GlobalPerturbation):
            raise ConfigError("--encoder-artifact must be a global perturbation, not a patch")
        dataset = DemoDataset.load(config.paths.data)
        report = encoder_analysis(policy, dataset, config.eval.encoder_images, config.attack.sigma,
                                  config.attack, artifact, config.seed, stamp)
        outputs["encoder"] = [str(p) for p in emit_encoder_analysis(report, report_dir)]
    return outputs


def _dump_frames(policy, conditions, config: RunConfig, frame_dir: Path) -> list[str]:
    streams = SeedStreams(config.seed)
    written = []
    for condition in conditions:
        clean, attacked = first_observations(policy, condition, 0, streams, config.env, config.attack)
        written.extend(str(p) for p in dump_frames(clean, attacked, frame_dir, condition.label))
    return written
