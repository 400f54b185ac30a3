"""
Command Line Interface - train-ram, run, resume, analyze

Examples:
    deep_emotion.py train-ram --out runs/ram --seed 1
    deep_emotion.py run --ram runs/ram/ram.h5 --condition face-only --second-layer on --out runs/a
    deep_emotion.py resume runs/a/checkpoints/epoch_5000.h5 --epochs 30000
    deep_emotion.py analyze --runs runs/a runs/b --out reports --bands 5

Settings layer as defaults < --config file < EMOTION__SECTION__KEY env
vars < --set section.key=value < dedicated flags.
Exit status: 0 on success, 1 on a diagnosed failure, 2 on bad arguments.
"""

from pathlib import Path
from typing import Dict, List, Optional, Sequence
import argparse
import sys

from utils.errors import EmotionModelError, RunHaltedError
from utils.logging import configure_logging, get_logger, log_event

logger = get_logger(__name__)

ATTENTION_SAMPLES = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='deep_emotion',
                                     description='Three-layer emotion model: RAM appraisal, emotional memory, DDPG')
    parser.add_argument('--log-level', default='INFO', help='logging level (default INFO)')
    parser.add_argument('--verbose', action='store_true', help='print progress banners')
    sub = parser.add_subparsers(dest='command', required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument('--config', type=Path, help='JSON or section.key=value config file')
        p.add_argument('--set', action='append', default=[], metavar='SECTION.KEY=VALUE',
                       help='override one setting (repeatable)')
        p.add_argument('--seed', type=int, help='master seed')
        p.add_argument('--out', type=Path, required=True, help='output directory')

    train = sub.add_parser('train-ram', help='train the first layer on a synthetic corpus')
    common(train)
    train.add_argument('--epochs', type=int, help='RAM training epochs')

    run = sub.add_parser('run', help='run the interaction loop')
    common(run)
    run.add_argument('--ram', type=Path, help='trained RAM checkpoint (ram.h5)')
    run.add_argument('--condition', choices=['face-only', 'face-natural'])
    run.add_argument('--second-layer', choices=['on', 'off'])
    run.add_argument('--epochs', type=int, help='training epochs')

    resume = sub.add_parser('resume', help='continue a run from a checkpoint')
    resume.add_argument('checkpoint', type=Path)
    resume.add_argument('--epochs', type=int, help='new training horizon')
    resume.add_argument('--seed', type=int, help='re-derive all random streams from this seed')
    resume.add_argument('--out', type=Path, help='run directory (default: the checkpoint\'s)')

    analyze = sub.add_parser('analyze', help='write CSV/SVG reports for finished runs')
    analyze.add_argument('--runs', type=Path, nargs='+', required=True)
    analyze.add_argument('--out', type=Path, required=True)
    analyze.add_argument('--bands', type=int, default=5, help='epoch bands for PCA panels (default 5)')
    return parser


def flag_overrides(args: argparse.Namespace) -> Dict[str, object]:
    """Dedicated flags as dotted-path overrides"""
    from world.environment import Condition

    overrides: Dict[str, object] = {}
    if getattr(args, 'seed', None) is not None:
        overrides['run.seed'] = args.seed
    if args.command == 'train-ram' and args.epochs is not None:
        overrides['ram.epochs'] = args.epochs
    if args.command == 'run':
        if args.epochs is not None:
            overrides['run.epochs'] = args.epochs
        if args.condition is not None:
            overrides['environment.condition'] = Condition.parse(args.condition).value
        if args.second_layer is not None:
            overrides['run.with_second_layer'] = args.second_layer == 'on'
        if args.ram is not None:
            overrides['run.ram_checkpoint'] = str(args.ram)
    return overrides


def resolve_config(args: argparse.Namespace):
    from engine.config import load_config, parse_assignment

    overrides = dict(parse_assignment(line) for line in args.set)
    overrides.update(flag_overrides(args))
    return load_config(args.config, overrides)


def cmd_train_ram(args: argparse.Namespace) -> int:
    from analysis.reports import attention_svg
    from appraisal.ram import save_ram
    from appraisal.ram_training import train_ram
    from engine.rng import RngStreams, torch_generator
    from world.stimuli import generate_corpus, save_stimuli

    config = resolve_config(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    configure_logging(args.log_level, out / 'train_ram.log')
    streams = RngStreams(config.run.seed)

    corpus = generate_corpus(config.corpus.size, streams['corpus'], config.corpus.noise_level,
                             config.corpus.holdout_fraction, config.corpus.face_fraction,
                             config.ram.image_size)
    save_stimuli(out / 'corpus', corpus.train + corpus.holdout)
    config.to_json_file(out / 'config.json')

    result = train_ram(corpus, config.ram, streams['ram'], torch_generator(streams['init']), verbose=args.verbose)
    save_ram(out / 'ram.h5', result.model, metadata={'seed': config.run.seed,
                                                     'holdout_mae': list(result.holdout_mae)})
    result.write_loss_csv(out / 'ram_loss.csv')

    samples = (corpus.holdout or corpus.train)[:ATTENTION_SAMPLES]
    attention_svg(out / 'attention.svg', [s.image for s in samples],
                  [result.model.attention_trace(s.image) for s in samples])
    log_event(logger, "ram_trained", out=str(out), mae_valence=result.holdout_mae[0],
              mae_arousal=result.holdout_mae[1])
    print(result)
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    from engine.orchestrator import EmotionRunner

    config = resolve_config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    configure_logging(args.log_level, args.out / 'run.log')
    if args.verbose:
        print(config)
    runner = EmotionRunner(config, args.out, verbose=args.verbose)
    log = runner.run()
    print(f"{len(log)} epochs written to {args.out / 'run_log.csv'}")
    return 0


def cmd_resume(args: argparse.Namespace) -> int:
    from engine.orchestrator import EmotionRunner

    out = args.out if args.out is not None else args.checkpoint.parent.parent
    out.mkdir(parents=True, exist_ok=True)
    configure_logging(args.log_level, out / 'run.log')
    runner = EmotionRunner.resume(args.checkpoint, out_dir=out, epochs=args.epochs, seed=args.seed,
                                  verbose=args.verbose)
    log = runner.run()
    print(f"{len(log)} epochs written to {out / 'run_log.csv'}")
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    from analysis.reports import emit_reports

    configure_logging(args.log_level)
    bundle = emit_reports(args.runs, args.out, bands=args.bands, verbose=args.verbose)
    for notice in bundle.notices:
        print(f"notice: {notice}")
    print(f"{len(bundle.files)} report files in {args.out}")
    return 0


COMMANDS = {
    'train-ram': cmd_train_ram,
    'run': cmd_run,
    'resume': cmd_resume,
    'analyze': cmd_analyze,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except RunHaltedError as exc:
        log_event(logger, "run_halted", epoch=exc.epoch, diagnostic=exc.diagnostic)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EmotionModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
