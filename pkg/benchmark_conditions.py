"""
Condition Study Benchmark

Run the three interaction conditions over several seeds and check the
desk-scale orderings (see engine.study).

Usage: python benchmark_conditions.py --out runs/study --seeds 0 1 2 --epochs 20000
"""

import sys
sys.path.insert(0, 'src')

from pathlib import Path
import argparse

from engine.config import load_config
from engine.study import (
    CONDITIONS, condition_means, mad_comparison, run_study, silhouette_increases, study_checks, write_summary
)


def main():
    parser = argparse.ArgumentParser(description='Desk-scale condition study')
    parser.add_argument('--out', type=Path, required=True)
    parser.add_argument('--config', type=Path)
    parser.add_argument('--seeds', type=int, nargs='+', default=[0, 1, 2])
    parser.add_argument('--epochs', type=int, default=20000)
    parser.add_argument('--evaluation-epochs', type=int, default=3000)
    args = parser.parse_args()

    print("\n" + "="*70)
    print("  🧠 CONDITION STUDY")
    print(f"  ({len(CONDITIONS)} conditions x {len(args.seeds)} seeds, {args.epochs} epochs)")
    print("="*70)

    config = load_config(args.config, {'run.epochs': args.epochs,
                                       'run.evaluation_epochs': args.evaluation_epochs})
    table = run_study(config, args.seeds, args.out)
    means = condition_means(table)

    print(f"\n{'='*70}")
    print("  📊 SEED-AVERAGED RESULTS (final 25% of training)")
    print('='*70)
    print(f"\n{'Condition':<16} {'LSTM loss':<12} {'Reward':<10}")
    print('─'*40)
    for name, _, _ in CONDITIONS:
        print(f"{name:<16} {means.loc[name, 'lstm_loss']:<12.5f} {means.loc[name, 'reward']:<10.3f}")

    comparison = mad_comparison(table)
    if comparison:
        print(f"\nMAD (L2 on vs off): valence p={comparison[0][3]:.4f}, arousal p={comparison[1][3]:.4f}")
    increases, seeds = silhouette_increases(table)
    print(f"Silhouette increased in {increases}/{seeds} seeds (face+natural, L2 on)")

    checks = study_checks(table)
    print(f"\n{'='*70}")
    print("  🎯 CHECKS")
    print('='*70)
    for name, passed in checks.items():
        print(f"  {'✅' if passed else '❌'} {name}")

    path = write_summary(table, checks, args.out)
    print(f"\nSummary written to {path}\n")


if __name__ == "__main__":
    main()
