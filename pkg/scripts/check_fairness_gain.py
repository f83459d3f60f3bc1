"""
Check that the fairness-aware losses reduce segment unfairness on a biased synthetic marketplace.

For each seed: generate a 2x2 marketplace with diagonal selection bias and +/-0.5 segment
shifts, train plain MF, MF (corr.error) and MF (reweighted), and score them on the test split.

Checks:
  - mean test F-statistic of MF (corr.error) <= 50% of plain MF
  - mean test MSE of MF (corr.error) <= 110% of plain MF
  - KL of MF (corr.error) or MF (reweighted) <= KL of plain MF in at least 4 of 5 seeds

Usage:
  python scripts/check_fairness_gain.py
  python scripts/check_fairness_gain.py --seeds 0 1 2 3 4 --epochs 100
"""

import argparse
import os
import sys

import numpy as np

# Ensure project root is on sys.path when running as a script
CURRENT_DIR = os.path.dirname(os.path.abspath(__file__))
PROJECT_ROOT = os.path.dirname(CURRENT_DIR)
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from app import configure_logging
from models.synthetic import SynthConfig
from models.training import LossConfig, TrainConfig
from services.data_service import DataService
from services.evaluation_service import EvaluationService
from services.synthetic_service import SyntheticService
from services.training_service import TrainingService

VARIANTS = {
    'MF': LossConfig(variant='plain'),
    'MF (corr.error)': LossConfig(variant='corr_error', alpha=1.0, kappa=(0, 0, 1)),
    'MF (reweighted)': LossConfig(variant='reweighted', kappa=(0, 0, 1)),
}

F_RATIO = 0.5
MSE_RATIO = 1.10
KL_WINS = 4


def run_seed(seed, epochs, learning_rate):
    cfg = SynthConfig(n_users=200, n_items=100, interactions_per_user=20, seed=seed,
                      selection_bias=[[1.0, 0.4], [0.4, 1.0]], segment_shift=[[0.5, -0.5], [-0.5, 0.5]])
    ds = SyntheticService.generate(cfg)
    split = DataService.split_leave_latest(ds)
    tc = TrainConfig(learning_rate=learning_rate, max_epochs=epochs, seed=seed)

    reports = {}
    for name, loss in VARIANTS.items():
        model, _ = TrainingService.train(ds, split, 'mf', loss, tc)
        reports[name] = EvaluationService.evaluate_model(model, ds, split, name, seed=seed)
    return reports


def main():
    parser = argparse.ArgumentParser(description='Check the fairness gain of the fairness-aware losses')
    parser.add_argument('--seeds', type=int, nargs='+', default=[0, 1, 2, 3, 4])
    parser.add_argument('--epochs', type=int, default=100)
    parser.add_argument('--learning-rate', type=float, default=0.01)
    parser.add_argument('--log-level', type=str, default='WARNING')
    args = parser.parse_args()

    configure_logging(args.log_level.upper())
    runs = []
    for seed in args.seeds:
        reports = run_seed(seed, args.epochs, args.learning_rate)
        runs.append(reports)
        print(f"seed {seed}: " + '  '.join(
            f"{name} MSE={r.mse:.3f} F={r.fairness_f.F if r.fairness_f else float('nan'):.3f} "
            f"KL={r.kl if r.kl is not None else float('nan'):.4f}"
            for name, r in reports.items()))

    def mean(name, metric):
        return float(np.mean([metric(run[name]) for run in runs]))

    plain_f = mean('MF', lambda r: r.fairness_f.F)
    fair_f = mean('MF (corr.error)', lambda r: r.fairness_f.F)
    plain_mse = mean('MF', lambda r: r.mse)
    fair_mse = mean('MF (corr.error)', lambda r: r.mse)
    kl_wins = sum(
        1 for run in runs
        if min(run['MF (corr.error)'].kl, run['MF (reweighted)'].kl) <= run['MF'].kl
    )

    checks = [
        ('F-statistic', fair_f <= F_RATIO * plain_f, f"{fair_f:.3f} vs plain {plain_f:.3f}"),
        ('MSE', fair_mse <= MSE_RATIO * plain_mse, f"{fair_mse:.4f} vs plain {plain_mse:.4f}"),
        ('KL', kl_wins >= min(KL_WINS, len(runs)), f"{kl_wins} of {len(runs)} seeds"),
    ]
    failures = 0
    for name, ok, detail in checks:
        failures += not ok
        print(f"{'PASS' if ok else 'FAIL':8s}{name}: {detail}")

    if failures:
        print(f"{failures} check(s) failed")
        sys.exit(1)
    print("All checks passed")


if __name__ == '__main__':
    main()
