"""
Check the lab's statistics against the reference marketing-bias tables.

Always runs:
  - χ² and deviations of the reference ModCloth and Electronics contingency tables

Runs when the released CSVs are given (otherwise reported as SKIPPED):
  - χ² overall and per period
  - two-way ANOVA F-values on ratings (and fit on ModCloth)

Usage:
  python scripts/reproduce_tables.py
  python scripts/reproduce_tables.py --modcloth data/df_modcloth.csv --electronics data/df_electronics.csv
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
from config import Config
from services.data_service import DataService
from services.stats_service import StatsService
from utils.exceptions import FairRecError

# user-identity rows x product-image columns
MODCLOTH_COUNTS = [[31800, 41361], [7038, 11327]]
ELECTRONICS_COUNTS = [[34259, 26478, 25963], [31587, 24930, 30907]]

REFERENCE = {
    'modcloth': {
        'counts': MODCLOTH_COUNTS,
        'deviations': {(0, 0): 754.98, (1, 0): -754.98},
        'chi2': {'all': 158.7, '<=2014': 0.5, '2015': 66.7, '2016': 70.8, '>=2017': 29.0},
        'anova': {
            'rating': {'product': 171.9, 'user': 46.3, 'product:user': 30.7},
            'fit': {'product': 293.1, 'user': 402.4, 'product:user': 0.0},
        },
    },
    'electronics': {
        'counts': ELECTRONICS_COUNTS,
        'deviations': {(0, 0): 1472.89, (0, 1): 880.88, (0, 2): -2353.77},
        'chi2': {'all': 581.8, '<=2014': 151.0, '2015': 172.7, '2016': 96.4, '>=2017': 120.8},
        'anova': {
            'rating': {'product': 62.6, 'user': 3.5, 'product:user': 0.9},
        },
    },
}

CHI2_TOLERANCE = 0.02
ANOVA_TOLERANCE = 0.10
ABSOLUTE_FLOOR = 1.0


def within(observed, reference, relative):
    return abs(observed - reference) <= max(relative * abs(reference), ABSOLUTE_FLOOR)


class Checker:
    def __init__(self):
        self.failures = 0

    def check(self, name, observed, reference, ok):
        status = 'PASS' if ok else 'FAIL'
        if not ok:
            self.failures += 1
        print(f"{status:8s}{name}: observed {observed:.3f}, reference {reference}")

    @staticmethod
    def skip(name, reason):
        print(f"{'SKIPPED':8s}{name}: {reason}")


def check_reference_tables(checker):
    for dataset, reference in REFERENCE.items():
        result = StatsService.chi2_independence(np.array(reference['counts'], dtype=np.int64))
        checker.check(f"{dataset} table chi2", result.statistic, reference['chi2']['all'],
                      within(result.statistic, reference['chi2']['all'], CHI2_TOLERANCE) and result.p_value < 0.001)
        for (m, n), deviation in reference['deviations'].items():
            observed = float(result.deviations[m, n])
            checker.check(f"{dataset} deviation ({m},{n})", observed, deviation, abs(observed - deviation) <= 0.05)


def check_released_csv(checker, dataset, path):
    reference = REFERENCE[dataset]
    if not path or not os.path.isfile(path):
        checker.skip(f"{dataset} released data", 'file not given' if not path else f'{path} not found')
        return

    try:
        ds = DataService.load(path, name=dataset)
    except FairRecError as e:
        checker.skip(f"{dataset} released data", str(e))
        return

    everything = np.arange(ds.n_interactions)
    subsets = {'all': everything}
    subsets.update(DataService.year_buckets(ds, Config.YEAR_EDGES))
    for label, expected in reference['chi2'].items():
        try:
            table = DataService.contingency_table(ds, subsets.get(label, np.array([], dtype=np.int64)))
            result = StatsService.chi2_independence(table.counts)
        except FairRecError as e:
            checker.skip(f"{dataset} chi2 {label}", str(e))
            continue
        checker.check(f"{dataset} chi2 {label}", result.statistic, expected,
                      within(result.statistic, expected, CHI2_TOLERANCE))

    outcomes = {'rating': ds.ratings, 'fit': ds.fit_outcomes if ds.has_fit else None}
    for outcome, effects in reference['anova'].items():
        if outcomes[outcome] is None:
            checker.skip(f"{dataset} anova {outcome}", 'no fit column')
            continue
        try:
            result = StatsService.anova_arrays(outcomes[outcome], ds.interaction_user_groups,
                                               ds.interaction_item_groups)
        except FairRecError as e:
            checker.skip(f"{dataset} anova {outcome}", str(e))
            continue
        rows = {row.effect: row for row in result.rows()}
        for effect, expected in effects.items():
            checker.check(f"{dataset} anova {outcome} {effect}", rows[effect].F, expected,
                          within(rows[effect].F, expected, ANOVA_TOLERANCE))


def main():
    parser = argparse.ArgumentParser(description='Check statistics against the reference marketing-bias tables')
    parser.add_argument('--modcloth', type=str, default=None, help='Released ModCloth CSV')
    parser.add_argument('--electronics', type=str, default=None, help='Released Electronics CSV')
    parser.add_argument('--log-level', type=str, default='WARNING')
    args = parser.parse_args()

    configure_logging(args.log_level.upper())
    checker = Checker()
    check_reference_tables(checker)
    check_released_csv(checker, 'modcloth', args.modcloth)
    check_released_csv(checker, 'electronics', args.electronics)

    if checker.failures:
        print(f"{checker.failures} check(s) failed")
        sys.exit(1)
    print("All checks passed")


if __name__ == '__main__':
    main()
