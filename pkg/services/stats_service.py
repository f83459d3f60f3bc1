"""
Statistics service for the FairRec marketing-bias lab
Handles χ² independence tests, two-way ANOVA, segment descriptive statistics and p-value distributions
"""

import logging
import math

import numpy as np
from scipy import linalg, special

from models.dataset import UNKNOWN_GROUP, SegmentKey
from models.statistics import AnovaResult, AnovaRow, Chi2Result, SegmentCell, SegmentSummary
from utils.exceptions import DegenerateDesign, DomainError, EmptyTable, ZeroExpectedCell

logger = logging.getLogger(__name__)

CI_Z = 1.96


class StatsService:
    """Service for the observational-study statistics"""

    # --- distributions ---------------------------------------------------------------

    @staticmethod
    def _check_domain(x, *dofs):
        if x is None or math.isnan(x):
            raise DomainError("Statistic must be a number")
        if x < 0:
            raise DomainError(f"Statistic must be nonnegative, got {x}")
        for dof in dofs:
            if dof < 1:
                raise DomainError(f"Degrees of freedom must be >= 1, got {dof}")

    @staticmethod
    def chi2_cdf(x, k):
        """Regularized lower incomplete gamma P(k/2, x/2)"""
        StatsService._check_domain(x, k)
        if math.isinf(x):
            return 1.0
        return float(special.gammainc(k / 2.0, x / 2.0))

    @staticmethod
    def chi2_sf(x, k):
        """Upper tail 1 - chi2_cdf, computed directly for precision far in the tail"""
        StatsService._check_domain(x, k)
        if math.isinf(x):
            return 0.0
        return float(special.gammaincc(k / 2.0, x / 2.0))

    @staticmethod
    def f_cdf(x, d1, d2):
        """Regularized incomplete beta I_{d1 x / (d1 x + d2)}(d1/2, d2/2)"""
        StatsService._check_domain(x, d1, d2)
        if math.isinf(x):
            return 1.0
        return float(special.betainc(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2)))

    @staticmethod
    def f_sf(x, d1, d2):
        """Upper tail of the F distribution via the complementary beta argument"""
        StatsService._check_domain(x, d1, d2)
        if math.isinf(x):
            return 0.0
        return float(special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x)))

    # --- contingency tables ----------------------------------------------------------------

    @staticmethod
    def expected_counts(observed):
        """E_{m,n} = row_m total × col_n total / grand total"""
        observed = np.asarray(observed, dtype=np.float64)
        total = observed.sum()
        if observed.size == 0 or total <= 0:
            raise EmptyTable("Contingency table has no observations")
        return np.outer(observed.sum(axis=1), observed.sum(axis=0)) / total

    @staticmethod
    def chi2_independence(observed):
        """Pearson χ² test of independence between the row and column factors"""
        observed = np.asarray(observed, dtype=np.float64)
        if observed.ndim != 2 or min(observed.shape) < 2:
            raise DegenerateDesign(f"χ² needs at least a 2×2 table, got shape {observed.shape}")

        expected = StatsService.expected_counts(observed)
        zero_cells = np.argwhere(expected <= 0)
        if len(zero_cells):
            m, n = zero_cells[0]
            raise ZeroExpectedCell(int(m), int(n))

        deviations = observed - expected
        statistic = float(np.sum(deviations ** 2 / expected))
        dof = (observed.shape[0] - 1) * (observed.shape[1] - 1)
        return Chi2Result(
            statistic=statistic,
            dof=dof,
            p_value=StatsService.chi2_sf(statistic, dof),
            observed=observed,
            expected=expected,
            deviations=deviations,
        )

    # --- ANOVA ----------------------------------------------------------------------

    @staticmethod
    def _residual_fit(design, y):
        """(residual sum of squares, rank) of the least-squares fit of y on design"""
        q, r, _ = linalg.qr(design, mode='economic', pivoting=True)
        diagonal = np.abs(np.diag(r))
        tolerance = max(design.shape) * np.finfo(np.float64).eps * (diagonal[0] if len(diagonal) else 0.0)
        rank = int(np.sum(diagonal > tolerance))
        basis = q[:, :rank]
        residual = y - basis @ (basis.T @ y)
        return float(residual @ residual), rank

    @staticmethod
    def _indicators(codes, levels):
        """Reference-level (first level dropped) indicator columns"""
        return np.column_stack([(codes == level).astype(np.float64) for level in range(1, levels)])

    @staticmethod
    def anova_arrays(y, user_groups, item_groups):
        """Two-way ANOVA on aligned arrays; UNKNOWN users and non-finite outcomes are dropped"""
        y = np.asarray(y, dtype=np.float64)
        user_groups = np.asarray(user_groups, dtype=np.int64)
        item_groups = np.asarray(item_groups, dtype=np.int64)
        keep = (user_groups != UNKNOWN_GROUP) & np.isfinite(y)
        y, user_groups, item_groups = y[keep], user_groups[keep], item_groups[keep]

        n_obs = len(y)
        if n_obs < 2:
            raise DegenerateDesign("ANOVA needs at least two observations")
        user_levels, user_codes = np.unique(user_groups, return_inverse=True)
        item_levels, item_codes = np.unique(item_groups, return_inverse=True)
        if len(user_levels) < 2 or len(item_levels) < 2:
            raise DegenerateDesign("Each ANOVA factor needs at least two levels")

        ones = np.ones((n_obs, 1))
        user_cols = StatsService._indicators(user_codes, len(user_levels))
        item_cols = StatsService._indicators(item_codes, len(item_levels))
        cross_cols = np.column_stack([
            user_cols[:, a] * item_cols[:, b]
            for a in range(user_cols.shape[1]) for b in range(item_cols.shape[1])
        ])

        rss_user, rank_user = StatsService._residual_fit(np.hstack([ones, user_cols]), y)
        rss_item, rank_item = StatsService._residual_fit(np.hstack([ones, item_cols]), y)
        rss_add, rank_add = StatsService._residual_fit(np.hstack([ones, user_cols, item_cols]), y)
        rss_full, rank_full = StatsService._residual_fit(np.hstack([ones, user_cols, item_cols, cross_cols]), y)

        dof_den = n_obs - rank_full
        if dof_den < 1:
            raise DegenerateDesign("No residual degrees of freedom: every observation sits in its own cell")

        total_ss = float(np.sum((y - y.mean()) ** 2))
        mean_sq_residual = rss_full / dof_den

        def effect(name, sum_sq, dof_num):
            if sum_sq <= 1e-12 * max(total_ss, 1.0):
                sum_sq = 0.0
            if dof_num < 1:
                logger.warning("ANOVA effect %s is not estimable with the populated cells", name)
                return AnovaRow(name, sum_sq, 0.0, 0, dof_den, 1.0)
            if mean_sq_residual == 0:
                F = math.inf if sum_sq > 0 else 0.0
            else:
                F = (sum_sq / dof_num) / mean_sq_residual
            return AnovaRow(name, sum_sq, F, dof_num, dof_den, StatsService.f_sf(F, dof_num, dof_den))

        return AnovaResult(
            product=effect('product', rss_user - rss_add, rank_add - rank_user),
            user=effect('user', rss_item - rss_add, rank_add - rank_item),
            interaction=effect('product:user', rss_add - rss_full, rank_full - rank_add),
            residual_sum_sq=rss_full,
            n_observations=n_obs,
        )

    @staticmethod
    def anova_two_way(values):
        """
        Type II two-way ANOVA with interaction.
        values: iterable of (outcome, SegmentKey); UNKNOWN-flagged keys are dropped
        """
        values = list(values)
        y = np.array([v for v, _ in values], dtype=np.float64)
        users = np.array([key.m for _, key in values], dtype=np.int64)
        items = np.array([key.n for _, key in values], dtype=np.int64)
        return StatsService.anova_arrays(y, users, items)

    # --- descriptive statistics ------------------------------------------------------------

    @staticmethod
    def segment_means(values):
        """Per-segment count, mean, standard error and 95% CI half-width"""
        grouped = {}
        for value, key in values:
            if key.is_unknown or not math.isfinite(value):
                continue
            grouped.setdefault(key, []).append(float(value))

        cells = {}
        for key in sorted(grouped, key=lambda k: (k.m, k.n)):
            sample = np.array(grouped[key])
            if len(sample) > 1:
                std_error = float(sample.std(ddof=1) / math.sqrt(len(sample)))
                cells[key] = SegmentCell(len(sample), float(sample.mean()), std_error, CI_Z * std_error, True)
            else:
                cells[key] = SegmentCell(1, float(sample[0]), 0.0, 0.0, False)
        return SegmentSummary(cells=cells)

    @staticmethod
    def segment_means_arrays(y, user_groups, item_groups):
        """segment_means over aligned arrays"""
        return StatsService.segment_means(
            (float(v), SegmentKey(int(m), int(n))) for v, m, n in zip(y, user_groups, item_groups)
        )
