"""
Sorting helper utilities for the FairRec marketing-bias lab
Provides consistent ordering for model rows and market segments in reports
"""

import re

# Row order of the comparison table: baselines first, fairness-aware variants after
MODEL_ORDER = [
    'itemCF',
    'userCF',
    'PoissonMF',
    'MF',
    'MF (reweighted)',
    'MF (corr.value)',
    'MF (corr.error)',
]


class SortingHelpers:
    """Helper class for sorting operations"""

    @staticmethod
    def get_model_sort_key(model_name):
        """
        Get sort key for a model name
        Priority: known comparison rows in table order, then anything else alphabetically
        """
        name = (model_name or '').strip()
        if name in MODEL_ORDER:
            return (0, MODEL_ORDER.index(name), name)

        # Variants with a suffix (e.g. "MF (corr.error) seed=3") sort next to their base row
        base = re.sub(r'\s+\S*=\S*$', '', name)
        if base in MODEL_ORDER:
            return (1, MODEL_ORDER.index(base), name)

        return (2, 0, name.lower())

    @staticmethod
    def sort_model_names(names):
        """Sort model names alphabetically (report rows)"""
        return sorted(names, key=lambda n: (n.lower(), n))

    @staticmethod
    def sort_comparison_rows(rows, key='model'):
        """Sort comparison rows using the table order"""
        return sorted(rows, key=lambda row: SortingHelpers.get_model_sort_key(row.get(key)))

    @staticmethod
    def sort_segments_by_size(counts):
        """
        Order (m, n) cells by descending market size, ties by (m, n)
        counts: M×N array of training interaction counts
        """
        cells = []
        for m in range(counts.shape[0]):
            for n in range(counts.shape[1]):
                cells.append((m, n))
        return sorted(cells, key=lambda mn: (-int(counts[mn]), mn[0], mn[1]))
