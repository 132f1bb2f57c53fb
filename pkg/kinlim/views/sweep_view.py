"""
Sweep view for rate reports: series CSV, JSON summary and log-log SVG plots.
"""

import os
from collections import defaultdict

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from kinlim.exceptions import ConfigError  # noqa: E402
from .base_view import BaseView  # noqa: E402

SERIES_COLUMNS = ('quantity', 'eps', 't', 'value')
MICRO_MACRO_COLUMNS = ('t', 'eps', 'l2_macro', 'h1_macro', 'l2_micro', 'l2_micro_deriv', 'l2_micro_total',
                       'micro_ratio')
PLOTTED_EPS_QUANTITIES = ('e_macro', 'e_u', 'linf_macro')
PLOTTED_TIME_QUANTITIES = ('l2_macro', 'l2_micro', 'h1_macro', 'l2_micro_deriv')


def _grouped(rows):
    """quantity -> eps -> (times, values) from (quantity, eps, t, value) rows."""
    grouped = defaultdict(lambda: defaultdict(list))
    for quantity, eps, t, value in rows:
        grouped[quantity][float(eps)].append((float(t), float(value)))
    return {q: {eps: tuple(np.array(col) for col in zip(*sorted(points))) for eps, points in by_eps.items()}
            for q, by_eps in grouped.items()}


class SweepView(BaseView):
    """View class for sweep artifacts."""

    def __init__(self):
        """Initialize SweepView with entity name."""
        super().__init__('Sweep')

    def write_report(self, run_dir, report, suffix='', formats=('csv', 'json', 'svg'), tolerances=None):
        """
        Write rates{suffix}.csv, rates{suffix}.json and the SVG plots.

        Args:
            run_dir: Run directory
            report: RateReport
            suffix: File-name suffix (one per δ in Δ-list sweeps)
            formats: Subset of csv/json/svg
            tolerances: Acceptance thresholds recorded in the JSON

        Returns:
            list: Written paths
        """
        written = []
        if 'csv' in formats:
            written.append(self.write_csv(os.path.join(run_dir, f'rates{suffix}.csv'), SERIES_COLUMNS,
                                          report.series))
            if report.micro_macro:
                rows = [[entry[name] for name in MICRO_MACRO_COLUMNS] for entry in report.micro_macro]
                written.append(self.write_csv(os.path.join(run_dir, f'micro_macro{suffix}.csv'),
                                              MICRO_MACRO_COLUMNS, rows))
        if 'json' in formats:
            summary = report.to_dict()
            summary['tolerances'] = tolerances or {}
            written.append(self.write_json(os.path.join(run_dir, f'rates{suffix}.json'), summary))
        if 'svg' in formats:
            written.extend(self.plot_series(report.series, run_dir, suffix))
        return written

    def plot_series(self, rows, run_dir, suffix=''):
        """
        Log-log plots: ε-dependence at each output time and (1+t)-decay per ε.

        Returns:
            list: Written SVG paths
        """
        grouped = _grouped(rows)
        written = []
        for quantity in PLOTTED_EPS_QUANTITIES:
            if quantity not in grouped:
                continue
            by_eps = grouped[quantity]
            eps_values = np.array(sorted(by_eps))
            times = by_eps[eps_values[0]][0]
            fig, ax = plt.subplots(figsize=(6, 4))
            for k, t in enumerate(times):
                if t == 0.0 and len(times) > 1:
                    continue
                values = np.array([by_eps[e][1][k] if k < len(by_eps[e][1]) else np.nan for e in eps_values])
                mask = np.isfinite(values) & (values > 0)
                if np.any(mask):
                    ax.loglog(eps_values[mask], values[mask], marker='o', label=f't={t:g}')
            ax.set_xlabel('eps')
            ax.set_ylabel(quantity)
            ax.legend(fontsize='small')
            written.append(self._save(fig, os.path.join(run_dir, f'{quantity}_vs_eps{suffix}.svg')))
        for quantity in PLOTTED_TIME_QUANTITIES:
            if quantity not in grouped:
                continue
            fig, ax = plt.subplots(figsize=(6, 4))
            for eps, (times, values) in sorted(grouped[quantity].items()):
                mask = np.isfinite(values) & (values > 0)
                if np.any(mask):
                    ax.loglog(1.0 + times[mask], values[mask], marker='o', label=f'eps={eps:g}')
            ax.set_xlabel('1 + t')
            ax.set_ylabel(quantity)
            ax.legend(fontsize='small')
            written.append(self._save(fig, os.path.join(run_dir, f'{quantity}_vs_time{suffix}.svg')))
        return written

    def _save(self, fig, path):
        fig.tight_layout()
        fig.savefig(path, format='svg')
        plt.close(fig)
        return self.render_file(path)

    def read_series(self, path):
        """Rows (quantity, eps, t, value) back from a rates CSV."""
        header, rows = self.read_csv(path)
        if tuple(header) != SERIES_COLUMNS:
            raise ConfigError(f"{path} is not a rates CSV")
        return [(row[0], float(row[1]), float(row[2]), float(row[3])) for row in rows]

    def render_sweep(self, summaries, passed):
        """
        Render sweep outcome.

        Args:
            summaries: One report summary per δ
            passed: Whether every acceptance criterion held

        Returns:
            int: 0 on success, 4 on acceptance failure
        """
        if passed:
            return self.render_success(summaries, 'Sweep passed all acceptance criteria')
        return self.render_failure(summaries, 'Sweep failed acceptance criteria')
