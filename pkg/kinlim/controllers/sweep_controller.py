"""
Sweep controller for the `sweep` subcommand.
"""

from dataclasses import replace

from kinlim import storage
from kinlim.services.convergence_harness import ConvergenceHarnessService
from kinlim.views.sweep_view import SweepView
from .base_controller import BaseController


class SweepController(BaseController):
    """Controller for ε-sweeps and rate reports."""

    def __init__(self, settings=None):
        super().__init__(settings)
        self.view = SweepView()

    def sweep(self, run_config, out=None, jobs=1, synthetic=False, eta0=None):
        """
        Handle the sweep command.

        Args:
            run_config: Validated RunConfig
            out: Output root override
            jobs: Parallel kinetic runs
            synthetic: Fit injected power laws instead of running the solver
            eta0: Flow-induction region half-width override

        Returns:
            int: 0 if all criteria pass, 4 on acceptance failure, 2/3 on errors
        """
        return self.handle_request(self._sweep, run_config, out, jobs, synthetic, eta0)

    def _sweep(self, run_config, out, jobs, synthetic, eta0):
        self.run_dir = storage.make_run_dir('sweep', out or run_config['output']['directory'] or None)
        formats = run_config['output']['formats']
        tolerances = ConvergenceHarnessService.sweep_tolerances()
        plan = run_config.sweep_plan()
        if eta0 is not None:
            plan = replace(plan, eta0=eta0)
        if synthetic:
            self.view.render_start(f"Synthetic sweep over eps={list(plan.eps_values)}")
            reports = [ConvergenceHarnessService.synthetic_sweep(plan)]
        else:
            deltas = run_config['sweep']['delta_list']
            self.view.render_start(f"Sweep delta={deltas} over eps={list(plan.eps_values)} with {jobs} job(s)")
            reports = ConvergenceHarnessService.run_delta_sweep(
                plan, deltas, jobs, dump_dir=self.run_dir, progress=self.settings.PROGRESS_BARS and jobs == 1)
        summaries = []
        passed = True
        for report in reports:
            suffix = '' if len(reports) == 1 else f'-delta{report.delta:g}'
            self.view.write_report(self.run_dir, report, suffix, formats, tolerances)
            for eps, error in report.failures.items():
                self.view.render_warning(f"Run at eps={eps:g} failed: {error}")
            passed = passed and report.passed
            summaries.append(report.to_dict())
        storage.write_manifest(self.run_dir, 'sweep', run_config.to_dict(),
                               {'status': 'passed' if passed else 'failed', 'synthetic': synthetic,
                                'jobs': jobs, 'eta0': eta0})
        return self.view.render_sweep(summaries, passed)
