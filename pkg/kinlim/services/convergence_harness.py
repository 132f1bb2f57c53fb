"""
Convergence harness service: ε-sweeps of the kinetic solver, power-law fits
in ε and in (1+t), and the flow-induction check.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import DEFAULT_TOLERANCES
from kinlim.decorators import log_duration
from kinlim.exceptions import ConfigError, KinlimError, NumericalError, PreconditionError
from kinlim.models import (DiagnosticsFrame, FitResult, FlowInductionResult, RateReport,
                           SimilarityProfile, SolverConfig, SweepPlan, VelocityGrid, series_rows)
from kinlim.services.fitting import fit_power_law
from kinlim.services.kinetic_solver import KineticSolverService
from kinlim.services.profile_builder import ProfileBuilderService, criterion

logger = logging.getLogger(__name__)

SERIES_QUANTITIES = ('e_macro', 'e_u', 'l2_macro', 'linf_macro', 'h1_macro',
                     'l2_micro', 'l2_micro_deriv', 'l2_micro_total', 'e_u_at')
EPS_FIT_QUANTITIES = ('e_macro', 'e_u', 'linf_macro', 'l2_macro', 'l2_micro')
TIME_FIT_QUANTITIES = ('l2_macro', 'l2_micro', 'h1_macro', 'l2_micro_deriv')

EPS_EXPONENT_MIN = 0.8
L2_MACRO_DECAY_MAX = -0.7
L2_MICRO_DECAY_MAX = -0.3
ORDERING_SLACK = 0.05
MIN_DECAY_POINTS = 5

# eps -> quantity -> (times, values)
Series = Dict[float, Dict[str, Tuple[np.ndarray, np.ndarray]]]


def _series_from_frames(frames: Sequence[DiagnosticsFrame]) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    times = np.array([frame.t for frame in frames], dtype=float)
    return {name: (times, np.array([getattr(frame, name) for frame in frames], dtype=float))
            for name in SERIES_QUANTITIES}


def _value_at(series, t):
    times, values = series
    hits = np.flatnonzero(np.isclose(times, t, rtol=0.0, atol=1e-12))
    if not hits.size:
        raise ConfigError(f"No output at t={t}; add it to the output times")
    return float(values[hits[0]])


def _simulate_eps(plan: SweepPlan, eps: float, dump_dir: Optional[str], progress: bool, prepared=None):
    """
    Worker body: one kinetic run; returns (eps, frames, error message).

    Worker processes rebuild the profile themselves; the diffusion coefficient holds closures.
    """
    try:
        profile, corrections, grid = ConvergenceHarnessService.prepare(plan) if prepared is None else prepared
        config = SolverConfig.on_domain(
            eps, plan.x_half_width, plan.cells_per_eps, velocity_grid=grid, t_end=plan.t_end,
            theta_minus=plan.theta_minus, theta_plus=plan.theta_plus, cfl=plan.cfl,
            output_times=tuple(plan.output_times), scheme=plan.scheme, order=plan.order,
            dump_dir=os.path.join(dump_dir, f'eps-{eps:g}') if dump_dir else None, progress=progress)
        builder = KineticSolverService.comparison_builder(profile, corrections, plan.gas, config)
        _, frames = KineticSolverService.run(config, plan.gas, builder)
        return eps, frames, None
    except KinlimError as e:
        logger.error("Run at eps=%g failed: %s", eps, e)
        return eps, [], f'{type(e).__name__}: {e}'


class ConvergenceHarnessService:
    """Service class for sweeps and rate reports."""

    fit_power_law = staticmethod(fit_power_law)

    @staticmethod
    def prepare(plan: SweepPlan):
        """
        Build the profile, corrections and velocity grid shared by every run of a plan.

        Returns:
            tuple: (SimilarityProfile, CorrectionProfile, VelocityGrid)
        """
        a = plan.gas.diffusion_coefficient()
        profile = ProfileBuilderService.solve_theta_hat(plan.theta_minus, plan.theta_plus, a,
                                                        plan.eta_half_width, plan.n_eta)
        theta_max = max(plan.theta_minus, plan.theta_plus)
        grid = VelocityGrid.uniform(plan.n_nodes, VelocityGrid.cutoff_for(theta_max, plan.gas.R,
                                                                          sigmas=plan.cutoff_sigmas))
        corrections = ProfileBuilderService.build_corrections(profile, plan.gas, grid)
        return profile, corrections, grid

    @staticmethod
    @log_duration
    def run_sweep(plan: SweepPlan, jobs: int = 1, dump_dir: Optional[str] = None,
                  progress: bool = False) -> Tuple[RateReport, Dict[float, List[DiagnosticsFrame]]]:
        """
        Run the kinetic solver for every ε of the plan and fit the error series.

        Args:
            plan: Sweep plan
            jobs: Worker processes (1 runs in-process)
            dump_dir: Directory for checkpoints and failure dumps
            progress: Show per-run progress bars

        Returns:
            tuple: (RateReport, frames per surviving ε)

        Raises:
            NumericalError: If fewer than plan.min_runs runs survive
        """
        profile, corrections, grid = ConvergenceHarnessService.prepare(plan)
        prepared = (profile, corrections, grid)
        if jobs > 1:
            args = [(plan, eps, dump_dir, False) for eps in plan.eps_values]
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = [pool.submit(_simulate_eps, *a) for a in args]
                results = []
                for a, future in zip(args, futures):
                    try:
                        results.append(future.result())
                    except Exception as e:
                        logger.exception("Worker for eps=%g crashed", a[1])
                        results.append((a[1], [], f'{type(e).__name__}: {e}'))
        else:
            results = [_simulate_eps(plan, eps, dump_dir, progress, prepared) for eps in plan.eps_values]

        frames = {eps: run_frames for eps, run_frames, error in results if error is None}
        failures = {eps: error for eps, _, error in results if error is not None}
        if len(frames) < plan.min_runs:
            raise NumericalError(f"Only {len(frames)} of {len(plan.eps_values)} runs survived; "
                                 f"a rate fit needs {plan.min_runs}")
        series = {eps: _series_from_frames(run_frames) for eps, run_frames in frames.items()}
        decay_eps = ConvergenceHarnessService._nearest(list(frames), plan.decay_eps)
        flow = None
        if plan.theta_minus != plan.theta_plus:
            flow = ConvergenceHarnessService.flow_induction_check(frames[decay_eps], profile, plan.eta0)
        report = ConvergenceHarnessService.build_report(plan, series, failures, flow)
        report = replace(report, micro_macro=ConvergenceHarnessService.micro_macro_report(frames[decay_eps]))
        return report, frames

    @staticmethod
    def run_delta_sweep(plan: SweepPlan, deltas: Sequence[float], jobs: int = 1,
                        dump_dir: Optional[str] = None, progress: bool = False) -> List[RateReport]:
        """
        One sweep per wave strength δ with θ+ = θ− + δ.

        With several δ each sweep dumps into its own delta-{δ} subdirectory.

        Returns:
            list: RateReport per δ, in the given order
        """
        reports = []
        for delta in deltas:
            sub = replace(plan, theta_plus=plan.theta_minus + delta)
            target = dump_dir
            if dump_dir and len(deltas) > 1:
                target = os.path.join(dump_dir, f'delta-{delta:g}')
            logger.info("Sweep delta=%g over eps=%s", delta, list(sub.eps_values))
            reports.append(ConvergenceHarnessService.run_sweep(sub, jobs, target, progress)[0])
        return reports

    @staticmethod
    def _nearest(values, target):
        return min(values, key=lambda value: (abs(value - target), value))

    @staticmethod
    def build_report(plan: SweepPlan, series: Series, failures: Dict[float, str] = None,
                     flow: Optional[FlowInductionResult] = None) -> RateReport:
        """
        Fit the error series and evaluate the acceptance criteria.

        Args:
            plan: The sweep plan (evaluation time, window, decay ε)
            series: Error series per ε
            failures: Failed runs by ε
            flow: Flow-induction result, when available

        Returns:
            RateReport: Fits, raw series rows and criteria
        """
        eps_sorted = sorted(series, reverse=True)
        rows = []
        for eps in eps_sorted:
            for name, (times, values) in series[eps].items():
                rows.extend(series_rows(name, eps, list(times), list(values)))

        fits = []
        for name in EPS_FIT_QUANTITIES:
            available = [eps for eps in eps_sorted if name in series[eps]]
            values = [_value_at(series[eps][name], plan.eval_time) for eps in available]
            fits.append(fit_power_law(name, 'eps', available, values, fixed=plan.eval_time))

        decay_eps = ConvergenceHarnessService._nearest(eps_sorted, plan.decay_eps)
        for name in TIME_FIT_QUANTITIES:
            if name in series[decay_eps]:
                fits.append(ConvergenceHarnessService.temporal_decay_fit(series[decay_eps][name], plan.fit_window,
                                                                         quantity=name, eps=decay_eps))

        criteria = ConvergenceHarnessService._criteria(plan, series, fits, eps_sorted, decay_eps, flow)
        return RateReport(delta=plan.delta, fits=tuple(fits), series=tuple(rows), criteria=tuple(criteria),
                          failures=dict(failures or {}), flow=flow)

    @staticmethod
    def _criteria(plan, series, fits, eps_sorted, decay_eps, flow):
        by_key = {(f.quantity, f.variable): f for f in fits}
        criteria = []

        def exponent_check(name, key, threshold, upper):
            fit = by_key.get(key)
            if fit is None or fit.degenerate:
                note = fit.note if fit is not None else 'not available'
                criteria.append(criterion(name, None, threshold, True, f'degenerate series ({note})'))
                return
            passed = fit.exponent <= threshold if upper else fit.exponent >= threshold
            criteria.append(criterion(name, fit.exponent, threshold, passed, f'R^2={fit.r_squared:.4f}'))

        exponent_check('diffusion_limit_rate', ('e_macro', 'eps'), EPS_EXPONENT_MIN, upper=False)
        e_u = [_value_at(series[eps]['e_u'], plan.eval_time) for eps in eps_sorted]
        if max(e_u) < 1e-13:
            criteria.append(criterion('velocity_error_decreasing', e_u, None, True, 'degenerate series'))
        else:
            criteria.append(criterion('velocity_error_decreasing', e_u, None,
                                       all(b < a for a, b in zip(e_u, e_u[1:]))))
        exponent_check('macro_decay_rate', ('l2_macro', 'time'), L2_MACRO_DECAY_MAX, upper=True)
        exponent_check('micro_decay_rate', ('l2_micro', 'time'), L2_MICRO_DECAY_MAX, upper=True)
        ordered, worst = ConvergenceHarnessService.ordering_check(series, ORDERING_SLACK)
        criteria.append(criterion('error_ordering', worst, 1.0 + ORDERING_SLACK, ordered,
                                   'largest ratio e(smaller eps)/e(larger eps) over output times'))
        if flow is not None:
            criteria.append(criterion('flow_induction', flow.c, 0.0, flow.passed, f'C={flow.C:.6g}'))
        finite = all(np.all(np.isfinite(series[eps]['e_u_at'][1])) for eps in eps_sorted if 'e_u_at' in series[eps])
        criteria.append(criterion('velocity_error_location_finite', None, None, finite))
        return criteria

    @staticmethod
    def ordering_check(series: Series, slack: float = ORDERING_SLACK) -> Tuple[bool, float]:
        """
        e_macro must not grow as ε decreases, at every shared output time, up to the slack.

        Returns:
            tuple: (passed, worst ratio)
        """
        eps_sorted = sorted(series, reverse=True)
        worst = 0.0
        for larger, smaller in zip(eps_sorted, eps_sorted[1:]):
            t_big, e_big = series[larger]['e_macro']
            t_small, e_small = series[smaller]['e_macro']
            for t, value in zip(t_small, e_small):
                hits = np.flatnonzero(np.isclose(t_big, t, rtol=0.0, atol=1e-12))
                if not hits.size:
                    continue
                reference = e_big[hits[0]]
                if reference < 1e-13:
                    continue
                worst = max(worst, float(value / reference))
        return worst <= 1.0 + slack, worst

    @staticmethod
    def temporal_decay_fit(series: Tuple[Sequence[float], Sequence[float]], window: Tuple[float, float],
                           quantity: str = 'series', eps: float = float('nan')) -> FitResult:
        """
        Least-squares slope of log(value) against log(1+t) inside the window.

        Args:
            series: (times, values)
            window: (t_start, t_stop) with t_start ≥ 1
            quantity: Name recorded in the fit
            eps: The ε held fixed

        Returns:
            FitResult: Fit in the variable 'time'

        Raises:
            ConfigError: If the window starts before t = 1
            PreconditionError: If fewer than five points fall in the window
        """
        start, stop = window
        if start < 1.0:
            raise ConfigError("Temporal fit window must start at t >= 1 to skip the initial transient")
        times = np.asarray(series[0], dtype=float)
        values = np.asarray(series[1], dtype=float)
        mask = (times >= start - 1e-12) & (times <= stop + 1e-12)
        if np.count_nonzero(mask) < MIN_DECAY_POINTS:
            raise PreconditionError(f"Temporal fit of {quantity} needs {MIN_DECAY_POINTS} points in "
                                    f"[{start}, {stop}], got {np.count_nonzero(mask)}")
        return fit_power_law(quantity, 'time', 1.0 + times[mask], values[mask], fixed=eps)

    @staticmethod
    def flow_induction_check(frames: Sequence, profile: SimilarityProfile, eta0: float = 1.0) -> FlowInductionResult:
        """
        Tightest (c, C) with c·θ_x ≤ u1 ≤ C·θ_x on |x| ≤ η0·√(1+t) over all frames.

        For θ− > θ+ both sides are negative and the ratio u1/θ_x is checked the same way.

        Args:
            frames: Objects with t, lagrangian_x, u and theta_x
            profile: Similarity profile giving the far fields
            eta0: Half-width of the parabolic region in η

        Returns:
            FlowInductionResult: c, C and whether c > 0 with θ_x of the expected sign

        Raises:
            PreconditionError: If θ− = θ+
            ConfigError: If the region leaves the computational domain
        """
        if profile.is_constant:
            raise PreconditionError("Flow induction needs distinct far-field temperatures")
        sign = 1.0 if profile.theta_plus > profile.theta_minus else -1.0
        lowest, highest = np.inf, -np.inf
        signed = True
        per_time = []
        for frame in frames:
            x = np.asarray(frame.lagrangian_x, dtype=float)
            radius = eta0 * np.sqrt(1.0 + frame.t)
            if radius > min(-x[0], x[-1]):
                raise ConfigError(f"Region |x| <= {radius:.4g} at t={frame.t:g} exits the domain")
            region = np.abs(x) <= radius
            u = np.asarray(frame.u, dtype=float)
            u1 = u[:, 0] if u.ndim == 2 else u
            theta_x = np.asarray(frame.theta_x, dtype=float)[region]
            signed = signed and bool(np.all(sign * theta_x > 0))
            ratio = u1[region] / theta_x
            c_t, C_t = float(np.min(ratio)), float(np.max(ratio))
            per_time.append((float(frame.t), c_t, C_t))
            lowest, highest = min(lowest, c_t), max(highest, C_t)
        passed = signed and lowest > 0.0
        logger.info("Flow induction over %d frames: c=%.4g C=%.4g passed=%s", len(per_time), lowest, highest, passed)
        return FlowInductionResult(c=lowest, C=highest, passed=passed, sign=sign, eta0=eta0,
                                   per_time=tuple(per_time))

    @staticmethod
    def micro_macro_report(frames: Sequence[DiagnosticsFrame]) -> Tuple[Dict, ...]:
        """Weighted microscopic norms beside the macroscopic ones, per output time."""
        table = []
        for frame in frames:
            total = frame.l2_micro_total
            table.append({
                't': frame.t, 'eps': frame.eps, 'l2_macro': frame.l2_macro, 'h1_macro': frame.h1_macro,
                'l2_micro': frame.l2_micro, 'l2_micro_deriv': frame.l2_micro_deriv, 'l2_micro_total': total,
                'micro_ratio': frame.l2_micro / total if total > 0 else float('nan'),
            })
        return tuple(table)

    @staticmethod
    def synthetic_sweep(plan: SweepPlan, amplitude: float = 3.0, eps_power: float = 2.0,
                        time_power: float = -1.0) -> RateReport:
        """
        Push injected series A·ε^p·(1+t)^q through the report path.

        Every quantity gets the same series, so every fitted ε-exponent is p
        and every temporal exponent is q.
        """
        series = {}
        times = np.asarray(plan.output_times, dtype=float)
        for eps in plan.eps_values:
            values = amplitude * eps ** eps_power * (1.0 + times) ** time_power
            per_eps = {name: (times, values) for name in SERIES_QUANTITIES if name != 'e_u_at'}
            per_eps['e_u_at'] = (times, np.zeros_like(times))
            series[float(eps)] = per_eps
        return ConvergenceHarnessService.build_report(plan, series)

    @staticmethod
    def default_plan(**overrides) -> SweepPlan:
        plan = SweepPlan(eps_values=(0.1, 0.05, 0.025), theta_minus=1.0, theta_plus=1.1)
        return replace(plan, **overrides) if overrides else plan

    @staticmethod
    def sweep_tolerances():
        return {'eps_exponent_min': EPS_EXPONENT_MIN, 'l2_macro_decay_max': L2_MACRO_DECAY_MAX,
                'l2_micro_decay_max': L2_MICRO_DECAY_MAX, 'ordering_slack': ORDERING_SLACK,
                'mass_drift': DEFAULT_TOLERANCES.mass_drift}
