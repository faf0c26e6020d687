# Licensed under GPL v3 (see https://www.gnu.org/licenses/).
"""
One runner per experiment kind. Each returns an ExperimentResult: a summary
of scalars, an optional density series and table for CSV output, and the
list of checks that failed.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .closed_forms import AnalyticDensity, bs_call_price, cauchy_poisson, heat_kernel, kac_variance
from .config import Experiment, MartingaleSource
from .errors import ContractViolation
from .grid import Field, l1_distance
from .measures import (DensitySeries, call_price_from_density, martingale_defect,
                       martingale_report_from_kg, robust_stats)
from .params import ModelParams, ProfileKind
from .particles import histogram, join_shards, simulate_shards
from .residuals import (SpaceTimeTestFunction, bs_limit_defect, cauchy_rhs, gauge_factor,
                        harmonic_residual, scan_lambda)
from .spectral_kg import (KGState, build_hamiltonian, build_metric, check_pseudo_hermiticity,
                          eigenvalues, evolve_exact, l2_norm, metric_eigenvalues, metric_norm)
from .telegraph import TelegraphState, check_stability, evolve, initial_state

# assertion thresholds shared by the runners
KG_IMAG_TOLERANCE = 1e-12
KG_EIGEN_TOLERANCE = 1e-10
KG_DRIFT_TOLERANCE = 1e-10
KG_L2_MIN_CHANGE = 1e-6
BS_IDENTITY_TOLERANCE = 1e-6
HEAT_LIMIT_L1 = 2e-2
KAC_VARIANCE_TOLERANCE = 0.05
MARTINGALE_TOLERANCE = 1e-8


@dataclass
class ExperimentResult:
    experiment: Experiment
    summary: Dict
    series: Optional[DensitySeries] = None
    companions: Dict[str, DensitySeries] = field(default_factory=dict)
    table: Optional[Tuple[Sequence[str], List[Sequence]]] = None
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self):
        return not self.failures

    def check(self, ok, message):
        if not ok:
            logging.warning(f"[Runner] check failed: {message}")
            self.failures.append(message)
        return ok


def run_evolve(config):
    grid, params = config.grid, config.params
    state = initial_state(grid, config.initial)
    dt = config.resolved_dt()
    series = evolve(state, params, config.time.tau_final, dt, config.time.stride)
    final = series.diagnostics[-1]
    summary = {
        "stability": check_stability(grid, params, dt).as_dict(),
        "n_snapshots": len(series),
        "final": final.as_dict(),
        "initial_mass": series.diagnostics[0].mass,
    }
    return ExperimentResult(Experiment.EVOLVE, summary, series=series)


def run_mc(config):
    """Monte-Carlo walkers against the finite-difference solution at tau_final."""
    grid, params, spec = config.grid, config.params, config.mc
    t = config.time.tau_final
    init = config.initial

    parts = simulate_shards(spec.n_particles, init, params, t, config.seed,
                            shards=spec.shards, workers=spec.workers)
    mc_density = histogram(parts, grid)
    ensemble = join_shards(parts, config.seed)
    fd_series = evolve(initial_state(grid, init), params, t, config.resolved_dt(), stride=None)
    fd_density = fd_series.final
    distance = l1_distance(fd_density, mc_density)

    summary = {"n_particles": spec.n_particles, "shards": spec.shards, "t": t,
               "l1_fd_mc": distance, "tolerance": spec.tolerance,
               "wave_speed": params.wave_speed, "flip_rate": params.flip_rate}
    result = ExperimentResult(
        Experiment.MC, summary,
        series=DensitySeries.from_snapshots([t], [mc_density]),
        companions={"fd": DensitySeries.from_snapshots([t], [fd_density])},
    )
    result.check(distance <= spec.tolerance, f"L1(FD, MC) = {distance:.4g} exceeds {spec.tolerance:g}")

    if init.kind is ProfileKind.POINT:
        reach = float(np.max(np.abs(ensemble.positions - init.center)))
        bound = params.wave_speed * t
        summary["max_displacement"] = reach
        result.check(reach <= bound * (1.0 + 1e-12), f"speed bound violated: {reach:g} > {bound:g}")
    if init.variance is not None:
        expected = kac_variance(t, params, var0=init.variance)
        measured = ensemble.variance()
        summary["variance"] = measured
        summary["kac_variance"] = expected
        summary["diffusive_variance"] = 2.0 * params.K * t + init.variance
        if expected > 0:
            error = abs(measured - expected) / expected
            summary["variance_relative_error"] = error
            result.check(error <= KAC_VARIANCE_TOLERANCE,
                         f"sample variance off the persistent-walk law by {error:.2%}")
    return result


def _kg_point(lam, mu, grid, spec, rng):
    params = ModelParams(lam, 1.0, mu)
    H = build_hamiltonian(grid, params)
    eta = build_metric(grid, params)
    eig = eigenvalues(H)
    omega = np.sqrt(H.d)
    expected = np.stack([-omega, omega], axis=1)
    metric_min = float(np.min(metric_eigenvalues(eta)))

    drift = 0.0
    for _ in range(spec.n_states):
        psi = rng.normal(size=grid.n_points) + 1j * rng.normal(size=grid.n_points)
        psi_dot = rng.normal(size=grid.n_points) + 1j * rng.normal(size=grid.n_points)
        state = KGState.from_amplitudes(grid, psi, psi_dot, lam)
        norm0 = metric_norm(state, mu)
        for t in spec.times:
            norm_t = metric_norm(evolve_exact(state, H, t), mu)
            drift = max(drift, abs(norm_t - norm0) / norm0)

    # ψ̇ = 0 start: energy moves into ψ̇, which the plain norm weighs by λ² instead of D⁻¹
    x = grid.coordinates()
    bump = KGState.from_amplitudes(grid, np.exp(-x ** 2), np.zeros(grid.n_points), lam)
    l2_0 = l2_norm(bump)
    l2_change = max(abs(l2_norm(evolve_exact(bump, H, t)) - l2_0) / l2_0 for t in spec.times)

    return {
        "lambda": lam,
        "mu": mu,
        "defect": check_pseudo_hermiticity(H, eta),
        "max_imag": float(np.max(np.abs(eig.imag))),
        "max_eigen_error": float(np.max(np.abs(eig.real - expected))),
        "metric_min_eigenvalue": metric_min,
        "metric_min_expected": min(lam ** 2, float(np.min(1.0 / H.d))) / 4.0,
        "metric_norm_drift": drift,
        "l2_norm_change": l2_change,
    }


def run_kg_check(config):
    grid, spec = config.grid, config.kg
    rng = np.random.default_rng(config.seed)
    rows = [_kg_point(lam, mu, grid, spec, rng) for lam in spec.lambdas for mu in spec.mus]
    columns = list(rows[0].keys())
    summary = {
        "n_modes": grid.n_points,
        "max_defect": max(r["defect"] for r in rows),
        "max_imag": max(r["max_imag"] for r in rows),
        "max_eigen_error": max(r["max_eigen_error"] for r in rows),
        "max_metric_norm_drift": max(r["metric_norm_drift"] for r in rows),
        "min_l2_norm_change": min(r["l2_norm_change"] for r in rows),
        "lattice": rows,
    }
    result = ExperimentResult(Experiment.KG_CHECK, summary,
                              table=(columns, [[r[c] for c in columns] for r in rows]))
    result.check(summary["max_defect"] <= spec.tolerance,
                 f"pseudo-Hermiticity defect {summary['max_defect']:.3g} above {spec.tolerance:g}")
    result.check(summary["max_imag"] <= KG_IMAG_TOLERANCE, "complex eigenvalues found")
    result.check(summary["max_eigen_error"] <= KG_EIGEN_TOLERANCE, "eigenvalues differ from ±√(k²+μ²)")
    result.check(summary["max_metric_norm_drift"] <= KG_DRIFT_TOLERANCE, "η-norm not conserved")
    result.check(summary["min_l2_norm_change"] > KG_L2_MIN_CHANGE, "plain L² norm unexpectedly conserved")
    for r in rows:
        result.check(abs(r["metric_min_eigenvalue"] - r["metric_min_expected"]) <= 1e-12,
                     f"metric spectrum off at lambda={r['lambda']}, mu={r['mu']}")
    return result


def run_residual_scan(config):
    grid, spec = config.grid, config.scan
    scan = scan_lambda(spec.lambdas, spec.tau, grid, workers=spec.workers)
    gauge = {str(lam): gauge_factor(spec.tau, lam) for lam in spec.lambdas}
    summary = dict(scan.as_dict())
    summary.update({
        "tau": spec.tau,
        "dz": grid.dx,
        "harmonic_residual": harmonic_residual(spec.tau, grid),
        "rhs_peak": {str(lam): float(cauchy_rhs(0.0, spec.tau, lam)) for lam in spec.lambdas},
        "gauge_factor": gauge,
    })
    result = ExperimentResult(
        Experiment.RESIDUAL_SCAN, summary,
        table=(["lambda", "residual"], [list(p) for p in zip(scan.lambdas, scan.residuals)]),
    )
    result.check(scan.supports_inverse_square,
                 f"fitted slope {scan.slope:.3f} (r2={scan.r_squared:.4f}) does not support O(lambda^-2)")
    return result


def _sweep_point(lam, sigma, grid, tau0, span):
    params = ModelParams.from_volatility(lam, sigma)
    start = Field(grid, heat_kernel(grid.coordinates(), tau0, params.K))
    dt = check_stability(grid, params, 1.0).dt_max
    series = evolve(TelegraphState.at_rest(start, tau0), params, tau0 + span, dt, stride=None)
    target = Field(grid, heat_kernel(grid.coordinates(), tau0 + span, params.K))
    return series.final, l1_distance(series.final, target)


def run_limits(config):
    """Small-λ limit: the operator identity, the λ sweep and the call-price bridge."""
    grid, params, spec = config.grid, config.params, config.limits
    span = config.time.tau_final
    if span <= 0:
        raise ContractViolation("limits needs time.tau_final > 0")

    identity = bs_limit_defect(SpaceTimeTestFunction(omega=spec.omega), params, params.lam, grid)
    halved = bs_limit_defect(SpaceTimeTestFunction(omega=spec.omega), params, params.lam / 2.0, grid)

    lambdas = sorted(spec.lambdas, reverse=True)
    start = time.monotonic()
    with ThreadPoolExecutor(max_workers=spec.workers, thread_name_prefix="Telegraph") as pool:
        futures = [pool.submit(_sweep_point, lam, params.sigma, grid, spec.tau0, span) for lam in lambdas]
        points = [f.result() for f in futures]
    logging.info(f"[Runner] lambda sweep of {len(lambdas)} runs finished in {time.monotonic() - start:.2f}s")
    distances = [d for _, d in points]

    horizon = spec.tau0 + span
    bridge = call_price_from_density(points[-1][0], spec.spot, spec.strike)
    reference = bs_call_price(spec.spot, spec.strike, params.sigma, horizon)
    summary = {
        "bs_identity": identity.as_dict(),
        "bs_identity_halved_lambda_ratio": (identity.defect_norm / halved.defect_norm
                                            if halved.defect_norm > 0 else math.nan),
        "sweep": {"lambdas": lambdas, "l1_to_heat_kernel": distances, "tau0": spec.tau0, "span": span},
        "call_price": {"telegraph": bridge, "black_scholes": reference, "horizon": horizon,
                       "spot": spec.spot, "strike": spec.strike, "lambda": lambdas[-1]},
    }
    result = ExperimentResult(Experiment.LIMITS, summary,
                              table=(["lambda", "l1_to_heat_kernel"], [[l, d] for l, d in zip(lambdas, distances)]))
    result.check(identity.relative_difference <= BS_IDENTITY_TOLERANCE,
                 f"operator identity off by {identity.relative_difference:.3g}")
    result.check(all(b < a for a, b in zip(distances, distances[1:])),
                 "L1 distance to the heat kernel does not shrink with lambda")
    result.check(distances[-1] <= HEAT_LIMIT_L1,
                 f"smallest-lambda L1 distance {distances[-1]:.3g} above {HEAT_LIMIT_L1:g}")
    return result


def run_martingale(config):
    grid, spec = config.grid, config.martingale
    x = grid.coordinates()
    center = spec.x0 if spec.center is None else spec.center
    if spec.source is MartingaleSource.KG:
        params = config.params
        if params is None:
            raise ContractViolation("the kg source needs a params section")
        width = config.initial.width or 1.0
        psi = np.exp(-0.5 * ((x - center) / width) ** 2)
        state = KGState.from_amplitudes(grid, psi, np.zeros(grid.n_points), params.lam)
        state = evolve_exact(state, build_hamiltonian(grid, params), spec.tau)
        report = martingale_report_from_kg(state, params, spec.x0)
        density = None
    else:
        if spec.source is MartingaleSource.HEAT_KERNEL:
            values = heat_kernel(x, spec.tau, spec.diffusivity, center)
            oracle = AnalyticDensity.heat(spec.tau, spec.diffusivity, center)
        else:
            values = cauchy_poisson(x, spec.tau, center)
            oracle = AnalyticDensity.cauchy(spec.tau, center)
        density = Field(grid, values)
        report = martingale_defect(density, spec.x0)
    summary = {"source": spec.source.value, "report": report.as_dict(),
               "martingale_holds": abs(report.defect) <= MARTINGALE_TOLERANCE}
    if density is not None:
        summary["robust"] = robust_stats(density).as_dict()
        summary["oracle_iqr"] = oracle.interquartile_range()
    columns = list(report.as_dict().keys())
    return ExperimentResult(Experiment.MARTINGALE, summary,
                            table=(columns, [[report.as_dict()[c] for c in columns]]))


RUNNERS = {
    Experiment.EVOLVE: run_evolve,
    Experiment.MC: run_mc,
    Experiment.KG_CHECK: run_kg_check,
    Experiment.RESIDUAL_SCAN: run_residual_scan,
    Experiment.LIMITS: run_limits,
    Experiment.MARTINGALE: run_martingale,
}


def run(config):
    start = time.monotonic()
    result = RUNNERS[config.experiment](config)
    logging.info(
        f"[Runner] {config.experiment.value} finished in {time.monotonic() - start:.2f}s "
        f"({'passed' if result.passed else 'FAILED: ' + '; '.join(result.failures)})"
    )
    return result
