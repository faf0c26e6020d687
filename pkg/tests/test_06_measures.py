# tests/test_06_measures.py

import logging
import math

import numpy as np
from scipy.stats import norm
import pytest

from hyperbolic_diffusion_lab.closed_forms import (AnalyticDensity, bs_call_price, cauchy_poisson,
                                                   heat_kernel)
from hyperbolic_diffusion_lab.errors import (ContractViolation, DegenerateDensityError,
                                             SingularMetricError)
from hyperbolic_diffusion_lab.grid import Field, Grid1D
from hyperbolic_diffusion_lab.measures import (DensitySeries, call_price_from_density,
                                               density_components_from_kg, density_from_kg,
                                               describe, greens_convolution,
                                               greens_convolution_quadrature, martingale_defect,
                                               martingale_report_from_kg, robust_stats,
                                               truncated_moment)
from hyperbolic_diffusion_lab.params import ModelParams
from hyperbolic_diffusion_lab.spectral_kg import KGState


def gaussian_field(grid, center=0.0, std=0.2):
    return Field(grid, heat_kernel(grid.coordinates(), 1.0, std ** 2 / 2.0, center))


def test_describe_gaussian():
    grid = Grid1D(400, -2.0, 2.0)
    stats = describe(gaussian_field(grid, 0.3, 0.2), tau=0.5)
    assert stats.tau == 0.5
    assert stats.mass == pytest.approx(1.0, abs=1e-10)
    assert stats.mean == pytest.approx(0.3, abs=1e-10)
    assert stats.variance == pytest.approx(0.04, rel=1e-8)
    assert stats.median == pytest.approx(0.3, abs=1e-4)
    assert stats.negative_mass_fraction == 0.0


def test_describe_reports_negative_mass():
    grid = Grid1D(4, 0.0, 4.0)
    stats = describe(Field(grid, [1.0, -1.0, 2.0, 0.0]))
    assert stats.mass == pytest.approx(2.0)
    assert stats.negative_mass_fraction == pytest.approx(0.25)


def test_describe_of_zero_density():
    grid = Grid1D(4, 0.0, 4.0)
    stats = describe(Field.zeros(grid))
    assert stats.mass == 0.0
    assert math.isnan(stats.mean) and math.isnan(stats.median)


def test_describe_rejects_complex_fields():
    with pytest.raises(ContractViolation):
        describe(Field(Grid1D(4, 0.0, 4.0), np.ones(4) * 1j))


def test_density_series_contract():
    grid = Grid1D(8, 0.0, 1.0)
    f = Field(grid, np.ones(8))
    series = DensitySeries.from_snapshots([0.0, 0.5], [f, f])
    assert len(series) == 2
    assert series.final is f
    assert series.diagnostics[1].tau == 0.5
    with pytest.raises(ContractViolation):
        DensitySeries.from_snapshots([0.5, 0.5], [f, f])
    with pytest.raises(ContractViolation):
        DensitySeries.from_snapshots([0.0, 1.0], [f, Field(Grid1D(8, 0.0, 2.0), np.ones(8))])
    with pytest.raises(ContractViolation):
        DensitySeries.from_snapshots([], [])


def test_martingale_holds_for_heat_kernel():
    grid = Grid1D(2000, -10.0, 10.0)
    report = martingale_defect(Field(grid, heat_kernel(grid.coordinates(), 1.0, 0.5, 1.5)), 1.5)
    assert report.defect == pytest.approx(0.0, abs=1e-10)
    assert report.mass == pytest.approx(1.0, abs=1e-10)
    assert not report.truncated
    assert report.term2 == 0.0


def test_martingale_uses_unnormalized_mass():
    grid = Grid1D(2000, -10.0, 10.0)
    density = Field(grid, 3.0 * heat_kernel(grid.coordinates(), 1.0, 0.5, 0.4))
    report = martingale_defect(density, 0.0)
    assert report.mass == pytest.approx(3.0, rel=1e-10)
    assert report.expectation == pytest.approx(0.4, abs=1e-10)
    assert report.defect == pytest.approx(0.4, abs=1e-10)


def test_martingale_rejects_empty_density():
    with pytest.raises(DegenerateDensityError):
        martingale_defect(Field.zeros(Grid1D(8, 0.0, 1.0)), 0.0)


@pytest.mark.parametrize("half_width, flagged", [(100.0, True), (1000.0, False)])
def test_cauchy_truncation_flag(half_width, flagged, caplog):
    grid = Grid1D(20001, -half_width, half_width, "reflecting")
    density = Field(grid, cauchy_poisson(grid.coordinates(), 1.0))
    with caplog.at_level(logging.WARNING):
        report = martingale_defect(density, 0.0)
    assert report.truncated is flagged
    assert report.defect == pytest.approx(0.0, abs=1e-9)
    assert ("truncated principal value" in caplog.text) is flagged


def test_robust_stats_of_cauchy():
    grid = Grid1D(100000, -500.0, 500.0)
    oracle = AnalyticDensity.cauchy(tau=1.0)
    stats = robust_stats(oracle.sample(grid), k=5.0)
    assert stats.median == pytest.approx(0.0, abs=0.02)
    assert stats.iqr == pytest.approx(oracle.interquartile_range(), abs=0.02)
    expected_tail = 1.0 - oracle.mass_within(5.0 * oracle.interquartile_range())
    assert stats.tail_mass == pytest.approx(expected_tail, abs=3e-3)


def test_robust_stats_of_heat_kernel():
    grid = Grid1D(4000, -10.0, 10.0)
    oracle = AnalyticDensity.heat(tau=1.0, K=0.5)
    stats = robust_stats(oracle.sample(grid), k=3.0)
    assert stats.q25 == pytest.approx(oracle.quantile(0.25), abs=5e-3)
    assert stats.q75 == pytest.approx(oracle.quantile(0.75), abs=5e-3)
    assert stats.tail_mass < 1e-3


def test_truncated_moment():
    grid = Grid1D(4000, -10.0, 10.0)
    density = gaussian_field(grid, 0.0, 1.0)
    assert truncated_moment(density, 0, 10.0) == pytest.approx(1.0, abs=1e-10)
    assert truncated_moment(density, 2, 10.0) == pytest.approx(1.0, rel=1e-8)
    assert truncated_moment(density, 1, 3.0025) == pytest.approx(0.0, abs=1e-12)
    assert truncated_moment(density, 0, 1.0) == pytest.approx(math.erf(1 / math.sqrt(2)), abs=5e-3)


def test_greens_convolution_matches_quadrature():
    grid = Grid1D(1024, -30.0, 30.0)
    mu = 1.0

    def fn(y):
        return np.exp(-y ** 2) * (1.0 + 0.5j * y)

    spectral = greens_convolution(Field(grid, fn(grid.coordinates())), mu).values
    idx = [400, 480, 512, 530, 600]
    direct = greens_convolution_quadrature(fn, grid.coordinates()[idx], mu, bounds=(-30.0, 30.0))
    assert np.allclose(spectral[idx], direct, rtol=0.0, atol=1e-8)
    with pytest.raises(SingularMetricError):
        greens_convolution_quadrature(fn, [0.0], 0.0)


def test_kg_density_components():
    grid = Grid1D(256, -20.0, 20.0)
    lam, mu = 1.0, 1.0
    params = ModelParams(lam, 1.0, mu)
    x = grid.coordinates()
    state = KGState.from_amplitudes(grid, np.exp(-x ** 2), np.zeros(grid.n_points), lam)
    first, second = density_components_from_kg(state, params)
    assert np.allclose(first.values, 0.5 * np.exp(-2 * x ** 2))
    assert np.all(second.values == 0.0)
    density = density_from_kg(state, params)
    assert np.allclose(density.values, first.values)
    report = martingale_report_from_kg(state, params, 0.0)
    assert report.defect == pytest.approx(0.0, abs=1e-12)
    assert report.term1 + report.term2 == pytest.approx(report.expectation, abs=1e-12)


def test_kg_density_martingale_defect_off_center():
    grid = Grid1D(256, -20.0, 20.0)
    lam, mu = 1.0, 1.0
    params = ModelParams(lam, 1.0, mu)
    x = grid.coordinates()
    psi = np.exp(-(x - 2.0) ** 2)
    state = KGState.from_amplitudes(grid, psi, 0.3 * psi, lam)
    report = martingale_report_from_kg(state, params, 0.0)
    assert report.expectation == pytest.approx(2.0, abs=1e-6)
    assert report.term2 > 0.0


def test_call_price_from_density_matches_black_scholes():
    grid = Grid1D(2000, -3.0, 3.0)
    sigma, tau = 0.2, 1.0
    density = Field(grid, heat_kernel(grid.coordinates(), tau, sigma ** 2 / 2.0))
    price = call_price_from_density(density, 100.0, 100.0)
    assert price == pytest.approx(bs_call_price(100.0, 100.0, sigma, tau), abs=1e-3)
    # without the drift correction the symmetric density overprices the call
    assert call_price_from_density(density, 100.0, 100.0, martingale=False) > price
    with pytest.raises(ContractViolation):
        call_price_from_density(density, 0.0, 100.0)


def test_cauchy_tails_are_heavier_than_gaussian_at_matched_iqr():
    grid = Grid1D(100000, -500.0, 500.0)
    cauchy = AnalyticDensity.cauchy(tau=1.0)
    # heat kernel with the Cauchy IQR: 2·q75·std = iqr
    std = cauchy.interquartile_range() / (2.0 * norm.ppf(0.75))
    heat = AnalyticDensity.heat(tau=1.0, K=std ** 2 / 2.0)
    assert heat.interquartile_range() == pytest.approx(cauchy.interquartile_range())
    cauchy_tail = robust_stats(cauchy.sample(grid), k=5.0).tail_mass
    heat_tail = robust_stats(heat.sample(grid), k=5.0).tail_mass
    assert cauchy_tail > 0.05
    assert heat_tail < 1e-9
    assert cauchy_tail > heat_tail


def test_truncated_cauchy_second_moment_keeps_growing():
    grid = Grid1D(200001, -1000.0, 1000.0, "reflecting")
    density = Field(grid, cauchy_poisson(grid.coordinates(), 1.0))
    moments = [truncated_moment(density, 2, radius) for radius in (10.0, 100.0, 1000.0)]
    assert moments[0] < moments[1] < moments[2]
    # ∫ x²/(π(1+x²)) over [-R, R] = 2(R - atan R)/π
    assert moments[0] == pytest.approx(2.0 * (10.0 - math.atan(10.0)) / math.pi, rel=1e-3)


def test_martingale_defect_is_translation_covariant():
    shift = 1.0
    grid = Grid1D(2000, -10.0, 10.0)
    moved = Grid1D(2000, -10.0 + shift, 10.0 + shift)
    before = martingale_defect(Field(grid, heat_kernel(grid.coordinates(), 1.0, 0.5, 0.3)), 0.0)
    after = martingale_defect(Field(moved, heat_kernel(moved.coordinates(), 1.0, 0.5, 0.3 + shift)), 0.0)
    assert after.expectation - before.expectation == pytest.approx(shift, abs=1e-10)
    assert after.defect - before.defect == pytest.approx(shift, abs=1e-10)
