import numpy as np
import pytest

from linboltz.errors import DomainError, UsageError
from linboltz.heat import (
    HeatFlow,
    heat_current,
    heat_gradient_flow_check,
    heat_solve,
    spatial_entropy,
)


def grid(n):
    return (np.arange(n) + 0.5) / n


def cos_rho(n, amp=0.5, mode=1):
    return 1.0 + amp * np.cos(2.0 * np.pi * mode * grid(n))


class TestHeatFlow:
    def test_rejects_negative_density(self):
        with pytest.raises(DomainError):
            HeatFlow(np.array([-0.1, 1.0]), np.eye(1))

    def test_rejects_zero_mass(self):
        with pytest.raises(DomainError):
            HeatFlow(np.zeros(8), np.eye(1))

    def test_normalizes_mass(self):
        flow = HeatFlow(5.0 * cos_rho(32), 0.2 * np.eye(1))
        assert flow.rho0.mean() == pytest.approx(1.0, abs=1e-13)

    def test_stationary_uniform(self):
        flow = HeatFlow(np.ones(16), 0.3 * np.eye(1))
        assert np.max(np.abs(flow.rho_at(2.0) - 1.0)) < 1e-13
        assert np.max(np.abs(flow.current_at(2.0))) < 1e-13

    def test_single_mode_closed_form(self):
        # cos(2 pi k x) decays by exp(-4 pi^2 k^2 D t)
        d, t, mode = 0.17, 0.3, 2
        flow = HeatFlow(cos_rho(64, amp=0.25, mode=mode), d * np.eye(1))
        decay = np.exp(-4.0 * np.pi**2 * mode**2 * d * t)
        expected = 1.0 + 0.25 * decay * np.cos(2.0 * np.pi * mode * grid(64))
        assert np.max(np.abs(flow.rho_at(t) - expected)) < 1e-12

    def test_current_closed_form(self):
        d, t = 0.17, 0.1
        flow = HeatFlow(cos_rho(64), d * np.eye(1))
        decay = np.exp(-4.0 * np.pi**2 * d * t)
        expected = d * np.pi * decay * np.sin(2.0 * np.pi * grid(64))
        assert np.max(np.abs(flow.current_at(t)[:, 0] - expected)) < 1e-12

    def test_semigroup_property(self):
        flow = HeatFlow(cos_rho(32), 0.1 * np.eye(1))
        later = HeatFlow(flow.rho_at(0.2), 0.1 * np.eye(1))
        assert np.max(np.abs(later.rho_at(0.3) - flow.rho_at(0.5))) < 1e-12

    def test_mass_preserved(self):
        flow = HeatFlow(cos_rho(32), 0.1 * np.eye(1))
        assert flow.rho_at(1.7).mean() == pytest.approx(1.0, abs=1e-13)

    def test_anisotropic_2d(self):
        # a pure x1-mode only feels D[0,0]
        n = 16
        x = grid(n)
        rho = 1.0 + 0.3 * np.cos(2.0 * np.pi * x)[:, None] * np.ones(n)[None, :]
        D = np.array([[0.2, 0.05], [0.05, 0.4]])
        flow = HeatFlow(rho, D)
        decay = np.exp(-4.0 * np.pi**2 * 0.2 * 0.25)
        expected = 1.0 + 0.3 * decay * np.cos(2.0 * np.pi * x)[:, None]
        assert np.max(np.abs(flow.rho_at(0.25) - expected)) < 1e-12

    def test_rejects_negative_time(self):
        flow = HeatFlow(cos_rho(16), np.eye(1))
        with pytest.raises(UsageError):
            flow.rho_at(-0.1)


class TestHeatSolve:
    def test_path_shape_and_endpoints(self):
        flow, times, path = heat_solve(cos_rho(32), 0.1 * np.eye(1), T=0.2, dt=0.05)
        assert times.shape == (5,)
        assert np.max(np.abs(path[0] - flow.rho0)) < 1e-13
        assert np.array_equal(path[-1], flow.rho_at(0.2))

    def test_rejects_bad_horizon(self):
        with pytest.raises(UsageError):
            heat_solve(cos_rho(16), np.eye(1), T=0.05, dt=0.02)

    def test_current_stack(self):
        flow, times, _ = heat_solve(cos_rho(32), 0.1 * np.eye(1), T=0.1, dt=0.05)
        j = heat_current(flow, times)
        assert j.shape == (3, 32, 1)


class TestEntropy:
    def test_uniform_density_zero(self):
        assert spatial_entropy(np.ones(16)) == 0.0

    def test_decreasing_along_flow(self):
        flow = HeatFlow(cos_rho(64), 0.1 * np.eye(1))
        H = [spatial_entropy(flow.rho_at(t)) for t in (0.0, 0.1, 0.2, 0.5)]
        assert all(a > b for a, b in zip(H, H[1:]))

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            spatial_entropy(np.array([1.0, -0.5]))


class TestGradientFlowCheck:
    def test_residual_second_order(self):
        flow = HeatFlow(cos_rho(128), 0.15 * np.eye(1))
        res = {}
        for n in (16, 32, 64):
            times = np.linspace(0.0, 0.4, n + 1)
            res[n] = abs(heat_gradient_flow_check(flow, times))
        order = np.log(res[16] / res[64]) / np.log(4.0)
        assert order > 1.9

    def test_perturbed_current_strictly_positive(self):
        flow = HeatFlow(cos_rho(128), 0.15 * np.eye(1))
        times = np.linspace(0.0, 0.4, 65)
        base = heat_gradient_flow_check(flow, times)
        bumped = heat_gradient_flow_check(flow, times, current_factor=1.1)
        assert bumped > abs(base)
        assert bumped > 0.0

    def test_scaled_current_quadratic_excess(self):
        # R(rho, c j) - R(rho, j) = (c^2 - 1) R(rho, j): factor 2 quadruples
        flow = HeatFlow(cos_rho(128), 0.15 * np.eye(1))
        times = np.linspace(0.0, 0.4, 65)
        r1 = heat_gradient_flow_check(flow, times, current_factor=2.0)
        r2 = heat_gradient_flow_check(flow, times, current_factor=3.0)
        base = heat_gradient_flow_check(flow, times)
        assert (r2 - base) / (r1 - base) == pytest.approx(8.0 / 3.0, rel=1e-6)

    def test_rejects_nonuniform_times(self):
        flow = HeatFlow(cos_rho(32), np.eye(1))
        with pytest.raises(UsageError):
            heat_gradient_flow_check(flow, np.array([0.0, 0.1, 0.3]))

    def test_rejects_vanishing_density(self):
        # the integer grid puts an exact zero of 1 + cos at x = 1/2
        rho = np.clip(1.0 + np.cos(2.0 * np.pi * np.arange(32) / 32), 0.0, None)
        flow = HeatFlow(rho, np.eye(1))
        with pytest.raises(DomainError):
            heat_gradient_flow_check(flow, np.array([0.0, 0.01]))
