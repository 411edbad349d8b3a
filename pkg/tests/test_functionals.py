import math

import numpy as np
import pytest

from linboltz import DomainError, InfeasibleValueError, build_lorentz, LorentzSpec
from linboltz.functionals import (
    dirichlet_form,
    dirichlet_lower_bound,
    fisher_information,
    heat_kinematic,
    kinematic_lower_bound,
    kinematic_rate,
    kinematic_term,
    phi,
    phi_slope_at_zero,
    psi,
    psi_legendre_oracle,
    relative_entropy,
    truncated_log,
)
from linboltz.velocity import VelocityModel


def random_triples(n, seed=0):
    rng = np.random.default_rng(seed)
    kappa = rng.uniform(0.05, 5.0, n)
    p = rng.uniform(0.01, 10.0, n)
    q = rng.uniform(0.01, 10.0, n)
    xi = rng.normal(0.0, 3.0, n)
    return kappa, p, q, xi


def two_node_model(s=3.0, u=1.0):
    return VelocityModel(
        nodes=np.array([[0.0], [1.0]]),
        weights=np.array([0.5, 0.5]),
        drift=np.array([[u], [-u]]),
        sigma=np.array([[0.0, s], [s, 0.0]]),
        dim_x=1,
    )


class TestPhi:
    def test_zero_set(self):
        kappa, p, q, _ = random_triples(1000, seed=3)
        vals = phi(kappa, p, q, kappa * (p - q))
        assert np.max(np.abs(vals)) == 0.0

    def test_nonnegative_and_convex_in_xi(self):
        kappa, p, q, xi = random_triples(2000, seed=4)
        assert np.all(phi(kappa, p, q, xi) >= 0.0)
        # midpoint convexity along xi
        a = phi(kappa, p, q, xi)
        b = phi(kappa, p, q, -xi)
        mid = phi(kappa, p, q, np.zeros_like(xi))
        assert np.all(0.5 * (a + b) >= mid - 1e-12)

    def test_decomposition_identity(self):
        kappa, p, q, xi = random_triples(10000, seed=5)
        lhs = phi(kappa, p, q, xi)
        rhs = (
            kappa * (np.sqrt(p) - np.sqrt(q)) ** 2
            + xi * 0.5 * np.log(q / p)
            + psi(kappa, p, q, xi)
        )
        assert np.max(np.abs(lhs - rhs) / (1.0 + np.abs(lhs))) < 1e-10

    def test_slope_at_zero_finite_difference_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            kappa = rng.uniform(0.1, 4.0)
            p = rng.uniform(0.1, 5.0)
            q = rng.uniform(0.1, 5.0)
            h = 1e-6
            fd = (phi(kappa, p, q, h) - phi(kappa, p, q, -h)) / (2 * h)
            assert fd == pytest.approx(phi_slope_at_zero(p, q), abs=1e-7)

    def test_degenerate_rate(self):
        assert phi(0.0, 1.0, 2.0, 0.0) == 0.0
        assert phi(0.0, 1.0, 2.0, 0.5) == math.inf

    def test_degenerate_density_legendre_limits(self):
        kp = 2.0 * 3.0
        assert phi(2.0, 3.0, 0.0, 0.0) == pytest.approx(kp)
        expected = 1.0 * math.log(1.0 / kp) - 1.0 + kp
        assert phi(2.0, 3.0, 0.0, 1.0) == pytest.approx(expected)
        assert phi(2.0, 3.0, 0.0, -1.0) == math.inf
        # mirror case
        assert phi(2.0, 0.0, 3.0, -1.0) == pytest.approx(expected)
        assert phi(2.0, 0.0, 3.0, 1.0) == math.inf
        assert phi(2.0, 0.0, 0.0, 0.0) == 0.0
        assert phi(2.0, 0.0, 0.0, 0.1) == math.inf

    def test_negative_inputs_rejected(self):
        with pytest.raises(DomainError):
            phi(-1.0, 1.0, 1.0, 0.0)
        with pytest.raises(DomainError):
            phi(1.0, -1.0, 1.0, 0.0)


class TestPsi:
    def test_legendre_oracle(self):
        rng = np.random.default_rng(7)
        grid = np.linspace(-30.0, 30.0, 400001)
        for _ in range(20):
            kappa = rng.uniform(0.1, 3.0)
            p = rng.uniform(0.1, 5.0)
            q = rng.uniform(0.1, 5.0)
            xi = rng.normal(0.0, 2.0)
            oracle = psi_legendre_oracle(kappa, p, q, xi, grid)
            assert psi(kappa, p, q, xi) == pytest.approx(oracle, abs=1e-7)

    def test_small_xi_quadratic(self):
        # psi ~ xi^2/(2*alpha) near zero; alpha = 2*kappa*sqrt(pq)
        for xi in (1e-3, 1e-5, 1e-8):
            ratio = psi(1.0, 1.0, 1.0, xi) / xi**2
            assert ratio == pytest.approx(0.25, rel=1e-5)

    def test_even_in_xi(self):
        kappa, p, q, xi = random_triples(500, seed=8)
        assert np.allclose(psi(kappa, p, q, xi), psi(kappa, p, q, -xi))

    def test_degenerate_alpha(self):
        assert psi(1.0, 0.0, 1.0, 0.0) == 0.0
        assert psi(1.0, 0.0, 1.0, 0.5) == math.inf
        assert psi(0.0, 1.0, 1.0, -0.5) == math.inf

    def test_large_xi_overflow_safe(self):
        val = psi(1.0, 1.0, 1.0, 1e150)
        assert np.isfinite(val) and val > 0


class TestEntropyAndForms:
    def test_relative_entropy_fsum_oracle(self):
        model = two_node_model()
        rng = np.random.default_rng(9)
        f = rng.uniform(0.1, 3.0, (8, 2))
        dx = 1.0 / 8
        expected = math.fsum(
            dx * w * fv * math.log(fv)
            for row in f
            for w, fv in zip(model.weights, row)
        )
        assert relative_entropy(f, model, dx) == pytest.approx(expected, abs=1e-14)

    def test_entropy_zero_convention(self):
        model = two_node_model()
        f = np.array([[0.0, 2.0]])
        val = relative_entropy(f, model, 1.0)
        assert val == pytest.approx(0.5 * 2.0 * math.log(2.0))

    def test_entropy_rejects_negative(self):
        model = two_node_model()
        with pytest.raises(DomainError):
            relative_entropy(np.array([[-0.5, 1.0]]), model, 1.0)

    def test_dirichlet_double_sum_oracle(self):
        model = build_lorentz(LorentzSpec(16))
        rng = np.random.default_rng(10)
        f = rng.uniform(0.1, 2.0, (4, 16))
        dx = 0.25
        w = model.weights
        sq = np.sqrt(f)
        direct = 0.0
        for x in range(4):
            for i in range(16):
                for j in range(16):
                    direct += (
                        dx * w[i] * w[j] * model.sigma[i, j]
                        * (sq[x, j] - sq[x, i]) ** 2
                    )
        assert dirichlet_form(f, model, dx) == pytest.approx(direct, rel=1e-12)

    def test_kinematic_rate_matches_psi_double_sum(self):
        model = two_node_model(s=2.0)
        f = np.array([[1.0, 3.0]])
        eta = np.array([[[0.0, 0.7], [-0.7, 0.0]]])
        val = kinematic_rate(f, eta, model, 1.0)
        unit = psi(2.0, 1.0, 3.0, 0.7)
        # the (1,2) and (2,1) terms are equal by symmetry of psi
        assert val == pytest.approx(2 * 0.25 * unit, rel=1e-12)

    def test_kinematic_antisymmetry_enforced(self):
        model = two_node_model()
        f = np.array([[1.0, 1.0]])
        bad = np.array([[[0.0, 1.0], [1.0, 0.0]]])
        with pytest.raises(DomainError):
            kinematic_rate(f, bad, model, 1.0)

    def test_kinematic_infeasible_current(self):
        # current on a zero-rate pair (the diagonal has sigma = 0)
        model = two_node_model(s=0.0)
        f = np.array([[1.0, 1.0]])
        eta = np.array([[[0.0, 0.5], [-0.5, 0.0]]])
        with pytest.raises(InfeasibleValueError):
            kinematic_rate(f, eta, model, 1.0)

    def test_kinematic_term_sums_slices(self):
        model = two_node_model()
        rng = np.random.default_rng(11)
        f_path = rng.uniform(0.5, 2.0, (3, 2, 2))
        z = rng.normal(size=(3, 2))
        eta_path = np.zeros((3, 2, 2, 2))
        eta_path[..., 0, 1] = z
        eta_path[..., 1, 0] = -z
        total = kinematic_term(f_path, eta_path, model, 0.1, 0.5)
        manual = 0.1 * sum(
            kinematic_rate(f_path[t], eta_path[t], model, 0.5) for t in range(3)
        )
        assert total == pytest.approx(manual, rel=1e-14)


class TestVariationalProbes:
    def test_dirichlet_lower_bound_never_exceeds(self):
        model = build_lorentz(LorentzSpec(16))
        rng = np.random.default_rng(12)
        f = rng.uniform(0.2, 2.0, (4, 16))
        dx = 0.25
        top = dirichlet_form(f, model, dx)
        for seed in range(5):
            probe = np.random.default_rng(seed).normal(size=(4, 16))
            assert dirichlet_lower_bound(f, model, dx, 0.3 * probe) <= top + 1e-12

    def test_dirichlet_bound_at_half_log(self):
        # the Donsker-Varadhan integrand at phi = log sqrt(f) equals half
        # the Dirichlet form of the square root
        model = build_lorentz(LorentzSpec(16))
        rng = np.random.default_rng(13)
        f = rng.uniform(0.2, 2.0, (4, 16))
        dx = 0.25
        val = dirichlet_lower_bound(f, model, dx, 0.5 * np.log(f))
        assert val == pytest.approx(0.5 * dirichlet_form(f, model, dx), rel=1e-12)

    def test_kinematic_lower_bound_never_exceeds(self):
        model = two_node_model(s=2.0)
        rng = np.random.default_rng(14)
        f_path = rng.uniform(0.5, 2.0, (4, 3, 2))
        amp = rng.normal(size=(4, 3))
        eta_path = np.zeros((4, 3, 2, 2))
        eta_path[..., 0, 1] = amp
        eta_path[..., 1, 0] = -amp
        dt, dx = 0.05, 1.0 / 3
        top = kinematic_term(f_path, eta_path, model, dt, dx)
        for seed in range(5):
            z = np.random.default_rng(100 + seed).normal(size=(4, 3)) * 0.4
            zeta = np.zeros_like(eta_path)
            zeta[..., 0, 1] = z
            zeta[..., 1, 0] = -z
            low = kinematic_lower_bound(
                f_path, eta_path, model, dt, dx, zeta
            )
            assert low <= top + 1e-12

    def test_kinematic_lower_bound_alpha_positive(self):
        model = two_node_model()
        f_path = np.ones((1, 1, 2))
        zeta = np.zeros((1, 1, 2, 2))
        with pytest.raises(DomainError):
            kinematic_lower_bound(
                f_path, np.zeros_like(zeta), model, 0.1, 1.0, zeta,
                alpha_test=np.zeros_like(zeta),
            )


class TestHeatFunctionals:
    def test_fisher_single_mode(self):
        n = 128
        x = (np.arange(n) + 0.5) / n
        rho = 1.0 + 0.25 * np.cos(2 * np.pi * x)
        # 2 int (d sqrt(rho))^2 dx, reference by dense trapezoid on a fine grid
        m = 1 << 16
        xf = (np.arange(m) + 0.5) / m
        rf = 1.0 + 0.25 * np.cos(2 * np.pi * xf)
        grad = np.gradient(np.sqrt(rf), 1.0 / m)
        ref = 2.0 * np.mean(grad**2)
        assert fisher_information(rho, 1.0) == pytest.approx(ref, rel=1e-4)

    def test_fisher_requires_pd_matrix(self):
        rho = np.ones((8, 8))
        with pytest.raises(DomainError):
            fisher_information(rho, np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_heat_kinematic_uniform_density(self):
        rho = np.ones((3, 16))
        j = np.full((3, 16, 1), 0.5)
        # 0.5 * j^2 / (D rho) integrated: 0.5*0.25/2 per unit time
        val = heat_kinematic(rho, j, np.array([[2.0]]), dt=0.1)
        assert val == pytest.approx(3 * 0.1 * 0.5 * 0.25 / 2.0, rel=1e-12)


def test_truncated_log_clipping():
    assert truncated_log(0.0, 1e-10, 1e10) == pytest.approx(math.log(1e-10))
    assert truncated_log(1e20, 1e-10, 1e10) == pytest.approx(math.log(1e10))
    assert truncated_log(2.0, 1e-10, 1e10) == pytest.approx(math.log(2.0))
