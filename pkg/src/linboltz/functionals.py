"""Convex costs and integral functionals of the entropy-dissipation formulation.

The two building blocks are the jump cost ``phi`` and its centered part
``psi``.  For rate kappa >= 0 and densities p, q >= 0,

    phi(kappa, p, q; xi) = xi * [asinh(xi/a) - asinh(m/a)]
                           - [sqrt(xi^2 + a^2) - sqrt(m^2 + a^2)]

with a = 2*kappa*sqrt(p*q) and m = kappa*(p - q).  It is nonnegative,
jointly convex, and vanishes exactly at xi = kappa*(p - q).  The centered
part

    psi(kappa, p, q; xi) = xi * asinh(xi/a) - [sqrt(xi^2 + a^2) - a]

is the Legendre transform of lam -> a*(cosh(lam) - 1) and satisfies the
decomposition

    phi(kappa, p, q; xi) = kappa*(sqrt(p) - sqrt(q))^2
                           + xi * 0.5*log(q/p) + psi(kappa, p, q; xi).

Degenerate arguments (kappa = 0 or p*q = 0) are resolved by the Legendre
definitions; the resulting +inf is represented by ``math.inf`` and any
quadrature that touches it raises :class:`InfeasibleValueError` instead of
propagating a raw infinity through a sum.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfeasibleValueError, UsageError
from .spectral import gradient

#: densities are clamped below at this floor inside logarithms only
LOG_FLOOR = 1e-300
#: and above at this cap (the truncated-log safeguard)
LOG_CAP = 1e300

#: negative values above this (relative) threshold are treated as roundoff
NEG_TOL = 1e-10


def _check_nonneg(name, value):
    if np.any(np.asarray(value) < 0):
        raise DomainError(f"{name} must be nonnegative")


def truncated_log(u, floor=LOG_FLOOR, cap=LOG_CAP):
    """log clipped to [log(floor), log(cap)]; safe at u = 0."""
    return np.log(np.clip(u, floor, cap))


def _centered_cost(alpha, xi):
    """xi*asinh(xi/alpha) - (sqrt(xi^2+alpha^2) - alpha), vectorized.

    alpha = 0 is the degenerate Legendre limit: 0 at xi = 0, +inf otherwise.
    """
    alpha = np.asarray(alpha, dtype=float)
    xi = np.asarray(xi, dtype=float)
    alpha, xi = np.broadcast_arrays(alpha, xi)
    out = np.zeros(alpha.shape)
    pos = alpha > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        a = alpha[pos]
        x = xi[pos]
        hyp = np.hypot(x, a)
        # sqrt(x^2+a^2) - a == x^2/(hyp + a), stable for |x| << a
        out[pos] = x * np.arcsinh(x / a) - x * x / (hyp + a)
    deg = ~pos
    out[deg] = np.where(xi[deg] == 0.0, 0.0, math.inf)
    return out


def psi(kappa, p, q, xi):
    """Centered jump cost; scalar or elementwise on broadcast arrays."""
    _check_nonneg("kappa", kappa)
    _check_nonneg("p", p)
    _check_nonneg("q", q)
    kappa = np.asarray(kappa, dtype=float)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    alpha = 2.0 * kappa * np.sqrt(p * q)
    out = _centered_cost(alpha, xi)
    if out.ndim == 0:
        return float(out)
    return out


def phi(kappa, p, q, xi):
    """Jump cost of the balance-equation action; zero iff xi = kappa*(p-q)."""
    _check_nonneg("kappa", kappa)
    _check_nonneg("p", p)
    _check_nonneg("q", q)
    kappa = np.asarray(kappa, dtype=float)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    xi = np.asarray(xi, dtype=float)
    kappa, p, q, xi = np.broadcast_arrays(kappa, p, q, xi)
    alpha = 2.0 * kappa * np.sqrt(p * q)
    m = kappa * (p - q)
    out = np.empty(alpha.shape)

    reg = alpha > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        a = alpha[reg]
        x = xi[reg]
        mm = m[reg]
        hx = np.hypot(x, a)
        hm = np.hypot(mm, a)
        # sqrt(x^2+a^2) - sqrt(m^2+a^2), cancellation-free
        bracket = (x * x - mm * mm) / (hx + hm)
        out[reg] = x * (np.arcsinh(x / a) - np.arcsinh(mm / a)) - bracket

    deg = ~reg
    if np.any(deg):
        out[deg] = _phi_degenerate(kappa[deg], p[deg], q[deg], xi[deg])
    if out.ndim == 0:
        return float(out)
    return out


def _phi_degenerate(kappa, p, q, xi):
    """phi on the boundary kappa = 0 or p*q = 0, by the Legendre definition."""
    out = np.full(kappa.shape, math.inf)

    zero_rate = kappa == 0
    out[zero_rate] = np.where(xi[zero_rate] == 0.0, 0.0, math.inf)

    k = ~zero_rate
    both = k & (p == 0) & (q == 0)
    out[both] = np.where(xi[both] == 0.0, 0.0, math.inf)

    # q = 0, p > 0: sup_lam { lam*xi - kappa*p*(e^lam - 1) }
    right = k & (q == 0) & (p > 0)
    if np.any(right):
        kp = kappa[right] * p[right]
        x = xi[right]
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(
                x > 0, x * np.log(x / kp) - x + kp, np.where(x == 0, kp, math.inf)
            )
        out[right] = val

    # p = 0, q > 0: mirror image in xi -> -xi
    left = k & (p == 0) & (q > 0)
    if np.any(left):
        kq = kappa[left] * q[left]
        x = -xi[left]
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(
                x > 0, x * np.log(x / kq) - x + kq, np.where(x == 0, kq, math.inf)
            )
        out[left] = val
    return out


def phi_slope_at_zero(p, q):
    """d phi / d xi at xi = 0, which equals 0.5*log(q/p)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(p <= 0) or np.any(q <= 0):
        raise DomainError("phi_slope_at_zero requires p > 0 and q > 0")
    out = 0.5 * np.log(q / p)
    if out.ndim == 0:
        return float(out)
    return out


def psi_legendre_oracle(kappa, p, q, xi, lambda_grid):
    """Discrete supremum of lam*xi - 2*kappa*sqrt(pq)*(cosh(lam) - 1).

    Independent oracle for :func:`psi`; never used in production paths.
    """
    lam = np.asarray(lambda_grid, dtype=float)
    if lam.size == 0:
        raise UsageError("empty lambda grid")
    if p * q <= 0:
        raise DomainError("Legendre oracle requires p*q > 0")
    alpha = 2.0 * kappa * math.sqrt(p * q)
    return float(np.max(lam * xi - alpha * (np.cosh(lam) - 1.0)))


@dataclass(frozen=True)
class PhiEval:
    kappa: float
    p: float
    q: float
    xi: float
    value: float

    @classmethod
    def evaluate(cls, kappa, p, q, xi):
        return cls(kappa, p, q, xi, phi(kappa, p, q, xi))


@dataclass(frozen=True)
class PsiEval:
    kappa: float
    p: float
    q: float
    xi: float
    value: float

    @classmethod
    def evaluate(cls, kappa, p, q, xi):
        return cls(kappa, p, q, xi, psi(kappa, p, q, xi))


# ---------------------------------------------------------------------------
# integral functionals on the discrete phase space
# ---------------------------------------------------------------------------


def _clip_density(f, what="density"):
    f = np.asarray(f, dtype=float)
    scale = max(float(np.max(np.abs(f), initial=0.0)), 1.0)
    if np.any(f < -NEG_TOL * scale):
        raise DomainError(f"negative {what}")
    return np.clip(f, 0.0, None)


def relative_entropy(f, model, dx, floor=LOG_FLOOR, cap=LOG_CAP):
    """Relative entropy of f*dx*pi against dx*pi: sum dx*w_i * f log f.

    ``f`` has shape (n_x, n_v); 0*log(0) = 0 by convention, the floor/cap
    act inside the logarithm only.
    """
    f = _clip_density(f)
    flogf = np.where(f > 0, f * truncated_log(f, floor, cap), 0.0)
    return float(dx * np.sum(flogf @ model.weights))


def dirichlet_form(f_slice, model, dx):
    """Dirichlet form of sqrt(f): sum_x dx sum_ij w_i w_j S_ij (sqrt f_j - sqrt f_i)^2.

    Expanded as 2*(sum_i w_i lam_i f_i - <sqrt f, S w sqrt f>) to stay
    O(n_x * n_v^2) without forming the pair difference tensor.
    """
    f = _clip_density(f_slice)
    if f.ndim == 1:
        f = f[None, :]
    w = model.weights
    sq = np.sqrt(f)
    local = (f * (w * model.rates)).sum(axis=1)
    cross = np.einsum("xi,i,ij,j,xj->x", sq, w, model.sigma, w, sq, optimize=True)
    return float(dx * np.sum(2.0 * (local - cross)))


def kinematic_rate(f_slice, eta_slice, model, dx):
    """Instantaneous kinematic cost sum_x dx sum_ij w_i w_j psi_{S_ij}(f_i, f_j; eta_ij)."""
    f = _clip_density(f_slice)
    eta = np.asarray(eta_slice, dtype=float)
    if not np.allclose(eta, -np.swapaxes(eta, -1, -2), atol=1e-12 * max(1.0, np.max(np.abs(eta), initial=0.0))):
        raise DomainError("current must be antisymmetric in (v, v')")
    alpha = 2.0 * model.sigma * np.sqrt(f[..., :, None] * f[..., None, :])
    vals = _centered_cost(alpha, eta)
    if np.any(np.isinf(vals)):
        raise InfeasibleValueError("kinematic cost is infeasible (current on a zero-rate pair)")
    w = model.weights
    if vals.ndim == 2:
        vals = vals[None, :, :]
    return float(dx * np.einsum("i,j,xij->", w, w, vals))


def kinematic_term(f_path, eta_path, model, dt, dx):
    """Time quadrature (rectangle on the supplied slices) of the kinematic rate."""
    total = 0.0
    for f, eta in zip(f_path, eta_path):
        total += kinematic_rate(f, eta, model, dx)
    return dt * total


def dirichlet_lower_bound(f_slice, model, dx, phi_test):
    """Value of the Donsker-Varadhan integrand for a supplied test function.

    This is a lower-bound probe of the variational supremum; it never
    exceeds the supremum and equals half the Dirichlet form at
    phi_test = 0.5*log f (see the module notes on the factor).
    """
    f = _clip_density(f_slice)
    if f.ndim == 1:
        f = f[None, :]
    phi_t = np.asarray(phi_test, dtype=float)
    if phi_t.ndim == 1:
        phi_t = np.broadcast_to(phi_t, f.shape)
    w = model.weights
    expdiff = np.exp(phi_t[:, None, :] - phi_t[:, :, None])  # phi_j - phi_i
    integrand = np.einsum(
        "xi,i,ij,j,xij->", f, w, model.sigma, w, 1.0 - expdiff, optimize=True
    )
    return float(dx * integrand)


def kinematic_lower_bound(f_path, eta_path, model, dt, dx, zeta, alpha_test=None):
    """Bracketed expression of the kinematic variational formula.

    ``zeta`` and ``alpha_test`` are arrays over (time, x, v, v'); alpha
    defaults to 1 and must be positive.
    """
    zeta = np.asarray(zeta, dtype=float)
    if not np.allclose(zeta, -np.swapaxes(zeta, -1, -2)):
        raise DomainError("zeta must be antisymmetric in (v, v')")
    if alpha_test is None:
        alpha_test = np.ones_like(zeta)
    alpha_test = np.asarray(alpha_test, dtype=float)
    if np.any(alpha_test <= 0):
        raise DomainError("alpha must be positive")
    w = model.weights
    theta_pairing = 0.0
    penalty = 0.0
    for t, (f, eta) in enumerate(zip(f_path, eta_path)):
        f = _clip_density(f)
        theta_pairing += dx * np.einsum("i,j,xij,xij->", w, w, eta, zeta[t])
        factor = alpha_test[t] + 1.0 / np.swapaxes(alpha_test[t], -1, -2)
        penalty += dx * np.einsum(
            "xi,i,ij,j,xij,xij->",
            f, w, model.sigma, w, np.cosh(zeta[t]) - 1.0, factor,
            optimize=True,
        )
    return dt * (theta_pairing - penalty)


# ---------------------------------------------------------------------------
# heat-equation functionals
# ---------------------------------------------------------------------------


def _as_matrix(D, ndim):
    D = np.atleast_2d(np.asarray(D, dtype=float))
    if D.shape != (ndim, ndim):
        raise DomainError(f"diffusion matrix must be {ndim}x{ndim}")
    if not np.allclose(D, D.T):
        raise DomainError("diffusion matrix must be symmetric")
    evals = np.linalg.eigvalsh(D)
    if np.min(evals) <= 0:
        raise DomainError("diffusion matrix must be positive definite")
    return D


def fisher_information(rho, D, dx=None):
    """Fisher information 2 * int grad(sqrt rho) . D grad(sqrt rho) dx.

    ``rho`` lives on a uniform periodic grid (1d or 2d); derivatives are
    spectral.  ``dx`` defaults to 1/n per axis.
    """
    rho = _clip_density(rho, "rho")
    D = _as_matrix(D, rho.ndim)
    if dx is None:
        dx = 1.0 / rho.shape[0]
    cell = dx ** rho.ndim
    sq = np.sqrt(rho)
    grads = [gradient(sq, axis=a) for a in range(rho.ndim)]
    total = 0.0
    for a in range(rho.ndim):
        for b in range(rho.ndim):
            total += D[a, b] * np.sum(grads[a] * grads[b])
    return float(2.0 * cell * total)


def heat_kinematic(rho_path, j_path, D, dt, dx=None, rho_floor=1e-14):
    """Kinematic action 0.5 * int dt int j . D^{-1} j / rho dx."""
    rho_path = np.asarray(rho_path, dtype=float)
    j_path = np.asarray(j_path, dtype=float)
    ndim = rho_path.ndim - 1
    D = _as_matrix(D, ndim)
    Dinv = np.linalg.inv(D)
    if dx is None:
        dx = 1.0 / rho_path.shape[1]
    cell = dx**ndim
    rho = np.clip(rho_path, rho_floor, None)
    quad = np.einsum("ab,t...a,t...b->t...", Dinv, j_path, j_path)
    return float(0.5 * dt * cell * np.sum(quad / rho))
