"""Discrete velocity space: scattering operators, Poisson solve, diffusion matrix.

A :class:`VelocityModel` packages a quadrature (nodes, weights) of the
reference velocity measure together with the symmetric scattering kernel
``S`` and the drift ``b``.  From these the jump generator

    (L g)_i = sum_j w_j S_ij (g_j - g_i)

and the one-step transition operator

    (K g)_i = sum_j w_j S_ij g_j / lambda_i,   lambda_i = sum_j w_j S_ij,

are assembled.  K is self-adjoint in L^2 of the tilted measure
w~_i = lambda_i w_i / <lambda>, and the diffusion matrix is

    D = sum_i w_i b_i (x) xi_i,   with  (-L) xi = b.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConvergenceError,
    DomainError,
    NumericalQualityError,
    UsageError,
)


@dataclass(frozen=True)
class VelocityModel:
    """Immutable discretized velocity space.

    nodes:   (n_v, n_c) model-specific coordinates (n_c columns)
    weights: (n_v,) probability weights, sum to 1
    drift:   (n_v, d) drift vectors b_i
    sigma:   (n_v, n_v) symmetric nonnegative kernel S_ij
    dim_x:   spatial dimension d
    """

    nodes: np.ndarray
    weights: np.ndarray
    drift: np.ndarray
    sigma: np.ndarray
    dim_x: int
    name: str = "custom"
    meta: dict = field(default_factory=dict)
    rates: np.ndarray = field(init=False)

    def __post_init__(self):
        nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        if nodes.shape[0] == 1 and np.asarray(self.nodes).ndim == 1:
            nodes = nodes.T
        weights = np.asarray(self.weights, dtype=float)
        drift = np.atleast_2d(np.asarray(self.drift, dtype=float))
        if drift.shape[0] == 1 and np.asarray(self.drift).ndim == 1:
            drift = drift.T
        sigma = np.asarray(self.sigma, dtype=float)
        n = weights.size
        if nodes.shape[0] != n or drift.shape[0] != n or sigma.shape != (n, n):
            raise UsageError("inconsistent array sizes in VelocityModel")
        rates = sigma @ weights
        for arr in (nodes, weights, drift, sigma, rates):
            arr.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "rates", rates)

    @property
    def n_nodes(self):
        return self.weights.size

    def validate(self, centering_tol=1e-12):
        """Check the structural invariants; raises on violation."""
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise NumericalQualityError("weights do not sum to 1")
        if np.any(self.weights < 0):
            raise NumericalQualityError("negative quadrature weight")
        if not np.array_equal(self.sigma, self.sigma.T):
            raise NumericalQualityError("scattering kernel is not exactly symmetric")
        if np.any(self.sigma < 0):
            raise NumericalQualityError("negative scattering kernel entry")
        if np.max(np.abs(self.rates - self.sigma @ self.weights)) > 1e-12:
            raise NumericalQualityError("rate vector inconsistent with kernel")
        centering = np.max(np.abs(self.weights @ self.drift))
        if centering > centering_tol:
            raise NumericalQualityError(
                f"drift not centered: |pi(b)| = {centering:.3e} > {centering_tol:.3e}"
            )
        return True


@dataclass(frozen=True)
class TiltedMeasure:
    """Probability weights w~_i = lambda_i w_i / <lambda>."""

    weights: np.ndarray
    mean_rate: float

    @classmethod
    def of(cls, model):
        mean_rate = float(model.weights @ model.rates)
        if mean_rate <= 0:
            raise DomainError("mean scattering rate must be positive")
        w = model.rates * model.weights / mean_rate
        w.setflags(write=False)
        return cls(w, mean_rate)

    def mean(self, g):
        return np.tensordot(self.weights, g, axes=(0, 0))

    def inner(self, f, g):
        prod = np.asarray(f, dtype=float) * np.asarray(g, dtype=float)
        return float(self.weights @ prod.reshape(prod.shape[0], -1).sum(axis=1))

    def norm(self, g):
        g = np.asarray(g, dtype=float)
        sq = (g * g).reshape(g.shape[0], -1).sum(axis=1)
        return float(np.sqrt(self.weights @ sq))


@dataclass(frozen=True)
class PoissonSolution:
    xi: np.ndarray
    residual: float
    iterations: int


def apply_generator(model, g):
    """(Lg)_i = sum_j w_j S_ij (g_j - g_i); g may have trailing axes."""
    g = np.asarray(g, dtype=float)
    if g.shape[0] != model.n_nodes:
        raise UsageError("g must be defined on the velocity nodes")
    wg = model.weights[:, None] * g if g.ndim > 1 else model.weights * g
    return np.tensordot(model.sigma, wg, axes=(1, 0)) - (
        model.rates[:, None] * g if g.ndim > 1 else model.rates * g
    )


def apply_k(model, g):
    """(Kg)_i = sum_j w_j S_ij g_j / lambda_i."""
    g = np.asarray(g, dtype=float)
    if g.shape[0] != model.n_nodes:
        raise UsageError("g must be defined on the velocity nodes")
    if np.any(model.rates <= 0):
        raise DomainError("K undefined at a node with lambda = 0")
    wg = model.weights[:, None] * g if g.ndim > 1 else model.weights * g
    num = np.tensordot(model.sigma, wg, axes=(1, 0))
    return num / (model.rates[:, None] if g.ndim > 1 else model.rates)


def poisson_solve(model, tol=1e-12, max_iter=100000, damping=0.5):
    """Solve (-L) xi = b for the mean-zero (in the tilted measure) solution.

    Uses the damped fixed-point xi <- (1-theta) xi + theta (K xi + b/lambda)
    which converges whenever K has a spectral gap at +1, even when K has
    eigenvalues near -1 where the plain series oscillates.  The tilted mean
    of every component is removed after each step to pin the constant mode.
    """
    if np.any(model.rates <= 0):
        raise DomainError("Poisson solve requires lambda > 0 at every node")
    tilted = TiltedMeasure.of(model)
    h = model.drift / model.rates[:, None]
    xi = h - tilted.weights @ h
    theta = float(damping)
    if not 0.0 < theta <= 1.0:
        raise UsageError("damping must lie in (0, 1]")
    increment = np.inf
    for it in range(1, max_iter + 1):
        nxt = (1.0 - theta) * xi + theta * (apply_k(model, xi) + h)
        nxt = nxt - tilted.weights @ nxt
        increment = tilted.norm(nxt - xi)
        xi = nxt
        if increment < tol:
            residual = float(np.max(np.abs(-apply_generator(model, xi) - model.drift)))
            return PoissonSolution(xi, residual, it)
    residual = float(np.max(np.abs(-apply_generator(model, xi) - model.drift)))
    raise ConvergenceError(
        f"Poisson iteration did not reach tol={tol:g} in {max_iter} steps",
        residual=residual,
        iterations=max_iter,
    )


def poisson_solve_dense(model):
    """Dense least-squares oracle for the Poisson equation (small models)."""
    n = model.n_nodes
    L = model.sigma * model.weights[None, :] - np.diag(model.rates)
    xi, *_ = np.linalg.lstsq(-L, model.drift, rcond=None)
    tilted = TiltedMeasure.of(model)
    xi = xi - tilted.weights @ xi
    residual = float(np.max(np.abs(-L @ xi - model.drift)))
    return PoissonSolution(xi, residual, n)


def diffusion_matrix(model, solution, psd_tol=1e-10):
    """D = sum_i w_i b_i (x) xi_i, symmetrized; PSD checked."""
    raw = np.einsum("i,ia,ib->ab", model.weights, model.drift, solution.xi)
    D = 0.5 * (raw + raw.T)
    asym = float(np.max(np.abs(raw - raw.T)))
    evals = np.linalg.eigvalsh(D)
    if evals.min() < -psd_tol * max(1.0, evals.max()):
        raise NumericalQualityError(
            f"diffusion matrix not positive semidefinite: min eig {evals.min():.3e}"
        )
    return D, asym


def spectral_gap_probe(model, tol=1e-12, seed=0):
    """Second-largest (signed) eigenvalue of K and the resulting gap.

    Works matrix-free on the symmetrized operator sqrt(w~) K / sqrt(w~)
    with the constant mode deflated, using a Krylov (Lanczos) iteration --
    plain power iteration stalls when the top of the mean-zero spectrum is
    clustered.  Returns (lambda_2, gap, c0_proxy) with gap = 1 - lambda_2
    and c0_proxy = 1/gap.
    """
    from scipy.sparse.linalg import LinearOperator, eigsh

    tilted = TiltedMeasure.of(model)
    n = model.n_nodes
    sqw = np.sqrt(tilted.weights)

    def matvec(u):
        u = np.asarray(u, dtype=float).ravel()
        coef = u @ sqw
        g = np.divide(u, sqw, out=np.zeros_like(u), where=sqw > 0)
        out = sqw * apply_k(model, g)
        # shift the constant mode (eigenvalue 1) to -2, strictly below the
        # rest of the spectrum, so the top eigenvalue is lambda_2 itself
        return out - 3.0 * coef * sqw

    if n <= 1024:
        dense = np.empty((n, n))
        eye = np.eye(n)
        for j in range(n):
            dense[:, j] = matvec(eye[j])
        lam2 = float(np.linalg.eigvalsh(0.5 * (dense + dense.T))[-1])
    else:
        from scipy.sparse.linalg import ArpackNoConvergence

        rng = np.random.default_rng(seed)
        op = LinearOperator((n, n), matvec=matvec, dtype=float)
        try:
            vals = eigsh(
                op, k=1, which="LA", tol=max(tol, 1e-10),
                maxiter=50 * n, v0=rng.standard_normal(n),
                return_eigenvectors=False,
            )
            lam2 = float(vals[0])
        except ArpackNoConvergence as exc:
            import warnings

            if len(exc.eigenvalues):
                lam2 = float(exc.eigenvalues[-1])
                warnings.warn("gap probe did not fully converge; "
                              "returning the best Krylov estimate")
            else:
                raise ConvergenceError(
                    "spectral gap probe failed to converge"
                ) from exc
    gap = 1.0 - lam2
    return lam2, gap, (1.0 / gap if gap > 0 else np.inf)


def to_file(model, path):
    """Serialize a model to a self-describing JSON file."""
    payload = {
        "name": model.name,
        "dim_x": model.dim_x,
        "nodes": model.nodes.tolist(),
        "weights": model.weights.tolist(),
        "drift": model.drift.tolist(),
        "sigma": model.sigma.tolist(),
        "rates": model.rates.tolist(),
        "meta": model.meta,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)


def from_file(path):
    with open(path) as fh:
        payload = json.load(fh)
    return VelocityModel(
        nodes=np.array(payload["nodes"], dtype=float),
        weights=np.array(payload["weights"], dtype=float),
        drift=np.array(payload["drift"], dtype=float),
        sigma=np.array(payload["sigma"], dtype=float),
        dim_x=int(payload["dim_x"]),
        name=payload.get("name", "custom"),
        meta=payload.get("meta", {}),
    )
