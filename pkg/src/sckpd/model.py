"""Static Cholesky-sum precision model: parameter container, factor
assembly, structured likelihood over a Kronecker decomposition of the data
scatter, priors, the unconstrained reparameterization, and analytic
gradients of the log posterior.

The precision factor is

    L = sum_i strict_lower(L1_i (x) L2_i) + D1 (x) D2,

with shared diagonal vectors D1, D2 across the K components.  Writing the
left member list as [low1_1, .., low1_K, diag(D1)] and the right list as
[low2_1, .., low2_K, diag(D2)], L = sum_{a,b} C[a,b] U_a (x) V_b with the
0/1 coupling C = [[I_K, 1], [1^T, 1]].  The data enter only through the
Kronecker terms (A_q, B_q) of the scatter sum_i y_i y_i^T, giving

    tr(L L^T S) = sum_q <P_q, C R_q C^T>,
    P_q[a,a'] = tr(U_a U_a'^T A_q),   R_q[b,b'] = tr(V_b V_b'^T B_q),

a sum of small Hadamard traces; no d1*d2-sized product is ever formed.
The same cache drives the analytic gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import lgamma

import numpy as np

from . import transforms
from .hyper import PriorTargets, SolvedHyper, digamma
from .kron import PVLDecomp, max_pvl_terms, pvl_decompose

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class SCKPDParams:
    """Constrained parameters of the static model."""

    lowers1: np.ndarray   # (K, d1, d1), strictly lower triangular
    lowers2: np.ndarray   # (K, d2, d2), strictly lower triangular
    d1_diag: np.ndarray   # (d1,), positive
    d2_diag: np.ndarray   # (d2,), positive
    omega: np.ndarray     # (K,), on the open unit simplex
    theta: float          # in (0, 1)

    @property
    def n_components(self) -> int:
        return self.lowers1.shape[0]

    @property
    def d1(self) -> int:
        return self.lowers1.shape[1]

    @property
    def d2(self) -> int:
        return self.lowers2.shape[1]

    def validate(self) -> "SCKPDParams":
        K = self.n_components
        if self.lowers2.shape[0] != K or self.omega.shape != (K,):
            raise ValueError("component counts disagree across fields")
        for name, arr in (("lowers1", self.lowers1), ("lowers2", self.lowers2)):
            if np.any(np.triu(arr, 0) != 0):
                raise ValueError(f"{name} must be strictly lower triangular")
        if np.any(self.d1_diag <= 0) or np.any(self.d2_diag <= 0):
            raise ValueError("diagonal vectors must be strictly positive")
        if np.any(self.omega < 0) or abs(self.omega.sum() - 1.0) > 1e-12:
            raise ValueError("omega must be nonnegative and sum to 1")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        return self


@dataclass(frozen=True)
class DataSummary:
    """Sufficient statistics: scatter matrix held as its Kronecker terms."""

    n_obs: int
    d1: int
    d2: int
    scatter_pvl: PVLDecomp
    trace_scatter: float

    @classmethod
    def from_observations(cls, Y: np.ndarray, d1: int, d2: int) -> "DataSummary":
        Y = np.asarray(Y, dtype=float)
        if Y.ndim != 2 or Y.shape[1] != d1 * d2:
            raise ValueError(f"expected observations of width {d1 * d2}, got {Y.shape}")
        return cls.from_scatter(Y.T @ Y, Y.shape[0], d1, d2)

    @classmethod
    def from_scatter(cls, scatter: np.ndarray, n_obs: int, d1: int, d2: int) -> "DataSummary":
        scatter = np.asarray(scatter, dtype=float)
        pvl = pvl_decompose(scatter, d1, d2, max_pvl_terms(d1, d2))
        return cls(n_obs=int(n_obs), d1=d1, d2=d2, scatter_pvl=pvl,
                   trace_scatter=float(np.trace(scatter)))


class StateLayout:
    """Index map between SCKPDParams and a flat unconstrained vector.

    Packing order: strict-lower entries of every mode-1 component (row-major
    within each), then mode-2, then log D1, log D2, the K-1 stick-breaking
    coordinates of omega, and the logit of theta.
    """

    def __init__(self, d1: int, d2: int, n_components: int):
        if min(d1, d2) < 2 or n_components < 1:
            raise ValueError("need d1, d2 >= 2 and at least one component")
        self.d1, self.d2, self.n_components = d1, d2, n_components
        self.tril1 = np.tril_indices(d1, -1)
        self.tril2 = np.tril_indices(d2, -1)
        self.m1 = len(self.tril1[0])
        self.m2 = len(self.tril2[0])
        K = n_components
        sizes = [K * self.m1, K * self.m2, d1, d2, K - 1, 1]
        bounds = np.cumsum([0] + sizes)
        (self.sl_low1, self.sl_low2, self.sl_logd1, self.sl_logd2,
         self.sl_sticks, self.sl_theta) = (slice(bounds[i], bounds[i + 1]) for i in range(6))
        self.size = int(bounds[-1])

    def pack(self, params: SCKPDParams) -> np.ndarray:
        """Unconstrained coordinates of valid params (inverse of unpack)."""
        params.validate()
        if np.any(params.omega <= 0):
            raise ValueError("omega must be strictly inside the simplex to unconstrain")
        u = np.empty(self.size)
        K = self.n_components
        u[self.sl_low1] = params.lowers1[:, self.tril1[0], self.tril1[1]].reshape(-1)
        u[self.sl_low2] = params.lowers2[:, self.tril2[0], self.tril2[1]].reshape(-1)
        u[self.sl_logd1] = np.log(params.d1_diag)
        u[self.sl_logd2] = np.log(params.d2_diag)
        if K > 1:
            u[self.sl_sticks] = transforms.stick_breaking_inverse(params.omega)
        u[self.sl_theta] = transforms.interval_inverse(params.theta)
        return u

    def unpack(self, u: np.ndarray) -> SCKPDParams:
        params, _ = self.decode(u)
        return params

    def decode(self, u: np.ndarray) -> tuple[SCKPDParams, float]:
        """Params plus the total log-Jacobian of the transform at ``u``."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.size,):
            raise ValueError(f"expected a state vector of length {self.size}")
        K, d1, d2 = self.n_components, self.d1, self.d2
        low1 = np.zeros((K, d1, d1))
        low1[:, self.tril1[0], self.tril1[1]] = u[self.sl_low1].reshape(K, self.m1)
        low2 = np.zeros((K, d2, d2))
        low2[:, self.tril2[0], self.tril2[1]] = u[self.sl_low2].reshape(K, self.m2)
        D1, lj1 = transforms.positive_forward(u[self.sl_logd1])
        D2, lj2 = transforms.positive_forward(u[self.sl_logd2])
        if K > 1:
            omega, lj_sb = transforms.stick_breaking_forward(u[self.sl_sticks])
        else:
            omega, lj_sb = np.ones(1), 0.0
        theta, lj_t = transforms.interval_forward(float(u[self.sl_theta][0]))
        params = SCKPDParams(lowers1=low1, lowers2=low2, d1_diag=D1, d2_diag=D2,
                             omega=omega, theta=theta)
        return params, lj1 + lj2 + lj_sb + lj_t


def to_unconstrained(params: SCKPDParams, layout: StateLayout | None = None) -> np.ndarray:
    layout = layout or StateLayout(params.d1, params.d2, params.n_components)
    return layout.pack(params)


def from_unconstrained(u: np.ndarray, layout: StateLayout) -> SCKPDParams:
    return layout.unpack(u)


def assemble_ldagger(params: SCKPDParams) -> np.ndarray:
    """Dense lower-triangular factor; diagonal is kron(D1, D2)'s diagonal."""
    d1, d2 = params.d1, params.d2
    D1h = np.diag(params.d1_diag)
    D2h = np.diag(params.d2_diag)
    L = np.kron(D1h, D2h)
    for i in range(params.n_components):
        L += np.kron(params.lowers1[i], D2h)
        L += np.kron(D1h, params.lowers2[i])
        L += np.kron(params.lowers1[i], params.lowers2[i])
    return L


def log_det_ldagger(params: SCKPDParams) -> float:
    """d2 * sum(log D1) + d1 * sum(log D2); the strict-lower parts drop out."""
    return float(params.d2 * np.sum(np.log(params.d1_diag))
                 + params.d1 * np.sum(np.log(params.d2_diag)))


def _coupling(K: int) -> np.ndarray:
    C = np.zeros((K + 1, K + 1))
    C[:K, :K] = np.eye(K)
    C[:, K] = 1.0
    C[K, :K] = 1.0
    return C


def _members(low: np.ndarray, diag: np.ndarray) -> np.ndarray:
    return np.concatenate([low, np.diag(diag)[None]], axis=0)


def _trace_quad_core(low1, low2, D1, D2, pvl: PVLDecomp, want_grad: bool):
    """tr(L L^T S) over the scatter's Kronecker terms, optionally with
    gradients w.r.t. the strict-lower stacks and the diagonal vectors."""
    K = low1.shape[0]
    C = _coupling(K)
    Us = _members(low1, D1)
    Vs = _members(low2, D2)
    A, B = pvl.left, pvl.right
    AU = np.einsum('qij,mjk->qmik', A, Us, optimize=True)
    BV = np.einsum('qij,mjk->qmik', B, Vs, optimize=True)
    P = np.einsum('qmik,nik->qmn', AU, Us, optimize=True)
    R = np.einsum('qmik,nik->qmn', BV, Vs, optimize=True)
    M = C @ R @ C.T
    T = float(np.einsum('qmn,qmn->', P, M))
    if not want_grad:
        return T, None
    # T = sum P[q,a,a'] M[q,a,a'] with P[q,a,a'] = tr(U_a U_a'^T A_q):
    # dT/dU_l collects A_q^T U_a' against M[q,l,a'] and A_q U_a against M[q,a,l]
    AtU = np.einsum('qji,mjk->qmik', A, Us, optimize=True)
    GU = (np.einsum('qln,qnik->lik', M, AtU, optimize=True)
          + np.einsum('qml,qmik->lik', M, AU, optimize=True))
    N = C.T @ P @ C
    BtV = np.einsum('qji,mjk->qmik', B, Vs, optimize=True)
    GV = (np.einsum('qln,qnik->lik', N, BtV, optimize=True)
          + np.einsum('qml,qmik->lik', N, BV, optimize=True))
    g_low1 = np.tril(GU[:K], -1)
    g_low2 = np.tril(GV[:K], -1)
    g_D1 = np.diagonal(GU[K]).copy()
    g_D2 = np.diagonal(GV[K]).copy()
    return T, (g_low1, g_low2, g_D1, g_D2)


def trace_quadratic(params: SCKPDParams, data: DataSummary) -> float:
    """tr(L L^T sum_i y_i y_i^T) evaluated on the scatter's Kronecker terms."""
    T, _ = _trace_quad_core(params.lowers1, params.lowers2,
                            params.d1_diag, params.d2_diag,
                            data.scatter_pvl, want_grad=False)
    return T


def log_likelihood(params: SCKPDParams, data: DataSummary) -> float:
    """Gaussian log-likelihood with the factor on the precision side."""
    n, d = data.n_obs, data.d1 * data.d2
    return (n * log_det_ldagger(params)
            - 0.5 * trace_quadratic(params, data)
            - 0.5 * n * d * LOG_2PI)


def _gamma_logpdf(x: np.ndarray, shape: float, rate: float) -> float:
    return float(np.sum(shape * math.log(rate) - lgamma(shape)
                        + (shape - 1.0) * np.log(x) - rate * x))


def _dirichlet_logpdf(omega: np.ndarray, theta: float) -> float:
    K = omega.shape[0]
    return float(lgamma(K * theta) - K * lgamma(theta)
                 + (theta - 1.0) * np.sum(np.log(omega)))


def log_prior(params: SCKPDParams, hyper: SolvedHyper,
              targets: PriorTargets | None = None) -> float:
    """Sum of all component log prior densities.

    The centering targets are already baked into ``hyper``; ``targets`` is
    accepted for interface symmetry.  Strict-lower entries are
    N(0, omega_i * beta); a component weight at or below zero (or a
    nonpositive lower variance) puts the state outside the open-simplex
    support and returns -inf, never an exception.
    """
    K = params.n_components
    d1, d2 = params.d1, params.d2
    beta = hyper.lower_variance
    if np.any(params.omega <= 0.0) or beta <= 0.0:
        return -np.inf
    lp = _gamma_logpdf(params.d1_diag, hyper.shape1, hyper.rate1)
    lp += _gamma_logpdf(params.d2_diag, hyper.shape2, hyper.rate2)
    n_ent = d1 * (d1 - 1) // 2 + d2 * (d2 - 1) // 2
    for i in range(K):
        var = params.omega[i] * beta
        ssq = float(np.sum(params.lowers1[i] ** 2) + np.sum(params.lowers2[i] ** 2))
        lp += -0.5 * (ssq / var + n_ent * (LOG_2PI + math.log(var)))
    lp += _dirichlet_logpdf(params.omega, params.theta)
    # theta is uniform on (0, 1): contributes zero
    return float(lp)


def log_posterior(u: np.ndarray, layout: StateLayout, data: DataSummary,
                  hyper: SolvedHyper, targets: PriorTargets) -> float:
    params, log_jac = layout.decode(u)
    if not np.isfinite(log_jac):
        return -np.inf
    lp = log_prior(params, hyper, targets)
    if not np.isfinite(lp):
        return -np.inf
    return log_likelihood(params, data) + lp + log_jac


def log_posterior_grad(u: np.ndarray, layout: StateLayout, data: DataSummary,
                       hyper: SolvedHyper, targets: PriorTargets
                       ) -> tuple[float, np.ndarray]:
    """Log posterior in unconstrained coordinates and its exact gradient.

    Value = likelihood + priors + log-Jacobians of all transforms.  States
    outside the support return (-inf, zeros); the sampler treats those as
    divergent proposals.
    """
    u = np.asarray(u, dtype=float)
    K = layout.n_components
    params, log_jac = layout.decode(u)
    beta = hyper.lower_variance
    zeros = np.zeros(layout.size)
    if (not np.isfinite(log_jac)) or np.any(params.omega <= 0.0) or beta <= 0.0:
        return -np.inf, zeros

    n, d1, d2 = data.n_obs, layout.d1, layout.d2
    T, grads = _trace_quad_core(params.lowers1, params.lowers2,
                                params.d1_diag, params.d2_diag,
                                data.scatter_pvl, want_grad=True)
    g_low1_T, g_low2_T, g_D1_T, g_D2_T = grads

    value = (n * log_det_ldagger(params) - 0.5 * T - 0.5 * n * d1 * d2 * LOG_2PI
             + log_prior(params, hyper, targets) + log_jac)
    if not np.isfinite(value):
        return -np.inf, zeros

    grad = np.empty(layout.size)
    var = params.omega * beta                       # (K,)
    n_ent = layout.m1 + layout.m2

    # strict-lower coordinates: likelihood trace term plus normal prior
    g1 = -0.5 * g_low1_T - params.lowers1 / var[:, None, None]
    g2 = -0.5 * g_low2_T - params.lowers2 / var[:, None, None]
    grad[layout.sl_low1] = g1[:, layout.tril1[0], layout.tril1[1]].reshape(-1)
    grad[layout.sl_low2] = g2[:, layout.tril2[0], layout.tril2[1]].reshape(-1)

    # log-diagonal coordinates: d/du = (dlik/dD + dprior/dD) * D + 1
    dD1 = n * d2 / params.d1_diag - 0.5 * g_D1_T \
        + (hyper.shape1 - 1.0) / params.d1_diag - hyper.rate1
    dD2 = n * d1 / params.d2_diag - 0.5 * g_D2_T \
        + (hyper.shape2 - 1.0) / params.d2_diag - hyper.rate2
    grad[layout.sl_logd1] = transforms.positive_grad(params.d1_diag, dD1)
    grad[layout.sl_logd2] = transforms.positive_grad(params.d2_diag, dD2)

    # omega enters only the priors: lower-variance scaling and the Dirichlet
    ssq = np.array([float(np.sum(params.lowers1[i] ** 2) + np.sum(params.lowers2[i] ** 2))
                    for i in range(K)])
    g_omega = ssq / (2.0 * var * params.omega) - 0.5 * n_ent / params.omega \
        + (params.theta - 1.0) / params.omega
    if K > 1:
        grad[layout.sl_sticks] = transforms.stick_breaking_grad(
            u[layout.sl_sticks], g_omega)

    g_theta = K * digamma(K * params.theta) - K * digamma(params.theta) \
        + float(np.sum(np.log(params.omega)))
    grad[layout.sl_theta] = transforms.interval_grad(params.theta, g_theta)

    return float(value), grad
