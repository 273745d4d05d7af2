"""Step-1 marginal maximum likelihood for one side's measurement parameters.

Each side couples one multi-item dimension (probit links, free intercepts
and loadings for items 2..J) with one single-item dimension (indicator
link).  The latent pair is bivariate normal; the side items are all zero
with probability 1 - pi plus the mixture branch where the side is on.
The structural nuisances (pi, means, variance, correlation) are estimated
jointly but only the measurement block is meant to be kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_ndtr, logit, logsumexp

from .model import _gh


@dataclass(frozen=True)
class Step1Params:
    tau: np.ndarray      # length J, tau[0] fixed at 0
    lam: np.ndarray      # length J, lam[0] fixed at 1
    pi_side: float
    mu_p: float
    mu_f: float
    sigma2_p: float
    rho_side: float

    def __post_init__(self):
        if self.tau[0] != 0.0 or self.lam[0] != 1.0:
            raise ValueError("first item must have intercept 0 and loading 1")
        if not 0.0 < self.pi_side < 1.0:
            raise ValueError("pi_side must lie in (0, 1)")
        if self.sigma2_p <= 0.0:
            raise ValueError("sigma2_p must be positive")
        if not -1.0 < self.rho_side < 1.0:
            raise ValueError("rho_side must lie in (-1, 1)")


@dataclass(frozen=True)
class ConvergenceReport:
    converged: bool
    loglik: float
    grad_inf_norm: float
    n_iter: int
    message: str
    info_condition: float = math.nan
    ill_conditioned: bool = False


def _pack(p: Step1Params) -> np.ndarray:
    return np.concatenate([
        p.tau[1:], p.lam[1:],
        [logit(p.pi_side), p.mu_p, p.mu_f,
         math.log(p.sigma2_p), math.atanh(p.rho_side)],
    ])


def _unpack(theta: np.ndarray, n_items: int) -> Step1Params:
    j = n_items - 1
    tau = np.concatenate([[0.0], theta[:j]])
    lam = np.concatenate([[1.0], theta[j:2 * j]])
    a, b, c, d, e = theta[2 * j:]
    return Step1Params(tau=tau, lam=lam, pi_side=float(expit(a)),
                       mu_p=float(b), mu_f=float(c),
                       sigma2_p=float(math.exp(d)), rho_side=float(math.tanh(e)))


def step1_loglik(params: Step1Params, side_items: np.ndarray,
                 quad_nodes: int = 16) -> float:
    """Marginal log-likelihood of one side's items.

    side_items: n x (J + 1) of 0/1 with -1 missing; the last column is the
    single indicator item.  Gauss-Hermite over the multi-item latent; the
    indicator latent integrates exactly through its conditional normal.
    """
    if quad_nodes < 8:
        raise ValueError("need at least 8 quadrature nodes")
    y = np.asarray(side_items)
    n_items = y.shape[1] - 1
    yp, yf = y[:, :n_items], y[:, n_items]

    t, w = _gh(quad_nodes)
    sd_p = math.sqrt(params.sigma2_p)
    eta_p = params.mu_p + math.sqrt(2.0) * sd_p * t        # (G,)
    log_w = np.log(w) - 0.5 * math.log(math.pi)

    tlin = params.tau[:, None] + params.lam[:, None] * eta_p  # J x G
    a1, a0 = log_ndtr(tlin), log_ndtr(-tlin)
    ll = (yp == 1).astype(float) @ a1 + (yp == 0).astype(float) @ a0  # n x G

    s = math.sqrt(1.0 - params.rho_side ** 2)
    u = (params.mu_f + params.rho_side / sd_p * (eta_p - params.mu_p)) / s
    ll = ll + np.where(yf[:, None] == 1, log_ndtr(u)[None, :],
                       np.where(yf[:, None] == 0, log_ndtr(-u)[None, :], 0.0))

    log_int = logsumexp(log_w[None, :] + ll, axis=1)
    any_one = (y == 1).any(axis=1)
    off_branch = np.where(any_one, -np.inf, math.log1p(-params.pi_side))
    return float(np.logaddexp(math.log(params.pi_side) + log_int, off_branch).sum())


def fit_measurement(side_items: np.ndarray, init: Step1Params | None = None,
                    quad_nodes: int = 16, tol: float = 1e-5,
                    max_iter: int = 500) -> tuple[Step1Params, ConvergenceReport]:
    """Quasi-Newton marginal ML in unconstrained space with numeric gradients."""
    y = np.asarray(side_items)
    if not (y == 1).any():
        raise ValueError("need at least one unit with a nonzero response")
    n_items = y.shape[1] - 1
    if init is None:
        j = n_items - 1
        init = Step1Params(
            tau=np.zeros(n_items), lam=np.ones(n_items),
            pi_side=min(0.95, max(0.05, float((y == 1).any(axis=1).mean()))),
            mu_p=0.0, mu_f=0.0, sigma2_p=1.0, rho_side=0.0,
        )

    # Optimize the per-unit mean so finite-difference gradients stay accurate
    # at tight tolerances regardless of n; tol applies on the same scale.
    n = y.shape[0]

    def objective(theta):
        p = _unpack(theta, n_items)
        return -step1_loglik(p, y, quad_nodes) / n

    res = minimize(objective, _pack(init), method="BFGS",
                   options={"gtol": tol, "maxiter": max_iter})
    gnorm = float(np.abs(res.jac).max())
    cond = _information_condition(objective, res.x)
    report = ConvergenceReport(
        converged=bool(res.success) or gnorm < tol,
        loglik=float(-res.fun) * n,
        grad_inf_norm=gnorm,
        n_iter=int(res.nit),
        message=str(res.message),
        info_condition=cond,
        ill_conditioned=not (cond < 1e8),
    )
    return _unpack(res.x, n_items), report


def _information_condition(objective, theta: np.ndarray, h: float = 1e-4) -> float:
    """Condition number of the observed information (finite-difference Hessian).

    Weak joint identifiability of pi with the latent means shows up here as
    a large condition number; callers should treat the nuisance block with
    suspicion when ill_conditioned is set.
    """
    d = theta.size
    H = np.empty((d, d))
    f0 = objective(theta)
    fp = np.empty(d)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        fp[i] = objective(theta + e)
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h
        H[i, i] = (fp[i] - 2.0 * f0 + objective(theta - ei)) / h ** 2
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = h
            fij = objective(theta + ei + ej)
            H[i, j] = H[j, i] = (fij - fp[i] - fp[j] + f0) / h ** 2
    try:
        sv = np.linalg.svd(H, compute_uv=False)
    except np.linalg.LinAlgError:
        return math.inf
    if sv[-1] <= 0:
        return math.inf
    return float(sv[0] / sv[-1])
