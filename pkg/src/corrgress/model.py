"""The full probability model: measurement, structural and class components.

Units carry binary item blocks measuring continuous latent tendencies
(one block per latent dimension), plus two binary latent class variables
("sides") that force all of a side's items to zero when off.  Latent
tendencies are multivariate normal with covariate-dependent means and a
covariate-dependent correlation matrix; class membership follows a
multinomial logit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import log_ndtr, logsumexp, ndtr

from . import linalg
from .samplers import u01_array

CELLS = ((0, 0), (0, 1), (1, 0), (1, 1))  # (xi_side0, xi_side1) ordering


@dataclass(frozen=True)
class LatentDim:
    name: str
    item_count: int
    scale: str = "free"  # "free" | "fixed"

    def __post_init__(self):
        if self.scale not in ("free", "fixed"):
            raise ValueError("scale must be 'free' or 'fixed'")
        if self.item_count < 1:
            raise ValueError("item_count must be >= 1")
        if self.item_count == 1 and self.scale != "fixed":
            raise ValueError(
                f"dim {self.name!r}: a single-item dimension must have scale "
                "fixed at 1 for identification"
            )


@dataclass(frozen=True)
class ClassSide:
    name: str
    dims: tuple[str, ...]


@dataclass(frozen=True)
class ModelSpec:
    """Declarative model description.

    Covariate index lists select columns of the full covariate matrix X for
    the mean model, the correlation model and the class model respectively.
    """

    dims: tuple[LatentDim, ...]
    class_sides: tuple[ClassSide, ClassSide]
    mean_covariates: tuple[int, ...]
    corr_covariates: tuple[int, ...]
    class_covariates: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        object.__setattr__(self, "class_sides", tuple(self.class_sides))
        object.__setattr__(self, "mean_covariates", tuple(self.mean_covariates))
        object.__setattr__(self, "corr_covariates", tuple(self.corr_covariates))
        object.__setattr__(self, "class_covariates", tuple(self.class_covariates))
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ValueError("dimension names must be unique")
        if len(self.class_sides) != 2:
            raise ValueError("exactly two class sides are required")
        covered = [n for side in self.class_sides for n in side.dims]
        if sorted(covered) != sorted(names):
            raise ValueError("class sides must partition the dimensions")

    @property
    def k_eta(self) -> int:
        return len(self.dims)

    @property
    def n_pairs(self) -> int:
        return linalg.vector_length(self.k_eta)

    @property
    def dim_names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dims)

    @property
    def pair_names(self) -> tuple[str, ...]:
        names = self.dim_names
        return tuple(f"{names[r]}:{names[c]}" for r, c in linalg.pair_indices(self.k_eta))

    def dim_index(self, name: str) -> int:
        return self.dim_names.index(name)

    def dim_side(self, name_or_idx) -> int:
        name = name_or_idx if isinstance(name_or_idx, str) else self.dims[name_or_idx].name
        for s, side in enumerate(self.class_sides):
            if name in side.dims:
                return s
        raise KeyError(name)

    @property
    def total_items(self) -> int:
        return sum(d.item_count for d in self.dims)

    def item_slices(self) -> dict[str, slice]:
        out, start = {}, 0
        for d in self.dims:
            out[d.name] = slice(start, start + d.item_count)
            start += d.item_count
        return out

    @property
    def free_scale_dims(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dims if d.scale == "free")


@dataclass(frozen=True)
class MeasurementParams:
    """Intercepts and loadings per multi-item dimension.

    Item 1 of each multi-item block is constrained to intercept 0 and
    loading 1; the stored arrays include these exact constants.  Single-item
    dimensions use the indicator link and carry no parameters.
    """

    tau: dict[str, np.ndarray]
    lam: dict[str, np.ndarray]

    def validate(self, spec: ModelSpec) -> None:
        for d in spec.dims:
            if d.item_count == 1:
                continue
            t, l = self.tau[d.name], self.lam[d.name]
            if t.shape != (d.item_count,) or l.shape != (d.item_count,):
                raise ValueError(f"measurement arrays for {d.name!r} have wrong length")
            if t[0] != 0.0 or l[0] != 1.0:
                raise ValueError(
                    f"dim {d.name!r}: first item must have intercept 0 and loading 1"
                )

    def flat(self, spec: ModelSpec) -> tuple[np.ndarray, np.ndarray]:
        """tau/lam aligned with item columns; identity link for single items."""
        tau = np.zeros(spec.total_items)
        lam = np.ones(spec.total_items)
        for name, sl in spec.item_slices().items():
            if sl.stop - sl.start > 1:
                tau[sl] = self.tau[name]
                lam[sl] = self.lam[name]
        return tau, lam


@dataclass(frozen=True)
class StructuralParams:
    """beta (Qm x K), sigma (K, fixed dims exactly 1), alpha (L x q),
    gamma (3 x Qg) for cells (0,1), (1,0), (1,1); cell (0,0) fixed at 0."""

    beta: np.ndarray
    sigma: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray

    def validate(self, spec: ModelSpec) -> None:
        K = spec.k_eta
        if self.beta.shape != (len(spec.mean_covariates), K):
            raise ValueError("beta has wrong shape")
        if self.sigma.shape != (K,) or np.any(self.sigma <= 0):
            raise ValueError("sigma must be positive, one entry per dimension")
        for k, d in enumerate(spec.dims):
            if d.scale == "fixed" and self.sigma[k] != 1.0:
                raise ValueError(f"sigma for fixed-scale dim {d.name!r} must be 1")
        if self.alpha.shape != (spec.n_pairs, len(spec.corr_covariates)):
            raise ValueError("alpha has wrong shape")
        if self.gamma.shape != (3, len(spec.class_covariates)):
            raise ValueError("gamma has wrong shape")


@dataclass
class Dataset:
    """Observed items (0/1, -1 for missing) and complete covariates."""

    items: np.ndarray  # n x total_items, int8
    X: np.ndarray      # n x Q, float
    Z: np.ndarray | None = None
    item_names: tuple[str, ...] | None = None
    covariate_names: tuple[str, ...] | None = None

    def __post_init__(self):
        self.items = np.asarray(self.items, dtype=np.int8)
        self.X = np.asarray(self.X, dtype=float)
        if np.isnan(self.X).any():
            raise ValueError("covariates must be complete (no missing values)")
        if not np.isin(self.items, (-1, 0, 1)).all():
            raise ValueError("items must be coded 0/1 with -1 for missing")

    @property
    def n(self) -> int:
        return self.items.shape[0]

    def side_nonzero(self, spec: ModelSpec) -> np.ndarray:
        """n x 2 flags: any observed item of the side equals 1."""
        flags = np.zeros((self.n, 2), dtype=bool)
        slices = spec.item_slices()
        for s, side in enumerate(spec.class_sides):
            for name in side.dims:
                flags[:, s] |= (self.items[:, slices[name]] == 1).any(axis=1)
        return flags


@dataclass
class LatentState:
    xi: np.ndarray   # n x 2, int8
    eta: np.ndarray  # n x K, float


# ---------------------------------------------------------------------------
# Elementary model evaluations
# ---------------------------------------------------------------------------

def item_prob(tau: float, lam: float, eta) -> np.ndarray | float:
    """P(item = 1) = Phi(tau + lam * eta)."""
    return ndtr(tau + lam * np.asarray(eta, dtype=float))


def class_probs(gamma: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Cell probabilities (pi_00, pi_01, pi_10, pi_11); overflow-guarded."""
    gamma = np.asarray(gamma, dtype=float)
    x = np.asarray(x, dtype=float)
    lp = np.concatenate([np.zeros(x.shape[:-1] + (1,)), x @ gamma.T], axis=-1)
    lp = lp - lp.max(axis=-1, keepdims=True)
    w = np.exp(lp)
    return w / w.sum(axis=-1, keepdims=True)


def structural_moments(params: StructuralParams, spec: ModelSpec,
                       x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean vector and covariance matrix of the latent tendencies at x."""
    x = np.asarray(x, dtype=float)
    xm = x[list(spec.mean_covariates)]
    xc = x[list(spec.corr_covariates)]
    mu = params.beta.T @ xm
    R = linalg.assemble_matrix(params.alpha @ xc, spec.k_eta)
    if not linalg.is_positive_definite(R):
        raise linalg.NotPositiveDefiniteError(
            "correlation matrix not PD at this covariate value (alpha infeasible)"
        )
    S = np.diag(params.sigma)
    return mu, S @ R @ S


# ---------------------------------------------------------------------------
# Generative simulation
# ---------------------------------------------------------------------------

def simulate_dataset(spec: ModelSpec, phi: MeasurementParams, params: StructuralParams,
                     X: np.ndarray, seed: int) -> tuple[Dataset, LatentState]:
    """Simulate a dataset at the given covariates; deterministic given seed.

    Each unit owns one counter-based random stream, so output is independent
    of evaluation order.
    """
    phi.validate(spec)
    params.validate(spec)
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    K = spec.k_eta
    J = spec.total_items
    Xm = X[:, list(spec.mean_covariates)]
    Xc = X[:, list(spec.corr_covariates)]
    Xg = X[:, list(spec.class_covariates)]

    units = np.arange(n, dtype=np.uint64)

    # Latent classes: one uniform per unit against the cell CDF.
    pis = class_probs(params.gamma, Xg)  # n x 4
    u_xi = u01_array(seed, units, np.zeros(n, dtype=np.uint64))
    cell = (u_xi[:, None] > np.cumsum(pis, axis=1)).sum(axis=1)
    xi = np.array([CELLS[c] for c in cell], dtype=np.int8)

    # Latent tendencies: K standard normals per unit through the Cholesky
    # factor of the unit's covariance matrix.
    mu = Xm @ params.beta  # n x K
    rho_all = Xc @ params.alpha.T  # n x L
    from scipy.special import ndtri

    z = np.empty((n, K))
    for k in range(K):
        z[:, k] = ndtri(u01_array(seed, units, np.full(n, 1 + k, dtype=np.uint64)))
    eta = np.empty((n, K))
    pairs = linalg.pair_indices(K)
    S = np.diag(params.sigma)
    for i in range(n):
        R = linalg.assemble_matrix(rho_all[i], K)
        try:
            Lf = np.linalg.cholesky(S @ R @ S)
        except np.linalg.LinAlgError:
            raise linalg.NotPositiveDefiniteError(
                f"alpha infeasible at data row {i}"
            ) from None
        eta[i] = mu[i] + Lf @ z[i]

    # Items.
    tau, lam = phi.flat(spec)
    items = np.zeros((n, J), dtype=np.int8)
    slices = spec.item_slices()
    for k, d in enumerate(spec.dims):
        side = spec.dim_side(k)
        on = xi[:, side] == 1
        sl = slices[d.name]
        if d.item_count == 1:
            items[:, sl.start] = np.where(on & (eta[:, k] > 0), 1, 0)
        else:
            for j in range(sl.start, sl.stop):
                u = u01_array(seed, units, np.full(n, 1 + K + j, dtype=np.uint64))
                items[:, j] = np.where(on & (u < ndtr(tau[j] + lam[j] * eta[:, k])), 1, 0)

    names = tuple(
        f"{d.name}_{j+1}" for d in spec.dims for j in range(d.item_count)
    )
    return Dataset(items=items, X=X, item_names=names), LatentState(xi=xi, eta=eta)


# ---------------------------------------------------------------------------
# Marginal log-likelihood
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _gh(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.hermite.hermgauss(nodes)


_BVN_GL = 48


@lru_cache(maxsize=2)
def _gl(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(nodes)


def bvn_upper(a, b, r) -> np.ndarray:
    """P(Z1 > a, Z2 > b) for standard bivariate normal with correlation r.

    Vectorized over a and b (r may broadcast).  Gauss-Legendre integration of
    the correlation-derivative identity; accurate to ~1e-10 for |r| <= 0.99.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    r = np.asarray(r, dtype=float)
    t, w = _gl(_BVN_GL)
    # map [-1, 1] -> [0, r]
    tt = 0.5 * r[..., None] * (t + 1.0)
    ww = 0.5 * r[..., None] * w
    aa = a[..., None]
    bb = b[..., None]
    dens = np.exp(-(aa ** 2 - 2.0 * tt * aa * bb + bb ** 2) / (2.0 * (1.0 - tt ** 2)))
    integral = (ww * dens / np.sqrt(1.0 - tt ** 2)).sum(axis=-1) / (2.0 * math.pi)
    return ndtr(-a) * ndtr(-b) + integral


def _orthant_factor(cond_mean: np.ndarray, cond_cov: np.ndarray,
                    signs: np.ndarray) -> np.ndarray:
    """P(sign_s * eta_s > 0 for all s) under N(cond_mean, cond_cov).

    cond_mean: (..., m) with m in {1, 2}; signs: (m,) of +-1.
    """
    m = signs.shape[0]
    sd = np.sqrt(np.diag(cond_cov))
    u = cond_mean / sd
    if m == 1:
        return ndtr(signs[0] * u[..., 0])
    r = cond_cov[0, 1] / (sd[0] * sd[1])
    # P(s0 eta0 > 0, s1 eta1 > 0) = P(Z0 > -s0 u0, Z1 > -s1 u1) with corr s0 s1 r
    return bvn_upper(-signs[0] * u[..., 0], -signs[1] * u[..., 1],
                     signs[0] * signs[1] * r)


def _block_log_integral(spec: ModelSpec, tau: np.ndarray, lam: np.ndarray,
                        y: np.ndarray, mu: np.ndarray, Sigma: np.ndarray,
                        dim_idx: list[int], nodes: int) -> float:
    """log of the measurement-model integral over the listed dimensions.

    Multi-item dimensions are integrated by tensor-product Gauss-Hermite
    quadrature after Cholesky standardization; single-item (indicator-link)
    dimensions are integrated exactly through their conditional normal
    distribution given the multi-item coordinates.
    """
    slices = spec.item_slices()
    multi = [k for k in dim_idx if spec.dims[k].item_count > 1]
    # Single-item dims with the item observed; missing single items integrate to 1.
    single = [k for k in dim_idx
              if spec.dims[k].item_count == 1 and y[slices[spec.dims[k].name].start] >= 0]
    if len(single) > 2:
        raise NotImplementedError("at most two single-item dimensions per side pair")

    sel = multi + single
    mu_d = mu[sel]
    Sig_d = Sigma[np.ix_(sel, sel)]
    nm_ = len(multi)

    if nm_ == 0:
        if not single:
            return 0.0
        signs = np.array([1.0 if y[slices[spec.dims[k].name].start] == 1 else -1.0
                          for k in single])
        val = _orthant_factor(mu_d[None, :], Sig_d, signs)[0]
        return math.log(val) if val > 0 else -math.inf

    t, w = _gh(nodes)
    grids = np.meshgrid(*([t] * nm_), indexing="ij")
    T = np.stack([g.ravel() for g in grids], axis=-1)  # G x nm
    wg = np.prod(np.stack(np.meshgrid(*([w] * nm_), indexing="ij"), axis=-1)
                 .reshape(-1, nm_), axis=-1)
    log_wg = np.log(wg) - 0.5 * nm_ * math.log(math.pi)

    Smm = Sig_d[:nm_, :nm_]
    L = np.linalg.cholesky(Smm)
    eta_m = mu_d[:nm_] + math.sqrt(2.0) * T @ L.T  # G x nm

    loglik = np.zeros(T.shape[0])
    for pos, k in enumerate(multi):
        sl = slices[spec.dims[k].name]
        for j in range(sl.start, sl.stop):
            if y[j] < 0:
                continue
            t_lin = tau[j] + lam[j] * eta_m[:, pos]
            loglik += log_ndtr(t_lin) if y[j] == 1 else log_ndtr(-t_lin)

    if single:
        Ssm = Sig_d[nm_:, :nm_]
        W = Ssm @ np.linalg.inv(Smm)
        cond_cov = Sig_d[nm_:, nm_:] - W @ Ssm.T
        cond_mean = mu_d[nm_:] + (eta_m - mu_d[:nm_]) @ W.T
        signs = np.array([1.0 if y[slices[spec.dims[k].name].start] == 1 else -1.0
                          for k in single])
        factor = _orthant_factor(cond_mean, cond_cov, signs)
        with np.errstate(divide="ignore"):
            loglik = loglik + np.log(np.clip(factor, 0.0, None))

    return float(logsumexp(log_wg + loglik))


def unit_loglik(spec: ModelSpec, phi: MeasurementParams, params: StructuralParams,
                y: np.ndarray, x: np.ndarray, quad_nodes: int = 8) -> float:
    """Marginal log-likelihood contribution of one unit.

    Mixture over the four latent-class cells; sides with any nonzero item
    force their class indicator to 1 through a zero measurement weight.
    """
    if quad_nodes < 4:
        raise ValueError("need at least 4 quadrature nodes per dimension")
    y = np.asarray(y)
    x = np.asarray(x, dtype=float)
    tau, lam = phi.flat(spec)
    mu, Sigma = structural_moments(params, spec, x)
    pis = class_probs(params.gamma, x[list(spec.class_covariates)])

    slices = spec.item_slices()
    side_dims = [
        [spec.dim_index(n) for n in spec.class_sides[0].dims],
        [spec.dim_index(n) for n in spec.class_sides[1].dims],
    ]
    nonzero = [
        any((y[slices[spec.dims[k].name]] == 1).any() for k in side_dims[s])
        for s in (0, 1)
    ]

    terms = []
    for c, (s0, s1) in enumerate(CELLS):
        if (s0 == 0 and nonzero[0]) or (s1 == 0 and nonzero[1]):
            continue  # zero measurement weight
        if pis[c] <= 0.0:
            continue
        active = []
        if s0 == 1:
            active += side_dims[0]
        if s1 == 1:
            active += side_dims[1]
        active.sort()
        log_int = _block_log_integral(spec, tau, lam, y, mu, Sigma, active, quad_nodes)
        terms.append(math.log(pis[c]) + log_int)
    if not terms:
        return -math.inf
    return float(logsumexp(terms))


def dataset_loglik(spec: ModelSpec, phi: MeasurementParams, params: StructuralParams,
                   data: Dataset, quad_nodes: int = 8) -> float:
    return sum(
        unit_loglik(spec, phi, params, data.items[i], data.X[i], quad_nodes)
        for i in range(data.n)
    )
