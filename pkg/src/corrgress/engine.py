"""Chain orchestration around the compiled sampler kernels.

Chains are deterministic functions of (seed, chain id): every random draw
comes from a counter-based stream keyed by those two values, so running
chains serially or across any number of worker processes yields
bitwise-identical output.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _engine_kernels as ker
from .feasibility import TestSet
from .model import Dataset, MeasurementParams, ModelSpec, StructuralParams


class EngineError(RuntimeError):
    pass


_STATUS_MSG = {
    ker.ERR_ARS: "adaptive rejection sampler reported a non-log-concave conditional",
    ker.ERR_DRIFT: "cache drift beyond tolerance at re-baseline",
    ker.ERR_XI_WEIGHTS: "all latent-class weights underflowed to zero",
    ker.ERR_INTERVAL: "current alpha left its feasible interval (cache corruption)",
}


@dataclass(frozen=True)
class PriorConfig:
    sigma2_gamma: float = 100.0
    sigma2_beta: float = 100.0
    ig_a0: float = 1e-5
    ig_b0: float = 1e-5

    def __post_init__(self):
        for name in ("sigma2_gamma", "sigma2_beta", "ig_a0", "ig_b0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 2
    iterations: int = 20_000
    burn_in: int = 2_000
    thin: int = 1
    rw_constant_C: float = 2.38
    seed: int = 0
    tune_every: int = 2_000
    rebase_every: int = 10_000
    drift_tol: float = 1e-8

    def __post_init__(self):
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.rw_constant_C <= 0:
            raise ValueError("rw_constant_C must be positive")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")

    @property
    def retained_per_chain(self) -> int:
        return -((self.iterations - self.burn_in) // -self.thin)


@dataclass
class DrawStore:
    columns: tuple[str, ...]
    draws: np.ndarray        # rows x ncol
    chain_id: np.ndarray     # rows
    iteration: np.ndarray    # rows
    acceptance: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return self.draws.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, self.columns.index(name)]

    def by_chain(self) -> list[np.ndarray]:
        return [self.draws[self.chain_id == c] for c in np.unique(self.chain_id)]

    def to_csv(self, path) -> None:
        header = "chain,iteration," + ",".join(self.columns)
        body = np.column_stack([self.chain_id, self.iteration, self.draws])
        fmt = ["%d", "%d"] + ["%.17g"] * len(self.columns)
        np.savetxt(path, body, delimiter=",", header=header, comments="", fmt=fmt)

    def write_meta(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"acceptance": self.acceptance, **self.meta}, fh, indent=2,
                      default=lambda o: o.tolist() if isinstance(o, np.ndarray) else o)

    @classmethod
    def from_csv(cls, path) -> "DrawStore":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(columns=tuple(header[2:]), draws=body[:, 2:],
                   chain_id=body[:, 0].astype(int),
                   iteration=body[:, 1].astype(int))


def draw_columns(spec: ModelSpec, covariate_names: tuple[str, ...] | None = None) \
        -> tuple[str, ...]:
    def cov(i):
        return covariate_names[i] if covariate_names else f"x{i}"

    cols = [f"beta.{d}.{cov(i)}" for d in spec.dim_names for i in spec.mean_covariates]
    cols += [f"sigma.{d}" for d in spec.dim_names]
    cols += [f"alpha.{p}.{cov(i)}" for p in spec.pair_names for i in spec.corr_covariates]
    cols += [f"gamma.{c}.{cov(i)}" for c in ("01", "10", "11")
             for i in spec.class_covariates]
    return tuple(cols)


def _flat_arrays(spec: ModelSpec, phi: MeasurementParams, data: Dataset):
    from . import linalg

    tau, lam = phi.flat(spec)
    counts = [d.item_count for d in spec.dims]
    item_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    dim_side = np.array([spec.dim_side(k) for k in range(spec.k_eta)], dtype=np.int64)
    dim_single = np.array([d.item_count == 1 for d in spec.dims])
    sigma_free = np.array([d.scale == "free" for d in spec.dims])
    pairs = linalg.pair_indices(spec.k_eta)
    pr = np.array([p[0] for p in pairs], dtype=np.int64)
    pc = np.array([p[1] for p in pairs], dtype=np.int64)
    return tau, lam, item_ptr, dim_side, dim_single, sigma_free, pr, pc


def _chain_worker(payload):
    (chain_id, Y, Xm, Xc, Xg, T, tau, lam, item_ptr, dim_side, dim_single,
     sigma_free, pr, pc, obs_one, priors, config) = payload
    K = item_ptr.shape[0] - 1
    Qm, Qg, q, L = Xm.shape[1], Xg.shape[1], Xc.shape[1], pr.shape[0]
    nret = config.retained_per_chain
    draws = np.empty((nret, Qm * K + K + L * q + 3 * Qg))
    cell_out = np.empty(Y.shape[0], dtype=np.int64)
    acc_alpha = np.zeros((L, q), dtype=np.int64)
    prop_alpha = np.zeros((L, q), dtype=np.int64)
    acc_sigma = np.zeros(K, dtype=np.int64)
    prop_sigma = np.zeros(K, dtype=np.int64)
    c_out = np.empty(1)
    status, bad = ker.run_chain_kernel(
        Y, Xm, Xc, Xg, T, tau, lam, item_ptr, dim_side, dim_single, sigma_free,
        pr, pc, obs_one, priors.sigma2_gamma, priors.sigma2_beta,
        priors.ig_a0, priors.ig_b0, config.iterations, config.burn_in,
        config.thin, config.rw_constant_C, config.tune_every,
        config.rebase_every, config.drift_tol,
        np.uint64(config.seed), chain_id,
        draws, cell_out, acc_alpha, prop_alpha, acc_sigma, prop_sigma, c_out)
    if status != ker.OK:
        raise EngineError(
            f"chain {chain_id}: {_STATUS_MSG[status]}"
            + (f" (unit {bad})" if bad >= 0 else ""))
    return draws, acc_alpha, prop_alpha, acc_sigma, prop_sigma, float(c_out[0])


def worker_count() -> int:
    val = int(os.environ.get("CORRGRESS_WORKERS", "0"))
    return os.cpu_count() or 1 if val <= 0 else val


def run_chain(spec: ModelSpec, phi: MeasurementParams, data: Dataset,
              test_set: TestSet, priors: PriorConfig, config: SamplerConfig,
              covariate_names: tuple[str, ...] | None = None) -> DrawStore:
    """Run the full two-block sampler; deterministic given config.seed."""
    phi.validate(spec)
    tau, lam, item_ptr, dim_side, dim_single, sigma_free, pr, pc = \
        _flat_arrays(spec, phi, data)
    Y = np.ascontiguousarray(data.items)
    Xm = np.ascontiguousarray(data.X[:, list(spec.mean_covariates)])
    Xc = np.ascontiguousarray(data.X[:, list(spec.corr_covariates)])
    Xg = np.ascontiguousarray(data.X[:, list(spec.class_covariates)])
    T = np.ascontiguousarray(test_set.points)
    obs_one = data.side_nonzero(spec)

    payloads = [(c, Y, Xm, Xc, Xg, T, tau, lam, item_ptr, dim_side, dim_single,
                 sigma_free, pr, pc, obs_one, priors, config)
                for c in range(config.chains)]
    t0 = time.time()
    nworkers = min(worker_count(), config.chains)
    if nworkers > 1:
        with ProcessPoolExecutor(max_workers=nworkers) as pool:
            results = list(pool.map(_chain_worker, payloads))
    else:
        results = [_chain_worker(p) for p in payloads]
    wall = time.time() - t0

    nret = config.retained_per_chain
    draws = np.vstack([r[0] for r in results])
    chain_id = np.repeat(np.arange(config.chains), nret)
    iteration = np.tile(config.burn_in + config.thin * np.arange(nret),
                        config.chains)
    cols = draw_columns(spec, covariate_names)
    acc = {
        "alpha_accept_rate": [
            (r[1] / np.maximum(r[2], 1)).tolist() for r in results],
        "sigma_accept_rate": [
            (r[3] / np.maximum(r[4], 1)).tolist() for r in results],
        "tuned_C": [r[5] for r in results],
    }
    meta = {
        "seed": config.seed, "chains": config.chains,
        "iterations": config.iterations, "burn_in": config.burn_in,
        "thin": config.thin, "wall_time_s": wall,
        "workers": nworkers,
    }
    return DrawStore(columns=cols, draws=draws, chain_id=chain_id,
                     iteration=iteration, acceptance=acc, meta=meta)


def run_alpha_only(e: np.ndarray, dim: int, Xc: np.ndarray,
                   test_points: np.ndarray, config: SamplerConfig,
                   tune: bool = True, use_dense: bool = False) -> DrawStore:
    """Correlation-coefficient-only chain on fixed standardized residuals.

    e may have zero rows, in which case the target is the uniform prior over
    the feasible region.
    """
    from . import linalg

    e = np.ascontiguousarray(np.asarray(e, dtype=float).reshape(-1, dim))
    Xc = np.ascontiguousarray(np.asarray(Xc, dtype=float))
    T = np.ascontiguousarray(np.asarray(test_points, dtype=float))
    pairs = linalg.pair_indices(dim)
    pr = np.array([p[0] for p in pairs], dtype=np.int64)
    pc = np.array([p[1] for p in pairs], dtype=np.int64)
    L, q = len(pairs), Xc.shape[1]
    nret = config.retained_per_chain
    all_draws, accs, props, cs = [], [], [], []
    for c in range(config.chains):
        draws = np.empty((nret, L * q))
        acc_alpha = np.zeros((L, q), dtype=np.int64)
        prop_alpha = np.zeros((L, q), dtype=np.int64)
        c_out = np.empty(1)
        status = ker.run_alpha_only_kernel(
            e, dim, Xc, T, pr, pc, config.iterations, config.burn_in,
            config.thin, config.rw_constant_C, config.tune_every, tune,
            config.rebase_every, config.drift_tol, np.uint64(config.seed),
            c, use_dense, draws, acc_alpha, prop_alpha, c_out)
        if status != ker.OK:
            raise EngineError(f"chain {c}: {_STATUS_MSG[status]}")
        all_draws.append(draws)
        accs.append(acc_alpha)
        props.append(prop_alpha)
        cs.append(float(c_out[0]))
    cols = tuple(f"alpha.{r}:{cc}.x{m}" for r, cc in pairs for m in range(q))
    return DrawStore(
        columns=cols, draws=np.vstack(all_draws),
        chain_id=np.repeat(np.arange(config.chains), nret),
        iteration=np.tile(config.burn_in + config.thin * np.arange(nret),
                          config.chains),
        acceptance={
            "alpha_accept_rate": [(a / np.maximum(p, 1)).tolist()
                                  for a, p in zip(accs, props)],
            "tuned_C": cs,
        },
        meta={"seed": config.seed, "chains": config.chains},
    )
