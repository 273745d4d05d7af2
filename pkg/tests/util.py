"""Shared builders for the test suite."""

import numpy as np

from corrgress.model import (ClassSide, LatentDim, MeasurementParams,
                             ModelSpec, StructuralParams)


def two_sided_spec(gp_items=4, rp_items=3, n_cov=2):
    return ModelSpec(
        dims=(LatentDim("gp", gp_items), LatentDim("gf", 1, "fixed"),
              LatentDim("rp", rp_items), LatentDim("rf", 1, "fixed")),
        class_sides=(ClassSide("g", ("gp", "gf")), ClassSide("r", ("rp", "rf"))),
        mean_covariates=tuple(range(n_cov)),
        corr_covariates=tuple(range(n_cov)),
        class_covariates=tuple(range(n_cov)),
    )


def default_phi(spec, seed=0):
    rng = np.random.default_rng(seed)
    tau, lam = {}, {}
    for d in spec.dims:
        if d.item_count > 1:
            tau[d.name] = np.concatenate([[0.0], rng.uniform(-0.6, 0.6, d.item_count - 1)])
            lam[d.name] = np.concatenate([[1.0], rng.uniform(0.7, 1.5, d.item_count - 1)])
    return MeasurementParams(tau=tau, lam=lam)


def default_params(spec, seed=1, corr_scale=0.15):
    rng = np.random.default_rng(seed)
    q = len(spec.corr_covariates)
    sigma = np.array([1.0 if d.scale == "fixed" else rng.uniform(0.8, 1.3)
                      for d in spec.dims])
    alpha = corr_scale * rng.uniform(-1, 1, (spec.n_pairs, q))
    alpha[:, 0] = np.abs(alpha[:, 0]) + 0.05
    return StructuralParams(
        beta=rng.uniform(-0.3, 0.3, (len(spec.mean_covariates), spec.k_eta)),
        sigma=sigma, alpha=alpha,
        gamma=rng.uniform(-0.4, 0.8, (3, len(spec.class_covariates))),
    )


def covariates(n, n_cov=2, seed=2):
    rng = np.random.default_rng(seed)
    cols = [np.ones(n)]
    if n_cov >= 2:
        cols.append(rng.uniform(-1, 1, n))
    if n_cov >= 3:
        cols.append(rng.integers(0, 2, n).astype(float))
    for _ in range(n_cov - 3):
        cols.append(rng.standard_normal(n))
    return np.column_stack(cols)
