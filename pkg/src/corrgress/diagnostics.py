"""Posterior summaries, convergence statistics, and fitted-quantity tables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .engine import DrawStore
from .model import class_probs

QUANTILES = (2.5, 5.0, 25.0, 50.0, 75.0, 95.0, 97.5)


@dataclass(frozen=True)
class ParameterSummary:
    mean: float
    sd: float
    quantiles: dict[float, float]
    star: int  # 0, 90, 95 or 99

    def as_dict(self) -> dict:
        return {"mean": self.mean, "sd": self.sd,
                "quantiles": {str(q): v for q, v in self.quantiles.items()},
                "star": self.star}


def _star_flag(x: np.ndarray) -> int:
    """Largest level in {90, 95, 99} whose equal-tailed interval excludes 0."""
    star = 0
    for level in (90, 95, 99):
        half = (100 - level) / 200
        lo, hi = np.quantile(x, [half, 1 - half])
        if lo > 0 or hi < 0:
            star = level
        else:
            break
    return star


def summarize(store: DrawStore) -> dict[str, ParameterSummary]:
    if store.n_rows == 0:
        raise ValueError("empty draw store")
    if store.n_rows < 100:
        raise ValueError("need at least 100 retained draws to summarize")
    out = {}
    for j, name in enumerate(store.columns):
        x = store.draws[:, j]
        out[name] = ParameterSummary(
            mean=float(x.mean()), sd=float(x.std(ddof=1)),
            quantiles={q: float(np.quantile(x, q / 100)) for q in QUANTILES},
            star=_star_flag(x),
        )
    return out


def _rank_normalize(chains: np.ndarray) -> np.ndarray:
    """Fractional ranks through the normal quantile function (pooled)."""
    flat = chains.ravel()
    ranks = np.argsort(np.argsort(flat)) + 1.0
    z = ndtri((ranks - 0.375) / (flat.size + 0.25))
    return z.reshape(chains.shape)


def _split(chains: np.ndarray) -> np.ndarray:
    m, n = chains.shape
    half = n // 2
    return np.vstack([chains[:, :half], chains[:, half:2 * half]])


def _rhat(chains: np.ndarray) -> float:
    m, n = chains.shape
    means = chains.mean(axis=1)
    vars_ = chains.var(axis=1, ddof=1)
    W = vars_.mean()
    B = n * means.var(ddof=1)
    if W <= 0:
        return 1.0
    var_plus = (n - 1) / n * W + B / n
    return float(np.sqrt(var_plus / W))


def _ess(chains: np.ndarray) -> float:
    """Effective sample size with Geyer's initial monotone sequence."""
    m, n = chains.shape
    W = chains.var(axis=1, ddof=1).mean()
    if W <= 0:
        return float(m * n)
    B = n * chains.mean(axis=1).var(ddof=1) if m > 1 else 0.0
    var_plus = (n - 1) / n * W + B / n
    # per-chain autocovariances via FFT
    acov = np.empty((m, n))
    for c in range(m):
        x = chains[c] - chains[c].mean()
        size = 2 ** int(np.ceil(np.log2(2 * n)))
        f = np.fft.rfft(x, size)
        ac = np.fft.irfft(f * np.conj(f), size)[:n].real / n
        acov[c] = ac
    rho = 1.0 - (W - acov.mean(axis=0)) / var_plus
    # paired sums, truncated at the first negative, forced non-increasing
    tmax = (n - 1) // 2
    psum = np.array([rho[2 * t] + rho[2 * t + 1] for t in range(tmax)])
    total = 0.0
    prev = np.inf
    for p in psum:
        if p < 0:
            break
        p = min(p, prev)
        prev = p
        total += p
    tau = max(-1.0 + 2.0 * total, 1.0 / (m * n))
    return float(m * n / tau)


def convergence(store: DrawStore) -> dict[str, dict[str, float]]:
    """Rank-normalized split R-hat and ESS per parameter."""
    groups = store.by_chain()
    nmin = min(g.shape[0] for g in groups)
    if nmin // 2 < 4:
        raise ValueError("need at least 4 draws per split half")
    out = {}
    for j, name in enumerate(store.columns):
        chains = np.vstack([g[:nmin, j] for g in groups])
        sp = _split(chains)
        if np.allclose(sp, sp.flat[0]):
            out[name] = {"rhat": 1.0, "ess": float(sp.size)}
            continue
        z = _rank_normalize(sp)
        # rank normalization is robust to heavy tails but saturates when
        # chains are disjoint; the raw-scale statistic keeps that signal
        out[name] = {"rhat": max(_rhat(z), _rhat(sp)), "ess": _ess(sp)}
    return out


def _profile_means(X: np.ndarray, cov_idx: tuple[int, ...], profile: dict,
                   names: tuple[str, ...] | None) -> np.ndarray:
    """Covariate rows restricted to the model's columns, with overrides."""
    Xs = X[:, list(cov_idx)].copy()
    for key, val in profile.items():
        if isinstance(key, str):
            if names is None or key not in names:
                raise KeyError(f"unknown covariate {key!r}")
            full_idx = names.index(key)
        else:
            full_idx = key
        if full_idx not in cov_idx:
            raise KeyError(f"covariate {key!r} not used by this model block")
        Xs[:, cov_idx.index(full_idx)] = val
    return Xs


def fitted_correlations(store: DrawStore, spec, X: np.ndarray,
                        profiles: dict[str, dict],
                        covariate_names: tuple[str, ...] | None = None) -> dict:
    """Mean fitted correlation per pair, averaged over draws and units.

    Each profile fixes a subset of covariates; {} means "overall".
    """
    q = len(spec.corr_covariates)
    pair_names = spec.pair_names
    base = len(spec.mean_covariates) * spec.k_eta + spec.k_eta
    out = {}
    for pname, profile in profiles.items():
        Xs = _profile_means(X, spec.corr_covariates, profile, covariate_names)
        xbar = Xs.mean(axis=0)
        table = {}
        for l, pair in enumerate(pair_names):
            cols = store.draws[:, base + l * q: base + (l + 1) * q]
            vals = cols @ xbar
            table[pair] = float(vals.mean())
        out[pname] = table
    return out


def fitted_class_probs(store: DrawStore, spec, X: np.ndarray,
                       profiles: dict[str, dict],
                       covariate_names: tuple[str, ...] | None = None,
                       max_draws: int = 500) -> dict:
    """Averaged class-cell probabilities plus marginals and the odds ratio."""
    qg = len(spec.class_covariates)
    base = (len(spec.mean_covariates) * spec.k_eta + spec.k_eta
            + spec.n_pairs * len(spec.corr_covariates))
    gammas = store.draws[:, base: base + 3 * qg].reshape(-1, 3, qg)
    if gammas.shape[0] > max_draws:
        idx = np.linspace(0, gammas.shape[0] - 1, max_draws).astype(int)
        gammas = gammas[idx]
    out = {}
    for pname, profile in profiles.items():
        Xs = _profile_means(X, spec.class_covariates, profile, covariate_names)
        cells = np.zeros(4)
        for g in gammas:
            cells += class_probs(g, Xs).mean(axis=0)
        cells /= gammas.shape[0]
        p00, p01, p10, p11 = cells
        out[pname] = {
            "cell_00": float(p00), "cell_01": float(p01),
            "cell_10": float(p10), "cell_11": float(p11),
            "p_side0": float(p10 + p11), "p_side1": float(p01 + p11),
            "odds_ratio": float((p00 * p11) / (p01 * p10)),
        }
    return out


def text_table(summary: dict[str, ParameterSummary]) -> str:
    """Aligned plain-text rendering of a posterior summary."""
    stars = {0: "", 90: "*", 95: "**", 99: "***"}
    lines = [f"{'parameter':<28} {'mean':>9} {'sd':>9} {'2.5%':>9} "
             f"{'50%':>9} {'97.5%':>9}  sig"]
    for name, s in summary.items():
        lines.append(
            f"{name:<28} {s.mean:>9.4f} {s.sd:>9.4f} "
            f"{s.quantiles[2.5]:>9.4f} {s.quantiles[50.0]:>9.4f} "
            f"{s.quantiles[97.5]:>9.4f}  {stars[s.star]}")
    return "\n".join(lines)
