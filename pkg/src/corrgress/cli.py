"""Command-line surface: simulate, fit-measurement, fit, summarize, check-feasible.

Exit codes: 0 success, 2 validation/configuration error, 3 runtime error.
All configs are JSON; items travel in CSV with an explicit NA token for
missing values; covariates must be complete.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import feasibility, linalg
from .diagnostics import convergence, fitted_class_probs, fitted_correlations, \
    summarize, text_table
from .engine import DrawStore, PriorConfig, SamplerConfig, run_chain
from .measurement import Step1Params, fit_measurement
from .model import ClassSide, Dataset, LatentDim, MeasurementParams, ModelSpec, \
    StructuralParams, simulate_dataset

NA = "NA"


class ValidationError(Exception):
    pass


# ---------------------------------------------------------------------------
# JSON codecs
# ---------------------------------------------------------------------------

def spec_from_json(doc: dict) -> ModelSpec:
    try:
        dims = tuple(LatentDim(d["name"], int(d["items"]),
                               d.get("scale", "free" if int(d["items"]) > 1 else "fixed"))
                     for d in doc["dims"])
        sides = tuple(ClassSide(s["name"], tuple(s["dims"]))
                      for s in doc["class_sides"])
        return ModelSpec(
            dims=dims, class_sides=sides,
            mean_covariates=tuple(doc["mean_covariates"]),
            corr_covariates=tuple(doc["corr_covariates"]),
            class_covariates=tuple(doc["class_covariates"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad model spec: {exc}") from exc


def phi_from_json(doc: dict, spec: ModelSpec) -> MeasurementParams:
    try:
        phi = MeasurementParams(
            tau={k: np.asarray(v, dtype=float) for k, v in doc["tau"].items()},
            lam={k: np.asarray(v, dtype=float) for k, v in doc["lam"].items()},
        )
        phi.validate(spec)
        return phi
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad measurement params: {exc}") from exc


def phi_to_json(phi: MeasurementParams) -> dict:
    return {"tau": {k: v.tolist() for k, v in phi.tau.items()},
            "lam": {k: v.tolist() for k, v in phi.lam.items()}}


def params_from_json(doc: dict, spec: ModelSpec) -> StructuralParams:
    try:
        p = StructuralParams(
            beta=np.asarray(doc["beta"], dtype=float),
            sigma=np.asarray(doc["sigma"], dtype=float),
            alpha=np.asarray(doc["alpha"], dtype=float),
            gamma=np.asarray(doc["gamma"], dtype=float),
        )
        p.validate(spec)
        return p
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad structural params: {exc}") from exc


# ---------------------------------------------------------------------------
# Dataset IO
# ---------------------------------------------------------------------------

def item_names(spec: ModelSpec) -> list[str]:
    return [f"{d.name}_{j+1}" for d in spec.dims for j in range(d.item_count)]


def write_dataset(path, spec: ModelSpec, data: Dataset,
                  covariate_names: list[str]) -> None:
    names = item_names(spec)
    with open(path, "w") as fh:
        fh.write(",".join(names + covariate_names) + "\n")
        for i in range(data.n):
            row = [NA if v < 0 else str(int(v)) for v in data.items[i]]
            row += [repr(float(v)) for v in data.X[i]]
            fh.write(",".join(row) + "\n")


def read_dataset(csv_path, spec: ModelSpec) -> tuple[Dataset, list[str]]:
    """Parse a header CSV into items (0/1/NA) and complete numeric covariates.

    Item columns are identified by the spec's `<dim>_<j>` naming; every other
    column is a covariate, kept in file order.
    """
    expected = item_names(spec)
    with open(csv_path) as fh:
        header = [h.strip() for h in fh.readline().strip().split(",")]
        missing = [c for c in expected if c not in header]
        if missing:
            raise ValidationError(f"data file lacks item columns: {missing}")
        item_pos = [header.index(c) for c in expected]
        cov_pos = [j for j in range(len(header)) if j not in set(item_pos)]
        cov_names = [header[j] for j in cov_pos]
        items, X = [], []
        for rownum, line in enumerate(fh, start=2):
            parts = [p.strip() for p in line.strip().split(",")]
            if len(parts) != len(header):
                raise ValidationError(f"row {rownum}: expected {len(header)} fields")
            irow = []
            for j, name in zip(item_pos, expected):
                v = parts[j]
                if v == NA:
                    irow.append(-1)
                elif v in ("0", "1"):
                    irow.append(int(v))
                else:
                    raise ValidationError(
                        f"row {rownum}, column {name!r}: non-binary item value {v!r}")
            xrow = []
            for j in cov_pos:
                v = parts[j]
                if v == NA or v == "":
                    raise ValidationError(
                        f"row {rownum}, column {header[j]!r}: missing covariate value")
                try:
                    xrow.append(float(v))
                except ValueError:
                    raise ValidationError(
                        f"row {rownum}, column {header[j]!r}: non-numeric value {v!r}")
            items.append(irow)
            X.append(xrow)
    data = Dataset(items=np.array(items, dtype=np.int8), X=np.array(X),
                   item_names=tuple(expected), covariate_names=tuple(cov_names))
    width = data.X.shape[1]
    for field in ("mean_covariates", "corr_covariates", "class_covariates"):
        idx = getattr(spec, field)
        if idx and max(idx) >= width:
            raise ValidationError(
                f"{field} index {max(idx)} out of range for {width} covariates")
    return data, cov_names


def _out_path(outdir, name, force):
    path = os.path.join(outdir, name)
    if os.path.exists(path) and not force:
        raise ValidationError(f"{path} exists; pass --force to overwrite")
    return path


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc


def _build_test_set(cfg: dict, spec: ModelSpec, data: Dataset) -> feasibility.TestSet:
    strategy = cfg.get("test_set_strategy", "observed-distinct")
    bounds = cfg.get("test_set_bounds")
    if bounds is not None:
        bounds = [tuple(b) for b in bounds]
    Z = data.X[:, list(spec.corr_covariates)]
    expansion = feasibility.CovariateExpansion.identity(Z.shape[1])
    return feasibility.build_test_set(expansion, Z, strategy, bounds)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    cfg = _load_json(args.config)
    spec = spec_from_json(cfg["model"])
    phi = phi_from_json(cfg["measurement"], spec)
    params = params_from_json(cfg["structural"], spec)
    n = int(cfg["n"])
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    rng = np.random.default_rng(seed)
    cols, names = [], []
    for cov in cfg["covariates"]:
        kind = cov["kind"]
        names.append(cov["name"])
        if kind == "intercept":
            cols.append(np.ones(n))
        elif kind == "binary":
            cols.append(rng.integers(0, 2, n).astype(float))
        elif kind == "uniform":
            cols.append(rng.uniform(cov.get("low", -1), cov.get("high", 1), n))
        elif kind == "normal":
            cols.append(cov.get("mean", 0) + cov.get("sd", 1) * rng.standard_normal(n))
        else:
            raise ValidationError(f"unknown covariate kind {kind!r}")
    X = np.column_stack(cols)
    data, latents = simulate_dataset(spec, phi, params, X, seed=seed)
    os.makedirs(args.out, exist_ok=True)
    data_path = _out_path(args.out, "data.csv", args.force)
    truth_path = _out_path(args.out, "truth.json", args.force)
    write_dataset(data_path, spec, data, names)
    with open(truth_path, "w") as fh:
        json.dump({"seed": seed, "measurement": phi_to_json(phi),
                   "structural": {"beta": params.beta.tolist(),
                                  "sigma": params.sigma.tolist(),
                                  "alpha": params.alpha.tolist(),
                                  "gamma": params.gamma.tolist()},
                   "xi_marginals": latents.xi.mean(axis=0).tolist()}, fh, indent=2)
    print(f"wrote {data_path} ({data.n} rows) and {truth_path}")
    return 0


def _cmd_fit_measurement(args) -> int:
    cfg = _load_json(args.config)
    spec = spec_from_json(cfg["model"])
    data, _ = read_dataset(cfg["data_path"], spec)
    slices = spec.item_slices()
    quad_nodes = int(cfg.get("quad_nodes", 16))
    out = {"tau": {}, "lam": {}, "nuisance": {}, "convergence": {}}
    for side in spec.class_sides:
        multi = [d for d in side.dims if spec.dims[spec.dim_index(d)].item_count > 1]
        single = [d for d in side.dims if spec.dims[spec.dim_index(d)].item_count == 1]
        if len(multi) != 1 or len(single) != 1:
            raise ValidationError(
                f"side {side.name!r}: step-1 fitting needs exactly one "
                "multi-item and one single-item dimension per side")
        y = np.column_stack([data.items[:, slices[multi[0]]],
                             data.items[:, slices[single[0]]]])
        est, rep = fit_measurement(y, quad_nodes=quad_nodes)
        out["tau"][multi[0]] = est.tau.tolist()
        out["lam"][multi[0]] = est.lam.tolist()
        out["nuisance"][side.name] = {
            "pi_side": est.pi_side, "mu_p": est.mu_p, "mu_f": est.mu_f,
            "sigma2_p": est.sigma2_p, "rho_side": est.rho_side,
            "note": "two-step estimation discards these; kept for reference"}
        out["convergence"][side.name] = {
            "converged": rep.converged, "loglik": rep.loglik,
            "grad_inf_norm": rep.grad_inf_norm, "n_iter": rep.n_iter}
        if not rep.converged:
            print(f"warning: side {side.name!r} did not converge "
                  f"(grad {rep.grad_inf_norm:.2e})", file=sys.stderr)
    os.makedirs(args.out, exist_ok=True)
    path = _out_path(args.out, "measurement.json", args.force)
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2)
    print(f"wrote {path}")
    return 0


def _cmd_fit(args) -> int:
    cfg = _load_json(args.config)
    spec = spec_from_json(cfg["model"])
    data, cov_names = read_dataset(cfg["data_path"], spec)
    phi_path = cfg.get("measurement_path")
    if phi_path is None:
        raise ValidationError(
            "fit requires measurement_path (run fit-measurement first)")
    phi = phi_from_json(_load_json(phi_path), spec)
    test_set = _build_test_set(cfg, spec, data)
    priors = PriorConfig(**cfg.get("priors", {}))
    sc = dict(cfg.get("sampler", {}))
    for key, flag in (("seed", args.seed), ("chains", args.chains),
                      ("iterations", args.iterations), ("burn_in", args.burn_in),
                      ("thin", args.thin)):
        if flag is not None:
            sc[key] = flag
    config = SamplerConfig(**sc)
    os.makedirs(args.out, exist_ok=True)
    draws_path = _out_path(args.out, "draws.csv", args.force)
    meta_path = _out_path(args.out, "meta.json", args.force)
    ts_path = _out_path(args.out, "test_set.csv", args.force)
    t0 = time.time()
    store = run_chain(spec, phi, data, test_set, priors, config,
                      covariate_names=tuple(cov_names))
    store.meta["total_wall_time_s"] = time.time() - t0
    from . import __version__
    store.meta["version"] = __version__
    store.to_csv(draws_path)
    store.write_meta(meta_path)
    test_set.to_csv(ts_path)
    print(f"wrote {draws_path} ({store.n_rows} rows), {meta_path}, {ts_path}")
    return 0


def _cmd_summarize(args) -> int:
    cfg = _load_json(args.config) if args.config else {}
    draws_path = cfg.get("draws_path") or args.draws
    if draws_path is None:
        raise ValidationError("need --draws or draws_path in the config")
    store = DrawStore.from_csv(draws_path)
    summary = summarize(store)
    os.makedirs(args.out, exist_ok=True)
    sj = _out_path(args.out, "summary.json", args.force)
    st = _out_path(args.out, "summary.txt", args.force)
    cj = _out_path(args.out, "convergence.json", args.force)
    with open(sj, "w") as fh:
        json.dump({k: v.as_dict() for k, v in summary.items()}, fh, indent=2)
    with open(st, "w") as fh:
        fh.write(text_table(summary) + "\n")
    conv = convergence(store)
    with open(cj, "w") as fh:
        json.dump(conv, fh, indent=2)
    worst = max(conv.values(), key=lambda d: d["rhat"])
    print(f"wrote {sj}, {st}, {cj} (max R-hat {worst['rhat']:.3f})")
    return 0


def _cmd_check_feasible(args) -> int:
    cfg = _load_json(args.config)
    alpha = np.asarray(cfg["alpha"], dtype=float)
    if "test_set_path" in cfg:
        test_set = feasibility.TestSet.from_csv(cfg["test_set_path"])
    else:
        spec = spec_from_json(cfg["model"])
        data, _ = read_dataset(cfg["data_path"], spec)
        test_set = _build_test_set(cfg, spec, data)
    L, q = alpha.shape
    dim = linalg.matrix_dim(L)
    if test_set.points.shape[1] != q:
        raise ValidationError(
            f"alpha has {q} columns but test points have {test_set.points.shape[1]}")
    bad = []
    for j, point in enumerate(test_set.points):
        R = linalg.assemble_matrix(alpha @ point, dim)
        if not linalg.is_positive_definite(R):
            bad.append(j)
    if bad:
        print(f"alpha infeasible at {len(bad)} of {len(test_set.points)} "
              f"test points: rows {bad}")
        return 2
    print(f"alpha feasible at all {len(test_set.points)} test points")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="corrgress",
                                description="Covariate-dependent latent "
                                            "correlation models")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required)
        sp.add_argument("--out", default=".")
        sp.add_argument("--force", action="store_true")
        sp.add_argument("--seed", type=int)

    sp = sub.add_parser("simulate", help="simulate a dataset from a scenario config")
    common(sp)
    sp = sub.add_parser("fit-measurement", help="step-1 marginal ML per side")
    common(sp)
    sp = sub.add_parser("fit", help="run the MCMC sampler")
    common(sp)
    sp.add_argument("--chains", type=int)
    sp.add_argument("--iterations", type=int)
    sp.add_argument("--burn-in", dest="burn_in", type=int)
    sp.add_argument("--thin", type=int)
    sp = sub.add_parser("summarize", help="posterior summary and convergence")
    common(sp, config_required=False)
    sp.add_argument("--draws")
    sp = sub.add_parser("check-feasible", help="validate alpha against a test set")
    common(sp)
    return p


_HANDLERS = {
    "simulate": _cmd_simulate,
    "fit-measurement": _cmd_fit_measurement,
    "fit": _cmd_fit,
    "summarize": _cmd_summarize,
    "check-feasible": _cmd_check_feasible,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return _HANDLERS[args.command](args)
    except (ValidationError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
