import numpy as np
import pytest
from scipy.stats import multivariate_normal, norm

from corrgress import linalg
from corrgress.model import (CELLS, ClassSide, Dataset, LatentDim,
                             MeasurementParams, ModelSpec, StructuralParams,
                             bvn_upper, class_probs, dataset_loglik, item_prob,
                             simulate_dataset, structural_moments, unit_loglik)
from util import covariates, default_params, default_phi, two_sided_spec


@pytest.fixture(scope="module")
def spec():
    return two_sided_spec(4, 3, 2)


@pytest.fixture(scope="module")
def phi(spec):
    return default_phi(spec)


@pytest.fixture(scope="module")
def params(spec):
    return default_params(spec)


def test_item_prob_values():
    assert item_prob(0.0, 1.0, 0.0) == pytest.approx(0.5)
    assert item_prob(1.02, 2.38, 0.0) == pytest.approx(0.8461, abs=5e-5)
    etas = np.linspace(-3, 3, 50)
    p = item_prob(0.3, 1.5, etas)
    assert np.all(np.diff(p) > 0)
    assert np.allclose(p, norm.cdf(0.3 + 1.5 * etas), atol=1e-12)


def test_class_probs_reference_cell():
    x = np.array([1.0, 0.5])
    assert np.allclose(class_probs(np.zeros((3, 2)), x), 0.25)

    gamma = np.zeros((3, 2))
    gamma[0, 0] = np.log(2.0)  # cell (0,1) predictor = log 2
    p = class_probs(gamma, np.array([1.0, 0.0]))
    assert np.allclose(p, [0.2, 0.4, 0.2, 0.2])
    assert CELLS == ((0, 0), (0, 1), (1, 0), (1, 1))


def test_class_probs_overflow_guard():
    gamma = np.zeros((3, 1))
    gamma[0, 0] = 50.0
    p = class_probs(gamma, np.array([1.0]))
    assert np.isfinite(p).all() and p.sum() == pytest.approx(1.0)
    assert p[1] > 1 - 1e-12

    gamma[0, 0] = 700.0
    assert np.isfinite(class_probs(gamma, np.array([1.0]))).all()


def test_class_probs_gradient_matches_fd():
    rng = np.random.default_rng(0)
    gamma = rng.normal(size=(3, 2))
    x = np.array([1.0, -0.7])
    p = class_probs(gamma, x)
    h = 1e-6
    for r in range(3):
        for c in range(2):
            gp, gm = gamma.copy(), gamma.copy()
            gp[r, c] += h
            gm[r, c] -= h
            fd = (np.log(class_probs(gp, x)) - np.log(class_probs(gm, x))) / (2 * h)
            # analytic: d log pi_k / d gamma_rc = (1{k = cell r+1} - pi_{r+1}) x_c
            ind = np.zeros(4)
            ind[r + 1] = 1.0
            assert np.allclose(fd, (ind - p[r + 1]) * x[c], atol=1e-6)


def test_structural_moments(spec):
    q = 2
    params = StructuralParams(
        beta=np.zeros((q, 4)),
        sigma=np.array([2.0, 1.0, 1.5, 1.0]),
        alpha=np.array([[0.5, 0], [0, 0], [0, 0], [0, 0], [0, 0], [0, 0]], dtype=float),
        gamma=np.zeros((3, q)),
    )
    mu, Sigma = structural_moments(params, spec, np.array([1.0, 0.3]))
    assert np.allclose(mu, 0.0)
    assert Sigma[1, 0] == pytest.approx(2.0 * 0.5 * 1.0)  # S R S expansion
    assert np.allclose(np.diag(Sigma), params.sigma ** 2)
    assert np.all(np.linalg.eigvalsh(Sigma) > 0)


def test_structural_moments_rejects_infeasible(spec):
    params = StructuralParams(
        beta=np.zeros((2, 4)), sigma=np.ones(4),
        alpha=np.array([[0.9, 0], [0.9, 0], [0, 0], [-0.9, 0], [0, 0], [0, 0]],
                       dtype=float),
        gamma=np.zeros((3, 2)))
    with pytest.raises(linalg.NotPositiveDefiniteError):
        structural_moments(params, spec, np.array([1.0, 0.0]))


def test_simulate_deterministic(spec, phi, params):
    X = covariates(200, 2)
    d1, s1 = simulate_dataset(spec, phi, params, X, seed=5)
    d2, s2 = simulate_dataset(spec, phi, params, X, seed=5)
    assert np.array_equal(d1.items, d2.items)
    assert np.array_equal(s1.eta, s2.eta)
    d3, _ = simulate_dataset(spec, phi, params, X, seed=6)
    assert not np.array_equal(d1.items, d3.items)


def test_simulate_zero_class_forces_zero_items(spec, phi, params):
    gamma = np.full((3, 2), 0.0)
    gamma[:, 0] = -40.0  # cell (0,0) gets all the mass
    forced = StructuralParams(beta=params.beta, sigma=params.sigma,
                              alpha=params.alpha, gamma=gamma)
    data, state = simulate_dataset(spec, phi, forced, covariates(500, 2), seed=2)
    assert np.all(state.xi == 0)
    assert np.all(data.items == 0)


def test_simulate_gating_invariant(spec, phi, params):
    data, state = simulate_dataset(spec, phi, params, covariates(2000, 2), seed=3)
    nz = data.side_nonzero(spec)
    # any observed 1 on a side forces that side's class indicator
    assert np.all(state.xi[nz[:, 0] == 1, 0] == 1)
    assert np.all(state.xi[nz[:, 1] == 1, 1] == 1)


def test_simulate_item_marginal_half(spec):
    # lambda = 0, tau = 0 items are fair coins whenever the side is on
    phi0 = MeasurementParams(
        tau={"gp": np.zeros(4), "rp": np.zeros(3)},
        lam={"gp": np.concatenate([[1.0], np.zeros(3)]),
             "rp": np.concatenate([[1.0], np.zeros(2)])})
    gamma = np.zeros((3, 2))
    gamma[2, 0] = 40.0  # everyone in cell (1,1)
    params = StructuralParams(beta=np.zeros((2, 4)), sigma=np.ones(4),
                              alpha=np.zeros((6, 2)), gamma=gamma)
    data, _ = simulate_dataset(spec, phi0, params, covariates(10_000, 2), seed=9)
    for col in (1, 2, 3):  # free gp items
        assert abs(data.items[:, col].mean() - 0.5) < 0.02


def test_simulate_single_item_probit_identity(spec, phi):
    beta = np.zeros((2, 4))
    beta[0, 1] = 0.7  # mean of the first single-item dim
    gamma = np.zeros((3, 2))
    gamma[2, 0] = 40.0
    params = StructuralParams(beta=beta, sigma=np.ones(4),
                              alpha=np.zeros((6, 2)), gamma=gamma)
    data, state = simulate_dataset(spec, phi, params, covariates(10_000, 2), seed=4)
    col = spec.item_slices()["gf"].start
    assert abs(data.items[:, col].mean() - norm.cdf(0.7)) < 0.02
    assert np.array_equal(data.items[:, col], (state.eta[:, 1] > 0).astype(np.int8))


def test_unit_loglik_certain_zero(spec, phi, params):
    gamma = np.zeros((3, 2))
    gamma[:, 0] = -800.0  # exp underflows to exactly zero mass off cell (0,0)
    p = StructuralParams(beta=params.beta, sigma=params.sigma,
                         alpha=params.alpha, gamma=gamma)
    y0 = np.zeros(spec.total_items, dtype=np.int8)
    x = np.array([1.0, 0.2])
    assert unit_loglik(spec, phi, p, y0, x, quad_nodes=8) == pytest.approx(0.0, abs=1e-10)

    y1 = y0.copy()
    y1[0] = 1  # a giving response with zero giving-class mass
    assert unit_loglik(spec, phi, p, y1, x, quad_nodes=8) == -np.inf


def test_unit_loglik_matches_monte_carlo(spec, phi, params):
    rng = np.random.default_rng(0)
    x = np.array([1.0, -0.4])
    mu, Sigma = structural_moments(params, spec, x)
    pis = class_probs(params.gamma, x)
    taus, lams = phi.flat(spec)
    n_mc = 400_000
    eta = rng.multivariate_normal(mu, Sigma, size=n_mc)
    xi = rng.choice(4, size=n_mc, p=pis)
    side_of_item = np.array([spec.dim_side(d.name) for d in spec.dims
                             for _ in range(d.item_count)])
    single = np.array([d.item_count == 1 for d in spec.dims
                       for _ in range(d.item_count)])
    item_dim = np.array([k for k, d in enumerate(spec.dims)
                         for _ in range(d.item_count)])

    def mc_prob(y):
        obs = y >= 0
        lin = taus + lams * eta[:, item_dim]
        p1 = norm.cdf(lin)
        p1[:, single] = (eta[:, item_dim[single]] > 0).astype(float)
        on = np.stack([(xi // 2) == 1, (xi % 2) == 1], axis=1)
        probs = np.ones(n_mc)
        for j in np.nonzero(obs)[0]:
            side_on = on[:, side_of_item[j]]
            pj = np.where(side_on, p1[:, j] if y[j] else 1 - p1[:, j],
                          0.0 if y[j] else 1.0)
            probs *= pj
        return probs

    for seed in range(4):
        r2 = np.random.default_rng(100 + seed)
        y = (r2.random(spec.total_items) < 0.4).astype(np.int8)
        if seed == 3:
            y[2] = -1  # a missing item
        p = mc_prob(y)
        mc, se = p.mean(), p.std() / np.sqrt(n_mc)
        ll = unit_loglik(spec, phi, params, y, x, quad_nodes=48)
        assert abs(np.exp(ll) - mc) < 3.5 * se, (y, np.exp(ll), mc, se)


def test_unit_loglik_missing_equals_deleted_item(phi, params):
    spec = two_sided_spec(4, 3, 2)
    x = np.array([1.0, 0.5])
    y = np.array([1, 0, 1, 1, 1, 0, 1, 0, 0], dtype=np.int8)
    y_miss = y.copy()
    y_miss[1] = -1

    # same model with gp item 2 removed
    spec_d = two_sided_spec(3, 3, 2)
    phi_d = MeasurementParams(
        tau={"gp": np.delete(phi.tau["gp"], 1), "rp": phi.tau["rp"]},
        lam={"gp": np.delete(phi.lam["gp"], 1), "rp": phi.lam["rp"]})
    y_d = np.delete(y, 1)
    a = unit_loglik(spec, phi, params, y_miss, x, quad_nodes=8)
    b = unit_loglik(spec_d, phi_d, params, y_d, x, quad_nodes=8)
    assert a == pytest.approx(b, abs=1e-12)


def test_loglik_quadrature_converges(spec, phi, params):
    x = np.array([1.0, 0.3])
    y = np.array([1, 1, 0, 0, 1, 0, 1, 1, 0], dtype=np.int8)
    ref = unit_loglik(spec, phi, params, y, x, quad_nodes=48)
    errs = [abs(unit_loglik(spec, phi, params, y, x, quad_nodes=k) - ref)
            for k in (8, 16, 32)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 5e-5


def test_bvn_upper_against_mvn():
    rng = np.random.default_rng(1)
    for _ in range(25):
        a, b = rng.uniform(-2.5, 2.5, 2)
        r = rng.uniform(-0.95, 0.95)
        ref = multivariate_normal(cov=[[1, r], [r, 1]]).cdf([-a, -b])
        assert bvn_upper(a, b, r) == pytest.approx(ref, abs=1e-10)


def test_truth_beats_perturbed_parameters():
    spec = two_sided_spec(7, 7, 3)
    phi = default_phi(spec)
    params = default_params(spec)
    X = covariates(5000, 3)
    data, _ = simulate_dataset(spec, phi, params, X, seed=11)
    ll_true = dataset_loglik(spec, phi, params, data, quad_nodes=6)
    rng = np.random.default_rng(12)
    arrays = {"beta": params.beta, "gamma": params.gamma, "alpha": params.alpha}
    for trial in range(10):
        name = ("beta", "gamma", "alpha")[trial % 3]
        base = arrays[name]
        idx = tuple(rng.integers(s) for s in base.shape)
        pert = {k: v.copy() for k, v in arrays.items()}
        if name == "alpha":
            pert[name][idx] += 0.25  # +0.5 leaves the feasible region here
        else:
            pert[name][idx] += 0.5
        trial_params = StructuralParams(beta=pert["beta"], sigma=params.sigma,
                                        alpha=pert["alpha"], gamma=pert["gamma"])
        ll = dataset_loglik(spec, phi, trial_params, data, quad_nodes=6)
        assert ll < ll_true
