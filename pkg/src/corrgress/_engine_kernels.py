"""Compiled inner loops of the Gibbs/Metropolis sampler.

Everything here operates on flat numpy arrays; the engine module owns the
array layout and translates to and from the dataclass world.  All routines
draw randomness through counter-based streams so results are independent of
scheduling.

Status codes returned by the chain kernels:
  0 ok; 1 ARS failure; 2 cache drift beyond tolerance at re-baseline;
  3 zero-probability latent-class weights; 4 feasible interval empty.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from . import _numerics as nm

OK = 0
ERR_ARS = 1
ERR_DRIFT = 2
ERR_XI_WEIGHTS = 3
ERR_INTERVAL = 4

_PIVOT = 1e-12
U1 = np.uint64(1)


# ---------------------------------------------------------------------------
# Dense and incremental correlation-matrix algebra (flat-array ports)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _assemble(rho, pr, pc, out):
    K = out.shape[0]
    for i in range(K):
        for j in range(K):
            out[i, j] = 1.0 if i == j else 0.0
    for l in range(pr.shape[0]):
        out[pr[l], pc[l]] = rho[l]
        out[pc[l], pr[l]] = rho[l]


@njit(cache=True)
def _chol_upper(M, G):
    """Upper-triangular factor with R = G^T G; returns False on PD failure."""
    K = M.shape[0]
    for i in range(K):
        for j in range(K):
            G[i, j] = 0.0
    for j in range(K):
        s = M[j, j]
        for k in range(j):
            s -= G[k, j] * G[k, j]
        if s <= _PIVOT:
            return False
        G[j, j] = math.sqrt(s)
        for c in range(j + 1, K):
            t = M[j, c]
            for k in range(j):
                t -= G[k, j] * G[k, c]
            G[j, c] = t / G[j, j]
    return True


@njit(cache=True)
def _inv_det_from_chol(G, W):
    """Inverse and determinant of G^T G given the upper factor G."""
    K = G.shape[0]
    det = 1.0
    for j in range(K):
        det *= G[j, j] * G[j, j]
    # invert the upper factor, then W = Ginv @ Ginv^T
    Gi = np.zeros((K, K))
    for j in range(K - 1, -1, -1):
        Gi[j, j] = 1.0 / G[j, j]
        for i in range(j - 1, -1, -1):
            s = 0.0
            for k in range(i + 1, j + 1):
                s += G[i, k] * Gi[k, j]
            Gi[i, j] = -s / G[i, i]
    for i in range(K):
        for j in range(K):
            s = 0.0
            for k in range(max(i, j), K):
                s += Gi[i, k] * Gi[j, k]
            W[i, j] = s
    return det


@njit(cache=True)
def _move_last(G, k1, k2, out):
    """Factor of P^T R P with k2 -> K-2, k1 -> K-1 (0-based), via Givens QR."""
    K = G.shape[0]
    idx = 0
    for c in range(K):
        if c != k1 and c != k2:
            for r in range(K):
                out[r, idx] = G[r, c]
            idx += 1
    for r in range(K):
        out[r, K - 2] = G[r, k2]
        out[r, K - 1] = G[r, k1]
    for c in range(K):
        for r in range(K - 1, c, -1):
            b = out[r, c]
            if b == 0.0:
                continue
            a = out[r - 1, c]
            rad = math.hypot(a, b)
            cs = a / rad
            sn = b / rad
            for t in range(K):
                hi = cs * out[r - 1, t] + sn * out[r, t]
                lo = -sn * out[r - 1, t] + cs * out[r, t]
                out[r - 1, t] = hi
                out[r, t] = lo
            out[r, c] = 0.0
    for j in range(K):
        if out[j, j] < 0.0:
            for t in range(K):
                out[j, t] = -out[j, t]


@njit(cache=True)
def _gh_from_moved(G):
    """Center and half-width of the feasible range of the (K-1, K-2) entry."""
    K = G.shape[0]
    g = 0.0
    s = 0.0
    for k in range(K - 2):
        g += G[k, K - 2] * G[k, K - 1]
        s += G[k, K - 1] * G[k, K - 1]
    rad = 1.0 - s
    if rad < 0.0:
        rad = 0.0
    h = G[K - 2, K - 2] * math.sqrt(rad)
    return g, h


@njit(cache=True)
def _alpha_bounds(alpha, l, m, T, Gams, pr, pc, scratch):
    """Intersection over test points of the feasible range of alpha[l, m]."""
    a = -np.inf
    b = np.inf
    k1 = pr[l]
    k2 = pc[l]
    q = T.shape[1]
    for j in range(T.shape[0]):
        x = T[j, m]
        if x == 0.0:
            continue
        _move_last(Gams[j], k1, k2, scratch)
        g, h = _gh_from_moved(scratch)
        rest = 0.0
        for kk in range(q):
            if kk != m:
                rest += alpha[l, kk] * T[j, kk]
        lo = (g - h - rest) / x
        hi = (g + h - rest) / x
        if x < 0.0:
            lo, hi = hi, lo
        if lo > a:
            a = lo
        if hi < b:
            b = hi
    return a, b


@njit(cache=True)
def _perturb_inv_det(W, det, k1, k2, eps, Wout):
    """Inverse/determinant of R + eps(e1 e2^T + e2 e1^T) via Sherman-Morrison."""
    K = W.shape[0]
    denom1 = 1.0 + eps * W[k2, k1]
    if abs(denom1) < 1e-14:
        return -1.0
    for i in range(K):
        wi = eps * W[i, k1] / denom1
        for j in range(K):
            Wout[i, j] = W[i, j] - wi * W[k2, j]
    denom2 = 1.0 + eps * Wout[k1, k2]
    if abs(denom2) < 1e-14:
        return -1.0
    # rows other than k1 subtract a multiple of row k1; row k1 itself just
    # scales by 1/denom2, so handle it last to avoid aliasing
    for i in range(K):
        if i == k1:
            continue
        wi = eps * Wout[i, k2] / denom2
        for j in range(K):
            Wout[i, j] = Wout[i, j] - wi * Wout[k1, j]
    for j in range(K):
        Wout[k1, j] /= denom2
    return det * denom1 * denom2


@njit(cache=True)
def _chol_rank1(G, x, sign):
    """In-place factor of G^T G + sign * x x^T; x is destroyed."""
    K = G.shape[0]
    for k in range(K):
        gkk = G[k, k]
        r2 = gkk * gkk + sign * x[k] * x[k]
        if r2 <= _PIVOT:
            return False
        r = math.sqrt(r2)
        c = r / gkk
        s = x[k] / gkk
        G[k, k] = r
        for t in range(k + 1, K):
            G[k, t] = (G[k, t] + sign * s * x[t]) / c
            x[t] = c * x[t] - s * G[k, t]
    return True


@njit(cache=True)
def _perturb_chol(G, k1, k2, eps, x):
    """Factor-space off-diagonal perturbation: three rank-1 modifications."""
    if eps == 0.0:
        return True
    K = G.shape[0]
    s = math.sqrt(abs(eps))
    sgn = 1 if eps > 0.0 else -1
    for t in range(K):
        x[t] = 0.0
    x[k1] = s
    x[k2] = s
    if not _chol_rank1(G, x, sgn):
        return False
    for t in range(K):
        x[t] = 0.0
    x[k1] = s
    if not _chol_rank1(G, x, -sgn):
        return False
    for t in range(K):
        x[t] = 0.0
    x[k2] = s
    return _chol_rank1(G, x, -sgn)


@njit(cache=True)
def _quad_form(W, e):
    K = e.shape[0]
    q = 0.0
    for i in range(K):
        for j in range(K):
            q += e[i] * W[i, j] * e[j]
    return q


# ---------------------------------------------------------------------------
# Correlation-coefficient sweep (Algorithm core)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _rebase(alpha, Xc, T, pr, pc, Rinv, Rdet, Gams, qcur, e, tol):
    """Dense recomputation of all caches; returns max drift (or -1 on PD loss)."""
    n = Xc.shape[0]
    Tn = T.shape[0]
    K = Rinv.shape[1]
    L = pr.shape[0]
    R = np.empty((K, K))
    G = np.empty((K, K))
    W = np.empty((K, K))
    rho = np.empty(L)
    drift = 0.0
    for i in range(n):
        for l in range(L):
            s = 0.0
            for k in range(Xc.shape[1]):
                s += alpha[l, k] * Xc[i, k]
            rho[l] = s
        _assemble(rho, pr, pc, R)
        if not _chol_upper(R, G):
            return -1.0
        det = _inv_det_from_chol(G, W)
        d = abs(det - Rdet[i])
        if d > drift:
            drift = d
        for a in range(K):
            for b in range(K):
                d = abs(W[a, b] - Rinv[i, a, b])
                if d > drift:
                    drift = d
        Rdet[i] = det
        for a in range(K):
            for b in range(K):
                Rinv[i, a, b] = W[a, b]
        qcur[i] = _quad_form(W, e[i])
    for j in range(Tn):
        for l in range(L):
            s = 0.0
            for k in range(T.shape[1]):
                s += alpha[l, k] * T[j, k]
            rho[l] = s
        _assemble(rho, pr, pc, R)
        if not _chol_upper(R, G):
            return -1.0
        for a in range(K):
            for b in range(K):
                d = abs(G[a, b] - Gams[j, a, b])
                if d > drift:
                    drift = d
                Gams[j, a, b] = G[a, b]
    return drift


@njit(cache=True)
def alpha_sweep(alpha, Xc, T, pr, pc, steps, Rinv, Rdet, Gams, qcur, e,
                n_prop, n_acc, key, sid, ctr, use_dense,
                rebase_count, rebase_every, drift_tol, Wnew, detnew, qnew):
    """One elementwise Metropolis pass over all free correlation coefficients.

    Returns (counter, status, rebase_count).  Caches are committed only on
    acceptance; every `rebase_every` accepted moves triggers a dense
    recomputation whose drift must stay below `drift_tol`.
    """
    n = Xc.shape[0]
    K = Rinv.shape[1]
    L = pr.shape[0]
    q = Xc.shape[1]
    scratch = np.empty((K, K))
    xvec = np.empty(K)
    Rd = np.empty((K, K))  # dense scratch
    Gd = np.empty((K, K))
    rho = np.empty(L)
    status = OK
    for l in range(L):
        k1 = pr[l]
        k2 = pc[l]
        for m in range(q):
            a, b = _alpha_bounds(alpha, l, m, T, Gams, pr, pc, scratch)
            if not (a < alpha[l, m] < b):
                return ctr, ERR_INTERVAL, rebase_count
            z = nm.randn(key, sid, ctr)
            ctr += U1
            prop = alpha[l, m] + steps[m] * z
            n_prop[l, m] += 1
            if prop <= a or prop >= b:
                continue
            delta = prop - alpha[l, m]
            logr = 0.0
            ok = True
            if use_dense:
                for i in range(n):
                    for ll in range(L):
                        s = 0.0
                        for kk in range(q):
                            s += alpha[ll, kk] * Xc[i, kk]
                        rho[ll] = s
                    rho[l] += delta * Xc[i, m]
                    _assemble(rho, pr, pc, Rd)
                    if not _chol_upper(Rd, Gd):
                        ok = False
                        break
                    det = _inv_det_from_chol(Gd, Wnew[i])
                    detnew[i] = det
                    qnew[i] = _quad_form(Wnew[i], e[i])
                    logr += -0.5 * (math.log(det) - math.log(Rdet[i])) \
                            - 0.5 * (qnew[i] - qcur[i])
            else:
                for i in range(n):
                    epsi = delta * Xc[i, m]
                    det = _perturb_inv_det(Rinv[i], Rdet[i], k1, k2, epsi, Wnew[i])
                    if det <= 0.0:
                        ok = False
                        break
                    detnew[i] = det
                    qnew[i] = _quad_form(Wnew[i], e[i])
                    logr += -0.5 * (math.log(det) - math.log(Rdet[i])) \
                            - 0.5 * (qnew[i] - qcur[i])
            u = nm.u01(key, sid, ctr)
            ctr += U1
            if not ok or math.log(u) >= logr:
                continue
            # commit
            alpha[l, m] = prop
            for i in range(n):
                Rdet[i] = detnew[i]
                qcur[i] = qnew[i]
                for aa in range(K):
                    for bb in range(K):
                        Rinv[i, aa, bb] = Wnew[i, aa, bb]
            for j in range(T.shape[0]):
                epsj = delta * T[j, m]
                if not _perturb_chol(Gams[j], k1, k2, epsj, xvec):
                    # numerically marginal downdate: rebuild densely
                    for ll in range(L):
                        s = 0.0
                        for kk in range(q):
                            s += alpha[ll, kk] * T[j, kk]
                        rho[ll] = s
                    _assemble(rho, pr, pc, Rd)
                    if not _chol_upper(Rd, Gams[j]):
                        return ctr, ERR_DRIFT, rebase_count
            n_acc[l, m] += 1
            rebase_count += 1
            if rebase_count >= rebase_every:
                drift = _rebase(alpha, Xc, T, pr, pc, Rinv, Rdet, Gams,
                                qcur, e, drift_tol)
                if drift < 0.0 or drift > drift_tol:
                    return ctr, ERR_DRIFT, rebase_count
                rebase_count = 0
    return ctr, status, rebase_count


# ---------------------------------------------------------------------------
# Latent-variable and parameter sweeps
# ---------------------------------------------------------------------------

@njit(cache=True)
def _cell_logits(gamma, xg, out):
    out[0] = 0.0
    for c in range(3):
        s = 0.0
        for r in range(xg.shape[0]):
            s += gamma[c, r] * xg[r]
        out[c + 1] = s


@njit(cache=True)
def xi_sweep(cell, eta, gamma, Xg, Y, tau, lam, item_ptr, dim_side, dim_single,
             obs_one, key, sid_base, ctrs):
    """Latent-class draw per unit: 4-cell multinomial on log weights."""
    n = Y.shape[0]
    K = item_ptr.shape[0] - 1
    lw = np.empty(4)
    lpi = np.empty(4)
    for i in range(n):
        # log measurement weight of each side when "on"
        lw_on0 = 0.0
        lw_on1 = 0.0
        for k in range(K):
            s = 0.0
            if dim_single[k]:
                j = item_ptr[k]
                y = Y[i, j]
                if y >= 0:
                    pos = eta[i, k] > 0.0
                    if (y == 1) != pos:
                        s = -np.inf
            else:
                for j in range(item_ptr[k], item_ptr[k + 1]):
                    y = Y[i, j]
                    if y < 0:
                        continue
                    t = tau[j] + lam[j] * eta[i, k]
                    s += nm.norm_logcdf(t) if y == 1 else nm.norm_logcdf(-t)
            if dim_side[k] == 0:
                lw_on0 += s
            else:
                lw_on1 += s
        _cell_logits(gamma, Xg[i], lpi)
        best = -np.inf
        for c in range(4):
            s0 = c // 2
            s1 = c % 2
            w = lpi[c]
            if s0 == 1:
                w += lw_on0
            elif obs_one[i, 0]:
                w = -np.inf
            if s1 == 1:
                w += lw_on1
            elif obs_one[i, 1]:
                w = -np.inf
            lw[c] = w
            if w > best:
                best = w
        if best == -np.inf:
            return ctrs[i], ERR_XI_WEIGHTS, i
        tot = 0.0
        for c in range(4):
            lw[c] = math.exp(lw[c] - best)
            tot += lw[c]
        u = nm.u01(key, sid_base + np.uint64(i), ctrs[i]) * tot
        ctrs[i] += U1
        acc = 0.0
        pick = 3
        for c in range(4):
            acc += lw[c]
            if u < acc:
                pick = c
                break
        cell[i] = pick
    return ctrs[0], OK, -1


@njit(cache=True)
def eta_sweep(cell, eta, e, beta, sigma, Rinv, Xm, Y, tau, lam, item_ptr,
              dim_side, dim_single, key, sid_base, ctrs):
    """Coordinate-wise update of the latent tendencies from full conditionals."""
    n = Y.shape[0]
    K = item_ptr.shape[0] - 1
    mu = Xm @ beta  # n x K
    maxitems = 0
    for k in range(K):
        c = item_ptr[k + 1] - item_ptr[k]
        if c > maxitems:
            maxitems = c
    a1 = np.empty(maxitems)
    a2 = np.empty(maxitems)
    a3 = np.empty(maxitems)
    v = np.empty(2)
    init = np.empty(3)
    for i in range(n):
        ctr = ctrs[i]
        sid = sid_base + np.uint64(i)
        W = Rinv[i]
        for k in range(K):
            # conditional of the standardized residual given the others
            acc = 0.0
            for j in range(K):
                if j != k:
                    acc += W[k, j] * e[i, j]
            cm = -acc / W[k, k]
            cv = 1.0 / W[k, k]
            mean = mu[i, k] + sigma[k] * cm
            sd = sigma[k] * math.sqrt(cv)
            side = dim_side[k]
            on = (cell[i] // 2 == 1) if side == 0 else (cell[i] % 2 == 1)
            if not on:
                val = mean + sd * nm.randn(key, sid, ctr)
                ctr += U1
            elif dim_single[k]:
                y = Y[i, item_ptr[k]]
                if y < 0:
                    val = mean + sd * nm.randn(key, sid, ctr)
                    ctr += U1
                elif y == 1:
                    x, ctr = nm.trunc_std_normal(-mean / sd, np.inf, key, sid, ctr)
                    val = mean + sd * x
                else:
                    x, ctr = nm.trunc_std_normal(-np.inf, -mean / sd, key, sid, ctr)
                    val = mean + sd * x
            else:
                cnt = 0
                for j in range(item_ptr[k], item_ptr[k + 1]):
                    if Y[i, j] >= 0:
                        a1[cnt] = tau[j]
                        a2[cnt] = lam[j]
                        a3[cnt] = float(Y[i, j])
                        cnt += 1
                if cnt == 0:
                    val = mean + sd * nm.randn(key, sid, ctr)
                    ctr += U1
                else:
                    v[0] = mean
                    v[1] = sd
                    init[0] = mean - sd
                    init[1] = mean
                    init[2] = mean + sd
                    x, ctr, st = nm.ars_core(1, v, a1[:cnt], a2[:cnt], a3[:cnt],
                                             init, -np.inf, np.inf, key, sid, ctr)
                    if st != nm.ARS_OK:
                        ctrs[i] = ctr
                        return ctr, ERR_ARS, i
                    val = x
            eta[i, k] = val
            e[i, k] = (val - mu[i, k]) / sigma[k]
        ctrs[i] = ctr
    return ctrs[0], OK, -1


@njit(cache=True)
def gamma_sweep(gamma, cell, Xg, sigma2_gamma, key, sid, ctr):
    """One-at-a-time updates of class-logit coefficients by rejection sampling."""
    n = Xg.shape[0]
    Qg = Xg.shape[1]
    lp = np.empty((n, 4))
    la = np.empty(n)
    lb = np.empty(n)
    z = np.empty(n)
    v = np.empty(2)
    init = np.empty(3)
    a3 = np.empty(0)
    for i in range(n):
        _cell_logits(gamma, Xg[i], lp[i])
    for c in range(3):
        for r in range(Qg):
            cur = gamma[c, r]
            s = 0.0
            for i in range(n):
                z[i] = Xg[i, r]
                if cell[i] == c + 1:
                    s += z[i]
                # la: log sum of exp over the other cells; lb: this cell's
                # logit with the coordinate's contribution removed
                best = -np.inf
                for d in range(4):
                    if d != c + 1 and lp[i, d] > best:
                        best = lp[i, d]
                tot = 0.0
                for d in range(4):
                    if d != c + 1:
                        tot += math.exp(lp[i, d] - best)
                la[i] = best + math.log(tot)
                lb[i] = lp[i, c + 1] - cur * z[i]
            v[0] = s
            v[1] = sigma2_gamma
            init[0] = cur - 1.0
            init[1] = cur
            init[2] = cur + 1.0
            x, ctr, st = nm.ars_core(2, v, la, lb, z, init, -np.inf, np.inf,
                                     key, sid, ctr)
            if st != nm.ARS_OK:
                return ctr, ERR_ARS
            gamma[c, r] = x
            for i in range(n):
                lp[i, c + 1] = lb[i] + x * z[i]
    return ctr, OK


@njit(cache=True)
def beta_sweep(beta, eta, e, sigma, Rinv, Xm, sigma2_beta, key, sid, ctr):
    """Exact multivariate-normal draw of each dimension's mean coefficients."""
    n = Xm.shape[0]
    Qm = Xm.shape[1]
    K = beta.shape[1]
    A = np.empty((Qm, Qm))
    bvec = np.empty(Qm)
    zvec = np.empty(Qm)
    for k in range(K):
        for a in range(Qm):
            bvec[a] = 0.0
            for b in range(Qm):
                A[a, b] = (1.0 / sigma2_beta) if a == b else 0.0
        for i in range(n):
            W = Rinv[i]
            cv = sigma[k] * sigma[k] / W[k, k]
            acc = 0.0
            for j in range(K):
                if j != k:
                    acc += W[k, j] * e[i, j]
            d2 = -sigma[k] * acc / W[k, k]
            t = eta[i, k] - d2
            for a in range(Qm):
                xa = Xm[i, a]
                bvec[a] += xa * t / cv
                for b in range(Qm):
                    A[a, b] += xa * Xm[i, b] / cv
        V = np.linalg.inv(A)
        mean = V @ bvec
        Lv = np.linalg.cholesky(V)
        for a in range(Qm):
            zvec[a] = nm.randn(key, sid, ctr)
            ctr += U1
        draw = mean + Lv @ zvec
        for a in range(Qm):
            beta[a, k] = draw[a]
        mu_k = Xm @ draw
        for i in range(n):
            e[i, k] = (eta[i, k] - mu_k[i]) / sigma[k]
    return ctr, OK


@njit(cache=True)
def sigma_sweep(sigma, eta, e, Rinv, Xm, beta, sigma_free, ig_a0, ig_b0,
                n_prop, n_acc, key, sid, ctr):
    """Random-walk Metropolis on each free scale; non-positive proposals rejected."""
    n = Xm.shape[0]
    K = sigma.shape[0]
    for k in range(K):
        if not sigma_free[k]:
            continue
        b1 = ig_b0
        b2 = 0.0
        for i in range(n):
            W = Rinv[i]
            u_raw = e[i, k] * sigma[k]
            b1 += 0.5 * u_raw * u_raw * W[k, k]
            acc = 0.0
            for j in range(K):
                if j != k:
                    acc += W[k, j] * e[i, j]
            b2 += 0.5 * u_raw * acc
        a_post = n + 2.0 * ig_a0
        cur = sigma[k]
        prop = cur + 0.1 * cur * nm.randn(key, sid, ctr)
        ctr += U1
        u = nm.u01(key, sid, ctr)
        ctr += U1
        n_prop[k] += 1
        if prop > 0.0:
            lcur = -(a_post + 1.0) * math.log(cur) - b1 / (cur * cur) - 2.0 * b2 / cur
            lprop = -(a_post + 1.0) * math.log(prop) - b1 / (prop * prop) - 2.0 * b2 / prop
            # Hastings correction: the proposal sd scales with the current
            # value, so q is asymmetric.
            d = prop - cur
            lq_fwd = -math.log(cur) - d * d / (0.02 * cur * cur)
            lq_rev = -math.log(prop) - d * d / (0.02 * prop * prop)
            if math.log(u) < lprop - lcur + lq_rev - lq_fwd:
                sigma[k] = prop
                scale = cur / prop
                for i in range(n):
                    e[i, k] *= scale
                n_acc[k] += 1
    return ctr, OK


# ---------------------------------------------------------------------------
# Full chain kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _tune_step(C, clo, chi, rej_rate, lo_t, hi_t):
    """One geometric-bisection move of the proposal constant.

    Rejection rate rises with C.  Until both bracket ends have been observed
    the constant is doubled or halved; afterwards geometric bisection.
    """
    if rej_rate < lo_t:
        clo = C
        C = 2.0 * C if chi >= 1e4 else math.sqrt(C * chi)
    elif rej_rate > hi_t:
        chi = C
        C = 0.5 * C if clo <= 1e-4 else math.sqrt(clo * C)
    return C, clo, chi


@njit(cache=True)
def _alpha_steps(C, Xc, steps):
    n = Xc.shape[0]
    for m in range(Xc.shape[1]):
        mx = 0.0
        for i in range(n):
            ax = abs(Xc[i, m])
            if ax > mx:
                mx = ax
        steps[m] = C if (n == 0 or mx == 0.0) else C / (math.sqrt(n) * mx)


@njit(cache=True)
def run_chain_kernel(Y, Xm, Xc, Xg, T, tau, lam, item_ptr, dim_side,
                     dim_single, sigma_free, pr, pc, obs_one,
                     sigma2_gamma, sigma2_beta, ig_a0, ig_b0,
                     iterations, burn_in, thin, C_init, tune_every,
                     rebase_every, drift_tol, key, chain_id,
                     draws, cell_out, acc_alpha, prop_alpha,
                     acc_sigma, prop_sigma, c_out):
    """Full data-augmentation chain; writes retained draws into `draws`.

    Returns (status, failing unit or -1).  Column layout of draws:
    beta (K x Qm, dimension-major), sigma (K), alpha (L x q, pair-major),
    gamma (3 x Qg, cell-major).
    """
    n = Y.shape[0]
    K = item_ptr.shape[0] - 1
    Qm = Xm.shape[1]
    Qg = Xg.shape[1]
    q = Xc.shape[1]
    L = pr.shape[0]
    Tn = T.shape[0]

    beta = np.zeros((Qm, K))
    sigma = np.ones(K)
    alpha = np.zeros((L, q))
    gamma = np.zeros((3, Qg))
    cell = np.full(n, 3, dtype=np.int64)
    eta = np.empty((n, K))
    e = np.empty((n, K))

    sid_unit = (np.uint64(chain_id) << np.uint64(32)) + np.uint64(1)
    sid_par = np.uint64(chain_id) << np.uint64(32)
    ctrs = np.zeros(n, dtype=np.uint64)
    ctr = np.uint64(0)

    # init: eta from the independent prior at alpha = 0, except observed
    # single-item dims which start on the side of their observed sign
    for i in range(n):
        for k in range(K):
            if dim_single[k] and Y[i, item_ptr[k]] >= 0:
                eta[i, k] = 1.0 if Y[i, item_ptr[k]] == 1 else -1.0
            else:
                eta[i, k] = nm.randn(key, sid_unit + np.uint64(i), ctrs[i])
                ctrs[i] += U1
            e[i, k] = eta[i, k]

    Rinv = np.empty((n, K, K))
    Rdet = np.ones(n)
    qcur = np.empty(n)
    for i in range(n):
        for a in range(K):
            for b in range(K):
                Rinv[i, a, b] = 1.0 if a == b else 0.0
        qcur[i] = _quad_form(Rinv[i], e[i])
    Gams = np.empty((Tn, K, K))
    for j in range(Tn):
        for a in range(K):
            for b in range(K):
                Gams[j, a, b] = 1.0 if a == b else 0.0

    Wnew = np.empty((n, K, K))
    detnew = np.empty(n)
    qnew = np.empty(n)
    steps = np.empty(q)
    C = C_init
    clo = 1e-4
    chi = 1e4
    _alpha_steps(C, Xc, steps)

    win_prop = np.zeros((L, q), dtype=np.int64)
    win_acc = np.zeros((L, q), dtype=np.int64)
    rebase_count = 0
    row = 0
    ncol_beta = Qm * K

    for it in range(iterations):
        _, st, bad = xi_sweep(cell, eta, gamma, Xg, Y, tau, lam, item_ptr,
                              dim_side, dim_single, obs_one, key, sid_unit, ctrs)
        if st != OK:
            return st, bad
        _, st, bad = eta_sweep(cell, eta, e, beta, sigma, Rinv, Xm, Y, tau,
                               lam, item_ptr, dim_side, dim_single, key,
                               sid_unit, ctrs)
        if st != OK:
            return st, bad
        # eta moved: refresh cached quadratic forms
        for i in range(n):
            qcur[i] = _quad_form(Rinv[i], e[i])
        ctr, st = gamma_sweep(gamma, cell, Xg, sigma2_gamma, key, sid_par, ctr)
        if st != OK:
            return st, -1
        ctr, st = beta_sweep(beta, eta, e, sigma, Rinv, Xm, sigma2_beta,
                             key, sid_par, ctr)
        if st != OK:
            return st, -1
        ctr, st = sigma_sweep(sigma, eta, e, Rinv, Xm, beta, sigma_free,
                              ig_a0, ig_b0, prop_sigma, acc_sigma,
                              key, sid_par, ctr)
        if st != OK:
            return st, -1
        for i in range(n):
            qcur[i] = _quad_form(Rinv[i], e[i])
        post_burn = it >= burn_in
        np_tally = prop_alpha if post_burn else win_prop
        na_tally = acc_alpha if post_burn else win_acc
        ctr, st, rebase_count = alpha_sweep(
            alpha, Xc, T, pr, pc, steps, Rinv, Rdet, Gams, qcur, e,
            np_tally, na_tally, key, sid_par, ctr, False,
            rebase_count, rebase_every, drift_tol, Wnew, detnew, qnew)
        if st != OK:
            return st, -1

        if (not post_burn) and ((it + 1) % tune_every == 0):
            tot_p = 0
            tot_a = 0
            for l in range(L):
                for m in range(q):
                    tot_p += win_prop[l, m]
                    tot_a += win_acc[l, m]
                    win_prop[l, m] = 0
                    win_acc[l, m] = 0
            if tot_p > 0:
                rej = 1.0 - tot_a / tot_p
                C, clo, chi = _tune_step(C, clo, chi, rej, 0.73, 0.77)
                _alpha_steps(C, Xc, steps)

        if post_burn and (it - burn_in) % thin == 0:
            col = 0
            for k in range(K):
                for r in range(Qm):
                    draws[row, col] = beta[r, k]
                    col += 1
            for k in range(K):
                draws[row, col] = sigma[k]
                col += 1
            for l in range(L):
                for m in range(q):
                    draws[row, col] = alpha[l, m]
                    col += 1
            for c in range(3):
                for r in range(Qg):
                    draws[row, col] = gamma[c, r]
                    col += 1
            row += 1

    for i in range(n):
        cell_out[i] = cell[i]
    c_out[0] = C
    return OK, -1


@njit(cache=True)
def run_alpha_only_kernel(e, K, Xc, T, pr, pc, iterations, burn_in, thin,
                          C_init, tune_every, tune, rebase_every, drift_tol,
                          key, chain_id, use_dense, draws, acc_alpha,
                          prop_alpha, c_out):
    """Correlation-only chain: residuals fixed, only alpha is sampled.

    Serves the stationarity micro-test and the incremental-vs-dense
    benchmark; identical proposal mechanics to the full kernel.
    """
    n = e.shape[0]
    L = pr.shape[0]
    q = Xc.shape[1]
    Tn = T.shape[0]
    alpha = np.zeros((L, q))
    Rinv = np.empty((n, K, K))
    Rdet = np.ones(n)
    qcur = np.empty(n)
    for i in range(n):
        for a in range(K):
            for b in range(K):
                Rinv[i, a, b] = 1.0 if a == b else 0.0
        qcur[i] = _quad_form(Rinv[i], e[i])
    Gams = np.empty((Tn, K, K))
    for j in range(Tn):
        for a in range(K):
            for b in range(K):
                Gams[j, a, b] = 1.0 if a == b else 0.0
    Wnew = np.empty((n, K, K))
    detnew = np.empty(n)
    qnew = np.empty(n)
    steps = np.empty(q)
    C = C_init
    clo = 1e-4
    chi = 1e4
    _alpha_steps(C, Xc, steps)
    sid = np.uint64(chain_id) << np.uint64(32)
    ctr = np.uint64(0)
    win_prop = np.zeros((L, q), dtype=np.int64)
    win_acc = np.zeros((L, q), dtype=np.int64)
    rebase_count = 0
    row = 0
    for it in range(iterations):
        post_burn = it >= burn_in
        np_tally = prop_alpha if post_burn else win_prop
        na_tally = acc_alpha if post_burn else win_acc
        ctr, st, rebase_count = alpha_sweep(
            alpha, Xc, T, pr, pc, steps, Rinv, Rdet, Gams, qcur, e,
            np_tally, na_tally, key, sid, ctr, use_dense,
            rebase_count, rebase_every, drift_tol, Wnew, detnew, qnew)
        if st != OK:
            return st
        if tune and (not post_burn) and ((it + 1) % tune_every == 0):
            tot_p = 0
            tot_a = 0
            for l in range(L):
                for m in range(q):
                    tot_p += win_prop[l, m]
                    tot_a += win_acc[l, m]
                    win_prop[l, m] = 0
                    win_acc[l, m] = 0
            if tot_p > 0:
                rej = 1.0 - tot_a / tot_p
                C, clo, chi = _tune_step(C, clo, chi, rej, 0.73, 0.77)
                _alpha_steps(C, Xc, steps)
        if post_burn and (it - burn_in) % thin == 0:
            col = 0
            for l in range(L):
                for m in range(q):
                    draws[row, col] = alpha[l, m]
                    col += 1
            row += 1
    c_out[0] = C
    return OK
