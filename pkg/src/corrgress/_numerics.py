"""Scalar numerical kernels shared by the samplers and the MCMC engine.

Everything here is numba-compiled and dependency-free so the same code paths
run identically whether called from Python-level APIs or from the engine's
hot loops.  The RNG is counter-based: a draw is a pure function of
(key, stream_id, counter), which makes every sampler reproducible and
schedule-independent.
"""

import math

import numpy as np
from numba import njit

U64 = np.uint64
_GOLDEN = U64(0x9E3779B97F4A7C15)
_GAMMA2 = U64(0xD1B54A32D192ED03)


@njit(cache=True, inline="always")
def mix64(z):
    # SplitMix64 finalizer (Stafford mix13 variant).
    z = (z + _GOLDEN) & U64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)) & U64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)) & U64(0xFFFFFFFFFFFFFFFF)
    return z ^ (z >> U64(31))


@njit(cache=True, inline="always")
def u01(key, sid, ctr):
    """Uniform in (0, 1), a pure function of the (key, stream, counter) triple."""
    z = mix64(U64(key))
    z = mix64(z + U64(sid) * _GAMMA2)
    z = mix64(z + U64(ctr) * _GOLDEN)
    return (np.float64(z >> U64(11)) + 0.5) * (2.0 ** -53)


_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@njit(cache=True, inline="always")
def norm_cdf(x):
    return 0.5 * math.erfc(-x / _SQRT2)


@njit(cache=True, inline="always")
def norm_logpdf(x):
    return -0.5 * x * x - _LOG_SQRT_2PI


@njit(cache=True)
def norm_logcdf(x):
    """log Phi(x), stable far into the left tail."""
    if x > -20.0:
        return math.log(0.5 * math.erfc(-x / _SQRT2))
    # Asymptotic expansion of the Mills ratio.
    xsq = x * x
    series = 1.0 - 1.0 / xsq + 3.0 / (xsq * xsq) - 15.0 / (xsq * xsq * xsq)
    return norm_logpdf(x) - math.log(-x) + math.log(series)


@njit(cache=True)
def norm_ppf(p):
    """Inverse standard normal CDF (Wichura's AS 241, double precision)."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    if q < 0.0:
        r = p
    else:
        r = 1.0 - p
    if r <= 0.0:
        return -math.inf if q < 0.0 else math.inf
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    val = num / den
    return -val if q < 0.0 else val


@njit(cache=True, inline="always")
def randn(key, sid, ctr):
    return norm_ppf(u01(key, sid, ctr))


# ---------------------------------------------------------------------------
# Truncated standard normal sampling.  Each routine returns (draw, counter).
# ---------------------------------------------------------------------------

@njit(cache=True)
def _trunc_lower(a, key, sid, ctr):
    # Standard normal restricted to (a, inf).
    if a <= 0.4:
        while True:
            x = randn(key, sid, ctr)
            ctr += 1
            if x >= a:
                return x, ctr
    # Robert (1995) translated-exponential rejection, robust far in the tail.
    lam = 0.5 * (a + math.sqrt(a * a + 4.0))
    while True:
        x = a - math.log(u01(key, sid, ctr)) / lam
        ctr += 1
        u = u01(key, sid, ctr)
        ctr += 1
        d = x - lam
        if math.log(u) <= -0.5 * d * d:
            return x, ctr


@njit(cache=True)
def _trunc_two_pos(a, b, key, sid, ctr):
    # Standard normal restricted to (a, b) with 0 <= a < b.
    if a <= 0.4:
        while True:
            x = randn(key, sid, ctr)
            ctr += 1
            if a <= x <= b:
                return x, ctr
    lam = 0.5 * (a + math.sqrt(a * a + 4.0))
    if b - a < 1.5 / lam:
        # Narrow interval: uniform proposal with exact acceptance.
        while True:
            x = a + (b - a) * u01(key, sid, ctr)
            ctr += 1
            u = u01(key, sid, ctr)
            ctr += 1
            if math.log(u) <= 0.5 * (a * a - x * x):
                return x, ctr
    while True:
        x, ctr = _trunc_lower(a, key, sid, ctr)
        if x <= b:
            return x, ctr


@njit(cache=True)
def trunc_std_normal(a, b, key, sid, ctr):
    """Exact draw from N(0,1) restricted to (a, b); returns (draw, counter)."""
    if a == -math.inf and b == math.inf:
        x = randn(key, sid, ctr)
        return x, ctr + 1
    if a == -math.inf:
        x, ctr = trunc_std_normal(-b, math.inf, key, sid, ctr)
        return -x, ctr
    if b == math.inf:
        return _trunc_lower(a, key, sid, ctr)
    if a >= 0.0:
        return _trunc_two_pos(a, b, key, sid, ctr)
    if b <= 0.0:
        x, ctr = _trunc_two_pos(-b, -a, key, sid, ctr)
        return -x, ctr
    # Interval straddles zero: inversion is accurate here.
    pa = norm_cdf(a)
    pb = norm_cdf(b)
    u = u01(key, sid, ctr)
    ctr += 1
    return norm_ppf(pa + u * (pb - pa)), ctr


# ---------------------------------------------------------------------------
# Adaptive rejection sampling for log-concave densities.
#
# Densities are identified by an integer tag so the kernel stays numba-
# compilable; parameters travel in one scalar vector and up to three arrays.
#   kind 0: N(v0, v1^2)
#   kind 1: product of probit item terms times N(v0, v1^2):
#           sum_j [y_j log Phi(tau_j + lam_j x) + (1-y_j) log(1-Phi(...))]
#           with a1 = tau, a2 = lam, a3 = y
#   kind 2: multinomial-logit coefficient conditional:
#           v0 * x - sum_i logaddexp(la_i, lb_i + x * z_i) - x^2 / (2 v1)
#           with a1 = la, a2 = lb, a3 = z
#   kind 3: Exponential(rate v0) on (0, inf)
#   kind 4: Gamma(shape v0, rate v1) on (0, inf), shape > 1
#   kind 5: logistic with location v0, scale v1
# ---------------------------------------------------------------------------

ARS_OK = 0
ARS_NOT_CONCAVE = 1
ARS_STUCK = 2


@njit(cache=True)
def ars_logdens(kind, x, v, a1, a2, a3):
    """Log density (up to a constant) and its derivative at x."""
    if kind == 0:
        z = (x - v[0]) / v[1]
        return -0.5 * z * z, -z / v[1]
    if kind == 1:
        z = (x - v[0]) / v[1]
        f = -0.5 * z * z
        df = -z / v[1]
        for j in range(a1.shape[0]):
            t = a1[j] + a2[j] * x
            lp1 = norm_logcdf(t)
            lp0 = norm_logcdf(-t)
            lpdf = norm_logpdf(t)
            if a3[j] > 0.5:
                f += lp1
                df += a2[j] * math.exp(lpdf - lp1)
            else:
                f += lp0
                df -= a2[j] * math.exp(lpdf - lp0)
        return f, df
    if kind == 2:
        f = v[0] * x - 0.5 * x * x / v[1]
        df = v[0] - x / v[1]
        for i in range(a1.shape[0]):
            la = a1[i]
            lb = a2[i] + x * a3[i]
            m = la if la > lb else lb
            lse = m + math.log(math.exp(la - m) + math.exp(lb - m))
            f -= lse
            df -= a3[i] * math.exp(lb - lse)
        return f, df
    if kind == 3:
        return -v[0] * x, -v[0]
    if kind == 4:
        return (v[0] - 1.0) * math.log(x) - v[1] * x, (v[0] - 1.0) / x - v[1]
    # kind 5: logistic
    z = (x - v[0]) / v[1]
    # log f = -z - 2 log(1 + exp(-z)) up to a constant; compute stably
    if z >= 0.0:
        l1pe = math.log1p(math.exp(-z))
        f = -z - 2.0 * l1pe
    else:
        l1pe = math.log1p(math.exp(z))
        f = z - 2.0 * l1pe
    # df/dx = (-1 + 2 exp(-z)/(1+exp(-z))) / scale = -tanh(z/2)/scale
    return f, -math.tanh(0.5 * z) / v[1]


_ARS_MAXP = 64


@njit(cache=True)
def _seg_sample(zl, zr, xi, c, u):
    """Inverse-CDF draw from exp(c * (x - xi)) restricted to (zl, zr)."""
    if abs(c) < 1e-12:
        return zl + u * (zr - zl)
    if zl == -math.inf:
        return zr + math.log(u) / c
    if zr == math.inf:
        return zl + math.log1p(-u) / c
    d = c * (zr - zl)
    if d > 35.0:
        val = d + math.log(u)
    elif d < -35.0:
        val = math.log1p(-u)
    else:
        val = math.log((1.0 - u) + u * math.exp(d))
    return zl + val / c


@njit(cache=True)
def ars_core(kind, v, a1, a2, a3, init, lo, hi, key, sid, ctr):
    """One exact draw via adaptive rejection sampling.

    Returns (draw, counter, status).  The caller supplies initial abscissae;
    the kernel steps them out until the envelope is integrable on an
    unbounded domain.
    """
    xs = np.empty(_ARS_MAXP)
    hs = np.empty(_ARS_MAXP)
    dhs = np.empty(_ARS_MAXP)
    m = 0
    for i in range(init.shape[0]):
        x = init[i]
        if x <= lo or x >= hi:
            continue
        if m > 0 and x <= xs[m - 1]:
            continue
        f, df = ars_logdens(kind, x, v, a1, a2, a3)
        if not math.isfinite(f):
            continue
        xs[m] = x
        hs[m] = f
        dhs[m] = df
        m += 1
    if m == 0:
        return 0.0, ctr, ARS_STUCK

    # Step out so the envelope has finite mass on unbounded sides.
    step = 1.0 if m < 2 else max(1.0, xs[m - 1] - xs[0])
    tries = 0
    while lo == -math.inf and dhs[0] <= 1e-12:
        xnew = xs[0] - step
        step *= 2.0
        f, df = ars_logdens(kind, xnew, v, a1, a2, a3)
        for k in range(m, 0, -1):
            xs[k] = xs[k - 1]
            hs[k] = hs[k - 1]
            dhs[k] = dhs[k - 1]
        xs[0] = xnew
        hs[0] = f
        dhs[0] = df
        if m < _ARS_MAXP - 1:
            m += 1
        tries += 1
        if tries > 200:
            return 0.0, ctr, ARS_STUCK
    tries = 0
    while hi == math.inf and dhs[m - 1] >= -1e-12:
        xnew = xs[m - 1] + step
        step *= 2.0
        f, df = ars_logdens(kind, xnew, v, a1, a2, a3)
        if m < _ARS_MAXP - 1:
            xs[m] = xnew
            hs[m] = f
            dhs[m] = df
            m += 1
        else:
            xs[m - 1] = xnew
            hs[m - 1] = f
            dhs[m - 1] = df
        tries += 1
        if tries > 200:
            return 0.0, ctr, ARS_STUCK

    for it in range(1024):
        # Concavity check: tangent slopes non-increasing, secants bracketed.
        for i in range(m - 1):
            if dhs[i + 1] > dhs[i] + 1e-8:
                return 0.0, ctr, ARS_NOT_CONCAVE
            secant = (hs[i + 1] - hs[i]) / (xs[i + 1] - xs[i])
            tol = 1e-8 * (1.0 + abs(secant))
            if secant > dhs[i] + tol or secant < dhs[i + 1] - tol:
                return 0.0, ctr, ARS_NOT_CONCAVE

        # Upper-hull breakpoints between consecutive tangents.
        z = np.empty(m + 1)
        z[0] = lo
        z[m] = hi
        for i in range(m - 1):
            denom = dhs[i] - dhs[i + 1]
            if abs(denom) < 1e-14:
                z[i + 1] = 0.5 * (xs[i] + xs[i + 1])
            else:
                z[i + 1] = ((hs[i + 1] - hs[i] + xs[i] * dhs[i]
                             - xs[i + 1] * dhs[i + 1]) / denom)
            if z[i + 1] < xs[i]:
                z[i + 1] = xs[i]
            if z[i + 1] > xs[i + 1]:
                z[i + 1] = xs[i + 1]

        off = hs[0]
        for i in range(1, m):
            if hs[i] > off:
                off = hs[i]

        logmass = np.empty(m)
        for i in range(m):
            c = dhs[i]
            base = hs[i] - off
            zl = z[i]
            zr = z[i + 1]
            if zl == -math.inf:
                logmass[i] = base + c * (zr - xs[i]) - math.log(c)
            elif zr == math.inf:
                logmass[i] = base + c * (zl - xs[i]) - math.log(-c)
            elif abs(c) < 1e-12:
                logmass[i] = base + math.log(max(zr - zl, 1e-300))
            else:
                A = c * (zl - xs[i])
                B = c * (zr - xs[i])
                mx = A if A > B else B
                diff = abs(B - A)
                logmass[i] = base + mx + math.log1p(-math.exp(-diff)) - math.log(abs(c))

        mmax = logmass[0]
        for i in range(1, m):
            if logmass[i] > mmax:
                mmax = logmass[i]
        total = 0.0
        for i in range(m):
            total += math.exp(logmass[i] - mmax)

        u1 = u01(key, sid, ctr)
        ctr += 1
        target = u1 * total
        seg = m - 1
        acc = 0.0
        for i in range(m):
            acc += math.exp(logmass[i] - mmax)
            if target <= acc:
                seg = i
                break

        u2 = u01(key, sid, ctr)
        ctr += 1
        xstar = _seg_sample(z[seg], z[seg + 1], xs[seg], dhs[seg], u2)
        if not math.isfinite(xstar):
            continue
        uval = hs[seg] + dhs[seg] * (xstar - xs[seg])

        u3 = u01(key, sid, ctr)
        ctr += 1
        logu = math.log(u3)

        # Squeeze via the chord below the log-density.
        if m >= 2 and xs[0] <= xstar <= xs[m - 1]:
            j = 0
            while j < m - 1 and xs[j + 1] < xstar:
                j += 1
            t = (xstar - xs[j]) / (xs[j + 1] - xs[j])
            lval = hs[j] + t * (hs[j + 1] - hs[j])
            if logu <= lval - uval:
                return xstar, ctr, ARS_OK

        f, df = ars_logdens(kind, xstar, v, a1, a2, a3)
        accept = logu <= f - uval
        if m < _ARS_MAXP - 1 and math.isfinite(f):
            pos = m
            for i in range(m):
                if xs[i] > xstar:
                    pos = i
                    break
            if (pos == 0 or xs[pos - 1] < xstar) and (pos == m or xs[pos] > xstar):
                for k in range(m, pos, -1):
                    xs[k] = xs[k - 1]
                    hs[k] = hs[k - 1]
                    dhs[k] = dhs[k - 1]
                xs[pos] = xstar
                hs[pos] = f
                dhs[pos] = df
                m += 1
        if accept:
            return xstar, ctr, ARS_OK
    return 0.0, ctr, ARS_STUCK
