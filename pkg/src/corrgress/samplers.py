"""Reusable exact and Metropolis-Hastings univariate samplers.

All randomness flows through counter-based streams: a draw is a pure
function of (key, stream_id, counter), so per-unit parallelism can never
change results and any draw can be replayed from its triple.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _numerics as nm

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


class NotLogConcaveError(RuntimeError):
    """The density handed to the ARS sampler violated log-concavity."""


@dataclass
class RandomStream:
    """Counter-based random stream; value-type, owned by one consumer.

    Distinct (key, stream_id) pairs give statistically independent
    sequences; the same (key, stream_id, counter) triple always reproduces
    the same value.
    """

    key: int
    stream_id: int = 0
    counter: int = 0

    def substream(self, stream_id: int) -> "RandomStream":
        return RandomStream(key=self.key, stream_id=stream_id, counter=0)

    def uniform(self) -> float:
        u = nm.u01(np.uint64(self.key), np.uint64(self.stream_id), np.uint64(self.counter))
        self.counter += 1
        return float(u)

    def normal(self) -> float:
        return float(nm.norm_ppf(self.uniform()))

    def uniforms(self, n: int) -> np.ndarray:
        """Vectorized uniforms; identical to n successive uniform() calls."""
        ctrs = np.arange(self.counter, self.counter + n, dtype=np.uint64)
        self.counter += n
        return u01_array(self.key, self.stream_id, ctrs)

    def normals(self, n: int) -> np.ndarray:
        from scipy.special import ndtri

        return ndtri(self.uniforms(n))


def _mix64_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z + np.uint64(0x9E3779B97F4A7C15)) & _MASK
        z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK
        z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK
        return z ^ (z >> np.uint64(31))


def u01_array(key: int, stream_id, counters) -> np.ndarray:
    """Vectorized counterpart of the scalar counter-based uniform."""
    sid = np.asarray(stream_id, dtype=np.uint64)
    ctr = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _mix64_array(np.uint64(key) + np.zeros_like(ctr))
        z = _mix64_array(z + sid * np.uint64(0xD1B54A32D192ED03))
        z = _mix64_array(z + ctr * np.uint64(0x9E3779B97F4A7C15))
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


@dataclass(frozen=True)
class LogDensity:
    """A univariate log density (up to a constant) on an interval domain."""

    eval: Callable[[float], float]
    domain: tuple[float, float] = (-math.inf, math.inf)
    concavity_declared: bool = True
    grad: Callable[[float], float] | None = None

    def gradient(self, x: float, h: float = 1e-6) -> float:
        if self.grad is not None:
            return self.grad(x)
        lo, hi = self.domain
        xl = max(x - h, lo + h * 1e-3) if math.isfinite(lo) else x - h
        xr = min(x + h, hi - h * 1e-3) if math.isfinite(hi) else x + h
        return (self.eval(xr) - self.eval(xl)) / (xr - xl)


# Density tags understood by the compiled ARS kernel; see _numerics.
_EMPTY = np.empty(0)


def _ars_generic(density: LogDensity, init: np.ndarray, stream: RandomStream) -> float:
    """Pure-Python ARS with the same hull construction as the compiled kernel.

    Used for arbitrary callables; the engine routes its known densities
    through the compiled kernel instead.
    """
    lo, hi = density.domain
    xs, hs, dhs = [], [], []
    for x in sorted(init):
        if not lo < x < hi:
            continue
        f = density.eval(x)
        if not math.isfinite(f):
            continue
        xs.append(x)
        hs.append(f)
        dhs.append(density.gradient(x))
    if not xs:
        raise ValueError("no usable initial abscissae inside the domain")

    step = max(1.0, xs[-1] - xs[0])
    tries = 0
    while lo == -math.inf and dhs[0] <= 1e-12:
        x = xs[0] - step
        step *= 2
        xs.insert(0, x)
        hs.insert(0, density.eval(x))
        dhs.insert(0, density.gradient(x))
        tries += 1
        if tries > 200:
            raise RuntimeError("could not bracket the mode from the left")
    tries = 0
    while hi == math.inf and dhs[-1] >= -1e-12:
        x = xs[-1] + step
        step *= 2
        xs.append(x)
        hs.append(density.eval(x))
        dhs.append(density.gradient(x))
        tries += 1
        if tries > 200:
            raise RuntimeError("could not bracket the mode from the right")

    for _ in range(1024):
        for i in range(len(xs) - 1):
            if dhs[i + 1] > dhs[i] + 1e-8:
                raise NotLogConcaveError(
                    f"tangent slopes increase between x={xs[i]:.6g} and x={xs[i+1]:.6g}"
                )
            # Secant of a concave function lies between the endpoint tangents.
            secant = (hs[i + 1] - hs[i]) / (xs[i + 1] - xs[i])
            tol = 1e-8 * (1.0 + abs(secant))
            if secant > dhs[i] + tol or secant < dhs[i + 1] - tol:
                raise NotLogConcaveError(
                    f"secant test violated between x={xs[i]:.6g} and x={xs[i+1]:.6g}"
                )
        m = len(xs)
        z = [lo]
        for i in range(m - 1):
            denom = dhs[i] - dhs[i + 1]
            if abs(denom) < 1e-14:
                zi = 0.5 * (xs[i] + xs[i + 1])
            else:
                zi = (hs[i + 1] - hs[i] + xs[i] * dhs[i] - xs[i + 1] * dhs[i + 1]) / denom
            z.append(min(max(zi, xs[i]), xs[i + 1]))
        z.append(hi)

        off = max(hs)
        logmass = []
        for i in range(m):
            c, zl, zr = dhs[i], z[i], z[i + 1]
            base = hs[i] - off
            if zl == -math.inf:
                logmass.append(base + c * (zr - xs[i]) - math.log(c))
            elif zr == math.inf:
                logmass.append(base + c * (zl - xs[i]) - math.log(-c))
            elif abs(c) < 1e-12:
                logmass.append(base + math.log(max(zr - zl, 1e-300)))
            else:
                A, B = c * (zl - xs[i]), c * (zr - xs[i])
                logmass.append(base + max(A, B) + math.log1p(-math.exp(-abs(B - A))) - math.log(abs(c)))
        mmax = max(logmass)
        weights = [math.exp(lm - mmax) for lm in logmass]
        total = sum(weights)

        target = stream.uniform() * total
        seg, acc = m - 1, 0.0
        for i in range(m):
            acc += weights[i]
            if target <= acc:
                seg = i
                break
        xstar = float(nm._seg_sample(z[seg], z[seg + 1], xs[seg], dhs[seg], stream.uniform()))
        if not math.isfinite(xstar):
            continue
        uval = hs[seg] + dhs[seg] * (xstar - xs[seg])
        logu = math.log(stream.uniform())

        if xs[0] <= xstar <= xs[-1] and m >= 2:
            j = 0
            while j < m - 1 and xs[j + 1] < xstar:
                j += 1
            t = (xstar - xs[j]) / (xs[j + 1] - xs[j])
            if logu <= hs[j] + t * (hs[j + 1] - hs[j]) - uval:
                return xstar
        f = density.eval(xstar)
        accept = logu <= f - uval
        if math.isfinite(f) and xstar not in xs:
            pos = 0
            while pos < m and xs[pos] < xstar:
                pos += 1
            xs.insert(pos, xstar)
            hs.insert(pos, f)
            dhs.insert(pos, density.gradient(xstar))
        if accept:
            return xstar
    raise RuntimeError("ARS failed to accept within the evaluation budget")


def ars_sample(density: LogDensity, init_abscissae, stream: RandomStream) -> float:
    """Exact draw from a log-concave density via adaptive rejection sampling."""
    if not density.concavity_declared:
        raise NotLogConcaveError("density is not declared log-concave")
    init = np.asarray(init_abscissae, dtype=float)
    if init.size < 3:
        raise ValueError("need at least 3 initial abscissae")
    return _ars_generic(density, init, stream)


def truncated_normal(mean: float, sd: float, lower: float, upper: float,
                     stream: RandomStream) -> float:
    """Exact draw from N(mean, sd^2) restricted to (lower, upper)."""
    if sd <= 0:
        raise ValueError("sd must be positive")
    if not lower < upper:
        raise ValueError(f"empty truncation interval ({lower}, {upper})")
    a = (lower - mean) / sd
    b = (upper - mean) / sd
    x, ctr = nm.trunc_std_normal(a, b, np.uint64(stream.key),
                                 np.uint64(stream.stream_id), np.uint64(stream.counter))
    stream.counter = int(ctr)
    return mean + sd * float(x)


def rw_mh_step(current: float, logdensity: Callable[[float], float], step_sd: float,
               stream: RandomStream) -> tuple[float, bool]:
    """One random-walk Metropolis step with a symmetric Gaussian proposal."""
    if step_sd <= 0:
        raise ValueError("step_sd must be positive")
    proposal = current + step_sd * stream.normal()
    lp_new = logdensity(proposal)
    u = stream.uniform()  # always consumed: fixed draw count per step
    if lp_new == -math.inf:
        return current, False
    delta = lp_new - logdensity(current)
    if delta >= 0 or math.log(u) <= delta:
        return proposal, True
    return current, False
