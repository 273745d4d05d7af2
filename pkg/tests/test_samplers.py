import math

import numpy as np
import pytest
from scipy import stats

from corrgress.samplers import (LogDensity, NotLogConcaveError, RandomStream,
                                ars_sample, rw_mh_step, truncated_normal,
                                u01_array)


def draw_many(fn, n):
    return np.array([fn(i) for i in range(n)])


class TestRandomStream:
    def test_same_triple_reproduces(self):
        a = RandomStream(key=42, stream_id=7)
        b = RandomStream(key=42, stream_id=7)
        assert a.uniforms(16).tolist() == b.uniforms(16).tolist()
        assert a.normals(8).tolist() == b.normals(8).tolist()

    def test_streams_differ(self):
        a = RandomStream(key=42, stream_id=7)
        b = RandomStream(key=42, stream_id=8)
        assert not np.any(a.uniforms(16) == b.uniforms(16))

    def test_counter_offset_is_stateless(self):
        a = RandomStream(key=5, stream_id=1)
        first = a.uniforms(10)
        b = RandomStream(key=5, stream_id=1)
        b.counter = 4
        assert np.array_equal(b.uniforms(6), first[4:])

    def test_u01_array_matches_stream(self):
        s = RandomStream(key=9, stream_id=3)
        direct = u01_array(9, 3, np.arange(12, dtype=np.uint64))
        assert np.array_equal(s.uniforms(12), direct)

    def test_uniformity(self):
        u = RandomStream(key=1, stream_id=0).uniforms(10_000)
        assert stats.kstest(u, "uniform").pvalue > 0.01


class TestARS:
    def test_standard_normal_mean(self):
        s = RandomStream(key=3, stream_id=0)
        d = LogDensity(eval=lambda x: -0.5 * x * x)
        xs = np.array([ars_sample(d, [-1.0, 0.3, 1.2], s) for _ in range(10_000)])
        assert abs(xs.mean()) < 0.03
        assert abs(xs.std() - 1.0) < 0.03

    def test_exponential_ks(self):
        s = RandomStream(key=4, stream_id=0)
        d = LogDensity(eval=lambda x: -x, domain=(0.0, math.inf))
        xs = np.array([ars_sample(d, [0.2, 1.0, 3.0], s) for _ in range(10_000)])
        assert stats.kstest(xs, "expon").pvalue > 0.01

    def test_bimodal_rejected(self):
        s = RandomStream(key=5, stream_id=0)
        d = LogDensity(eval=lambda x: -0.25 * (x * x - 4) ** 2 / 4)
        with pytest.raises(NotLogConcaveError):
            for _ in range(200):
                ars_sample(d, [-0.5, 0.1, 0.5], s)

    def test_undeclared_concavity_rejected(self):
        s = RandomStream(key=6, stream_id=0)
        d = LogDensity(eval=lambda x: -0.5 * x * x, concavity_declared=False)
        with pytest.raises(NotLogConcaveError):
            ars_sample(d, [-1.0, 0.0, 1.0], s)

    def test_needs_three_abscissae(self):
        s = RandomStream(key=6, stream_id=0)
        d = LogDensity(eval=lambda x: -0.5 * x * x)
        with pytest.raises(ValueError):
            ars_sample(d, [-1.0, 1.0], s)


class TestTruncatedNormal:
    def test_half_normal_mean(self):
        s = RandomStream(key=11, stream_id=0)
        xs = np.array([truncated_normal(0, 1, 0, math.inf, s) for _ in range(10_000)])
        assert abs(xs.mean() - math.sqrt(2 / math.pi)) < 0.03
        assert np.all(xs > 0)

    def test_negative_half_line(self):
        s = RandomStream(key=12, stream_id=0)
        xs = np.array([truncated_normal(0, 1, -math.inf, 0, s) for _ in range(2000)])
        assert np.all(xs < 0)

    def test_far_tail(self):
        # N(0,1) on (8, inf): mean 8 + Mills ratio correction ~ 8.1216
        s = RandomStream(key=13, stream_id=0)
        xs = np.array([truncated_normal(0, 1, 8, math.inf, s) for _ in range(10_000)])
        assert np.all(np.isfinite(xs)) and np.all(xs > 8)
        assert abs(xs.mean() - 8.1216) < 0.05

    def test_mean_sd_shift(self):
        s = RandomStream(key=14, stream_id=0)
        xs = np.array([truncated_normal(2.0, 3.0, -1.0, 4.0, s) for _ in range(5000)])
        ref = stats.truncnorm((-1 - 2) / 3, (4 - 2) / 3, loc=2, scale=3)
        assert stats.kstest(xs, ref.cdf).pvalue > 0.01

    def test_empty_interval_raises(self):
        s = RandomStream(key=15, stream_id=0)
        with pytest.raises(ValueError):
            truncated_normal(0, 1, 2.0, 2.0, s)


class TestRWMH:
    def test_constant_density_always_accepts(self):
        s = RandomStream(key=21, stream_id=0)
        acc = [rw_mh_step(0.0, lambda x: 0.0, 1.0, s)[1] for _ in range(500)]
        assert all(acc)

    def test_minus_inf_proposal_rejected(self):
        s = RandomStream(key=22, stream_id=0)
        dens = lambda x: 0.0 if x < 0.5 else -math.inf
        x = 0.0
        for _ in range(500):
            x, _ = rw_mh_step(x, dens, 5.0, s)
            assert x < 0.5

    def test_standard_normal_chain(self):
        s = RandomStream(key=23, stream_id=0)
        dens = lambda x: -0.5 * x * x
        x, chain, n_acc = 0.0, [], 0
        for _ in range(20_000):
            x, acc = rw_mh_step(x, dens, 2.4, s)
            chain.append(x)
            n_acc += acc
        chain = np.array(chain)
        assert abs(chain.mean()) < 0.05
        assert 0.3 < n_acc / len(chain) < 0.6
