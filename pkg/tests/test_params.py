import math

import numpy as np
import pytest

from misscov import datagen
from misscov.datagen import Spectrum
from misscov.net import build_net
from misscov.params import (
    GFunction,
    OpNormConstants,
    OpNormError,
    estimate_opnorm,
    estimate_p,
    estimate_trace,
    g_alpha,
    pick_lambdas,
)


def test_constants():
    c = OpNormConstants()
    assert (c.C1, c.L1, c.L2, c.c_beta) == (0.1, 0.5, 0.5, 1.0)
    assert c.target_level == pytest.approx(0.55)
    with pytest.raises(ValueError):
        OpNormConstants(L2=0.95)
    with pytest.raises(ValueError):
        OpNormConstants(C1=0.0)
    first, second = c.conditions(3 ** 0.25)
    assert first == pytest.approx(1.5 ** 2 - 8.4 * 3 * 0.1 * 0.5)
    assert second == pytest.approx(0.5 ** 2 - 8.4 * 3 * 0.1 * 0.5)
    assert first > 0 > second


def test_estimate_p_examples():
    assert estimate_p(np.ones((100, 3)), 0.1) == 1.0
    y = np.zeros((100, 2))
    y[::2, 0] = 1.5
    y[1::2, 1] = -0.3
    assert estimate_p(y, 0.1) == 0.5
    with pytest.raises(ValueError, match="cannot identify p"):
        estimate_p(np.zeros((100, 2)), 0.1)


def test_estimate_trace_examples(gen):
    y = np.tile([1.0, 2.0], (60, 1))  # squared row norm 5
    assert estimate_trace(y, 1.0, 0.1) == 5.0
    z = gen.standard_normal((200, 4))
    assert estimate_trace(4.0 * z, 0.7, 0.1) == 16.0 * estimate_trace(z, 0.7, 0.1)
    with pytest.raises(ValueError):
        estimate_trace(np.zeros((60, 2)), 1.0, 0.1)
    with pytest.raises(ValueError):
        estimate_trace(y, 1.2, 0.1)


def test_g_examples():
    net = build_net(1, 0)
    y = np.array([[2.0]])
    assert g_alpha(1.0, y, 1.0, net, net.with_zero()) == 1.0
    assert g_alpha(0.0, y, 1.0, net, net.with_zero()) == 0.0


def test_g_nonnegative_continuous_and_scale_invariant(gen):
    y = datagen.sparsify(gen.standard_t(6, size=(300, 3)), 0.6, 1).y
    net = build_net(3, 20, seed=0)
    g = GFunction(y, 0.6, net, net.with_zero())
    alphas = np.linspace(0, 3, 3001)
    vals = np.array([g(a) for a in alphas])
    assert vals[0] == 0.0 and np.all(vals >= 0)
    # Lipschitz-type bound on increments: each psi term moves by at most |d(alpha^2) q|
    assert np.max(np.abs(np.diff(vals))) < 0.05
    gs = GFunction(0.25 * y, 0.6, net, net.with_zero())
    assert all(gs(4.0 * a) == g(a) for a in alphas[::50])
    assert g.evaluations >= 3001


def test_opnorm_single_sample_closed_form():
    net = build_net(1, 0)
    est = estimate_opnorm(np.array([[1.0]]), 1.0, net=net)
    assert est == pytest.approx(1 / 0.55, rel=1e-12)


def test_opnorm_scale_equivariance(gen):
    y = gen.standard_normal((400, 3))
    net = build_net(3, 30, seed=2)
    a = estimate_opnorm(y, 1.0, net=net, seed=4)
    b = estimate_opnorm(2.0 * y, 1.0, net=net, seed=4)
    assert b == 4.0 * a


def test_opnorm_errors():
    with pytest.raises(OpNormError, match="opnorm root-finding failed"):
        estimate_opnorm(np.zeros((10, 2)), 1.0)


def test_opnorm_downward_search(gen):
    # one tiny row pushes alpha_hi to ~1e9, so the scan start alpha_hi * 1e-8
    # already saturates the 1e9-scale rows; only the downward halving can reach
    # the crossing near alpha ~ 1e-9
    y = np.vstack([1e9 * gen.standard_normal((40, 2)), [[1e-9, 1e-9]]])
    net = build_net(2, 0)
    g = GFunction(y, 1.0, net, net.with_zero())
    w_scale = 1.0 / math.sqrt(np.min(np.abs(y[-1]) ** 2))
    assert g(1e-8 * w_scale / 10) >= 0.55
    est = estimate_opnorm(y, 1.0, net=net, seed=1)
    assert 1e16 < est < 1e20


@pytest.mark.slow
def test_opnorm_constant_factor_accuracy():
    spec = datagen.build_covariance(4, Spectrum.spiked(4.0, 1.0))
    hits = 0
    for t in range(50):
        x = datagen.sample_gaussian(spec, 5000, 1000 + t)
        est = estimate_opnorm(x, 1.0, net=build_net(4, seed=t), seed=t)
        hits += 0.1 <= est / 4.0 <= 10
    assert hits >= 45


def test_pick_lambdas_homogeneity():
    l1, l2 = pick_lambdas(10.0, 2.0, 0.5, 1000, 0.1, 3 ** 0.25)
    m1, m2 = pick_lambdas(160.0, 32.0, 0.5, 1000, 0.1, 3 ** 0.25)
    assert (m1, m2) == (l1 / 16, l2 / 16)
    assert l1 == pytest.approx(0.0348873, abs=5e-7)
