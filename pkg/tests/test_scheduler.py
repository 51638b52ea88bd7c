import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rel_err
from idsbonus.scheduler import (
    BonusMode,
    SchedulerState,
    compose_reward,
    exponentiated_step,
    metric,
    metric_grad,
    update_kappas,
    zeta,
    zeta_parts,
)

pos = st.floats(1e-3, 1e3, allow_nan=False)
kappas = st.floats(0.1, 10)


def test_metric_examples():
    for k in (0.1, 1.0, 7.0):
        assert metric(2.5, 2.5, k) == 1.0
        assert metric(0.0, 0.0, k) == 1.0
        assert metric(4.0, 0.0, k) == 0.0
    assert metric(3.0, 1.0, 1.0) == pytest.approx(0.5)


@given(st.floats(0, 1e3), st.floats(0, 1e3), kappas)
def test_metric_range_and_symmetry(x, y, k):
    m = metric(x, y, k)
    assert 0.0 <= m <= 1.0
    assert m == metric(y, x, k)


@given(pos, pos, kappas, st.floats(1e-2, 1e2))
def test_metric_scale_invariant(x, y, k, c):
    assert metric(c * x, c * y, k) == pytest.approx(metric(x, y, k), rel=1e-9, abs=1e-12)


def test_metric_shape_extremes():
    # small kappa pushes m toward 0 away from x == y, large kappa toward 1
    assert metric(3.0, 1.0, 0.05) < 1e-5
    assert metric(3.0, 1.0, 20.0) > 0.999


def fd_metric_grad(x, y, k):
    h = 1e-5 * k
    return (metric(x, y, k + h) - metric(x, y, k - h)) / (2 * h)


def test_metric_grad_examples():
    assert metric_grad(2.0, 2.0, 1.3) == 0.0
    assert metric_grad(3.0, 1.0, 1.0) == pytest.approx(math.log(2.0), rel=1e-12)
    assert fd_metric_grad(3.0, 1.0, 1.0) == pytest.approx(0.693147, rel=1e-6)


def test_metric_grad_matches_written_form():
    # the textbook expression evaluated through m itself
    for x, y, k in ((3.0, 1.0, 1.0), (0.2, 5.0, 0.4), (1.0, 1.7, 2.5)):
        m = metric(x, y, k)
        mk = m**k
        written = -(m / k) * (math.log(m) + (1 - mk) / (k * mk) * math.log(1 - mk))
        assert metric_grad(x, y, k) == pytest.approx(written, rel=1e-10)


@settings(max_examples=300)
@given(st.floats(1e-2, 10), st.floats(1e-2, 10), kappas)
def test_metric_grad_finite_differences(x, y, k):
    g = metric_grad(x, y, k)
    fd = fd_metric_grad(x, y, k)
    assert math.isfinite(g)
    assert abs(g - fd) <= 1e-4 * abs(fd) + 1e-9


def test_metric_grad_sign():
    # larger kappa never lowers m
    for x, y in ((3.0, 1.0), (0.1, 0.4), (9.0, 8.5)):
        for k in (0.2, 1.0, 5.0):
            assert metric_grad(x, y, k) >= 0


def test_zeta_examples():
    s = SchedulerState()
    assert zeta(s, 1.3, 1.3, 0.2, 0.2) == 1.0
    assert zeta(s, 3.0, 1.0, 0.2, 0.2) == pytest.approx(math.sqrt(0.5))
    assert zeta(s, 1.0, 1.0, 1.0, 0.0) == 0.0
    # m_d = m_b = 0.25 via x/y = 7 at kappa 1
    assert zeta(s, 7.0, 1.0, 1.0, 7.0) == pytest.approx(0.25)


@given(st.floats(0, 1e3), st.floats(0, 1e3), st.floats(1e-20, 1e20), st.floats(1e-20, 1e20), kappas, kappas)
def test_zeta_in_unit_interval(a, b, p, q, kd, kb):
    z = zeta(SchedulerState(kd, kb), a, b, p, q)
    assert 0.0 <= z <= 1.0


def inputs_for_zeta_half():
    # m_d = 1 (equal dispersions) and m_b = 0.25 -> zeta = 0.5 exactly
    return 2.0, 2.0, 7.0, 1.0


def test_update_at_target_is_stationary():
    s = SchedulerState(1.0, 1.0, lr=0.5)
    args = inputs_for_zeta_half()
    assert zeta(s, *args) == 0.5
    new = update_kappas(s, *args)
    assert new.kappa_d == 1.0 and new.kappa_b == 1.0 and new.last_zeta == 0.5


def test_zero_metric_gradient_leaves_kappa():
    s = SchedulerState(1.0, 1.0, lr=0.5)
    # equal dispersions -> grad of m_d is 0 so kappa_d is frozen, kappa_b still moves
    new = update_kappas(s, 1.0, 1.0, 2.0, 1.0)
    assert new.kappa_d == 1.0 and new.kappa_b != 1.0


def test_exponentiated_step():
    for g in (-1e3, -2.0, 0.0, 0.7, 1e3):
        k = exponentiated_step(1.0, g, 0.01)
        assert k == pytest.approx(math.exp(-0.01 * g))
        assert k > 0


def test_update_matches_hand_step():
    s = SchedulerState(1.3, 0.8, lr=0.2)
    args = (3.0, 1.0, 0.4, 0.1)
    z, m_d, m_b = zeta_parts(s, *args)
    sign = 1.0 if z > 0.5 else -1.0
    kd = 1.3 * math.exp(-0.2 * sign * (m_b / z) * metric_grad(3.0, 1.0, 1.3))
    kb = 0.8 * math.exp(-0.2 * sign * (m_d / z) * metric_grad(0.4, 0.1, 0.8))
    new = update_kappas(s, *args)
    assert new.kappa_d == pytest.approx(kd, rel=1e-14)
    assert new.kappa_b == pytest.approx(kb, rel=1e-14)
    assert new.last_zeta == z


def test_update_skipped_when_zeta_vanishes():
    s = SchedulerState(1.0, 1.0, lr=0.5)
    new = update_kappas(s, 1.0, 0.0, 1.0, 1.0)
    assert new.kappa_d == 1.0 and new.kappa_b == 1.0 and new.last_zeta == 0.0


def test_update_pushes_toward_half():
    s = SchedulerState(1.0, 1.0, lr=0.05)
    args = (1.2, 1.0, 1.1, 1.0)  # nearly stagnant: zeta well above 1/2
    z0 = zeta(s, *args)
    for _ in range(200):
        s = update_kappas(s, *args)
    assert z0 > 0.9
    assert abs(zeta(s, *args) - 0.5) < abs(z0 - 0.5)


def test_compose_examples():
    assert compose_reward(BonusMode.VANILLA, 1.25, 2.0, 4.0, 0.3, 0.1) == 1.25
    assert compose_reward(BonusMode.SCHEDULED, 1.0, 2.0, 4.0, 0.5, 0.1) == pytest.approx(1.3)
    v = compose_reward(BonusMode.SUM, 0.0, 1.0, 1.0, 0.9, 0.1)
    assert v == pytest.approx(0.2) and v == pytest.approx(0.1 * (1.0 + 1.0))


@given(st.floats(-10, 10), st.floats(0, 10), st.floats(0, 10), st.floats(0, 1), st.floats(0, 1))
def test_mode_table(r, rd, rb, z, lam):
    sched = lambda zz, ll: compose_reward(BonusMode.SCHEDULED, r, rd, rb, zz, ll)
    assert compose_reward(BonusMode.DFS, r, rd, rb, z, lam) == sched(1.0, lam)
    assert compose_reward(BonusMode.BFS, r, rd, rb, z, lam) == sched(0.0, lam)
    assert compose_reward(BonusMode.MEAN, r, rd, rb, z, lam) == sched(0.5, lam)
    assert compose_reward(BonusMode.SUM, r, rd, rb, z, lam) == compose_reward(BonusMode.MEAN, r, rd, rb, z, 2 * lam)
    assert compose_reward(BonusMode.VANILLA, r, rd, rb, z, lam) == r


def test_mode_parse():
    assert BonusMode.parse("Scheduled") is BonusMode.SCHEDULED
    with pytest.raises(ValueError):
        BonusMode.parse("greedy")


def test_state_validation():
    with pytest.raises(ValueError):
        SchedulerState(kappa_d=0.0)
    with pytest.raises(ValueError):
        SchedulerState(lr=0.0)


def test_kappas_stay_positive_under_random_drive():
    r = np.random.default_rng(7)
    s = SchedulerState(1.0, 1.0, lr=0.5)
    for _ in range(5000):
        x, y = r.exponential(size=2)
        p, q = np.exp(r.normal(0, 3, size=2))
        s = update_kappas(s, x, y, p, q)
        assert s.kappa_d > 0 and s.kappa_b > 0 and 0 <= s.last_zeta <= 1
