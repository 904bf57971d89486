import dataclasses
import math

import numpy as np
import pytest

from dispersion_control.dispersion import DispersionTarget, covariance, eig_sym2
from dispersion_control.estimators import EstimatorState, outer_source
from dispersion_control.sim import (
    DEAD,
    NON_COOPERATIVE,
    ConfigError,
    Event,
    GraphSpec,
    ScenarioConfig,
    SimulationError,
    TrajectoryLog,
    fit_decay_rate,
    initial_state,
    metrics,
    prepare,
    richardson_ratio,
    run,
    step,
    step_bound,
)

TARGET = DispersionTarget(10.0, 4.0)


def small(**kw):
    base = dict(n_agents=20, target=TARGET, seed=1, duration=1.0, log_every=20, graph=GraphSpec(radius=1.4))
    base.update(kw)
    return ScenarioConfig(**base)


def cloud_with_spectrum(n, l1, l2, seed=0):
    """Positions whose population covariance is exactly diag(l1, l2)."""
    Z = np.random.default_rng(seed).normal(size=(n, 2))
    Z -= Z.mean(axis=0)
    _, C = covariance(Z)
    w, V = np.linalg.eigh(C.as_matrix())
    Z = Z @ V / np.sqrt(w)  # whitened
    return Z * np.sqrt([l2, l1])[None, :] @ np.array([[0.0, 1.0], [1.0, 0.0]])


def synthetic_log(t, e):
    t = np.asarray(t, dtype=float)
    K = len(t)
    z2 = np.zeros((K, 2))
    return TrajectoryLog(
        mode="distributed",
        target=TARGET,
        steps=np.arange(K),
        t=t,
        positions=np.zeros((K, 2, 2)),
        p_hat=np.zeros((K, 2, 2)),
        c_hat=np.zeros((K, 2, 3)),
        lam_agents=np.zeros((K, 2, 2)),
        status=np.zeros((K, 2), dtype=np.int8),
        err_y=np.zeros((K, 2)),
        err_D=np.zeros((K, 2)),
        e_norm=np.asarray(e, dtype=float),
        e_agent_max=np.asarray(e, dtype=float),
        min_dist=np.ones(K),
        centroid=z2,
        true_lam=z2 + [10.0, 4.0],
        true_v1=z2 + [1.0, 0.0],
        est_err_max=np.zeros(K),
    )


# -- configuration -------------------------------------------------------------------


def test_config_validation_names_key():
    with pytest.raises(ConfigError) as exc:
        small(eps_s=0.0)
    assert exc.value.key == "eps_s"
    assert "eps_s must be positive" in str(exc.value)


def test_event_after_end_rejected():
    with pytest.raises(ConfigError) as exc:
        small(events=(Event(time=2.0, kind="kill", agents=(1,)),))
    assert exc.value.key == "events[0].time"


def test_psd_target_needs_flag_in_distributed_mode():
    with pytest.raises(ConfigError):
        small(target=DispersionTarget(1.0, 0.0))
    small(target=DispersionTarget(1.0, 0.0), allow_psd_target=True)
    small(target=DispersionTarget(1.0, 0.0), mode="centralized")


def test_step_above_bound_rejected():
    sc = prepare(small())
    with pytest.raises(ConfigError) as exc:
        prepare(small(step_h=sc.h * 2.5))
    assert exc.value.key == "step_h"


def test_step_bound_formula():
    L = np.array([[1.0, -1.0], [-1.0, 1.0]])
    assert step_bound(L, 0.1, 0.25) == pytest.approx(0.5 * 0.1 * 0.25 / 2.0)


def test_disconnecting_kill_rejected():
    # killing the centre of a star isolates every leaf
    star = tuple((1, j) for j in range(2, 6))
    cfg = ScenarioConfig(
        n_agents=5,
        target=TARGET,
        duration=1.0,
        graph=GraphSpec(kind="edges", edges=star),
        events=(Event(time=0.5, kind="kill", agents=(1,)),),
    )
    with pytest.raises(ConfigError) as exc:
        prepare(cfg)
    assert "disconnect" in str(exc.value)


def test_disconnected_graph_rejected():
    cfg = ScenarioConfig(n_agents=4, target=TARGET, graph=GraphSpec(kind="edges", edges=((1, 2), (3, 4))))
    with pytest.raises(ConfigError):
        prepare(cfg)


# -- stepping --------------------------------------------------------------------------


def test_equilibrium_is_stationary():
    P = cloud_with_spectrum(12, 10.0, 4.0) + [0.5, -0.25]
    _, C = covariance(P)
    np.testing.assert_allclose([C.c1, C.c2, C.c3], [10.0, 0.0, 4.0], atol=1e-12)
    cfg = ScenarioConfig(
        n_agents=12, target=TARGET, positions=tuple(map(tuple, P)), graph=GraphSpec(kind="complete"), duration=1.0
    )
    sc = prepare(cfg)
    st = initial_state(sc)
    Z = P - P.mean(axis=0)
    c = outer_source(Z)
    st.estimator = EstimatorState(Z, c - c.mean(axis=0))
    b = eig_sym2(C)
    st.basis_v1[:] = b.v1
    st.basis_v2[:] = b.v2
    nxt = step(st, sc)
    assert np.abs(nxt.positions - P).max() <= 1e-12
    assert np.abs(nxt.estimator.p_hat - Z).max() <= 1e-12


def test_centralized_equilibrium_is_stationary():
    P = cloud_with_spectrum(12, 10.0, 4.0, seed=3)
    cfg = ScenarioConfig(
        n_agents=12, target=TARGET, mode="centralized", positions=tuple(map(tuple, P)), duration=1.0,
        graph=GraphSpec(kind="complete"),
    )
    sc = prepare(cfg)
    nxt = step(initial_state(sc), sc)
    assert np.abs(nxt.positions - P).max() <= 1e-12


def test_richardson_ratio_is_fourth_order():
    sc = prepare(small(duration=0.5))
    st = initial_state(sc)
    for _ in range(200):
        st = step(st, sc)
    ratio = richardson_ratio(sc, st, sc.h)
    assert 12 <= ratio <= 40


def test_non_finite_state_aborts_with_bound_in_message():
    sc = prepare(small())
    bad = dataclasses.replace(sc, h=sc.h * 50)
    st = initial_state(bad)
    with pytest.raises(SimulationError) as exc:
        for _ in range(2000):
            st = step(st, bad)
    assert "0.5*eps_f*eps_s/lambda_max(L)" in str(exc.value)


# -- runs ------------------------------------------------------------------------------


def test_duration_zero_logs_initial_state_only():
    log = run(small(duration=0.0))
    assert len(log) == 1
    assert log.t.tolist() == [0.0]


def test_log_times_monotone_and_final_step_logged():
    sc = prepare(small(duration=0.3, log_every=7))
    log = run(sc)
    assert np.all(np.diff(log.t) > 0)
    assert log.steps[-1] == sc.n_steps
    assert log.t[-1] == pytest.approx(0.3)


def test_runs_are_bit_identical():
    a = run(small(duration=0.3))
    b = run(small(duration=0.3))
    for name in ("positions", "p_hat", "c_hat", "lam_agents", "e_norm", "min_dist"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()


def test_kill_event_freezes_dead_agents():
    cfg = small(duration=0.6, log_every=10, events=(Event(time=0.2, kind="kill", count=3),))
    sc = prepare(cfg)
    log = run(sc)
    victims = list(sc.events[0].agents)
    assert len(victims) == 3
    after = log.t > 0.2 + 1e-9
    assert np.all(log.status[after][:, victims] == DEAD)
    frozen = log.positions[after][:, victims]
    assert np.array_equal(frozen, np.broadcast_to(frozen[0], frozen.shape))
    # handoff keeps the survivors' estimate sums at zero
    alive = log.status[-1] != DEAD
    assert np.abs(log.p_hat[-1][alive].sum(axis=0)).max() <= 1e-9
    assert np.abs(log.c_hat[-1][alive].sum(axis=0)).max() <= 1e-9


def test_orbiters_follow_their_circle():
    cfg = small(duration=0.5, events=(Event(time=0.0, kind="non_cooperative", agents=(2, 5), omega=(math.pi, 2 * math.pi)),))
    log = run(cfg)
    P0 = log.positions[0]
    for a, w in ((1, math.pi), (4, 2 * math.pi)):
        r = np.hypot(*P0[a])
        phase = math.atan2(P0[a][1], P0[a][0])
        expected = np.column_stack([r * np.cos(phase + w * log.t), r * np.sin(phase + w * log.t)])
        np.testing.assert_allclose(log.positions[:, a], expected, atol=1e-12)
        assert np.all(log.status[:, a] == NON_COOPERATIVE)


def test_faster_estimators_do_not_hurt():
    base = run(small(duration=1.5))
    fast = run(small(duration=1.5, eps_s=0.125))
    assert fast.e_norm[-1] <= 1.1 * base.e_norm[-1]


# -- metrics -----------------------------------------------------------------------------


def test_metrics_constant_error_rate_zero():
    t = np.linspace(0, 4, 81)
    m = metrics(synthetic_log(t, np.full_like(t, 3.0)))
    assert m["decay_rate"] == pytest.approx(0.0, abs=1e-12)


def test_metrics_exponential_rate():
    t = np.linspace(0, 4, 81)
    m = metrics(synthetic_log(t, np.exp(-2 * t)))
    assert abs(m["decay_rate"] + 2.0) <= 1e-3


def test_metrics_window_outside_run():
    t = np.linspace(0, 4, 81)
    with pytest.raises(ValueError):
        metrics(synthetic_log(t, np.exp(-t)), window=(3.0, 6.0))
    with pytest.raises(ValueError):
        fit_decay_rate(t, np.exp(-t), (-1.0, 2.0))


def test_metrics_centralized_run():
    log = run(small(mode="centralized", duration=1.0, log_every=50, n_agents=70))
    m = metrics(log)
    assert m["min_pairwise_distance"] > 0
    assert m["max_centroid_drift"] <= 1e-8 * 2
    assert m["max_eigvec_angle_drift"] <= 1e-6
    assert m["scaling_certificate_residual"] <= 1e-6
    assert not m["initial_in_excluded_set"]
