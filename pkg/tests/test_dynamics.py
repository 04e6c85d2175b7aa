"""Integrator contracts: reductions with closed forms, scheme coupling,
observers, guards, and determinism.

The spatially constant reduction is the main quantitative oracle: with
eps=0 the equation collapses to y' = -(1+|y|^2) y per component, whose
squared magnitude z=|y|^2 obeys z' = -2z(1+z) with the explicit solution
z(t) = z0 e^{-2t} / (1 + z0 (1 - e^{-2t})).
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import band_limited
from llblab import (
    BlowUpError,
    Grid,
    NoiseParams,
    Observer,
    ParameterError,
    SimConfig,
    VectorField,
    build_basis,
    constant_field,
    drift,
    fourier_mode_field,
    gaussian_bump_field,
    integrate,
    l2_inner,
    make_state,
    norm_sq,
    resolve_threads,
    run_ensemble,
    step_em_ito,
    step_heun_strat,
    zero_field,
)
from llblab.experiments import dyadic_increment_table
from llblab.noise import NoiseStream, WienerIncrements
from test_noise import make_constant_basis


def magnitude_closed_form(z0: float, t: float) -> float:
    """z(t) for z' = -2z(1+z); z is the squared pointwise magnitude."""
    g = math.exp(-2.0 * t)
    return z0 * g / (1.0 + z0 * (1.0 - g))


def test_closed_form_against_scipy():
    """The oracle itself is checked against an independent ODE solver."""
    from scipy.integrate import solve_ivp

    sol = solve_ivp(lambda t, z: -2.0 * z * (1.0 + z), (0.0, 1.0), [1.0],
                    rtol=1e-12, atol=1e-14, dense_output=True)
    assert sol.success
    assert magnitude_closed_form(1.0, 1.0) == pytest.approx(
        float(sol.y[0, -1]), rel=1e-9)


def small_cfg(**kw) -> SimConfig:
    base = dict(grid=Grid(n=32, half_width=16.0),
                noise=NoiseParams(modes=6, amplitude=0.3),
                epsilon=0.0, delta=0.0, dt=1e-2, t_final=0.5, seed=3)
    base.update(kw)
    return SimConfig(**base)


def test_config_validation_messages():
    g = Grid(n=32, half_width=16.0)
    with pytest.raises(ParameterError, match=r"epsilon must lie in \[0, 1\]"):
        SimConfig(grid=g, epsilon=1.5)
    with pytest.raises(ParameterError, match="delta"):
        SimConfig(grid=g, delta=-0.1)
    with pytest.raises(ParameterError, match="dt must be positive"):
        SimConfig(grid=g, dt=0.0)
    with pytest.raises(ParameterError, match="scheme"):
        SimConfig(grid=g, scheme="rk4")
    with pytest.raises(ParameterError, match="t_final"):
        SimConfig(grid=g, t_final=1e-3, dt=1e-2)
    with pytest.raises(ParameterError, match="unknown drift terms"):
        SimConfig(grid=g, drift_terms=("laplacian", "coriolis"))


def test_stability_guard_rejects_coarse_dt():
    g = Grid(n=128, half_width=16.0)  # k_max^2 ~ 158
    with pytest.raises(ParameterError, match="stability guard"):
        SimConfig(grid=g, dt=0.04)
    SimConfig(grid=g, dt=0.02)  # guard 3.16 < 5, fine


def test_drift_constant_field_hand_oracle():
    cfg = small_cfg()
    basis = build_basis(cfg.grid, cfg.noise)
    u = constant_field(cfg.grid, (1.0, 0.0, 0.0))
    out = drift(u, cfg, basis)
    assert np.allclose(out.values, (-2.0, 0.0, 0.0), atol=1e-12)


def test_drift_zero_fixed_point():
    cfg = small_cfg()
    basis = build_basis(cfg.grid, cfg.noise)
    out = drift(zero_field(cfg.grid), cfg, basis)
    assert np.max(np.abs(out.values)) < 1e-15


def test_drift_single_mode_oracle():
    """Linear multipliers plus pointwise reaction; precession vanishes for a
    single-direction mode since Delta u stays parallel to u."""
    cfg = small_cfg(delta=1.0)
    basis = build_basis(cfg.grid, cfg.noise)
    u = fourier_mode_field(cfg.grid, mode=(1, 0), amplitude=0.8,
                           direction=(0.0, 0.0, 1.0))
    k_sq = (math.pi / 16.0) ** 2
    v = u.values
    expected = (-k_sq - cfg.delta * k_sq**2) * v \
        - (1.0 + np.sum(v * v, axis=-1, keepdims=True)) * v
    got = drift(u, cfg, basis)
    scale = np.max(np.abs(expected))
    assert np.max(np.abs(got.values - expected)) < 1e-9 * scale


def test_drift_term_selection():
    cfg = small_cfg(drift_terms=("laplacian",))
    basis = build_basis(cfg.grid, cfg.noise)
    u = band_limited(cfg.grid, seed=1)
    from llblab import laplacian
    out = drift(u, cfg, basis)
    assert np.max(np.abs(out.values - laplacian(u).values)) < 1e-12
    with pytest.raises(ParameterError):
        drift(u, cfg, basis, terms=("nope",))


def test_one_step_constant_reduction_frozen_value():
    # two-stage update: pred = 1 - dt*2 = 0.98,
    # u1 = 1 - dt/2 * (2 + (1 + 0.98^2) * 0.98) = 0.98039404
    cfg = small_cfg(dt=0.01, t_final=0.01)
    basis = build_basis(cfg.grid, cfg.noise)
    state = make_state(constant_field(cfg.grid, (1.0, 0.0, 0.0)), cfg)
    out = step_em_ito(state, cfg, basis)
    expected = 1.0 - 0.005 * (2.0 + (1.0 + 0.98**2) * 0.98)
    assert expected == pytest.approx(0.98039404, abs=1e-12)
    assert np.allclose(out.u.values[:, :, 0], expected, atol=1e-13)
    assert np.max(np.abs(out.u.values[:, :, 1:])) < 1e-15
    assert out.t == cfg.dt and out.step_index == 1


def test_constant_reduction_matches_closed_form():
    cfg = small_cfg(dt=1e-3, t_final=1.0)
    basis = build_basis(cfg.grid, cfg.noise)
    state = make_state(constant_field(cfg.grid, (1.0, 0.0, 0.0)), cfg)
    state = integrate(state, cfg, basis)
    z = float(np.mean(np.sum(state.u.values**2, axis=-1)))
    assert z == pytest.approx(magnitude_closed_form(1.0, 1.0), abs=1e-5)


def test_time_is_exact_step_multiple():
    cfg = small_cfg(dt=0.1, t_final=10.0, epsilon=0.3)
    basis = build_basis(cfg.grid, cfg.noise)
    state = make_state(zero_field(cfg.grid), cfg)
    state = integrate(state, cfg, basis)
    assert state.step_index == 100
    assert state.t == 100 * 0.1  # bitwise, not approx


def test_schemes_identical_without_noise():
    cfg_a = small_cfg(scheme="em_ito", epsilon=0.0, t_final=0.5)
    cfg_b = small_cfg(scheme="heun_strat", epsilon=0.0, t_final=0.5)
    basis = build_basis(cfg_a.grid, cfg_a.noise)
    u0 = band_limited(cfg_a.grid, seed=8)
    a = integrate(make_state(u0, cfg_a), cfg_a, basis)
    b = integrate(make_state(u0, cfg_b), cfg_b, basis)
    assert np.array_equal(a.u.values, b.u.values)


def test_schemes_agree_for_additive_noise_from_rest():
    """From u=0 with a constant mode the diffusion is additive, so the
    Heun midpoint stays parallel to the increment field and both schemes
    produce the same step up to round-off."""
    cfg = small_cfg(epsilon=1.0, dt=0.01, t_final=0.01)
    basis = make_constant_basis(cfg.grid, [(0.0, 0.0, 0.7)])
    state = make_state(zero_field(cfg.grid), cfg)
    a = step_em_ito(state, cfg, basis)
    b = step_heun_strat(state, cfg, basis)
    scale = max(np.max(np.abs(a.u.values)), 1e-30)
    assert np.max(np.abs(a.u.values - b.u.values)) < 1e-12 * scale


def test_coupled_paths_share_increments():
    """Same (seed, path, step) means the same draws even across schemes."""
    cfg = small_cfg(epsilon=0.6, t_final=0.2)
    basis = build_basis(cfg.grid, cfg.noise)
    u0 = band_limited(cfg.grid, seed=5, amplitude=0.5)
    a = integrate(make_state(u0, cfg, path_id=2), cfg, basis)
    b = integrate(make_state(u0, cfg, path_id=2), cfg, basis)
    assert np.array_equal(a.u.values, b.u.values)
    c = integrate(make_state(u0, cfg, path_id=3), cfg, basis)
    assert not np.array_equal(a.u.values, c.u.values)


def test_pure_precession_conserves_l2():
    cfg = small_cfg(drift_terms=("precession",), dt=1e-3, t_final=0.5)
    basis = build_basis(cfg.grid, cfg.noise)
    u0 = gaussian_bump_field(cfg.grid, amplitude=1.0, width=3.0,
                             direction=(0.6, 0.8, 0.0))
    n0 = l2_inner(u0, u0)
    state = integrate(make_state(u0, cfg), cfg, basis)
    n1 = l2_inner(state.u, state.u)
    # second-order scheme: relative drift per unit time well under 1e-8
    assert abs(n1 - n0) / n0 < 1e-8 * cfg.t_final


def test_make_state_dealiases_and_checks_grid():
    cfg = small_cfg()
    aliased = fourier_mode_field(cfg.grid, mode=(14, 0))  # beyond n/3
    state = make_state(aliased, cfg)
    assert np.max(np.abs(state.u.values)) < 1e-13
    with pytest.raises(ParameterError, match="grid"):
        make_state(zero_field(Grid(n=16, half_width=16.0)), cfg)


def test_observer_counting():
    cfg = small_cfg(dt=1e-2, t_final=1.0, epsilon=0.2)
    basis = build_basis(cfg.grid, cfg.noise)
    counts = {1: 0, 7: 0, 10: 0}

    def bump(stride):
        def cb(state):
            counts[stride] += 1
        return cb

    obs = tuple(Observer(bump(s), stride=s) for s in counts)
    integrate(make_state(zero_field(cfg.grid), cfg), cfg, basis, observers=obs)
    assert counts[1] == 100
    assert counts[10] == 10
    assert counts[7] == 14  # steps 7, 14, ..., 98
    with pytest.raises(ParameterError):
        Observer(lambda s: None, stride=0)


def test_integrate_span_validation():
    cfg = small_cfg(dt=1e-2, t_final=0.105)
    basis = build_basis(cfg.grid, cfg.noise)
    state = make_state(zero_field(cfg.grid), cfg)
    with pytest.raises(ParameterError, match="multiple"):
        integrate(state, cfg, basis)
    import dataclasses
    done = dataclasses.replace(state, t=1.0, step_index=100)
    with pytest.raises(ParameterError, match="before"):
        integrate(done, small_cfg(t_final=0.5), basis)
    # zero distance: no-op
    cfg2 = small_cfg(t_final=0.5)
    again = integrate(dataclasses.replace(state, t=0.5, step_index=50),
                      cfg2, basis)
    assert again.step_index == 50


def test_blow_up_raises_with_time_stamp():
    cfg = small_cfg(dt=0.1, t_final=2.0)
    basis = build_basis(cfg.grid, cfg.noise)
    hot = constant_field(cfg.grid, (12.0, 0.0, 0.0))
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(BlowUpError, match="t="):
            integrate(make_state(hot, cfg), cfg, basis)


def test_single_step_richardson_order():
    """Single-step defect against a refined reference contracts at least
    linearly in dt along a fixed noise path."""
    cfg = small_cfg(epsilon=0.7, dt=1e-2)
    basis = build_basis(cfg.grid, cfg.noise)
    u0 = band_limited(cfg.grid, seed=14, amplitude=0.8)
    errs = []
    for j, h in enumerate((4e-2, 2e-2, 1e-2)):
        per_path = []
        for pid in range(4):
            table = dyadic_increment_table(
                NoiseStream(cfg.seed, pid), basis.count,
                dt_fine=h / 32.0, n_fine=32, levels=5)
            cfg_h = small_cfg(epsilon=0.7, dt=h, t_final=h)
            state = make_state(u0, cfg_h, path_id=pid)
            coarse = step_em_ito(state, cfg_h, basis,
                                 WienerIncrements(table[5][0], h))
            cfg_f = small_cfg(epsilon=0.7, dt=h / 32.0, t_final=h)
            ref = make_state(u0, cfg_f, path_id=pid)
            for m in range(32):
                ref = step_em_ito(ref, cfg_f, basis,
                                  WienerIncrements(table[0][m], h / 32.0))
            diff = coarse.u.values - ref.u.values
            per_path.append(math.sqrt(float(np.sum(diff**2))
                                      * cfg.grid.spacing**2))
        errs.append(float(np.mean(per_path)))
    assert errs[0] > errs[1] > errs[2]
    slope = math.log2(errs[0] / errs[2]) / 2.0
    assert slope > 0.9


def test_heun_em_gap_contracts_with_dt():
    """Shared driving path: the two schemes converge to the same
    (Stratonovich) limit, gap slope >= 0.4 per halving."""
    grid = Grid(n=32, half_width=16.0)
    noise = NoiseParams(modes=6, amplitude=0.25)
    basis = build_basis(grid, noise)
    u0 = band_limited(grid, seed=20, amplitude=1.0)
    T = 0.25
    n_fine = 256
    dt_fine = T / n_fine
    gaps = []
    for lvl in (3, 2, 1):  # dt = dt_fine * 2^lvl
        h = dt_fine * (1 << lvl)
        per_path = []
        for pid in range(3):
            table = dyadic_increment_table(
                NoiseStream(9, pid), basis.count, dt_fine, n_fine, levels=3)
            incr = table[lvl]
            cfg = SimConfig(grid=grid, noise=noise, epsilon=0.5, dt=h,
                            t_final=T, seed=9)
            a = make_state(u0, cfg, path_id=pid)
            b = make_state(u0, cfg, path_id=pid)
            for m in range(incr.shape[0]):
                w = WienerIncrements(incr[m], h)
                a = step_em_ito(a, cfg, basis, w)
                b = step_heun_strat(b, cfg, basis, w)
            diff = a.u.values - b.u.values
            per_path.append(math.sqrt(float(np.sum(diff**2)) * grid.spacing**2))
        gaps.append(float(np.mean(per_path)))
    assert gaps[0] > gaps[1] > gaps[2]
    assert math.log2(gaps[0] / gaps[1]) >= 0.4
    assert math.log2(gaps[1] / gaps[2]) >= 0.4


def test_run_ensemble_order_and_thread_invariance():
    cfg = small_cfg(epsilon=0.8, t_final=0.3)
    basis = build_basis(cfg.grid, cfg.noise)
    u0 = band_limited(cfg.grid, seed=2, amplitude=0.4)

    def worker(pid):
        out = integrate(make_state(u0, cfg, path_id=pid), cfg, basis)
        return out.u.values.tobytes()

    serial = run_ensemble(worker, range(6), threads=1)
    pooled = run_ensemble(worker, range(6), threads=4)
    assert serial == pooled
    assert len(set(serial)) == 6  # distinct paths actually differ


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv("LLB_THREADS", raising=False)
    assert resolve_threads() == 1
    assert resolve_threads(3) == 3
    monkeypatch.setenv("LLB_THREADS", "5")
    assert resolve_threads() == 5
    assert resolve_threads(2) == 2  # explicit flag wins
    monkeypatch.setenv("LLB_THREADS", "zero")
    with pytest.raises(ParameterError):
        resolve_threads()
    with pytest.raises(ParameterError):
        resolve_threads(0)


def test_moment_sanity_across_parameters():
    """Cheap probe that mean H1 stays finite and of comparable size across
    the (eps, delta) corners."""
    grid = Grid(n=32, half_width=16.0)
    u0 = gaussian_bump_field(grid, amplitude=1.0, width=2.0,
                             direction=(0.6, 0.0, 0.8))
    means = {}
    for eps in (0.0, 0.5, 1.0):
        for delta in (0.0, 1e-1):
            cfg = SimConfig(grid=grid, noise=NoiseParams(modes=6),
                            epsilon=eps, delta=delta, dt=0.02, t_final=2.0,
                            seed=4)
            basis = build_basis(grid, cfg.noise)
            finals = []
            for pid in range(3):
                s = integrate(make_state(u0, cfg, path_id=pid), cfg, basis)
                finals.append(norm_sq(s.u, "h1"))
            means[eps, delta] = float(np.mean(finals))
    vals = np.array(list(means.values()))
    assert np.all(np.isfinite(vals))
    assert vals.max() < 100.0
    # the viscous term only removes energy
    for eps in (0.0, 0.5, 1.0):
        assert means[eps, 1e-1] <= means[eps, 0.0] * 1.5 + 1e-6
