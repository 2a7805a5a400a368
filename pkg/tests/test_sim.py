import numpy as np
import pytest

from zerodyn import model, normalform, sim
from zerodyn import spacecraft as sc
from zerodyn.errors import IntegrationFailure, SingularDecoupling

from conftest import make_model


def test_config_validation():
    with pytest.raises(ValueError):
        sim.IntegratorConfig(step=0.0)
    with pytest.raises(ValueError):
        sim.IntegratorConfig(step=1.0, horizon=0.5)
    with pytest.raises(ValueError):
        sim.IntegratorConfig(step=1e-8, horizon=1.0)
    with pytest.raises(ValueError):
        sim.IntegratorConfig(method="euler")
    cfg = sim.IntegratorConfig(step=0.25, horizon=1.0)
    assert cfg.n_steps == 4
    np.testing.assert_array_equal(cfg.times(), [0, 0.25, 0.5, 0.75, 1.0])


def test_rk4_zero_rhs():
    x = np.array([1.0, -2.0])
    np.testing.assert_array_equal(sim.rk4_step(lambda t, z: np.zeros(2), x, 0.1), x)


def test_rk4_exponential_step():
    h = 0.1
    got = sim.rk4_step(lambda t, z: z, np.array([2.0]), h)
    assert got[0] == pytest.approx(2.0 * (1 + h + h**2 / 2 + h**3 / 6 + h**4 / 24), rel=1e-15)


def test_rk4_harmonic_energy_drift():
    cfg = sim.IntegratorConfig(step=1e-3, horizon=10.0)
    _, X = sim.integrate(lambda t, z: np.array([z[1], -z[0]]), np.array([1.0, 0.0]), cfg)
    energy = 0.5 * (X**2).sum(axis=1)
    assert np.abs(energy / energy[0] - 1).max() <= 1e-8
    # and the trajectory itself against cos/sin
    t = cfg.times()
    assert np.abs(X[:, 0] - np.cos(t)).max() <= 1e-10


def test_linearizing_torque_at_equilibrium():
    m = model.get_model("spacecraft")
    np.testing.assert_array_equal(sim.linearizing_torque(m, np.zeros(7), np.zeros(3)), 0.0)


@pytest.mark.parametrize("name", ["spacecraft", "spacecraft_flex", "dense_spd", "coupled_demo"])
def test_linearizing_identity(name, rng):
    m = model.get_model(name)
    for x in model.sample_states(m, rng, 50):
        v = rng.standard_normal(m.p)
        tau = sim.linearizing_torque(m, x, v)
        assert np.abs(model.dynamics(m, x, tau)[: m.p] - v).max() <= 1e-9


def test_linearizing_zero_v_spacecraft(rng):
    m = model.get_model("spacecraft")
    for x in model.sample_states(m, rng, 20):
        tau = sim.linearizing_torque(m, x, np.zeros(3))
        assert np.abs(model.dynamics(m, x, tau)[:3]).max() <= 1e-9


def test_singular_decoupling():
    # G_alpha = 0: the first p rows of M^{-1}[:, :p] vanish
    M = np.array([[0.0, 1.0], [1.0, 0.0]])
    m = make_model(M, lambda x: np.array([0.0, x[1]]), 2, 1)
    with pytest.raises(SingularDecoupling):
        sim.linearizing_torque(m, np.zeros(2), np.zeros(1))


def test_simulate_equilibrium_is_constant():
    m = model.get_model("dense_spd")
    traj = sim.simulate(m, np.zeros(m.n), sim.OpenLoop(0.0), sim.IntegratorConfig(step=1e-2, horizon=1.0))
    np.testing.assert_array_equal(traj.states, 0.0)
    np.testing.assert_array_equal(traj.inputs, 0.0)


def test_simulate_linearizing_holds_omega():
    m = model.get_model("spacecraft")
    x0 = np.array([0.01, -0.02, 0.005, 0.01, 0.0, 0.0, 0.0])
    traj = sim.simulate(m, x0, sim.Linearizing(0.0), sim.IntegratorConfig(step=1e-3, horizon=1.0))
    assert np.abs(traj.states[:, :3] - x0[:3]).max() <= 1e-12


def test_simulate_on_manifold_omega_stays_zero():
    params = sc.default_params(2)
    m = sc.build(params)
    x0 = np.array([0.0, 0.0, 0.0, 0.01, -0.005, 0.0, 0.0])
    traj = sim.simulate(m, x0, sim.Linearizing(0.0), sim.IntegratorConfig(step=1e-3, horizon=10.0))
    assert np.abs(traj.states[:, :3]).max() <= 1e-9
    assert np.abs(traj.states[-1, 3:] - x0[3:]).max() > 1e-3
    energy = np.array([sc.modal_energy(params, x) for x in traj.states])
    assert np.all(np.diff(energy) <= 1e-12 * energy[0])


def test_simulate_records_normal_coordinates(rng):
    m = model.get_model("spacecraft_flex")
    x0 = model.sample_states(m, rng, 1)[0] * 0.2
    traj = sim.simulate(m, x0, sim.OpenLoop(lambda t: np.full(3, np.cos(t))), sim.IntegratorConfig(1e-2, 0.5))
    for k in (0, 10, 50):
        ns = normalform.phi(m, traj.states[k])
        np.testing.assert_array_equal(traj.eta[k], ns.eta)
        np.testing.assert_array_equal(traj.zeta[k], ns.zeta)
        np.testing.assert_array_equal(traj.inputs[k], np.full(3, np.cos(traj.times[k])))


def test_simulate_integration_failure_reports_time():
    # x_beta' = 1 drives M22 = 1 - x_beta through zero at t = 0.1
    def mass(xb):
        return np.diag([1.0, 1.0 - xb[0]])

    m = make_model(mass, lambda x: np.array([0.0, 1.0 - x[1]]), 2, 1, constant=False)
    with pytest.raises(IntegrationFailure) as info:
        sim.simulate(m, np.array([0.0, 0.9]), sim.OpenLoop(0.0), sim.IntegratorConfig(step=1e-3, horizon=1.0))
    assert info.value.time == pytest.approx(0.1, abs=2e-3)


def test_csv_format():
    m = model.get_model("spacecraft")
    traj = sim.simulate(m, m.x0, sim.Linearizing(0.0), sim.IntegratorConfig(step=0.1, horizon=0.3))
    text = traj.to_csv()
    lines = text.split("\n")
    assert lines[0] == ",".join(
        ["t"] + [f"x_{i}" for i in range(7)] + [f"tau_{i}" for i in range(3)]
        + [f"zeta_{i}" for i in range(3)] + [f"eta_{i}" for i in range(4)]
    )
    assert "\r" not in text and text.endswith("\n") and len(lines) == 6
    row = np.array([float(v) for v in lines[2].split(",")])
    np.testing.assert_array_equal(row[1:8], traj.states[1])
    np.testing.assert_array_equal(row[8:11], traj.inputs[1])


def test_zero_dynamics_compare_equilibrium():
    m = model.get_model("spacecraft")
    cmp = sim.zero_dynamics_compare(m, np.zeros(4), sim.IntegratorConfig(step=1e-2, horizon=1.0))
    assert cmp.max_deviation == 0.0


def test_zero_dynamics_compare_constant_mass_synthetic():
    m = model.get_model("decoupled")
    cmp = sim.zero_dynamics_compare(m, m.x0[m.p:], sim.IntegratorConfig(step=1e-3, horizon=10.0), same_step=True)
    assert cmp.max_deviation <= 1e-8
    assert cmp.same_step_deviation <= 1e-14


def test_zero_dynamics_compare_spacecraft():
    m = model.get_model("spacecraft")
    cmp = sim.zero_dynamics_compare(m, np.array([0.005, 0.005, 0.0, 0.0]), sim.IntegratorConfig(1e-3, 10.0))
    assert cmp.max_deviation <= 1e-6
    assert np.abs(cmp.full.states[:, :3]).max() <= 1e-9


def test_zero_dynamics_compare_state_dependent_mass():
    m = model.get_model("coupled_demo")
    cmp = sim.zero_dynamics_compare(m, m.x0[m.p:], sim.IntegratorConfig(1e-3, 2.0))
    assert cmp.max_deviation <= 1e-6


def test_zero_dynamics_compare_reference_validation():
    m = model.get_model("decoupled")
    cfg = sim.IntegratorConfig(1e-2, 1.0)
    with pytest.raises(ValueError):
        sim.zero_dynamics_compare(m, m.x0[m.p:], cfg, reference=(3e-3, np.zeros((334, 3))))


def test_order_check_ratio():
    m = model.get_model("coupled_demo")
    oc = sim.zero_dynamics_order_check(m, m.x0[m.p:], sim.IntegratorConfig(2e-2, 2.0))
    # a fourth-order method against a reference at a quarter step gives 17
    assert 12.0 <= oc.ratio <= 20.0


def test_rate_consistency_along_trajectory():
    m = model.get_model("spacecraft")
    x0 = np.array([0.01, -0.008, 0.006, 0.002, -1e-3, 0.01, -0.005])
    policy = sim.OpenLoop(lambda t: np.array([0.4, -0.3, 0.2]) * np.sin(0.7 * t))
    traj = sim.simulate(m, x0, policy, sim.IntegratorConfig(1e-3, 2.0))
    rc = sim.rate_consistency(m, traj, stride=20)
    assert rc.difference_gap <= 5e-7
    assert rc.path_gap <= 1e-8
