"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import time

import numpy as np
import pytest

from zerodyn import blocklin, cli, geomdiff, model, normalform, sim
from zerodyn import spacecraft as sc

from conftest import random_spd

SEED = 42
SYNTHETIC = ["decoupled", "dense_spd", "coupled_demo"]


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
        assert ok, f"criterion {number} ({title}) failed: {detail}"

    return emit


def test_c01_null_space_identity(verdict):
    models = [sc.build(sc.default_params(nf)) for nf in (1, 2, 4, 8)] + [model.get_model(n) for n in SYNTHETIC]
    rng = np.random.default_rng(SEED)
    start = time.perf_counter()
    worst = 0.0
    for m in models:
        for x in model.sample_states(m, rng, 1000):
            X = blocklin.null_basis(blocklin.decompose(m.mass_matrix(x[m.p:]), m.p)).X
            worst = max(worst, np.abs(model.input_columns(m, x).T @ X).max())
    elapsed = time.perf_counter() - start
    verdict(1, "G^T X = 0", worst <= 1e-10 and elapsed <= 5.0,
            f"max |G^T X| = {worst:.3e} (<= 1e-10) over 7 models x 1000 states in {elapsed:.2f} s (<= 5 s)")


def test_c02_block_inverse(verdict):
    rng = np.random.default_rng(SEED)
    start = time.perf_counter()
    worst, used = 0.0, 0
    while used < 1000:
        n = int(rng.integers(2, 11))
        p = int(rng.integers(1, n))
        M = random_spd(rng, n, scale=10.0 ** rng.uniform(-2, 2))
        if np.linalg.cond(M) > 1e6:
            continue
        used += 1
        B = blocklin.block_inverse(blocklin.decompose(M, p))
        worst = max(worst, np.abs(B @ M - np.eye(n)).max())
    elapsed = time.perf_counter() - start
    verdict(2, "block inverse", worst <= 1e-11 and elapsed <= 5.0,
            f"max |B M - I| = {worst:.3e} (<= 1e-11) over {used} samples in {elapsed:.2f} s (<= 5 s)")


def test_c03_tau_independence(verdict):
    rng = np.random.default_rng(SEED)
    names = ["spacecraft", "spacecraft_flex"] + SYNTHETIC
    worst = 0.0
    for i in range(1000):
        m = model.get_model(names[i % len(names)])
        x = model.sample_states(m, rng, 1)[0]
        t1, t2 = 10.0 * rng.standard_normal((2, m.p))
        a = normalform.eta_dot(m, x, t1).eta_dot
        b = normalform.eta_dot(m, x, t2).eta_dot
        worst = max(worst, np.abs(a - b).max())
    verdict(3, "tau-independence of eta'", worst <= 1e-10,
            f"max |eta'(x, t1) - eta'(x, t2)| = {worst:.3e} (<= 1e-10) over 1000 draws")


def test_c04_normal_form_consistency(verdict):
    rng = np.random.default_rng(SEED)
    cfg = sim.IntegratorConfig(step=1e-3, horizon=10.0)
    fd_gap = path_gap = 0.0
    for i in range(10):
        m = model.get_model("spacecraft" if i < 5 else "spacecraft_flex")
        x0 = np.concatenate([0.01 * rng.uniform(-1, 1, 3), 0.002 * rng.uniform(-1, 1, 2),
                             0.01 * rng.uniform(-1, 1, 2)])
        amp, freq = 0.05 * rng.uniform(-1, 1, 3), rng.uniform(0.2, 1.0)
        traj = sim.simulate(m, x0, sim.OpenLoop(lambda t, a=amp, w=freq: a * np.sin(w * t)), cfg)
        rc = sim.rate_consistency(m, traj, stride=10)
        fd_gap, path_gap = max(fd_gap, rc.difference_gap), max(path_gap, rc.path_gap)
    ok = fd_gap <= 5e-7 and path_gap <= 1e-8
    verdict(4, "normal-form consistency", ok,
            f"block formula vs centered difference {fd_gap:.3e} (<= 5e-7), "
            f"block formula vs direct route {path_gap:.3e} (<= 1e-8), 10 trajectories")


def test_c05_zero_dynamics_oracle(verdict):
    m = sc.build(sc.default_params(2))
    start = time.perf_counter()
    oc = sim.zero_dynamics_order_check(m, np.array([0.005, 0.005, 0.0, 0.0]), sim.IntegratorConfig(1e-3, 10.0))
    elapsed = time.perf_counter() - start
    dev = oc.coarse.max_deviation
    ok = dev <= 1e-6 and oc.ratio >= 8.0 and elapsed <= 10.0
    verdict(5, "zero-dynamics oracle", ok,
            f"max deviation {dev:.3e} (<= 1e-6) at h = 1e-3, {oc.fine.max_deviation:.3e} at h/2, "
            f"ratio {oc.ratio:.2f} (>= 8), {elapsed:.2f} s (<= 10 s)")


def test_c06_stability(verdict):
    cfg = sim.IntegratorConfig(1e-2, 0.1)
    worst_real = -np.inf
    for nf in (1, 2, 4, 8):
        zd = sc.zero_dynamics_spacecraft(sc.default_params(nf), np.zeros(nf), np.zeros(nf), cfg, compare=False)
        worst_real = max(worst_real, zd.eigenvalues.real.max())
    p1 = sc.default_params(1)
    zd1 = sc.zero_dynamics_spacecraft(p1, [0.0], [0.0], cfg, compare=False)
    oracle = np.roots([p1.panel_area, p1.damping[0, 0], p1.stiffness[0, 0]])
    quad_gap = np.abs(np.sort_complex(zd1.eigenvalues) - np.sort_complex(oracle)).max()
    undamped = sc.default_params(4, damping=np.zeros((4, 4)))
    zd0 = sc.zero_dynamics_spacecraft(undamped, np.zeros(4), np.zeros(4), cfg, compare=False)
    axis_gap = np.abs(zd0.eigenvalues.real).max()
    ok = worst_real < 0 and quad_gap <= 1e-8 and axis_gap <= 1e-8
    verdict(6, "zero-dynamics stability", ok,
            f"max Re(lambda) with d > 0: {worst_real:.3e} (< 0); N_f = 1 quadratic-root gap {quad_gap:.3e} "
            f"(<= 1e-8); |Re(lambda)| with d = 0: {axis_gap:.3e} (<= 1e-8)")


def test_c07_involutivity(verdict):
    def run(name, count):
        m = model.get_model(name)
        pts = model.sample_states(m, np.random.default_rng(SEED), count)
        return geomdiff.involutivity_check(m, pts)

    sc1, sc2 = run("spacecraft", 100), run("spacecraft", 100)
    nh1, nh2 = run("nonholonomic_demo", 100), run("nonholonomic_demo", 100)
    ok = sc1.involutive and not nh1.involutive and sc1 == sc2 and nh1 == nh2
    verdict(7, "involutivity discrimination", ok,
            f"spacecraft involutive={sc1.involutive} on {sc1.points} states; nonholonomic demo "
            f"involutive={nh1.involutive} (rank excess {nh1.worst_rank_excess}); repeat runs identical")


def test_c08_relative_degree(verdict):
    m = model.get_model("spacecraft")
    probes = geomdiff.probe_points(m, np.random.default_rng(SEED))
    reps = [geomdiff.relative_degree(m, x) for x in probes]
    sc_ok = all(r.r_i == (1, 1, 1) and r.r == 3 and np.linalg.matrix_rank(r.E) == 3 for r in reps)
    di = geomdiff.relative_degree(model.get_model("double_integrator"), np.array([0.3, -0.2]))
    ok = sc_ok and di.r == 2
    verdict(8, "relative degree", ok,
            f"spacecraft r_i = {reps[0].r_i}, r = {reps[0].r}, rank E = 3 at {len(probes)} probes: {sc_ok}; "
            f"double integrator r = {di.r}")


@pytest.fixture(scope="module")
def verify_runs(tmp_path_factory):
    # both runs target the same directory so the reports can be compared byte for byte
    d = tmp_path_factory.mktemp("verify")
    out = []
    for _ in range(2):
        start = time.perf_counter()
        code = cli.cmd_verify(cli.RunConfig(model="spacecraft", seed=SEED, samples=1000, output_dir=str(d)))
        out.append((code, (d / "verify.json").read_bytes(), time.perf_counter() - start))
    return out


def test_c09_determinism(verdict, verify_runs):
    (c1, b1, _), (c2, b2, _) = verify_runs
    ok = c1 == c2 == 0 and b1 == b2
    verdict(9, "determinism", ok, f"two verify runs with seed {SEED}: exit codes {c1}/{c2}, "
            f"reports byte-identical: {b1 == b2} ({len(b1)} bytes)")


def test_c10_verify_runtime(verdict, verify_runs):
    code, _, elapsed = verify_runs[0]
    verdict(10, "verify runtime", code == 0 and elapsed <= 60.0,
            f"spacecraft verify with 1000 samples took {elapsed:.1f} s (<= 60 s), exit code {code}")
