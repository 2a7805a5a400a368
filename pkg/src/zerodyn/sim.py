"""Fixed-step RK4 simulation, feedback linearization and zero-dynamics checks."""

import csv
import math
import io
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import model as _model
from . import normalform
from ._linalg import Factorization
from .errors import IntegrationFailure, SingularDecoupling, ZeroDynError

MAX_STEPS = 10_000_000


@dataclass(frozen=True)
class IntegratorConfig:
    step: float = 1e-3
    horizon: float = 10.0
    method: str = "rk4"

    def __post_init__(self):
        if self.method != "rk4":
            raise ValueError(f"unsupported method {self.method!r}")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.horizon < self.step:
            raise ValueError("horizon must be at least one step")
        if self.horizon / self.step > MAX_STEPS:
            raise ValueError(f"horizon/step exceeds {MAX_STEPS:.0e}")

    @property
    def n_steps(self):
        return int(round(self.horizon / self.step))

    def times(self, t0=0.0):
        return t0 + self.step * np.arange(self.n_steps + 1)


def rk4_step(rhs, x, h, t=0.0):
    """One classical Runge-Kutta step of ``x' = rhs(t, x)``."""
    k1 = rhs(t, x)
    k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = rhs(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(rhs, x0, cfg, t0=0.0):
    """Integrate over ``cfg``; returns ``(times, states)`` including ``x0``."""
    times = cfg.times(t0)
    x = np.array(x0, dtype=float)
    states = np.empty((times.size, x.size))
    states[0] = x
    h = cfg.step
    for k in range(cfg.n_steps):
        t = times[k]
        try:
            x = rk4_step(rhs, x, h, t)
        except ZeroDynError as exc:
            raise IntegrationFailure(str(exc), t) from exc
        if not math.isfinite(x.sum()):
            raise IntegrationFailure("state became non-finite", times[k + 1])
        states[k + 1] = x
    return times, states


# control ---------------------------------------------------------------------


def _signal(value):
    if callable(value):
        return value
    const = np.asarray(value, dtype=float)
    return lambda t: const


def _decoupling(model, G):
    """Factor ``G_omega``, reusing the factorization when ``M`` is constant."""
    if model.constant_mass:
        fac = model._cache.get("decoupling")
        if fac is None:
            fac = model._cache["decoupling"] = Factorization(
                G[: model.p], SingularDecoupling, what="decoupling block G_omega"
            )
        return fac
    return Factorization(G[: model.p], SingularDecoupling, what="decoupling block G_omega")


def linearizing_torque(model, x, v):
    """``tau = G_w^{-1} (v - f_w)`` so that the first ``p`` rates equal ``v``."""
    f, G = _model.evaluate(model, x)
    return _decoupling(model, G).solve(np.asarray(v, dtype=float) - f[: model.p])


@dataclass(frozen=True)
class OpenLoop:
    """Prescribed input ``tau(t)``; a constant (or scalar) is accepted."""

    tau: Union[Callable, np.ndarray, float] = 0.0

    def __post_init__(self):
        object.__setattr__(self, "_fn", _signal(self.tau))

    def torque(self, model, t, x, f, G):
        return np.broadcast_to(self._fn(t), (model.p,))


@dataclass(frozen=True)
class Linearizing:
    """Feedback-linearizing input with commanded output rate ``v(t)``."""

    v: Union[Callable, np.ndarray, float] = 0.0

    def __post_init__(self):
        object.__setattr__(self, "_fn", _signal(self.v))

    def torque(self, model, t, x, f, G):
        return _decoupling(model, G).solve(self._fn(t) - f[: model.p])


def closed_loop_rhs(model, policy):
    def rhs(t, x):
        f, G = _model.evaluate(model, x)
        return f + G @ policy.torque(model, t, x, f, G)

    return rhs


# trajectories ------------------------------------------------------------------


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    zeta: np.ndarray
    eta: np.ndarray

    def header(self):
        n, p, m = self.states.shape[1], self.inputs.shape[1], self.eta.shape[1]
        return (
            ["t"]
            + [f"x_{i}" for i in range(n)]
            + [f"tau_{i}" for i in range(p)]
            + [f"zeta_{i}" for i in range(self.zeta.shape[1])]
            + [f"eta_{i}" for i in range(m)]
        )

    def to_csv(self, target=None):
        """Write (or return, when ``target`` is None) the CSV representation."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        rows = np.hstack([self.times[:, None], self.states, self.inputs, self.zeta, self.eta])
        for row in rows:
            writer.writerow([f"{v:.17g}" for v in row])
        text = buf.getvalue()
        if target is None:
            return text
        with open(target, "w", newline="") as fh:
            fh.write(text)
        return target


def simulate(model, x0, policy, cfg):
    """Integrate the closed loop and record inputs and normal coordinates.

    The policy is evaluated at every RK4 stage.  ``IntegrationFailure``
    reports the time at which the system matrix or the decoupling block
    became singular.
    """
    x0 = _model.as_state(model, x0)
    times, states = integrate(closed_loop_rhs(model, policy), x0, cfg)
    p, m = model.p, model.n - model.p
    inputs = np.empty((times.size, p))
    zeta = np.empty((times.size, p))
    eta = np.empty((times.size, m))
    for k, (t, x) in enumerate(zip(times, states)):
        try:
            f, G = _model.evaluate(model, x)
            inputs[k] = policy.torque(model, t, x, f, G)
            ns = normalform.phi(model, x)
        except ZeroDynError as exc:
            raise IntegrationFailure(str(exc), t) from exc
        zeta[k] = ns.zeta
        eta[k] = ns.eta
    return Trajectory(times=times, states=states, inputs=inputs, zeta=zeta, eta=eta)


@dataclass
class ZeroDynamicsComparison:
    times: np.ndarray
    deviations: np.ndarray
    max_deviation: float
    same_step_deviation: Optional[float]
    closed_form_eta: np.ndarray
    full: Trajectory


def integrate_zero_dynamics(model, eta0, cfg, rhs=None):
    rhs = rhs or (lambda t, e: normalform.zero_dynamics_rhs(model, e))
    return integrate(rhs, np.asarray(eta0, dtype=float), cfg)


def _stride(coarse, fine):
    stride = int(round(coarse / fine))
    if stride < 1 or abs(stride * fine - coarse) > 1e-12 * coarse:
        raise ValueError(f"step {coarse} is not a multiple of the reference step {fine}")
    return stride


def zero_dynamics_compare(model, eta0, cfg, refine=2, reference=None, same_step=False):
    """Closed-form zero dynamics against the full system under output zeroing.

    (A) integrates ``eta' = M22^{-1} l_beta`` on a grid ``refine`` times
    finer than ``cfg``; (B) simulates the full model from ``(0, eta0)`` with
    the linearizing input and ``v = 0`` at ``cfg.step`` and maps every state
    through :func:`normalform.phi`.  On the output-zeroing manifold the two
    right-hand sides coincide, so the reported deviation is the integration
    error of (B) and scales like ``step**4``.

    Parameters
    ----------
    reference : tuple, optional
        ``(step, eta)`` of a precomputed (A) run over the same horizon; its
        step must divide ``cfg.step``.  Overrides ``refine``.
    same_step : bool
        Also integrate (A) at ``cfg.step``, where only rounding separates
        the two routes, and report that gap as ``same_step_deviation``.
    """
    eta0 = np.asarray(eta0, dtype=float)
    x0 = np.concatenate([np.zeros(model.p), eta0])
    full = simulate(model, x0, Linearizing(0.0), cfg)
    if reference is None:
        fine = IntegratorConfig(step=cfg.step / refine, horizon=cfg.horizon)
        reference = (fine.step, integrate_zero_dynamics(model, eta0, fine)[1])
    ref_step, ref_eta = reference
    ref = ref_eta[:: _stride(cfg.step, ref_step)]
    if ref.shape != full.eta.shape:
        raise ValueError("reference run does not cover the requested horizon")
    same = None
    if same_step:
        _, eta_same = integrate_zero_dynamics(model, eta0, cfg)
        same = float(np.abs(full.eta - eta_same).max())
    deviations = np.abs(full.eta - ref).max(axis=1)
    return ZeroDynamicsComparison(
        times=full.times,
        deviations=deviations,
        max_deviation=float(deviations.max()),
        same_step_deviation=same,
        closed_form_eta=ref,
        full=full,
    )


@dataclass
class OrderCheck:
    coarse: ZeroDynamicsComparison
    fine: ZeroDynamicsComparison

    @property
    def ratio(self):
        if self.fine.max_deviation == 0.0:
            return float("inf")
        return self.coarse.max_deviation / self.fine.max_deviation


def zero_dynamics_order_check(model, eta0, cfg, refine=4):
    """Compare at ``cfg.step`` and at half of it against one shared reference.

    The reference runs (A) at ``cfg.step / refine``; ``refine`` must be even.
    With a fourth-order method the deviation ratio tends to
    ``(1 - refine**-4) / (2**-4 - refine**-4)``, i.e. 17
    for ``refine = 4``.
    """
    if refine < 2 or refine % 2:
        raise ValueError("refine must be an even integer >= 2")
    eta0 = np.asarray(eta0, dtype=float)
    fine_cfg = IntegratorConfig(step=cfg.step / refine, horizon=cfg.horizon)
    reference = (fine_cfg.step, integrate_zero_dynamics(model, eta0, fine_cfg)[1])
    half = IntegratorConfig(step=cfg.step / 2, horizon=cfg.horizon)
    return OrderCheck(
        coarse=zero_dynamics_compare(model, eta0, cfg, reference=reference),
        fine=zero_dynamics_compare(model, eta0, half, reference=reference),
    )


@dataclass
class RateConsistency:
    indices: np.ndarray
    difference_gap: float
    path_gap: float


def rate_consistency(model, traj, stride=10):
    """Check the block formula for ``eta'`` along a recorded trajectory.

    At every ``stride``-th interior sample the block-formula rate is compared
    with the fourth-order centered difference
    ``(8 (eta[k+1] - eta[k-1]) - (eta[k+2] - eta[k-2])) / (12 h)`` of the
    recorded ``eta`` series and with the direct ``X^T x' + X'^T x`` route.
    """
    eta = traj.eta
    h = traj.times[1] - traj.times[0]
    idx = np.arange(2, len(traj.times) - 2, stride)
    fd = (8.0 * (eta[idx + 1] - eta[idx - 1]) - (eta[idx + 2] - eta[idx - 2])) / (12.0 * h)
    fd_gap = path_gap = 0.0
    for row, k in enumerate(idx):
        x, tau = traj.states[k], traj.inputs[k]
        rate = normalform.eta_dot(model, x, tau).eta_dot
        fd_gap = max(fd_gap, float(np.abs(rate - fd[row]).max()))
        path_gap = max(path_gap, float(np.abs(rate - normalform.eta_dot_raw(model, x, tau)).max()))
    return RateConsistency(indices=idx, difference_gap=fd_gap, path_gap=path_gap)
