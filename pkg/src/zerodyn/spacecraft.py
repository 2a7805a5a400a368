"""Flexible spacecraft attitude dynamics in the block-structured class.

State ``x = [omega (3); chi (N_f); chi_dot (N_f)]``, input the 3-axis body
torque, output ``y = omega``.  The second-order equations

    I_t omega' + P chi''        = l_omega + tau
    P^T omega' + ab chi''       = l_chi

are embedded in first order with a kinematic identity row for ``chi``, giving

    M = [[I_t, 0, P], [0, I, 0], [P^T, 0, ab I]],   l = [l_omega; chi_dot; l_chi].

``P`` (3 x N_f) is the constant realization of the flexible angular momentum
coupling, so the flexible angular momentum is ``kappa_t = P chi_dot``.  A
configuration-dependent variant lets ``I_t`` and ``P`` vary linearly with
``chi_1``; it exists to exercise the mass-rate terms of the normal form.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import model as _model
from . import normalform, sim
from .errors import InvalidParams
from .geomdiff import numeric_jacobian

JSON_FIELDS = ("inertia", "coupling", "stiffness", "damping", "panel_area", "wheel_momentum", "mode_count")

DEFAULT_INERTIA = np.diag([1200.0, 800.0, 1000.0])
DEFAULT_PANEL_AREA = 3.0
DEFAULT_DAMPING_RATIO = 0.02
COUPLING_RATIO = 0.3


def skew(a):
    """Cross-product matrix: ``skew(a) @ b == cross(a, b)``."""
    return np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])


def cross(a, b):
    # scalar arithmetic on Python floats beats np.cross for length-3 vectors
    a0, a1, a2 = a.tolist()
    b0, b1, b2 = b.tolist()
    return np.array([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])


def _spd(A):
    return np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())) and np.linalg.eigvalsh(
        0.5 * (A + A.T)
    ).min() > 0


@dataclass(frozen=True, eq=False)
class SpacecraftParams:
    """Physical parameters; all arrays are copied to float on construction.

    ``inertia_gradient`` and ``coupling_gradient`` are ``dI_t/dchi_1`` and
    ``dP/dchi_1``; both zero gives the constant-configuration model.
    ``residual`` is an optional ``x -> (N_f,)`` hook for remaining nonlinear
    appendage forces.
    """

    inertia: np.ndarray
    coupling: np.ndarray
    stiffness: np.ndarray
    damping: np.ndarray
    panel_area: float
    wheel_momentum: np.ndarray
    mode_count: int
    inertia_gradient: Optional[np.ndarray] = None
    coupling_gradient: Optional[np.ndarray] = None
    residual: Optional[Callable] = field(default=None, repr=False)
    constant_configuration: bool = field(init=False, repr=False)

    def __post_init__(self):
        nf = int(self.mode_count)
        if nf < 1:
            raise InvalidParams("mode_count must be at least 1")
        conv = {
            "inertia": (3, 3),
            "coupling": (3, nf),
            "stiffness": (nf, nf),
            "damping": (nf, nf),
            "wheel_momentum": (3,),
        }
        for name, shape in conv.items():
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise InvalidParams(f"{name} must have shape {shape}, got {arr.shape}")
            object.__setattr__(self, name, arr)
        for name, shape in (("inertia_gradient", (3, 3)), ("coupling_gradient", (3, nf))):
            val = getattr(self, name)
            arr = np.zeros(shape) if val is None else np.array(val, dtype=float)
            if arr.shape != shape:
                raise InvalidParams(f"{name} must have shape {shape}, got {arr.shape}")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "mode_count", nf)
        object.__setattr__(self, "panel_area", float(self.panel_area))
        if not _spd(self.inertia):
            raise InvalidParams("inertia must be symmetric positive definite")
        if not _spd(self.stiffness):
            raise InvalidParams("stiffness must be symmetric positive definite")
        D = self.damping
        if np.any(D - np.diag(np.diag(D))) or np.any(np.diag(D) < 0):
            raise InvalidParams("damping must be diagonal with non-negative entries")
        if not self.panel_area > 0:
            raise InvalidParams("panel_area must be positive")
        if np.any(self.inertia_gradient != self.inertia_gradient.T):
            raise InvalidParams("inertia_gradient must be symmetric")
        object.__setattr__(
            self, "constant_configuration", not (np.any(self.inertia_gradient) or np.any(self.coupling_gradient))
        )

    @property
    def n(self):
        return 3 + 2 * self.mode_count


def modal_frequencies(mode_count):
    """Natural frequencies in rad/s, log-spaced over 0.5-5 Hz."""
    return 2.0 * np.pi * np.geomspace(0.5, 5.0, mode_count)


def default_coupling(mode_count, inertia=DEFAULT_INERTIA, panel_area=DEFAULT_PANEL_AREA):
    i, j = np.meshgrid(np.arange(1, 4), np.arange(1, mode_count + 1), indexing="ij")
    P = np.cos(0.7 + 1.3 * i * j)
    target = COUPLING_RATIO * np.sqrt(np.linalg.eigvalsh(inertia).min() * panel_area)
    return P * (target / np.linalg.norm(P, 2))


def default_params(mode_count=2, damping_ratio=DEFAULT_DAMPING_RATIO, **overrides):
    ab = overrides.pop("panel_area", DEFAULT_PANEL_AREA)
    inertia = np.array(overrides.pop("inertia", DEFAULT_INERTIA), dtype=float)
    w = modal_frequencies(mode_count)
    base = dict(
        inertia=inertia,
        coupling=default_coupling(mode_count, inertia, ab),
        stiffness=np.diag(w**2 * ab),
        damping=np.diag(2.0 * damping_ratio * w * ab),
        panel_area=ab,
        wheel_momentum=np.zeros(3),
        mode_count=mode_count,
    )
    base.update(overrides)
    return SpacecraftParams(**base)


def flexible_params(mode_count=2, **overrides):
    """Defaults plus a configuration-dependent inertia and coupling."""
    params = default_params(mode_count, **overrides)
    return replace(
        params,
        inertia_gradient=2.0 * params.inertia,
        coupling_gradient=4.0 * params.coupling,
    )


def params_from_dict(data, base=None):
    """Parameters from a JSON object using the documented field names.

    Missing fields fall back to :func:`default_params` for the given (or
    default) ``mode_count``.  ``damping`` may be a scalar, a diagonal list or
    a full matrix; ``stiffness`` a diagonal list or a matrix.
    """
    if not isinstance(data, dict):
        raise InvalidParams("spacecraft parameters must be a JSON object")
    unknown = set(data) - set(JSON_FIELDS)
    if unknown:
        raise InvalidParams(f"unknown spacecraft fields: {sorted(unknown)}")
    try:
        return _params_from_fields(data, base)
    except (TypeError, ValueError) as exc:
        raise InvalidParams(f"invalid spacecraft parameters: {exc}") from exc


def _params_from_fields(data, base):
    nf = int(data.get("mode_count", 2))
    base = base or default_params(nf, panel_area=float(data.get("panel_area", DEFAULT_PANEL_AREA)))
    kw = {}
    for name in JSON_FIELDS:
        if name not in data:
            continue
        val = data[name]
        if name in ("stiffness", "damping"):
            arr = np.asarray(val, dtype=float)
            if arr.ndim == 0:
                arr = np.full(nf, float(arr))
            kw[name] = np.diag(arr) if arr.ndim == 1 else arr
        elif name == "inertia":
            arr = np.asarray(val, dtype=float)
            kw[name] = np.diag(arr) if arr.ndim == 1 else arr
        else:
            kw[name] = val
    return replace(base, **kw)


# assembly ------------------------------------------------------------------------


def _split(params, x):
    nf = params.mode_count
    return x[:3], x[3 : 3 + nf], x[3 + nf :]


def inertia_at(params, chi):
    return params.inertia + chi[0] * params.inertia_gradient


def coupling_at(params, chi):
    return params.coupling + chi[0] * params.coupling_gradient


def kappa_t(params, chi_dot, chi=None):
    """Flexible angular momentum ``P chi_dot``."""
    P = params.coupling if chi is None else coupling_at(params, chi)
    return P @ np.asarray(chi_dot, dtype=float)


def mass_matrix(params, x_beta):
    nf = params.mode_count
    chi = x_beta[:nf]
    P = coupling_at(params, chi)
    M = np.zeros((params.n, params.n))
    M[:3, :3] = inertia_at(params, chi)
    M[3 : 3 + nf, 3 : 3 + nf] = np.eye(nf)
    M[3 + nf :, 3 + nf :] = params.panel_area * np.eye(nf)
    M[:3, 3 + nf :] = P
    M[3 + nf :, :3] = P.T
    return M


def mass_jacobian(params, x_beta):
    nf = params.mode_count
    dM = np.zeros((2 * nf, params.n, params.n))
    dM[0, :3, :3] = params.inertia_gradient
    dM[0, :3, 3 + nf :] = params.coupling_gradient
    dM[0, 3 + nf :, :3] = params.coupling_gradient.T
    return dM


def force_vector(params, x):
    """Generalized forces: kinetic-energy terms plus modal stiffness and damping.

    With ``H = I_t omega + P chi_dot + h_w``:

        l_omega = -I_t' omega - P' chi_dot - omega x H
        l_chi   = -K chi - D chi_dot - P'^T omega + dT/dchi + C(x)

    The primed terms and ``dT/dchi`` vanish for the constant configuration.
    """
    nf = params.mode_count
    omega, chi, chi_dot = x[:3], x[3 : 3 + nf], x[3 + nf :]
    if params.constant_configuration:
        I_t, P = params.inertia, params.coupling
    else:
        I_t, P = inertia_at(params, chi), coupling_at(params, chi)
    H = I_t @ omega + P @ chi_dot + params.wheel_momentum
    l = np.empty(params.n)
    l[:3] = -cross(omega, H)
    l[3 : 3 + nf] = chi_dot
    l[3 + nf :] = -(params.stiffness @ chi) - params.damping @ chi_dot
    if not params.constant_configuration:
        rate = chi_dot[0]
        l[:3] -= rate * (params.inertia_gradient @ omega + params.coupling_gradient @ chi_dot)
        l[3 + nf :] -= rate * (params.coupling_gradient.T @ omega)
        l[3 + nf] += 0.5 * omega @ params.inertia_gradient @ omega + omega @ params.coupling_gradient @ chi_dot
    if params.residual is not None:
        l[3 + nf :] += np.asarray(params.residual(x), dtype=float)
    return l


def _fast_force(params):
    """:func:`force_vector` with stacked operators, for ``residual=None``.

    The result matches :func:`force_vector` up to rounding.
    """
    nf, n = params.mode_count, params.n
    momentum = np.zeros((3, n))
    momentum[:, :3] = params.inertia
    momentum[:, 3 + nf :] = params.coupling
    modal = np.zeros((nf, n))
    modal[:, 3 : 3 + nf] = -params.stiffness
    modal[:, 3 + nf :] = -params.damping
    h_w = params.wheel_momentum
    if params.constant_configuration:

        def force(x):
            l = np.empty(n)
            l[:3] = cross(momentum @ x + h_w, x[:3])
            l[3 : 3 + nf] = x[3 + nf :]
            l[3 + nf :] = modal @ x
            return l

        return force

    dI, dP = params.inertia_gradient, params.coupling_gradient
    dP_T = dP.T.copy()

    def force(x):
        omega, chi_dot = x[:3], x[3 + nf :]
        a, b = dI @ omega, dP @ chi_dot
        chi1, rate = x[3], x[3 + nf]
        l = np.empty(n)
        l[:3] = cross(momentum @ x + chi1 * (a + b) + h_w, omega) - rate * (a + b)
        l[3 : 3 + nf] = chi_dot
        l[3 + nf :] = modal @ x - rate * (dP_T @ omega)
        l[3 + nf] += 0.5 * (omega @ a) + omega @ b
        return l

    return force


def admissible_box(params):
    nf = params.mode_count
    half = np.concatenate([np.full(3, 0.05), np.full(nf, 0.05), np.full(nf, 0.2)])
    return np.column_stack([-half, half])


def build(params, name="spacecraft"):
    """Assemble the first-order model with ``p = s = 3`` and ``C = I``."""
    nf = params.mode_count
    x0 = np.zeros(params.n)
    x0[3 : 3 + nf] = 0.01
    if params.constant_configuration:
        M0 = mass_matrix(params, np.zeros(2 * nf))
        M0.setflags(write=False)
        mass = lambda xb: M0  # noqa: E731
    else:
        # M is affine in chi_1
        M0, dM = mass_matrix(params, np.zeros(2 * nf)), mass_jacobian(params, np.zeros(2 * nf))[0]
        mass = lambda xb: M0 + xb[0] * dM  # noqa: E731
    if params.residual is None:
        force = _fast_force(params)
    else:
        force = lambda x: force_vector(params, x)  # noqa: E731
    return _model.SystemModel(
        name=name,
        dims=_model.Dimensions(n=params.n, p=3, s=3),
        mass_matrix=mass,
        force_vector=force,
        output_matrix=np.eye(3),
        box=admissible_box(params),
        mass_jacobian=lambda xb: mass_jacobian(params, xb),
        constant_mass=params.constant_configuration,
        x0=x0,
        info={"mode_count": nf, "params": params},
    )


@_model.register("spacecraft")
def _spacecraft_factory(data=None):
    return build(params_from_dict(data or {}))


@_model.register("spacecraft_flex")
def _flex_factory(data=None):
    data = data or {}
    base = flexible_params(int(data.get("mode_count", 2)))
    return build(params_from_dict(data, base=base), name="spacecraft_flex")


# closed forms and analysis ---------------------------------------------------------


def drift_jacobian(params, x):
    """Analytic Jacobian of the drift for the constant configuration."""
    if not params.constant_configuration or params.residual is not None:
        raise ValueError("analytic drift Jacobian only covers the constant configuration")
    nf = params.mode_count
    omega, chi, chi_dot = _split(params, x)
    P = params.coupling
    H = params.inertia @ omega + P @ chi_dot + params.wheel_momentum
    J_l = np.zeros((params.n, params.n))
    J_l[:3, :3] = skew(H) - skew(omega) @ params.inertia
    J_l[:3, 3 + nf :] = -skew(omega) @ P
    J_l[3 : 3 + nf, 3 + nf :] = np.eye(nf)
    J_l[3 + nf :, 3 : 3 + nf] = -params.stiffness
    J_l[3 + nf :, 3 + nf :] = -params.damping
    return np.linalg.solve(mass_matrix(params, chi), J_l)


def closed_form_eta(params, x):
    """``[chi; chi_dot + P^T omega / ab]``, valid for the constant configuration."""
    omega, chi, chi_dot = _split(params, np.asarray(x, dtype=float))
    return np.concatenate([chi, chi_dot + params.coupling.T @ omega / params.panel_area])


def modal_energy(params, x):
    """``0.5 ab |chi_dot|^2 + 0.5 chi^T K chi``."""
    _, chi, chi_dot = _split(params, np.asarray(x, dtype=float))
    return 0.5 * params.panel_area * chi_dot @ chi_dot + 0.5 * chi @ params.stiffness @ chi


@dataclass
class SpacecraftZeroDynamics:
    times: np.ndarray
    eta: np.ndarray
    eigenvalues: np.ndarray
    stable: bool
    schur_form_deviation: float
    schur_form_rhs_gap: float
    oracle_deviation: float


def zero_dynamics_spacecraft(params, chi0, chi_dot0, cfg, compare=True):
    """Integrate and classify the zero dynamics from ``(chi0, chi_dot0)``.

    The eigenvalues come from a central-difference linearization at the
    origin.  The Schur-complement candidate ``F22^{-1} l_beta`` is integrated
    alongside; its deviation from the closed form is reported, as is the
    deviation of the closed form from the full-system simulation.
    """
    model = build(params)
    eta0 = np.concatenate([np.asarray(chi0, dtype=float), np.asarray(chi_dot0, dtype=float)])
    times, eta = sim.integrate_zero_dynamics(model, eta0, cfg)
    A = numeric_jacobian(lambda e: normalform.zero_dynamics_rhs(model, e), np.zeros_like(eta0))
    eig = np.linalg.eigvals(A)
    eig = eig[np.lexsort((eig.imag, eig.real))]
    _, eta_schur = sim.integrate_zero_dynamics(
        model, eta0, cfg, rhs=lambda t, e: normalform.zero_dynamics_rhs_schur(model, e)
    )
    rhs_gap = float(
        np.abs(
            normalform.zero_dynamics_rhs(model, eta0) - normalform.zero_dynamics_rhs_schur(model, eta0)
        ).max()
    )
    oracle = sim.zero_dynamics_compare(model, eta0, cfg).max_deviation if compare else float("nan")
    return SpacecraftZeroDynamics(
        times=times,
        eta=eta,
        eigenvalues=eig,
        stable=bool(np.all(eig.real < 0)),
        schur_form_deviation=float(np.abs(eta - eta_schur).max()),
        schur_form_rhs_gap=rhs_gap,
        oracle_deviation=oracle,
    )
