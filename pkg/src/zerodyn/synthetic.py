"""Synthetic models and fixtures.

The generic ``synthetic`` entry accepts the JSON schema

    {"n": int, "p": int, "s": int (optional, default p),
     "mass": {"kind": "constant" | "spd_random" | "coupled_demo", ...},
     "box": [[lo, hi], ...] (optional)}

``constant`` takes an optional ``matrix``; ``spd_random`` takes ``seed`` and
``coupling`` (off-diagonal block scale); ``coupled_demo`` needs ``n - p``
even and builds a mechanical system with configuration-dependent ``M``.
The remaining registered names are fixed fixtures used by the test and
verification suites, including ones that deliberately violate assumptions.
"""

import copy

import numpy as np

from . import model as _model
from .errors import InvalidParams

CUBIC = 0.1


def _stiffness(n):
    return np.diag(np.linspace(1.0, 2.0, n)) + 0.1 * (np.ones((n, n)) - np.eye(n))


def _generic_force(n, p):
    S = _stiffness(n)

    def force(x):
        l = -S @ x - CUBIC * x**3
        l[p:] += 0.05 * x[0] * x[p:]
        return l

    return force


def _box(config, n, default=1.0):
    if config is None:
        return np.column_stack([-np.full(n, default), np.full(n, default)])
    box = np.asarray(config, dtype=float)
    if box.shape != (n, 2):
        raise InvalidParams(f"box must have {n} [lo, hi] rows")
    return box


def _constant_mass(n, p, mass):
    if "matrix" in mass:
        M = np.asarray(mass["matrix"], dtype=float)
        if M.shape != (n, n):
            raise InvalidParams(f"mass matrix must be {n}x{n}")
        return M
    M = np.zeros((n, n))
    M[:p, :p] = np.eye(p) * 2.0 + 0.3 * (np.ones((p, p)) - np.eye(p))
    m = n - p
    M[p:, p:] = np.diag(np.linspace(3.0, 1.0, m)) + 0.2 * (np.eye(m, k=1) + np.eye(m, k=-1))
    return M


def _random_spd(n, p, mass):
    rng = np.random.default_rng(int(mass.get("seed", 0)))
    A = rng.standard_normal((n, n))
    M = A @ A.T / n + np.eye(n)
    # convex blend with the block diagonal keeps M positive definite
    c = float(mass.get("coupling", 1.0))
    if not 0.0 <= c <= 1.0:
        raise InvalidParams("spd_random coupling must lie in [0, 1]")
    M[:p, p:] *= c
    M[p:, :p] *= c
    return M


def _coupled_demo(n, p, box, s, name):
    """Mechanical system ``x = [v (p); q (m); w (m)]`` with ``M = M(q)``."""
    m = (n - p) // 2
    if p + 2 * m != n:
        raise InvalidParams("coupled_demo needs n - p even")
    i = np.arange(p)[:, None]
    j = np.arange(m)[None, :]
    B0 = 0.3 * np.cos(i + 2.0 * j)
    B1 = 0.2 * np.sin(1.0 + i + j)
    M11_0 = np.diag(2.0 + 0.5 * np.arange(p))
    E11 = 0.1 * np.ones((p, p))
    M33_0 = np.diag(1.5 + 0.2 * np.arange(m))
    O33 = 0.1 * (np.ones((m, m)) - np.eye(m))
    K = np.diag(1.0 + np.arange(m))
    D = 0.2 * np.eye(m)
    sl_v, sl_q, sl_w = slice(0, p), slice(p, p + m), slice(p + m, n)

    def mass(xb):
        q = xb[:m]
        M = np.zeros((n, n))
        M[sl_v, sl_v] = M11_0 + np.sin(q[0]) * E11
        B = B0 + q[0] * B1
        M[sl_v, sl_w] = B
        M[sl_w, sl_v] = B.T
        M[sl_q, sl_q] = np.eye(m)
        M[sl_w, sl_w] = M33_0 + 0.2 * q[-1] ** 2 * np.eye(m) + q[0] * O33
        return M

    def mass_jac(xb):
        q = xb[:m]
        dM = np.zeros((n - p, n, n))
        dM[0][sl_v, sl_v] = np.cos(q[0]) * E11
        dM[0][sl_v, sl_w] = B1
        dM[0][sl_w, sl_v] = B1.T
        dM[0][sl_w, sl_w] += O33
        dM[m - 1][sl_w, sl_w] += 0.4 * q[-1] * np.eye(m)
        return dM

    def force(x):
        v, q, w = x[sl_v], x[sl_q], x[sl_w]
        l_v = -0.5 * v - 0.1 * v * (w @ w)
        l_w = -K @ q - D @ w - 0.2 * q**3 + 0.1 * v[0] * w
        return np.concatenate([l_v, w, l_w])

    return _model.SystemModel(
        name=name,
        dims=_model.Dimensions(n, p, s),
        mass_matrix=mass,
        force_vector=force,
        output_matrix=np.eye(s),
        box=box,
        mass_jacobian=mass_jac,
        x0=np.concatenate([np.zeros(p), np.full(m, 0.2), np.zeros(m)]),
        info={"kind": "coupled_demo"},
    )


def from_schema(config, name="synthetic"):
    """Build a model from the synthetic-model JSON schema."""
    if not isinstance(config, dict):
        raise InvalidParams("synthetic parameters must be a JSON object")
    try:
        n, p = int(config["n"]), int(config["p"])
        mass = dict(config["mass"])
        kind = mass["kind"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidParams(f"synthetic schema needs n, p and mass.kind: {exc}") from exc
    s = int(config.get("s", p))
    box = _box(config.get("box"), n, 0.5 if kind == "coupled_demo" else 1.0)
    if kind == "coupled_demo":
        return _coupled_demo(n, p, box, s, name)
    if kind == "constant":
        M = _constant_mass(n, p, mass)
    elif kind == "spd_random":
        M = _random_spd(n, p, mass)
    else:
        raise InvalidParams(f"unknown mass kind {kind!r}")
    M.setflags(write=False)
    return _model.SystemModel(
        name=name,
        dims=_model.Dimensions(n, p, s),
        mass_matrix=lambda xb: M,
        force_vector=_generic_force(n, p),
        output_matrix=np.eye(s),
        box=box,
        constant_mass=True,
        x0=np.concatenate([np.zeros(p), np.full(n - p, 0.1)]),
        info={"kind": kind},
    )


PRESETS = {
    "decoupled": {"n": 5, "p": 2, "mass": {"kind": "constant"}},
    "dense_spd": {"n": 6, "p": 2, "mass": {"kind": "spd_random", "seed": 7}},
    "coupled_demo": {"n": 6, "p": 2, "mass": {"kind": "coupled_demo"}},
}

for _name, _defaults in PRESETS.items():
    _model.register(_name)(
        lambda data=None, _defaults=_defaults, _name=_name: from_schema({**copy.deepcopy(_defaults), **(data or {})}, _name)
    )


@_model.register("synthetic")
def _synthetic_factory(data=None):
    if not data:
        raise InvalidParams("the synthetic model needs a params file (n, p, mass.kind)")
    return from_schema(data)


@_model.register("nonholonomic_demo")
def nonholonomic_demo(data=None):
    """``n = 3, p = 2`` with ``M^{-1} = [[I, u], [u^T, 1 + u^T u]]``.

    The input fields are ``g_1 = (1, 0, a)`` and ``g_2 = (0, 1, b(x_3))``
    with ``a = 0.3`` and ``b = 0.3 x_3``, whose bracket ``(0, 0, a b')`` is
    never in their span.
    """

    def mass(xb):
        u = np.array([0.3, 0.3 * xb[0]])
        M = np.eye(3)
        M[:2, :2] += np.outer(u, u)
        M[:2, 2] = -u
        M[2, :2] = -u
        return M

    return _model.SystemModel(
        name="nonholonomic_demo",
        dims=_model.Dimensions(3, 2, 2),
        mass_matrix=mass,
        force_vector=lambda x: -np.asarray(x, dtype=float),
        output_matrix=np.eye(2),
        box=_box(None, 3),
    )


@_model.register("double_integrator")
def double_integrator(data=None):
    """``x1' = x2, x2' = tau``: ``M = [[0, 1], [1, 0]]``, ``l = (0, x2)``."""
    M = np.array([[0.0, 1.0], [1.0, 0.0]])
    return _model.SystemModel(
        name="double_integrator",
        dims=_model.Dimensions(2, 1, 1),
        mass_matrix=lambda xb: M,
        force_vector=lambda x: np.array([0.0, x[1]]),
        output_matrix=np.eye(1),
        box=_box(None, 2),
        constant_mass=True,
    )


@_model.register("asymmetric_demo")
def asymmetric_demo(data=None):
    """Deliberately non-symmetric system matrix; must fail verification."""
    M = np.array([[2.0, 0.5, 0.0], [0.4, 2.0, 0.0], [0.0, 0.0, 1.0]])
    return _model.SystemModel(
        name="asymmetric_demo",
        dims=_model.Dimensions(3, 1, 1),
        mass_matrix=lambda xb: M,
        force_vector=lambda x: -np.asarray(x, dtype=float),
        output_matrix=np.eye(1),
        box=_box(None, 3),
        constant_mass=True,
    )
