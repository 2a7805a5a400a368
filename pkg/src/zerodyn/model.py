"""Systems of the form ``x' = M(x_beta)^{-1} l(x) + G(x) tau``.

A :class:`SystemModel` is an immutable bundle of evaluable maps.  The state is
split at index ``p``: the first ``p`` entries (``x_alpha``) are the actuated
coordinates, the remaining ``n - p`` (``x_beta``) are the only ones the system
matrix may depend on.  The input matrix is always the first ``p`` columns of
``M^{-1}``, so a model never specifies ``G`` directly.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._linalg import Factorization
from .errors import DimensionMismatch, EvaluationFailure, InvalidParams, SingularMass


@dataclass(frozen=True)
class Dimensions:
    n: int
    p: int
    s: int

    def __post_init__(self):
        n, p, s = self.n, self.p, self.s
        if p < 1 or n - p < 1:
            raise InvalidParams(f"need 1 <= p < n, got n={n}, p={p}")
        if not p <= s <= n - 1:
            raise InvalidParams(f"need p <= s <= n - 1, got n={n}, p={p}, s={s}")


@dataclass(frozen=True)
class StateVector:
    """A state with its actuated/unactuated partition at index ``p``."""

    x: np.ndarray
    p: int

    def alpha(self):
        return self.x[: self.p]

    def beta(self):
        return self.x[self.p:]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.x, dtype=dtype)


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Evaluable description of one system.

    Parameters
    ----------
    name : str
        Registry name, echoed in reports.
    dims : Dimensions
    mass_matrix : callable
        ``x_beta -> M``, an ``n x n`` symmetric matrix.
    force_vector : callable
        ``x -> l``, length ``n``.
    output_matrix : ndarray
        Nonsingular ``s x s`` matrix ``C``; outputs are ``C @ x[:s]``.
    box : ndarray
        ``(n, 2)`` per-coordinate sampling interval where the model's
        assumptions are expected to hold.
    mass_jacobian : callable, optional
        ``x_beta -> dM/dx_beta`` of shape ``(n - p, n, n)``.  Central
        differences are used when absent.
    constant_mass : bool
        Declares that ``M`` does not depend on the state, which lets the
        factorization be reused.
    """

    name: str
    dims: Dimensions
    mass_matrix: Callable[[np.ndarray], np.ndarray]
    force_vector: Callable[[np.ndarray], np.ndarray]
    output_matrix: np.ndarray
    box: np.ndarray
    mass_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    constant_mass: bool = False
    x0: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n, s = self.dims.n, self.dims.s
        C = np.asarray(self.output_matrix, dtype=float)
        if C.shape != (s, s):
            raise InvalidParams(f"output matrix must be {s}x{s}, got {C.shape}")
        if np.linalg.matrix_rank(C) < s:
            raise InvalidParams("output matrix must be nonsingular")
        box = np.asarray(self.box, dtype=float)
        if box.shape != (n, 2) or np.any(box[:, 0] > box[:, 1]):
            raise InvalidParams(f"box must be an (n, 2) array of [lo, hi] rows, got {box.shape}")
        object.__setattr__(self, "output_matrix", C)
        object.__setattr__(self, "box", box)
        x0 = np.zeros(n) if self.x0 is None else np.asarray(self.x0, dtype=float)
        object.__setattr__(self, "x0", x0)

    @property
    def n(self):
        return self.dims.n

    @property
    def p(self):
        return self.dims.p

    def split(self, x):
        x = as_state(self, x)
        return x[: self.p], x[self.p:]

    def mass_matrix_jacobian(self, x_beta):
        """Partials of ``M`` with respect to each ``x_beta`` coordinate, ``(n-p, n, n)``."""
        x_beta = np.asarray(x_beta, dtype=float)
        if self.constant_mass:
            return np.zeros((self.n - self.p, self.n, self.n))
        if self.mass_jacobian is not None:
            return np.asarray(self.mass_jacobian(x_beta), dtype=float)
        from .geomdiff import numeric_jacobian

        return np.moveaxis(numeric_jacobian(self.mass_matrix, x_beta), -1, 0)

    def factorization(self, x_beta):
        if self.constant_mass and "mass" in self._cache:
            return self._cache["mass"]
        M = np.asarray(self.mass_matrix(x_beta), dtype=float)
        fac = Factorization(M, SingularMass, what=f"system matrix of {self.name!r}")
        if self.constant_mass:
            self._cache["mass"] = fac
        return fac

    def outputs(self, x):
        x = as_state(self, x)
        return self.output_matrix @ x[: self.dims.s]

    def output_functions(self):
        """One scalar callable per output channel."""
        s = self.dims.s
        return [lambda x, row=row: float(row @ np.asarray(x)[:s]) for row in self.output_matrix]


def as_state(model, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n,):
        raise DimensionMismatch(f"{model.name}: state must have length {model.n}, got shape {x.shape}")
    return x


def _force(model, x):
    l = np.asarray(model.force_vector(x), dtype=float)
    # a non-finite sum flags any inf/nan entry in one reduction
    if l.shape != (model.n,) or not math.isfinite(l.sum()):
        raise EvaluationFailure(f"{model.name}: force vector invalid at x={x}")
    return l


def evaluate(model, x):
    """Return ``(f, G)`` from a single factorization of ``M(x_beta)``."""
    x = as_state(model, x)
    n, p = model.n, model.p
    fac = model.factorization(x[p:])
    if model.constant_mass:
        G = model._cache.get("inputs")
        if G is None:
            G = model._cache["inputs"] = input_columns(model, x)
            G.setflags(write=False)
        return fac.solve(_force(model, x)), G
    rhs = np.zeros((n, p + 1))
    rhs[:, 0] = _force(model, x)
    rhs[np.arange(p), np.arange(1, p + 1)] = 1.0
    sol = fac.solve(rhs)
    return sol[:, 0], sol[:, 1:]


def drift(model, x):
    """Solve ``M(x_beta) f = l(x)``.

    Raises
    ------
    SingularMass
        When the condition estimate of ``M`` exceeds 1e12.
    """
    x = as_state(model, x)
    return model.factorization(x[model.p:]).solve(_force(model, x))


def input_columns(model, x):
    """First ``p`` columns of ``M^{-1}``, obtained from ``M G = [I_p; 0]``."""
    x = as_state(model, x)
    n, p = model.n, model.p
    rhs = np.zeros((n, p))
    rhs[:p] = np.eye(p)
    return model.factorization(x[p:]).solve(rhs)


def dynamics(model, x, tau):
    tau = np.asarray(tau, dtype=float).reshape(-1)
    if tau.shape != (model.p,):
        raise DimensionMismatch(f"{model.name}: input must have length {model.p}, got {tau.shape}")
    f, G = evaluate(model, x)
    return f + G @ tau


def sample_states(model, rng, count):
    """Uniform draws from the model's admissible box, shape ``(count, n)``."""
    lo, hi = model.box[:, 0], model.box[:, 1]
    return lo + (hi - lo) * rng.random((count, model.n))


# registry ------------------------------------------------------------------

_REGISTRY = {}


def register(name):
    """Register ``factory(params: dict | None) -> SystemModel`` under ``name``."""

    def deco(factory):
        _REGISTRY[name] = factory
        return factory

    return deco


def _load_builtin():
    from . import spacecraft, synthetic  # noqa: F401  (registration side effects)


def available_models():
    _load_builtin()
    return sorted(_REGISTRY)


def get_model(name, params=None):
    _load_builtin()
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise InvalidParams(f"unknown model {name!r}; known: {', '.join(sorted(_REGISTRY))}") from None
    return factory(params)
