"""Closed-form normal coordinates, normal-form dynamics and zero dynamics.

For a model in the class the internal coordinates are

    eta = N(x_beta)^T x_alpha + x_beta + c,      N = M12 M22^{-1},

and their rate is

    eta' = M22^{-1} l_beta + (M22^{-1} M12'^T + (M22^{-1})' M12^T) zeta

with ``zeta = x_alpha``.  The input never appears because ``G^T X = 0``.
Setting ``zeta = 0`` gives the zero dynamics ``eta' = M22^{-1} l_beta``.
"""

from dataclasses import dataclass

import numpy as np

from . import blocklin
from . import model as _model
from ._linalg import Factorization
from .errors import SingularBlock
from .geomdiff import numeric_jacobian


@dataclass(frozen=True)
class NormalState:
    zeta: np.ndarray
    eta: np.ndarray
    c: np.ndarray


@dataclass(frozen=True)
class MassRates:
    M12_dot: np.ndarray
    M22_inv_dot: np.ndarray


@dataclass(frozen=True)
class NormalFormRhs:
    eta_dot: np.ndarray
    forced_part: np.ndarray
    coupling_part: np.ndarray


def _blocks(model, x_beta):
    if model.constant_mass:
        d = model._cache.get("blocks")
        if d is None:
            d = model._cache["blocks"] = blocklin.decompose(model.mass_matrix(x_beta), model.p)
        return d
    return blocklin.decompose(model.mass_matrix(x_beta), model.p)


def _m22_factor(model, d):
    if model.constant_mass:
        fac = model._cache.get("m22")
        if fac is None:
            fac = model._cache["m22"] = Factorization(d.M22, SingularBlock, what="M22", symmetric=True)
        return fac
    return Factorization(d.M22, SingularBlock, what="M22", symmetric=True)


def _null_basis(model, x_beta):
    if model.constant_mass:
        nb = model._cache.get("null_basis")
        if nb is None:
            nb = model._cache["null_basis"] = blocklin.null_basis(_blocks(model, x_beta))
        return nb
    return blocklin.null_basis(_blocks(model, x_beta))


def phi(model, x):
    """Map a state to ``(zeta, eta)``; the integration constant is zero."""
    x_alpha, x_beta = model.split(x)
    N = _null_basis(model, x_beta).N
    c = np.zeros(model.n - model.p)
    return NormalState(zeta=x_alpha.copy(), eta=N.T @ x_alpha + x_beta + c, c=c)


def mass_time_derivatives(model, x, x_dot):
    """Time derivatives of ``M12`` and ``M22^{-1}`` along ``x_dot``."""
    x = _model.as_state(model, x)
    x_dot = np.asarray(x_dot, dtype=float)
    p = model.p
    d = _blocks(model, x[p:])
    M_dot = np.tensordot(x_dot[p:], model.mass_matrix_jacobian(x[p:]), axes=1)
    fac = _m22_factor(model, d)
    M22_inv = fac.solve(np.eye(model.n - p))
    return MassRates(
        M12_dot=M_dot[:p, p:],
        M22_inv_dot=-M22_inv @ M_dot[p:, p:] @ M22_inv,
    )


def eta_dot(model, x, tau):
    """Normal-form rate of ``eta`` from the block formula.

    ``tau`` only enters through the state rate used for the mass-matrix
    derivatives; for models whose ``M`` depends on configuration coordinates
    with kinematic rows it has no effect.
    """
    x = _model.as_state(model, x)
    p = model.p
    x_alpha = x[:p]
    d = _blocks(model, x[p:])
    fac = _m22_factor(model, d)
    l_beta = np.asarray(model.force_vector(x), dtype=float)[p:]
    forced = fac.solve(l_beta)
    if model.constant_mass:
        coupling = np.zeros_like(forced)
    else:
        rates = mass_time_derivatives(model, x, _model.dynamics(model, x, tau))
        coupling = (fac.solve(rates.M12_dot.T) + rates.M22_inv_dot @ d.M12.T) @ x_alpha
    return NormalFormRhs(eta_dot=forced + coupling, forced_part=forced, coupling_part=coupling)


def eta_dot_raw(model, x, tau):
    """Rate of ``eta`` by direct differentiation: ``X^T x' + X'^T x``."""
    x = _model.as_state(model, x)
    p = model.p
    d = _blocks(model, x[p:])
    X = _null_basis(model, x[p:]).X
    x_dot = _model.dynamics(model, x, tau)
    out = X.T @ x_dot
    if not model.constant_mass:
        rates = mass_time_derivatives(model, x, x_dot)
        M22_inv = _m22_factor(model, d).solve(np.eye(model.n - p))
        N_dot = rates.M12_dot @ M22_inv + d.M12 @ rates.M22_inv_dot
        out = out + N_dot.T @ x[:p]
    return out


def _manifold_state(model, eta, c=None):
    eta = np.asarray(eta, dtype=float)
    p = model.p
    if eta.shape != (model.n - p,):
        raise ValueError(f"eta must have length {model.n - p}, got {eta.shape}")
    x = np.zeros(model.n)
    x[p:] = eta if c is None else eta - c
    return x


def zero_dynamics_rhs(model, eta, c=None):
    """``M22^{-1}(x_beta) l_beta(0, x_beta)`` with ``x_beta = eta - c``."""
    x = _manifold_state(model, eta, c)
    d = _blocks(model, x[model.p:])
    l_beta = np.asarray(model.force_vector(x), dtype=float)[model.p:]
    return _m22_factor(model, d).solve(l_beta)


def zero_dynamics_rhs_schur(model, eta, c=None):
    """Candidate form using the complementary Schur complement ``F22``.

    This is the unforced (``tau = 0``) rate of ``x_beta`` on ``x_alpha = 0``
    when additionally ``l_alpha = 0``.  It is kept for comparison against
    the true zero dynamics; it is not the zero dynamics in general.
    """
    x = _manifold_state(model, eta, c)
    F22 = blocklin.schur_f22(_blocks(model, x[model.p:]))
    l_beta = np.asarray(model.force_vector(x), dtype=float)[model.p:]
    return Factorization(F22, SingularBlock, what="F22", symmetric=True).solve(l_beta)


def annihilation_residual(model, x):
    """``max_{j,k} |grad(Phi_k) . g_j|`` with gradients by central differences."""
    J = numeric_jacobian(lambda z: phi(model, z).eta, x)
    G = _model.input_columns(model, x)
    return float(np.abs(J @ G).max())
