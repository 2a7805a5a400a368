"""Partitioned algebra on the system matrix.

With ``M`` split at index ``p`` into ``M11`` (p x p), ``M12`` (p x (n-p)) and
``M22``, the first ``p`` rows of ``M^{-1}`` are annihilated by the columns of

    X = [N; I],    N = M12 M22^{-1},

which is what makes the normal coordinates computable in closed form.
"""

from dataclasses import dataclass

import numpy as np

from ._linalg import Factorization
from .errors import AsymmetricMatrix, SingularBlock

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class BlockDecomposition:
    M11: np.ndarray
    M12: np.ndarray
    M22: np.ndarray

    @property
    def p(self):
        return self.M11.shape[0]

    @property
    def n(self):
        return self.M11.shape[0] + self.M22.shape[0]

    @property
    def M21(self):
        return self.M12.T

    def assemble(self):
        return np.block([[self.M11, self.M12], [self.M12.T, self.M22]])


@dataclass(frozen=True)
class NullBasis:
    N: np.ndarray
    X: np.ndarray


def asymmetry(M):
    M = np.asarray(M, dtype=float)
    return float(np.abs(M - M.T).max()) if M.size else 0.0


def decompose(M, p, tol=SYMMETRY_TOL):
    """Split a symmetric matrix into its ``[0, p)`` / ``[p, n)`` blocks."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError(f"M must be square, got {M.shape}")
    if not 1 <= p < n:
        raise ValueError(f"need 1 <= p < n, got p={p}, n={n}")
    err = asymmetry(M)
    if err > tol:
        raise AsymmetricMatrix(f"|M - M^T|_inf = {err:.3e} exceeds {tol:.0e}")
    return BlockDecomposition(M[:p, :p].copy(), M[:p, p:].copy(), M[p:, p:].copy())


def _m22(d):
    return Factorization(d.M22, SingularBlock, what="M22", symmetric=True)


def schur_f11(d):
    """``F11 = M11 - M12 M22^{-1} M12^T``, symmetrized."""
    F = d.M11 - d.M12 @ _m22(d).solve(d.M12.T)
    return 0.5 * (F + F.T)


def schur_f22(d):
    """The complementary Schur complement ``M22 - M12^T M11^{-1} M12``."""
    fac = Factorization(d.M11, SingularBlock, what="M11", symmetric=True)
    F = d.M22 - d.M12.T @ fac.solve(d.M12)
    return 0.5 * (F + F.T)


def block_inverse(d):
    """Assemble ``M^{-1}`` block by block from ``F11`` and ``M22``."""
    m22 = _m22(d)
    f11 = Factorization(schur_f11(d), SingularBlock, what="F11", symmetric=True)
    F11_inv = f11.solve(np.eye(d.p))
    N = m22.solve(d.M12.T).T  # M12 M22^{-1}; M22 symmetric
    M22_inv = m22.solve(np.eye(d.n - d.p))
    top_right = -F11_inv @ N
    bottom_right = M22_inv + N.T @ F11_inv @ N
    bottom_left = -N.T @ F11_inv
    return np.block([[F11_inv, top_right], [bottom_left, bottom_right]])


def null_basis(d):
    """``N`` from the right-solve ``N M22 = M12`` and ``X = [N; I]``."""
    N = _m22(d).solve(d.M12.T).T
    X = np.vstack([N, np.eye(d.n - d.p)])
    return NullBasis(N=N, X=X)
