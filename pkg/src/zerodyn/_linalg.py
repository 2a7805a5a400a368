"""Conditioned dense solves used by the model and block modules."""

import numpy as np
from scipy.linalg import lapack

COND_LIMIT = 1e12


class Factorization:
    """LU or Cholesky factorization of a square matrix with a condition gate.

    Cholesky is tried first when ``symmetric`` is set and the matrix is
    positive definite; otherwise partial-pivoting LU is used.  The 1-norm
    condition number is estimated with LAPACK ``?gecon``/``?pocon`` and the
    factorization is rejected (raising ``error``) above ``COND_LIMIT``.
    """

    __slots__ = ("kind", "factors", "cond", "n")

    def __init__(self, A, error, what="matrix", symmetric=False):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"{what} must be square, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise error(f"{what} contains non-finite entries")
        self.n = A.shape[0]
        anorm = np.abs(A).sum(axis=0).max()
        if anorm == 0.0:
            raise error(f"{what} is identically zero")
        self.kind = None
        if symmetric:
            c, info = lapack.dpotrf(A, lower=0, clean=1)
            if info == 0:
                rcond, _ = lapack.dpocon(c, anorm)
                self.kind, self.factors = "cho", (c, False)
        if self.kind is None:
            lu, piv, info = lapack.dgetrf(A)
            if info > 0:
                raise error(f"{what} is exactly singular")
            rcond, _ = lapack.dgecon(lu, anorm)
            self.kind, self.factors = "lu", (lu, piv)
        self.cond = np.inf if rcond == 0.0 else 1.0 / rcond
        if self.cond > COND_LIMIT:
            raise error(f"{what} condition estimate {self.cond:.3e} exceeds {COND_LIMIT:.0e}")

    def solve(self, b):
        if self.kind == "cho":
            x, info = lapack.dpotrs(self.factors[0], b)
        else:
            x, info = lapack.dgetrs(*self.factors, b)
        if info != 0:
            raise ValueError(f"LAPACK solve failed with info={info}")
        return x
