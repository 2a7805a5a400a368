import numpy as np
import pytest

from zerodyn.model import Dimensions, SystemModel


def make_model(mass, force, n, p, s=None, constant=False, box=1.0, name="adhoc"):
    """Small ad hoc model; ``mass`` may be a matrix or a callable of ``x_beta``."""
    s = p if s is None else s
    if not callable(mass):
        M = np.asarray(mass, dtype=float)
        mass = lambda xb: M  # noqa: E731
        constant = True
    return SystemModel(
        name=name,
        dims=Dimensions(n, p, s),
        mass_matrix=mass,
        force_vector=force,
        output_matrix=np.eye(s),
        box=np.column_stack([-np.full(n, box), np.full(n, box)]),
        constant_mass=constant,
    )


def random_spd(rng, n, scale=1.0):
    A = rng.standard_normal((n, n))
    return scale * (A @ A.T / n + np.eye(n))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
