"""Numerical Lie derivatives, brackets, involutivity and relative degree.

All derivatives are central differences with per-coordinate step
``h_i = s * max(1, |x_i|)``.  The base scale is ``s = sqrt(eps)``.  When a
derivative is taken of something that was itself obtained by differencing,
the inner result carries noise of order ``sqrt(eps)`` and the step has to
grow to keep the quotient meaningful; :func:`nested_step` gives the scale
for each nesting level.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import model as _model
from .errors import EvaluationFailure, NoRelativeDegree, RankDeficientInputs

EPS = np.finfo(float).eps
ZERO_TOL = 1e-6
RANK_TOL = 1e-6
MAX_DEPTH = 3


def _noise_and_step(level):
    step = noise = np.sqrt(EPS)
    for _ in range(level):
        step = noise ** (1.0 / 3.0)
        noise = step * step
    return noise, step


def nested_step(level):
    """Relative step for a difference quotient at nesting ``level`` (0 = exact input)."""
    return _noise_and_step(level)[1]


def zero_tolerance(level):
    """Normalized threshold below which a level-``level`` directional derivative is zero."""
    return max(ZERO_TOL, 10.0 * _noise_and_step(level)[0])


def numeric_jacobian(field, x, rel_step=None):
    """Central-difference derivative of ``field`` at ``x``.

    The derivative axis is appended last: a vector field ``R^n -> R^m`` gives
    an ``(m, n)`` matrix, a scalar field gives an ``(n,)`` gradient and a
    matrix-valued field ``R^n -> R^{a x b}`` gives ``(a, b, n)``.
    """
    x = np.asarray(x, dtype=float)
    rel = np.sqrt(EPS) if rel_step is None else rel_step
    steps = rel * np.maximum(1.0, np.abs(x))
    cols = []
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += steps[i]
        xm[i] -= steps[i]
        fp = np.asarray(field(xp), dtype=float)
        fm = np.asarray(field(xm), dtype=float)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise EvaluationFailure(f"field returned non-finite values near coordinate {i}")
        cols.append((fp - fm) / (xp[i] - xm[i]))
    return np.stack(cols, axis=-1)


def gradient(h, x, rel_step=None):
    return numeric_jacobian(lambda z: float(h(z)), x, rel_step)


def lie_derivative(h, f, x, rel_step=None):
    """``L_f h(x) = grad h(x) . f(x)``."""
    return float(gradient(h, x, rel_step) @ np.asarray(f(x), dtype=float))


def _lie_chain(h, f, k):
    chain = [h]
    for level in range(k):
        prev = chain[-1]
        step = nested_step(level)
        chain.append(lambda z, prev=prev, step=step: lie_derivative(prev, f, z, step))
    return chain


def iterated_lie(h, f, k, x):
    """``L_f^k h`` at ``x`` by nested differencing.

    Accuracy degrades roughly to 1e-4 (relative) at ``k = 3``; deeper nesting
    is refused.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if k > MAX_DEPTH:
        raise ValueError(f"nested differencing is capped at depth {MAX_DEPTH}")
    if k >= 3:
        warnings.warn(f"L_f^{k} h by nested finite differences: expect ~1e-4 accuracy", stacklevel=2)
    return float(_lie_chain(h, f, k)[-1](np.asarray(x, dtype=float)))


def lie_bracket(g_a, g_b, x, rel_step=None):
    """``[g_a, g_b](x) = J_{g_b} g_a - J_{g_a} g_b``."""
    x = np.asarray(x, dtype=float)
    Ja = numeric_jacobian(g_a, x, rel_step)
    Jb = numeric_jacobian(g_b, x, rel_step)
    return Jb @ np.asarray(g_a(x), dtype=float) - Ja @ np.asarray(g_b(x), dtype=float)


# involutivity ----------------------------------------------------------------


@dataclass(frozen=True)
class InvolutivityReport:
    involutive: bool
    worst_rank_excess: int
    points: int
    worst_residual: float
    """Largest bracket component outside span(G), relative to sigma_max."""


def numerical_rank(A, tol=RANK_TOL):
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s >= tol * s[0]))


def distribution_involutivity(input_matrix, points):
    """Check closure of ``span(columns of input_matrix(x))`` under brackets.

    Parameters
    ----------
    input_matrix : callable
        ``x -> G(x)`` of shape ``(n, p)``.
    points : array_like
        Sample states, one per row.  The result only speaks for these points.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    worst_excess = 0
    worst_residual = 0.0
    for x in points:
        G = np.asarray(input_matrix(x), dtype=float)
        p = G.shape[1]
        rank_G = numerical_rank(G)
        if rank_G < p:
            raise RankDeficientInputs(f"rank(G) = {rank_G} < p = {p} at x = {x}")
        J = numeric_jacobian(input_matrix, x)  # (n, p, n)
        brackets = [J[:, j, :] @ G[:, i] - J[:, i, :] @ G[:, j] for i in range(p) for j in range(i + 1, p)]
        if not brackets:
            continue
        B = np.column_stack(brackets)
        aug = np.hstack([G, B])
        worst_excess = max(worst_excess, numerical_rank(aug) - rank_G)
        Q, _ = np.linalg.qr(G)
        outside = B - Q @ (Q.T @ B)
        smax = np.linalg.norm(aug, 2)
        worst_residual = max(worst_residual, float(np.linalg.norm(outside, 2) / smax))
    return InvolutivityReport(
        involutive=worst_excess == 0,
        worst_rank_excess=int(worst_excess),
        points=len(points),
        worst_residual=worst_residual,
    )


def involutivity_check(model, points):
    return distribution_involutivity(lambda x: _model.input_columns(model, x), points)


# relative degree -----------------------------------------------------------------


@dataclass(frozen=True)
class RelativeDegreeReport:
    r_i: tuple
    r: int
    E: np.ndarray
    well_defined: bool
    probe: np.ndarray


def relative_degree_fields(f, input_matrix, outputs, x_o, k_max):
    """Vector relative degree of ``x' = f + G tau``, ``y_i = outputs[i](x)``.

    ``L_{g_j} L_f^k h_i`` counts as zero when its magnitude is below
    ``zero_tolerance(k) * |grad L_f^k h_i| * |g_j|``, i.e. the test is on the
    angle between the gradient and the input field, independent of units.
    """
    x_o = np.asarray(x_o, dtype=float)
    G = np.asarray(input_matrix(x_o), dtype=float)
    g_norms = np.linalg.norm(G, axis=0)
    depth = min(k_max, MAX_DEPTH + 1)
    r_i, rows = [], []
    for i, h in enumerate(outputs):
        chain = _lie_chain(h, f, depth - 1)
        for k in range(depth):
            grad = gradient(chain[k], x_o, nested_step(k))
            vals = grad @ G
            scale = np.linalg.norm(grad) * g_norms
            if np.any(np.abs(vals) > zero_tolerance(k) * scale):
                r_i.append(k + 1)
                rows.append(vals)
                break
        else:
            raise NoRelativeDegree(f"output {i}: input does not appear within {depth} derivatives")
    E = np.array(rows)
    p = G.shape[1]
    return RelativeDegreeReport(
        r_i=tuple(r_i),
        r=int(sum(r_i)),
        E=E,
        well_defined=numerical_rank(E, 1e-9) == p,
        probe=x_o,
    )


def relative_degree(model, x_o, k_max=None):
    return relative_degree_fields(
        lambda x: _model.drift(model, x),
        lambda x: _model.input_columns(model, x),
        model.output_functions(),
        x_o,
        model.n if k_max is None else k_max,
    )


def probe_points(model, rng, count=20):
    """Box center followed by ``count`` uniform draws."""
    center = model.box.mean(axis=1)
    return np.vstack([center, _model.sample_states(model, rng, count)])


def assumption_ii(model, report):
    """``p <= s <= r < n``."""
    d = model.dims
    return d.p <= d.s <= report.r < d.n
