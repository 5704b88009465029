"""Independent reference computations used by the tests.

Nothing here imports the package; each oracle re-derives its answer by brute
force or from a literal, case-by-case transcription of the bound formulas.
"""
import itertools
import math

import numpy as np


# ---------------------------------------------------------------------------
# literal case formulas for the maximum admissible error (two and three inputs)
# ---------------------------------------------------------------------------

def _u_star(b, lo, hi):
    return lo if b > 0 else hi


def _E(b, L):
    return abs(b) / L


def _E0(beta0, betas, Ls, L0, los, his):
    """E_{0T} for the inputs listed in ``betas`` (same order as the sums)."""
    num = beta0
    den = L0
    for b, L, lo, hi in zip(betas, Ls, los, his):
        u = _u_star(b, lo, hi)
        num += b * u
        den += L * abs(u)
    return -num / den


def _in_index_set(beta0, b, lo, hi):
    return (b > 0 and beta0 + b * lo <= 0) or (b < 0 and beta0 + b * hi <= 0)


def _bar(beta0, beta, L, lo, hi, T):
    """min(E_i for i in T, E_0T): the score of one input combination."""
    parts = [_E(beta[i], L[i + 1]) for i in T]
    parts.append(_E0(beta0, [beta[i] for i in T], [L[i + 1] for i in T], L[0],
                     [lo[i] for i in T], [hi[i] for i in T]))
    return min(parts)


def eps1_two_inputs(beta0, beta, L, lo, hi):
    """Two nonzero coefficients: max of the full-combination score and the single
    scores of the inputs that can stabilize alone."""
    I2 = [i for i in range(2) if _in_index_set(beta0, beta[i], lo[i], hi[i])]
    cands = [_bar(beta0, beta, L, lo, hi, (0, 1))]
    for i in I2:
        cands.append(_bar(beta0, beta, L, lo, hi, (i,)))
    pos = [c for c in cands if c > 0]
    return max(pos) if pos else None


def eps1_three_inputs(beta0, beta, L, lo, hi):
    """Three nonzero coefficients; one branch per size of the index set."""
    I3 = [i for i in range(3) if _in_index_set(beta0, beta[i], lo[i], hi[i])]
    B = lambda *T: _bar(beta0, beta, L, lo, hi, tuple(sorted(T)))
    if len(I3) == 0:
        cands = [B(0, 1, 2)]
    elif len(I3) == 1:
        i = I3[0]
        j, k = [q for q in range(3) if q != i]
        cands = [B(0, 1, 2), B(i, j), B(i, k), B(i)]
    elif len(I3) == 2:
        i, j = I3
        k = [q for q in range(3) if q not in I3][0]
        cands = [B(0, 1, 2), B(i, j), B(i, k), B(j, k), B(i), B(j)]
    else:
        i, j, k = 0, 1, 2
        cands = [B(0, 1, 2), B(i, j), B(i, k), B(j, k), B(i), B(j), B(k)]
    pos = [c for c in cands if c > 0]
    return max(pos) if pos else None


# ---------------------------------------------------------------------------
# brute force
# ---------------------------------------------------------------------------

def robust_feasible_on_grid(beta0, beta, L, eps, lo, hi, per_axis=201):
    """Is there a grid input satisfying every sign combination of the widened row?"""
    m = len(beta)
    axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(m)]
    U = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, m)
    ok = np.ones(len(U), dtype=bool)
    for signs in itertools.product((-1.0, 1.0), repeat=m + 1):
        a0 = beta0 + signs[0] * L[0] * eps
        a = np.array([beta[i] + signs[i + 1] * L[i + 1] * eps for i in range(m)])
        ok &= a0 + U @ a <= 1e-12
    return bool(ok.any())


def largest_feasible_eps(beta0, beta, L, lo, hi, eps_grid, per_axis=201):
    best = 0.0
    for e in eps_grid:
        if robust_feasible_on_grid(beta0, beta, L, e, lo, hi, per_axis):
            best = e
        else:
            break
    return best


def grid_polytope(offsets, normals, lo, hi, per_axis=201, tol=1e-9):
    """Members of ``{u in box : offsets + normals u <= tol}`` on a tensor grid."""
    m = len(lo)
    axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(m)]
    U = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, m)
    ok = np.all(np.asarray(offsets)[None, :] + U @ np.asarray(normals).T <= tol, axis=1)
    return U, ok


def rk4_exp_decay(x0, h, steps):
    """RK4 for xdot = -x written out by hand."""
    x = x0
    for _ in range(steps):
        k1 = -x
        k2 = -(x + 0.5 * h * k1)
        k3 = -(x + 0.5 * h * k2)
        k4 = -(x + h * k3)
        x = x + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
    return x


def cubic_drift_at(x1, x2, x3):
    """The three-state drift typed in scalar form."""
    return (-1.25 * x2 - 0.5 * x3 - (2 * x1 + x2) ** 3 / 16,
            0.9 * x1 + 0.7 * x2 + 0.9 * x3,
            -0.5 * x1 - 11 / 8 * x2 - 0.25 * x3 - (x2 + 2 * x3) ** 3 / 32)


def char_poly_roots_3x3(P):
    """Eigenvalues of a symmetric 3x3 matrix from its characteristic polynomial."""
    a = -np.trace(P)
    b = 0.5 * (np.trace(P) ** 2 - np.trace(P @ P))
    c = -np.linalg.det(P)
    return np.sort(np.roots([1.0, a, b, c]).real)


def lv_vdot_symbolic(x1, x2, a, b, c, d, xs1, xs2):
    """Chain rule by hand for the log CLF under the predator-prey feedback.

    ``dV/dx1 * x1 = x1 - xs1``, so the drift terms ``a - b x2`` and
    ``-c + d x1`` cancel against the feedback and only the tanh terms remain.
    """
    u1 = -a + b * x2 - math.tanh(x1 - xs1)
    u2 = c - d * x1 - math.tanh(x2 - xs2)
    t1 = (x1 - xs1) * ((a - b * x2) + u1)
    t2 = (x2 - xs2) * ((-c + d * x1) + u2)
    return t1 + t2
