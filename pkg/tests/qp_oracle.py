"""Random convex QPs and an exhaustive active-set reference solution.

The reference solver enumerates every subset of the inequality rows,
solves the equality-constrained KKT system for that subset, and keeps the
best primal-dual feasible candidate. For a strictly convex QP with few
rows this is slow but exact, which makes it an independent oracle for the
iterative engine.
"""

from __future__ import annotations

import itertools

import numpy as np

from inlane.nlp_solver import NlpProblem, SolveOptions, solve


def random_qp(seed: int, n_vars: int = 10, n_ineq: int = 5):
    """Strictly convex QP  min 0.5 x'Qx + c'x  s.t.  Ax <= b.

    b is bounded away from zero so the origin is strictly feasible and
    every instance has a nonempty interior.
    """
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(n_vars, n_vars))
    q = m.T @ m + 0.1 * np.eye(n_vars)
    c = rng.normal(size=n_vars)
    a = rng.normal(size=(n_ineq, n_vars))
    b = rng.uniform(0.5, 2.0, size=n_ineq)
    return q, c, a, b


def active_set_minimizer(q, c, a, b):
    """Global minimizer by brute force over every active subset."""
    n_vars = q.shape[0]
    n_ineq = a.shape[0]
    best_x = None
    best_val = np.inf
    for k in range(n_ineq + 1):
        for subset in itertools.combinations(range(n_ineq), k):
            if k == 0:
                x = np.linalg.solve(q, -c)
                lam = np.zeros(0)
            else:
                rows = a[list(subset)]
                kkt = np.block([[q, rows.T], [rows, np.zeros((k, k))]])
                rhs = np.concatenate([-c, b[list(subset)]])
                try:
                    sol = np.linalg.solve(kkt, rhs)
                except np.linalg.LinAlgError:
                    continue
                x = sol[:n_vars]
                lam = sol[n_vars:]
            if np.any(a @ x - b > 1e-9) or np.any(lam < -1e-9):
                continue
            val = 0.5 * x @ q @ x + c @ x
            if val < best_val:
                best_val = val
                best_x = x
    assert best_x is not None, "oracle found no KKT point"
    return best_x


def solve_qp_with_engine(q, c, a, b, options: SolveOptions | None = None):
    """Hand the same QP to the iterative engine, started at the origin."""
    problem = NlpProblem(
        dim=len(c),
        objective=lambda x: 0.5 * float(x @ q @ x) + float(c @ x),
        gradient=lambda x: q @ x + c,
        ineq=lambda x: a @ x - b,
        ineq_jac=lambda x: a,
    )
    return solve(problem, np.zeros(len(c)), options or SolveOptions())
