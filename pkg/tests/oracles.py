"""Reference solvers used only by the tests."""
from itertools import combinations

import numpy as np


def enumerate_active_sets(problem, constraints, U0, tol=1e-12, max_iter=50):
    """Solve the KKT system by trying every active set.

    For each subset S of the constraints the equality system
    L + grad_h mu - Phi_S^T lam_S = 0, h = 0, Phi_S U = u_min is solved by
    dense Newton; a solution is kept when lam_S >= 0 and all constraints hold.
    Returns a list of (U, mu, lam) for every consistent active set.
    """
    Phi = constraints.Phi.toarray()
    m, n = Phi.shape
    found = []
    for r in range(m + 1):
        for S in combinations(range(m), r):
            S = list(S)
            sol = _solve_equality(problem, Phi[S], constraints.u_min, U0, tol, max_iter)
            if sol is None:
                continue
            U, mu, lamS = sol
            if np.any(lamS < -1e-10) or np.any(constraints.g(U) > 1e-10):
                continue
            lam = np.zeros(m)
            lam[S] = lamS
            found.append((U, mu, lam))
    return found


def _solve_equality(problem, PhiS, u_min, U0, tol, max_iter):
    n, k = len(U0), PhiS.shape[0]
    U, mu, lam = np.array(U0, dtype=float), 0.0, np.zeros(k)
    for _ in range(max_iter):
        gh = problem.grad_h(U)
        F = np.concatenate([problem.residual(U) + gh * mu - PhiS.T @ lam, [problem.h(U)], PhiS @ U - u_min])
        if np.abs(F).max() < tol:
            return U, mu, lam
        J = np.asarray(problem.jacobian(U).toarray())
        K = np.zeros((n + 1 + k, n + 1 + k))
        K[:n, :n] = J
        K[:n, n] = gh
        K[:n, n + 1 :] = -PhiS.T
        K[n, :n] = gh
        K[n + 1 :, :n] = PhiS
        if np.linalg.matrix_rank(K) < K.shape[0]:
            return None
        d = np.linalg.solve(K, -F)
        U, mu, lam = U + d[:n], mu + d[n], lam + d[n + 1 :]
    return None
