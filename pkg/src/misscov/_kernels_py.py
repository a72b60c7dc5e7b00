"""Pure numpy implementations of the hot loops.

Same signatures and semantics as the compiled ``misscov._kernels``.
"""
import numpy as np

NAME = "python"


def psi_colsum(q, scale):
    """Column sums of ``psi(scale * q)`` for an ``(N, M)`` array."""
    return np.clip(scale * np.asarray(q, dtype=np.float64), -1.0, 1.0).sum(axis=0)


def jacobi_eigh(a_in, rel_tol=1e-12, max_rotations=None):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ``(eigenvalues, eigenvectors, rotations, converged)`` with
    eigenvalues in descending order.
    """
    a = np.array(a_in, dtype=np.float64, order="C", copy=True)
    d = a.shape[0]
    v = np.eye(d)
    cap = 100 * d * d if max_rotations is None else max_rotations
    fro = np.sqrt(np.sum(a * a))
    offmask = ~np.eye(d, dtype=bool)
    rotations = 0
    converged = False
    while True:
        off = np.sqrt(np.sum(a[offmask] ** 2))
        if off <= rel_tol * fro:
            converged = True
            break
        if rotations >= cap:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
                rotations += 1
    w = np.diagonal(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order], rotations, converged


def subgradient_minimax(a, b, nonneg, iters, radius):
    """Projected subgradient descent on ``max_v |a_v . theta - b_v|``.

    Step ``radius / sqrt(t)`` along the normalized subgradient; projection
    clips at zero when ``nonneg``. Returns the best iterate and its objective.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    theta = np.zeros(a.shape[1])
    best, best_obj = theta.copy(), -1.0
    for t in range(1, iters + 2):
        r = a @ theta - b
        j = int(np.argmax(np.abs(r)))
        rmax = abs(r[j])
        if best_obj < 0.0 or rmax < best_obj:
            best_obj, best = rmax, theta.copy()
        if t > iters:
            break
        gn = np.sqrt(a[j] @ a[j])
        if gn == 0.0 or rmax == 0.0:
            break
        theta = theta - (radius / np.sqrt(t) / gn) * np.sign(r[j]) * a[j]
        if nonneg:
            theta = np.maximum(theta, 0.0)
    return best, float(best_obj)
