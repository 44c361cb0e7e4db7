"""NumPy fallback for the compiled pairwise Henze-Zirkler kernel."""
import numpy as np


def hz_pair_scores(zs, pairs, beta, num_threads=1, degenerate_tol=1e-10, whiten=True):
    zs = np.ascontiguousarray(zs, dtype=np.float64)
    pairs = np.asarray(pairs, dtype=np.intp).reshape(-1, 2)
    n = zs.shape[1]
    b2 = beta * beta
    c1 = b2 / (2.0 * (1.0 + b2))
    out = np.empty(len(pairs), dtype=np.float64)
    for t, (a, b) in enumerate(pairs):
        u = zs[a]
        v = zs[b]
        r = float(u @ v) / n
        if not whiten or 1.0 - r * r < degenerate_tol:
            w = v
        else:
            w = (v - r * u) / np.sqrt(1.0 - r * r)
        du = u[:, None] - u[None, :]
        dw = w[:, None] - w[None, :]
        du *= du
        dw *= dw
        du += dw
        du *= -0.5 * b2
        acc_pair = np.exp(du, out=du).sum()
        acc_one = np.exp(-c1 * (u * u + w * w)).sum()
        out[t] = n * (acc_pair / n**2 - 2.0 / (1.0 + b2) * acc_one / n + 1.0 / (1.0 + 2.0 * b2))
    return out
