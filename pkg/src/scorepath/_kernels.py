"""Inner loops with a numba path and a pure-numpy fallback.

Set ``SCOREPATH_DISABLE_NUMBA=1`` to force the numpy implementations.
Each backend is deterministic on its own; the two may differ in the last ulp.
"""
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and os.environ.get("SCOREPATH_DISABLE_NUMBA", "0") not in ("1", "true", "yes")

BACKEND = "numba" if USE_NUMBA else "numpy"


def _raycast_numpy(thetas, ds, phis, w_half, max_range):
    psi = thetas[:, None] + phis[None, :]
    lateral = np.sin(psi)
    out = np.full(psi.shape, max_range, dtype=np.float64)
    left = lateral > 0.0
    right = lateral < 0.0
    dd = np.broadcast_to(ds[:, None], psi.shape)
    out[left] = (w_half - dd[left]) / lateral[left]
    out[right] = (w_half + dd[right]) / -lateral[right]
    np.minimum(out, max_range, out=out)
    return out


def _pegasos_numpy(X, y, order, lam, project, avg_start):
    n_feat = X.shape[1]
    w = np.zeros(n_feat)
    w_sum = np.zeros(n_feat)
    n_avg = 0
    radius = 1.0 / np.sqrt(lam)
    t = 0
    for idx in order.ravel():
        t += 1
        eta = 1.0 / (lam * t)
        xi = X[idx]
        margin = y[idx] * np.dot(w, xi)
        w *= 1.0 - eta * lam
        if margin < 1.0:
            w += (eta * y[idx]) * xi
        if project:
            norm = np.sqrt(np.dot(w, w))
            if norm > radius:
                w *= radius / norm
        if t > avg_start:
            w_sum += w
            n_avg += 1
    if n_avg == 0:
        return w
    return w_sum / n_avg


if USE_NUMBA:

    @numba.njit(cache=True)
    def _raycast_numba(thetas, ds, phis, w_half, max_range):
        n = thetas.shape[0]
        m = phis.shape[0]
        out = np.empty((n, m))
        for i in range(n):
            for j in range(m):
                lateral = np.sin(thetas[i] + phis[j])
                if lateral > 0.0:
                    r = (w_half - ds[i]) / lateral
                elif lateral < 0.0:
                    r = (w_half + ds[i]) / -lateral
                else:
                    r = max_range
                out[i, j] = r if r < max_range else max_range
        return out

    @numba.njit(cache=True)
    def _pegasos_numba(X, y, order, lam, project, avg_start):
        n_feat = X.shape[1]
        w = np.zeros(n_feat)
        w_sum = np.zeros(n_feat)
        n_avg = 0
        radius = 1.0 / np.sqrt(lam)
        t = 0
        flat = order.ravel()
        for k in range(flat.shape[0]):
            idx = flat[k]
            t += 1
            eta = 1.0 / (lam * t)
            margin = 0.0
            for j in range(n_feat):
                margin += w[j] * X[idx, j]
            margin *= y[idx]
            shrink = 1.0 - eta * lam
            for j in range(n_feat):
                w[j] *= shrink
            if margin < 1.0:
                step = eta * y[idx]
                for j in range(n_feat):
                    w[j] += step * X[idx, j]
            if project:
                norm = 0.0
                for j in range(n_feat):
                    norm += w[j] * w[j]
                norm = np.sqrt(norm)
                if norm > radius:
                    for j in range(n_feat):
                        w[j] *= radius / norm
            if t > avg_start:
                for j in range(n_feat):
                    w_sum[j] += w[j]
                n_avg += 1
        if n_avg == 0:
            return w
        return w_sum / n_avg

    raycast = _raycast_numba
    pegasos = _pegasos_numba
else:
    raycast = _raycast_numpy
    pegasos = _pegasos_numpy
