import os
import subprocess
import sys

import numpy as np
import pytest

from scorepath import _kernels


def _ray_args():
    rng = np.random.default_rng(0)
    return rng.uniform(-1.2, 1.2, 200), rng.uniform(-1.0, 1.0, 200), np.linspace(-0.75, 0.75, 64), 1.22, 10.0


def test_raycast_numpy_closed_form():
    th, d, phis, w, r_max = _ray_args()
    out = _kernels._raycast_numpy(th, d, phis, w, r_max)
    i, j = 7, 50
    lat = np.sin(th[i] + phis[j])
    want = (w - d[i]) / lat if lat > 0 else (w + d[i]) / -lat
    assert out[i, j] == min(want, r_max)


@pytest.mark.skipif(not _kernels.USE_NUMBA, reason="numba backend disabled")
def test_backends_agree():
    a = _ray_args()
    assert np.allclose(_kernels._raycast_numba(*a), _kernels._raycast_numpy(*a), rtol=1e-14, atol=0)
    rng = np.random.default_rng(1)
    X = np.hstack([rng.normal(size=(50, 4)), np.ones((50, 1))])
    y = np.sign(X[:, 0] + 0.1)
    order = np.stack([rng.permutation(50) for _ in range(5)]).astype(np.int64)
    for proj in (True, False):
        w_nb = _kernels._pegasos_numba(X, y, order, 0.1, proj, 100)
        w_np = _kernels._pegasos_numpy(X, y, order, 0.1, proj, 100)
        assert np.allclose(w_nb, w_np, rtol=1e-12, atol=1e-14)


def test_env_flag_selects_numpy():
    env = dict(os.environ, SCOREPATH_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "import scorepath; print(scorepath.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_pegasos_projection_radius():
    X = np.array([[10.0, 1.0], [-10.0, 1.0]])
    y = np.array([1.0, -1.0])
    order = np.tile(np.arange(2), (3, 1)).astype(np.int64)
    w = _kernels._pegasos_numpy(X, y, order, 0.5, True, 10 ** 6)
    assert np.linalg.norm(w) <= 1 / np.sqrt(0.5) + 1e-12
