"""Backend equivalence and selection.

The loop kernels and the vectorized numpy fallbacks are independent
implementations of the same math; they must agree to roundoff within a
process, and the FDEXPLAIN_BACKEND switch must pick the right one in a
fresh interpreter.
"""

import os
import subprocess
import sys

import numpy as np
import pytest

from fdexplain import kernels
from fdexplain._accel import NUMBA_ENABLED
from fdexplain.kernels import (
    TASK_CLASSIFICATION,
    TASK_REGRESSION,
    _adam_epoch_impl,
    _curve_batch_numba,
    _curve_batch_numpy,
    _mlp_forward_impl,
    _mlp_loss_grad_impl,
)


def _curve_args(n=12, m=80, k=4, seed=0):
    rng = np.random.default_rng(seed)
    t = np.linspace(-4.0, 0.0, m)
    centers = rng.uniform(-3.8, -0.2, size=(n, k))
    widths = rng.uniform(0.1, 0.4, size=(n, k))
    amps = rng.uniform(0.5, 3.0, size=(n, k))
    n_peaks = rng.integers(0, k + 1, size=n).astype(np.int64)
    gain = rng.uniform(0.8, 1.5, size=n)
    boost = rng.uniform(0.0, 2.0, size=n)
    return (t, centers, widths, amps, n_peaks, gain, boost,
            3.0, 3.0, 1.1, -4.0)


def _mlp_setup(n=32, f=5, hidden=(7, 4), seed=1):
    rng = np.random.default_rng(seed)
    sizes = np.array([f, *hidden, 1], dtype=np.int64)
    total = int(np.sum(sizes[:-1] * sizes[1:] + sizes[1:]))
    params = rng.normal(scale=0.3, size=total)
    X = rng.normal(size=(n, f))
    y_reg = rng.normal(size=n)
    y_cls = rng.integers(0, 2, size=n).astype(np.float64)
    return sizes, params, X, y_reg, y_cls


def _rel_max(a, b):
    scale = max(1.0, float(np.max(np.abs(a))))
    return float(np.max(np.abs(a - b))) / scale


# ---------------------------------------------------------------------------
# double-implementation agreement (loop form vs vectorized form)
# ---------------------------------------------------------------------------

def test_curve_loop_vs_vectorized():
    args = _curve_args()
    assert _rel_max(_curve_batch_numba(*args), _curve_batch_numpy(*args)) \
        <= 1e-12


def test_curve_zero_peaks_closed_form():
    t = np.linspace(-4.0, 0.0, 50)
    args = (t, np.zeros((1, 2)), np.ones((1, 2)), np.zeros((1, 2)),
            np.zeros(1, dtype=np.int64), np.array([2.0]), np.array([0.5]),
            3.0, 3.0, 1.1, -4.0)
    u = t + 4.0
    expected = 2.0 * (3.0 * np.exp(-1.1 * u) + 0.5 * np.exp(-3.0 * u))
    assert _rel_max(_curve_batch_numpy(*args), expected) <= 1e-12
    assert _rel_max(_curve_batch_numba(*args), expected) <= 1e-12


def test_curve_single_peak_closed_form():
    t = np.linspace(-4.0, 0.0, 50)
    c, w, a = -2.0, 0.25, 1.7
    args = (t, np.full((1, 1), c), np.full((1, 1), w), np.full((1, 1), a),
            np.ones(1, dtype=np.int64), np.array([1.0]), np.array([0.0]),
            3.0, 0.0, 1.1, -4.0)
    expected = a * np.exp(-((t - c) ** 2) / (2.0 * w * w))
    assert _rel_max(_curve_batch_numpy(*args), expected) <= 1e-12


@pytest.mark.skipif(not NUMBA_ENABLED, reason="numba backend not active")
def test_jitted_kernels_match_plain_implementations():
    args = _curve_args(seed=3)
    assert _rel_max(kernels.curve_batch(*args), _curve_batch_numpy(*args)) \
        <= 1e-12

    sizes, params, X, y_reg, y_cls = _mlp_setup()
    assert _rel_max(kernels.mlp_forward(params, sizes, X),
                    _mlp_forward_impl(params, sizes, X)) <= 1e-12

    for task, y in ((TASK_REGRESSION, y_reg), (TASK_CLASSIFICATION, y_cls)):
        g_jit = np.empty_like(params)
        g_ref = np.empty_like(params)
        loss_jit = kernels.mlp_loss_grad(params, sizes, X, y, task, g_jit)
        loss_ref = _mlp_loss_grad_impl(params, sizes, X, y, task, g_ref)
        assert abs(loss_jit - loss_ref) <= 1e-12 * max(1.0, abs(loss_ref))
        assert _rel_max(g_jit, g_ref) <= 1e-12


@pytest.mark.skipif(not NUMBA_ENABLED, reason="numba backend not active")
def test_jitted_adam_epoch_matches_plain():
    sizes, params, X, y_reg, _ = _mlp_setup(seed=5)
    order = np.random.default_rng(2).permutation(X.shape[0]).astype(np.int64)

    def run(epoch_fn):
        p = params.copy()
        m1 = np.zeros_like(p)
        m2 = np.zeros_like(p)
        loss, step = epoch_fn(p, m1, m2, 0, sizes, X, y_reg, order, 8,
                              1e-3, 0.9, 0.999, 1e-8, TASK_REGRESSION)
        return p, float(loss), int(step)

    p_jit, loss_jit, step_jit = run(kernels.adam_epoch)
    p_ref, loss_ref, step_ref = run(_adam_epoch_impl)
    assert step_jit == step_ref == 4
    assert abs(loss_jit - loss_ref) <= 1e-10
    assert _rel_max(p_jit, p_ref) <= 1e-10


# ---------------------------------------------------------------------------
# backend selection in fresh interpreters
# ---------------------------------------------------------------------------

def _spawn(backend, code):
    env = dict(os.environ, FDEXPLAIN_BACKEND=backend)
    return subprocess.run([sys.executable, "-c", code], env=env,
                          capture_output=True, text=True)


def test_backend_numpy_forced():
    proc = _spawn("numpy", "from fdexplain import kernels; "
                  "print(kernels.BACKEND, kernels.curve_batch.__name__)")
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.split() == ["numpy", "_curve_batch_numpy"]


def test_backend_numba_forced():
    proc = _spawn("numba", "from fdexplain import kernels; "
                  "print(kernels.BACKEND)")
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == "numba"


def test_backend_rejects_unknown_value():
    proc = _spawn("bogus", "import fdexplain.kernels")
    assert proc.returncode != 0
    assert "FDEXPLAIN_BACKEND" in proc.stderr


def test_backends_agree_across_processes(tmp_path):
    # the numpy-forced child writes its curve batch; compare in-process
    out = tmp_path / "curves.npy"
    code = (
        "import numpy as np\n"
        "from fdexplain import kernels\n"
        "from test_kernels import _curve_args\n"
        f"np.save({str(out)!r}, kernels.curve_batch(*_curve_args(seed=7)))\n"
    )
    env = dict(os.environ, FDEXPLAIN_BACKEND="numpy")
    env["PYTHONPATH"] = os.path.dirname(os.path.abspath(__file__))
    proc = subprocess.run([sys.executable, "-c", code], env=env,
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    theirs = np.load(out)
    ours = kernels.curve_batch(*_curve_args(seed=7))
    assert _rel_max(ours, theirs) <= 1e-12
