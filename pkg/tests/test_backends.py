"""Compiled extension and NumPy fallback must agree bit-for-bit in role.

The dispatcher in krescale._backend picks one implementation at import
time; these tests load both modules directly and cross-check them, then
exercise the KRESCALE_PURE_PYTHON switch in subprocesses.
"""

import os
import subprocess
import sys

import numpy as np
import pytest

from krescale import _kernels_py
from krescale._backend import backend_name

_kernels = pytest.importorskip(
    "krescale._kernels", reason="compiled extension not built"
)


def _complex_field(rng, shape):
    return np.ascontiguousarray(
        rng.uniform(-1.0, 1.0, shape) + 1j * rng.uniform(-1.0, 1.0, shape)
    )


class TestBackendAgreement:
    @pytest.mark.parametrize("shape", ((1, 1, 1), (4, 3, 2), (7, 5, 3), (8, 8, 4)))
    def test_dft3(self, rng, shape):
        field = _complex_field(rng, shape)
        np.testing.assert_allclose(
            np.asarray(_kernels.dft3(field)),
            _kernels_py.dft3(field),
            rtol=1e-13,
            atol=1e-13,
        )

    @pytest.mark.parametrize("shape", ((1, 1, 1), (5, 4, 2), (9, 7, 3)))
    def test_circular_conv2(self, rng, shape):
        inp = np.ascontiguousarray(rng.uniform(-2.0, 2.0, shape))
        ker = np.ascontiguousarray(rng.uniform(-2.0, 2.0, shape))
        np.testing.assert_allclose(
            np.asarray(_kernels.circular_conv2(inp, ker)),
            _kernels_py.circular_conv2(inp, ker),
            rtol=1e-13,
            atol=1e-13,
        )

    @pytest.mark.parametrize(
        "stride,pad", (((1, 1), (0, 0)), ((1, 1), (1, 2)), ((2, 3), (2, 1)))
    )
    def test_conv2d_forward(self, rng, stride, pad):
        inp = np.ascontiguousarray(rng.uniform(-1.0, 1.0, (11, 9, 3)))
        weights = np.ascontiguousarray(rng.uniform(-1.0, 1.0, (4, 3, 3, 5)))
        np.testing.assert_allclose(
            np.asarray(_kernels.conv2d_forward(inp, weights, *stride, *pad)),
            _kernels_py.conv2d_forward(inp, weights, *stride, *pad),
            rtol=1e-13,
            atol=1e-13,
        )


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    env.pop("KRESCALE_PURE_PYTHON", None)
    if env_value is not None:
        env["KRESCALE_PURE_PYTHON"] = env_value
    proc = subprocess.run(
        [sys.executable, "-c",
         "from krescale._backend import backend_name; print(backend_name())"],
        capture_output=True, text=True, env=env,
    )
    assert proc.returncode == 0, proc.stderr
    return proc.stdout.strip()


class TestBackendSelection:
    def test_default_is_compiled(self):
        assert _backend_in_subprocess(None) == "compiled"

    def test_env_forces_python(self):
        assert _backend_in_subprocess("1") == "python"

    def test_zero_and_empty_mean_default(self):
        assert _backend_in_subprocess("0") == "compiled"
        assert _backend_in_subprocess("") == "compiled"

    def test_in_process_name_is_valid(self):
        assert backend_name() in ("compiled", "python")

    def test_suites_pass_on_pure_python(self):
        # end-to-end guard: the fallback drives the full verification path
        env = dict(os.environ)
        env["KRESCALE_PURE_PYTHON"] = "1"
        proc = subprocess.run(
            [sys.executable, "-m", "krescale.cli", "verify", "--suite",
             "ratio", "--trials", "25"],
            capture_output=True, text=True, env=env,
        )
        assert proc.returncode == 0, proc.stderr
        assert "result\tPASS" in proc.stdout
