import os
import subprocess
import sys

import numpy as np

from apcss import _backend
from apcss._kernel_py import apc_dispersion_batch as python_kernel
from apcss.crossed import dispersion_pair_batch
from apcss.model import AlignmentMethod, Axis, _centered_values


def test_both_backends_are_available():
    backends = _backend.available_backends()
    assert "python" in backends
    assert "compiled" in backends  # the extension must build in this repo
    assert _backend.backend_name() in backends


def test_backends_are_bit_identical_on_random_tables():
    backends = _backend.available_backends()
    compiled = backends["compiled"]
    rng = np.random.default_rng(20)
    for trial in range(60):
        I = int(rng.integers(2, 6))
        J = int(rng.integers(2, 6))
        K = int(rng.integers(1, 5))
        values = rng.standard_normal((5, I, J, K))
        if trial % 3 == 0:
            values = np.round(values)  # heavy ties
        for axis in (Axis.COLUMNS, Axis.ROWS):
            for method in AlignmentMethod:
                aligned = _centered_values(values, axis, method)
                if axis is Axis.ROWS:
                    aligned = aligned.transpose(0, 2, 1, 3).copy()
                np.testing.assert_array_equal(
                    compiled(aligned), python_kernel(aligned)
                )


def test_driver_results_do_not_depend_on_backend(monkeypatch):
    rng = np.random.default_rng(21)
    values = rng.standard_normal((8, 3, 4, 2))
    with_default = dispersion_pair_batch(values, AlignmentMethod.AVERAGE)
    monkeypatch.setattr(_backend, "apc_dispersion_batch", python_kernel)
    with_python = dispersion_pair_batch(values, AlignmentMethod.AVERAGE)
    np.testing.assert_array_equal(with_default, with_python)


def test_pure_python_env_override():
    env = dict(os.environ, APCSS_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import apcss; print(apcss.backend_name())"],
        capture_output=True,
        text=True,
        env=env,
        check=True,
    )
    assert out.stdout.strip() == "python"
