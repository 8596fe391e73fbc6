"""Bit-level equivalence of the compiled and pure sampling kernels."""

import numpy as np
import pytest

from causalsynth import _kernels
from causalsynth._kernels import reference
from causalsynth.rng import noise_stream
from causalsynth.scm import compile_model, sample_codes

try:
    from causalsynth._kernels import _fastcore
except ImportError:
    _fastcore = None

needs_compiled = pytest.mark.skipif(
    _fastcore is None, reason="compiled kernel not built")


def test_backend_name_reports_selection():
    assert _kernels.backend_name() in ("compiled", "python")


def test_reference_noise_block_matches_streams():
    block = reference.noise_block(9, 2, 4, 3)
    assert block.shape == (4, 3)
    for j in range(4):
        stream = noise_stream(9, 2 + j)
        for i in range(3):
            assert block[j, i] == stream.uniform()


@needs_compiled
def test_noise_block_bit_identical():
    a = reference.noise_block(123, 0, 200, 6)
    b = _fastcore.noise_block(123, 0, 200, 6)
    np.testing.assert_array_equal(a, b)
    assert a.dtype == b.dtype == np.float64


@needs_compiled
def test_ancestral_codes_bit_identical(asia, diamond4, chain3):
    for scm in (asia, diamond4, chain3):
        model = compile_model(scm)
        u = reference.noise_block(77, 0, 500, model.n)
        args = (model.order, model.par_flat, model.par_off,
                model.stride_flat, model.cum_flat, model.cum_off,
                model.cards, u)
        got_fast = _fastcore.ancestral_codes(*args)
        got_ref = reference.ancestral_codes(*args)
        np.testing.assert_array_equal(got_fast, got_ref)


@needs_compiled
def test_boundary_noise_values_agree(diamond4):
    """Grid and boundary u values hit the same interval in both kernels."""
    model = compile_model(diamond4)
    grid = np.linspace(0.0, 1.0, 21)[:-1]
    rows = np.stack(np.meshgrid(*[grid[:5]] * model.n,
                                indexing="ij")).reshape(model.n, -1).T
    rows = np.ascontiguousarray(rows)
    args = (model.order, model.par_flat, model.par_off,
            model.stride_flat, model.cum_flat, model.cum_off, model.cards)
    np.testing.assert_array_equal(
        _fastcore.ancestral_codes(*args, rows),
        reference.ancestral_codes(*args, rows))


def test_sample_codes_deterministic(chain3):
    a, ua = sample_codes(chain3, 100, 5)
    b, ub = sample_codes(chain3, 100, 5)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(ua, ub)


def test_pure_override_env(tmp_path, chain3):
    """CAUSALSYNTH_PURE forces the pure backend in a fresh interpreter
    and yields the same draws."""
    import subprocess
    import sys

    code = (
        "import numpy as np\n"
        "from causalsynth import _kernels\n"
        "from causalsynth._kernels import noise_block\n"
        "print(_kernels.backend_name())\n"
        "print(repr(noise_block(3, 0, 2, 2).tolist()))\n"
    )
    env_pure = {"CAUSALSYNTH_PURE": "1"}
    import os
    base = dict(os.environ)
    out_pure = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True,
        env={**base, **env_pure}, check=True).stdout.splitlines()
    out_auto = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True,
        env=base, check=True).stdout.splitlines()
    assert out_pure[0] == "python"
    assert out_pure[1] == out_auto[1]
