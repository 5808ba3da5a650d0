"""Parity between the compiled kernels and the numpy fallback, plus backend
selection plumbing."""

import os
import subprocess
import sys

import numpy as np
import pytest

from hopfbound._backend import available_backends, backend_name
from hopfbound.fields import BumpProfile, FieldSpec, backend_params
from hopfbound.sphere import canonical_center, random_points

BACKENDS = available_backends()
needs_compiled = pytest.mark.skipif("compiled" not in BACKENDS,
                                    reason="compiled extension not built")


def _params(k=1, seed=0, scale=0.25):
    rng = np.random.default_rng(seed)
    bump = BumpProfile(1.0, canonical_center(k))
    spec = FieldSpec.perturbed(k, rng.uniform(-scale, scale, 6 * (k + 1)), bump)
    return backend_params(spec)


@needs_compiled
@pytest.mark.parametrize("k", [1, 2])
def test_eval_field_parity(k):
    X = random_points(k, 500, np.random.default_rng(1))
    params = _params(k)
    a = BACKENDS["compiled"].eval_field(X, *params)
    b = BACKENDS["pure-python"].eval_field(X, *params)
    assert np.abs(a - b).max() < 1e-14


@needs_compiled
@pytest.mark.parametrize("k", [1, 2])
def test_frames_parity(k):
    X = random_points(k, 500, np.random.default_rng(2))
    params = _params(k)
    V = BACKENDS["compiled"].eval_field(X, *params)
    a = BACKENDS["compiled"].frames(X, V)
    b = BACKENDS["pure-python"].frames(X, V)
    assert np.abs(a - b).max() < 1e-12


@needs_compiled
@pytest.mark.parametrize("k,mode,tol", [(1, 0, 1e-13), (1, 1, 1e-9),
                                        (2, 0, 1e-13), (2, 1, 1e-9)])
def test_shape_parts_parity(k, mode, tol):
    X = random_points(k, 300, np.random.default_rng(3))
    params = backend_params(FieldSpec.hopf(k)) if mode == 0 else _params(k)
    Ha, Aa = BACKENDS["compiled"].shape_parts(X, *params, mode, 1e-5)
    Hb, Ab = BACKENDS["pure-python"].shape_parts(X, *params, mode, 1e-5)
    assert np.abs(Ha - Hb).max() < tol
    assert np.abs(Aa - Ab).max() < tol


@needs_compiled
@pytest.mark.parametrize("dim", [2, 4, 6])
def test_inequality_stats_parity(dim):
    rng = np.random.default_rng(4)
    H = rng.uniform(-1, 1, (20_000, dim, dim))
    a = BACKENDS["compiled"].inequality_stats(H)
    b = BACKENDS["pure-python"].inequality_stats(H)
    assert (np.abs(a - b) / np.maximum(1.0, np.abs(b))).max() < 1e-12


@needs_compiled
def test_normalization_error_raised_by_both():
    from hopfbound.errors import NormalizationError
    x = canonical_center(1).coords[None, :]
    bump = BumpProfile(1.0, canonical_center(1), kind="const")
    coeffs = np.zeros(12)
    coeffs[1] = -1.0
    params = backend_params(FieldSpec.perturbed(1, coeffs, bump))
    for mod in BACKENDS.values():
        with pytest.raises(NormalizationError):
            mod.eval_field(x, *params)


def test_default_backend_prefers_compiled():
    if "compiled" in BACKENDS and not os.environ.get("HOPFBOUND_PURE_PYTHON"):
        assert backend_name() == "compiled"
    else:
        assert backend_name() == "pure-python"


def test_env_var_forces_pure_backend():
    code = ("import hopfbound; import sys; "
            "sys.exit(0 if hopfbound.backend_name() == 'pure-python' else 1)")
    env = dict(os.environ, HOPFBOUND_PURE_PYTHON="1")
    assert subprocess.run([sys.executable, "-c", code], env=env).returncode == 0


@needs_compiled
def test_full_suite_values_match_across_backends():
    """Spot-check a high-level quantity end to end under both backends."""
    code = (
        "import math, hopfbound as hb\n"
        "rule = hb.build_quadrature(hb.DomainSpec.full_sphere(1), 24, 12)\n"
        "rep = hb.energy(hb.FieldSpec.hopf(1), rule)\n"
        "assert abs(rep.energy - 5 * math.pi ** 2) < 1e-9, rep.energy\n"
        "assert hb.backend_name() == '%s', hb.backend_name()\n"
    )
    for name, flag in (("compiled", "0"), ("pure-python", "1")):
        env = dict(os.environ, HOPFBOUND_PURE_PYTHON=flag)
        proc = subprocess.run([sys.executable, "-c", code % name], env=env,
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
