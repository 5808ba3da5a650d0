import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from hopfbound.sphere import (DomainSpec, SpherePoint, TangentVector,
                              adapted_frame, apply_complex_structure,
                              build_quadrature, canonical_center, complex_structure,
                              project_tangent, random_point, random_points,
                              random_tangent, rule_from_payload, rule_to_payload)
from tests.util import cap_volume_k1


def test_project_tangent_already_tangent():
    x = SpherePoint([1.0, 0.0, 0.0, 0.0])
    out = project_tangent(x, [0.0, 1.0, 0.0, 0.0])
    np.testing.assert_array_equal(out.vec, [0.0, 1.0, 0.0, 0.0])


def test_project_tangent_pure_normal():
    x = SpherePoint([1.0, 0.0, 0.0, 0.0])
    out = project_tangent(x, [1.0, 0.0, 0.0, 0.0])
    np.testing.assert_array_equal(out.vec, [0.0, 0.0, 0.0, 0.0])


def test_project_tangent_linearity():
    x = SpherePoint([1.0, 0.0, 0.0, 0.0])
    out = project_tangent(x, [2.0, 3.0, 0.0, 0.0])
    np.testing.assert_array_equal(out.vec, [0.0, 3.0, 0.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_project_tangent_idempotent(seed):
    rng = np.random.default_rng(seed)
    x = random_point(1, rng)
    w = rng.standard_normal(4) * 3.0
    once = project_tangent(x, w)
    twice = project_tangent(x, once.vec)
    assert np.abs(twice.vec - once.vec).max() < 1e-12


def test_complex_structure_on_basis_vector():
    np.testing.assert_array_equal(apply_complex_structure([1.0, 0, 0, 0]),
                                  [0.0, 1.0, 0.0, 0.0])


def test_complex_structure_squares_to_minus_identity():
    w = np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(
        apply_complex_structure(apply_complex_structure(w)), -w)


def test_complex_structure_skew():
    w = np.array([1.0, 2.0, 3.0, 4.0])
    assert apply_complex_structure(w) @ w == 0.0


def test_complex_structure_rejects_odd_length():
    with pytest.raises(ValueError):
        apply_complex_structure([1.0, 2.0, 3.0])


def test_complex_structure_k_mismatch():
    with pytest.raises(ValueError):
        apply_complex_structure([1.0, 0.0, 0.0, 0.0], k=2)


def test_complex_structure_isometry_bulk():
    rng = np.random.default_rng(0)
    W = rng.standard_normal((10_000, 4))
    JW = W @ complex_structure(1).T
    assert np.abs(np.linalg.norm(JW, axis=1)
                  - np.linalg.norm(W, axis=1)).max() < 1e-12


def test_matrix_matches_componentwise_map():
    rng = np.random.default_rng(1)
    for k in (1, 2):
        w = rng.standard_normal(2 * k + 2)
        np.testing.assert_array_equal(complex_structure(k) @ w,
                                      apply_complex_structure(w, k))


def test_sphere_point_validation():
    with pytest.raises(ValueError):
        SpherePoint([1.0, 1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        SpherePoint([1.0, 0.0])  # ambient dim too small


def test_tangent_vector_validation():
    x = SpherePoint([1.0, 0, 0, 0])
    with pytest.raises(ValueError):
        TangentVector(x, [0.5, 1.0, 0.0, 0.0])


def test_full_sphere_volume_k1():
    rule = build_quadrature(DomainSpec.full_sphere(1))
    assert abs(rule.volume - 2 * math.pi ** 2) < 1e-6


def test_half_cap_volume_k1():
    rule = build_quadrature(DomainSpec.cap(canonical_center(1), math.pi / 2))
    # oracle: independent 1-D quadrature of the area density
    oracle, _ = quad(lambda r: 4 * math.pi * math.sin(r) ** 2, 0, math.pi / 2)
    assert abs(oracle - math.pi ** 2) < 1e-12
    assert abs(rule.volume - oracle) < 1e-6


def test_tiny_cap_volume_goes_to_zero():
    rule = build_quadrature(DomainSpec.cap(canonical_center(1), 1e-3), 8, 4)
    assert rule.volume < 1e-8


@pytest.mark.parametrize("rho0", [0.5, 1.0, math.pi / 2, 2.0, math.pi])
def test_cap_volume_closed_form_k1(rho0):
    rule = build_quadrature(DomainSpec.cap(canonical_center(1), rho0), 32, 16)
    assert abs(rule.volume - cap_volume_k1(rho0)) < 1e-6


def test_cap_pi_equals_full_sphere_volume():
    full = build_quadrature(DomainSpec.full_sphere(1), 32, 16)
    cap = build_quadrature(DomainSpec.cap(canonical_center(1), math.pi), 32, 16)
    assert abs(full.volume - cap.volume) < 1e-12


def test_full_sphere_volume_k2():
    rule = build_quadrature(DomainSpec.full_sphere(2), 16, 10)
    assert abs(rule.volume - math.pi ** 3) / math.pi ** 3 < 1e-6


def test_quadrature_convergence_under_doubling():
    v1 = build_quadrature(DomainSpec.full_sphere(1), 64, 32).volume
    v2 = build_quadrature(DomainSpec.full_sphere(1), 128, 64).volume
    assert abs(v1 - v2) < 1e-6


def test_weights_positive_and_boundary_nodes_on_rim():
    rule = build_quadrature(DomainSpec.cap(canonical_center(1), 1.0), 8, 4)
    assert np.all(rule.weights > 0)
    assert rule.boundary_nodes.shape[0] > 0
    dots = rule.boundary_nodes @ canonical_center(1).coords
    assert np.abs(np.arccos(dots) - 1.0).max() < 1e-12


def test_full_sphere_has_no_boundary_nodes(rule_full_k1):
    assert rule_full_k1.boundary_nodes.shape[0] == 0


def test_domain_validation():
    with pytest.raises(ValueError):
        DomainSpec.cap(canonical_center(1), 0.0)
    with pytest.raises(ValueError):
        DomainSpec.cap(canonical_center(1), math.pi + 0.1)
    with pytest.raises(ValueError):
        DomainSpec("cap", 1, center=None, radius=1.0)


def test_resolution_validation():
    with pytest.raises(ValueError):
        build_quadrature(DomainSpec.full_sphere(1), 1, 8)
    with pytest.raises(ValueError):
        build_quadrature(DomainSpec.full_sphere(1), 8, 1)


def test_adapted_frame_forced_complement():
    x = SpherePoint([1.0, 0, 0, 0])
    v = TangentVector(x, [0.0, 1.0, 0, 0])
    frame = adapted_frame(x, v)
    # legs span {e3, e4} up to orthogonal mixing
    span = frame.legs[:, 2:]
    assert np.abs(frame.legs[:, :2]).max() < 1e-14
    assert np.abs(span @ span.T - np.eye(2)).max() < 1e-14


def test_adapted_frame_gram_identity():
    rng = np.random.default_rng(5)
    for k in (1, 2):
        for _ in range(25):
            x = random_point(k, rng)
            v = random_tangent(x, rng)
            assert adapted_frame(x, v).gram_deviation() < 1e-10


def test_adapted_frame_rejects_non_unit():
    x = SpherePoint([1.0, 0, 0, 0])
    v = TangentVector(x, [0.0, 0.5, 0, 0])
    with pytest.raises(ValueError):
        adapted_frame(x, v)


def test_quadrature_json_round_trip_bit_exact(tmp_path, rule_cap1_k1):
    payload = rule_to_payload(rule_cap1_k1)
    text = json.dumps(payload)
    back = rule_from_payload(json.loads(text))
    np.testing.assert_array_equal(back.nodes, rule_cap1_k1.nodes)
    np.testing.assert_array_equal(back.weights, rule_cap1_k1.weights)
    np.testing.assert_array_equal(back.boundary_nodes, rule_cap1_k1.boundary_nodes)
    assert back.domain.to_payload() == rule_cap1_k1.domain.to_payload()
    # a second serialization is byte-identical
    assert json.dumps(rule_to_payload(back)) == text


def test_rule_payload_is_versioned(rule_cap1_k1):
    payload = rule_to_payload(rule_cap1_k1)
    assert payload["schema"] == "hopfbound/quadrature"
    assert payload["version"] == 1
    with pytest.raises(ValueError):
        rule_from_payload({**payload, "version": 99})


def test_random_points_are_unit():
    X = random_points(2, 100, np.random.default_rng(0))
    assert np.abs(np.linalg.norm(X, axis=1) - 1).max() < 1e-12
