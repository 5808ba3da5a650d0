import pytest

from hopfbound.sphere import DomainSpec, build_quadrature, canonical_center


@pytest.fixture(scope="session")
def rule_full_k1():
    return build_quadrature(DomainSpec.full_sphere(1))


@pytest.fixture(scope="session")
def rule_cap1_k1():
    return build_quadrature(DomainSpec.cap(canonical_center(1), 1.0), 32, 16)


@pytest.fixture(scope="session")
def rule_cap1_k2():
    return build_quadrature(DomainSpec.cap(canonical_center(2), 1.0), 8, 6)
