import math

import numpy as np


def cap_volume_k1(rho0: float) -> float:
    """Independent closed form for the k=1 cap volume (elementary integral
    of the surface-area density 4*pi*sin(rho)^2)."""
    return 2.0 * math.pi * (rho0 - math.sin(rho0) * math.cos(rho0))


def symplectic_orthogonal(k: int, seed: int) -> np.ndarray:
    """Orthogonal matrix commuting with the complex structure: the real form
    of a random complex unitary under the interleaved pairing."""
    rng = np.random.default_rng(seed)
    m = k + 1
    Z = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    U, _ = np.linalg.qr(Z)
    Q = np.zeros((2 * m, 2 * m))
    for a in range(m):
        for b in range(m):
            Q[2 * a, 2 * b] = U[a, b].real
            Q[2 * a, 2 * b + 1] = -U[a, b].imag
            Q[2 * a + 1, 2 * b] = U[a, b].imag
            Q[2 * a + 1, 2 * b + 1] = U[a, b].real
    return Q
