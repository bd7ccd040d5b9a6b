"""Gaussian scalar field on a ring evolved by ``H = K + L``.

``K`` is the free massive field and ``L`` the dilation generator
``-(1/alpha) int zeta (pi d_zeta phi + h.c.)/2``.  The phase-space coordinates
are ``x = (phi_1..phi_n, p_1..p_n)`` with lattice momenta ``p_i = dz pi_i``, so
``[phi_i, p_j] = i delta_ij`` and the symplectic form is the standard block
``[[0, 1], [-1, 0]]``.  A quadratic Hamiltonian ``H = x^T M x / 2`` then moves
covariances by ``S = exp(Omega M t)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, sqrtm

SYMMETRY_TOL = 1e-13
UNCERTAINTY_TOL = 1e-8


def symplectic_form(n: int) -> np.ndarray:
    z = np.zeros((n, n))
    one = np.eye(n)
    return np.block([[z, one], [-one, z]])


def ring_laplacian(n: int) -> np.ndarray:
    """Circulant ``2, -1, -1`` matrix: ``phi^T L phi = sum (phi_{i+1} - phi_i)^2``."""
    lap = 2 * np.eye(n)
    idx = np.arange(n)
    lap[idx, (idx + 1) % n] -= 1
    lap[idx, (idx - 1) % n] -= 1
    return lap


def centered_difference(n: int, dz: float) -> np.ndarray:
    d = np.zeros((n, n))
    idx = np.arange(n)
    d[idx, (idx + 1) % n] += 1 / (2 * dz)
    d[idx, (idx - 1) % n] -= 1 / (2 * dz)
    return d


@dataclass(frozen=True)
class QuadraticHamiltonian:
    n: int
    dz: float
    alpha: float
    m: float
    mk: np.ndarray
    ml: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.mk + self.ml

    @property
    def zeta(self) -> np.ndarray:
        return (np.arange(self.n) - self.n / 2) * self.dz

    def dispersion(self) -> np.ndarray:
        """``omega_k`` for the ring momenta ``k = 2 pi q / (n dz)``, ``q = 0..n-1``."""
        k = 2 * np.pi * np.arange(self.n) / (self.n * self.dz)
        return np.sqrt(self.m**2 + (2 / self.dz * np.sin(k * self.dz / 2)) ** 2)


def build_hamiltonian(n: int, dz: float, alpha: float, m: float) -> QuadraticHamiltonian:
    if n < 4 or n % 2:
        raise ValueError("n must be even and at least 4")
    if not (dz > 0 and alpha > 0 and m >= 0) or not np.isfinite([dz, alpha, m]).all():
        raise ValueError("need dz > 0, alpha > 0 and m >= 0")
    z = np.zeros((n, n))
    phiphi = ring_laplacian(n) / dz + dz * m**2 * np.eye(n)
    mk = np.block([[phiphi, z], [z, np.eye(n) / dz]])
    zeta = (np.arange(n) - n / 2) * dz
    # H_L = sum_i p_i (-zeta_i / alpha) (D phi)_i
    c = -(zeta[:, None] * centered_difference(n, dz)) / alpha
    ml = np.block([[z, c.T], [c, z]])
    mk = (mk + mk.T) / 2
    ml = (ml + ml.T) / 2
    return QuadraticHamiltonian(n, dz, alpha, m, mk, ml)


@dataclass(frozen=True)
class GaussianFieldState:
    n: int
    dz: float
    cov: np.ndarray

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (2 * self.n, 2 * self.n):
            raise ValueError(f"covariance must be {2 * self.n}x{2 * self.n}")
        if not np.isfinite(cov).all():
            raise ValueError("covariance has non-finite entries")
        object.__setattr__(self, "cov", (cov + cov.T) / 2)

    @property
    def omega(self) -> np.ndarray:
        return symplectic_form(self.n)

    def uncertainty_violation(self) -> float:
        """Most negative eigenvalue of ``cov + (i/2) Omega`` (0 when physical)."""
        ev = np.linalg.eigvalsh(self.cov + 0.5j * self.omega)
        return float(max(0.0, -ev.min()))

    def energy(self, h: QuadraticHamiltonian, which: str = "total") -> float:
        m = {"total": h.total, "k": h.mk, "l": h.ml}[which]
        return 0.5 * float(np.sum(m * self.cov))


def ground_state(h: QuadraticHamiltonian) -> GaussianFieldState:
    """Ground state of ``K`` alone; needs ``m > 0`` so that no zero mode remains."""
    n = h.n
    b = h.mk[:n, :n]
    if h.m <= 0 or np.linalg.eigvalsh(b).min() <= 0:
        raise ValueError("ground state needs m > 0")
    # with K = p^2/(2 dz) + phi^T B phi / 2 the ground covariances are functions of B/dz
    root = np.real(sqrtm(b / h.dz))
    cov_phi = 0.5 * np.linalg.inv(root) / h.dz
    cov_p = 0.5 * h.dz * root
    z = np.zeros((n, n))
    return GaussianFieldState(n, h.dz, np.block([[cov_phi, z], [z, cov_p]]))


def propagator(m: np.ndarray, dtau: float) -> np.ndarray:
    return expm(symplectic_form(m.shape[0] // 2) @ m * dtau)


def evolve_covariance(
    state: GaussianFieldState, m: np.ndarray, dtau: float, steps: int, callback=None
) -> GaussianFieldState:
    """Apply ``S = exp(Omega M dtau)`` ``steps`` times; ``callback(step, cov)`` after each."""
    if not dtau > 0 or steps < 1:
        raise ValueError("need dtau > 0 and steps >= 1")
    m = np.asarray(m, dtype=float)
    if not np.isfinite(m).all():
        raise ValueError("Hamiltonian has non-finite entries")
    s = propagator(m, dtau)
    cov = state.cov
    for step in range(1, steps + 1):
        cov = s @ cov @ s.T
        if callback is not None:
            callback(step, cov)
    return GaussianFieldState(state.n, state.dz, cov)


def check_canonical(s: np.ndarray) -> float:
    s = np.asarray(s)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] % 2:
        raise ValueError("need a square matrix of even size")
    om = symplectic_form(s.shape[0] // 2)
    return float(np.max(np.abs(s.T @ om @ s - om)))


def two_point(state: GaussianFieldState, i: int, j: int, which: str = "phiphi") -> float:
    """Symmetrized field moments ``<phi phi>``, ``<pi pi>`` or ``<phi pi>`` (``pi = p/dz``)."""
    n = state.n
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"site out of range 0..{n - 1}")
    if which == "phiphi":
        return float(state.cov[i, j])
    if which == "pipi":
        return float(state.cov[n + i, n + j]) / state.dz**2
    if which == "phipi":
        return float(state.cov[i, n + j]) / state.dz
    raise ValueError(f"unknown correlator {which!r}")


def ground_correlator(h: QuadraticHamiltonian, separation) -> np.ndarray:
    """``<phi(0) phi(s)>`` in the ``K`` ground state from the mode sum, any real ``s``."""
    q = np.arange(h.n) - h.n // 2
    k = 2 * np.pi * q / (h.n * h.dz)
    w = np.sqrt(h.m**2 + (2 / h.dz * np.sin(k * h.dz / 2)) ** 2)
    s = np.atleast_1d(np.asarray(separation, dtype=float))
    return (np.cos(np.outer(s, k)) / (2 * h.dz * w)).sum(axis=1) / h.n
