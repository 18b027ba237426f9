"""Exact solver for the untwisted wire via its free-fermion mapping.

The length-l transverse-Ising chain (plus one auxiliary qubit that makes
the fermion problem quadratic) is encoded in an (l+1) x (l+1) symmetric
matrix A and antisymmetric matrix B.  Single-particle energies are the
square roots of the eigenvalues of 4M with M = (A+B)(A-B)/4.  Since
(A-B) = (A+B)^T, M = G G^T / 4 with G = A + B, so the energies are the
singular values of G; computing them that way keeps the exact zero mode
at machine precision instead of sqrt(eps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ZERO_MODE_TOL = 1e-8


@dataclass
class FermionMatrices:
    """Quadratic-form matrices of the mapped chain at scaled time s."""

    l: int
    s: float
    A: np.ndarray
    B: np.ndarray
    gamma: float  # constant offset (1-s) * l

    def __post_init__(self):
        d = self.l + 1
        if self.A.shape != (d, d) or self.B.shape != (d, d):
            raise ValueError("A and B must be (l+1) x (l+1)")
        if np.max(np.abs(self.A - self.A.T)) > 1e-14:
            raise ValueError("A must be symmetric")
        if np.max(np.abs(self.B + self.B.T)) > 1e-14:
            raise ValueError("B must be antisymmetric")

    def m_matrix(self) -> np.ndarray:
        """M = (A+B)(A-B)/4; symmetric positive semidefinite."""
        return (self.A + self.B) @ (self.A - self.B) / 4.0


@dataclass
class FermionModes:
    """Ascending single-particle energies; omegas[0] is the zero mode."""

    l: int
    s: float
    omegas: np.ndarray

    def __post_init__(self):
        self.omegas = np.asarray(self.omegas, dtype=float)
        if self.omegas.shape != (self.l + 1,):
            raise ValueError("expected l+1 modes")
        if np.any(self.omegas < -1e-10):
            raise ValueError("negative mode energy")
        if self.omegas[0] > ZERO_MODE_TOL:
            raise ValueError(f"zero mode missing: omega_0 = {self.omegas[0]:.3e}")

    @property
    def nonzero(self) -> np.ndarray:
        return self.omegas[1:]

    @property
    def min_nonzero(self) -> float:
        return float(self.omegas[1])


def build_matrices(l: int, s: float, transverse=None, exchange=None) -> FermionMatrices:
    """A_ij = -s(d_{j,i+1}+d_{i,j+1}) - 2(1-s) d_ij (1-d_i0); B_ij = -s(d_{j,i+1}-d_{i,j+1}).

    ``transverse`` (length l, sites 1..l) and ``exchange`` (length l,
    bonds 0..l-1) multiply the corresponding couplings; default is 1.
    """
    if l < 1:
        raise ValueError("need l >= 1")
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s={s} outside [0, 1]")
    t = np.ones(l) if transverse is None else np.asarray(transverse, dtype=float)
    e = np.ones(l) if exchange is None else np.asarray(exchange, dtype=float)
    if t.shape != (l,) or e.shape != (l,):
        raise ValueError("coupling multipliers must have length l")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(e))):
        raise ValueError("coupling multipliers must be finite")
    d = l + 1
    A = np.zeros((d, d))
    B = np.zeros((d, d))
    A[np.arange(1, d), np.arange(1, d)] = -2.0 * (1.0 - s) * t
    off = -s * e
    idx = np.arange(l)
    A[idx, idx + 1] = off
    A[idx + 1, idx] = off
    B[idx, idx + 1] = off
    B[idx + 1, idx] = -off
    return FermionMatrices(l, s, A, B, (1.0 - s) * l)


def modes_numeric(m: FermionMatrices) -> FermionModes:
    """Singular values of A+B, ascending (= sqrt eigenvalues of 4M)."""
    sv = np.linalg.svd(m.A + m.B, compute_uv=False)
    return FermionModes(m.l, m.s, np.sort(sv))


def closed_form_modes(l: int, s: float) -> FermionModes:
    """omega_k(s)^2 = 4 (1 - 2 s (1-s) [1 - cos(k pi / (l+1))]), k = 1..l, plus the zero mode."""
    if l < 1:
        raise ValueError("need l >= 1")
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s={s} outside [0, 1]")
    k = np.arange(1, l + 1)
    om2 = 4.0 * (1.0 - 2.0 * s * (1.0 - s) * (1.0 - np.cos(k * np.pi / (l + 1))))
    om = np.sqrt(np.maximum(om2, 0.0))
    return FermionModes(l, s, np.sort(np.concatenate(([0.0], om))))


def zero_mode_vector(l: int, s: float) -> np.ndarray:
    """Unnormalized null vector of M: components ((s-1)/s)^(l-i), i = 0..l."""
    if not 0.0 < s <= 1.0:
        raise ValueError("zero-mode vector is defined for 0 < s <= 1")
    r = (s - 1.0) / s
    i = np.arange(l + 1)
    if abs(r) <= 1.0:
        return r ** (l - i)
    return (1.0 / r) ** i  # same ray, scaled by r^-l to avoid overflow


def zero_mode_residual(l: int, s: float) -> float:
    """||M phi|| / ||phi|| for the closed-form null vector."""
    phi = zero_mode_vector(l, s)
    m = build_matrices(l, s).m_matrix()
    return float(np.linalg.norm(m @ phi) / np.linalg.norm(phi))


def wire_gap(n: int, s: float) -> float:
    """Gap of the n-qubit wire above its two-fold degenerate ground space.

    The n-qubit wire carries n-1 encoded spins that split by parity into
    two uncoupled transverse-Ising chains, of floor(n/2) and floor((n-1)/2)
    sites; the gap is the smallest nonzero mode over both (always the longer
    chain's, cross-checked against exact diagonalization).
    """
    if n < 2:
        raise ValueError("wire needs n >= 2")
    gaps = [closed_form_modes(l, s).min_nonzero
            for l in {n // 2, (n - 1) // 2} if l >= 1]
    return min(gaps)


def perturbed_modes(l: int, s: float, lam: float, seed: int) -> FermionModes:
    """Modes with every coupling scaled by (1+u), u ~ Uniform[-lam, lam] from ``seed``."""
    if lam < 0:
        raise ValueError("perturbation scale must be >= 0")
    rng = np.random.default_rng(seed)
    u = rng.uniform(-lam, lam, size=2 * l)
    return modes_numeric(build_matrices(l, s, transverse=1.0 + u[:l], exchange=1.0 + u[l:]))
