"""Variational matrix-product-state ground and excited states for 1D chains.

Two-site update sweeps against an MPO assembled from the Pauli term list;
excited states are found by penalizing projectors onto previously found
states, re-orthogonalized against each sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse.linalg as spla

from .model import InterpolationSpec, PauliTerm, assemble, factor_matrix


def mpo_from_terms(terms: Sequence[PauliTerm], n: int) -> list[np.ndarray]:
    """MPO tensors (Dl, Dr, p_out, p_in) with one channel per term per bond."""
    spans = []
    for t in terms:
        sites = sorted(t.factors)
        spans.append((sites[0], sites[-1]))
    # channel layout per bond: 0 = before, 1.. = active terms, last = after
    bond_channels: list[dict[int, int]] = [dict() for _ in range(n + 1)]
    widths = [2] * (n + 1)
    for idx, (a, b) in enumerate(spans):
        for bond in range(a, b):
            bond_channels[bond][idx] = widths[bond] - 1
            widths[bond] += 1
    widths[0] = widths[n] = 2
    eye = np.eye(2, dtype=complex)
    ws = []
    for site in range(1, n + 1):
        dl, dr = widths[site - 1], widths[site]
        w = np.zeros((dl, dr, 2, 2), dtype=complex)
        w[0, 0] = eye
        w[dl - 1, dr - 1] = eye
        ws.append(w)
    for idx, (t, (a, b)) in enumerate(zip(terms, spans)):
        for site in range(a, b + 1):
            f = t.factors.get(site)
            mat = factor_matrix(f) if f is not None else eye
            if site == a:
                mat = t.coefficient * mat
            row = 0 if site == a else bond_channels[site - 1][idx]
            col = (widths[site] - 1) if site == b else bond_channels[site][idx]
            if site == a == b:
                ws[site - 1][0, widths[site] - 1] += mat
            else:
                ws[site - 1][row, col] += mat
    # boundary vectors: keep only row 0 at the left edge, last column right
    ws[0] = ws[0][:1]
    ws[-1] = ws[-1][:, -1:]
    return ws


@dataclass
class MpsState:
    """Site tensors (chiL, 2, chiR) in mixed-canonical form."""

    tensors: list[np.ndarray]
    energy: float = math.nan
    variance: float = math.nan
    truncation_error: float = 0.0
    converged: bool = False
    sweeps: int = 0

    @property
    def n(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def norm(self) -> float:
        e = np.ones((1, 1), dtype=complex)
        for t in self.tensors:
            e = np.tensordot(np.tensordot(e, t.conj(), axes=([0], [0])), t,
                             axes=([0, 1], [0, 1]))
        return float(abs(e[0, 0]))

    def overlap(self, other: "MpsState") -> complex:
        e = np.ones((1, 1), dtype=complex)
        for a, b in zip(self.tensors, other.tensors):
            e = np.tensordot(np.tensordot(e, a.conj(), axes=([0], [0])), b,
                             axes=([0, 1], [0, 1]))
        return complex(e[0, 0])


def random_mps(n: int, chi: int, seed: int) -> MpsState:
    rng = np.random.default_rng(seed)
    tensors = []
    dims = [1] + [min(chi, 2 ** min(i, n - i)) for i in range(1, n)] + [1]
    for i in range(n):
        shape = (dims[i], 2, dims[i + 1])
        t = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        tensors.append(t)
    mps = MpsState(tensors)
    _right_canonicalize(mps)
    return mps


def _right_canonicalize(mps: MpsState):
    for i in range(mps.n - 1, 0, -1):
        t = mps.tensors[i]
        dl, p, dr = t.shape
        q, r = np.linalg.qr(t.reshape(dl, p * dr).conj().T)
        k = q.shape[1]
        mps.tensors[i] = q.conj().T.reshape(k, p, dr)
        prev = mps.tensors[i - 1]
        mps.tensors[i - 1] = np.tensordot(prev, r.conj().T, axes=([2], [0]))
    t0 = mps.tensors[0]
    mps.tensors[0] = t0 / np.linalg.norm(t0)


def _mpo_expectation(mps: MpsState, ws: list[np.ndarray]) -> float:
    e = np.zeros((1, ws[0].shape[0], 1), dtype=complex)
    e[0, 0, 0] = 1.0
    for t, w in zip(mps.tensors, ws):
        e = _transfer_left(e, t, w)
    return float(np.real(e[0, -1, 0]))


def _mpo_variance(mps: MpsState, ws: list[np.ndarray]) -> float:
    """<H^2> - <H>^2 via a two-layer MPO environment."""
    d0 = ws[0].shape[0]
    e = np.zeros((1, d0, d0, 1), dtype=complex)
    e[0, 0, 0, 0] = 1.0
    for t, w in zip(mps.tensors, ws):
        # e(a, w1, w2, b); contract bra tensor, both MPO layers, ket tensor
        e = np.tensordot(e, t.conj(), axes=([0], [0]))        # (w1,w2,b, p*,a')
        e = np.tensordot(e, w, axes=([0, 3], [0, 2]))          # (w2,b,a', w1', p)
        e = np.tensordot(e, w, axes=([0, 4], [0, 2]))          # (b,a',w1', w2', p)
        e = np.tensordot(e, t, axes=([0, 4], [0, 1]))          # (a',w1',w2', b')
    h2 = float(np.real(e[0, -1, -1, 0]))
    h1 = _mpo_expectation(mps, ws)
    return h2 - h1 * h1


def _transfer_left(e, t, w):
    # e (a, w, b) -> contract bra t*, MPO w, ket t
    e = np.tensordot(e, t.conj(), axes=([0], [0]))     # (w, b, p*, a')
    e = np.tensordot(e, w, axes=([0, 2], [0, 2]))      # (b, a', w', p)
    e = np.tensordot(e, t, axes=([0, 3], [0, 1]))      # (a', w', b')
    return e


def _transfer_right(e, t, w):
    # e (a, w, b) at the right edge of the active window
    e = np.tensordot(t.conj(), e, axes=([2], [0]))     # (a, p*, w, b)
    e = np.tensordot(w, e, axes=([1, 2], [2, 1]))      # (wl, p, a, b)
    e = np.tensordot(t, e, axes=([1, 2], [1, 3]))      # (bl, wl, a) -> (b, w, a)
    return np.transpose(e, (2, 1, 0))


class _TwoSiteProblem:
    """Effective two-site Hamiltonian with optional projector penalties.

    The left environment is pre-contracted with the first MPO tensor and the
    right environment with the second, so a matvec is two tensordots.
    """

    def __init__(self, lenv, renv, w1, w2, penalties):
        self.penalties = penalties  # list of (weight, local vector)
        al, ar = lenv.shape[0], renv.shape[0]
        wm = w1.shape[1]
        self.shape = (al, 2, 2, ar)
        self.dim = al * 4 * ar
        # LW (a_bra, q1_out, wm, a_ket, p1_in) flattened for one GEMM
        lw = np.ascontiguousarray(np.transpose(
            np.tensordot(lenv, w1, axes=([1], [0])), (0, 3, 2, 1, 4)))
        self.lw2 = lw.reshape(al * 2 * wm, al * 2)
        # RW (wm, p2_in, b_ket, q2_out, b_bra) flattened for the second GEMM
        rw = np.ascontiguousarray(np.transpose(
            np.tensordot(w2, renv, axes=([1], [1])), (0, 2, 4, 1, 3)))
        self.rw2 = rw.reshape(wm * 2 * ar, 2 * ar)
        self.al, self.ar, self.wm = al, ar, wm

    def matvec(self, x):
        # y1 rows run over (a_bra, q1, wm); columns (p2, b_ket)
        y1 = self.lw2 @ x.reshape(self.al * 2, 2 * self.ar)
        out = (y1.reshape(self.al * 2, self.wm * 2 * self.ar) @ self.rw2).reshape(-1)
        for weight, v in self.penalties:
            out += (weight * np.vdot(v, x)) * v
        return out

    def solve(self, v0, tol=1e-10):
        x = v0.reshape(-1).astype(complex)
        nrm = np.linalg.norm(x)
        if nrm == 0:
            x = np.ones(self.dim, dtype=complex)
            nrm = np.linalg.norm(x)
        x /= nrm
        if self.dim <= 8:
            h = np.zeros((self.dim, self.dim), dtype=complex)
            for j in range(self.dim):
                e = np.zeros(self.dim, dtype=complex)
                e[j] = 1.0
                h[:, j] = self.matvec(e)
            vals, vecs = np.linalg.eigh(h)
            return float(vals[0]), vecs[:, 0]
        val = math.inf
        for _ in range(2):  # restart once if the Krylov space was too small
            val, x, resid = _lanczos_lowest(self.matvec, x, min(self.dim, 24),
                                            max(tol, 1e-8))
            if resid < tol:
                break
        return val, x


def _lanczos_lowest(matvec, v0, kdim, tol=1e-9):
    """Lowest Ritz pair from a Krylov space grown until the residual estimate
    beta_j |y_last| drops below ``tol`` (or kdim is reached)."""
    dim = v0.shape[0]
    basis = np.empty((kdim, dim), dtype=complex)
    basis[0] = v0
    alphas: list[float] = []
    betas: list[float] = []
    w = matvec(v0)
    val = math.inf
    y = np.array([1.0])
    j = 0
    for j in range(kdim):
        alphas.append(float(np.real(np.vdot(basis[j], w))))
        # full reorthogonalization against the stored basis (two GEMVs)
        c = basis[: j + 1].conj() @ w
        w = w - basis[: j + 1].T @ c
        c = basis[: j + 1].conj() @ w
        w = w - basis[: j + 1].T @ c
        beta = float(np.linalg.norm(w))
        tri = np.diag(alphas)
        for i, b in enumerate(betas):
            tri[i, i + 1] = tri[i + 1, i] = b
        vals, vecs = np.linalg.eigh(tri)
        val, y = float(vals[0]), vecs[:, 0]
        resid = beta * abs(y[-1])
        if resid < tol or beta < 1e-14 or j == kdim - 1:
            break
        betas.append(beta)
        basis[j + 1] = w / beta
        w = matvec(basis[j + 1])
    ritz = y @ basis[: j + 1]
    ritz /= np.linalg.norm(ritz)
    return val, ritz, resid


def ground_state(spec: InterpolationSpec, s: float, chi_max: int = 64,
                 tol: float = 1e-9, max_sweeps: int = 40, seed: int = 0,
                 orthogonal_to: Sequence[MpsState] = (),
                 penalty_weight: float = 10.0,
                 svd_tol: float = 1e-12) -> MpsState:
    """Two-site variational sweep for the lowest state (in the penalized space).

    With ``orthogonal_to`` non-empty, previously found states are penalized
    by ``penalty_weight`` times their projectors, which converges to the
    lowest state orthogonal to them.
    """
    n = spec.n_qubits
    terms = assemble(spec, s)
    ws = mpo_from_terms(terms, n)
    mps = random_mps(n, min(8, chi_max), seed)
    lenvs: list = [None] * (n + 1)
    renvs: list = [None] * (n + 1)
    d0, dn = ws[0].shape[0], ws[-1].shape[1]
    lenvs[0] = np.zeros((1, d0, 1), dtype=complex)
    lenvs[0][0, 0, 0] = 1.0
    renvs[n] = np.zeros((1, dn, 1), dtype=complex)
    renvs[n][0, -1, 0] = 1.0
    for i in range(n - 1, 0, -1):
        renvs[i] = _transfer_right(renvs[i + 1], mps.tensors[i], ws[i])
    # overlap environments against each penalized state
    olenvs = [[None] * (n + 1) for _ in orthogonal_to]
    orenvs = [[None] * (n + 1) for _ in orthogonal_to]
    for j, other in enumerate(orthogonal_to):
        olenvs[j][0] = np.ones((1, 1), dtype=complex)
        orenvs[j][n] = np.ones((1, 1), dtype=complex)
        for i in range(n - 1, 0, -1):
            orenvs[j][i] = _overlap_right(orenvs[j][i + 1], mps.tensors[i],
                                          other.tensors[i])

    def solve_bond(i: int, to_right: bool):
        nonlocal trunc_total
        th = np.tensordot(mps.tensors[i], mps.tensors[i + 1], axes=([2], [0]))
        pens = []
        for j, other in enumerate(orthogonal_to):
            vo = np.tensordot(olenvs[j][i], other.tensors[i], axes=([1], [0]))
            vo = np.tensordot(vo, other.tensors[i + 1], axes=([2], [0]))
            vo = np.tensordot(vo, orenvs[j][i + 2], axes=([3], [1]))
            pens.append((penalty_weight, vo.reshape(-1)))
        prob = _TwoSiteProblem(lenvs[i], renvs[i + 2], ws[i], ws[i + 1], pens)
        _, vec = prob.solve(th)
        dl, _, _, dr = prob.shape
        u, sv, vh = np.linalg.svd(vec.reshape(dl * 2, 2 * dr), full_matrices=False)
        keep = max(min(chi_max, int(np.sum(sv > svd_tol)), len(sv)), 1)
        trunc_total += float(np.sum(sv[keep:] ** 2))
        u, sv, vh = u[:, :keep], sv[:keep], vh[:keep]
        sv /= np.linalg.norm(sv)
        if to_right:  # center moves to site i+1
            mps.tensors[i] = u.reshape(dl, 2, keep)
            mps.tensors[i + 1] = (np.diag(sv) @ vh).reshape(keep, 2, dr)
            lenvs[i + 1] = _transfer_left(lenvs[i], mps.tensors[i], ws[i])
            for j, other in enumerate(orthogonal_to):
                olenvs[j][i + 1] = _overlap_left(olenvs[j][i], mps.tensors[i],
                                                 other.tensors[i])
        else:  # center moves to site i; tensor i+1 turns right-canonical
            mps.tensors[i] = (u @ np.diag(sv)).reshape(dl, 2, keep)
            mps.tensors[i + 1] = vh.reshape(keep, 2, dr)
            renvs[i + 1] = _transfer_right(renvs[i + 2], mps.tensors[i + 1],
                                           ws[i + 1])
            for j, other in enumerate(orthogonal_to):
                orenvs[j][i + 1] = _overlap_right(orenvs[j][i + 2],
                                                  mps.tensors[i + 1],
                                                  other.tensors[i + 1])

    energy = math.inf
    trunc_total = 0.0
    for sweep in range(1, max_sweeps + 1):
        trunc_total = 0.0
        for i in range(n - 1):
            solve_bond(i, to_right=True)
        for i in range(n - 2, -1, -1):
            solve_bond(i, to_right=False)
        new_energy = _mpo_expectation(mps, ws)
        if abs(new_energy - energy) < tol:
            energy = new_energy
            mps.converged = True
            mps.sweeps = sweep
            break
        energy = new_energy
        mps.sweeps = sweep
    mps.energy = energy
    mps.variance = _mpo_variance(mps, ws)
    mps.truncation_error = trunc_total
    return mps


def _overlap_left(e, t, other_t):
    # e (a_self, a_other)
    e = np.tensordot(e, t.conj(), axes=([0], [0]))       # (a_o, p*, a')
    e = np.tensordot(e, other_t, axes=([0, 1], [0, 1]))  # (a', a_o')
    return e


def _overlap_right(e, t, other_t):
    e = np.tensordot(t.conj(), e, axes=([2], [0]))       # (a, p*, a_o)
    e = np.tensordot(e, other_t, axes=([1, 2], [1, 2]))  # (a, a_o_l)
    return e


@dataclass
class ManifoldGap:
    energies: list[float]
    manifold_size: int
    gap: float
    states: list[MpsState] = field(repr=False, default_factory=list)


def gap_above_manifold(spec: InterpolationSpec, s: float, chi_max: int = 64,
                       tol: float = 1e-9, seed: int = 0, max_excited: int = 3,
                       manifold_tol_per_site: float = 1e-8,
                       expect_manifold: int | None = 2) -> ManifoldGap:
    """Energy of the first state above the (near-degenerate) ground manifold.

    Finds the ground state then up to ``max_excited`` penalty-orthogonalized
    excited states; states within ``manifold_tol_per_site * n`` of the ground
    energy count as manifold.  Wire runs must find a manifold of size 2.
    """
    n = spec.n_qubits
    states = [ground_state(spec, s, chi_max, tol, seed=seed)]
    energies = [states[0].energy]
    gap_est = 5.0 / n
    manifold_tol = manifold_tol_per_site * n
    gap = None
    for k in range(1, max_excited + 1):
        st = ground_state(spec, s, chi_max, tol, seed=seed + 17 * k,
                          orthogonal_to=states,
                          penalty_weight=10.0 * max(gap_est, 0.5))
        states.append(st)
        energies.append(st.energy)
        if st.energy - energies[0] > manifold_tol:
            gap = st.energy - energies[0]
            break
        gap_est = max(gap_est, st.energy - energies[0])
    manifold = sum(1 for e in energies if e - energies[0] <= manifold_tol)
    if gap is None:
        raise RuntimeError("no state above the ground manifold found; "
                           "increase max_excited")
    if expect_manifold is not None and manifold != expect_manifold:
        raise RuntimeError(
            f"ground manifold size {manifold} != expected {expect_manifold}: "
            "convergence failure")
    return ManifoldGap(energies, manifold, gap, states)
