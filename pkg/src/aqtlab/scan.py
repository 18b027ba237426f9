"""Deterministic experiment scans: seed derivation, worker pools, recipes.

Every scan cell derives its own seed from the master seed and its labels,
so results are independent of scheduling; outputs are sorted before
writing, which keeps bytes identical across worker counts.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import ed, freefermion, mps
from .model import (TwistedGraph, build_square_lattice, build_twisted_chain,
                    mirror_twists)


def derive_seed(master_seed: int, *labels) -> int:
    """Collision-resistant 64-bit seed from the master seed and labels."""
    h = hashlib.sha256()
    h.update(str(int(master_seed)).encode())
    for lab in labels:
        h.update(b"\x1f")
        h.update(repr(lab).encode())
    return int.from_bytes(h.digest()[:8], "big")


def worker_count() -> int:
    env = os.environ.get("AQT_THREADS")
    if env:
        return max(1, int(env))
    return min(os.cpu_count() or 1, 4)


def run_cells(fn, cells, workers: int | None = None):
    """Map ``fn`` over cells, in parallel when allowed; order preserved."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, cells, chunksize=1))


def default_chi(n: int) -> int:
    """Bond dimension schedule for chains at the gap minimum."""
    if n <= 16:
        return 24
    if n <= 32:
        return 32
    if n <= 48:
        return 48
    return 64


@dataclass(frozen=True)
class ChainCell:
    family: str
    n: int
    sample: int
    seed: int
    s: float
    chi: int


def random_chain_cell(cell: ChainCell) -> dict:
    """One 1D scaling sample: mirror-symmetric random angles, MPS gap."""
    rng = np.random.default_rng(cell.seed)
    free = rng.uniform(0.0, 2.0 * np.pi, size=(cell.n - 2 + 1) // 2)
    twists = mirror_twists(free, cell.n)
    _, spec = build_twisted_chain(cell.n, twists)
    result = mps.gap_above_manifold(spec, cell.s, chi_max=cell.chi)
    return {
        "family": cell.family,
        "n": cell.n,
        "seed": cell.seed,
        "s": cell.s,
        "gap": result.gap,
        "chi": cell.chi,
        "variance": max(st.variance for st in result.states),
    }


def scaling_scan(sizes, samples: int, master_seed: int, family: str = "random1d",
                 s: float = 0.5, chi: int | None = None,
                 workers: int | None = None) -> list[dict]:
    cells = [
        ChainCell(family, int(n), k, derive_seed(master_seed, family, int(n), k),
                  s, chi or default_chi(int(n)))
        for n in sizes for k in range(samples)
    ]
    return run_cells(random_chain_cell, cells, workers)


@dataclass(frozen=True)
class LatticeCell:
    L: int
    sample: int
    seed: int  # 0 marks the untwisted reference run
    s: float
    m: int


def lattice_cell(cell: LatticeCell) -> dict:
    if cell.seed == 0:
        angles = {}
    else:
        rng = np.random.default_rng(cell.seed)
        angles = {}
        for i in range(1, cell.L + 1):
            for j in range(i, cell.L + 1):
                th = rng.uniform(0.0, 2.0 * np.pi)
                angles[(i, j)] = th
                angles[(j, i)] = th
    _, spec = build_square_lattice(cell.L, angles, dual_symmetric=True)
    sl = ed.low_spectrum(spec, cell.s, m=cell.m)
    return {
        "L": cell.L,
        "n": cell.L * cell.L,
        "seed": cell.seed,
        "s": cell.s,
        "gap": sl.gap,
        "e0": float(sl.eigenvalues[0]),
        "ground_degeneracy": sl.ground_degeneracy,
        "twisted": int(cell.seed != 0),
    }


def lattice_scan(sizes, samples: int, master_seed: int, s: float = 0.5,
                 include_untwisted: bool = True,
                 workers: int | None = None) -> list[dict]:
    cells = []
    for L in sizes:
        if include_untwisted:
            cells.append(LatticeCell(int(L), -1, 0, s, 4))
        for k in range(samples):
            cells.append(
                LatticeCell(int(L), k, derive_seed(master_seed, "lattice2d", int(L), k),
                            s, 4))
    return run_cells(lattice_cell, cells, workers)


def wire_mode_rows(n: int, s_values, lam: float = 0.0, seeds=()) -> list[dict]:
    """Single-particle modes of a wire's two chains, union-sorted per s."""
    chains = sorted({n // 2, (n - 1) // 2} - {0})
    rows = []
    seed_list = list(seeds) if lam > 0 else [None]
    for seed in seed_list:
        for s in s_values:
            modes = []
            for li, l in enumerate(chains):
                if seed is None:
                    modes.extend(freefermion.closed_form_modes(l, float(s)).omegas)
                else:
                    sub = derive_seed(seed, "chain", li)
                    modes.extend(
                        freefermion.perturbed_modes(l, float(s), lam, sub).omegas)
            for k, om in enumerate(sorted(modes)):
                row = {"n": n, "s": float(s), "k": k, "omega": float(om)}
                if seed is not None:
                    row["seed"] = seed
                rows.append(row)
    return rows
