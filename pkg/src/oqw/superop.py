"""Superoperator assembly and fixed points of the one-step map.

A :class:`Superoperator` is the dense block matrix of a map on stacked
column-major vectorized blocks; blocks are restricted to masked source and
target sites.  Everything downstream (capture series, Dirichlet solvers) is
built from these matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalError
from .linalg import COMPLEX, herm, kraus_block, positive_part, spectral_radius, unvec, vec
from .walk import DiagonalObservable, DiagonalState, Site, WalkSpec, _site_id


@dataclass(frozen=True)
class BlockIndex:
    """Offsets of per-site vectorized blocks inside a stacked vector."""

    sites: tuple[Site, ...]
    offsets: dict
    total: int

    @classmethod
    def build(cls, walk: WalkSpec, sites) -> "BlockIndex":
        sites = tuple(_site_id(s) for s in sites)
        offsets = {}
        off = 0
        for s in sites:
            d2 = walk.dims[s] ** 2
            offsets[s] = (off, off + d2)
            off += d2
        return cls(sites, offsets, off)

    def pack_state(self, walk: WalkSpec, state: DiagonalState) -> np.ndarray:
        x = np.zeros(self.total, dtype=COMPLEX)
        for s in self.sites:
            b = state.blocks.get(s)
            if b is not None:
                lo, hi = self.offsets[s]
                x[lo:hi] = vec(b)
        return x

    def pack_observable(self, walk: WalkSpec, obs: DiagonalObservable) -> np.ndarray:
        x = np.zeros(self.total, dtype=COMPLEX)
        for s in self.sites:
            b = obs.blocks.get(s)
            if b is not None:
                lo, hi = self.offsets[s]
                x[lo:hi] = vec(b)
        return x

    def unpack(self, walk: WalkSpec, x: np.ndarray) -> dict:
        out = {}
        for s in self.sites:
            lo, hi = self.offsets[s]
            out[s] = unvec(x[lo:hi], walk.dims[s])
        return out

    def trace_vector(self, walk: WalkSpec) -> np.ndarray:
        """Vector t with t† x = sum of block traces."""
        t = np.zeros(self.total, dtype=COMPLEX)
        for s in self.sites:
            lo, hi = self.offsets[s]
            t[lo:hi] = vec(np.eye(walk.dims[s], dtype=COMPLEX))
        return t


@dataclass(frozen=True)
class Superoperator:
    """Dense matrix of a masked one-step map on vectorized blocks."""

    walk: WalkSpec
    source_index: BlockIndex
    target_index: BlockIndex
    matrix: np.ndarray

    def apply(self, state: DiagonalState) -> DiagonalState:
        x = self.source_index.pack_state(self.walk, state)
        return DiagonalState(self.target_index.unpack(self.walk, self.matrix @ x),
                             normalized=False)

    def dual_apply(self, obs: DiagonalObservable) -> DiagonalObservable:
        y = self.target_index.pack_observable(self.walk, obs)
        return DiagonalObservable(self.source_index.unpack(self.walk, self.matrix.conj().T @ y))

    def spectral_radius(self) -> float:
        return spectral_radius(self.matrix)


def assemble_superoperator(walk: WalkSpec, source_mask=None, target_mask=None) -> Superoperator:
    """Matrix of the one-step map with sources and targets restricted to masks.

    Block (i, j) is ``kron(conj(L[i,j]), L[i,j])`` and is present iff
    j is in the source mask, i in the target mask, and L[i,j] is nonzero.
    Empty masks give an empty (but valid) operator.
    """
    sources = walk.sites if source_mask is None else [s for s in walk.sites
                                                      if s in {_site_id(x) for x in source_mask}]
    targets = walk.sites if target_mask is None else [s for s in walk.sites
                                                      if s in {_site_id(x) for x in target_mask}]
    if source_mask is not None:
        unknown = {_site_id(x) for x in source_mask} - set(walk.sites)
        if unknown:
            raise InputError(f"source mask has unknown sites {sorted(unknown)}")
    if target_mask is not None:
        unknown = {_site_id(x) for x in target_mask} - set(walk.sites)
        if unknown:
            raise InputError(f"target mask has unknown sites {sorted(unknown)}")
    src = BlockIndex.build(walk, sources)
    tgt = BlockIndex.build(walk, targets)
    m = np.zeros((tgt.total, src.total), dtype=COMPLEX)
    for (to, fr), L in walk.transitions.items():
        if fr in src.offsets and to in tgt.offsets:
            r0, r1 = tgt.offsets[to]
            c0, c1 = src.offsets[fr]
            m[r0:r1, c0:c1] += kraus_block(L)
    return Superoperator(walk, src, tgt, m)


def _fixed_space(matrix: np.ndarray, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal bases of ker(M - I) and ker(M† - I) via SVD."""
    from scipy.linalg import null_space

    a = matrix - np.eye(matrix.shape[0], dtype=COMPLEX)
    right = null_space(a, rcond=tol)
    left = null_space(a.conj().T, rcond=tol)
    return right, left


def fixed_point_projection(matrix: np.ndarray, x: np.ndarray,
                           tol: float = 1e-9) -> tuple[np.ndarray, int]:
    """Spectral projection of x onto the eigenvalue-1 eigenspace of M.

    Equals the Cesaro limit of ``mean_k M^k x`` when the peripheral spectrum
    is semisimple (true for trace-preserving completely positive maps).
    Returns the projected vector and the fixed-space dimension.
    """
    right, left = _fixed_space(matrix, tol)
    k = right.shape[1]
    if k == 0:
        return np.zeros_like(x), 0
    if left.shape[1] != k:
        raise NumericalError("left/right fixed spaces have different dimensions",
                             {"right": k, "left": left.shape[1]})
    gram = left.conj().T @ right
    coeff = np.linalg.solve(gram, left.conj().T @ x)
    return right @ coeff, k


def invariant_state(walk: WalkSpec, tol: float = 1e-9) -> tuple[DiagonalState | None, int]:
    """A normalized fixed point of the one-step map, plus the fixed-space dimension.

    The state is the exact Cesaro limit of the iteration started from the
    maximally mixed state (spectral projection at eigenvalue 1), with its
    blocks projected back to the PSD cone and renormalized.  Returns
    ``(None, 0)`` when no normalized positive fixed point exists, e.g. for
    substochastic truncations.
    """
    full = assemble_superoperator(walk)
    idx = full.source_index
    uniform = DiagonalState(
        {s: np.eye(walk.dims[s], dtype=COMPLEX) / walk.total_dim for s in walk.sites})
    x = idx.pack_state(walk, uniform)
    proj, k = fixed_point_projection(full.matrix, x, tol)
    if k == 0:
        return None, 0
    blocks = idx.unpack(walk, proj)
    blocks = {s: positive_part(herm(b)) for s, b in blocks.items()}
    total = sum(float(np.trace(b).real) for b in blocks.values())
    if total < 1e-8:
        return None, k
    state = DiagonalState({s: b / total for s, b in blocks.items()})
    # fixed-point residual in trace norm
    from .walk import apply_step
    stepped = apply_step(walk, state)
    resid = sum(np.abs(np.linalg.eigvalsh(herm(stepped.blocks[s] - state.blocks[s]))).sum()
                for s in walk.sites)
    if resid > 1e-7:
        raise NumericalError("projected fixed point fails the invariance check",
                             {"residual": float(resid)})
    return state, k
