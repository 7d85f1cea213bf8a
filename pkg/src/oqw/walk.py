"""Core model: walks over a vertex set with operator-valued transitions.

A walk is specified by per-site internal dimensions ``d_i`` and a sparse
family of transition operators ``L[to, from]`` (shape ``d_to x d_from``).
A walk is stochastic when for every source ``j`` the blocks satisfy
``sum_i L[i,j]† L[i,j] = Id``; substochastic families (mass leaking at
truncation edges) are representable and accepted by the structural
operations, but flagged by :func:`validate_walk`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InputError, ShapeError
from .linalg import COMPLEX, as_matrix, frozen, herm, is_psd

Site = str

DEFAULT_TOLERANCE = 1e-9


def _site_id(s) -> Site:
    return s if isinstance(s, str) else str(s)


@dataclass(frozen=True)
class WalkSpec:
    """Immutable walk specification.

    Parameters
    ----------
    sites : ordered site ids (coerced to ``str``).
    dims : site id -> internal dimension (>= 1).
    transitions : (target, source) -> complex matrix of shape
        (dims[target], dims[source]).  Blocks that are identically zero may
        simply be omitted.
    tolerance : absolute tolerance used by validation and by downstream
        numerical decisions that consult the walk.
    """

    sites: tuple[Site, ...]
    dims: Mapping[Site, int]
    transitions: Mapping[tuple[Site, Site], np.ndarray]
    tolerance: float = DEFAULT_TOLERANCE
    _succ: dict = field(init=False, repr=False, compare=False, default_factory=dict)
    _pred: dict = field(init=False, repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        sites = tuple(_site_id(s) for s in self.sites)
        if len(set(sites)) != len(sites):
            raise InputError("site ids are not unique")
        dims = {_site_id(s): int(d) for s, d in self.dims.items()}
        for s in sites:
            if s not in dims:
                raise InputError(f"missing dimension for site {s!r}")
            if dims[s] < 1:
                raise InputError(f"dimension of site {s!r} must be >= 1")
        trans: dict[tuple[Site, Site], np.ndarray] = {}
        for (to, fr), L in self.transitions.items():
            to, fr = _site_id(to), _site_id(fr)
            if to not in dims or fr not in dims:
                raise InputError(f"transition ({to!r}, {fr!r}) references unknown site")
            mat = as_matrix(L)
            if mat.shape != (dims[to], dims[fr]):
                raise ShapeError(
                    f"transition ({to!r}, {fr!r}) has shape {mat.shape}, "
                    f"expected {(dims[to], dims[fr])}"
                )
            if np.abs(mat).max(initial=0.0) == 0.0:
                continue
            trans[(to, fr)] = frozen(mat)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "dims", dict(dims))
        object.__setattr__(self, "transitions", trans)
        succ: dict[Site, list[Site]] = {s: [] for s in sites}
        pred: dict[Site, list[Site]] = {s: [] for s in sites}
        for s in sites:  # successor lists follow the declared site order
            for t in sites:
                if (t, s) in trans:
                    succ[s].append(t)
                    pred[t].append(s)
        object.__setattr__(self, "_succ", succ)
        object.__setattr__(self, "_pred", pred)

    def dim(self, site) -> int:
        return self.dims[_site_id(site)]

    @property
    def total_dim(self) -> int:
        return sum(self.dims[s] for s in self.sites)

    def block(self, to, fr) -> np.ndarray | None:
        return self.transitions.get((_site_id(to), _site_id(fr)))

    def successors(self, site) -> list[Site]:
        """Targets reachable in one step, in declared site order."""
        return list(self._succ[_site_id(site)])

    def predecessors(self, site) -> list[Site]:
        return list(self._pred[_site_id(site)])

    def column_defect(self, source) -> float:
        """Operator-norm residual of the stochasticity constraint at a source."""
        j = _site_id(source)
        acc = -np.eye(self.dims[j], dtype=COMPLEX)
        for (to, fr), L in self.transitions.items():
            if fr == j:
                acc = acc + L.conj().T @ L
        return float(np.linalg.norm(acc, 2))


@dataclass
class DiagonalState:
    """Block-diagonal state: site id -> PSD block.  Total trace <= 1.

    Sub-normalized states are first class; ``normalized`` only marks intent
    and is what :func:`check_state` enforces when set.
    """

    blocks: dict[Site, np.ndarray]
    normalized: bool = True

    def __post_init__(self):
        self.blocks = {_site_id(s): np.array(b, dtype=COMPLEX) for s, b in self.blocks.items()}

    def trace(self) -> float:
        return float(sum(np.trace(b).real for b in self.blocks.values()))

    def block(self, site, dim: int | None = None) -> np.ndarray:
        s = _site_id(site)
        if s in self.blocks:
            return self.blocks[s]
        if dim is None:
            raise KeyError(s)
        return np.zeros((dim, dim), dtype=COMPLEX)

    def copy(self) -> "DiagonalState":
        return DiagonalState({s: b.copy() for s, b in self.blocks.items()}, self.normalized)


@dataclass
class DiagonalObservable:
    """Block-diagonal observable: site id -> Hermitian block."""

    blocks: dict[Site, np.ndarray]

    def __post_init__(self):
        self.blocks = {_site_id(s): np.array(b, dtype=COMPLEX) for s, b in self.blocks.items()}

    def block(self, site, dim: int | None = None) -> np.ndarray:
        s = _site_id(site)
        if s in self.blocks:
            return self.blocks[s]
        if dim is None:
            raise KeyError(s)
        return np.zeros((dim, dim), dtype=COMPLEX)

    def copy(self) -> "DiagonalObservable":
        return DiagonalObservable({s: b.copy() for s, b in self.blocks.items()})


def identity_observable(walk: WalkSpec, sites: Iterable[Site] | None = None) -> DiagonalObservable:
    chosen = walk.sites if sites is None else [_site_id(s) for s in sites]
    return DiagonalObservable({s: np.eye(walk.dims[s], dtype=COMPLEX) for s in chosen})


def site_state(walk: WalkSpec, site, rho) -> DiagonalState:
    """State concentrated at one site."""
    s = _site_id(site)
    mat = as_matrix(rho)
    if mat.shape != (walk.dims[s], walk.dims[s]):
        raise ShapeError(f"state block at {s!r} has shape {mat.shape}, expected "
                         f"({walk.dims[s]}, {walk.dims[s]})")
    return DiagonalState({s: mat})


def check_state(walk: WalkSpec, state: DiagonalState, tol: float | None = None) -> None:
    """Raise InputError unless all blocks are PSD (and trace is 1 if normalized)."""
    tol = walk.tolerance if tol is None else tol
    for s, b in state.blocks.items():
        if s not in walk.dims:
            raise InputError(f"state block at unknown site {s!r}")
        if b.shape != (walk.dims[s], walk.dims[s]):
            raise ShapeError(f"state block at {s!r} has wrong shape {b.shape}")
        if not is_psd(b, max(tol, 1e-9)):
            raise InputError(f"state block at {s!r} is not positive semidefinite")
    if state.normalized and abs(state.trace() - 1.0) > max(tol, 1e-8):
        raise InputError(f"state trace is {state.trace()}, expected 1")


@dataclass
class ValidationReport:
    residuals: dict[Site, float]
    tolerance: float

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    @property
    def accepted(self) -> bool:
        return self.max_residual <= self.tolerance


def validate_walk(walk: WalkSpec) -> ValidationReport:
    """Per-source residuals of ``sum_i L[i,j]† L[i,j] = Id``.

    Shape errors are raised at :class:`WalkSpec` construction; here only the
    stochasticity defect is measured.
    """
    return ValidationReport(
        residuals={j: walk.column_defect(j) for j in walk.sites},
        tolerance=walk.tolerance,
    )


def apply_step(walk: WalkSpec, state: DiagonalState) -> DiagonalState:
    """One step of the walk: block at i becomes ``sum_j L[i,j] tau(j) L[i,j]†``."""
    out = {s: np.zeros((walk.dims[s], walk.dims[s]), dtype=COMPLEX) for s in walk.sites}
    for s, b in state.blocks.items():
        if s not in walk.dims:
            raise InputError(f"state block at unknown site {s!r}")
        for t in walk._succ[s]:
            L = walk.transitions[(t, s)]
            out[t] += L @ b @ L.conj().T
    return DiagonalState(out, normalized=state.normalized)


def dual_apply(walk: WalkSpec, obs: DiagonalObservable) -> DiagonalObservable:
    """Heisenberg step: block at j becomes ``sum_i L[i,j]† A(i) L[i,j]``."""
    out = {s: np.zeros((walk.dims[s], walk.dims[s]), dtype=COMPLEX) for s in walk.sites}
    for (to, fr), L in walk.transitions.items():
        a = obs.blocks.get(to)
        if a is not None:
            out[fr] += L.conj().T @ a @ L
    return DiagonalObservable(out)


def minimal_dilation(transition_matrix, labels: Sequence | None = None,
                     tolerance: float = DEFAULT_TOLERANCE) -> WalkSpec:
    """Walk with one-dimensional fibers ``L[i,j] = sqrt(t[i,j])``.

    ``transition_matrix`` must be column-stochastic with nonnegative entries;
    its trajectory law is that of the classical chain.
    """
    T = np.asarray(transition_matrix, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise InputError("transition matrix must be square")
    n = T.shape[0]
    if T.min(initial=0.0) < -1e-12:
        raise InputError("transition matrix has a negative entry")
    colsums = T.sum(axis=0)
    if np.abs(colsums - 1.0).max(initial=0.0) > max(tolerance, 1e-8):
        raise InputError(f"columns must sum to 1; worst defect {np.abs(colsums - 1.0).max()}")
    if labels is None:
        labels = [str(k) for k in range(n)]
    labels = [_site_id(s) for s in labels]
    trans = {}
    for i in range(n):
        for j in range(n):
            if T[i, j] > 0.0:
                trans[(labels[i], labels[j])] = np.array([[np.sqrt(T[i, j])]], dtype=COMPLEX)
    return WalkSpec(tuple(labels), {s: 1 for s in labels}, trans, tolerance)


def doubly_stochastic_defect(walk: WalkSpec) -> tuple[float, tuple[Site, Site] | None]:
    """Worst deviation from ``L[i,j] = L[j,i]†`` and the offending pair."""
    worst, pair = 0.0, None
    seen = set()
    for (to, fr) in list(walk.transitions):
        if (to, fr) in seen:
            continue
        seen.add((to, fr))
        seen.add((fr, to))
        a = walk.transitions[(to, fr)]
        b = walk.transitions.get((fr, to))
        d = a - (b.conj().T if b is not None else 0.0)
        defect = float(np.abs(d).max(initial=0.0))
        if defect > worst:
            worst, pair = defect, (to, fr)
    return worst, pair


def is_doubly_stochastic(walk: WalkSpec, tol: float | None = None) -> bool:
    defect, _ = doubly_stochastic_defect(walk)
    return defect <= (walk.tolerance if tol is None else tol)


@dataclass
class DetailedBalanceReport:
    sufficient_condition_holds: bool
    sufficient_residual: float
    selfadjoint_within_tol: bool
    selfadjoint_residual: float
    tolerance: float


def check_detailed_balance(walk: WalkSpec, tau: DiagonalState,
                           tol: float = 1e-8) -> DetailedBalanceReport:
    """Check reversibility of the walk with respect to a faithful state.

    (a) the pairwise sufficient condition
    ``tau(i)^{1/2} L[j,i]† = L[i,j] tau(j)^{1/2}`` for all i, j, and
    (b) selfadjointness of the dual step for the weighted inner product
    ``<X, Y> = Tr(tau^{1/2} X† tau^{1/2} Y)`` over a Hermitian block basis.
    """
    from .linalg import hermitian_basis, psd_sqrt

    roots = {}
    for s in walk.sites:
        b = tau.blocks.get(s)
        if b is None:
            raise InputError(f"reference state has no block at site {s!r}")
        w = np.linalg.eigvalsh(herm(b))
        if w.min() <= 1e-12:
            raise InputError(f"reference state is not faithful at site {s!r}")
        roots[s] = psd_sqrt(b)

    worst_a = 0.0
    for i in walk.sites:
        for j in walk.sites:
            Lji = walk.block(j, i)
            Lij = walk.block(i, j)
            lhs = roots[i] @ (Lji.conj().T if Lji is not None
                              else np.zeros((walk.dims[i], walk.dims[j]), dtype=COMPLEX))
            rhs = (Lij if Lij is not None
                   else np.zeros((walk.dims[i], walk.dims[j]), dtype=COMPLEX)) @ roots[j]
            worst_a = max(worst_a, float(np.abs(lhs - rhs).max(initial=0.0)))

    # selfadjointness on a basis of diagonal observables
    basis: list[DiagonalObservable] = []
    for s in walk.sites:
        for e in hermitian_basis(walk.dims[s]):
            basis.append(DiagonalObservable({s: e}))

    def inner(x: DiagonalObservable, y: DiagonalObservable) -> complex:
        acc = 0.0 + 0.0j
        for s in walk.sites:
            xb = x.blocks.get(s)
            yb = y.blocks.get(s)
            if xb is None or yb is None:
                continue
            acc += np.trace(roots[s] @ xb.conj().T @ roots[s] @ yb)
        return complex(acc)

    images = [dual_apply(walk, x) for x in basis]
    worst_b = 0.0
    for m, x in enumerate(basis):
        for n_, y in enumerate(basis):
            worst_b = max(worst_b, abs(inner(x, images[n_]) - inner(images[m], y)))

    return DetailedBalanceReport(
        sufficient_condition_holds=worst_a <= tol,
        sufficient_residual=worst_a,
        selfadjoint_within_tol=worst_b <= tol,
        selfadjoint_residual=worst_b,
        tolerance=tol,
    )
