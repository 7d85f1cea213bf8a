"""Passage, visit, return-time and exit statistics via capture series.

Every operator here is a sum over taboo paths: paths from ``i`` to ``j``
whose intermediate vertices avoid a forbidden set.  With ``S`` the one-step
map restricted to allowed interior sites, ``E`` the entry step out of ``i``
and ``C`` the capture step into ``j``, the path sum is

    direct + C (Id - S)^{-1} E,

computed by dense linear solves.  Interior sites that cannot be reached
from ``i`` or cannot reach ``j`` contribute nothing and are dropped before
the solve; that keeps the resolvent nonsingular whenever the retained
series converges.  When the retained interior still has spectral radius
within ``DIVERGENCE_TOL`` of 1, computations fall back to the
length-weighted family (weight ``alpha`` per step) and a monotone limit
``alpha -> 1``.

Infinity is a first-class value: expectations return ``math.inf`` together
with diagnostics, never an exception, when the underlying series diverges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError
from .linalg import (
    COMPLEX,
    extend_basis,
    herm,
    is_psd,
    kraus_block,
    spectral_radius,
    unvec,
    vec,
)
from .superop import BlockIndex
from .walk import DiagonalState, Site, WalkSpec, _site_id, check_state

ALPHA_GRID = (0.9, 0.99, 0.999, 0.9999)
DIVERGENCE_TOL = 1e-7
PASSAGE_SURE_TOL = 1e-6  # passage probabilities closer to 1 than this count as certain


# ---------------------------------------------------------------------------
# capture-series plumbing


def _nonzero(walk: WalkSpec, to: Site, fr: Site) -> bool:
    L = walk.transitions.get((to, fr))
    return L is not None and float(np.abs(L).max(initial=0.0)) > walk.tolerance


def _forward_reachable(walk: WalkSpec, seeds, allowed) -> set:
    allowed = set(allowed)
    seen = set()
    frontier = [s for s in seeds if s in allowed]
    while frontier:
        nxt = []
        for s in frontier:
            if s in seen:
                continue
            seen.add(s)
            for t in walk._succ[s]:
                if t in allowed and t not in seen:
                    nxt.append(t)
        frontier = nxt
    return seen


def _backward_reachable(walk: WalkSpec, targets, allowed) -> set:
    allowed = set(allowed)
    seen = set()
    frontier = [s for s in allowed if any(_nonzero(walk, t, s) for t in targets)]
    while frontier:
        nxt = []
        for s in frontier:
            if s in seen:
                continue
            seen.add(s)
            for p in walk._pred[s]:
                if p in allowed and p not in seen:
                    nxt.append(p)
        frontier = nxt
    return seen


@dataclass
class CaptureSeries:
    """Matrices of the taboo-path decomposition for one (i, j, taboo) triple."""

    walk: WalkSpec
    source: Site
    target: Site
    taboo: frozenset
    interior: tuple[Site, ...]
    direct: np.ndarray | None   # L[j, i], None if absent
    S: np.ndarray               # interior -> interior
    E: np.ndarray               # {i} -> interior
    C: np.ndarray               # interior -> {j}
    interior_radius: float

    @property
    def convergent(self) -> bool:
        return self.interior_radius < 1.0 - DIVERGENCE_TOL

    def matrix(self, alpha: float = 1.0) -> np.ndarray:
        """Vec-matrix of the (alpha-weighted) taboo path sum, d_j^2 x d_i^2."""
        walk = self.walk
        dj2 = walk.dims[self.target] ** 2
        di2 = walk.dims[self.source] ** 2
        m = np.zeros((dj2, di2), dtype=COMPLEX)
        if self.direct is not None:
            m += alpha * kraus_block(self.direct)
        if self.S.shape[0]:
            resolvent = np.linalg.solve(
                np.eye(self.S.shape[0], dtype=COMPLEX) - alpha * self.S, self.E)
            m += (alpha ** 2) * (self.C @ resolvent)
        return m

    def length_terms(self, max_len: int) -> list[np.ndarray]:
        """Per-length vec-matrices of the path sum, lengths 1..max_len."""
        walk = self.walk
        dj2 = walk.dims[self.target] ** 2
        di2 = walk.dims[self.source] ** 2
        terms = [np.zeros((dj2, di2), dtype=COMPLEX) for _ in range(max_len)]
        if self.direct is not None:
            terms[0] = kraus_block(self.direct)
        if self.S.shape[0]:
            power = self.E.copy()
            for ell in range(2, max_len + 1):
                terms[ell - 1] = terms[ell - 1] + self.C @ power
                power = self.S @ power
        return terms


def capture_series(walk: WalkSpec, i, j, taboo=()) -> CaptureSeries:
    """Build the capture decomposition for paths i -> j avoiding the taboo set.

    Intermediate vertices must avoid ``taboo`` and the target ``j``; the
    endpoints are unconstrained.
    """
    i, j = _site_id(i), _site_id(j)
    taboo = frozenset(_site_id(s) for s in taboo)
    unknown = ({i, j} | taboo) - set(walk.sites)
    if unknown:
        raise InputError(f"unknown sites {sorted(unknown)}")
    allowed = [s for s in walk.sites if s not in taboo and s != j]
    entry_seeds = [t for t in walk._succ[i] if t in set(allowed)]
    reach = _forward_reachable(walk, entry_seeds, allowed)
    coreach = _backward_reachable(walk, [j], allowed)
    interior = tuple(s for s in allowed if s in reach and s in coreach)

    idx = BlockIndex.build(walk, interior)
    S = np.zeros((idx.total, idx.total), dtype=COMPLEX)
    for (to, fr), L in walk.transitions.items():
        if to in idx.offsets and fr in idx.offsets:
            r0, r1 = idx.offsets[to]
            c0, c1 = idx.offsets[fr]
            S[r0:r1, c0:c1] += kraus_block(L)
    di2 = walk.dims[i] ** 2
    dj2 = walk.dims[j] ** 2
    E = np.zeros((idx.total, di2), dtype=COMPLEX)
    for t in walk._succ[i]:
        if t in idx.offsets:
            r0, r1 = idx.offsets[t]
            E[r0:r1, :] += kraus_block(walk.transitions[(t, i)])
    C = np.zeros((dj2, idx.total), dtype=COMPLEX)
    for s in interior:
        L = walk.transitions.get((j, s))
        if L is not None:
            c0, c1 = idx.offsets[s]
            C[:, c0:c1] += kraus_block(L)
    return CaptureSeries(
        walk=walk, source=i, target=j, taboo=taboo, interior=interior,
        direct=walk.transitions.get((j, i)), S=S, E=E, C=C,
        interior_radius=spectral_radius(S),
    )


# ---------------------------------------------------------------------------
# taboo-path operators


@dataclass
class CPMapBlock:
    """A completely positive block map ``I_1(h_source) -> I_1(h_target)``.

    ``matrix`` acts on column-major vectorized blocks.  ``alpha`` is the
    per-step weight used to build it (None for the unweighted map), and
    ``diagnostics`` records the interior spectral radius and the method
    ("solve" for a direct resolvent, "alpha_limit" for the extrapolated
    weighted family).
    """

    source: Site
    target: Site
    source_dim: int
    target_dim: int
    matrix: np.ndarray
    taboo: frozenset
    alpha: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.target_dim)

    def dual_apply(self, x: np.ndarray) -> np.ndarray:
        return unvec(self.matrix.conj().T @ vec(x), self.source_dim)

    def dual_identity(self) -> np.ndarray:
        """Dual map applied to the identity; Hermitian, bounded by Id."""
        return herm(self.dual_apply(np.eye(self.target_dim, dtype=COMPLEX)))

    def choi(self) -> np.ndarray:
        """Choi matrix (unnormalized) of the represented map."""
        ds, dt = self.source_dim, self.target_dim
        c = np.zeros((ds * dt, ds * dt), dtype=COMPLEX)
        for k in range(ds):
            for l in range(ds):
                e = np.zeros((ds, ds), dtype=COMPLEX)
                e[k, l] = 1.0
                c[np.ix_(range(k * dt, (k + 1) * dt), range(l * dt, (l + 1) * dt))] = \
                    self.apply(e)
        return c

    def is_completely_positive(self, tol: float = 1e-8) -> bool:
        return is_psd(self.choi(), tol)

    def is_contraction(self, tol: float = 1e-8) -> bool:
        w = np.linalg.eigvalsh(self.dual_identity())
        return bool(w.min(initial=0.0) >= -tol and w.max(initial=0.0) <= 1.0 + tol)


def _alpha_limit_matrix(series: CaptureSeries) -> tuple[np.ndarray, dict]:
    mats = [series.matrix(a) for a in ALPHA_GRID]
    dj = series.walk.dims[series.target]
    duals = [herm(unvec(m.conj().T @ vec(np.eye(dj, dtype=COMPLEX)),
                        series.walk.dims[series.source])) for m in mats]
    for a, b in zip(duals, duals[1:]):
        if np.linalg.eigvalsh(herm(b - a)).min(initial=0.0) < -1e-8:
            raise NumericalError(
                "alpha-weighted family is not monotone; no limit detected",
                {"spectral_radius": series.interior_radius})
    deltas = [float(np.abs(b - a).max(initial=0.0)) for a, b in zip(mats, mats[1:])]
    if deltas[-1] > max(1e-12, 0.9 * deltas[-2]):
        raise NumericalError(
            "alpha-weighted family does not converge on the grid",
            {"spectral_radius": series.interior_radius, "deltas": deltas})
    # entrywise Aitken on the last three grid points
    m1, m2, m3 = mats[-3], mats[-2], mats[-1]
    d1, d2 = m2 - m1, m3 - m2
    denom = d1 - d2
    safe = np.abs(denom) > 1e-14
    accel = m3.copy()
    accel[safe] = m3[safe] + d2[safe] * d2[safe] / denom[safe]
    return accel, {"spectral_radius": series.interior_radius, "method": "alpha_limit",
                   "alpha_grid": list(ALPHA_GRID)}


def taboo_operator(walk: WalkSpec, i, j, taboo=()) -> CPMapBlock:
    """Taboo-path operator ``rho -> sum_paths L_path rho L_path†``.

    Paths run from ``i`` to ``j``; intermediate vertices avoid ``taboo`` and
    ``j`` itself.  The default ``taboo=()`` gives the first-passage operator.
    """
    series = capture_series(walk, i, j, taboo)
    if series.convergent:
        m = series.matrix()
        diag = {"spectral_radius": series.interior_radius, "method": "solve"}
    else:
        m, diag = _alpha_limit_matrix(series)
    return CPMapBlock(
        source=series.source, target=series.target,
        source_dim=walk.dims[series.source], target_dim=walk.dims[series.target],
        matrix=m, taboo=series.taboo, alpha=None, diagnostics=diag)


def alpha_operator(walk: WalkSpec, i, j, taboo=(), alpha: float = 0.5) -> CPMapBlock:
    """Length-weighted taboo operator: every step carries a factor ``alpha``."""
    if not (0.0 < alpha < 1.0):
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    series = capture_series(walk, i, j, taboo)
    return CPMapBlock(
        source=series.source, target=series.target,
        source_dim=walk.dims[series.source], target_dim=walk.dims[series.target],
        matrix=series.matrix(alpha), taboo=series.taboo, alpha=alpha,
        diagnostics={"spectral_radius": series.interior_radius, "method": "solve"})


# ---------------------------------------------------------------------------
# scalar statistics


def passage_probability(walk: WalkSpec, i, rho, j) -> float:
    """Probability that the walk started at (i, rho) ever visits j."""
    rho = np.asarray(rho, dtype=COMPLEX)
    check_state(walk, DiagonalState({_site_id(i): rho}))
    op = taboo_operator(walk, i, j)
    p = float(np.trace(op.apply(rho)).real)
    if p < -1e-6 or p > 1.0 + 1e-6:
        raise NumericalError(f"passage probability {p} escapes [0, 1]", op.diagnostics)
    return min(1.0, max(0.0, p))


@dataclass
class ExpectationResult:
    """A possibly infinite expectation with solver diagnostics."""

    value: float
    diagnostics: dict

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)

    def __float__(self) -> float:
        return self.value


def _krylov_radius(P: np.ndarray, seed: np.ndarray, tol: float = 1e-10) -> tuple[float, np.ndarray]:
    """Spectral radius of P restricted to the Krylov span of the seed."""
    basis = np.zeros((P.shape[0], 0), dtype=COMPLEX)
    v = seed.reshape(-1, 1)
    for _ in range(P.shape[0]):
        before = basis.shape[1]
        basis = extend_basis(basis, v, tol=tol)
        if basis.shape[1] == before:
            break
        v = P @ basis[:, before:]
    if basis.shape[1] == 0:
        return 0.0, basis
    return spectral_radius(basis.conj().T @ P @ basis), basis


def expected_visits(walk: WalkSpec, i, rho, j) -> ExpectationResult:
    """Expected number of visits to j from (i, rho); may be ``inf``.

    Finite values come from the resolvent ``(Id - P_jj)^{-1} P_ji``; when the
    return operator has spectral radius 1 on the reachable part, the
    length-weighted family is evaluated on an increasing alpha grid and the
    growth of its traces decides between a finite extrapolated limit and
    infinity.
    """
    rho = np.asarray(rho, dtype=COMPLEX)
    check_state(walk, DiagonalState({_site_id(i): rho}))
    first = taboo_operator(walk, i, j)
    sigma = first.apply(rho)
    tr_sigma = float(np.trace(sigma).real)
    if tr_sigma <= 1e-14:
        return ExpectationResult(0.0, {"method": "solve", "first_passage_mass": tr_sigma})
    returns = capture_series(walk, j, j)
    if returns.convergent:
        P = returns.matrix()
        radius = spectral_radius(P)
        if radius < 1.0 - DIVERGENCE_TOL:
            x = np.linalg.solve(np.eye(P.shape[0], dtype=COMPLEX) - P, vec(sigma))
            val = float(np.vdot(vec(np.eye(walk.dims[_site_id(j)], dtype=COMPLEX)), x).real)
            return ExpectationResult(val, {"method": "solve", "spectral_radius": radius})
        kr_radius, basis = _krylov_radius(P, vec(sigma))
        if kr_radius < 1.0 - DIVERGENCE_TOL:
            Pr = basis.conj().T @ P @ basis
            xr = np.linalg.solve(np.eye(Pr.shape[0], dtype=COMPLEX) - Pr,
                                 basis.conj().T @ vec(sigma))
            tvec = basis.conj().T @ vec(np.eye(walk.dims[_site_id(j)], dtype=COMPLEX))
            val = float(np.vdot(tvec, xr).real)
            return ExpectationResult(val, {"method": "solve",
                                           "spectral_radius": kr_radius,
                                           "restricted": True})
    return _alpha_limit_trace(walk, i, rho, j)


def _alpha_limit_trace(walk: WalkSpec, i, rho, j) -> ExpectationResult:
    j = _site_id(j)
    first = capture_series(walk, _site_id(i), j)
    returns = capture_series(walk, j, j)
    dj = walk.dims[j]
    tvec = vec(np.eye(dj, dtype=COMPLEX))
    values = []
    for a in ALPHA_GRID:
        sig = first.matrix(a) @ vec(np.asarray(rho, dtype=COMPLEX))
        P = returns.matrix(a)
        x = np.linalg.solve(np.eye(P.shape[0], dtype=COMPLEX) - P, sig)
        values.append(float(np.vdot(tvec, x).real))
    diag = {"method": "alpha_limit", "alpha_grid": list(ALPHA_GRID),
            "alpha_values": values,
            "spectral_radius": returns.interior_radius}
    inc = [b - a for a, b in zip(values, values[1:])]
    if values[-1] > 1e12 or (inc[-1] > 1e-9 and inc[-1] > 1.5 * inc[-2]):
        return ExpectationResult(math.inf, diag)
    settled = abs(inc[-1]) <= max(1e-9, 1e-6 * abs(values[-1]))
    if settled or inc[-1] < 0.9 * inc[-2]:  # flat or geometric-looking tail
        v1, v2, v3 = values[-3:]
        denom = (v2 - v1) - (v3 - v2)
        val = v3 + (v3 - v2) ** 2 / denom if abs(denom) > 1e-14 else v3
        return ExpectationResult(float(val), diag)
    raise NumericalError("alpha limit of expected visits is inconclusive", diag)


def expected_return_time(walk: WalkSpec, i, rho, j) -> ExpectationResult:
    """Expected first-passage time from (i, rho) to j; ``inf`` when the
    passage probability falls short of 1 or the weighted series diverges."""
    rho = np.asarray(rho, dtype=COMPLEX)
    p = passage_probability(walk, i, rho, j)
    if p < 1.0 - PASSAGE_SURE_TOL:
        return ExpectationResult(math.inf, {"method": "passage_deficit",
                                            "passage_probability": p})
    series = capture_series(walk, i, j)
    dj = walk.dims[series.target]
    tvec = vec(np.eye(dj, dtype=COMPLEX))
    m1 = 0.0
    if series.direct is not None:
        m1 = float(np.trace(series.direct @ rho @ series.direct.conj().T).real)
    if series.convergent:
        if series.S.shape[0]:
            eye = np.eye(series.S.shape[0], dtype=COMPLEX)
            y = np.linalg.solve(eye - series.S, series.E @ vec(rho))
            z = np.linalg.solve(eye - series.S, y)
            val = m1 + float(np.vdot(tvec, series.C @ (y + z)).real)
        else:
            val = m1
        diag = {"method": "solve", "spectral_radius": series.interior_radius,
                "passage_probability": p,
                "fd_check": _return_time_fd(series, rho, p)}
        return ExpectationResult(val, diag)
    # weighted-derivative fallback on the alpha grid
    derivs = []
    for a in ALPHA_GRID:
        derivs.append(_weighted_time_derivative(series, rho, a))
    inc = [b - a for a, b in zip(derivs, derivs[1:])]
    diag = {"method": "alpha_limit", "alpha_grid": list(ALPHA_GRID),
            "alpha_values": derivs, "spectral_radius": series.interior_radius,
            "passage_probability": p}
    if derivs[-1] > 1e12 or (inc[-1] > 1e-9 and inc[-1] > 1.5 * inc[-2]):
        return ExpectationResult(math.inf, diag)
    if abs(inc[-1]) <= max(1e-9, 1e-6 * abs(derivs[-1])) or inc[-1] < 0.9 * inc[-2]:
        v1, v2, v3 = derivs[-3:]
        denom = (v2 - v1) - (v3 - v2)
        val = v3 + (v3 - v2) ** 2 / denom if abs(denom) > 1e-14 else v3
        return ExpectationResult(float(val), diag)
    return ExpectationResult(math.inf, diag)


def _weighted_time_derivative(series: CaptureSeries, rho: np.ndarray, alpha: float) -> float:
    """d/dalpha of the weighted passage mass, evaluated exactly at alpha."""
    dj = series.walk.dims[series.target]
    tvec = vec(np.eye(dj, dtype=COMPLEX))
    m1 = 0.0
    if series.direct is not None:
        m1 = float(np.trace(series.direct @ rho @ series.direct.conj().T).real)
    if not series.S.shape[0]:
        return m1
    eye = np.eye(series.S.shape[0], dtype=COMPLEX)
    y = np.linalg.solve(eye - alpha * series.S, series.E @ vec(rho))
    z = np.linalg.solve(eye - alpha * series.S, series.S @ y)
    term = np.vdot(tvec, series.C @ (2 * alpha * y + alpha * alpha * z)).real
    return m1 + float(term)


def _return_time_fd(series: CaptureSeries, rho: np.ndarray, p_at_one: float) -> float:
    """Richardson finite-difference check of d/dalpha at alpha = 1^-."""
    def mass(a: float) -> float:
        m = series.matrix(a)
        dj = series.walk.dims[series.target]
        return float(np.trace(unvec(m @ vec(rho), dj)).real)

    h = 1e-4
    d1 = (p_at_one - mass(1.0 - h)) / h
    d2 = (p_at_one - mass(1.0 - h / 2)) / (h / 2)
    return 2 * d2 - d1


def conditional_state_at_hit(walk: WalkSpec, i, rho, j) -> np.ndarray:
    """Expected internal state at the first visit to j, given it happens."""
    rho = np.asarray(rho, dtype=COMPLEX)
    op = taboo_operator(walk, i, j)
    out = op.apply(rho)
    t = float(np.trace(out).real)
    if t <= 1e-12:
        raise InputError("conditional state undefined: passage probability is zero")
    return herm(out / t)


# ---------------------------------------------------------------------------
# finite domains


def boundary(walk: WalkSpec, domain) -> tuple[Site, ...]:
    """Sites outside the domain receiving a nonzero transition from it."""
    D = {_site_id(s) for s in domain}
    unknown = D - set(walk.sites)
    if unknown:
        raise InputError(f"domain has unknown sites {sorted(unknown)}")
    out = []
    for s in walk.sites:
        if s in D:
            continue
        if any(_nonzero(walk, s, j) for j in D):
            out.append(s)
    return tuple(out)


def domain_operator(walk: WalkSpec, domain, i, j) -> CPMapBlock:
    """Exit-path operator: paths i -> j whose intermediates stay in the domain.

    For a boundary target this captures the exit event through j; for an
    interior target it captures {t_j <= t_boundary} (the first visit to j
    before leaving the domain).
    """
    D = {_site_id(s) for s in domain}
    if _site_id(i) not in D:
        raise InputError(f"start site {i!r} is not in the domain")
    taboo = [s for s in walk.sites if s not in D]
    return taboo_operator(walk, i, j, taboo=taboo)


def exit_probability(walk: WalkSpec, domain, i, rho) -> float:
    """Probability of ever leaving the domain through its boundary."""
    rho = np.asarray(rho, dtype=COMPLEX)
    check_state(walk, DiagonalState({_site_id(i): rho}))
    bnd = boundary(walk, domain)
    if not bnd:
        raise InputError("domain has empty boundary")
    total = 0.0
    for j in bnd:
        total += float(np.trace(domain_operator(walk, domain, i, j).apply(rho)).real)
    if total > 1.0 + 1e-6:
        raise NumericalError(f"exit probability {total} exceeds 1")
    return min(1.0, max(0.0, total))


@dataclass
class HarmonicMeasure:
    """Exit distribution over the boundary with conditional exit states."""

    start: Site
    masses: dict[Site, float]
    conditional_states: dict[Site, np.ndarray]
    total_mass: float

    def mass(self, j) -> float:
        return self.masses.get(_site_id(j), 0.0)


def harmonic_measure(walk: WalkSpec, domain, i, rho) -> HarmonicMeasure:
    """Harmonic measure of the domain seen from (i, rho).

    ``masses[j]`` is the probability of exiting through boundary site j;
    for irreducible walks the masses sum to 1.
    """
    rho = np.asarray(rho, dtype=COMPLEX)
    check_state(walk, DiagonalState({_site_id(i): rho}))
    bnd = boundary(walk, domain)
    if not bnd:
        raise InputError("domain has empty boundary")
    masses = {}
    cond = {}
    for j in bnd:
        out = domain_operator(walk, domain, i, j).apply(rho)
        t = float(np.trace(out).real)
        masses[j] = max(0.0, t)
        if t > 1e-12:
            cond[j] = herm(out / t)
    total = sum(masses.values())
    return HarmonicMeasure(start=_site_id(i), masses=masses,
                           conditional_states=cond, total_mass=total)


def expected_domain_visits(walk: WalkSpec, domain, i, rho, j) -> float:
    """Expected visits to j in the domain before first leaving it."""
    rho = np.asarray(rho, dtype=COMPLEX)
    D = {_site_id(s) for s in domain}
    j = _site_id(j)
    if j not in D:
        raise InputError(f"target {j!r} must lie inside the domain")
    first = domain_operator(walk, domain, i, j)
    sigma = first.apply(rho)
    if float(np.trace(sigma).real) <= 1e-14:
        return 0.0
    returns = domain_operator(walk, domain, j, j)
    P = returns.matrix
    radius = spectral_radius(P)
    if radius >= 1.0 - DIVERGENCE_TOL:
        raise NumericalError(
            "domain visit count diverges (return operator has norm 1); "
            "the walk is not irreducible on this domain",
            {"spectral_radius": radius})
    x = np.linalg.solve(np.eye(P.shape[0], dtype=COMPLEX) - P, vec(sigma))
    return float(np.vdot(vec(np.eye(walk.dims[j], dtype=COMPLEX)), x).real)


# ---------------------------------------------------------------------------
# brute-force oracle


@dataclass
class PathSumResult:
    """Exact taboo-path enumeration up to a maximal length."""

    lengths: list[int]
    masses: list[float]          # per-length trace mass for the supplied state
    operators: list[np.ndarray]  # per-length vec-matrices of the path sum

    @property
    def partial_sums(self) -> list[float]:
        out, acc = [], 0.0
        for m in self.masses:
            acc += m
            out.append(acc)
        return out


def brute_force_path_sum(walk: WalkSpec, i, rho, j, taboo=(), max_len: int = 20,
                         node_budget: int = 2_000_000) -> PathSumResult:
    """Enumerate taboo paths exactly; the independent oracle for the solvers.

    Raises :class:`NumericalError` if the enumeration tree exceeds
    ``node_budget`` nodes.
    """
    i, j = _site_id(i), _site_id(j)
    rho = np.asarray(rho, dtype=COMPLEX)
    taboo_set = {_site_id(s) for s in taboo}
    allowed = set(walk.sites) - taboo_set - {j}
    dj2 = walk.dims[j] ** 2
    di2 = walk.dims[i] ** 2
    ops = [np.zeros((dj2, di2), dtype=COMPLEX) for _ in range(max_len)]
    budget = [node_budget]

    def explore(site: Site, m: np.ndarray, depth: int):
        for t in walk._succ[site]:
            L = walk.transitions[(t, site)]
            m2 = L @ m
            if float(np.abs(m2).max(initial=0.0)) < 1e-250:
                continue
            budget[0] -= 1
            if budget[0] < 0:
                raise NumericalError(
                    f"path enumeration exceeded the node budget ({node_budget})")
            if t == j:
                ops[depth] += kraus_block(m2)
            elif t in allowed and depth + 1 < max_len:
                explore(t, m2, depth + 1)

    explore(i, np.eye(walk.dims[i], dtype=COMPLEX), 0)
    masses = [float(np.trace(unvec(op @ vec(rho), walk.dims[j])).real) for op in ops]
    return PathSumResult(lengths=list(range(1, max_len + 1)), masses=masses, operators=ops)


def shanks_limit(partial_sums) -> float:
    """Shanks extrapolation of a partial-sum sequence via Wynn's epsilon.

    Zero increments (parity-structured walks) are squeezed out first; the
    even epsilon columns then reproduce the limit exactly when the tail is a
    finite sum of geometric modes, which is the case for every finite walk.
    """
    seq = [float(partial_sums[0])]
    for x in partial_sums[1:]:
        if abs(float(x) - seq[-1]) > 1e-15:
            seq.append(float(x))
    n = len(seq)
    if n < 3:
        return seq[-1]
    eps_prev = [0.0] * (n + 1)           # epsilon_{-1}
    eps_curr = list(seq)                 # epsilon_0
    best = seq[-1]
    col = 0
    while len(eps_curr) >= 2:
        col += 1
        nxt = []
        for k in range(len(eps_curr) - 1):
            diff = eps_curr[k + 1] - eps_curr[k]
            if abs(diff) < 1e-300:
                nxt = []
                break
            nxt.append(eps_prev[k + 1] + 1.0 / diff)
        if not nxt:
            break
        eps_prev, eps_curr = eps_curr, nxt
        if col % 2 == 0 and eps_curr:
            best = eps_curr[-1]
    return best
