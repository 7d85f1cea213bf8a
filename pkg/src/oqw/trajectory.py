"""Seeded Monte Carlo sampling of the position/internal-state chain.

Each trajectory owns a counter-based random stream keyed by (master seed,
trajectory index), so ensembles are reproducible bit for bit regardless of
batching or worker count.  The ensemble driver advances all live
trajectories in lock step with vectorized block products, which keeps the
per-step cost at a handful of small einsums per occupied site.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError
from .linalg import COMPLEX, herm
from .walk import DiagonalObservable, Site, WalkSpec, _site_id, check_state, site_state

PROB_FLOOR = 1e-14   # transition weights below this count as zero
RNG_CHUNK = 512      # uniforms pre-drawn per trajectory


def trajectory_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based generator for one trajectory of one ensemble."""
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(index)],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class TrajectoryRecord:
    sites: list[Site]
    states: list[np.ndarray] | None
    stop_reason: str            # "horizon" | "hit_target" | "exited_domain"
    stopping_index: int
    renormalizations: int = 0   # steps whose weights needed renormalizing


@dataclass
class EstimateWithCI:
    """Plug-in estimate with a normal-approximation confidence interval."""

    estimate: float
    standard_error: float
    n_samples: int
    confidence: float = 0.997   # three-sigma bands throughout

    @property
    def half_width(self) -> float:
        return 3.0 * self.standard_error


def sample_step(walk: WalkSpec, site, rho: np.ndarray, rng: np.random.Generator,
                tol: float | None = None) -> tuple[Site, np.ndarray, bool]:
    """One transition from (site, rho): returns (next site, next state, renormalized).

    The successor is drawn with probability ``Tr(L rho L†)`` over the nonzero
    blocks out of the site, scanned in declared site order; weights below the
    probability floor are treated as zero.
    """
    s = _site_id(site)
    tol = walk.tolerance if tol is None else tol
    rho = np.asarray(rho, dtype=COMPLEX)
    succs = walk._succ[s]
    weights = []
    for t in succs:
        L = walk.transitions[(t, s)]
        w = float(np.einsum("ij,jk,ik->", L, rho, L.conj()).real)
        weights.append(0.0 if w < PROB_FLOOR else w)
    total = sum(weights)
    if total <= PROB_FLOOR:
        raise NumericalError(f"dead end at site {s!r}: no transition has positive weight")
    renorm = abs(total - 1.0) > max(tol, 1e-9)
    u = rng.random() * total
    acc = 0.0
    choice = len(weights) - 1
    for k, w in enumerate(weights):
        acc += w
        if u < acc:
            choice = k
            break
    t = succs[choice]
    L = walk.transitions[(t, s)]
    new = L @ rho @ L.conj().T
    return t, new / float(np.trace(new).real), renorm


def sample_trajectory(walk: WalkSpec, i, rho, horizon: int,
                      stop: dict | None = None,
                      rng: np.random.Generator | int | None = None,
                      record_states: bool = True) -> TrajectoryRecord:
    """Sample one trajectory of (position, internal state).

    ``stop`` may be ``{"hit": site}`` or ``{"exit": domain}``; the fixed
    horizon always applies.  With an integer ``rng`` the stream is the
    trajectory-0 stream of that master seed.
    """
    if horizon < 1:
        raise InputError("horizon must be >= 1")
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = trajectory_rng(0 if rng is None else int(rng), 0)
    s = _site_id(i)
    rho = np.asarray(rho, dtype=COMPLEX)
    check_state(walk, site_state(walk, s, rho))
    target = _site_id(stop["hit"]) if stop and "hit" in stop else None
    domain = {_site_id(x) for x in stop["exit"]} if stop and "exit" in stop else None
    if domain is not None and s not in domain:
        raise InputError("start site lies outside the stopping domain")
    sites = [s]
    states = [rho.copy()] if record_states else None
    renorms = 0
    reason, stop_idx = "horizon", horizon
    for n in range(1, horizon + 1):
        s, rho, rn = sample_step(walk, s, rho, rng)
        renorms += int(rn)
        sites.append(s)
        if record_states:
            states.append(rho.copy())
        if target is not None and s == target:
            reason, stop_idx = "hit_target", n
            break
        if domain is not None and s not in domain:
            reason, stop_idx = "exited_domain", n
            break
    return TrajectoryRecord(sites=sites, states=states, stop_reason=reason,
                            stopping_index=stop_idx, renormalizations=renorms)


# ---------------------------------------------------------------------------
# lock-step ensemble engine


class _Ensemble:
    """All live trajectories advanced together, grouped by current site."""

    def __init__(self, walk: WalkSpec, i, rho, n_traj: int, seed: int,
                 index_offset: int = 0):
        self.walk = walk
        self.site_index = {s: k for k, s in enumerate(walk.sites)}
        self.dmax = max(walk.dims.values())
        self.n = n_traj
        s0 = self.site_index[_site_id(i)]
        self.positions = np.full(n_traj, s0, dtype=np.int64)
        rho = np.asarray(rho, dtype=COMPLEX)
        d0 = rho.shape[0]
        self.states = np.zeros((n_traj, self.dmax, self.dmax), dtype=COMPLEX)
        self.states[:, :d0, :d0] = rho
        self.active = np.ones(n_traj, dtype=bool)
        self.steps = np.zeros(n_traj, dtype=np.int64)
        self.gens = [trajectory_rng(seed, index_offset + k) for k in range(n_traj)]
        self.uni = np.vstack([g.random(RNG_CHUNK) for g in self.gens])
        self.uptr = np.zeros(n_traj, dtype=np.int64)
        self.renorms = 0
        # per-site successor data, precomputed once
        self.succ: dict[int, list[tuple[int, np.ndarray]]] = {}
        for s in walk.sites:
            rows = []
            for t in walk._succ[s]:
                rows.append((self.site_index[t], np.asarray(walk.transitions[(t, s)])))
            self.succ[self.site_index[s]] = rows

    def _uniforms(self, idx: np.ndarray) -> np.ndarray:
        need_refill = idx[self.uptr[idx] >= RNG_CHUNK]
        for k in need_refill:
            self.uni[k] = self.gens[k].random(RNG_CHUNK)
            self.uptr[k] = 0
        u = self.uni[idx, self.uptr[idx]]
        self.uptr[idx] += 1
        return u

    def step(self) -> None:
        """Advance every active trajectory by one transition."""
        live = np.flatnonzero(self.active)
        if live.size == 0:
            return
        walk = self.walk
        pos0 = self.positions.copy()  # group on pre-step positions only
        for s_idx in np.unique(pos0[live]):
            grp = live[pos0[live] == s_idx]
            d = walk.dims[walk.sites[s_idx]]
            rho = self.states[grp, :d, :d]
            rows = self.succ[int(s_idx)]
            if not rows:
                raise NumericalError(
                    f"dead end at site {walk.sites[s_idx]!r} during sampling")
            probs = np.empty((len(rows), grp.size))
            for k, (_, L) in enumerate(rows):
                w = np.einsum("ij,bjk,ik->b", L, rho, L.conj()).real
                w[w < PROB_FLOOR] = 0.0
                probs[k] = w
            total = probs.sum(axis=0)
            if np.any(total <= PROB_FLOOR):
                raise NumericalError(
                    f"dead end at site {walk.sites[s_idx]!r} during sampling")
            self.renorms += int(np.sum(np.abs(total - 1.0) > max(walk.tolerance, 1e-9)))
            u = self._uniforms(grp) * total
            cum = np.cumsum(probs, axis=0)
            choice = (cum <= u[None, :]).sum(axis=0)
            np.clip(choice, 0, len(rows) - 1, out=choice)
            for k, (t_idx, L) in enumerate(rows):
                sel = choice == k
                if not np.any(sel):
                    continue
                members = grp[sel]
                new = np.einsum("ij,bjk,lk->bil", L, rho[sel], L.conj())
                tr = np.einsum("bii->b", new).real
                new /= tr[:, None, None]
                dt = L.shape[0]
                self.states[members] = 0.0
                self.states[members, :dt, :dt] = new
                self.positions[members] = t_idx
        self.steps[live] += 1


def _run_hitting(walk: WalkSpec, i, rho, j, n_traj: int, horizon: int, seed: int,
                 track_visits: bool, stop_at_hit: bool, kth_return: int | None = None,
                 index_offset: int = 0):
    ens = _Ensemble(walk, i, rho, n_traj, seed, index_offset)
    j_idx = ens.site_index[_site_id(j)]
    hit_time = np.full(n_traj, np.inf)
    visit_count = np.zeros(n_traj, dtype=np.int64)
    kth_time = np.full(n_traj, np.inf)
    for n in range(1, horizon + 1):
        ens.step()
        at_target = ens.active & (ens.positions == j_idx)
        fresh = at_target & ~np.isfinite(hit_time)
        hit_time[fresh] = n
        visit_count[at_target] += 1
        if kth_return is not None:
            done = at_target & (visit_count == kth_return)
            kth_time[done] = n
            ens.active[done] = False
        if stop_at_hit:
            ens.active[at_target] = False
        if not track_visits and kth_return is None and stop_at_hit \
                and not ens.active.any():
            break
        if kth_return is not None and not ens.active.any():
            break
    return hit_time, visit_count, kth_time, ens


def estimate_hitting(walk: WalkSpec, i, rho, j, n_traj: int, horizon: int,
                     seed: int = 0, track_visits: bool = True,
                     threads: int = 1) -> dict:
    """Plug-in estimates of hitting statistics, censored at the horizon.

    Returns estimates for the probability of hitting j by the horizon, the
    censored expected hitting time ``E[min(t_j, horizon)]`` and (when
    tracked) the censored expected visit count.  Censoring is explicit:
    ``censored_fraction`` reports the trajectories that never hit.

    With ``threads > 1`` the ensemble is split into contiguous index ranges
    processed by a thread pool; every trajectory keeps the stream derived
    from its global index, so the merged statistics do not depend on the
    worker count.
    """
    if n_traj < 1:
        raise InputError("n_traj must be >= 1")
    rho = np.asarray(rho, dtype=COMPLEX)
    check_state(walk, site_state(walk, i, rho))
    if threads <= 1 or n_traj < 2 * threads:
        hit, visits, _, ens = _run_hitting(walk, i, rho, j, n_traj, horizon, seed,
                                           track_visits=track_visits,
                                           stop_at_hit=not track_visits)
        renorms = ens.renorms
    else:
        from concurrent.futures import ThreadPoolExecutor

        bounds = np.linspace(0, n_traj, threads + 1).astype(int)
        def job(lo: int, hi: int):
            return _run_hitting(walk, i, rho, j, hi - lo, horizon, seed,
                                track_visits=track_visits,
                                stop_at_hit=not track_visits, index_offset=lo)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: job(*b), zip(bounds, bounds[1:])))
        hit = np.concatenate([p[0] for p in parts])
        visits = np.concatenate([p[1] for p in parts])
        renorms = sum(p[3].renorms for p in parts)
    hit_mask = np.isfinite(hit)
    p = float(hit_mask.mean())
    p_se = math.sqrt(max(p * (1 - p), 0.0) / n_traj)
    censored_t = np.where(hit_mask, hit, float(horizon))
    t_mean = float(censored_t.mean())
    t_se = float(censored_t.std(ddof=1) / math.sqrt(n_traj)) if n_traj > 1 else 0.0
    out = {
        "p_hit_by_horizon": EstimateWithCI(p, p_se, n_traj),
        "censored_expected_time": EstimateWithCI(t_mean, t_se, n_traj),
        "censored_fraction": 1.0 - p,
        "horizon": horizon,
        "renormalized_steps": renorms,
    }
    if track_visits:
        v_mean = float(visits.mean())
        v_se = float(visits.std(ddof=1) / math.sqrt(n_traj)) if n_traj > 1 else 0.0
        out["censored_expected_visits"] = EstimateWithCI(v_mean, v_se, n_traj)
    return out


@dataclass
class KacReport:
    empirical: EstimateWithCI          # t_i^(k) / k over trajectories
    analytic_target: float             # 1 / Tr tau_inv(i)
    k: int
    n_censored: int
    restricted_to_enclosure: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def within_three_sigma(self) -> bool:
        gap = abs(self.empirical.estimate - self.analytic_target)
        return gap <= 3.0 * self.empirical.standard_error + 1e-9


def estimate_kac(walk: WalkSpec, i, n_traj: int, k_max: int, seed: int = 0,
                 max_steps: int | None = None) -> KacReport:
    """Empirical k-th return time over k against the inverse invariant mass.

    Trajectories start from the invariant state conditioned at ``i``.  For a
    reducible walk the analytic target uses the invariant state of the
    minimal enclosure that carries that conditioned state (the ergodic
    component the trajectories actually live in); for irreducible walks this
    is the usual statement.
    """
    from .structure import enclosure_closure, is_irreducible, restrict_walk
    from .superop import invariant_state

    s = _site_id(i)
    tau, fixed_dim = invariant_state(walk)
    if tau is None:
        raise InputError("walk has no invariant state; the return-time law "
                         "has no analytic target")
    block = tau.blocks.get(s)
    mass = float(np.trace(block).real) if block is not None else 0.0
    if mass <= 1e-12:
        raise InputError(f"invariant state carries no mass at site {s!r}")
    rho_hat = herm(block) / mass

    irreducible, _ = is_irreducible(walk)
    restricted = False
    if irreducible:
        target = 1.0 / mass
    else:
        w, v = np.linalg.eigh(rho_hat)
        seeds = [(s, v[:, k]) for k in range(len(w)) if w[k] > 1e-10]
        enc = enclosure_closure(walk, seeds)
        sub, _bases = restrict_walk(walk, enc)
        sub_tau, _ = invariant_state(sub)
        if sub_tau is None or s not in sub_tau.blocks:
            raise InputError("conditioned invariant state does not determine "
                             "an ergodic component at this site")
        target = 1.0 / float(np.trace(sub_tau.blocks[s]).real)
        restricted = True

    if max_steps is None:
        max_steps = max(100, int(8 * k_max * max(2.0, target)))
    _, _, kth, ens = _run_hitting(walk, s, rho_hat, s, n_traj, max_steps, seed,
                                  track_visits=True, stop_at_hit=False,
                                  kth_return=k_max)
    done = np.isfinite(kth)
    n_censored = int((~done).sum())
    if not np.any(done):
        raise NumericalError("no trajectory reached the requested return count",
                             {"max_steps": max_steps})
    ratios = kth[done] / k_max
    mean = float(ratios.mean())
    se = float(ratios.std(ddof=1) / math.sqrt(done.sum())) if done.sum() > 1 else 0.0
    return KacReport(
        empirical=EstimateWithCI(mean, se, int(done.sum())),
        analytic_target=float(target), k=k_max, n_censored=n_censored,
        restricted_to_enclosure=restricted,
        diagnostics={"fixed_space_dim": fixed_dim, "max_steps": max_steps,
                     "renormalized_steps": ens.renorms})


@dataclass
class MartingaleReport:
    max_drift: float
    max_drift_sigmas: float      # drift over its standard error, worst step
    means: np.ndarray            # E[m_n] over trajectories
    standard_errors: np.ndarray
    m0: float


def martingale_diagnostic(walk: WalkSpec, a: DiagonalObservable, i, rho,
                          n_traj: int, horizon: int, seed: int = 0,
                          stop_domain=None, tol: float = 1e-8) -> MartingaleReport:
    """Check the flatness of ``m_n = Tr(rho_n A(x_n))`` along trajectories.

    ``a`` must be harmonic (globally, or on ``stop_domain`` when supplied;
    trajectories are then stopped on exit and keep their last value, which is
    the stopped martingale of the optional-sampling argument).
    """
    from .walk import dual_apply

    stepped = dual_apply(walk, a)
    check_sites = walk.sites if stop_domain is None else \
        tuple(_site_id(x) for x in stop_domain)
    worst = 0.0
    for sname in check_sites:
        d = walk.dims[sname]
        worst = max(worst, float(np.linalg.norm(
            a.block(sname, d) - stepped.block(sname, d), 2)))
    if worst > tol:
        raise InputError(f"observable is not harmonic (residual {worst:.3e})")

    rho = np.asarray(rho, dtype=COMPLEX)
    ens = _Ensemble(walk, i, rho, n_traj, seed)
    domain_idx = None
    if stop_domain is not None:
        domain_idx = {ens.site_index[_site_id(x)] for x in stop_domain}
    blocks = [np.asarray(a.block(s, walk.dims[s])) for s in walk.sites]

    def values() -> np.ndarray:
        out = np.empty(ens.n)
        for s_idx in np.unique(ens.positions):
            grp = np.flatnonzero(ens.positions == s_idx)
            d = walk.dims[walk.sites[s_idx]]
            out[grp] = np.einsum("bij,ji->b", ens.states[grp, :d, :d],
                                 blocks[s_idx]).real
        return out

    series = np.empty((horizon + 1, n_traj))
    series[0] = values()
    for n in range(1, horizon + 1):
        ens.step()
        if domain_idx is not None:
            exited = ens.active & ~np.isin(ens.positions, list(domain_idx))
            ens.active[exited] = False
        series[n] = values()
        if not ens.active.any():
            series[n + 1:] = series[n]
            break
    means = series.mean(axis=1)
    ses = series.std(axis=1, ddof=1) / math.sqrt(n_traj) if n_traj > 1 \
        else np.zeros(horizon + 1)
    drift = np.abs(means - means[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        sigmas = np.where(ses > 0, drift / ses, np.where(drift > 1e-12, np.inf, 0.0))
    return MartingaleReport(max_drift=float(drift.max()),
                            max_drift_sigmas=float(np.nanmax(sigmas)),
                            means=means, standard_errors=ses, m0=float(means[0]))


def word_frequencies(walk: WalkSpec, i, rho, length: int, n_traj: int,
                     seed: int = 0) -> dict[tuple, int]:
    """Counts of position words (x_1 .. x_length) over an ensemble."""
    ens = _Ensemble(walk, i, np.asarray(rho, dtype=COMPLEX), n_traj, seed)
    words = np.empty((length, n_traj), dtype=np.int64)
    for n in range(length):
        ens.step()
        words[n] = ens.positions
    out: dict[tuple, int] = {}
    for col in words.T:
        w = tuple(walk.sites[k] for k in col)
        out[w] = out.get(w, 0) + 1
    return out
