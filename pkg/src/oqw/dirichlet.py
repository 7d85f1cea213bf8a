"""Dirichlet problems, harmonic measure operators, forms and gradients.

The domain problem ``(Id - dual step)(Z) = A on D, Z = B on the boundary``
is solved two ways: a closed form assembled from dual exit/visit operators,
and, under detailed balance, a variational solve of the stationarity system
of the energy functional.  Both restrict the solution to ``D`` plus its
boundary (the free part outside is set to zero).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError
from .hitting import boundary as domain_boundary
from .hitting import domain_operator
from .linalg import COMPLEX, herm, hermitian_basis, psd_sqrt, spectral_radius, vec
from .walk import (
    DiagonalObservable,
    DiagonalState,
    Site,
    WalkSpec,
    _site_id,
    doubly_stochastic_defect,
    dual_apply,
    identity_observable,
)


@dataclass
class DirichletProblem:
    """Interior data A on D and boundary data B on the boundary of D."""

    domain: tuple[Site, ...]
    interior_data: DiagonalObservable
    boundary_data: DiagonalObservable

    @classmethod
    def build(cls, walk: WalkSpec, domain, interior_data=None, boundary_data=None):
        D = tuple(_site_id(s) for s in domain)
        bnd = domain_boundary(walk, D)
        if not bnd:
            raise InputError("domain has empty boundary")
        a = interior_data or DiagonalObservable({})
        b = boundary_data or DiagonalObservable({})
        bad = set(a.blocks) - set(D)
        if bad:
            raise InputError(f"interior data supported outside the domain: {sorted(bad)}")
        bad = set(b.blocks) - set(bnd)
        if bad:
            raise InputError(f"boundary data supported off the boundary: {sorted(bad)}")
        return cls(D, a, b)


@dataclass
class DirichletSolution:
    solution: DiagonalObservable       # supported on D and its boundary
    residuals: dict[Site, float]       # per interior site
    boundary_sites: tuple[Site, ...]
    method: str
    uniqueness_note: str

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)


def _residuals(walk: WalkSpec, z: DiagonalObservable, a: DiagonalObservable,
               domain) -> dict[Site, float]:
    stepped = dual_apply(walk, z)
    out = {}
    for s in domain:
        d = walk.dims[s]
        r = z.block(s, d) - stepped.block(s, d) - a.block(s, d)
        out[s] = float(np.linalg.norm(r, 2))
    return out


def solve_dirichlet_domain(walk: WalkSpec, problem: DirichletProblem) -> DirichletSolution:
    """Closed-form solution on a finite domain.

    ``Z_i = A_i + sum_{j in D} N*[j,i](A_j) + sum_{j in bnd} P*[j,i](B_j)``
    for interior i, with the boundary condition imposed exactly; dual visit
    operators come from ``(Id - P[j,j])^{-1} P[j,i]`` inside the domain.
    """
    D = problem.domain
    bnd = domain_boundary(walk, D)
    a, b = problem.interior_data, problem.boundary_data
    blocks = {}
    for j in bnd:
        blocks[j] = b.block(j, walk.dims[j]).copy()
    exit_ops = {}
    visit_ops = {}
    for i in D:
        for j in bnd:
            exit_ops[(j, i)] = domain_operator(walk, D, i, j)
        for j in D:
            if np.abs(a.block(j, walk.dims[j])).max(initial=0.0) == 0.0:
                continue
            first = domain_operator(walk, D, i, j)
            ret = domain_operator(walk, D, j, j)
            radius = spectral_radius(ret.matrix)
            if radius >= 1.0 - 1e-7:
                raise NumericalError(
                    "domain visit operator diverges; the walk is not "
                    "irreducible on this domain (try decompose())",
                    {"spectral_radius": radius, "site": j})
            n_mat = np.linalg.solve(
                np.eye(ret.matrix.shape[0], dtype=COMPLEX) - ret.matrix, first.matrix)
            visit_ops[(j, i)] = n_mat
    for i in D:
        d = walk.dims[i]
        z = a.block(i, d).copy()
        for j in D:
            m = visit_ops.get((j, i))
            if m is None:
                continue
            z += herm(np.reshape(m.conj().T @ vec(a.block(j, walk.dims[j])),
                                 (d, d), order="F"))
        for j in bnd:
            bj = b.block(j, walk.dims[j])
            if np.abs(bj).max(initial=0.0) == 0.0:
                continue
            z += herm(np.reshape(exit_ops[(j, i)].matrix.conj().T @ vec(bj),
                                 (d, d), order="F"))
        blocks[i] = z
    z = DiagonalObservable(blocks)
    return DirichletSolution(
        solution=z,
        residuals=_residuals(walk, z, a, D),
        boundary_sites=bnd,
        method="closed_form",
        uniqueness_note="unique up to an operator supported outside the domain "
                        "and its boundary; that part is set to zero here",
    )


def solve_dirichlet_global(walk: WalkSpec, a: DiagonalObservable) -> DirichletSolution:
    """Whole-space problem ``(Id - dual step)(Z) = A`` for transient walks.

    Requires every expected visit count to be finite (all return operators
    strictly contractive).  For stochastic families the representative is
    made traceless, fixing the additive multiple of the identity left free
    by uniqueness; substochastic truncations have a rigid solution that is
    returned as computed.
    """
    from .hitting import taboo_operator

    visit_duals = {}
    for j in walk.sites:
        aj = a.blocks.get(j)
        if aj is None or np.abs(aj).max(initial=0.0) == 0.0:
            continue
        ret = taboo_operator(walk, j, j)
        radius = spectral_radius(ret.matrix)
        if radius >= 1.0 - 1e-7:
            raise NumericalError(
                "walk is recurrent at site %r; the global Dirichlet problem "
                "is unsupported" % (j,), {"spectral_radius": radius})
        for i in walk.sites:
            first = taboo_operator(walk, i, j)
            n_mat = np.linalg.solve(
                np.eye(ret.matrix.shape[0], dtype=COMPLEX) - ret.matrix, first.matrix)
            visit_duals[(j, i)] = n_mat
    blocks = {}
    total_norm = 0.0
    for i in walk.sites:
        d = walk.dims[i]
        z = a.block(i, d).copy()
        for j in walk.sites:
            m = visit_duals.get((j, i))
            if m is None:
                continue
            contrib = herm(np.reshape(m.conj().T @ vec(a.block(j, walk.dims[j])),
                                      (d, d), order="F"))
            total_norm += float(np.linalg.norm(contrib, 2))
            z += contrib
        blocks[i] = z
    # Traceless gauge: valid only when the identity is harmonic (stochastic
    # family); on substochastic truncations the solution is rigid.
    stepped_id = dual_apply(walk, identity_observable(walk))
    id_harmonic = all(
        float(np.abs(stepped_id.block(s, walk.dims[s])
                     - np.eye(walk.dims[s])).max(initial=0.0)) <= 1e-9
        for s in walk.sites)
    if id_harmonic:
        tr = sum(float(np.trace(b).real) for b in blocks.values())
        shift = tr / walk.total_dim
        blocks = {s: b - shift * np.eye(walk.dims[s], dtype=COMPLEX)
                  for s, b in blocks.items()}
        note = ("unique up to a multiple of the identity; traceless "
                f"representative returned (dual-visit norm sum {total_norm:.3e})")
    else:
        note = ("substochastic family: the identity is not harmonic and the "
                f"solution is rigid (dual-visit norm sum {total_norm:.3e})")
    z = DiagonalObservable(blocks)
    residuals = _residuals(walk, z, a, walk.sites)
    return DirichletSolution(
        solution=z, residuals=residuals, boundary_sites=(),
        method="global", uniqueness_note=note)


def harmonic_operator(walk: WalkSpec, domain, j) -> DiagonalObservable:
    """Quantum harmonic-measure operator of a boundary site.

    Blocks are the duals of the exit operators on the domain plus the
    identity at j itself; tracing against an initial state recovers the
    harmonic-measure mass at j, and the family over the boundary sums to
    the identity on the closed domain for irreducible walks.
    """
    D = tuple(_site_id(s) for s in domain)
    bnd = domain_boundary(walk, D)
    j = _site_id(j)
    if j not in bnd:
        raise InputError(f"site {j!r} is not on the domain boundary")
    blocks = {j: np.eye(walk.dims[j], dtype=COMPLEX)}
    for i in D:
        op = domain_operator(walk, D, i, j)
        blocks[i] = op.dual_identity()
    return DiagonalObservable(blocks)


# ---------------------------------------------------------------------------
# weighted inner product, forms, variational solver


def diamond_inner(tau: DiagonalState, x: DiagonalObservable, y: DiagonalObservable,
                  sites=None) -> complex:
    """Weighted inner product ``sum_i Tr(tau_i^{1/2} X_i† tau_i^{1/2} Y_i)``.

    ``tau`` must be faithful on every site it carries.
    """
    acc = 0.0 + 0.0j
    chosen = tau.blocks.keys() if sites is None else [_site_id(s) for s in sites]
    for s in chosen:
        b = tau.blocks[s]
        w = np.linalg.eigvalsh(herm(b))
        if w.min() <= 1e-14:
            raise InputError(f"reference state is not faithful at site {s!r}")
        root = psd_sqrt(b)
        xb = x.blocks.get(s)
        yb = y.blocks.get(s)
        if xb is None or yb is None:
            continue
        acc += np.trace(root @ xb.conj().T @ root @ yb)
    return complex(acc)


def dirichlet_form(walk: WalkSpec, tau: DiagonalState, x: DiagonalObservable,
                   y: DiagonalObservable) -> complex:
    """Form ``<X, (Id - dual step) Y>`` for the weighted inner product."""
    stepped = dual_apply(walk, y)
    diff = DiagonalObservable({s: y.block(s, walk.dims[s]) - stepped.block(s, walk.dims[s])
                               for s in walk.sites})
    return diamond_inner(tau, x, diff, sites=walk.sites)


def dirichlet_energy(walk: WalkSpec, tau: DiagonalState, x: DiagonalObservable) -> float:
    e = dirichlet_form(walk, tau, x, x)
    if abs(e.imag) > 1e-8 * max(1.0, abs(e.real)):
        raise NumericalError(f"energy has a nonreal value {e}; detailed balance "
                             "presumably fails")
    return float(e.real)


def flat_state(walk: WalkSpec) -> DiagonalState:
    """Maximally mixed normalized state Id / total dimension."""
    n = walk.total_dim
    return DiagonalState({s: np.eye(walk.dims[s], dtype=COMPLEX) / n for s in walk.sites})


@dataclass
class VariationalSolution:
    minimizer: DiagonalObservable        # X0, supported on D
    solution: DiagonalObservable         # B + X0 on D and boundary
    energy: float
    coercivity: float                    # smallest eigenvalue of the form matrix
    residuals: dict[Site, float]
    diagnostics: dict = field(default_factory=dict)


def variational_solve(walk: WalkSpec, tau: DiagonalState, problem: DirichletProblem,
                      check_balance: bool = True,
                      dense_limit: int = 4096) -> VariationalSolution:
    """Solve the domain problem as the minimizer of the energy functional.

    Solves the stationarity system ``form(T, X) = <T, A - C>`` over Hermitian
    observables supported on the domain, where ``C = (Id - dual step)(B)``.
    Requires detailed balance (checked unless disabled) and coercivity of the
    form on the domain.  Above ``dense_limit`` unknowns a conjugate-gradient
    solve replaces the dense factorization.
    """
    from .walk import check_detailed_balance

    if check_balance:
        rep = check_detailed_balance(walk, tau)
        if not rep.selfadjoint_within_tol:
            raise InputError(
                "detailed balance fails (selfadjointness residual "
                f"{rep.selfadjoint_residual:.3e}); the variational method does not apply")
    D = problem.domain
    bnd = domain_boundary(walk, D)
    a, b = problem.interior_data, problem.boundary_data

    # C = (Id - dual step)(B), computed once per problem
    stepped_b = dual_apply(walk, b)
    c = DiagonalObservable({s: b.block(s, walk.dims[s]) - stepped_b.block(s, walk.dims[s])
                            for s in walk.sites})
    target = DiagonalObservable({s: a.block(s, walk.dims[s]) - c.block(s, walk.dims[s])
                                 for s in D})

    basis: list[DiagonalObservable] = []
    for s in D:
        for e in hermitian_basis(walk.dims[s]):
            basis.append(DiagonalObservable({s: e}))
    n = len(basis)
    rhs = np.array([diamond_inner(tau, t, target, sites=D).real for t in basis])
    gram = np.zeros((n, n))
    images = [dual_apply(walk, t) for t in basis]
    for m, t in enumerate(basis):
        for k in range(n):
            y = basis[k]
            diff = DiagonalObservable(
                {s: y.block(s, walk.dims[s]) - images[k].block(s, walk.dims[s])
                 for s in walk.sites})
            gram[m, k] = diamond_inner(tau, t, diff, sites=walk.sites).real
    gram = 0.5 * (gram + gram.T)
    coercivity = float(np.linalg.eigvalsh(gram).min())
    if coercivity <= 1e-12:
        raise NumericalError("energy form is not coercive on the domain",
                             {"smallest_eigenvalue": coercivity})
    if n <= dense_limit:
        coeff = np.linalg.solve(gram, rhs)
        method = "dense"
    else:
        from scipy.sparse.linalg import cg
        coeff, info = cg(gram, rhs, rtol=1e-12, atol=0.0, maxiter=20 * n)
        if info != 0:
            raise NumericalError(f"conjugate gradient did not converge (info={info})")
        method = "cg"

    x0_blocks = {s: np.zeros((walk.dims[s], walk.dims[s]), dtype=COMPLEX) for s in D}
    for w, t in zip(coeff, basis):
        (s, e), = t.blocks.items()
        x0_blocks[s] += w * e
    x0 = DiagonalObservable(x0_blocks)
    z_blocks = {s: x0_blocks[s].copy() for s in D}
    for j in bnd:
        z_blocks[j] = b.block(j, walk.dims[j]).copy()
    z = DiagonalObservable(z_blocks)
    energy = 0.5 * dirichlet_form(walk, tau, x0, x0).real \
        + dirichlet_form(walk, tau, x0, b).real \
        - diamond_inner(tau, a, x0, sites=D).real
    return VariationalSolution(
        minimizer=x0, solution=z, energy=float(energy), coercivity=coercivity,
        residuals=_residuals(walk, z, a, D),
        diagnostics={"solver": method, "unknowns": n})


# ---------------------------------------------------------------------------
# doubly stochastic walks: discrete gradients


@dataclass
class GradientForm:
    blocks: dict[tuple[Site, Site], np.ndarray]   # (i, j) -> X_i L[i,j] - L[i,j] X_j
    energy: float            # (1/2) sum ||grad||_F^2 / total dimension
    raw_half_norm: float     # (1/2) sum ||grad||_F^2, unnormalized


def gradient_form(walk: WalkSpec, x: DiagonalObservable) -> GradientForm:
    """Discrete gradient blocks ``X_i L[i,j] - L[i,j] X_j`` and their energy.

    Only defined for doubly stochastic walks (``L[i,j] = L[j,i]†`` checked).
    ``energy`` divides the half squared norm by the total internal dimension
    so that it coincides with the Dirichlet energy taken against the
    normalized flat invariant state.
    """
    defect, pair = doubly_stochastic_defect(walk)
    if defect > max(walk.tolerance, 1e-9):
        raise InputError(
            f"walk is not doubly stochastic: block pair {pair} violates "
            f"L[i,j] = L[j,i]† by {defect:.3e}")
    blocks = {}
    half = 0.0
    for (to, fr), L in walk.transitions.items():
        g = x.block(to, walk.dims[to]) @ L - L @ x.block(fr, walk.dims[fr])
        if np.abs(g).max(initial=0.0) > 0.0:
            blocks[(to, fr)] = g
        half += 0.5 * float(np.vdot(g, g).real)
    return GradientForm(blocks=blocks, energy=half / walk.total_dim, raw_half_norm=half)


def identity_on(walk: WalkSpec, sites) -> DiagonalObservable:
    return identity_observable(walk, sites)
