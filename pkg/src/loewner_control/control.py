"""Linear functionals, transported functionals L_t and the maximum-principle checks.

For a Herglotz field G with f^G = F and a linear functional L on maps,

    L_t(h) = L( dF . [d(phi_t)]^{-1} . h(phi_t) ),    m(t) = max_h Re L_t(h).

If F maximizes Re L over the parametric class then G(., t) attains m(t) for
almost every t and m is constant; these are checked here over declared
control subfamilies, so every m(t) is a lower bound for the maximum over
the whole class M_n.

Numerically, L_t is evaluated in the rescaled variables psi = e^t phi and
K = e^t d(phi), i.e. L_t(h) = L( dF K^{-1} e^t h(e^-t psi) ), which stays
well conditioned as t grows.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np
from scipy import optimize

from . import _series as ser
from .errors import DomainError, SingularJacobianError
from .holomap import (
    BOUNDARY_RADII,
    Jet,
    MapDescriptor,
    PolyJet,
    _cplx,
    _multinomial,
    coefficient,
    descriptor_from_dict,
    jet_from_closed_form,
    margins,
    sample_grid,
    sphere_points,
)
from .loewner import DEFAULT_ATOL, DEFAULT_RTOL, HerglotzField, scaled_flow_jet, scaled_limit, scaled_point_flow

GOLDEN_TOL = 1e-6
SCREEN_MARGIN = 1e-6
SCREEN_STARTS = 3


# ------------------------------------------------------------------ functionals


@dataclass(frozen=True)
class PointAtom:
    """weight * g_k(z) for an interior point z (component index 0-based)."""

    z: tuple[complex, ...]
    component: int
    weight: complex = 1.0

    def __post_init__(self):
        z = tuple(complex(x) for x in np.atleast_1d(np.asarray(self.z, dtype=complex)))
        if np.linalg.norm(z) >= 1.0:
            raise DomainError(f"point atom {z} is not interior")
        if not 0 <= self.component < len(z):
            raise DomainError(f"component {self.component} out of range")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "weight", complex(self.weight))


@dataclass(frozen=True)
class CoeffAtom:
    """weight * (coefficient of z**alpha in g_k)."""

    alpha: tuple[int, ...]
    component: int
    weight: complex = 1.0

    def __post_init__(self):
        alpha = tuple(int(a) for a in np.atleast_1d(self.alpha))
        if min(alpha) < 0 or sum(alpha) < 1:
            raise DomainError(f"bad multi-index {alpha}")
        if not 0 <= self.component < len(alpha):
            raise DomainError(f"component {self.component} out of range")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "weight", complex(self.weight))


Atom = Union[PointAtom, CoeffAtom]


@dataclass(frozen=True)
class LinearFunctional:
    """Finite complex combination of point evaluations and Taylor coefficients."""

    atoms: tuple[Atom, ...]

    def __post_init__(self):
        atoms = tuple(self.atoms)
        if not atoms:
            raise DomainError("a functional needs at least one atom")
        dims = {len(a.z) if isinstance(a, PointAtom) else len(a.alpha) for a in atoms}
        if len(dims) != 1:
            raise DomainError(f"atoms disagree on the dimension: {dims}")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def coefficient(cls, alpha, component: int = 0, weight: complex = 1.0) -> "LinearFunctional":
        return cls((CoeffAtom(tuple(alpha), component, weight),))

    @classmethod
    def point(cls, z, component: int = 0, weight: complex = 1.0) -> "LinearFunctional":
        return cls((PointAtom(tuple(np.atleast_1d(z)), component, weight),))

    def __add__(self, other: "LinearFunctional") -> "LinearFunctional":
        return LinearFunctional(self.atoms + other.atoms)

    @property
    def dimension(self) -> int:
        a = self.atoms[0]
        return len(a.z) if isinstance(a, PointAtom) else len(a.alpha)

    @property
    def point_atoms(self) -> tuple[PointAtom, ...]:
        return tuple(a for a in self.atoms if isinstance(a, PointAtom))

    @property
    def coeff_atoms(self) -> tuple[CoeffAtom, ...]:
        return tuple(a for a in self.atoms if isinstance(a, CoeffAtom))

    @property
    def order(self) -> int:
        """Highest coefficient order used (0 if there are no coefficient atoms)."""
        return max((sum(a.alpha) for a in self.coeff_atoms), default=0)


def functional_from_dict(rec: Mapping) -> LinearFunctional:
    atoms = []
    for a in rec["atoms"]:
        kind = a.get("kind")
        weight = _cplx(a.get("weight", [1.0, 0.0]))
        comp = int(a.get("component", 0))
        if kind == "point":
            atoms.append(PointAtom(tuple(_cplx(x) for x in a["z"]), comp, weight))
        elif kind == "coeff":
            atoms.append(CoeffAtom(tuple(int(x) for x in a["alpha"]), comp, weight))
        else:
            raise DomainError(f"unknown atom kind {kind!r}")
    return LinearFunctional(tuple(atoms))


def functional_to_dict(L: LinearFunctional) -> dict:
    out = []
    for a in L.atoms:
        w = [a.weight.real, a.weight.imag]
        if isinstance(a, PointAtom):
            out.append({"kind": "point", "z": [[x.real, x.imag] for x in a.z], "component": a.component, "weight": w})
        else:
            out.append({"kind": "coeff", "alpha": list(a.alpha), "component": a.component, "weight": w})
    return {"atoms": out}


MapLike = Union[MapDescriptor, Jet, Callable[[np.ndarray], np.ndarray]]


def eval_functional(L: LinearFunctional, g: MapLike) -> complex:
    """L(g) for a descriptor, a jet (coefficient atoms only) or a callable (point atoms only)."""
    total = 0j
    if L.point_atoms:
        if isinstance(g, Jet):
            raise DomainError("point atoms need an evaluable map, not a truncated jet")
        if isinstance(g, MapDescriptor):
            Z = np.array([a.z for a in L.point_atoms])
            vals = g._eval(Z)
        else:
            vals = np.array([np.atleast_1d(g(np.array(a.z))) for a in L.point_atoms])
        for a, v in zip(L.point_atoms, vals):
            total += a.weight * v[a.component]
    if L.coeff_atoms:
        if isinstance(g, Jet):
            jet = g
        elif isinstance(g, MapDescriptor):
            jet = jet_from_closed_form(g, L.order)
        else:
            raise DomainError("coefficient atoms need a jet or a descriptor")
        if jet.degree < L.order:
            raise DomainError(f"jet degree {jet.degree} below functional order {L.order}")
        for a in L.coeff_atoms:
            total += a.weight * coefficient(jet, a.alpha, a.component)
    return complex(total)


# ---------------------------------------------------------------- transport


class TransportCache:
    """Data of F = f^G needed by every L_t: dF at point atoms and the jet of dF.

    Built once per (L, G) and read-only afterwards.
    """

    def __init__(self, L: LinearFunctional, G: HerglotzField, atol=DEFAULT_ATOL, rtol=DEFAULT_RTOL, tol=1e-11):
        if L.dimension != G.dimension:
            raise DomainError("functional and field have different dimensions")
        self.L, self.G, self.atol, self.rtol = L, G, atol, rtol
        self.n = G.dimension
        self.order = L.order
        pts = np.array([a.z for a in L.point_atoms], dtype=complex).reshape(-1, self.n)
        self.points = pts
        lim = scaled_limit(
            G, 0.0,
            points=pts if len(pts) else None,
            degree=self.order + 1 if self.order else None,
            tol=tol, atol=atol, rtol=rtol,
        )
        self.limit = lim
        self.dF = lim.jacobians
        self.F_values = lim.values
        self.F_jet = None
        self.dF_series = None
        if self.order:
            D = self.order
            self.F_jet = lim.jet
            self.dF_series = ser.resize(ser.jacobian(lim.jet.coeffs, self.n, D + 1), self.n, D + 1, D)
        self.L_of_F = self._functional_of_F()

    def _functional_of_F(self) -> complex:
        total = 0j
        for a, v in zip(self.L.point_atoms, self.F_values if self.F_values is not None else []):
            total += a.weight * v[a.component]
        for a in self.L.coeff_atoms:
            total += a.weight * coefficient(self.F_jet, a.alpha, a.component)
        return complex(total)

    def at(self, t: float) -> "TransportedFunctional":
        return TransportedFunctional(self, t)


class TransportedFunctional:
    """The linear functional h -> L_t(h) at a fixed time t."""

    def __init__(self, cache: TransportCache, t: float):
        G = cache.G
        if not G.is_regular(t):
            raise DomainError(f"t={t} is a breakpoint of the field")
        self.cache, self.t = cache, float(t)
        n = cache.n
        self.growth = math.exp(self.t)
        L = cache.L
        self._point = None
        if L.point_atoms:
            psi, K = scaled_point_flow(G, 0.0, t, cache.points, cache.atol, cache.rtol)
            cond = np.linalg.cond(K)
            if np.any(cond > 1e12):
                raise SingularJacobianError(f"flow Jacobian condition {np.max(cond):.3g}")
            # A = dF K^{-1}
            A = np.swapaxes(np.linalg.solve(np.swapaxes(K, 1, 2), np.swapaxes(cache.dF, 1, 2)), 1, 2)
            comps = np.array([a.component for a in L.point_atoms])
            weights = np.array([a.weight for a in L.point_atoms])
            # row of A selected by each atom's component, pre-weighted
            rows = weights[:, None] * A[np.arange(len(comps)), comps, :]
            self._point = (psi, rows)
        self._coeff_weights = None
        if L.coeff_atoms:
            D = cache.order
            Psi = scaled_flow_jet(G, 0.0, t, D + 1, atol=cache.atol, rtol=cache.rtol).coeffs
            Kser = ser.resize(ser.jacobian(Psi, n, D + 1), n, D + 1, D)
            A = ser.matmul(cache.dF_series, ser.inverse_near_identity(Kser, n, D), n, D)
            self._coeff_weights = self._coefficient_weights(A, ser.resize(Psi, n, D + 1, D), D)

    def _coefficient_weights(self, A, Psi, D):
        # W[k][alpha] = L_coeff( A . e^t (e^-t Psi)^alpha e_k ), so that the
        # coefficient part of L_t(h) is sum_{k, alpha} jet(h)[k][alpha] W[k][alpha]
        n = self.cache.n
        W = ser.zeros((n,), n, D)
        one = ser.constant(n, D)
        cache: dict = {(0,) * n: one}

        def mono(alpha):
            if alpha in cache:
                return cache[alpha]
            j = max(i for i in range(n) if alpha[i] > 0)
            prev = list(alpha)
            prev[j] -= 1
            val = ser.mul(mono(tuple(prev)), Psi[j], n, D)
            cache[alpha] = val
            return val

        for alpha in ser.multi_indices(n, D):
            m = mono(alpha)
            shrink = math.exp(-(sum(alpha) - 1) * self.t)
            for k in range(n):
                vec = np.stack([ser.mul(A[r, k], m, n, D) for r in range(n)])
                val = 0j
                for a in self.cache.L.coeff_atoms:
                    val += a.weight * vec[(a.component,) + a.alpha]
                W[(k,) + alpha] = val * shrink
        return W

    def __call__(self, h: MapDescriptor) -> complex:
        total = 0j
        if self._point is not None:
            psi, rows = self._point
            W = psi / self.growth
            scaled_h = -psi + self.growth * h._remainder(W)
            total += np.sum(rows * scaled_h)
        if self._coeff_weights is not None:
            jet = jet_from_closed_form(h, self.cache.order)
            total += np.sum(jet.coeffs * self._coeff_weights)
        return complex(total)

    def moebius_values(self, zetas: np.ndarray, u: Sequence[complex]) -> np.ndarray:
        """L_t(h) for the slice Moebius maps (zeta, u), vectorized over zeta."""
        zetas = np.asarray(zetas, dtype=complex)
        ubar = np.conj(np.asarray(u, dtype=complex))
        out = np.zeros(zetas.shape, dtype=complex)
        if self._point is not None:
            psi, rows = self._point
            v = (psi @ ubar) / self.growth
            Apsi = np.sum(rows * psi, axis=1)
            q = (zetas[..., None] + v) / (zetas[..., None] - v)
            out += -np.sum(q * Apsi, axis=-1)
        if self._coeff_weights is not None:
            n, D = self.cache.n, self.cache.order
            Wt = self._coeff_weights
            lin = 0j
            for k in range(n):
                e = [0] * n
                e[k] = 1
                lin += Wt[(k,) + tuple(e)]
            out += -lin
            S = np.zeros(D, dtype=complex)
            for beta in ser.multi_indices(n, D - 1):
                m = sum(beta)
                c = -2.0 * _multinomial(beta) * np.prod(ubar ** np.array(beta))
                for k in range(n):
                    a = list(beta)
                    a[k] += 1
                    S[m] += c * Wt[(k,) + tuple(a)]
            for m in range(1, D):
                out += S[m] * zetas ** (-m)
        return out


def transported_functional(
    L: LinearFunctional, G: HerglotzField, t: float, h: MapDescriptor, cache: Optional[TransportCache] = None
) -> complex:
    """L_t(h) = L(dF . [d(phi_t)]^{-1} . h(phi_t)) with F = f^G."""
    cache = cache or TransportCache(L, G)
    return cache.at(t)(h)


# ----------------------------------------------------------- control families


@dataclass(frozen=True)
class ControlFamily:
    """Subfamily of M_n over which the Hamiltonian is maximized.

    ``kind="moebius"``: slice Moebius maps with zeta on an equispaced grid of
    ``zeta_points`` unimodular numbers (optionally refined by golden-section
    search) and, for n > 1, u over the coordinate axes plus ``sphere_points``
    low-discrepancy unit vectors. ``kind="explicit"``: the listed members.
    """

    kind: str = "moebius"
    zeta_points: int = 256
    sphere_points: int = 32
    refine: bool = True
    members: tuple[MapDescriptor, ...] = ()

    def __post_init__(self):
        if self.kind not in ("moebius", "explicit"):
            raise DomainError(f"unknown family kind {self.kind!r}")
        if self.kind == "explicit" and not self.members:
            raise DomainError("explicit family is empty")
        if self.kind == "moebius" and self.zeta_points < 1:
            raise DomainError("zeta grid is empty")
        object.__setattr__(self, "members", tuple(self.members))

    @classmethod
    def explicit(cls, *members: MapDescriptor) -> "ControlFamily":
        return cls(kind="explicit", members=tuple(members))

    def directions(self, n: int) -> np.ndarray:
        if n == 1:
            return np.ones((1, 1), dtype=complex)
        return np.concatenate([np.eye(n, dtype=complex), sphere_points(n, self.sphere_points)])

    def label(self) -> str:
        if self.kind == "explicit":
            return f"explicit({len(self.members)})"
        return f"moebius(zeta={self.zeta_points}, sphere={self.sphere_points}, refine={self.refine})"


def family_from_dict(rec: Optional[Mapping]) -> ControlFamily:
    if rec is None:
        return ControlFamily()
    kind = rec.get("kind", "moebius")
    if kind == "explicit":
        return ControlFamily.explicit(*(descriptor_from_dict(m) for m in rec["members"]))
    return ControlFamily(
        kind="moebius",
        zeta_points=int(rec.get("zeta_points", 256)),
        sphere_points=int(rec.get("sphere_points", 32)),
        refine=bool(rec.get("refine", True)),
    )


def _golden_max(f, a, b, tol):
    invphi = (math.sqrt(5) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def maximize_over_family(Lt: TransportedFunctional, family: ControlFamily, n: int) -> tuple[float, dict]:
    """max Re L_t over the family and the maximizing parameters (first index wins ties)."""
    if family.kind == "explicit":
        vals = np.array([Lt(h).real for h in family.members])
        i = int(np.argmax(vals))
        return float(vals[i]), {"index": i}
    N = family.zeta_points
    thetas = 2.0 * np.pi * np.arange(N) / N
    zetas = np.exp(1j * thetas)
    dirs = family.directions(n)
    table = np.stack([Lt.moebius_values(zetas, u).real for u in dirs])
    flat = int(np.argmax(table))
    iu, iz = divmod(flat, N)
    best = float(table[iu, iz])
    theta = float(thetas[iz])
    if family.refine and N > 1:
        u = dirs[iu]
        step = 2.0 * np.pi / N

        def f(th):
            return float(Lt.moebius_values(np.array([np.exp(1j * th)]), u)[0].real)

        th, val = _golden_max(f, theta - step, theta + step, GOLDEN_TOL)
        if val > best:
            best, theta = val, th
    zeta = complex(np.exp(1j * theta))
    return best, {"zeta": zeta, "u": tuple(complex(x) for x in dirs[iu]), "grid_index": iz}


# ------------------------------------------------------------ Hamiltonian scans


@dataclass(frozen=True)
class HamiltonianScan:
    """m(t) over a control subfamily; a lower bound for the max over all of M_n."""

    t_grid: tuple[float, ...]
    m_values: tuple[float, ...]
    maximizers: tuple[dict, ...]
    active_values: tuple[float, ...]
    constancy_deviation: float
    family: str


def hamiltonian_scan(
    L: LinearFunctional,
    G: HerglotzField,
    family: ControlFamily,
    t_grid: Sequence[float],
    threads: int = 1,
    cache: Optional[TransportCache] = None,
) -> HamiltonianScan:
    t_grid = tuple(float(t) for t in t_grid)
    if not t_grid:
        raise DomainError("empty time grid")
    bad = [t for t in t_grid if not G.is_regular(t)]
    if bad:
        raise DomainError(f"time grid hits breakpoints {bad}")
    cache = cache or TransportCache(L, G)
    n = G.dimension

    def one(t):
        Lt = cache.at(t)
        m, arg = maximize_over_family(Lt, family, n)
        return m, arg, Lt(G.piece_at(t)).real

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, t_grid))
    else:
        rows = [one(t) for t in t_grid]
    m_values = tuple(float(r[0]) for r in rows)
    return HamiltonianScan(
        t_grid=t_grid,
        m_values=m_values,
        maximizers=tuple(r[1] for r in rows),
        active_values=tuple(float(r[2]) for r in rows),
        constancy_deviation=float(max(abs(m - m_values[0]) for m in m_values)),
        family=family.label(),
    )


@dataclass(frozen=True)
class PontryaginReport:
    scan: HamiltonianScan
    slack: float
    violations: tuple[float, ...]
    worst_violation: float
    worst_t: float
    worst_maximizer: dict

    @property
    def passed(self) -> bool:
        return self.worst_violation <= self.slack


def pontryagin_check(
    L: LinearFunctional,
    G: HerglotzField,
    family: ControlFamily,
    t_grid: Sequence[float],
    slack: float = 1e-3,
    threads: int = 1,
    cache: Optional[TransportCache] = None,
) -> PontryaginReport:
    """Check Re L_t(G(., t)) >= m(t) - slack on the grid."""
    scan = hamiltonian_scan(L, G, family, t_grid, threads, cache)
    viol = tuple(m - a for m, a in zip(scan.m_values, scan.active_values))
    i = int(np.argmax(viol))
    return PontryaginReport(scan, slack, viol, float(viol[i]), scan.t_grid[i], scan.maximizers[i])


@dataclass(frozen=True)
class PommerenkeReport:
    m_initial: float
    m_limit: float
    t_limit: float
    minus_re_LF: float
    limit_gap: float
    initial_gap: float
    tol: float
    initial_tol: float
    certified: bool

    @property
    def limit_ok(self) -> bool:
        return self.limit_gap <= self.tol

    @property
    def initial_ok(self) -> bool:
        return self.initial_gap <= self.initial_tol

    @property
    def passed(self) -> bool:
        return self.limit_ok and (self.initial_ok or not self.certified)


def pommerenke_check(
    L: LinearFunctional,
    G: HerglotzField,
    family: ControlFamily,
    t_limit: float = 20.0,
    tol: float = 1e-4,
    certified: bool = False,
    initial_tol: float = 1e-3,
    cache: Optional[TransportCache] = None,
) -> PommerenkeReport:
    """Compare m(0) and m(t_limit) with -Re L(F).

    m(t_limit) -> -Re L(F) holds for any family (uniform limit of L_t); the
    identity m(0) = -Re L(F) is only asserted when ``certified``, i.e. the
    caller knows the true maximizer lies in the family.
    """
    cache = cache or TransportCache(L, G)
    scan = hamiltonian_scan(L, G, family, (0.0, float(t_limit)), cache=cache)
    target = -cache.L_of_F.real
    m0, mT = scan.m_values
    return PommerenkeReport(
        m_initial=m0,
        m_limit=mT,
        t_limit=float(t_limit),
        minus_re_LF=target,
        limit_gap=abs(mT - target),
        initial_gap=abs(m0 - target),
        tol=tol,
        initial_tol=initial_tol,
        certified=certified,
    )


# ------------------------------------------------------------- support screen


@dataclass(frozen=True)
class ScreenResult:
    T: float
    sup_value: float
    fires: bool
    witness: np.ndarray
    margin: float

    @property
    def verdict(self) -> str:
        if self.fires:
            return f"fires: e^t phi_t is not extremal for any t > {self.T}"
        return "does not fire: no conclusion"


def support_screen(
    G: HerglotzField,
    T: float,
    radii: Sequence[float] = BOUNDARY_RADII,
    directions: Optional[int] = None,
    margin: float = SCREEN_MARGIN,
    refine: bool = True,
) -> ScreenResult:
    """Estimate sup Re<G(z,T), z>/|z|^2 over the ball and fire if it is below -margin.

    Restricted to a complex line through 0 the quantity is harmonic, so the
    supremum is approached at the sphere; the grid carries a boundary layer
    and the best directions are polished on the outermost sphere.
    """
    if not G.is_regular(T):
        raise DomainError(f"T={T} is a breakpoint of the field")
    h = G.piece_at(T)
    n = G.dimension
    Z = sample_grid(n, radii, directions)
    vals = margins(h, Z)
    i = int(np.argmax(vals))
    best, witness = float(vals[i]), Z[i]
    if refine:
        r = max(radii)
        outer = np.abs(np.linalg.norm(Z, axis=1) - r) < 1e-15
        cand = np.flatnonzero(outer)
        order = cand[np.argsort(-vals[cand], kind="stable")][:SCREEN_STARTS]

        def neg(x):
            e = (x[:n] + 1j * x[n:]) / np.linalg.norm(x)
            return -float(margins(h, (r * e)[None, :])[0])

        for j in order:
            e0 = Z[j] / r
            x0 = np.concatenate([e0.real, e0.imag])
            res = optimize.minimize(
                neg, x0, method="Nelder-Mead",
                options={"xatol": 1e-7, "fatol": 1e-13, "maxiter": 1000 * n},
            )
            if -res.fun > best:
                e = (res.x[:n] + 1j * res.x[n:]) / np.linalg.norm(res.x)
                best, witness = float(-res.fun), r * e
    return ScreenResult(T=float(T), sup_value=best, fires=best < -margin, witness=np.asarray(witness), margin=margin)


# ---------------------------------------------------------- non-constancy probe


@dataclass(frozen=True)
class ProbeReport:
    t: float
    values: dict
    max_modulus: float
    witness: Optional[tuple[int, tuple[int, ...]]]
    tol: float

    @property
    def witnessed(self) -> bool:
        return self.max_modulus > self.tol


def nonconstancy_probe(
    L: LinearFunctional,
    G: HerglotzField,
    t: float,
    degree: int = 4,
    tol: float = 1e-12,
    cache: Optional[TransportCache] = None,
) -> ProbeReport:
    """Evaluate L_t on the monomial perturbations z^alpha e_k, 2 <= |alpha| <= degree.

    Since -z + eps P lies in M_n for small eps, any nonzero L_t(P) shows
    that L_t is not constant on M_n.
    """
    if degree < 2:
        raise DomainError("probe degree must be >= 2")
    cache = cache or TransportCache(L, G)
    Lt = cache.at(t)
    n = G.dimension
    values = {}
    for alpha in ser.multi_indices(n, degree, start=2):
        for k in range(n):
            P = PolyJet(Jet.from_terms(n, degree, {(k, alpha): 1.0}))
            values[(k, alpha)] = Lt(P)
    key = max(values, key=lambda kk: abs(values[kk]))
    mx = abs(values[key])
    return ProbeReport(t=float(t), values=values, max_modulus=mx, witness=key if mx > tol else None, tol=tol)
