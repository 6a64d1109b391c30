"""Holomorphic maps on the unit ball of C^n.

Maps are described by small immutable descriptors (closed forms, truncated
Taylor jets and convex combinations of these) that can be evaluated,
differentiated exactly and expanded into jets. The module also carries the
sampling test for the normalized class

    M_n = {h : h(0) = 0, dh_0 = -id, Re <h(z), z> <= 0 on the ball}.

Points are complex numpy arrays of shape ``(n,)`` or batches ``(P, n)``.
The inner product ``<a, b> = sum a_i conj(b_i)`` is linear in ``a``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import norm, qmc

from . import _series as ser
from .errors import DomainError

DEFAULT_RADII = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95)
# Suprema of Re<h(z), z>/|z|^2 are approached at the sphere, so tests that
# need the supremum (screen, perturbation radius) add a boundary layer.
BOUNDARY_RADII = DEFAULT_RADII + (0.99, 0.999, 0.9999, 0.99999, 0.999999)
DEFAULT_DIRECTIONS_1D = 64
DEFAULT_DIRECTIONS_ND = 128
DEFAULT_TOL = 1e-12
DEFAULT_JET_DEGREE = 6


def inner(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean inner product along the last axis."""
    return np.sum(a * np.conj(b), axis=-1)


def as_points(z, n: int | None = None) -> tuple[np.ndarray, bool]:
    """Coerce ``z`` to a ``(P, n)`` complex batch; also report whether it was a single point."""
    arr = np.asarray(z, dtype=complex)
    single = arr.ndim <= 1
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise DomainError(f"points must be a vector or a (P, n) batch, got shape {arr.shape}")
    if n is not None and arr.shape[1] != n:
        raise DomainError(f"dimension mismatch: map has n={n}, point has n={arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("points must be finite")
    return arr, single


def _check_ball(Z: np.ndarray) -> None:
    norms = np.linalg.norm(Z, axis=1)
    if np.any(norms >= 1.0):
        bad = Z[int(np.argmax(norms))]
        raise DomainError(f"point {bad} is not in the open unit ball")


# --------------------------------------------------------------------------- jets


@dataclass(frozen=True, eq=False)
class Jet:
    """Truncated Taylor expansion at 0 of a map C^n -> C^n without constant term.

    ``coeffs[k][alpha]`` is the coefficient of ``z**alpha`` in component k;
    the array has shape ``(n,) + (degree+1,)*n``.
    """

    dimension: int
    degree: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        n, d = self.dimension, self.degree
        if n < 1 or d < 1:
            raise DomainError("jet needs dimension >= 1 and degree >= 1")
        arr = np.array(self.coeffs, dtype=complex)
        if arr.shape != (n,) + (d + 1,) * n:
            raise DomainError(f"coefficient array has shape {arr.shape}, expected {(n,) + (d + 1,) * n}")
        arr = ser.truncate(arr, n, d)
        arr[(slice(None),) + (0,) * n] = 0.0
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def from_terms(cls, n: int, d: int, terms: Mapping[tuple[int, tuple[int, ...]], complex]) -> "Jet":
        arr = ser.zeros((n,), n, d)
        for (k, alpha), c in terms.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != n or not 0 <= k < n:
                raise DomainError(f"bad term index {(k, alpha)} for n={n}")
            if not 1 <= sum(alpha) <= d:
                raise DomainError(f"|alpha| = {sum(alpha)} outside 1..{d}")
            arr[(k,) + alpha] += c
        return cls(n, d, arr)

    @classmethod
    def identity(cls, n: int, d: int) -> "Jet":
        return cls(n, d, np.stack([ser.variable(n, d, i) for i in range(n)]))

    @classmethod
    def zero(cls, n: int, d: int) -> "Jet":
        return cls(n, d, ser.zeros((n,), n, d))

    def terms(self) -> dict[tuple[int, tuple[int, ...]], complex]:
        out = {}
        for alpha in ser.multi_indices(self.dimension, self.degree):
            for k in range(self.dimension):
                c = self.coeffs[(k,) + alpha]
                if c != 0:
                    out[(k, alpha)] = complex(c)
        return out

    def linear_part(self) -> np.ndarray:
        """The n x n matrix of degree-one coefficients (row = component)."""
        n = self.dimension
        out = np.zeros((n, n), dtype=complex)
        for i in range(n):
            idx = [0] * n
            idx[i] = 1
            out[:, i] = self.coeffs[(slice(None),) + tuple(idx)]
        return out

    def with_degree(self, d: int) -> "Jet":
        return Jet(self.dimension, d, ser.resize(self.coeffs, self.dimension, self.degree, d))

    def __add__(self, other: "Jet") -> "Jet":
        if not isinstance(other, Jet):
            return NotImplemented
        _same_dim(self.dimension, other.dimension)
        d = min(self.degree, other.degree)
        return Jet(self.dimension, d, self.with_degree(d).coeffs + other.with_degree(d).coeffs)

    def __sub__(self, other: "Jet") -> "Jet":
        return self + other * -1.0

    def __mul__(self, c: complex) -> "Jet":
        return Jet(self.dimension, self.degree, self.coeffs * complex(c))

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, Jet):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and self.degree == other.degree
            and np.array_equal(self.coeffs, other.coeffs)
        )

    def __hash__(self) -> int:
        return hash((self.dimension, self.degree, self.coeffs.tobytes()))

    def max_abs_diff(self, other: "Jet") -> float:
        _same_dim(self.dimension, other.dimension)
        d = min(self.degree, other.degree)
        return float(np.max(np.abs(self.with_degree(d).coeffs - other.with_degree(d).coeffs)))


def _same_dim(a: int, b: int) -> None:
    if a != b:
        raise DomainError(f"dimension mismatch: {a} vs {b}")


def jet_compose(outer: Jet, inner_jet: Jet) -> Jet:
    """Jet of ``outer o inner``, truncated at the smaller of the two degrees."""
    _same_dim(outer.dimension, inner_jet.dimension)
    n = outer.dimension
    d = min(outer.degree, inner_jet.degree)
    a = ser.resize(outer.coeffs, n, outer.degree, d)
    b = ser.resize(inner_jet.coeffs, n, inner_jet.degree, d)
    return Jet(n, d, ser.compose(a, b, n, d))


def coefficient(j: Jet, alpha: Sequence[int], k: int) -> complex:
    """Coefficient of ``z**alpha`` in component ``k`` (0-based)."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != j.dimension:
        raise DomainError(f"multi-index {alpha} has wrong length for n={j.dimension}")
    if not 1 <= sum(alpha) <= j.degree or min(alpha) < 0:
        raise DomainError(f"|alpha| = {sum(alpha)} outside 1..{j.degree}")
    if not 0 <= k < j.dimension:
        raise DomainError(f"component {k} out of range")
    return complex(j.coeffs[(k,) + alpha])


# --------------------------------------------------------------------- descriptors


class MapDescriptor:
    """Base class for holomorphic maps defined on the unit ball.

    Subclasses implement batch evaluation on ``(P, n)`` arrays. ``_remainder``
    returns ``h(z) + z`` computed without cancellation, which is what the
    rescaled Loewner flow needs at large times.
    """

    dimension: int

    def _eval(self, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _jac(self, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _remainder(self, Z: np.ndarray) -> np.ndarray:
        return self._eval(Z) + Z

    def _remainder_jac(self, Z: np.ndarray) -> np.ndarray:
        return self._jac(Z) + np.eye(self.dimension)

    def _jet(self, d: int) -> Jet:
        raise NotImplementedError


@dataclass(frozen=True)
class LinearRadial(MapDescriptor):
    """The map z -> -z."""

    dimension: int = 1

    def __post_init__(self):
        if self.dimension < 1:
            raise DomainError("dimension must be >= 1")

    def _eval(self, Z):
        return -Z

    def _jac(self, Z):
        return np.broadcast_to(-np.eye(self.dimension, dtype=complex), (Z.shape[0], self.dimension, self.dimension)).copy()

    def _remainder(self, Z):
        return np.zeros_like(Z)

    def _remainder_jac(self, Z):
        return np.zeros((Z.shape[0], self.dimension, self.dimension), dtype=complex)

    def _jet(self, d):
        return Jet.identity(self.dimension, d) * -1.0


@dataclass(frozen=True)
class SliceMoebius(MapDescriptor):
    """z -> -z (zeta + <z,u>) / (zeta - <z,u>) with |zeta| = 1 and |u| = 1.

    For n = 1 and u = 1 these are the extreme points of M_1, the fields
    generating the rotated Koebe functions z / (1 + conj(zeta) z)^2.
    """

    zeta: complex
    u: tuple[complex, ...] = (1.0 + 0j,)

    def __post_init__(self):
        zeta = complex(self.zeta)
        u = tuple(complex(x) for x in np.atleast_1d(np.asarray(self.u, dtype=complex)))
        if abs(abs(zeta) - 1.0) > 1e-12:
            raise DomainError(f"|zeta| = {abs(zeta)} is not 1")
        if len(u) < 1 or abs(np.linalg.norm(u) - 1.0) > 1e-12:
            raise DomainError(f"u = {u} is not a unit vector")
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "u", u)

    @classmethod
    def at_angle(cls, theta: float, u=None) -> "SliceMoebius":
        return cls(complex(math.cos(theta), math.sin(theta)), (1.0,) if u is None else tuple(u))

    @property
    def dimension(self) -> int:
        return len(self.u)

    @cached_property
    def _ubar(self) -> np.ndarray:
        return np.conj(np.array(self.u, dtype=complex))

    def _v(self, Z):
        return Z @ self._ubar

    def _eval(self, Z):
        v = self._v(Z)
        q = (self.zeta + v) / (self.zeta - v)
        return -Z * q[:, None]

    def _jac(self, Z):
        v = self._v(Z)
        q = (self.zeta + v) / (self.zeta - v)
        dq = 2.0 * self.zeta / (self.zeta - v) ** 2
        n = self.dimension
        return -q[:, None, None] * np.eye(n) - Z[:, :, None] * (dq[:, None] * self._ubar[None, :])[:, None, :]

    def _remainder(self, Z):
        v = self._v(Z)
        return Z * (-2.0 * v / (self.zeta - v))[:, None]

    def _remainder_jac(self, Z):
        v = self._v(Z)
        g = -2.0 * v / (self.zeta - v)
        dg = -2.0 * self.zeta / (self.zeta - v) ** 2
        n = self.dimension
        return g[:, None, None] * np.eye(n) + Z[:, :, None] * (dg[:, None] * self._ubar[None, :])[:, None, :]

    def _jet(self, d):
        n = self.dimension
        arr = ser.zeros((n,), n, d)
        for k in range(n):
            idx = [0] * n
            idx[k] = 1
            arr[(k,) + tuple(idx)] = -1.0
        for beta in ser.multi_indices(n, d - 1):
            m = sum(beta)
            c = -2.0 * self.zeta ** (-m) * _multinomial(beta) * np.prod(self._ubar ** np.array(beta))
            for k in range(n):
                a = list(beta)
                a[k] += 1
                arr[(k,) + tuple(a)] += c
        return Jet(n, d, arr)


@lru_cache(maxsize=None)
def _multinomial(beta: tuple[int, ...]) -> int:
    out = math.factorial(sum(beta))
    for b in beta:
        out //= math.factorial(b)
    return out


@dataclass(frozen=True)
class PolyJet(MapDescriptor):
    """A polynomial map given by its (finite) Taylor jet."""

    jet: Jet

    @property
    def dimension(self) -> int:
        return self.jet.dimension

    @classmethod
    def from_terms(cls, n: int, d: int, terms) -> "PolyJet":
        return cls(Jet.from_terms(n, d, terms))

    @cached_property
    def _jac_series(self):
        return ser.jacobian(self.jet.coeffs, self.dimension, self.jet.degree)

    @cached_property
    def _rem_series(self):
        n = self.dimension
        return self.jet.coeffs + Jet.identity(n, self.jet.degree).coeffs

    def _eval(self, Z):
        return ser.evaluate(self.jet.coeffs, Z, self.dimension, self.jet.degree).T

    def _jac(self, Z):
        vals = ser.evaluate(self._jac_series, Z, self.dimension, self.jet.degree)
        return np.moveaxis(vals, -1, 0)

    def _remainder(self, Z):
        return ser.evaluate(self._rem_series, Z, self.dimension, self.jet.degree).T

    def _remainder_jac(self, Z):
        s = ser.jacobian(self._rem_series, self.dimension, self.jet.degree)
        return np.moveaxis(ser.evaluate(s, Z, self.dimension, self.jet.degree), -1, 0)

    def _jet(self, d):
        return self.jet.with_degree(d)


@dataclass(frozen=True)
class ConvexCombo(MapDescriptor):
    """Convex combination sum_i w_i * parts_i (weights nonnegative, summing to 1)."""

    weights: tuple[float, ...]
    parts: tuple[MapDescriptor, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        parts = tuple(self.parts)
        if len(w) != len(parts) or not parts:
            raise DomainError("weights and parts must be nonempty and of equal length")
        if min(w) < 0 or abs(math.fsum(w) - 1.0) > 1e-12:
            raise DomainError(f"weights {w} are not a probability vector")
        dims = {p.dimension for p in parts}
        if len(dims) != 1:
            raise DomainError(f"parts have mixed dimensions {dims}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "parts", parts)

    @property
    def dimension(self) -> int:
        return self.parts[0].dimension

    def _combine(self, method: str, Z):
        return sum(w * getattr(p, method)(Z) for w, p in zip(self.weights, self.parts))

    def _eval(self, Z):
        return self._combine("_eval", Z)

    def _jac(self, Z):
        return self._combine("_jac", Z)

    # weights sum to one, so the remainder of the combination is the
    # combination of remainders
    def _remainder(self, Z):
        return self._combine("_remainder", Z)

    def _remainder_jac(self, Z):
        return self._combine("_remainder_jac", Z)

    def _jet(self, d):
        n = self.dimension
        acc = np.zeros((n,) + (d + 1,) * n, dtype=complex)
        for w, p in zip(self.weights, self.parts):
            acc += w * p._jet(d).coeffs
        return Jet(n, d, acc)


# ----------------------------------------------------------------- public ops


def eval_map(m: MapDescriptor, z) -> np.ndarray:
    """Value h(z) for a point or a batch of points in the open ball."""
    Z, single = as_points(z, m.dimension)
    _check_ball(Z)
    out = m._eval(Z)
    return out[0] if single else out


def jacobian_map(m: MapDescriptor, z) -> np.ndarray:
    """Exact holomorphic Jacobian; shape (n, n) or (P, n, n)."""
    Z, single = as_points(z, m.dimension)
    _check_ball(Z)
    out = m._jac(Z)
    return out[0] if single else out


def jet_from_closed_form(m: MapDescriptor, degree: int = DEFAULT_JET_DEGREE) -> Jet:
    if degree < 1:
        raise DomainError("degree must be >= 1")
    return m._jet(int(degree))


# ------------------------------------------------------------------- membership


@lru_cache(maxsize=None)
def sphere_points(n: int, count: int) -> np.ndarray:
    """Deterministic low-discrepancy points on the unit sphere of C^n.

    Unscrambled Halton points pushed through the normal quantile function and
    normalized; the first Halton point (the origin of the cube) is skipped.
    """
    raw = qmc.Halton(d=2 * n, scramble=False).random(count + 1)[1:]
    g = norm.ppf(raw)
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    pts = g[:, :n] + 1j * g[:, n:]
    pts.setflags(write=False)
    return pts


def direction_grid(n: int, directions: int | None = None) -> np.ndarray:
    if n == 1:
        count = directions or DEFAULT_DIRECTIONS_1D
        theta = 2.0 * np.pi * np.arange(count) / count
        return np.exp(1j * theta)[:, None]
    return np.array(sphere_points(n, directions or DEFAULT_DIRECTIONS_ND))


def sample_grid(n: int, radii: Iterable[float] = DEFAULT_RADII, directions: int | None = None) -> np.ndarray:
    """Points r * e for every radius r and grid direction e, radius-major."""
    radii = tuple(float(r) for r in radii)
    if not radii:
        raise DomainError("empty radius list")
    if any(not 0.0 < r < 1.0 for r in radii):
        raise DomainError(f"radii must lie in (0, 1): {radii}")
    dirs = direction_grid(n, directions)
    if dirs.shape[0] == 0:
        raise DomainError("empty direction grid")
    return np.concatenate([r * dirs for r in radii])


def margins(m: MapDescriptor, Z: np.ndarray) -> np.ndarray:
    """Re<h(z), z>/|z|^2 at each row of Z."""
    return np.real(inner(m._eval(Z), Z)) / np.sum(np.abs(Z) ** 2, axis=1)


@dataclass(frozen=True)
class MembershipReport:
    passed: bool
    worst_margin: float
    worst_point: np.ndarray
    normalization_ok: bool
    radii: tuple[float, ...]
    directions: int
    tol: float

    @property
    def pass_(self) -> bool:
        return self.passed


def check_class_membership(
    m: MapDescriptor,
    radii: Sequence[float] = DEFAULT_RADII,
    directions_per_radius: int | None = None,
    tol: float = DEFAULT_TOL,
) -> MembershipReport:
    """Sample Re<h(z), z>/|z|^2 on a deterministic grid and check normalization.

    A pass only means no violation on the grid; a failure with a positive
    margin is a certificate that h is not in M_n.
    """
    if tol < 0:
        raise DomainError("tol must be >= 0")
    n = m.dimension
    Z = sample_grid(n, radii, directions_per_radius)
    vals = margins(m, Z)
    i = int(np.argmax(vals))
    origin = np.zeros((1, n), dtype=complex)
    h0 = m._eval(origin)[0]
    dh0 = m._jac(origin)[0]
    norm_ok = bool(np.max(np.abs(h0)) <= tol and np.max(np.abs(dh0 + np.eye(n))) <= tol)
    worst = float(vals[i])
    return MembershipReport(
        passed=norm_ok and worst <= tol,
        worst_margin=worst,
        worst_point=Z[i].copy(),
        normalization_ok=norm_ok,
        radii=tuple(float(r) for r in radii),
        directions=int(Z.shape[0] // len(tuple(radii))),
        tol=tol,
    )


def membership_radius(
    P: Jet,
    tol: float = 1e-9,
    radii: Sequence[float] = BOUNDARY_RADII,
    directions_per_radius: int | None = None,
    eps_cap: float = 2.0**40,
) -> float:
    """Largest delta such that -z + eps * P passes the membership sample for eps in [0, delta].

    The margin is affine in eps, so the passing set is an interval and
    bisection applies. Returns ``math.inf`` when no finite delta exists on
    the grid (e.g. P = 0).
    """
    lin = P.linear_part()
    if np.any(lin != 0):
        raise DomainError("perturbation must have no linear term")
    n = P.dimension
    base = LinearRadial(n)
    pert = PolyJet(P)

    def passes(eps: float) -> bool:
        h = PolyJet(base._jet(P.degree) + P * eps)
        return check_class_membership(h, radii, directions_per_radius, DEFAULT_TOL).passed

    if not np.any(pert.jet.coeffs) or passes(eps_cap):
        return math.inf
    lo, hi = 0.0, 1.0
    while passes(hi):
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if passes(mid):
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------- serialization


def _cplx(x) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise DomainError(f"complex number must be [re, im], got {x}")
        return complex(float(x[0]), float(x[1]))
    return complex(x)


def _pair(c: complex) -> list[float]:
    return [float(c.real), float(c.imag)]


def descriptor_to_dict(m: MapDescriptor) -> dict:
    """Structured record with a ``kind`` discriminator; complex numbers as [re, im]."""
    if isinstance(m, LinearRadial):
        return {"kind": "linear_radial", "dimension": m.dimension}
    if isinstance(m, SliceMoebius):
        return {"kind": "slice_moebius", "zeta": _pair(m.zeta), "u": [_pair(x) for x in m.u]}
    if isinstance(m, PolyJet):
        return {"kind": "poly_jet", **jet_to_dict(m.jet)}
    if isinstance(m, ConvexCombo):
        return {
            "kind": "convex_combo",
            "weights": list(m.weights),
            "parts": [descriptor_to_dict(p) for p in m.parts],
        }
    raise TypeError(f"unknown descriptor {type(m).__name__}")


def descriptor_from_dict(rec: Mapping) -> MapDescriptor:
    try:
        kind = rec["kind"]
        if kind == "linear_radial":
            return LinearRadial(int(rec.get("dimension", 1)))
        if kind == "slice_moebius":
            u = rec.get("u", [[1.0, 0.0]])
            return SliceMoebius(_cplx(rec["zeta"]), tuple(_cplx(x) for x in u))
        if kind == "poly_jet":
            return PolyJet(jet_from_dict(rec))
        if kind == "convex_combo":
            return ConvexCombo(
                tuple(float(w) for w in rec["weights"]),
                tuple(descriptor_from_dict(p) for p in rec["parts"]),
            )
    except (KeyError, TypeError) as exc:
        raise DomainError(f"malformed map record {dict(rec)!r}: {exc}") from exc
    raise DomainError(f"unknown map kind {rec.get('kind')!r}")


def jet_to_dict(j: Jet) -> dict:
    terms = [
        [k, list(alpha), float(c.real), float(c.imag)]
        for (k, alpha), c in sorted(j.terms().items(), key=lambda kv: (sum(kv[0][1]), kv[0][0], kv[0][1]))
    ]
    return {"dimension": j.dimension, "degree": j.degree, "terms": terms}


def jet_from_dict(rec: Mapping) -> Jet:
    n = int(rec["dimension"])
    terms = {}
    for row in rec["terms"]:
        k, alpha, re, im = row
        key = (int(k), tuple(int(a) for a in alpha))
        terms[key] = terms.get(key, 0) + complex(float(re), float(im))
    d = int(rec.get("degree", max((sum(a) for _, a in terms), default=1)))
    return Jet.from_terms(n, d, terms)
