"""Loewner ODE on the unit ball for piecewise-constant Herglotz fields.

All flows are integrated in the rescaled variables

    psi(tau) = e^(tau - s) * phi_{s,tau}(z),   K(tau) = e^(tau - s) * d(phi_{s,tau})_z,

which satisfy psi' = e^(tau-s) R(e^-(tau-s) psi) and K' = dR(e^-(tau-s) psi) K
with R(w) = G(w, tau) + w. R vanishes to second order at 0, so the rescaled
state stays O(1), the right-hand side decays as the flow contracts, and the
infinite-horizon limit f_s = lim e^t phi_{s,t} = e^s lim psi comes out of the
same integrator without loss of relative precision.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from . import _dopri
from . import _series as ser
from .errors import DomainError, HorizonError, IntegrationError
from .holomap import (
    Jet,
    MapDescriptor,
    as_points,
    check_class_membership,
    descriptor_from_dict,
    descriptor_to_dict,
)

DEFAULT_ATOL = 1e-10
DEFAULT_RTOL = 1e-10
MAX_STEPS = 10**6
HORIZON_CAP = 40.0
# slack for the pointwise contraction and decay checks, relative to |z|
CHECK_SLACK = 1e-8


@dataclass(frozen=True)
class HerglotzField:
    """Piecewise-constant Herglotz vector field.

    ``pieces[i]`` is active on ``[breakpoints[i], breakpoints[i+1])`` and the
    last piece on ``[breakpoints[-1], inf)``. ``breakpoints[0]`` is 0.
    """

    breakpoints: tuple[float, ...]
    pieces: tuple[MapDescriptor, ...]
    validate: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        pieces = tuple(self.pieces)
        if not bps or bps[0] != 0.0:
            raise DomainError("first breakpoint must be 0")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise DomainError(f"breakpoints must be strictly increasing: {bps}")
        if len(pieces) != len(bps):
            raise DomainError("need exactly one piece per breakpoint")
        if len({p.dimension for p in pieces}) != 1:
            raise DomainError("pieces have mixed dimensions")
        if self.validate:
            for i, p in enumerate(pieces):
                rep = check_class_membership(p)
                if not rep.passed:
                    raise DomainError(
                        f"piece {i} is not in M_n: margin {rep.worst_margin:.3g} at {rep.worst_point}"
                    )
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "pieces", pieces)

    @classmethod
    def constant(cls, h: MapDescriptor, validate: bool = True) -> "HerglotzField":
        return cls((0.0,), (h,), validate)

    @property
    def dimension(self) -> int:
        return self.pieces[0].dimension

    def piece_index(self, t: float) -> int:
        if t < 0:
            raise DomainError(f"time {t} is negative")
        return bisect.bisect_right(self.breakpoints, t) - 1

    def piece_at(self, t: float) -> MapDescriptor:
        return self.pieces[self.piece_index(t)]

    def is_regular(self, t: float) -> bool:
        """Regular (Lebesgue) times: everything except the interior breakpoints."""
        return t >= 0 and t not in self.breakpoints[1:]

    def segments(self, s: float, t: float):
        """Yield (start, stop, piece) covering [s, t] without crossing a breakpoint."""
        i = self.piece_index(s)
        a = s
        while a < t:
            stop = self.breakpoints[i + 1] if i + 1 < len(self.breakpoints) else math.inf
            b = min(stop, t)
            yield a, b, self.pieces[i]
            a = b
            i += 1

    @property
    def last_breakpoint(self) -> float:
        return self.breakpoints[-1]


def field_to_dict(G: HerglotzField) -> dict:
    return {"breakpoints": list(G.breakpoints), "pieces": [descriptor_to_dict(p) for p in G.pieces]}


def field_from_dict(rec: Mapping) -> HerglotzField:
    if "kind" in rec:
        return HerglotzField.constant(descriptor_from_dict(rec))
    try:
        pieces = tuple(descriptor_from_dict(p) for p in rec["pieces"])
        bps = tuple(float(b) for b in rec.get("breakpoints", [0.0]))
    except KeyError as exc:
        raise DomainError(f"field record is missing {exc}") from exc
    return HerglotzField(bps, pieces)


# ----------------------------------------------------------------- point flows


@dataclass(frozen=True)
class FlowResult:
    """Values and Jacobians of phi_{s,t} at sample points.

    ``error_estimate`` sums the accepted local error estimates (in units of
    the rescaled state) times e^-(t-s); it is a diagnostic, not a bound.
    """

    s: float
    t: float
    points: np.ndarray
    values: np.ndarray
    jacobians: np.ndarray
    steps_taken: int
    error_estimate: float


class _PointState:
    """Rescaled point/Jacobian state and its right-hand side."""

    def __init__(self, Z: np.ndarray, base: float):
        self.Z = Z
        self.P, self.n = Z.shape
        self.base = base
        self.radius = np.linalg.norm(Z, axis=1)

    def initial(self) -> np.ndarray:
        K = np.broadcast_to(np.eye(self.n, dtype=complex), (self.P, self.n, self.n))
        return self.pack(self.Z, K)

    def pack(self, psi, K) -> np.ndarray:
        return np.concatenate([psi.reshape(-1), K.reshape(-1)])

    def unpack(self, y):
        m = self.P * self.n
        return y[:m].reshape(self.P, self.n), y[m:].reshape(self.P, self.n, self.n)

    def rhs(self, piece: MapDescriptor):
        def f(tau, y):
            psi, K = self.unpack(y)
            a = math.exp(tau - self.base)
            W = psi / a
            dpsi = a * piece._remainder(W)
            dK = piece._remainder_jac(W) @ K
            return self.pack(dpsi, dK)

        return f

    def contraction_check(self, tau, y):
        psi, _ = self.unpack(y)
        r = np.linalg.norm(psi, axis=1) * math.exp(-(tau - self.base))
        if np.any(r > self.radius * (1 + CHECK_SLACK) + 1e-300):
            j = int(np.argmax(r - self.radius))
            raise IntegrationError(
                f"contraction |phi| <= |z| violated at tau={tau}: {r[j]} > {self.radius[j]}"
            )


def _run_segments(G, state, y, start, stop, atol, rtol, stats, max_steps):
    for a, b, piece in G.segments(start, stop):
        y = _dopri.integrate(
            state.rhs(piece), a, b, y, atol, rtol, stats, max_steps, on_accept=state.contraction_check
        )
    return y


def _check_time_order(s: float, t: float) -> None:
    if not (0 <= s <= t):
        raise DomainError(f"need 0 <= s <= t, got s={s}, t={t}")
    if not math.isfinite(t):
        raise DomainError("t must be finite; use scaled_limit for t = infinity")


def _decay_bound(radius: np.ndarray, elapsed: float) -> np.ndarray:
    return math.exp(-elapsed) * radius / (1.0 - radius) ** 2


def _scaled_point_flow(G, s, t, Z, atol, rtol, max_steps):
    state = _PointState(Z, s)
    stats = _dopri.StepStats()
    y = _run_segments(G, state, state.initial(), s, t, atol, rtol, stats, max_steps)
    psi, K = state.unpack(y)
    return psi, K, stats


def integrate_flow(
    G: HerglotzField,
    s: float,
    t: float,
    points,
    atol: float = DEFAULT_ATOL,
    rtol: float = DEFAULT_RTOL,
    max_steps: int = MAX_STEPS,
) -> FlowResult:
    """phi_{s,t}(z) and d(phi_{s,t})_z for every sample point z.

    Integrates the Loewner ODE together with its variational equation
    d/dt J = dG/dz(phi, t) J by an adaptive Dormand-Prince 5(4) pair, one
    breakpoint-free segment at a time.
    """
    _check_time_order(s, t)
    Z, _ = as_points(points, G.dimension)
    if np.any(np.linalg.norm(Z, axis=1) >= 1.0):
        raise DomainError("all points must lie in the open unit ball")
    psi, K, stats = _scaled_point_flow(G, s, t, Z, atol, rtol, max_steps)
    shrink = math.exp(-(t - s))
    values = psi * shrink
    radius = np.linalg.norm(Z, axis=1)
    bound = _decay_bound(radius, t - s)
    if np.any(np.linalg.norm(values, axis=1) > bound * (1 + CHECK_SLACK) + 1e-300):
        raise IntegrationError("decay bound |phi_{s,t}(z)| <= e^-(t-s)|z|/(1-|z|)^2 violated")
    return FlowResult(
        s=float(s),
        t=float(t),
        points=Z,
        values=values,
        jacobians=K * shrink,
        steps_taken=stats.accepted,
        error_estimate=stats.error_sum * shrink,
    )


@dataclass(frozen=True)
class EvolutionCheck:
    direct: FlowResult
    composed: FlowResult
    residual: float
    jacobian_residual: float


def evolution_map(G: HerglotzField, u: float, s: float, t: float, points, **tols) -> EvolutionCheck:
    """Compare phi_{u,t} with phi_{s,t} o phi_{u,s} on the sample points."""
    if not (0 <= u <= s <= t):
        raise DomainError(f"need 0 <= u <= s <= t, got {(u, s, t)}")
    direct = integrate_flow(G, u, t, points, **tols)
    first = integrate_flow(G, u, s, points, **tols)
    second = integrate_flow(G, s, t, first.values, **tols)
    resid = float(np.max(np.abs(direct.values - second.values), initial=0.0))
    jac = second.jacobians @ first.jacobians
    jresid = float(np.max(np.abs(direct.jacobians - jac), initial=0.0))
    composed = FlowResult(
        s=u,
        t=t,
        points=direct.points,
        values=second.values,
        jacobians=jac,
        steps_taken=first.steps_taken + second.steps_taken,
        error_estimate=first.error_estimate + second.error_estimate,
    )
    return EvolutionCheck(direct, composed, resid, jresid)


# ------------------------------------------------------------------- jet flows


class _JetState:
    def __init__(self, n: int, d: int, base: float):
        self.n, self.d, self.base = n, d, base
        self._rem_cache: dict[int, np.ndarray] = {}

    def initial(self) -> np.ndarray:
        return Jet.identity(self.n, self.d).coeffs.copy()

    def remainder_series(self, piece: MapDescriptor) -> np.ndarray:
        key = id(piece)
        got = self._rem_cache.get(key)
        if got is None:
            got = piece._jet(self.d).coeffs + Jet.identity(self.n, self.d).coeffs
            self._rem_cache[key] = got
        return got

    def rhs(self, piece: MapDescriptor):
        R = self.remainder_series(piece)
        n, d = self.n, self.d

        def f(tau, Psi):
            shrink = math.exp(-(tau - self.base))
            Rs = ser.scale_by_degree(R, n, d, lambda k: shrink ** (k - 1) if k >= 1 else 0.0)
            return ser.compose(Rs, Psi, n, d)

        return f


def _scaled_jet_flow(G, s, t, d, atol, rtol, max_steps, state=None, Psi=None, stats=None):
    state = state or _JetState(G.dimension, d, s)
    stats = stats or _dopri.StepStats()
    Psi = state.initial() if Psi is None else Psi
    for a, b, piece in G.segments(s, t):
        Psi = _dopri.integrate(state.rhs(piece), a, b, Psi, atol, rtol, stats, max_steps)
    return Psi, stats


def flow_jet(
    G: HerglotzField,
    s: float,
    t: float,
    degree: int = 6,
    atol: float = DEFAULT_ATOL,
    rtol: float = DEFAULT_RTOL,
    max_steps: int = MAX_STEPS,
) -> Jet:
    """Taylor jet of phi_{s,t} at the origin, through total degree ``degree``.

    The coefficient ODE is the jet of G composed with the current jet; the
    truncation is exact because phi has no constant term.
    """
    _check_time_order(s, t)
    Psi, _ = _scaled_jet_flow(G, s, t, int(degree), atol, rtol, max_steps)
    return Jet(G.dimension, int(degree), Psi * math.exp(-(t - s)))


def scaled_flow_jet(G: HerglotzField, s: float, t: float, degree: int, **tols) -> Jet:
    """Jet of e^(t-s) phi_{s,t}; its linear part is the identity."""
    _check_time_order(s, t)
    Psi, _ = _scaled_jet_flow(
        G, s, t, int(degree), tols.get("atol", DEFAULT_ATOL), tols.get("rtol", DEFAULT_RTOL), MAX_STEPS
    )
    return Jet(G.dimension, int(degree), Psi)


def scaled_point_flow(G: HerglotzField, s: float, t: float, points, atol=DEFAULT_ATOL, rtol=DEFAULT_RTOL):
    """(e^(t-s) phi_{s,t}(z), e^(t-s) d(phi_{s,t})_z) computed without rescaling loss."""
    _check_time_order(s, t)
    Z, _ = as_points(points, G.dimension)
    psi, K, _ = _scaled_point_flow(G, s, t, Z, atol, rtol, MAX_STEPS)
    return psi, K


# ------------------------------------------------------------- infinite horizon


@dataclass(frozen=True)
class ScaledLimit:
    """Samples and/or the jet of f_s = lim_{t -> inf} e^t phi_{s,t}.

    ``horizon`` is the absolute time at which the limit was read off;
    ``truncation_bound`` is the last stabilization increment.
    """

    s: float
    horizon: float
    points: Optional[np.ndarray]
    values: Optional[np.ndarray]
    jacobians: Optional[np.ndarray]
    jet: Optional[Jet]
    truncation_bound: float
    steps_taken: int


def _checkpoints(s: float, cap: float) -> list[float]:
    out, k = [], 0
    while 2.0**k < cap:
        out.append(s + 2.0**k)
        k += 1
    out.append(s + cap)
    return out


def scaled_limit(
    G: HerglotzField,
    s: float = 0.0,
    points=None,
    degree: Optional[int] = None,
    tol: float = 1e-10,
    atol: float = DEFAULT_ATOL,
    rtol: float = DEFAULT_RTOL,
    cap: float = HORIZON_CAP,
    horizon: Optional[float] = None,
) -> ScaledLimit:
    """Infinite-horizon limit e^t phi_{s,t} -> f_s at points and/or as a jet.

    Integrates through the doubling checkpoints s+1, s+2, s+4, ... and stops
    once two consecutive checkpoints differ by at most ``tol`` (values,
    Jacobians and jet coefficients alike) past the last breakpoint. Every
    checkpoint also checks the growth bound |phi_{s,t}(z)| <= e^-(t-s)|z|/(1-|z|)^2.
    The horizon is capped at s + cap. Passing ``horizon`` skips the
    stabilization test and reads the limit off at that absolute time.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    if s < 0:
        raise DomainError("s must be >= 0")
    if points is None and degree is None:
        raise DomainError("need sample points, a jet degree, or both")
    n = G.dimension
    pstate = jstate = None
    y = Psi = None
    Z = None
    stats = _dopri.StepStats()
    if points is not None:
        Z, _ = as_points(points, n)
        if np.any(np.linalg.norm(Z, axis=1) >= 1.0):
            raise DomainError("all points must lie in the open unit ball")
        pstate = _PointState(Z, s)
        y = pstate.initial()
        radius = np.linalg.norm(Z, axis=1)
    if degree is not None:
        jstate = _JetState(n, int(degree), s)
        Psi = jstate.initial()

    scale = math.exp(s)
    marks = [horizon] if horizon is not None else _checkpoints(s, cap)
    if horizon is not None and horizon < s:
        raise DomainError("horizon must be >= s")
    tau = s
    increment = math.inf
    reached = None
    for mark in marks:
        prev_y, prev_Psi = y, Psi
        if pstate is not None:
            y = _run_segments(G, pstate, y, tau, mark, atol, rtol, stats, MAX_STEPS)
            psi, _ = pstate.unpack(y)
            bound = _decay_bound(radius, mark - s)
            if np.any(np.linalg.norm(psi, axis=1) * math.exp(-(mark - s)) > bound * (1 + CHECK_SLACK)):
                raise IntegrationError("growth bound violated while approaching the limit")
        if jstate is not None:
            for a, b, piece in G.segments(tau, mark):
                Psi = _dopri.integrate(jstate.rhs(piece), a, b, Psi, atol, rtol, stats, MAX_STEPS)
        tau = mark
        if horizon is not None:
            reached = mark
            increment = 0.0
            break
        if prev_y is None and prev_Psi is None:
            continue
        diffs = []
        if pstate is not None:
            diffs.append(np.max(np.abs(y - prev_y)))
        if jstate is not None:
            diffs.append(np.max(np.abs(Psi - prev_Psi)))
        increment = float(max(diffs)) * scale
        if increment <= tol and _prev_mark_ok(marks, mark, G.last_breakpoint):
            reached = mark
            break
    if reached is None:
        raise HorizonError(
            f"limit did not stabilize before t = s + {cap} (last increment {increment:.3g} > tol {tol:.3g})"
        )
    values = jac = None
    if pstate is not None:
        psi, K = pstate.unpack(y)
        values, jac = psi * scale, K * scale
    jet = Jet(n, int(degree), Psi * scale) if jstate is not None else None
    return ScaledLimit(
        s=float(s),
        horizon=float(reached),
        points=Z,
        values=values,
        jacobians=jac,
        jet=jet,
        truncation_bound=float(increment),
        steps_taken=stats.accepted,
    )


def _prev_mark_ok(marks: Sequence[float], mark: float, last_bp: float) -> bool:
    i = marks.index(mark)
    return i > 0 and marks[i - 1] >= last_bp


# ------------------------------------------------------------------ Koebe oracle


def koebe_oracle(zeta: complex, s: float, t: float, z) -> complex | np.ndarray:
    """phi_{s,t}(z) for the constant field -z (zeta + z)/(zeta - z) in dimension one.

    Uses the transfer relation k(phi_{s,t}(z)) = e^-(t-s) k(z) for the Koebe
    function k(z) = z/(1 + conj(zeta) z)^2, which is a quadratic in phi; the
    root inside the disc is the one of smaller modulus (the product of the
    two roots is unimodular).
    """
    if not 0 <= s <= t:
        raise DomainError(f"need 0 <= s <= t, got s={s}, t={t}")
    zeta = complex(zeta)
    if abs(abs(zeta) - 1.0) > 1e-12:
        raise DomainError("zeta must be unimodular")
    zarr = np.asarray(z, dtype=complex)
    if np.any(np.abs(zarr) >= 1.0):
        raise DomainError("z must lie in the unit disc")
    if t == s:
        return zarr.copy() if zarr.ndim else complex(zarr)
    zb = np.conj(zeta)
    c = math.exp(-(t - s)) * zarr / (1.0 + zb * zarr) ** 2
    a = c * zb**2
    b = 2.0 * c * zb - 1.0
    disc = np.sqrt(b * b - 4.0 * a * c)
    # pick the sign that avoids cancellation in q
    sign = np.where(np.real(np.conj(b) * disc) >= 0, 1.0, -1.0)
    q = -0.5 * (b + sign * disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        root = np.where(c == 0, 0.0, c / q)
    if np.any(np.abs(root) >= 1.0):
        raise IntegrationError("no transfer-equation root inside the disc")
    return root if zarr.ndim else complex(root)
