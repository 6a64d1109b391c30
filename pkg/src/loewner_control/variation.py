"""Needle variations of Herglotz fields and their first-order terms.

A needle with data (T, h, eps) replaces the field by h on the window
(T - eps, T). The first-order change of the flow at times t >= T is

    alpha = d(phi_{s,t})_z [d(phi_{s,T})_z]^{-1} [h(w) - G(w, T)],  w = phi_{s,T}(z),

and the rescaled variants multiply by e^t (finite t) or replace
d(e^t phi_{s,t}) by d(f_s) (t = infinity).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _series as ser
from .errors import DomainError, SingularJacobianError
from .holomap import Jet, MapDescriptor, as_points, check_class_membership, jet_from_closed_form
from .loewner import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    HerglotzField,
    integrate_flow,
    scaled_flow_jet,
    scaled_limit,
    scaled_point_flow,
)

COND_LIMIT = 1e12
DECAY_THRESHOLD = 0.75
# verification runs need the difference quotient well above integrator noise
VERIFY_TOL = 1e-12
DEFAULT_LADDER = (1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4)


@dataclass(frozen=True)
class NeedleSpec:
    T: float
    h: MapDescriptor
    eps: float

    def __post_init__(self):
        if not (self.eps > 0 and self.eps < self.T):
            raise DomainError(f"needle width must satisfy 0 < eps < T, got eps={self.eps}, T={self.T}")
        rep = check_class_membership(self.h)
        if not rep.passed:
            raise DomainError(f"needle map is not in M_n (margin {rep.worst_margin:.3g})")


def _check_needle_time(G: HerglotzField, T: float, eps: float = 0.0) -> None:
    if not G.is_regular(T):
        raise DomainError(f"needle time T={T} is a breakpoint of the field")
    for b in G.breakpoints[1:]:
        if T - eps < b < T:
            raise DomainError(f"needle window ({T - eps}, {T}) contains breakpoint {b}")


def needle_field(G: HerglotzField, spec: NeedleSpec) -> HerglotzField:
    """G with h inserted on (T - eps, T); unchanged if h is already active there."""
    _check_needle_time(G, spec.T, spec.eps)
    if spec.h.dimension != G.dimension:
        raise DomainError("needle map has the wrong dimension")
    active = G.piece_at(spec.T)
    if spec.h == active:
        return G
    start = spec.T - spec.eps
    bps, pieces = [], []
    for b, p in zip(G.breakpoints, G.pieces):
        if b < start:
            bps.append(b)
            pieces.append(p)
    # start may coincide with an existing breakpoint; it is then replaced
    bps += [start, spec.T]
    pieces += [spec.h, active]
    for b, p in zip(G.breakpoints, G.pieces):
        if b > spec.T:
            bps.append(b)
            pieces.append(p)
    return HerglotzField(tuple(bps), tuple(pieces), validate=False)


def _solve(J: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Batch solve J x = v with a conditioning guard."""
    cond = np.linalg.cond(J)
    if np.any(~np.isfinite(cond)) or np.any(cond > COND_LIMIT):
        raise SingularJacobianError(f"Jacobian condition number {np.max(cond):.3g} exceeds {COND_LIMIT:.0e}")
    return np.linalg.solve(J, v[..., None])[..., 0]


def _jump(G: HerglotzField, h: MapDescriptor, T: float, W: np.ndarray) -> np.ndarray:
    """h(w) - G(w, T), evaluated through the remainders to avoid cancellation."""
    return h._remainder(W) - G.piece_at(T)._remainder(W)


def first_order_term(
    G: HerglotzField, h: MapDescriptor, s: float, T: float, t: float, points,
    atol: float = DEFAULT_ATOL, rtol: float = DEFAULT_RTOL,
) -> np.ndarray:
    """alpha = d(phi_{s,t}) [d(phi_{s,T})]^{-1} [h(phi_{s,T}) - G(phi_{s,T}, T)] per point."""
    if not (0 <= s <= T <= t):
        raise DomainError(f"need s <= T <= t, got {(s, T, t)}")
    _check_needle_time(G, T)
    Z, single = as_points(points, G.dimension)
    at_T = integrate_flow(G, s, T, Z, atol, rtol)
    at_t = integrate_flow(G, s, t, Z, atol, rtol)
    x = _solve(at_T.jacobians, _jump(G, h, T, at_T.values))
    out = np.einsum("pij,pj->pi", at_t.jacobians, x)
    return out[0] if single else out


def scaled_first_order_term(
    G: HerglotzField, h: MapDescriptor, s: float, T: float, t: float, points=None, degree: Optional[int] = None,
    atol: float = DEFAULT_ATOL, rtol: float = DEFAULT_RTOL, horizon: Optional[float] = None,
):
    """Variation direction of e^t phi_{s,t}; ``t = math.inf`` gives the direction of f_s.

    With ``points`` returns per-point vectors; with ``degree`` returns the
    Taylor jet of the direction at the origin. ``horizon`` fixes the time
    at which the t = infinity limit is read off.
    """
    if not (0 <= s <= T <= t):
        raise DomainError(f"need s <= T <= t, got {(s, T, t)}")
    _check_needle_time(G, T)
    if (points is None) == (degree is None):
        raise DomainError("give exactly one of points or degree")
    if degree is not None:
        return _scaled_term_jet(G, h, s, T, t, int(degree), atol, rtol, horizon)
    Z, single = as_points(points, G.dimension)
    psi_T, K_T = scaled_point_flow(G, s, T, Z, atol, rtol)
    W = psi_T * math.exp(-(T - s))
    # d(e^T phi_{s,T}) = e^s K_T, so [d(e^T phi_{s,T})]^{-1} e^T v = K_T^{-1} e^{T-s} v
    x = _solve(K_T, _jump(G, h, T, W)) * math.exp(T - s)
    if math.isinf(t):
        lim = scaled_limit(G, s, points=Z, atol=atol, rtol=rtol, horizon=horizon)
        D = lim.jacobians
    else:
        _, K_t = scaled_point_flow(G, s, t, Z, atol, rtol)
        D = K_t * math.exp(s)
    out = np.einsum("pij,pj->pi", D, x)
    return out[0] if single else out


def _scaled_term_jet(G, h, s, T, t, d, atol, rtol, horizon):
    # By the chain rule the direction equals (d(g) . v) o phi_{s,T} with
    # g = e^t phi_{T,t} (or f_T at infinity) and v = h - G(., T).
    n = G.dimension
    d1 = d + 1
    if math.isinf(t):
        g = scaled_limit(G, T, degree=d1, atol=atol, rtol=rtol, horizon=horizon).jet
    else:
        g = scaled_flow_jet(G, T, t, d1, atol=atol, rtol=rtol) * math.exp(T)
    dg = ser.jacobian(g.coeffs, n, d1)
    dg = ser.resize(dg, n, d1, d)
    v = jet_from_closed_form(h, d).coeffs - jet_from_closed_form(G.piece_at(T), d).coeffs
    inner_field = ser.matvec(dg, v, n, d)
    phi = scaled_flow_jet(G, s, T, d, atol=atol, rtol=rtol).coeffs * math.exp(-(T - s))
    return Jet(n, d, ser.compose(inner_field, phi, n, d))


def chain_variation(
    G: HerglotzField, h: MapDescriptor, T: float, t: float, points,
    atol: float = DEFAULT_ATOL, rtol: float = DEFAULT_RTOL,
) -> np.ndarray:
    """First-order deformation of the parametric representation f_t under the needle (T, h).

    Zero for t >= T; for t < T it is d(f_t)[d(e^T phi_{t,T})]^{-1} e^T [h - G](phi_{t,T}).
    """
    if t < 0:
        raise DomainError("t must be >= 0")
    Z, single = as_points(points, G.dimension)
    if t >= T:
        out = np.zeros_like(Z)
        return out[0] if single else out
    return scaled_first_order_term(G, h, t, T, math.inf, points, atol=atol, rtol=rtol)


def fundamental_solution(
    G: HerglotzField, s: float, T: float, t: float, z,
    atol: float = DEFAULT_ATOL, rtol: float = DEFAULT_RTOL,
) -> np.ndarray:
    """Y = d(e^t phi_{s,t})_z [d(e^T phi_{s,T})_z]^{-1}, equal to I at t = T."""
    if not (0 <= s <= T <= t):
        raise DomainError(f"need s <= T <= t, got {(s, T, t)}")
    Z, single = as_points(z, G.dimension)
    _, K_T = scaled_point_flow(G, s, T, Z, atol, rtol)
    if math.isinf(t):
        K_t = scaled_limit(G, s, points=Z, atol=atol, rtol=rtol).jacobians * math.exp(-s)
    else:
        _, K_t = scaled_point_flow(G, s, t, Z, atol, rtol)
    cond = np.linalg.cond(K_T)
    if np.any(cond > COND_LIMIT):
        raise SingularJacobianError(f"normalization Jacobian has condition {np.max(cond):.3g}")
    # Y K_T = K_t  <=>  K_T^T Y^T = K_t^T
    Y = np.swapaxes(np.linalg.solve(np.swapaxes(K_T, 1, 2), np.swapaxes(K_t, 1, 2)), 1, 2)
    return Y[0] if single else Y


@dataclass(frozen=True)
class ResidualReport:
    ladder: tuple[float, ...]
    residuals: tuple[float, ...]
    decay_ratios: tuple[float, ...]
    threshold: float
    predicted_norm: float
    t: float
    scaled: bool
    horizon: Optional[float]

    @property
    def passed(self) -> bool:
        return all(r <= self.threshold for r in self.decay_ratios)

    @property
    def normalized_terminal_residual(self) -> float:
        if self.predicted_norm == 0:
            return self.residuals[-1]
        return self.residuals[-1] / self.predicted_norm


def verify_variation(
    G: HerglotzField,
    T: float,
    h: MapDescriptor,
    t: float,
    points,
    ladder: Sequence[float] = DEFAULT_LADDER,
    s: float = 0.0,
    scaled: Optional[bool] = None,
    threshold: float = DECAY_THRESHOLD,
    atol: float = VERIFY_TOL,
    rtol: float = VERIFY_TOL,
    threads: int = 1,
) -> ResidualReport:
    """Brute-force needle integration against the predicted first-order term.

    For each eps the needle field is integrated from s to t and the sup-norm
    of (phi^eps - phi)/eps - alpha over the sample points is recorded (or
    the same for e^t phi when ``scaled``). At t = infinity both flows are
    read off at the common horizon chosen by the base limit.
    """
    ladder = tuple(float(e) for e in ladder)
    if not ladder or any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise DomainError("ladder must be nonempty and strictly decreasing")
    if ladder[0] >= T - s or ladder[-1] <= 0:
        raise DomainError("ladder must lie inside (0, T - s)")
    if not T <= t:
        raise DomainError("need T <= t")
    for eps in ladder:
        _check_needle_time(G, T, eps)
    Z, _ = as_points(points, G.dimension)
    infinite = math.isinf(t)
    if scaled is None:
        scaled = infinite
    if infinite and not scaled:
        raise DomainError("t = infinity requires the scaled variant")

    horizon = None
    if infinite:
        base = scaled_limit(G, s, points=Z, atol=atol, rtol=rtol)
        horizon = base.horizon
        base_vals = base.values
        predicted = scaled_first_order_term(G, h, s, T, t, Z, atol=atol, rtol=rtol, horizon=horizon)
    elif scaled:
        psi, _ = scaled_point_flow(G, s, t, Z, atol, rtol)
        base_vals = psi * math.exp(s)
        predicted = scaled_first_order_term(G, h, s, T, t, Z, atol=atol, rtol=rtol)
    else:
        base_vals = integrate_flow(G, s, t, Z, atol, rtol).values
        predicted = first_order_term(G, h, s, T, t, Z, atol, rtol)

    def rung(eps: float) -> float:
        Ge = needle_field(G, NeedleSpec(T, h, eps))
        if infinite:
            vals = scaled_limit(Ge, s, points=Z, atol=atol, rtol=rtol, horizon=horizon).values
        elif scaled:
            psi, _ = scaled_point_flow(Ge, s, t, Z, atol, rtol)
            vals = psi * math.exp(s)
        else:
            vals = integrate_flow(Ge, s, t, Z, atol, rtol).values
        return float(np.max(np.abs((vals - base_vals) / eps - predicted)))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            residuals = tuple(pool.map(rung, ladder))
    else:
        residuals = tuple(rung(e) for e in ladder)
    ratios = tuple(
        (b / a) if a > 0 else (0.0 if b == 0 else math.inf) for a, b in zip(residuals, residuals[1:])
    )
    return ResidualReport(
        ladder=ladder,
        residuals=residuals,
        decay_ratios=ratios,
        threshold=threshold,
        predicted_norm=float(np.max(np.abs(predicted))),
        t=float(t),
        scaled=bool(scaled),
        horizon=horizon,
    )
