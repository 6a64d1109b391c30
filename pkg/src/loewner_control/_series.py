"""Dense truncated power series in n complex variables.

A scalar series of total degree <= d in n variables is stored as a complex
array of shape ``(d+1,)*n`` whose entry at ``alpha`` is the coefficient of
``z**alpha``. Entries with ``|alpha| > d`` are kept at zero. Vector-valued
series carry a leading component axis, matrix-valued ones two.
"""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
from scipy import signal


@lru_cache(maxsize=None)
def degree_grid(n: int, d: int) -> np.ndarray:
    """Total degree of every slot in a ``(d+1,)*n`` coefficient array."""
    grids = np.indices((d + 1,) * n)
    out = grids.sum(axis=0)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def multi_indices(n: int, d: int, start: int = 1) -> tuple[tuple[int, ...], ...]:
    """All multi-indices with ``start <= |alpha| <= d``, graded then lexicographic."""
    out = []
    for total in range(start, d + 1):
        for alpha in itertools.product(range(total + 1), repeat=n):
            if sum(alpha) == total:
                out.append(alpha)
    out.sort(key=lambda a: (sum(a), tuple(-x for x in a)))
    return tuple(out)


def zeros(shape_prefix: tuple[int, ...], n: int, d: int) -> np.ndarray:
    return np.zeros(tuple(shape_prefix) + (d + 1,) * n, dtype=complex)


def truncate(a: np.ndarray, n: int, d: int) -> np.ndarray:
    mask = degree_grid(n, d) > d
    a = np.array(a, dtype=complex, copy=True)
    a[..., mask] = 0.0
    return a


def resize(a: np.ndarray, n: int, d_old: int, d_new: int) -> np.ndarray:
    """Re-embed a series of degree d_old as one of degree d_new (truncating or padding)."""
    prefix = a.shape[: a.ndim - n]
    out = zeros(prefix, n, d_new)
    m = min(d_old, d_new) + 1
    sl = (Ellipsis,) + (slice(0, m),) * n
    out[sl] = a[sl]
    return truncate(out, n, d_new)


def variable(n: int, d: int, i: int) -> np.ndarray:
    """The coordinate function z_i."""
    a = zeros((), n, d)
    idx = [0] * n
    idx[i] = 1
    a[tuple(idx)] = 1.0
    return a


def constant(n: int, d: int, c: complex = 1.0) -> np.ndarray:
    a = zeros((), n, d)
    a[(0,) * n] = c
    return a


def mul(a: np.ndarray, b: np.ndarray, n: int, d: int) -> np.ndarray:
    """Product of two scalar series, truncated at total degree d."""
    if n == 1:
        return np.convolve(a, b)[: d + 1]
    full = signal.convolve(a, b, mode="full", method="direct")
    out = full[(slice(0, d + 1),) * n]
    out = np.array(out, dtype=complex)
    out[degree_grid(n, d) > d] = 0.0
    return out


def compose(outer: np.ndarray, inner: np.ndarray, n: int, d: int) -> np.ndarray:
    """Substitute the vector series ``inner`` (no constant term) into ``outer``.

    ``outer`` has shape ``(m,) + (d+1,)*n`` and may carry constant terms.
    Truncation at degree d is exact because every monomial of ``inner`` has
    degree >= 1.
    """
    m = outer.shape[0]
    out = zeros((m,), n, d)
    deg = degree_grid(n, d)
    flat_outer = outer.reshape(m, -1)
    active = np.flatnonzero(np.any(flat_outer != 0, axis=0))
    if active.size == 0:
        return out
    one = constant(n, d)
    cache: dict[tuple[int, ...], np.ndarray] = {(0,) * n: one}

    def monomial(alpha: tuple[int, ...]) -> np.ndarray:
        got = cache.get(alpha)
        if got is not None:
            return got
        j = max(i for i in range(n) if alpha[i] > 0)
        prev = list(alpha)
        prev[j] -= 1
        val = mul(monomial(tuple(prev)), inner[j], n, d)
        cache[alpha] = val
        return val

    shape = (d + 1,) * n
    for flat in sorted(active, key=lambda f: deg.flat[f]):
        alpha = np.unravel_index(flat, shape)
        alpha = tuple(int(x) for x in alpha)
        if sum(alpha) > d:
            continue
        mono = monomial(alpha)
        coeffs = flat_outer[:, flat]
        for k in range(m):
            if coeffs[k] != 0:
                out[k] += coeffs[k] * mono
    return out


def deriv(a: np.ndarray, n: int, d: int, i: int) -> np.ndarray:
    """Partial derivative with respect to z_i; the result is exact through degree d-1."""
    out = np.zeros_like(a)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    ax = a.ndim - n + i
    src[ax] = slice(1, d + 1)
    dst[ax] = slice(0, d)
    shape = [1] * a.ndim
    shape[ax] = d
    factors = np.arange(1, d + 1).reshape(shape)
    out[tuple(dst)] = a[tuple(src)] * factors
    return out


def jacobian(vec: np.ndarray, n: int, d: int) -> np.ndarray:
    """Matrix series of partial derivatives; entry (k, i) is d vec_k / d z_i."""
    m = vec.shape[0]
    out = zeros((m, n), n, d)
    for i in range(n):
        out[:, i] = deriv(vec, n, d, i)
    return out


def matmul(A: np.ndarray, B: np.ndarray, n: int, d: int) -> np.ndarray:
    p, q = A.shape[0], A.shape[1]
    r = B.shape[1]
    out = zeros((p, r), n, d)
    for i in range(p):
        for j in range(r):
            acc = out[i, j]
            for k in range(q):
                if np.any(A[i, k]) and np.any(B[k, j]):
                    acc += mul(A[i, k], B[k, j], n, d)
    return out


def matvec(A: np.ndarray, v: np.ndarray, n: int, d: int) -> np.ndarray:
    return matmul(A, v[:, None], n, d)[:, 0]


def inverse_near_identity(A: np.ndarray, n: int, d: int) -> np.ndarray:
    """Inverse of a matrix series whose constant term is the identity."""
    size = A.shape[0]
    eye = zeros((size, size), n, d)
    for i in range(size):
        eye[i, i] = constant(n, d)
    N = A - eye
    if np.any(N[(Ellipsis,) + (0,) * n]):
        raise ValueError("constant term of the matrix series is not the identity")
    out = eye.copy()
    power = eye
    for _ in range(d):
        power = -matmul(power, N, n, d)
        if not np.any(power):
            break
        out = out + power
    return out


def evaluate(a: np.ndarray, Z: np.ndarray, n: int, d: int) -> np.ndarray:
    """Evaluate series at points Z of shape (P, n); returns shape prefix + (P,)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    prefix = a.shape[: a.ndim - n]
    flat = a.reshape(prefix + (-1,))
    alphas = np.array(list(np.ndindex(*((d + 1,) * n))))
    keep = alphas.sum(axis=1) <= d
    monos = np.prod(Z[:, None, :] ** alphas[None, keep, :], axis=2)
    return flat[..., keep] @ monos.T


def scale_by_degree(a: np.ndarray, n: int, d: int, factor_of_degree) -> np.ndarray:
    """Multiply each homogeneous part of degree k by ``factor_of_degree(k)``."""
    deg = degree_grid(n, d)
    factors = np.array([factor_of_degree(k) for k in range(d + 1)], dtype=float)
    return a * factors[np.minimum(deg, d)]
