"""Extremal quadratic forms of aA + b tr(A) I over symmetric matrices.

For nonzero symmetric A with unit Frobenius norm and unit v,

    max [(aA + b tr(A) I)(v, v)]^2 = (a + b)^2 + (n - 1) b^2,

attained by A proportional to diag(a+b, b, ..., b) and v = e_1.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ParameterError, ShapeError

MAX_SIZE = 8


def as_symmetric(A, tol=1e-12):
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {A.shape}")
    if not 1 <= A.shape[0] <= MAX_SIZE:
        raise ShapeError(f"matrix size must be in 1..{MAX_SIZE}, got {A.shape[0]}")
    if not np.allclose(A, A.T, rtol=0, atol=tol * max(1.0, np.abs(A).max())):
        raise ShapeError("matrix is not symmetric")
    return 0.5 * (A + A.T)


def jacobi_eigh(A, tol=1e-15, max_sweeps=100):
    """Cyclic Jacobi rotations. Returns (eigenvalues ascending, eigenvectors as columns)."""
    a = as_symmetric(A)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.sqrt((a**2).sum())
    if scale == 0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.sqrt((np.triu(a, 1) ** 2).sum())
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1))
                if theta == 0:
                    t = 1.0
                c = 1 / np.sqrt(t * t + 1)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                a[p, q] = a[q, p] = 0.0
                v = v @ rot
    w = np.diag(a).copy()
    order = np.argsort(w)
    return w[order], v[:, order]


def frobenius_sq(A):
    A = as_symmetric(A)
    return float((A**2).sum())


@dataclass(frozen=True)
class Extremes:
    max: float
    min: float


def extremal_quadratic(A, a, b):
    """max/min over unit v of (aA + b tr(A) I)(v, v)."""
    A = as_symmetric(A)
    if not np.any(A):
        raise DegenerateInputError("extremal_quadratic needs a nonzero matrix")
    lam, _ = jacobi_eigh(A)
    shifted = a * lam + b * lam.sum()
    return Extremes(float(shifted.max()), float(shifted.min()))


def supremum_bound(a, b, n):
    if n < 1:
        raise ParameterError(f"size must be >= 1, got {n}")
    return (a + b) ** 2 + (n - 1) * b**2


@dataclass(frozen=True)
class Witness:
    A: np.ndarray
    v: np.ndarray
    value: float


def witness(a, b, n):
    """Diagonal unit-norm A and v = e_1 attaining the supremum."""
    if a == 0 and b == 0:
        raise DegenerateInputError("witness undefined for a = b = 0")
    if n < 1:
        raise ParameterError(f"size must be >= 1, got {n}")
    spectrum = np.full(n, float(b))
    spectrum[0] = a + b
    spectrum /= np.abs(spectrum).max()  # avoids underflow for tiny (a, b)
    spectrum /= np.linalg.norm(spectrum)
    A = np.diag(spectrum)
    v = np.zeros(n)
    v[0] = 1.0
    value = a * (v @ A @ v) + b * np.trace(A)
    return Witness(A, v, float(value))


def bruteforce_sup(a, b, n, samples, seed, chunk=20000):
    """Largest sampled [(aA + b tr(A) I)(v, v) / |A|]^2.

    A is drawn from the Gaussian orthogonal ensemble, v uniformly on the
    unit sphere; the result depends only on the arguments.
    """
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    best = -np.inf
    remaining = int(samples)
    while remaining > 0:
        k = min(chunk, remaining)
        X = rng.standard_normal((k, n, n))
        A = 0.5 * (X + np.swapaxes(X, 1, 2))
        norms = np.sqrt((A**2).sum(axis=(1, 2)))
        vec = rng.standard_normal((k, n))
        vec /= np.linalg.norm(vec, axis=1, keepdims=True)
        quad = np.einsum("si,sij,sj->s", vec, A, vec)
        val = (a * quad + b * np.trace(A, axis1=1, axis2=2)) / norms
        best = max(best, float((val**2).max()))
        remaining -= k
    return best
