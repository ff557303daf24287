"""Scalar nonlinearities and small dense reductions shared across the package.

Everything is float64. Exported operations keep values finite for finite
inputs; ``softmax`` applies max-shift normalization so it is invariant to
adding a constant to every entry.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


def sigmoid(z):
    """Logistic function 1 / (1 + exp(-z)), overflow-safe for any finite z."""
    return expit(np.asarray(z, dtype=np.float64))


def softplus(z):
    """log(1 + exp(z)) without overflow; strictly positive for finite z."""
    z = np.asarray(z, dtype=np.float64)
    return np.logaddexp(0.0, z)


def softplus_inv(y):
    """Inverse of softplus for y > 0: log(exp(y) - 1)."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0):
        raise ValueError("softplus_inv requires positive input")
    return y + np.log(-np.expm1(-y))


def relu(z):
    z = np.asarray(z, dtype=np.float64)
    return np.maximum(z, 0.0)


def relu_grad(z):
    """Indicator of z > 0; a node sitting exactly at zero counts as inactive."""
    z = np.asarray(z, dtype=np.float64)
    return (z > 0.0).astype(np.float64)


def softmax(v, axis=-1):
    """Max-shifted softmax along ``axis``; rejects empty input."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("softmax of an empty vector is undefined")
    shifted = v - np.max(v, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def log_gauss_pdf(x, mean, std):
    """Elementwise log density of N(mean, std^2), std > 0."""
    x = np.asarray(x, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    return -0.5 * np.log(2.0 * np.pi) - np.log(std) - (x - mean) ** 2 / (2.0 * std**2)


def dot(a, b) -> float:
    """Inner product of two equal-length vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("dot requires two vectors of equal length")
    return float(a @ b)


def matvec(m, v) -> np.ndarray:
    """Matrix-vector product for a 2-d matrix and matching vector."""
    m = np.asarray(m, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise ValueError("matvec requires (r, c) matrix and length-c vector")
    return m @ v


def check_finite(name: str, *arrays) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"non-finite values in {name}")
