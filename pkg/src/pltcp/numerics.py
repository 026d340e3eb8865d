"""Dense complex linear-algebra kernels shared by the rest of the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Qubit 0 is the
most significant bit of a basis index, so for ``kron(a, b)`` the factor ``a``
acts on the leading qubits.
"""

from __future__ import annotations

import os
from typing import Sequence

import numpy as np
import scipy.sparse.linalg as spla

__all__ = [
    "DimensionLimitError",
    "max_qubits",
    "as_matrix",
    "as_tensor",
    "kron",
    "kron_all",
    "spectral_norm",
    "operator_norm",
    "psd_sqrt",
    "complete_unitary",
    "haar_state",
    "haar_states",
    "is_unitary",
    "unitarity_residual",
    "matrix_to_json",
    "matrix_from_json",
    "tensor_to_json",
    "tensor_from_json",
]

DEFAULT_MAX_QUBITS = 14
SVD_DIM_LIMIT = 256
POWER_TOL = 1e-13
POWER_MAX_ITERS = 20_000


class DimensionLimitError(ValueError):
    """A dense object would exceed the configured size limit."""


def max_qubits(default: int = DEFAULT_MAX_QUBITS) -> int:
    """Dense-evaluation guard, overridable with ``PLTCP_MAX_QUBITS``."""
    value = os.environ.get("PLTCP_MAX_QUBITS")
    if value is None:
        return default
    return int(value)


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def as_tensor(t, name: str = "tensor") -> np.ndarray:
    arr = np.asarray(t, dtype=np.complex128)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def _check_dim(rows: int, cols: int) -> None:
    limit = 2 ** max_qubits()
    if rows > limit or cols > limit:
        raise DimensionLimitError(
            f"dense matrix of shape ({rows}, {cols}) exceeds the {limit} limit "
            "(set PLTCP_MAX_QUBITS to raise it)"
        )


def kron(a, b) -> np.ndarray:
    """Kronecker product with the dense-size guard applied to the result."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    _check_dim(a.shape[0] * b.shape[0], a.shape[1] * b.shape[1])
    return np.kron(a, b)


def kron_all(mats: Sequence) -> np.ndarray:
    if len(mats) == 0:
        raise ValueError("kron_all needs at least one factor")
    out = as_matrix(mats[0])
    for m in mats[1:]:
        out = kron(out, m)
    return out


def spectral_norm(a) -> float:
    """Largest singular value.

    Full SVD up to dimension 256; power iteration on ``A^H A`` above that,
    stopped once the Rayleigh quotient changes by less than 1e-13 relative.
    """
    a = as_matrix(a)
    if a.size == 0:
        return 0.0
    if max(a.shape) <= SVD_DIM_LIMIT:
        return float(np.linalg.svd(a, compute_uv=False)[0])
    return _power_norm(a)


def _power_norm(a: np.ndarray, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    n = a.shape[1]
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    prev = 0.0
    for _ in range(POWER_MAX_ITERS):
        w = a.conj().T @ (a @ v)
        lam = float(np.vdot(v, w).real)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(lam - prev) <= POWER_TOL * abs(lam):
            return float(np.sqrt(lam))
        prev = lam
    # slow convergence means clustered top singular values; finish exactly
    return float(np.linalg.svd(a, compute_uv=False)[0])


def operator_norm(matvec, rmatvec, dim: int, dtype=np.complex128) -> float:
    """Largest singular value of an implicit square operator (Lanczos).

    ``matvec``/``rmatvec`` map ``(dim,)`` or ``(dim, k)`` arrays through the
    operator and its adjoint. Small operators are densified instead.
    """
    if dim <= SVD_DIM_LIMIT:
        dense = matvec(np.eye(dim, dtype=dtype))
        return spectral_norm(dense)
    gram = spla.LinearOperator((dim, dim), matvec=lambda x: rmatvec(matvec(x)), dtype=dtype)
    rng = np.random.default_rng(0)
    v0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    lam = spla.eigsh(gram, k=1, which="LA", v0=v0, tol=1e-14, return_eigenvectors=False)
    return float(np.sqrt(max(lam[0].real, 0.0)))


def psd_sqrt(h, tol: float = 1e-10) -> np.ndarray:
    """Hermitian square root of a positive semidefinite matrix.

    Eigenvalues in ``[-tol, 0)`` are treated as roundoff and clamped to zero.
    """
    h = as_matrix(h, "h")
    if h.shape[0] != h.shape[1]:
        raise ValueError(f"psd_sqrt needs a square matrix, got {h.shape}")
    herm = 0.5 * (h + h.conj().T)
    if np.max(np.abs(h - herm), initial=0.0) > tol:
        raise ValueError("psd_sqrt input is not Hermitian")
    w, v = np.linalg.eigh(herm)
    if w.size and w[0] < -tol:
        raise ValueError(f"psd_sqrt input is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def complete_unitary(v, tol: float = 1e-12) -> np.ndarray:
    """Unitary whose first column is ``v``.

    Uses a Householder reflector composed with a phase on the first basis
    vector, so ``e0`` completes to the identity.
    """
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"complete_unitary needs a unit vector, got norm {nrm!r}")
    n = v.size
    phase = v[0] / abs(v[0]) if abs(v[0]) > 0 else 1.0 + 0j
    w = -v.copy()
    w[0] += phase
    u = np.eye(n, dtype=np.complex128)
    ww = np.vdot(w, w).real
    if ww > 1e-30:
        u -= (2.0 / ww) * np.outer(w, w.conj())
    u[:, 0] *= phase
    return u


def haar_state(dim: int, seed: int) -> np.ndarray:
    """Haar-random pure state from a normalized complex Gaussian vector."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return haar_states(dim, 1, seed)[:, 0]


def haar_states(dim: int, count: int, seed) -> np.ndarray:
    """``count`` independent Haar states as the columns of a ``dim x count`` array."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((dim, count)) + 1j * rng.standard_normal((dim, count))
    return z / np.linalg.norm(z, axis=0, keepdims=True)


def unitarity_residual(u) -> float:
    u = as_matrix(u)
    return spectral_norm(u.conj().T @ u - np.eye(u.shape[1]))


def is_unitary(u, tol: float = 1e-10) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    # cheap Frobenius screen before the spectral check
    r = u.conj().T @ u - np.eye(u.shape[0])
    if np.linalg.norm(r) <= tol:
        return True
    return spectral_norm(r) <= tol


def matrix_to_json(a) -> dict:
    a = as_matrix(a)
    flat = a.reshape(-1)
    return {"dims": list(a.shape), "entries": [[float(z.real), float(z.imag)] for z in flat]}


def _entries(obj: dict, what: str) -> tuple[list[int], np.ndarray]:
    if not isinstance(obj, dict) or "dims" not in obj or "entries" not in obj:
        raise ValueError(f"{what} JSON must be an object with 'dims' and 'entries'")
    dims = [int(d) for d in obj["dims"]]
    raw = obj["entries"]
    expected = int(np.prod(dims)) if dims else 1
    if len(raw) != expected:
        raise ValueError(f"{what} JSON has {len(raw)} entries, dims {dims} need {expected}")
    vals = np.empty(expected, dtype=np.complex128)
    for k, pair in enumerate(raw):
        if isinstance(pair, (int, float)):
            vals[k] = pair
        elif len(pair) == 2:
            vals[k] = complex(pair[0], pair[1])
        else:
            raise ValueError(f"{what} JSON entry {k} must be [re, im]")
    return dims, vals


def matrix_from_json(obj: dict) -> np.ndarray:
    dims, vals = _entries(obj, "matrix")
    if len(dims) != 2:
        raise ValueError(f"matrix JSON needs 2 dims, got {dims}")
    return as_matrix(vals.reshape(dims))


def tensor_to_json(t) -> dict:
    t = as_tensor(t)
    return {"dims": list(t.shape), "entries": [[float(z.real), float(z.imag)] for z in t.reshape(-1)]}


def tensor_from_json(obj: dict) -> np.ndarray:
    dims, vals = _entries(obj, "tensor")
    return as_tensor(vals.reshape(dims))
