"""Example operator families as CP-like specifications with dense references."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .combine import CPLikeSpec, spec_dense
from .cpd import pad_site_matrix
from .numerics import as_matrix, kron_all

__all__ = ["PauliBasis", "Spin1Basis", "PAULI", "SPIN1", "tfim", "xyz", "laplace_like"]


@dataclass(frozen=True)
class PauliBasis:
    i: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray


@dataclass(frozen=True)
class Spin1Basis:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray


def _readonly(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.complex128)
    m.setflags(write=False)
    return m


PAULI = PauliBasis(
    _readonly(np.eye(2)),
    _readonly([[0, 1], [1, 0]]),
    _readonly([[0, -1j], [1j, 0]]),
    _readonly([[1, 0], [0, -1]]),
)

_r = 1.0 / np.sqrt(2.0)
SPIN1 = Spin1Basis(
    _readonly([[0, _r, 0], [_r, 0, _r], [0, _r, 0]]),
    _readonly([[0, -1j * _r, 0], [1j * _r, 0, -1j * _r], [0, 1j * _r, 0]]),
    _readonly(np.diag([1.0, 0.0, -1.0])),
)


def _chain(site_ops: dict, s: int, ident: np.ndarray) -> list[np.ndarray]:
    return [site_ops.get(k, ident) for k in range(s)]


def tfim(s: int, h: float) -> tuple[CPLikeSpec, np.ndarray]:
    """Open transverse-field Ising chain ``-sum Z_i Z_{i+1} - h sum X_i``.

    Terms are ordered ZZ bonds first, then X fields. With ``h = 0`` the
    field terms vanish and are left out.
    """
    if s < 2:
        raise ValueError(f"tfim needs s >= 2, got {s}")
    coeffs, terms = [], []
    for i in range(s - 1):
        coeffs.append(-1.0)
        terms.append(_chain({i: PAULI.z, i + 1: PAULI.z}, s, PAULI.i))
    if h != 0:
        for i in range(s):
            coeffs.append(-float(h))
            terms.append(_chain({i: PAULI.x}, s, PAULI.i))
    spec = CPLikeSpec(np.asarray(coeffs, dtype=np.complex128), terms)
    return spec, spec_dense(spec)


def xyz(s: int) -> tuple[CPLikeSpec, np.ndarray, np.ndarray]:
    """Spin-1 XYZ chain ``sum_i X_i X_{i+1} + Y_i Y_{i+1} + Z_i Z_{i+1}``.

    Returns the spec over zero-padded 4x4 site operators, the ``3**s``
    Hamiltonian and its zero-padded ``4**s`` embedding. Inactive sites carry
    the padded identity ``diag(1, 1, 1, 0)``.
    """
    if s < 2:
        raise ValueError(f"xyz needs s >= 2, got {s}")
    ident3 = np.eye(3, dtype=np.complex128)
    ident4 = pad_site_matrix(ident3, 4)
    padded = [pad_site_matrix(op, 4) for op in (SPIN1.x, SPIN1.y, SPIN1.z)]
    dense3 = np.zeros((3**s, 3**s), dtype=np.complex128)
    coeffs, terms = [], []
    for i in range(s - 1):
        for op3, op4 in zip((SPIN1.x, SPIN1.y, SPIN1.z), padded):
            dense3 += kron_all(_chain({i: op3, i + 1: op3}, s, ident3))
            coeffs.append(1.0)
            terms.append(_chain({i: op4, i + 1: op4}, s, ident4))
    spec = CPLikeSpec(np.asarray(coeffs, dtype=np.complex128), terms)
    return spec, dense3, embed_padded(dense3, s)


def embed_padded(dense3: np.ndarray, s: int) -> np.ndarray:
    """Place a ``3**s`` operator on the non-padded levels of ``4**s``."""
    keep = padded_indices(s)
    out = np.zeros((4**s, 4**s), dtype=np.complex128)
    out[np.ix_(keep, keep)] = dense3
    return out


def padded_indices(s: int) -> np.ndarray:
    """Indices of ``4**s`` basis states with no site on the padded level."""
    digits = np.indices((3,) * s).reshape(s, -1)
    weights = 4 ** np.arange(s - 1, -1, -1)
    return weights @ digits


def laplace_like(m_list: Sequence, l_list: Sequence) -> tuple[CPLikeSpec, np.ndarray]:
    """``sum_j M_1 (x) .. (x) L_j (x) .. (x) M_d`` with unit coefficients.

    Matrix objects are reused as given, so passing the same ``L`` for every
    slot yields a spec whose synthesis dilates it only once.
    """
    if len(m_list) != len(l_list) or not m_list:
        raise ValueError("M and L lists must have the same nonzero length")
    d = len(m_list)
    ms = [m if isinstance(m, np.ndarray) and m.dtype == np.complex128 else as_matrix(m) for m in m_list]
    ls = [l if isinstance(l, np.ndarray) and l.dtype == np.complex128 else as_matrix(l) for l in l_list]
    for k in range(d):
        if ms[k].shape != ls[k].shape:
            raise ValueError(f"slot {k}: M has shape {ms[k].shape} but L has shape {ls[k].shape}")
    terms = [[ls[k] if k == j else ms[k] for k in range(d)] for j in range(d)]
    spec = CPLikeSpec(np.ones(d, dtype=np.complex128), terms)
    return spec, spec_dense(spec)
