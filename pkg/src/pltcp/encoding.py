"""Block-encodings: construction by dilation, leading blocks and statistics.

A unitary ``U`` on ``a + s`` qubits is an ``(alpha, a, eps)``-block-encoding
of ``A`` when its top-left ``2**s x 2**s`` block ``A~`` (ancillas in ``|0>``,
ancilla qubits first) satisfies ``||A - alpha * A~||_2 <= eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

from .circuit import Circuit, apply_to_state, circuit_from_json, circuit_to_json, evaluate
from .numerics import as_matrix, is_unitary, matrix_from_json, matrix_to_json, spectral_norm

__all__ = [
    "BlockEncoding",
    "ApplyResult",
    "dilate",
    "leading_block",
    "encoding_error",
    "pad_ancillas",
    "apply",
    "encoding_to_json",
    "encoding_from_json",
]

UNITARY_TOL = 1e-10
# columns of the leading block are propagated in chunks of at most this many amplitudes
_CHUNK_AMPLITUDES = 1 << 22


@dataclass(frozen=True)
class BlockEncoding:
    unitary: Union[np.ndarray, Circuit]
    alpha: float
    a: int
    s: int
    eps: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.eps < 0:
            raise ValueError(f"eps must be non-negative, got {self.eps}")
        if self.a < 0 or self.s < 0:
            raise ValueError("qubit counts must be non-negative")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "eps", float(self.eps))
        n = self.a + self.s
        if isinstance(self.unitary, Circuit):
            if self.unitary.width != n:
                raise ValueError(f"circuit width {self.unitary.width} != a + s = {n}")
            return
        u = as_matrix(self.unitary, "unitary")
        if u.shape != (2**n, 2**n):
            raise ValueError(f"unitary shape {u.shape} does not match a + s = {n} qubits")
        if not is_unitary(u, UNITARY_TOL):
            raise ValueError("block-encoding matrix is not unitary within 1e-10")
        object.__setattr__(self, "unitary", u)

    @property
    def n(self) -> int:
        return self.a + self.s

    @property
    def is_dense(self) -> bool:
        return not isinstance(self.unitary, Circuit)

    def matrix(self) -> np.ndarray:
        return self.unitary if self.is_dense else evaluate(self.unitary)

    def as_circuit(self) -> Circuit:
        from .circuit import unitary_gate

        if not self.is_dense:
            return self.unitary
        if self.n == 0:
            return Circuit(0, ())
        return Circuit(self.n, (unitary_gate(range(self.n), self.unitary),))


class ApplyResult(NamedTuple):
    success_probability: float
    post_state: Optional[np.ndarray]
    expected_repetitions: float


def dilate(a_mat, alpha: Optional[float] = None) -> BlockEncoding:
    """Embed a square matrix in a one-ancilla unitary.

    Unitary input without an explicit ``alpha`` is returned as its own
    ``(1, 0, 0)``-encoding. Otherwise ``B = A / alpha`` is placed in

        [[B, sqrt(I - B B^H)], [sqrt(I - B^H B), -B^H]]

    with both square roots taken through the SVD of ``B`` so the result is
    unitary to working precision even when ``||B|| = 1``.
    """
    a_mat = as_matrix(a_mat, "a_mat")
    dim = a_mat.shape[0]
    if a_mat.shape[0] != a_mat.shape[1] or dim < 1 or dim & (dim - 1):
        raise ValueError(f"dilate needs a square power-of-two matrix, got {a_mat.shape}")
    s = dim.bit_length() - 1
    if alpha is None and is_unitary(a_mat, UNITARY_TOL):
        return BlockEncoding(a_mat, 1.0, 0, s, 0.0)

    w, sigma, vh = np.linalg.svd(a_mat)
    norm = float(sigma[0])
    if alpha is None:
        if norm == 0.0:
            raise ValueError("cannot pick a subnormalization for the zero matrix; pass alpha")
        alpha = norm
    alpha = float(alpha)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if norm > alpha * (1 + 1e-12):
        raise ValueError(f"alpha={alpha!r} is below the spectral norm {norm!r}; dilation impossible")
    sig = np.clip(sigma / alpha, 0.0, 1.0)
    comp = np.sqrt(np.clip(1.0 - sig**2, 0.0, None))
    v = vh.conj().T
    b = a_mat / alpha
    top_right = (w * comp) @ w.conj().T
    bottom_left = (v * comp) @ v.conj().T
    u = np.block([[b, top_right], [bottom_left, -b.conj().T]])
    return BlockEncoding(u, alpha, 1, s, 0.0)


def _zero_ancilla_columns(be: BlockEncoding, start: int, stop: int) -> np.ndarray:
    cols = np.zeros((2**be.n, stop - start), dtype=np.complex128)
    cols[np.arange(start, stop), np.arange(stop - start)] = 1.0
    return cols


def leading_block(be: BlockEncoding) -> np.ndarray:
    """Top-left ``2**s`` block of the unitary.

    Circuit-backed encodings are propagated column by column (in chunks)
    from ``|0...0>_anc |j>``, so the full unitary is never formed.
    """
    d = 2**be.s
    if be.is_dense:
        return be.unitary[:d, :d].copy()
    out = np.empty((d, d), dtype=np.complex128)
    step = max(1, _CHUNK_AMPLITUDES >> be.n)
    for start in range(0, d, step):
        stop = min(d, start + step)
        res = apply_to_state(be.unitary, _zero_ancilla_columns(be, start, stop))
        out[:, start:stop] = res[:d]
    return out


def encoding_error(be: BlockEncoding, target) -> float:
    target = as_matrix(target, "target")
    d = 2**be.s
    if target.shape != (d, d):
        raise ValueError(f"target shape {target.shape} does not match {be.s} signal qubits")
    return spectral_norm(target - be.alpha * leading_block(be))


def pad_ancillas(be: BlockEncoding, a_new: int) -> BlockEncoding:
    """Add ancillas at the top of the register; the leading block is unchanged."""
    if a_new < be.a:
        raise ValueError(f"cannot shrink ancillas from {be.a} to {a_new}")
    extra = a_new - be.a
    if extra == 0:
        return be
    if be.is_dense:
        u = np.kron(np.eye(2**extra), be.unitary)
        return BlockEncoding(u, be.alpha, a_new, be.s, be.eps)
    return BlockEncoding(be.unitary.shifted(extra), be.alpha, a_new, be.s, be.eps)


def apply(be: BlockEncoding, psi) -> ApplyResult:
    """Post-selection statistics of running ``be`` on ``|0>_anc |psi>``.

    ``expected_repetitions`` is the amplitude-amplification count
    ``1 / ||A~ psi||``.
    """
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    if psi.size != 2**be.s:
        raise ValueError(f"state has dimension {psi.size}, expected {2**be.s}")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise ValueError("input state is not normalized")
    out = leading_block(be) @ psi
    amp = float(np.linalg.norm(out))
    prob = min(max(amp * amp, 0.0), 1.0)
    if prob > 1e-14:
        return ApplyResult(prob, out / amp, 1.0 / amp)
    return ApplyResult(prob, None, math.inf)


def encoding_to_json(be: BlockEncoding) -> dict:
    body = matrix_to_json(be.unitary) if be.is_dense else circuit_to_json(be.unitary)
    return {"alpha": be.alpha, "a": be.a, "s": be.s, "eps": be.eps, "unitary": body}


def encoding_from_json(obj: dict) -> BlockEncoding:
    try:
        body = obj["unitary"]
        unitary = circuit_from_json(body) if "gates" in body else matrix_from_json(body)
        return BlockEncoding(unitary, float(obj["alpha"]), int(obj["a"]), int(obj["s"]),
                             float(obj.get("eps", 0.0)))
    except KeyError as exc:
        raise ValueError(f"block-encoding JSON is missing field {exc}") from exc
