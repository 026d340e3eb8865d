"""Combinators on block-encodings.

* Kronecker products: the encodings are stacked and conjugated by a SWAP
  register that moves every signal qubit below all ancillas.
* Linear combinations: a state-preparation pair ``(P, Q)`` around a select
  oracle ``sum_j |j><j| (x) U_j``.

``synthesize_cp`` chains both for operators written as a linear combination
of Kronecker products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .circuit import Circuit, swap_gate, unitary_gate, controlled_gate
from .encoding import BlockEncoding, dilate, pad_ancillas
from .numerics import as_matrix, complete_unitary, is_unitary, kron_all, matrix_from_json, matrix_to_json

__all__ = [
    "SpecError",
    "StatePrepPair",
    "CPLikeSpec",
    "CPPlan",
    "prep_residual",
    "swap_register",
    "register_swaps",
    "kron_encodings",
    "kron_many",
    "state_prep_pair",
    "select_oracle",
    "lcu",
    "plan_cp",
    "synthesize_cp",
    "shared_swap_select",
    "generic_select",
    "spec_dense",
    "spec_to_json",
    "spec_from_json",
    "default_index_qubits",
]


class SpecError(ValueError):
    """A CP-like specification violates its structural invariants."""


def default_index_qubits(m: int) -> int:
    return max(1, math.ceil(math.log2(m))) if m > 1 else 1


# ---------------------------------------------------------------------------
# state preparation


def prep_residual(p_unitary, q_unitary, beta: float, y) -> float:
    """``sum_j |beta * conj(p_j) * q_j - y_j|`` with ``y`` zero-extended."""
    p = np.asarray(p_unitary)[:, 0]
    q = np.asarray(q_unitary)[:, 0]
    y_ext = np.zeros(p.size, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    y_ext[: y.size] = y
    return float(np.sum(np.abs(beta * p.conj() * q - y_ext)))


@dataclass(frozen=True)
class StatePrepPair:
    p_unitary: np.ndarray
    q_unitary: np.ndarray
    beta: float
    b: int
    eps: float
    coefficients: np.ndarray = field(compare=False, repr=False, default=None)

    def __post_init__(self):
        dim = 2**self.b
        for name in ("p_unitary", "q_unitary"):
            u = as_matrix(getattr(self, name), name)
            if u.shape != (dim, dim):
                raise ValueError(f"{name} has shape {u.shape}, expected ({dim}, {dim})")
            if not is_unitary(u, 1e-10):
                raise ValueError(f"{name} is not unitary within 1e-10")
            object.__setattr__(self, name, u)
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def p(self) -> np.ndarray:
        return self.p_unitary[:, 0]

    @property
    def q(self) -> np.ndarray:
        return self.q_unitary[:, 0]

    @property
    def weights(self) -> np.ndarray:
        """``conj(p_j) * q_j`` for every index state, padding included."""
        return self.p.conj() * self.q


def state_prep_pair(y, b: Optional[int] = None) -> StatePrepPair:
    """Pair with ``beta = ||y||_1``; all phases are carried by ``P``."""
    y = np.asarray(y, dtype=np.complex128).reshape(-1)
    if y.size == 0 or not np.any(y != 0):
        raise ValueError("state_prep_pair needs a nonzero coefficient vector")
    if not np.all(np.isfinite(y)):
        raise ValueError("coefficients must be finite")
    if b is None:
        b = default_index_qubits(y.size)
    if 2**b < y.size:
        raise ValueError(f"{y.size} coefficients do not fit in {b} index qubits")
    beta = float(np.sum(np.abs(y)))
    mag = np.zeros(2**b)
    mag[: y.size] = np.sqrt(np.abs(y) / beta)
    phase = np.ones(2**b, dtype=np.complex128)
    phase[: y.size] = np.exp(-1j * np.angle(y))
    q = mag.astype(np.complex128)
    p = phase * mag
    # renormalize away the last-ulp drift of the square roots
    q /= np.linalg.norm(q)
    p /= np.linalg.norm(p)
    pu, qu = complete_unitary(p), complete_unitary(q)
    return StatePrepPair(pu, qu, beta, b, prep_residual(pu, qu, beta, y), y)


# ---------------------------------------------------------------------------
# CP-like specifications


@dataclass
class CPLikeSpec:
    coefficients: np.ndarray
    terms: list[list[np.ndarray]]
    signal_qubits: Optional[int] = None

    def __post_init__(self):
        y = np.asarray(self.coefficients, dtype=np.complex128).reshape(-1)
        if y.size < 1:
            raise SpecError("a CP-like spec needs at least one term")
        if not np.all(np.isfinite(y)):
            raise SpecError("coefficients must be finite")
        if len(self.terms) != y.size:
            raise SpecError(f"{y.size} coefficients but {len(self.terms)} terms")
        self.coefficients = y
        terms = []
        for j, term in enumerate(self.terms):
            if len(term) == 0:
                raise SpecError(f"term {j} has no factors")
            factors = []
            total = 0
            for i, f in enumerate(term):
                try:
                    m = as_matrix(f, f"term {j} factor {i}")
                except ValueError as exc:
                    raise SpecError(str(exc)) from exc
                d = m.shape[0]
                if m.shape[0] != m.shape[1] or d < 2 or d & (d - 1):
                    raise SpecError(f"term {j} factor {i} has shape {m.shape}; need square power-of-two >= 2")
                total += d.bit_length() - 1
                # keep object identity so repeated factors are dilated once
                factors.append(f if isinstance(f, np.ndarray) and f.dtype == np.complex128 else m)
            if self.signal_qubits is None:
                self.signal_qubits = total
            elif total != self.signal_qubits:
                raise SpecError(f"term {j} acts on {total} qubits, expected {self.signal_qubits}")
            terms.append(factors)
        self.terms = terms

    @property
    def m(self) -> int:
        return len(self.terms)

    def factor_sizes(self, j: int) -> tuple[int, ...]:
        return tuple(f.shape[0].bit_length() - 1 for f in self.terms[j])


def spec_dense(spec: CPLikeSpec) -> np.ndarray:
    d = 2**spec.signal_qubits
    out = np.zeros((d, d), dtype=np.complex128)
    for y, term in zip(spec.coefficients, spec.terms):
        out += y * kron_all(term)
    return out


def spec_to_json(spec: CPLikeSpec) -> dict:
    return {
        "y": [[float(z.real), float(z.imag)] for z in spec.coefficients],
        "terms": [[matrix_to_json(f) for f in term] for term in spec.terms],
    }


def spec_from_json(obj: dict) -> CPLikeSpec:
    if not isinstance(obj, dict) or "y" not in obj or "terms" not in obj:
        raise SpecError("spec JSON must be an object with 'y' and 'terms'")
    y = []
    for k, v in enumerate(obj["y"]):
        if isinstance(v, (int, float)):
            y.append(complex(v))
        elif isinstance(v, (list, tuple)) and len(v) == 2:
            y.append(complex(v[0], v[1]))
        else:
            raise SpecError(f"coefficient {k} must be a number or [re, im]")
    terms = []
    for j, term in enumerate(obj["terms"]):
        factors = []
        for i, f in enumerate(term):
            try:
                factors.append(matrix_from_json(f))
            except ValueError as exc:
                raise SpecError(f"term {j} factor {i}: {exc}") from exc
        terms.append(factors)
    return CPLikeSpec(np.asarray(y, dtype=np.complex128), terms)


# ---------------------------------------------------------------------------
# Kronecker products


def _pair_swaps(a: int, s: int, b: int, offset: int = 0) -> list[tuple[int, int]]:
    """Swaps of ``prod_i SWAP(a+i, a+b+i)`` in acting order (0-based qubits)."""
    if b == 0:
        return []
    return [(offset + a + i, offset + a + b + i) for i in range(s - 1, -1, -1)]


def swap_register(a: int, s: int, b: int, t: int) -> Circuit:
    """SWAP register moving ``s`` signal qubits past ``b`` ancillas.

    The input layout is ``[a anc | s sig | b anc | t sig]``; afterwards all
    ``a + b`` ancillas lead and the ``s + t`` signal qubits keep their order.
    """
    if min(a, s, b, t) < 0:
        raise ValueError("register sizes must be non-negative")
    width = a + s + b + t
    return Circuit(width, tuple(swap_gate(i, j) for i, j in _pair_swaps(a, s, b)))


def register_swaps(pattern: Sequence[tuple[int, int]]) -> list[tuple[int, int]]:
    """Global SWAP register for registers ``[(a_1, s_1), ..., (a_d, s_d)]``.

    Built by folding the two-register rule left to right; the swaps are in
    acting order of ``S`` (apply the reverse list for ``S^dagger``).
    """
    swaps: list[tuple[int, int]] = []
    if not pattern:
        return swaps
    acc_a, acc_s = pattern[0]
    for a_i, s_i in pattern[1:]:
        swaps.extend(_pair_swaps(acc_a, acc_s, a_i))
        acc_a += a_i
        acc_s += s_i
    return swaps


def _block_circuit(bes: Sequence[BlockEncoding]) -> tuple[Circuit, list[tuple[int, int]]]:
    """``S (U_1 (x) ... (x) U_d) S^dagger`` as a circuit, plus the swaps of ``S``."""
    if any(be.n == 0 for be in bes):
        raise ValueError("cannot combine zero-qubit encodings")
    width = sum(be.n for be in bes)
    swaps = register_swaps([(be.a, be.s) for be in bes])
    gates = [swap_gate(i, j) for i, j in reversed(swaps)]
    offset = 0
    for be in bes:
        gates.extend(be.as_circuit().shifted(offset, width).gates)
        offset += be.n
    gates.extend(swap_gate(i, j) for i, j in swaps)
    return Circuit(width, tuple(gates)), swaps


def kron_encodings(be1: BlockEncoding, be2: BlockEncoding) -> BlockEncoding:
    circ, _ = _block_circuit([be1, be2])
    eps = be1.alpha * be2.eps + be2.alpha * be1.eps + be1.eps * be2.eps
    return BlockEncoding(circ, be1.alpha * be2.alpha, be1.a + be2.a, be1.s + be2.s, eps)


def _first_order_eps(alphas: Sequence[float], epss: Sequence[float]) -> float:
    total = 0.0
    for i, e in enumerate(epss):
        if e:
            total += e * math.prod(a for k, a in enumerate(alphas) if k != i)
    return total


def kron_many(bes: Sequence[BlockEncoding]) -> BlockEncoding:
    """Kronecker product of several encodings (first-order error bound)."""
    bes = list(bes)
    if not bes:
        raise ValueError("kron_many needs at least one encoding")
    if len(bes) == 1:
        return bes[0]
    circ, _ = _block_circuit(bes)
    alphas = [be.alpha for be in bes]
    return BlockEncoding(
        circ,
        math.prod(alphas),
        sum(be.a for be in bes),
        sum(be.s for be in bes),
        _first_order_eps(alphas, [be.eps for be in bes]),
    )


# ---------------------------------------------------------------------------
# linear combinations


def _index_controls(j: int, b: int) -> tuple[tuple[int, int], ...]:
    return tuple((q, (j >> (b - 1 - q)) & 1) for q in range(b))


def _controlled_block(be_or_circ, controls, offset: int, width: int) -> list:
    if isinstance(be_or_circ, BlockEncoding) and be_or_circ.is_dense:
        targets = range(offset, offset + be_or_circ.n)
        return [controlled_gate(controls, targets, be_or_circ.unitary)]
    circ = be_or_circ.as_circuit() if isinstance(be_or_circ, BlockEncoding) else be_or_circ
    return list(circ.controlled(controls, offset, width).gates)


def select_oracle(unitaries: Sequence[BlockEncoding], b: int) -> Circuit:
    """``sum_j |j><j| (x) U_j`` plus identity on unused index states.

    Dense encodings become one multi-controlled gate each; circuit-backed
    encodings have every gate controlled on the index pattern.
    """
    unitaries = list(unitaries)
    m = len(unitaries)
    if m == 0:
        raise ValueError("select oracle needs at least one unitary")
    if m > 2**b:
        raise ValueError(f"{m} unitaries do not fit in {b} index qubits")
    a, s = unitaries[0].a, unitaries[0].s
    for j, be in enumerate(unitaries):
        if (be.a, be.s) != (a, s):
            raise ValueError(f"encoding {j} has (a, s) = ({be.a}, {be.s}), expected ({a}, {s}); pad first")
    width = b + a + s
    gates = []
    for j, be in enumerate(unitaries):
        gates.extend(_controlled_block(be, _index_controls(j, b), b, width))
    return Circuit(width, tuple(gates))


def _wrap_select(pair: StatePrepPair, select: Circuit) -> Circuit:
    b = pair.b
    gates = [unitary_gate(range(b), pair.q_unitary)]
    gates.extend(select.gates)
    gates.append(unitary_gate(range(b), pair.p_unitary.conj().T))
    return Circuit(select.width, tuple(gates))


def lcu(pair: StatePrepPair, encodings: Sequence[BlockEncoding]) -> BlockEncoding:
    """``(P^dagger (x) I) W (Q (x) I)`` for encodings sharing ``(alpha, a, s)``."""
    encodings = list(encodings)
    if not encodings:
        raise ValueError("lcu needs at least one encoding")
    first = encodings[0]
    for j, be in enumerate(encodings):
        if (be.a, be.s) != (first.a, first.s) or not math.isclose(be.alpha, first.alpha, rel_tol=1e-12):
            raise ValueError(f"encoding {j} differs in (alpha, a, s); fold and pad first")
    if pair.coefficients is not None and len(encodings) != pair.coefficients.size:
        raise ValueError(f"pair encodes {pair.coefficients.size} coefficients, got {len(encodings)} encodings")
    circ = _wrap_select(pair, select_oracle(encodings, pair.b))
    eps = first.alpha * pair.eps + pair.beta * max(be.eps for be in encodings)
    return BlockEncoding(circ, first.alpha * pair.beta, first.a + pair.b, first.s, eps)


# ---------------------------------------------------------------------------
# CP-like synthesis


@dataclass
class CPPlan:
    """Intermediate products of ``synthesize_cp``."""

    spec: CPLikeSpec
    factor_encodings: list[list[BlockEncoding]]
    term_alphas: np.ndarray
    term_eps: np.ndarray
    folded: np.ndarray
    pair: StatePrepPair
    uniform: bool

    @property
    def term_ancillas(self) -> list[int]:
        return [sum(be.a for be in term) for term in self.factor_encodings]

    @property
    def a_terms(self) -> int:
        return max(self.term_ancillas)

    @property
    def b(self) -> int:
        return self.pair.b


def _dilate_factors(spec: CPLikeSpec) -> list[list[BlockEncoding]]:
    cache: dict[int, BlockEncoding] = {}
    out = []
    for term in spec.terms:
        encs = []
        for f in term:
            key = id(f)
            if key not in cache:
                cache[key] = dilate(f)
            encs.append(cache[key])
        out.append(encs)
    return out


def _pattern(term: Sequence[BlockEncoding]) -> tuple[tuple[int, int], ...]:
    return tuple((be.a, be.s) for be in term)


def plan_cp(spec: CPLikeSpec, b: Optional[int] = None) -> CPPlan:
    factor_encs = _dilate_factors(spec)
    alphas = np.array([math.prod(be.alpha for be in term) for term in factor_encs])
    epss = np.array([_first_order_eps([be.alpha for be in term], [be.eps for be in term])
                     for term in factor_encs])
    folded = spec.coefficients * alphas
    pair = state_prep_pair(folded, b)
    uniform = len({_pattern(term) for term in factor_encs}) == 1
    return CPPlan(spec, factor_encs, alphas, epss, folded, pair, uniform)


def _shared_select(factor_encs: Sequence[Sequence[BlockEncoding]], b: int) -> Circuit:
    patterns = {_pattern(term) for term in factor_encs}
    if len(patterns) != 1:
        raise ValueError("terms differ in factor sizes or ancilla counts; use the generic path")
    pattern = next(iter(patterns))
    n = sum(a + s for a, s in pattern)
    width = b + n
    swaps = register_swaps(list(pattern))
    gates = [swap_gate(b + i, b + j) for i, j in reversed(swaps)]
    for j, term in enumerate(factor_encs):
        controls = _index_controls(j, b)
        offset = b
        for be in term:
            gates.extend(_controlled_block(be, controls, offset, width))
            offset += be.n
    gates.extend(swap_gate(b + i, b + j) for i, j in swaps)
    return Circuit(width, tuple(gates))


def shared_swap_select(spec: CPLikeSpec, b: Optional[int] = None) -> Circuit:
    """Select oracle where one uncontrolled SWAP register serves every term.

    Requires every term to have the same factor sizes and ancilla counts;
    the result contains no controlled SWAP gates.
    """
    factor_encs = _dilate_factors(spec)
    if b is None:
        b = default_index_qubits(spec.m)
    return _shared_select(factor_encs, b)


def generic_select(plan: CPPlan) -> tuple[Circuit, list[BlockEncoding]]:
    """Select oracle over per-term Kronecker encodings, padded to common ``a``."""
    a_max = plan.a_terms
    terms = []
    for j, factors in enumerate(plan.factor_encodings):
        be = kron_many(factors)
        unit = BlockEncoding(be.unitary, 1.0, be.a, be.s, plan.term_eps[j] / plan.term_alphas[j])
        terms.append(pad_ancillas(unit, a_max))
    return select_oracle(terms, plan.b), terms


def synthesize_cp(spec: CPLikeSpec, b: Optional[int] = None, shared: Optional[bool] = None) -> BlockEncoding:
    """Block-encode ``sum_j y_j A_1^(j) (x) ... (x) A_d^(j)``.

    Factors are dilated (unitary factors need no ancilla), each term's
    subnormalization is folded into its coefficient, and the terms are
    combined with a state-preparation pair. The shared-SWAP select oracle is
    used whenever all terms have the same register pattern, unless
    ``shared=False``.
    """
    plan = plan_cp(spec, b)
    use_shared = plan.uniform if shared is None else shared
    if use_shared:
        select = _shared_select(plan.factor_encodings, plan.b)
    else:
        select, _ = generic_select(plan)
    circ = _wrap_select(plan.pair, select)
    beta = plan.pair.beta
    eps_terms = float(np.max(plan.term_eps / plan.term_alphas))
    eps = plan.pair.eps + beta * eps_terms
    return BlockEncoding(circ, beta, plan.a_terms + plan.b, spec.signal_qubits, eps)
