"""Gate-level circuit IR, state-vector evaluation and the CNOT cost model.

Qubit 0 is the most significant qubit. Gates are applied in list order, so
``Circuit([g0, g1])`` implements the unitary ``g1 @ g0``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .numerics import DimensionLimitError, as_matrix, matrix_from_json, matrix_to_json, max_qubits

__all__ = [
    "Gate",
    "Circuit",
    "CostReport",
    "unitary_gate",
    "controlled_gate",
    "swap_gate",
    "evaluate",
    "apply_to_state",
    "gate_census",
    "cnot_cost",
    "circuit_to_json",
    "circuit_from_json",
]

KINDS = ("unitary", "controlled_unitary", "swap")
STATE_MAX_QUBITS = 26


@dataclass(frozen=True)
class Gate:
    """One circuit element.

    ``controls`` holds ``(qubit, polarity)`` pairs: polarity 1 fires on
    ``|1>``, polarity 0 on ``|0>``. A ``swap`` gate with controls is a
    (generalized) Fredkin gate.
    """

    kind: str
    targets: tuple[int, ...]
    controls: tuple[tuple[int, int], ...] = ()
    payload: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        targets = tuple(int(q) for q in self.targets)
        controls = tuple((int(q), int(p)) for q, p in self.controls)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "controls", controls)
        if len(set(targets)) != len(targets):
            raise ValueError(f"repeated target qubits {targets}")
        cq = [q for q, _ in controls]
        if len(set(cq)) != len(cq) or set(cq) & set(targets):
            raise ValueError(f"control qubits {cq} overlap targets {targets} or repeat")
        if any(p not in (0, 1) for _, p in controls):
            raise ValueError("control polarity must be 0 or 1")
        if self.kind == "swap":
            if len(targets) != 2:
                raise ValueError("swap gate needs exactly two targets")
            if self.payload is not None:
                raise ValueError("swap gate takes no payload")
            return
        if self.kind == "unitary" and controls:
            raise ValueError("use kind 'controlled_unitary' for controlled gates")
        if self.kind == "controlled_unitary" and not controls:
            raise ValueError("controlled_unitary gate needs controls")
        payload = as_matrix(self.payload, "payload")
        dim = 2 ** len(targets)
        if payload.shape != (dim, dim):
            raise ValueError(f"payload shape {payload.shape} does not match {len(targets)} targets")
        object.__setattr__(self, "payload", payload)

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.controls) + self.targets

    def shifted(self, offset: int) -> "Gate":
        return Gate(
            self.kind,
            tuple(q + offset for q in self.targets),
            tuple((q + offset, p) for q, p in self.controls),
            self.payload,
        )

    def with_controls(self, controls: Sequence[tuple[int, int]]) -> "Gate":
        if not controls:
            return self
        kind = "swap" if self.kind == "swap" else "controlled_unitary"
        return Gate(kind, self.targets, tuple(controls) + self.controls, self.payload)

    def dagger(self) -> "Gate":
        if self.kind == "swap":
            return self
        return Gate(self.kind, self.targets, self.controls, self.payload.conj().T)


def unitary_gate(targets: Iterable[int], payload) -> Gate:
    return Gate("unitary", tuple(targets), (), payload)


def controlled_gate(controls, targets: Iterable[int], payload) -> Gate:
    return Gate("controlled_unitary", tuple(targets), tuple(controls), payload)


def swap_gate(i: int, j: int, controls=()) -> Gate:
    return Gate("swap", (i, j), tuple(controls))


@dataclass(frozen=True)
class Circuit:
    width: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        gates = tuple(self.gates)
        object.__setattr__(self, "gates", gates)
        if self.width < 0:
            raise ValueError("width must be non-negative")
        for k, g in enumerate(gates):
            if any(q < 0 or q >= self.width for q in g.qubits):
                raise ValueError(f"gate {k} touches qubits {g.qubits} outside width {self.width}")

    def __len__(self) -> int:
        return len(self.gates)

    def shifted(self, offset: int, width: Optional[int] = None) -> "Circuit":
        """Relabel qubit ``q`` as ``q + offset`` inside a circuit of ``width``."""
        width = self.width + offset if width is None else width
        return Circuit(width, tuple(g.shifted(offset) for g in self.gates))

    def controlled(self, controls: Sequence[tuple[int, int]], offset: int, width: int) -> "Circuit":
        return Circuit(width, tuple(g.shifted(offset).with_controls(controls) for g in self.gates))

    def dagger(self) -> "Circuit":
        return Circuit(self.width, tuple(g.dagger() for g in reversed(self.gates)))

    def then(self, other: "Circuit") -> "Circuit":
        if other.width != self.width:
            raise ValueError("cannot concatenate circuits of different width")
        return Circuit(self.width, self.gates + other.gates)


def _apply_gate(state: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    """Apply ``gate`` in place to a ``(2,)*n + (batch,)`` tensor."""
    index: list = [slice(None)] * (n + 1)
    for q, pol in gate.controls:
        index[q] = pol
    index = tuple(index)
    sub = state[index]
    # axis positions of the targets inside the control-fixed view
    fixed = sorted(q for q, _ in gate.controls)
    pos = [t - sum(1 for f in fixed if f < t) for t in gate.targets]
    if gate.kind == "swap":
        state[index] = np.swapaxes(sub, pos[0], pos[1]).copy()
        return state
    k = len(pos)
    moved = np.moveaxis(sub, pos, list(range(k)))
    shape = moved.shape
    out = (gate.payload @ moved.reshape(2**k, -1)).reshape(shape)
    state[index] = np.moveaxis(out, list(range(k)), pos)
    return state


def apply_to_state(c: Circuit, v) -> np.ndarray:
    """Apply the circuit to a state vector, or to each column of a matrix."""
    v = np.asarray(v, dtype=np.complex128)
    if c.width > STATE_MAX_QUBITS:
        raise DimensionLimitError(f"state application is limited to {STATE_MAX_QUBITS} qubits")
    dim = 2**c.width
    if v.shape[0] != dim:
        raise ValueError(f"state has leading dimension {v.shape[0]}, circuit needs {dim}")
    single = v.ndim == 1
    batch = v.reshape(dim, -1)
    state = batch.reshape((2,) * c.width + (batch.shape[1],)).copy()
    for g in c.gates:
        state = _apply_gate(state, g, c.width)
    out = state.reshape(dim, -1)
    return out[:, 0] if single else out


def evaluate(c: Circuit) -> np.ndarray:
    """Dense unitary of the circuit (guarded at 14 qubits by default)."""
    if c.width > max_qubits():
        raise DimensionLimitError(
            f"dense evaluation of {c.width} qubits exceeds the {max_qubits()}-qubit guard; "
            "apply the circuit to states instead"
        )
    return apply_to_state(c, np.eye(2**c.width, dtype=np.complex128))


def gate_census(c: Circuit) -> Counter:
    """Count gates by kind; controlled SWAPs are reported as ``controlled_swap``."""
    counts: Counter = Counter()
    for g in c.gates:
        if g.kind == "swap" and g.controls:
            counts["controlled_swap"] += 1
        else:
            counts[g.kind] += 1
    return counts


@dataclass(frozen=True)
class CostReport:
    s: int
    regime: str
    state_prep_cnots: float
    swap_cnots: float
    select_oracle_cnots: float
    eps_synthesis: Optional[float] = None

    @property
    def total(self) -> float:
        return self.state_prep_cnots + self.swap_cnots + self.select_oracle_cnots

    def csv_row(self) -> list:
        return [self.s, self.regime, self.state_prep_cnots, self.swap_cnots,
                self.select_oracle_cnots, self.total]


def cnot_cost(s: int, regime: str = "exact", eps_synthesis: Optional[float] = None) -> CostReport:
    """Leading-order CNOT estimate for an ``s``-term, ``s``-site PLTCP operator.

    All logarithms are base 2. The state-preparation row has no approximate
    entry, so the exact value is used in both regimes.
    """
    if s < 2:
        raise ValueError(f"cost model needs s >= 2, got {s}")
    if regime not in ("exact", "approximate"):
        raise ValueError(f"regime must be 'exact' or 'approximate', got {regime!r}")
    if regime == "approximate":
        if eps_synthesis is None:
            raise ValueError("approximate regime needs eps_synthesis")
        if not 0 < eps_synthesis < 1:
            raise ValueError("eps_synthesis must lie in (0, 1)")
    elif eps_synthesis is not None:
        raise ValueError("eps_synthesis is only used in the approximate regime")
    log_s = math.log2(s)
    prep = 23.0 / 24.0 * s
    swaps = 6.0 * s
    if regime == "exact":
        select = 11.0 * s * s * log_s**2
    else:
        select = 11.0 * s * s * log_s * math.log2(1.0 / eps_synthesis)
    return CostReport(s, regime, prep, swaps, select, eps_synthesis)


def circuit_to_json(c: Circuit) -> dict:
    gates = []
    for g in c.gates:
        entry = {"kind": g.kind, "targets": list(g.targets), "controls": [list(x) for x in g.controls]}
        if g.payload is not None:
            entry["payload"] = matrix_to_json(g.payload)
        gates.append(entry)
    return {"width": c.width, "gates": gates}


def circuit_from_json(obj: dict) -> Circuit:
    if not isinstance(obj, dict) or "width" not in obj or "gates" not in obj:
        raise ValueError("circuit JSON must be an object with 'width' and 'gates'")
    gates = []
    for k, g in enumerate(obj["gates"]):
        try:
            payload = matrix_from_json(g["payload"]) if "payload" in g else None
            gates.append(Gate(g["kind"], tuple(g["targets"]),
                              tuple(tuple(x) for x in g.get("controls", [])), payload))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"gate {k}: {exc}") from exc
    return Circuit(int(obj["width"]), tuple(gates))
