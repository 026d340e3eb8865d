"""Numerical experiments: coherent-noise study on the Ising chain, CP
compression of the spin-1 chain, spec synthesis and cost tables.

CSV floats are written with 17 significant digits so that identical seeds
give byte-identical output.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Optional, Sequence

import numpy as np

from .circuit import CostReport, cnot_cost
from .combine import CPLikeSpec, plan_cp, prep_residual, spec_dense, synthesize_cp
from .cpd import cp_to_spec, rank_sweep, tensorize
from .encoding import encoding_error
from .models import PAULI, embed_padded, tfim, xyz
from .numerics import as_matrix, haar_states, is_unitary, kron_all, max_qubits, operator_norm, spectral_norm

__all__ = [
    "NoiseScenario",
    "TrialRecord",
    "SweepRecord",
    "SynthSummary",
    "perturb_unitary",
    "run_tfim_noise",
    "run_xyz_cp",
    "synth",
    "cost_report",
    "to_csv",
    "SCENARIOS",
]

FLOAT_FMT = "%.17g"
SCENARIOS = ("pauli", "prep", "both")
_SCENARIO_INDEX = {"pauli": 0, "prep": 1, "both": 2, "none": 3}
HAAR_COUNT = 100
# above this dimension the error operator is never densified
_STRUCTURED_DIM = 256


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % v
    return str(v)


def to_csv(rows: Iterable, header: Optional[Sequence[str]] = None) -> str:
    """Render dataclass rows (or plain sequences with ``header``) as CSV."""
    rows = list(rows)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header is None:
        if not rows:
            return ""
        header = [f.name for f in fields(rows[0])]
    writer.writerow(header)
    for row in rows:
        values = list(asdict(row).values()) if hasattr(row, "__dataclass_fields__") else list(row)
        writer.writerow([_fmt(v) for v in values])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# coherent noise


def perturb_unitary(u, eta: float, seed: int) -> np.ndarray:
    """``exp(i eta' K) u`` with ``K`` a seeded Hermitian matrix of norm 1.

    ``eta' = 2 arcsin(eta / 2)`` makes ``||result - u||_2 = eta``.
    """
    u = as_matrix(u, "u")
    if not 0 <= eta < 2:
        raise ValueError(f"eta must lie in [0, 2), got {eta}")
    if not is_unitary(u, 1e-10):
        raise ValueError("perturb_unitary needs a unitary input")
    if eta == 0:
        return u.copy()
    d = u.shape[0]
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    w, v = np.linalg.eigh((g + g.conj().T) / 2)
    w = w / np.max(np.abs(w))
    angle = 2.0 * math.asin(eta / 2.0)
    return ((v * np.exp(1j * angle * w)) @ v.conj().T) @ u


@dataclass(frozen=True)
class NoiseScenario:
    perturb_paulis: bool
    perturb_state_prep: bool
    eta: float = 0.01
    trials: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.eta < 2:
            raise ValueError(f"eta must lie in [0, 2), got {self.eta}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    @property
    def label(self) -> str:
        if self.perturb_paulis and self.perturb_state_prep:
            return "both"
        if self.perturb_paulis:
            return "pauli"
        return "prep" if self.perturb_state_prep else "none"

    @classmethod
    def from_label(cls, label: str, eta: float = 0.01, trials: int = 1000, seed: int = 0) -> "NoiseScenario":
        if label not in _SCENARIO_INDEX:
            raise ValueError(f"unknown scenario {label!r}")
        return cls(label in ("pauli", "both"), label in ("prep", "both"), eta, trials, seed)


@dataclass
class TrialRecord:
    s: int
    scenario: str
    trial: int
    relative_error: float
    theoretical_bound: float
    expected_repetitions: float
    expected_repetitions_sq: float
    expected_repetitions_basis: float
    expected_repetitions_ground: float
    eps_prep: float
    eps_term: float


def _tfim_sites(s: int, h: float) -> list[dict[int, np.ndarray]]:
    """Active sites of each Ising term, in the order used by ``models.tfim``."""
    sites = [{i: PAULI.z, i + 1: PAULI.z} for i in range(s - 1)]
    if h != 0:
        sites += [{i: PAULI.x} for i in range(s)]
    return sites


class _BondSum:
    """Operator ``sum_i B_i`` where ``B_i`` acts on neighbouring qubits ``i, i + 1``."""

    def __init__(self, s: int, bonds: np.ndarray):
        self.s, self.bonds = s, bonds

    @classmethod
    def from_terms(cls, s: int, coeffs, terms: list[dict[int, np.ndarray]], shift: complex = 0.0) -> "_BondSum":
        """Fold one- and two-site Kronecker terms (plus ``shift * I``) onto bonds."""
        bonds = np.zeros((s - 1, 4, 4), dtype=np.complex128)
        eye = PAULI.i
        for c, ops in zip(coeffs, terms):
            keys = sorted(ops)
            if len(keys) == 2:
                i = keys[0]
                if keys[1] != i + 1:
                    raise ValueError(f"sites {keys} are not neighbours")
                bonds[i] += c * np.kron(ops[i], ops[i + 1])
            elif keys[0] < s - 1:
                bonds[keys[0]] += c * np.kron(ops[keys[0]], eye)
            else:
                bonds[s - 2] += c * np.kron(eye, ops[keys[0]])
        bonds[0] += shift * np.eye(4)
        return cls(s, bonds)

    def __sub__(self, other: "_BondSum") -> "_BondSum":
        return _BondSum(self.s, self.bonds - other.bonds)

    def __rmul__(self, c) -> "_BondSum":
        return _BondSum(self.s, c * self.bonds)

    def dense(self) -> np.ndarray:
        d = 2**self.s
        out = np.zeros((d, d), dtype=np.complex128)
        for i, bond in enumerate(self.bonds):
            out += np.kron(np.kron(np.eye(2**i), bond), np.eye(2 ** (self.s - i - 2)))
        return out

    def matvec(self, x: np.ndarray, adjoint: bool = False) -> np.ndarray:
        single = x.ndim == 1
        x = x.reshape(2**self.s, -1)
        out = np.zeros(x.shape, dtype=np.complex128)
        bonds = self.bonds.conj().transpose(0, 2, 1) if adjoint else self.bonds
        for i, bond in enumerate(bonds):
            out += np.matmul(bond, x.reshape(2**i, 4, -1)).reshape(x.shape)
        return out[:, 0] if single else out

    def norm(self) -> float:
        d = 2**self.s
        if d <= _STRUCTURED_DIM:
            return spectral_norm(self.dense())
        return operator_norm(self.matvec, lambda x: self.matvec(x, adjoint=True), d)


def _term_error(exact: dict[int, np.ndarray], noisy: dict[int, np.ndarray]) -> float:
    # identities on inactive sites do not change the spectral norm
    keys = sorted(exact)
    return spectral_norm(kron_all([exact[k] for k in keys]) - kron_all([noisy[k] for k in keys]))


def _run_trial(s, scenario, trial, spec, pair, exact, h_norm, sites, ground) -> TrialRecord:
    ss = np.random.SeedSequence([scenario.seed, s, _SCENARIO_INDEX[scenario.label], trial])
    rng = np.random.default_rng(ss)

    def draw() -> int:
        return int(rng.integers(0, 2**63 - 1))

    eta = scenario.eta
    noisy_sites = []
    for ops in sites:
        if scenario.perturb_paulis:
            noisy_sites.append({k: perturb_unitary(g, eta, draw()) for k, g in ops.items()})
        else:
            noisy_sites.append(dict(ops))
    p_u, q_u = pair.p_unitary, pair.q_unitary
    if scenario.perturb_state_prep:
        p_u = perturb_unitary(p_u, eta, draw())
        q_u = perturb_unitary(q_u, eta, draw())
    states = haar_states(2**s, HAAR_COUNT, draw())

    m = spec.m
    w = p_u[:, 0].conj() * q_u[:, 0]
    block = _BondSum.from_terms(s, w[:m], noisy_sites, complex(np.sum(w[m:])))
    beta = pair.beta
    eps_prep = prep_residual(p_u, q_u, beta, spec.coefficients)
    eps_term = max(_term_error(a, b) for a, b in zip(sites, noisy_sites)) if scenario.perturb_paulis else 0.0
    err = (exact - beta * block).norm()
    with np.errstate(divide="ignore"):
        inv = 1.0 / np.linalg.norm(block.matvec(states), axis=0)
        inv_basis = 1.0 / np.linalg.norm(block.matvec(np.eye(2**s, dtype=np.complex128)), axis=0)
        inv_ground = 1.0 / np.linalg.norm(block.matvec(ground))
    return TrialRecord(
        s,
        scenario.label,
        trial,
        err / h_norm,
        (eps_prep + beta * eps_term) / h_norm,
        float(np.mean(inv)),
        float(np.mean(inv**2)),
        float(np.mean(inv_basis)),
        float(inv_ground),
        eps_prep,
        eps_term,
    )


def run_tfim_noise(
    s_min: int,
    s_max: int,
    h: float,
    scenario: NoiseScenario,
) -> list[TrialRecord]:
    """Coherent-noise trials on the Ising chain via the block-algebra path.

    Every Pauli occurrence and/or both state-preparation unitaries receive an
    independent ``perturb_unitary`` error of size ``eta``. The leading block
    ``sum_j conj(p'_j) q'_j (x) G'_j`` is used directly, so the full
    ``2**(b + s)`` unitary is never built. Errors and bounds are relative to
    ``||H||_2``; the bound uses the measured prep residual and the largest
    measured per-term error. Repetition counts ``1 / ||A~ psi||`` are averaged
    over 100 Haar states (also as ``1 / ||A~ psi||**2``) and over the
    computational basis, and evaluated on the ground state of ``H``.
    """
    if not 2 <= s_min <= s_max <= 10:
        raise ValueError(f"need 2 <= s_min <= s_max <= 10, got {s_min}, {s_max}")
    records = []
    for s in range(s_min, s_max + 1):
        spec, h_mat = tfim(s, h)
        pair = plan_cp(spec).pair
        evals, evecs = np.linalg.eigh(h_mat)
        h_norm = float(np.max(np.abs(evals)))
        sites = _tfim_sites(s, h)
        exact = _BondSum.from_terms(s, spec.coefficients, sites)
        for trial in range(scenario.trials):
            records.append(_run_trial(s, scenario, trial, spec, pair, exact, h_norm, sites, evecs[:, 0]))
    return records


# ---------------------------------------------------------------------------
# CP compression of the spin-1 chain


@dataclass
class SweepRecord:
    s: int
    rank: int
    restarts: int
    best_rel_error: float
    iterations_of_best: int
    raw_rel_error: float
    encoding_rel_error: Optional[float] = None


def _encoding_rel_error(model, s: int, dense3: np.ndarray) -> float:
    spec = cp_to_spec(model, [3] * s)
    be = synthesize_cp(spec)
    dense4 = embed_padded(dense3, s)
    return encoding_error(be, dense4) / spectral_norm(dense4)


def run_xyz_cp(
    s_min: int,
    s_max: int,
    ranks,
    restarts: int = 20,
    seed: int = 0,
    max_iters: int = 500,
    synth_rank=None,
    synth_max_qubits: int = 16,
) -> list[SweepRecord]:
    """Rank sweeps of the tensorized spin-1 chain.

    ``ranks`` is either one list used for every ``s`` or a mapping from
    ``s`` to its list. For ``synth_rank`` (an int or a mapping) the best
    model is compiled with ``cp_to_spec`` and ``synthesize_cp`` and its
    spectral-norm error against the padded Hamiltonian is recorded, provided
    the encoding has at most ``synth_max_qubits`` qubits.
    """
    if not 3 <= s_min <= s_max <= 6:
        raise ValueError(f"need 3 <= s_min <= s_max <= 6, got {s_min}, {s_max}")
    out = []
    for s in range(s_min, s_max + 1):
        rs = ranks[s] if isinstance(ranks, dict) else ranks
        _, dense3, _ = xyz(s)
        rows = rank_sweep(tensorize(dense3, [3] * s), rs, restarts, seed, max_iters)
        target = synth_rank.get(s) if isinstance(synth_rank, dict) else synth_rank
        for row in rows:
            rec = SweepRecord(s, row.rank, restarts, row.best_rel_error, row.iterations, row.raw_rel_error)
            nonzero = int(np.count_nonzero(row.model.weights))
            width = 3 * s + max(1, math.ceil(math.log2(max(nonzero, 1))))
            if target == row.rank and width <= synth_max_qubits:
                rec.encoding_rel_error = _encoding_rel_error(row.model, s, dense3)
            out.append(rec)
    return out


# ---------------------------------------------------------------------------
# spec synthesis and cost tables


@dataclass
class SynthSummary:
    alpha: float
    a: int
    b: int
    s: int
    eps: float
    m: int
    select: str
    encoding_error: Optional[float] = None


def synth(spec: CPLikeSpec, verify: bool = True) -> tuple[SynthSummary, object]:
    """Synthesize ``spec``; optionally measure the error against its dense sum.

    Verification runs when ``s + a + b`` stays within twice the dense
    qubit guard, which bounds the work of propagating ``2**s`` columns.
    """
    plan = plan_cp(spec)
    be = synthesize_cp(spec)
    summary = SynthSummary(be.alpha, plan.a_terms, plan.b, be.s, be.eps, spec.m,
                           "shared" if plan.uniform else "generic")
    if verify and be.s + be.n <= 2 * max_qubits():
        summary.encoding_error = encoding_error(be, spec_dense(spec))
    return summary, be


COST_HEADER = ("s", "regime", "state_prep", "swap", "select", "total")


def cost_report(s_values: Sequence[int], regime: str = "exact", eps: Optional[float] = None) -> list[CostReport]:
    return [cnot_cost(int(s), regime, eps) for s in s_values]


def cost_csv(reports: Sequence[CostReport]) -> str:
    return to_csv([r.csv_row() for r in reports], COST_HEADER)
