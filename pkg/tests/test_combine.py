import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pltcp.circuit import Circuit, evaluate, gate_census
from pltcp.combine import (
    CPLikeSpec,
    SpecError,
    StatePrepPair,
    generic_select,
    kron_encodings,
    kron_many,
    lcu,
    plan_cp,
    prep_residual,
    select_oracle,
    shared_swap_select,
    spec_dense,
    spec_from_json,
    spec_to_json,
    state_prep_pair,
    swap_register,
    synthesize_cp,
)
from pltcp.encoding import BlockEncoding, dilate, encoding_error, leading_block
from pltcp.experiments import perturb_unitary
from pltcp.numerics import kron_all, spectral_norm

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)


def random_unitary(rng, dim):
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_matrix(rng, dim):
    return rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))


def labels_after(c: Circuit, labels):
    """Track which logical qubit sits on each wire after a pure-swap circuit."""
    wires = list(labels)
    for g in c.gates:
        assert g.kind == "swap" and not g.controls
        i, j = g.targets
        wires[i], wires[j] = wires[j], wires[i]
    return wires


def permutation_matrix(n, wire_of):
    """Unitary sending qubit ``q`` of the input to wire ``wire_of[q]``."""
    p = np.zeros((2**n, 2**n))
    for k in range(2**n):
        bits = [(k >> (n - 1 - q)) & 1 for q in range(n)]
        out = [0] * n
        for q in range(n):
            out[wire_of[q]] = bits[q]
        p[int("".join(map(str, out)), 2), k] = 1
    return p


# --- swap register ----------------------------------------------------------


def test_swap_register_empty():
    assert len(swap_register(2, 0, 3, 1)) == 0
    assert len(swap_register(1, 2, 0, 1)) == 0


def test_swap_register_single():
    c = swap_register(1, 1, 1, 1)
    assert [g.targets for g in c.gates] == [(1, 2)]
    u = evaluate(c)
    for k in range(16):
        x1, x2, x3, x4 = [(k >> (3 - q)) & 1 for q in range(4)]
        assert u[(x1 << 3) | (x3 << 2) | (x2 << 1) | x4, k] == 1


def test_swap_register_three_signals():
    c = swap_register(3, 3, 2, 2)
    assert len(c) == 3
    assert {g.targets for g in c.gates} == {(3, 5), (4, 6), (5, 7)}


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 3), st.integers(0, 4), st.integers(0, 3), st.integers(0, 3))
def test_swap_register_layout(a, s, b, t):
    labels = [f"a{i}" for i in range(a)] + [f"s{i}" for i in range(s)]
    labels += [f"b{i}" for i in range(b)] + [f"t{i}" for i in range(t)]
    out = labels_after(swap_register(a, s, b, t), labels)
    assert sorted(out[: a + b]) == sorted(labels[:a] + labels[a + s : a + s + b])
    signals = labels[a : a + s] + labels[a + s + b :]
    assert out[a + b :] == signals
    assert len(swap_register(a, s, b, t)) == (s if b else 0)


# --- Kronecker products -----------------------------------------------------


def test_kron_unitaries_no_swaps():
    be = kron_encodings(dilate(X), dilate(Z))
    assert (be.alpha, be.a, be.s, be.eps) == (1.0, 0, 2, 0.0)
    assert "swap" not in gate_census(be.unitary)
    assert np.allclose(leading_block(be), np.kron(X, Z))


def test_kron_scaled_paulis_against_dense_oracle():
    e1, e2 = dilate(Z / 2), dilate(X / 3)
    be = kron_encodings(e1, e2)
    assert be.alpha == pytest.approx(1 / 6, rel=1e-15)
    assert (be.a, be.s) == (2, 2)
    # wires: [a1, s1, a2, s2] -> [a1, a2, s1, s2]
    p = permutation_matrix(4, [0, 2, 1, 3])
    dense = p @ np.kron(e1.unitary, e2.unitary) @ p.T
    assert np.allclose(be.matrix(), dense, atol=1e-14)
    assert spectral_norm(leading_block(be) - np.kron(Z, X)) <= 1e-10


def test_kron_eps_formula():
    e1 = BlockEncoding(X, 1.0, 0, 1, 0.01)
    e2 = BlockEncoding(Z, 1.0, 0, 1, 0.01)
    assert kron_encodings(e1, e2).eps == pytest.approx(0.0201, abs=1e-15)


def test_kron_many_cases():
    single = dilate(np.diag([0.5, 0.1]))
    assert kron_many([single]) is single
    paulis = kron_many([dilate(X), dilate(Z), dilate(X)])
    assert (paulis.alpha, paulis.a) == (1.0, 0)
    assert "swap" not in gate_census(paulis.unitary)
    assert np.allclose(leading_block(paulis), kron_all([X, Z, X]))
    mats = [np.diag([0.5, 0.25]), np.array([[0, 1 / 3], [1 / 3, 0]]), np.diag([0.25, -0.25])]
    be = kron_many([dilate(m) for m in mats])
    assert be.alpha == pytest.approx(1 / 24, rel=1e-14)
    assert be.a == 3
    assert spectral_norm(be.alpha * leading_block(be) - kron_all(mats)) <= 1e-10
    with pytest.raises(ValueError):
        kron_many([])


def test_kron_many_first_order_eps():
    bes = [BlockEncoding(X, a, 0, 1, e) for a, e in ((1.0, 0.1), (2.0, 0.2), (3.0, 0.0))]
    assert kron_many(bes).eps == pytest.approx(0.1 * 6 + 0.2 * 3, rel=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_kron_many_signal_layout(seed):
    rng = np.random.default_rng(seed)
    sizes = rng.integers(1, 3, size=3)
    bes = [dilate(random_matrix(rng, 2**k)) if rng.random() < 0.7 else dilate(random_unitary(rng, 2**k))
           for k in sizes]
    be = kron_many(bes)
    expected = kron_all([leading_block(b) for b in bes])
    assert np.max(np.abs(leading_block(be) - expected)) <= 1e-9


def _noisy_dilation(rng, dim, eta):
    a = random_matrix(rng, dim)
    be = dilate(a)
    u = perturb_unitary(be.unitary, eta, int(rng.integers(2**32)))
    noisy = BlockEncoding(u, be.alpha, be.a, be.s)
    eps = encoding_error(noisy, a)
    return a, BlockEncoding(u, be.alpha, be.a, be.s, eps)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.05))
def test_kron_error_bound(seed, eta):
    rng = np.random.default_rng(seed)
    a1, e1 = _noisy_dilation(rng, 2, eta)
    a2, e2 = _noisy_dilation(rng, 4, eta)
    be = kron_encodings(e1, e2)
    assert encoding_error(be, np.kron(a1, a2)) <= be.eps + 1e-9


# --- state preparation ------------------------------------------------------


def test_state_prep_single():
    pair = state_prep_pair([1.0])
    assert (pair.beta, pair.b) == (1.0, 1)
    assert np.array_equal(pair.p_unitary, np.eye(2)) and np.array_equal(pair.q_unitary, np.eye(2))


def test_state_prep_uniform():
    pair = state_prep_pair([1, 1, 1, 1])
    assert pair.beta == 4 and pair.b == 2
    assert np.allclose(pair.p, 0.5, atol=1e-15) and np.allclose(pair.q, 0.5, atol=1e-15)
    assert np.max(np.abs(pair.beta * pair.weights - 1)) <= 1e-15


def test_state_prep_complex():
    y = np.array([1, -2, 3j])
    pair = state_prep_pair(y)
    assert pair.beta == 6 and pair.b == 2
    residual = sum(abs(pair.beta * np.conj(pair.p[j]) * pair.q[j] - (y[j] if j < 3 else 0)) for j in range(4))
    assert residual <= 1e-12
    assert pair.eps == pytest.approx(residual, abs=1e-15)
    assert np.all(pair.q.imag == 0) and np.all(pair.q.real >= 0)


def test_state_prep_errors():
    with pytest.raises(ValueError):
        state_prep_pair([0, 0])
    with pytest.raises(ValueError):
        state_prep_pair([1, 2, 3], b=1)
    with pytest.raises(ValueError):
        StatePrepPair(np.eye(2), 2 * np.eye(2), 1.0, 1, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), min_size=1, max_size=9))
def test_state_prep_residual_property(y):
    if not any(abs(v) > 1e-6 for v in y):
        return
    pair = state_prep_pair(y)
    assert 2**pair.b >= len(y)
    assert pair.eps <= 1e-12 * max(1.0, pair.beta)
    assert pair.beta == pytest.approx(sum(abs(v) for v in y), rel=1e-12)


# --- select oracle and LCU --------------------------------------------------


def test_select_single_pauli():
    w = evaluate(select_oracle([dilate(X)], 1))
    expected = np.zeros((4, 4), dtype=complex)
    expected[:2, :2] = X
    expected[2:, 2:] = I2
    assert np.array_equal(w, expected)


def test_select_two_paulis():
    w = evaluate(select_oracle([dilate(X), dilate(Z)], 1))
    assert np.array_equal(w[:2, :2], X) and np.array_equal(w[2:, 2:], Z)
    assert np.all(w[:2, 2:] == 0) and np.all(w[2:, :2] == 0)


def test_select_padding_branch():
    rng = np.random.default_rng(3)
    us = [random_unitary(rng, 4) for _ in range(3)]
    w = evaluate(select_oracle([BlockEncoding(u, 1.0, 0, 2) for u in us], 2))
    for j in range(4):
        block = w[4 * j : 4 * j + 4, 4 * j : 4 * j + 4]
        assert np.allclose(block, us[j] if j < 3 else np.eye(4), atol=1e-14)
    off = w.copy()
    for j in range(4):
        off[4 * j : 4 * j + 4, 4 * j : 4 * j + 4] = 0
    assert np.all(off == 0)


def test_select_with_circuit_encodings():
    e = kron_encodings(dilate(np.diag([0.5, 0.25])), dilate(X))
    w = evaluate(select_oracle([e, e], 1))
    assert np.allclose(w[:8, :8], e.matrix(), atol=1e-14)


def test_select_errors():
    with pytest.raises(ValueError, match="pad"):
        select_oracle([dilate(X), dilate(np.diag([0.5, 0.1]))], 1)
    with pytest.raises(ValueError):
        select_oracle([dilate(X)] * 3, 1)


def test_lcu_single_term():
    be = lcu(state_prep_pair([1.0]), [dilate(np.diag([0.5, 0.25]))])
    assert np.allclose(leading_block(be), np.diag([1.0, 0.5]), atol=1e-14)


def test_lcu_pauli_sum():
    be = lcu(state_prep_pair([1, 1]), [dilate(X), dilate(Z)])
    assert be.alpha == 2 and be.a == 1
    assert np.allclose(leading_block(be), (X + Z) / 2, atol=1e-14)
    assert spectral_norm(be.alpha * leading_block(be) - (X + Z)) <= 1e-12


def test_lcu_cancellation():
    be = lcu(state_prep_pair([1, -1]), [dilate(X), dilate(X)])
    assert np.max(np.abs(leading_block(be))) <= 1e-12


def test_lcu_errors():
    with pytest.raises(ValueError):
        lcu(state_prep_pair([1, 1]), [dilate(X), BlockEncoding(X, 2.0, 0, 1)])
    with pytest.raises(ValueError):
        lcu(state_prep_pair([1, 1, 1]), [dilate(X), dilate(Z)])


def _unit_encodings(rng, m, sig):
    out = []
    for _ in range(m):
        a = random_matrix(rng, 2**sig)
        out.append(dilate(a / spectral_norm(a) * rng.uniform(0.3, 1.0), alpha=1.0))
    return out


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_lcu_block_identity(seed, m):
    rng = np.random.default_rng(seed)
    y = random_matrix(rng, m)[0]
    encs = _unit_encodings(rng, m, 1)
    pair = state_prep_pair(y)
    be = lcu(pair, encs)
    w = np.conj(pair.p) * pair.q
    expected = sum(w[j] * leading_block(encs[j]) for j in range(m))
    expected = expected + np.sum(w[m:]) * np.eye(2)
    assert np.max(np.abs(leading_block(be) - expected)) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.floats(0.0, 0.05))
def test_lcu_error_bound(seed, m, eta):
    rng = np.random.default_rng(seed)
    y = random_matrix(rng, m)[0]
    exact = _unit_encodings(rng, m, 1)
    targets = [leading_block(e) for e in exact]
    noisy = []
    for e, t in zip(exact, targets):
        u = perturb_unitary(e.unitary, eta, int(rng.integers(2**32)))
        probe = BlockEncoding(u, 1.0, 1, 1)
        noisy.append(BlockEncoding(u, 1.0, 1, 1, encoding_error(probe, t)))
    clean = state_prep_pair(y)
    p = perturb_unitary(clean.p_unitary, eta, int(rng.integers(2**32)))
    q = perturb_unitary(clean.q_unitary, eta, int(rng.integers(2**32)))
    pair = StatePrepPair(p, q, clean.beta, clean.b, prep_residual(p, q, clean.beta, y), y)
    be = lcu(pair, noisy)
    target = sum(y[j] * targets[j] for j in range(m))
    assert be.eps == pytest.approx(pair.eps + pair.beta * max(e.eps for e in noisy), rel=1e-12)
    assert encoding_error(be, target) <= be.eps + 1e-9


# --- CP-like synthesis ------------------------------------------------------


def test_synthesize_single_pauli():
    be = synthesize_cp(CPLikeSpec([1.0], [[X]]))
    assert (be.alpha, be.a) == (1.0, 1)
    assert encoding_error(be, X) <= 1e-12


def test_synthesize_tfim_two_sites():
    h = np.array([[-1, -2, -2, 0], [-2, 1, 0, -2], [-2, 0, 1, -2], [0, -2, -2, -1]], dtype=complex)
    spec = CPLikeSpec([-1, -2, -2], [[Z, Z], [X, I2], [I2, X]])
    be = synthesize_cp(spec)
    assert be.alpha == 5
    assert encoding_error(be, h) <= 1e-10


def test_synthesize_laplace_like():
    lap = np.diag([2.0, -1.0]).astype(complex)
    spec = CPLikeSpec([1, 1, 1], [[lap, I2, I2], [I2, lap, I2], [I2, I2, lap]])
    diag = [sum(2.0 if (k >> (2 - q)) & 1 == 0 else -1.0 for q in range(3)) for k in range(8)]
    be = synthesize_cp(spec)
    assert be.alpha == pytest.approx(6.0, rel=1e-15)
    assert encoding_error(be, np.diag(diag)) <= 1e-10
    plan = plan_cp(spec)
    assert plan.factor_encodings[0][0] is plan.factor_encodings[1][1] is plan.factor_encodings[2][2]


def test_synthesize_cp_like_generic_path():
    rng = np.random.default_rng(12)
    big = random_matrix(rng, 4)
    spec = CPLikeSpec([0.5, -1j], [[X, random_matrix(rng, 2)], [big]])
    plan = plan_cp(spec)
    assert not plan.uniform
    be = synthesize_cp(spec)
    assert be.a == 1 + 1
    assert encoding_error(be, spec_dense(spec)) <= 1e-10
    assert gate_census(be.unitary)["controlled_swap"] > 0


def test_synthesize_paths_agree():
    rng = np.random.default_rng(5)
    spec = CPLikeSpec([1, 2j, -0.5], [[random_matrix(rng, 2), random_matrix(rng, 4)] for _ in range(3)])
    shared = synthesize_cp(spec)
    generic = synthesize_cp(spec, shared=False)
    assert np.allclose(leading_block(shared), leading_block(generic), atol=1e-12)
    assert encoding_error(shared, spec_dense(spec)) <= 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5))
def test_synthesize_ancilla_count(seed, m):
    rng = np.random.default_rng(seed)
    terms = []
    for _ in range(m):
        # each term on 2 signal qubits: either one 4x4 factor or two 2x2 factors
        if rng.random() < 0.5:
            terms.append([random_matrix(rng, 4) if rng.random() < 0.7 else random_unitary(rng, 4)])
        else:
            terms.append([random_matrix(rng, 2) if rng.random() < 0.5 else random_unitary(rng, 2)
                          for _ in range(2)])
    spec = CPLikeSpec(random_matrix(rng, m)[0], terms)
    be = synthesize_cp(spec)
    per_term = [sum(0 if np.allclose(f.conj().T @ f, np.eye(len(f))) else 1 for f in t) for t in terms]
    assert be.a == max(per_term) + math.ceil(math.log2(m))
    assert encoding_error(be, spec_dense(spec)) <= be.eps + 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.001, 0.05))
def test_cp_pipeline_error_bound(seed, eta):
    """Perturbed factor dilations and prep pair stay within the combined bound."""
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 5))
    y = random_matrix(rng, m)[0]
    factors = [[random_matrix(rng, 2) for _ in range(2)] for _ in range(m)]
    target = sum(y[j] * kron_all(factors[j]) for j in range(m))
    terms = []
    for fs in factors:
        encs = []
        for f in fs:
            be = dilate(f)
            u = perturb_unitary(be.unitary, eta, int(rng.integers(2**32)))
            eps = encoding_error(BlockEncoding(u, be.alpha, 1, 1), f)
            encs.append(BlockEncoding(u, be.alpha, 1, 1, eps))
        terms.append(kron_encodings(*encs))
    alphas = np.array([t.alpha for t in terms])
    units = [BlockEncoding(t.unitary, 1.0, t.a, t.s, t.eps / t.alpha) for t in terms]
    c = y * alphas
    clean = state_prep_pair(c)
    p = perturb_unitary(clean.p_unitary, eta, int(rng.integers(2**32)))
    q = perturb_unitary(clean.q_unitary, eta, int(rng.integers(2**32)))
    pair = StatePrepPair(p, q, clean.beta, clean.b, prep_residual(p, q, clean.beta, c), c)
    be = lcu(pair, units)
    assert encoding_error(be, target) <= pair.eps + pair.beta * max(u.eps for u in units) + 1e-9


def test_shared_select_unitary_factors():
    spec = CPLikeSpec([1, 1], [[X, Z], [Z, X]])
    c = shared_swap_select(spec)
    assert "swap" not in gate_census(c) and "controlled_swap" not in gate_census(c)
    generic, _ = generic_select(plan_cp(spec))
    assert np.allclose(evaluate(c), evaluate(generic), atol=1e-12)


def test_shared_select_dilated_factors():
    rng = np.random.default_rng(31)
    spec = CPLikeSpec([1, -1], [[random_matrix(rng, 2), random_matrix(rng, 2)] for _ in range(2)])
    c = shared_swap_select(spec)
    census = gate_census(c)
    assert census["controlled_swap"] == 0 and census["swap"] == 2
    generic, _ = generic_select(plan_cp(spec))
    assert gate_census(generic)["controlled_swap"] > 0
    assert np.max(np.abs(evaluate(c) - evaluate(generic))) <= 1e-12


def test_shared_select_rejects_nonuniform():
    rng = np.random.default_rng(1)
    spec = CPLikeSpec([1, 1], [[random_matrix(rng, 2), X], [X, random_matrix(rng, 2)]])
    with pytest.raises(ValueError, match="generic"):
        shared_swap_select(spec)


# --- spec validation and JSON -----------------------------------------------


def test_spec_validation_names_term():
    with pytest.raises(SpecError, match="term 1"):
        CPLikeSpec([1, 1], [[X, X], [X]])
    with pytest.raises(SpecError, match="term 0 factor 1"):
        CPLikeSpec([1], [[X, np.eye(3)]])
    with pytest.raises(SpecError):
        CPLikeSpec([1, 1], [[X]])
    with pytest.raises(SpecError):
        CPLikeSpec([np.nan], [[X]])
    with pytest.raises(SpecError):
        CPLikeSpec([], [])


def test_spec_json_round_trip():
    rng = np.random.default_rng(0)
    spec = CPLikeSpec([1 + 2j, -0.5], [[random_matrix(rng, 2), X], [random_matrix(rng, 4)]])
    obj = spec_to_json(spec)
    assert obj["y"][0] == [1.0, 2.0]
    back = spec_from_json(obj)
    assert np.array_equal(back.coefficients, spec.coefficients)
    assert all(np.array_equal(a, b) for ta, tb in zip(spec.terms, back.terms) for a, b in zip(ta, tb))
    assert back.signal_qubits == 2


def test_spec_json_errors():
    with pytest.raises(SpecError):
        spec_from_json({"y": [1]})
    with pytest.raises(SpecError, match="term 0 factor 0"):
        spec_from_json({"y": [1], "terms": [[{"dims": [2, 2], "entries": [[1, 0]]}]]})
    with pytest.raises(SpecError, match="coefficient 0"):
        spec_from_json({"y": [[1, 2, 3]], "terms": [[{"dims": [1, 1], "entries": [[1, 0]]}]]})
