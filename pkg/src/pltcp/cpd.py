"""Tensorization of site-structured operators and complex CP-ALS.

An operator on sites of dimension ``d_1, ..., d_k`` becomes a ``k``-way
tensor whose mode ``i`` has length ``d_i**2``; the mode index of a
(row digit, column digit) pair is ``row * d_i + col``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .numerics import as_matrix, as_tensor

__all__ = [
    "CPModel",
    "OverparameterizedRankWarning",
    "SweepRow",
    "tensorize",
    "detensorize",
    "cp_als",
    "cp_reconstruct",
    "cp_norm",
    "rank_sweep",
    "cp_to_spec",
    "pad_site_matrix",
]

RIDGE = 1e-12


class OverparameterizedRankWarning(UserWarning):
    pass


@dataclass
class CPModel:
    """Weighted CP model; every factor column has unit 2-norm."""

    rank: int
    weights: np.ndarray
    factors: list[np.ndarray]
    iterations: int = 0
    converged: bool = False

    @property
    def mode_dims(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)


@dataclass
class SweepRow:
    rank: int
    best_rel_error: float
    iterations: int
    raw_rel_error: float
    model: CPModel


def _check_sites(site_dims: Sequence[int]) -> list[int]:
    dims = [int(d) for d in site_dims]
    if not dims or any(d < 2 for d in dims):
        raise ValueError(f"site dimensions must all be >= 2, got {dims}")
    return dims


def tensorize(b, site_dims: Sequence[int]) -> np.ndarray:
    b = as_matrix(b, "b")
    dims = _check_sites(site_dims)
    total = int(np.prod(dims))
    if b.shape != (total, total):
        raise ValueError(f"matrix of shape {b.shape} does not match site dims {dims}")
    k = len(dims)
    t = b.reshape(dims + dims)
    order = [ax for site in range(k) for ax in (site, k + site)]
    return t.transpose(order).reshape([d * d for d in dims])


def detensorize(t, site_dims: Sequence[int]) -> np.ndarray:
    t = as_tensor(t)
    dims = _check_sites(site_dims)
    if t.shape != tuple(d * d for d in dims):
        raise ValueError(f"tensor of shape {t.shape} does not match site dims {dims}")
    k = len(dims)
    split = t.reshape([x for d in dims for x in (d, d)])
    order = [2 * site for site in range(k)] + [2 * site + 1 for site in range(k)]
    total = int(np.prod(dims))
    return split.transpose(order).reshape(total, total)


def cp_reconstruct(model: CPModel) -> np.ndarray:
    scaled = [model.factors[0] * model.weights[None, :]] + list(model.factors[1:])
    out = scaled[0]
    for f in scaled[1:]:
        out = np.einsum("...z,iz->...iz", out, f)
    return out.sum(axis=-1)


def cp_norm(model: CPModel) -> float:
    """Frobenius norm of the reconstruction from factor Gram matrices."""
    gram = np.outer(model.weights, model.weights).astype(np.complex128)
    for f in model.factors:
        gram *= f.T @ f.conj()
    return float(np.sqrt(max(gram.sum().real, 0.0)))


def _contract(x: np.ndarray, present: list[int], factors, modes: list[int], rank: int):
    """Contract the listed modes of ``x`` against conjugated factor columns.

    ``x`` carries the tensor modes ``present`` in order, optionally followed
    by a trailing rank axis (``len(present) + 1 == x.ndim``). Returns the
    partially contracted array (with a rank axis) and its remaining modes.
    """
    has_rank = x.ndim == len(present) + 1
    present = list(present)
    for m in sorted(modes, reverse=True):
        ax = present.index(m)
        fc = factors[m].conj()
        if not has_rank:
            x = np.tensordot(x, fc, axes=([ax], [0]))
            has_rank = True
        else:
            x = np.moveaxis(x, ax, -2)
            x = np.einsum("...iz,iz->...z", x, fc)
        present.pop(ax)
    if not has_rank:
        x = np.repeat(x[..., None], rank, axis=-1)
    return x, present


def _hadamard_gram(factors, skip: Optional[int], rank: int) -> np.ndarray:
    g = np.ones((rank, rank), dtype=np.complex128)
    for k, f in enumerate(factors):
        if k != skip:
            g *= f.T @ f.conj()
    return g


def _solve_mode(mttkrp: np.ndarray, gram: np.ndarray) -> np.ndarray:
    rank = gram.shape[0]
    ridge = RIDGE * max(np.trace(gram).real / rank, np.finfo(float).tiny)
    g = gram + ridge * np.eye(rank)
    return np.linalg.solve(g.T, mttkrp.T).T


def _normalize(factors: list[np.ndarray]) -> tuple[np.ndarray, list[np.ndarray]]:
    rank = factors[0].shape[1]
    weights = np.ones(rank)
    out = []
    for f in factors:
        norms = np.linalg.norm(f, axis=0)
        safe = np.where(norms > 0, norms, 1.0)
        out.append(f / safe[None, :])
        weights *= norms
    return weights, out


def _gram_error(t_norm: float, factors, mttkrp: np.ndarray, mode: int, rank: int) -> float:
    """Relative error from the expansion ``||T||^2 + ||T^||^2 - 2 Re<T^, T>``."""
    gram_all = _hadamard_gram(factors, None, rank)
    inner = np.sum(factors[mode].conj() * mttkrp).real
    return float(np.sqrt(max(t_norm**2 + gram_all.sum().real - 2.0 * inner, 0.0)) / t_norm)


def cp_als(
    t,
    rank: int,
    max_iters: int = 500,
    tol: float = 1e-10,
    seed: int = 0,
    line_search: bool = True,
) -> tuple[CPModel, float]:
    """Fit a rank-``rank`` CP model by alternating least squares.

    Each sweep updates every mode through the normal equations (ridge 1e-12
    relative to the Gram trace). MTTKRPs use a two-level dimension tree. The
    sweep loop stops when the Gram-based error estimate changes by less than
    ``tol``; the returned relative error is from the explicit residual.

    With ``line_search`` each sweep is followed by an extrapolation step
    ``F + (it**(1/k)) * (F - F_prev)``, accepted only when it lowers the
    error; ``k`` grows by one after every rejection.
    """
    t = as_tensor(t)
    if rank < 1:
        raise ValueError("rank must be >= 1")
    norm_t = float(np.linalg.norm(t))
    if norm_t == 0.0:
        raise ValueError("cannot decompose the zero tensor")
    dims = list(t.shape)
    n_modes = len(dims)
    if n_modes > 1 and rank > int(np.prod(sorted(dims)[:-1])):
        warnings.warn(
            f"rank {rank} exceeds the product of all but the largest mode dimension",
            OverparameterizedRankWarning,
            stacklevel=2,
        )

    rng = np.random.default_rng(seed)
    factors = [rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank)) for d in dims]
    half = max(1, n_modes // 2)
    left, right = list(range(half)), list(range(half, n_modes))
    all_modes = list(range(n_modes))

    prev = np.inf
    converged = False
    iters = 0
    ls_exp = 3.0
    previous = None
    for iters in range(1, max_iters + 1):
        last_m = None
        for group, other in ((left, right), (right, left)):
            if not group:
                continue
            partial, present = _contract(t, all_modes, factors, other, rank)
            for n in group:
                m, _ = _contract(partial, present, factors, [k for k in group if k != n], rank)
                factors[n] = _solve_mode(m, _hadamard_gram(factors, n, rank))
                last_m, last_n = m, n
        est = _gram_error(norm_t, factors, last_m, last_n, rank)
        if line_search and previous is not None:
            jump = iters ** (1.0 / ls_exp)
            trial = [f + jump * (f - g) for f, g in zip(factors, previous)]
            m0, _ = _contract(t, all_modes, trial, all_modes[1:], rank)
            trial_est = _gram_error(norm_t, trial, m0, 0, rank)
            if trial_est < est:
                factors, est = trial, trial_est
            else:
                ls_exp += 1.0
        if line_search:
            previous = [f.copy() for f in factors]
        if abs(prev - est) < tol:
            converged = True
            break
        prev = est

    weights, unit = _normalize(factors)
    model = CPModel(rank, weights, unit, iterations=iters, converged=converged)
    rel = float(np.linalg.norm(t - cp_reconstruct(model)) / norm_t)
    return model, rel


def _restart_seed(seed: int, rank: int, restart: int) -> int:
    ss = np.random.SeedSequence([int(seed), int(rank), int(restart)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _pad_model(model: CPModel, rank: int) -> CPModel:
    extra = rank - model.rank
    factors = []
    for f in model.factors:
        col = np.zeros((f.shape[0], extra), dtype=np.complex128)
        col[0, :] = 1.0
        factors.append(np.hstack([f, col]))
    weights = np.concatenate([model.weights, np.zeros(extra)])
    return CPModel(rank, weights, factors, model.iterations, model.converged)


def rank_sweep(
    t,
    ranks: Sequence[int],
    restarts: int = 20,
    seed: int = 0,
    max_iters: int = 500,
    tol: float = 1e-10,
    line_search: bool = True,
) -> list[SweepRow]:
    """Best-of-``restarts`` CP-ALS error for each rank.

    ``best_rel_error`` is made nonincreasing in rank: when a smaller rank
    already did better, its model is reused with zero-weight padding
    columns. ``raw_rel_error`` keeps the unadjusted best of the restarts.
    """
    if not ranks:
        raise ValueError("ranks must be non-empty")
    rows: list[SweepRow] = []
    best_so_far: Optional[SweepRow] = None
    for rank in sorted(int(r) for r in ranks):
        best = None
        for restart in range(restarts):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", OverparameterizedRankWarning)
                model, err = cp_als(t, rank, max_iters, tol, _restart_seed(seed, rank, restart), line_search)
            # strict comparison keeps the lowest restart index on ties
            if best is None or err < best[1]:
                best = (model, err)
        model, err = best
        row = SweepRow(rank, err, model.iterations, err, model)
        if best_so_far is not None and best_so_far.best_rel_error < err:
            row = SweepRow(rank, best_so_far.best_rel_error, best_so_far.iterations, err,
                           _pad_model(best_so_far.model, rank))
        rows.append(row)
        best_so_far = row
    return rows


def pad_site_matrix(m: np.ndarray, size: int) -> np.ndarray:
    """Zero-pad a site operator to ``size x size``; padded levels come last."""
    m = as_matrix(m)
    out = np.zeros((size, size), dtype=np.complex128)
    out[: m.shape[0], : m.shape[1]] = m
    return out


def cp_to_spec(model: CPModel, site_dims: Sequence[int]):
    """Turn each nonzero-weight CP term into one Kronecker term.

    Sites whose dimension is not a power of two are zero-padded up to the
    next power of two.
    """
    from .combine import CPLikeSpec

    dims = _check_sites(site_dims)
    if model.mode_dims != tuple(d * d for d in dims):
        raise ValueError(f"model mode dims {model.mode_dims} do not match site dims {dims}")
    padded = [1 << (d - 1).bit_length() for d in dims]
    coeffs, terms = [], []
    for j in range(model.rank):
        if model.weights[j] == 0.0:
            continue
        term = []
        for k, d in enumerate(dims):
            site = model.factors[k][:, j].reshape(d, d)
            term.append(site if padded[k] == d else pad_site_matrix(site, padded[k]))
        coeffs.append(model.weights[j])
        terms.append(term)
    if not terms:
        raise ValueError("model has no nonzero-weight terms")
    return CPLikeSpec(np.asarray(coeffs, dtype=np.complex128), terms)
