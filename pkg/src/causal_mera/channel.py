"""Quantum channels in Kraus form and the causality verifier."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .tensor_core import (
    DEFAULT_TOL,
    IsometryMap,
    Layout,
    check_layout,
    embed_operator,
    gell_mann_basis,
    is_isometry,
    partial_trace,
)

# Dimension budget for is_causal, d_in * d_out <= 2**12.
MAX_CAUSAL_DIM = 2**12


class LayoutMismatch(ValueError):
    pass


@dataclass(frozen=True)
class QuantumChannel:
    """Trace-preserving map ``rho -> sum_k K rho K^dagger``."""

    kraus: tuple
    in_layout: Layout
    out_layout: Layout

    def __post_init__(self):
        ks = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not ks:
            raise ValueError("a channel needs at least one Kraus operator")
        shape = ks[0].shape
        if len(shape) != 2 or any(k.shape != shape for k in ks):
            raise ValueError("Kraus operators must be equal-shaped matrices")
        object.__setattr__(self, "kraus", ks)
        object.__setattr__(self, "in_layout", check_layout(self.in_layout, shape[1]))
        object.__setattr__(self, "out_layout", check_layout(self.out_layout, shape[0]))
        tp = sum(k.conj().T @ k for k in ks)
        err = np.max(np.abs(tp - np.eye(shape[1])))
        if err > 1e-10:
            raise ValueError(f"Kraus operators are not trace preserving (residual {err:.2e})")

    @property
    def d_in(self) -> int:
        return self.kraus[0].shape[1]

    @property
    def d_out(self) -> int:
        return self.kraus[0].shape[0]


def isometry_channel(v: IsometryMap) -> QuantumChannel:
    check = is_isometry(v.matrix, 1e-10)
    if not check.ok:
        raise ValueError(f"input is not an isometry (residual {check.residual:.2e})")
    return QuantumChannel((v.matrix,), v.in_layout, v.out_layout)


def compose(first: QuantumChannel, second: QuantumChannel) -> QuantumChannel:
    """Channel applying ``first`` then ``second``."""
    if first.d_out != second.d_in:
        raise LayoutMismatch("output of the first channel must feed the second")
    ks = [b @ a for a in first.kraus for b in second.kraus]
    return QuantumChannel(ks, first.in_layout, second.out_layout)


def heisenberg_dual(c: QuantumChannel, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (c.d_out, c.d_out):
        raise ValueError(f"observable must be {c.d_out}x{c.d_out}, got {x.shape}")
    return sum(k.conj().T @ x @ k for k in c.kraus)


def apply(c: QuantumChannel, rho) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (c.d_in, c.d_in):
        raise ValueError(f"state must be {c.d_in}x{c.d_in}, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-8 or abs(np.trace(rho) - 1) > 1e-8:
        raise ValueError("invalid state: density matrices are Hermitian with unit trace")
    return sum(k @ rho @ k.conj().T for k in c.kraus)


def choi(c: QuantumChannel) -> np.ndarray:
    """``(E (x) id)(|Phi><Phi|)`` with the output factor first.

    Row-major vectorization of a Kraus operator is exactly ``(K (x) 1)|Phi>``.
    """
    vecs = np.stack([k.reshape(-1) for k in c.kraus], axis=1)
    return vecs @ vecs.conj().T


def choi_rank(c: QuantumChannel, rank_tol: float = 1e-12) -> int:
    return int(np.sum(np.linalg.eigvalsh(choi(c)) > rank_tol))


def minimal_kraus(c: QuantumChannel, rank_tol: float = 1e-12) -> list[np.ndarray]:
    """Kraus operators from the Choi eigenvectors above ``rank_tol`` (largest first)."""
    evals, evecs = np.linalg.eigh(choi(c))
    order = np.argsort(evals)[::-1]
    return [
        np.sqrt(evals[i]) * evecs[:, i].reshape(c.d_out, c.d_in)
        for i in order
        if evals[i] > rank_tol
    ]


def minimal_stinespring(c: QuantumChannel, rank_tol: float = 1e-12, env_label="env"):
    """Minimal Stinespring isometry ``V: in -> out (x) env``.

    Returns:
        ``(V, d_env)``; ``V`` is an :class:`IsometryMap` whose output layout is
        the channel's output layout followed by ``(env_label, d_env)``.
    """
    ks = minimal_kraus(c, rank_tol)
    d_env = len(ks)
    # V[(o, e), i] = K_e[o, i]
    v = np.stack(ks, axis=1).reshape(c.d_out * d_env, c.d_in)
    out_layout = tuple(c.out_layout) + ((env_label, d_env),)
    return IsometryMap(v, c.in_layout, out_layout), d_env


@dataclass
class CausalityReport:
    causal: bool
    residuals: dict = field(default_factory=dict)  # (input, output) -> max residual

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    def to_json(self) -> dict:
        return {
            "causal": self.causal,
            "max_residual": self.max_residual,
            "pairs": [
                {"input": str(i), "output": str(o), "residual": r}
                for (i, o), r in sorted(self.residuals.items(), key=lambda kv: (str(kv[0][0]), str(kv[0][1])))
            ],
        }


@dataclass(frozen=True)
class CausalRelation:
    """Bipartite graph of allowed (input vertex, output vertex) pairs."""

    inputs: Layout
    outputs: Layout
    allowed: frozenset

    def __post_init__(self):
        object.__setattr__(self, "inputs", check_layout(self.inputs))
        object.__setattr__(self, "outputs", check_layout(self.outputs))
        ins = {v for v, _ in self.inputs}
        outs = {v for v, _ in self.outputs}
        allowed = frozenset((i, o) for i, o in self.allowed)
        for i, o in allowed:
            if i not in ins or o not in outs:
                raise ValueError(f"pair ({i!r}, {o!r}) references a missing vertex")
        object.__setattr__(self, "allowed", allowed)

    @property
    def input_vertices(self) -> list:
        return [v for v, _ in self.inputs]

    @property
    def output_vertices(self) -> list:
        return [v for v, _ in self.outputs]

    def forbidden(self) -> list[tuple]:
        return [
            (i, o)
            for i in self.input_vertices
            for o in self.output_vertices
            if (i, o) not in self.allowed
        ]

    def children(self, i) -> list:
        return [o for o in self.output_vertices if (i, o) in self.allowed]

    def parents(self, o) -> list:
        return [i for i in self.input_vertices if (i, o) in self.allowed]

    def sorted_pairs(self) -> list[tuple]:
        return sorted(self.allowed, key=lambda p: (str(p[0]), str(p[1])))

    def without(self, pair) -> CausalRelation:
        return CausalRelation(self.inputs, self.outputs, self.allowed - {tuple(pair)})

    def with_pairs(self, pairs: Iterable) -> CausalRelation:
        return CausalRelation(self.inputs, self.outputs, self.allowed | {tuple(p) for p in pairs})


def _pair_residual(c: QuantumChannel, layout_in: Layout, layout_out: Layout, i, j) -> float:
    d_j = dict(layout_out)[j]
    d_i = dict(layout_in)[i]
    others = [v for v, _ in layout_in if v != i]
    worst = 0.0
    for x in gell_mann_basis(d_j)[1:]:
        y = heisenberg_dual(c, embed_operator(x, layout_out, [j]))
        reduced = partial_trace(y, layout_in, others) / d_i
        trivial = embed_operator(reduced, layout_in, others) if others else reduced * np.eye(d_i)
        worst = max(worst, float(np.max(np.abs(y - trivial))))
    return worst


def is_causal(c: QuantumChannel, r: CausalRelation, tol: float = DEFAULT_TOL) -> CausalityReport:
    """Check that no forbidden pair carries information.

    For each forbidden ``(i, j)`` every Gell-Mann observable on output ``j`` is
    pulled back through the dual channel; the result must act as the identity
    on input ``i``.  The residual of a pair is the largest max-norm deviation
    from ``(tr_i Y)/d_i (x) 1_i``.
    """
    if tuple(r.inputs) != tuple(c.in_layout) or tuple(r.outputs) != tuple(c.out_layout):
        raise LayoutMismatch("channel and relation layouts differ")
    if c.d_in * c.d_out > MAX_CAUSAL_DIM:
        raise ValueError(
            f"is_causal limited to d_in*d_out <= {MAX_CAUSAL_DIM}, got {c.d_in * c.d_out}"
        )
    residuals = {
        (i, j): _pair_residual(c, c.in_layout, c.out_layout, i, j) for i, j in r.forbidden()
    }
    return CausalityReport(all(v <= tol for v in residuals.values()), residuals)


def depolarizing(d: int = 2, layout: Layout | None = None) -> QuantumChannel:
    """Completely depolarizing channel ``rho -> tr(rho) 1/d``."""
    ks = []
    for a in range(d):
        for b in range(d):
            k = np.zeros((d, d), dtype=complex)
            k[a, b] = 1 / math.sqrt(d)
            ks.append(k)
    layout = layout or (("q", d),)
    return QuantumChannel(ks, layout, layout)
