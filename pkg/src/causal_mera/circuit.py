"""Gates on named wires and dense evaluation of the circuits they form.

Each wire name is produced at most once (a gate output or a circuit input)
and consumed at most once, so a circuit is a tensor network that ``einsum``
evaluates in one call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Gate:
    """An operator from ``inputs`` wires to ``outputs`` wires.

    ``matrix`` has shape ``(prod(out_dims), prod(in_dims))`` with the wires in
    the listed order, first wire most significant.
    """

    name: str
    matrix: np.ndarray
    outputs: tuple
    inputs: tuple
    out_dims: tuple
    in_dims: tuple

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        for attr in ("outputs", "inputs", "out_dims", "in_dims"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        if m.shape != (math.prod(self.out_dims), math.prod(self.in_dims)):
            raise ValueError(f"gate {self.name}: matrix shape {m.shape} does not match wire dims")

    @classmethod
    def uniform(cls, name, matrix, outputs, inputs, chi: int) -> Gate:
        return cls(name, matrix, outputs, inputs, (chi,) * len(outputs), (chi,) * len(inputs))

    def tensor(self) -> np.ndarray:
        return self.matrix.reshape(self.out_dims + self.in_dims)

    def with_matrix(self, matrix) -> Gate:
        return Gate(self.name, matrix, self.outputs, self.inputs, self.out_dims, self.in_dims)


def _wire_ids(gates: Sequence[Gate], in_wires, out_wires):
    ids: dict = {}
    dims: dict = {}

    def wid(w, d):
        if w not in ids:
            ids[w] = len(ids)
            dims[w] = d
        elif dims[w] != d:
            raise ValueError(f"wire {w!r} used with dimensions {dims[w]} and {d}")
        return ids[w]

    subs = []
    produced = set(in_wires)
    consumed = set()
    for g in gates:
        for w in g.inputs:
            if w in consumed:
                raise ValueError(f"wire {w!r} consumed twice")
            if w not in produced:
                raise ValueError(f"gate {g.name} reads wire {w!r} before it exists")
            consumed.add(w)
        for w in g.outputs:
            if w in produced:
                raise ValueError(f"wire {w!r} produced twice")
            produced.add(w)
        subs.append([wid(w, d) for w, d in zip(g.outputs, g.out_dims)] + [wid(w, d) for w, d in zip(g.inputs, g.in_dims)])
    open_wires = produced - consumed
    if open_wires != set(out_wires):
        raise ValueError(f"circuit outputs {sorted(map(str, open_wires))} differ from requested")
    if len(ids) > 52:
        raise ValueError("circuit too large for einsum")
    return ids, dims, subs


def evaluate(gates: Sequence[Gate], in_wires: Sequence, out_wires: Sequence) -> np.ndarray:
    """Dense matrix of the circuit, rows ordered by ``out_wires``, columns by ``in_wires``."""
    ids, dims, subs = _wire_ids(gates, in_wires, out_wires)
    operands = []
    for g, s in zip(gates, subs):
        operands += [g.tensor(), s]
    out_sub = [ids[w] for w in out_wires] + [ids[w] for w in in_wires]
    t = np.einsum(*operands, out_sub, optimize="greedy")
    d_out = math.prod(dims[w] for w in out_wires)
    return t.reshape(d_out, -1)


class OverlapEnvironments:
    """Environments of ``Re tr(target^dagger C(gates))`` with respect to each gate.

    The contraction paths are computed once and reused, since the same network
    is contracted many times during a fit.
    """

    def __init__(self, gates: Sequence[Gate], in_wires, out_wires, target: np.ndarray):
        self.ids, self.dims, self.subs = _wire_ids(gates, in_wires, out_wires)
        self.target_sub = [self.ids[w] for w in out_wires] + [self.ids[w] for w in in_wires]
        shape = [self.dims[w] for w in out_wires] + [self.dims[w] for w in in_wires]
        self.target_conj = np.asarray(target).conj().reshape(shape)
        self.paths: dict[int, list] = {}

    def environment(self, gates: Sequence[Gate], k: int) -> np.ndarray:
        """Matrix ``N`` with ``overlap = sum(N * gates[k].matrix)``."""
        operands = [self.target_conj, self.target_sub]
        for j, (g, s) in enumerate(zip(gates, self.subs)):
            if j != k:
                operands += [g.tensor(), s]
        if k not in self.paths:
            self.paths[k] = np.einsum_path(*operands, self.subs[k], optimize="greedy")[0]
        env = np.einsum(*operands, self.subs[k], optimize=self.paths[k])
        return env.reshape(gates[k].matrix.shape)


def polar_isometry(a: np.ndarray) -> np.ndarray:
    """Isometry ``P`` maximizing ``Re tr(a^dagger P)``."""
    u, _, vh = np.linalg.svd(a, full_matrices=False)
    return u @ vh
