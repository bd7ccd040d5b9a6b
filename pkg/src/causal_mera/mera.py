"""Binary and ternary MERA on periodic rings.

Site conventions for one step from ``n`` coarse sites to ``N = a*n`` fine
sites (indices mod ``N``):

* binary: isometry ``w_k`` maps coarse ``k`` to fine ``(2k, 2k+1)``, then the
  disentangler ``u_k`` acts on ``(2k+1, 2k+2)``;
* ternary: ``w_k`` maps coarse ``k`` to ``(3k-1, 3k, 3k+1)``, then ``u_k``
  acts on the seam ``(3k+1, 3k+2)``.

Coarse site ``k`` therefore influences fine ``2k-1 .. 2k+2`` (binary) or
``3k-2 .. 3k+2`` (ternary).  Wire names: coarse inputs ``c{k}``, fine outputs
``f{j}``, wires between an isometry and a disentangler ``bond{j}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import CausalRelation
from .circuit import Gate, evaluate
from .tensor_core import IsometryMap, is_isometry, make_rng, random_isometry

FACTOR = {"binary": 2, "ternary": 3}
BRUTE_FORCE_MAX_DIM = 2**12
MAX_CONE_WIDTH = {"binary": 3, "ternary": 2}


@dataclass(frozen=True)
class MeraSpec:
    """Shape of a MERA.

    ``n_coarse`` is the size of the top lattice; each of the ``layers`` steps
    multiplies the lattice size by 2 (binary) or 3 (ternary).  For a single
    step ``layers`` is 1 and ``n_coarse`` is that step's coarse lattice.
    """

    kind: str
    n_coarse: int
    chi: int = 2
    layers: int = 1

    def __post_init__(self):
        if self.kind not in FACTOR:
            raise ValueError(f"kind must be 'binary' or 'ternary', got {self.kind!r}")
        if self.n_coarse < 2:
            raise ValueError("need at least 2 coarse sites")
        if self.chi < 1 or self.layers < 1:
            raise ValueError("chi and layers must be positive")

    @property
    def factor(self) -> int:
        return FACTOR[self.kind]

    @property
    def n_fine(self) -> int:
        return self.n_coarse * self.factor**self.layers

    def lattice_size(self, level: int) -> int:
        """Sites at ``level`` (0 = finest, ``layers`` = top)."""
        return self.n_coarse * self.factor ** (self.layers - level)

    def step(self, level: int) -> MeraSpec:
        """Spec of the single step producing lattice ``level`` from ``level + 1``."""
        return MeraSpec(self.kind, self.lattice_size(level + 1), self.chi, 1)


# --- wiring ------------------------------------------------------------------


def isometry_sites(kind: str, k: int, n_fine: int) -> list[int]:
    if kind == "binary":
        return [2 * k % n_fine, (2 * k + 1) % n_fine]
    return [(3 * k - 1) % n_fine, 3 * k % n_fine, (3 * k + 1) % n_fine]


def disentangler_sites(kind: str, k: int, n_fine: int) -> list[int]:
    if kind == "binary":
        return [(2 * k + 1) % n_fine, (2 * k + 2) % n_fine]
    return [(3 * k + 1) % n_fine, (3 * k + 2) % n_fine]


def _relation(kind: str, n_coarse: int, chi: int) -> CausalRelation:
    if n_coarse < 2:
        raise ValueError("need at least 2 coarse sites")
    a = FACTOR[kind]
    n_fine = a * n_coarse
    offsets = range(-1, 3) if kind == "binary" else range(-2, 3)
    allowed = {(f"c{i}", f"f{(a * i + o) % n_fine}") for i in range(n_coarse) for o in offsets}
    return CausalRelation(
        tuple((f"c{i}", chi) for i in range(n_coarse)),
        tuple((f"f{j}", chi) for j in range(n_fine)),
        frozenset(allowed),
    )


def binary_relation(n_coarse: int, chi: int = 2) -> CausalRelation:
    """Coarse ``i`` may reach fine ``2i-1, 2i, 2i+1, 2i+2`` (mod ``2n``)."""
    return _relation("binary", n_coarse, chi)


def ternary_relation(n_coarse: int, chi: int = 2) -> CausalRelation:
    """Coarse ``i`` may reach fine ``3i-2 .. 3i+2`` (mod ``3n``)."""
    return _relation("ternary", n_coarse, chi)


def relation_for(spec: MeraSpec) -> CausalRelation:
    return _relation(spec.kind, spec.n_coarse, spec.chi)


def step_wires(spec: MeraSpec):
    """``(in_wires, out_wires)`` of one step."""
    n_fine = spec.factor * spec.n_coarse
    return [f"c{k}" for k in range(spec.n_coarse)], [f"f{j}" for j in range(n_fine)]


def step_circuit(
    spec: MeraSpec,
    isometries: Sequence[np.ndarray],
    disentanglers: Sequence[np.ndarray],
    bond_dims: dict | None = None,
) -> list[Gate]:
    """Gates of one step; ``bond_dims`` overrides the dimension of ``bond{j}`` wires."""
    n, chi, kind = spec.n_coarse, spec.chi, spec.kind
    n_fine = spec.factor * n
    if len(isometries) != n or len(disentanglers) != n:
        raise ValueError(f"expected {n} isometries and {n} disentanglers")
    bond_dims = bond_dims or {}
    middle = {3 * k % n_fine for k in range(n)} if kind == "ternary" else set()

    def wire(j):
        return f"f{j}" if j in middle else f"bond{j}"

    def dim(w):
        return bond_dims.get(w, chi)

    gates = []
    for k, w in enumerate(isometries):
        outs = [wire(j) for j in isometry_sites(kind, k, n_fine)]
        gates.append(Gate(f"w{k}", w, outs, [f"c{k}"], [dim(o) for o in outs], [chi]))
    for k, u in enumerate(disentanglers):
        sites = disentangler_sites(kind, k, n_fine)
        ins = [f"bond{j}" for j in sites]
        gates.append(Gate(f"u{k}", u, [f"f{j}" for j in sites], ins, [chi, chi], [dim(i) for i in ins]))
    return gates


def assemble_step(spec: MeraSpec, isometries, disentanglers, check: bool = True) -> IsometryMap:
    """Dense isometry ``chi^n -> chi^(a n)`` of one MERA step."""
    n_out = spec.factor
    for w in isometries:
        if np.shape(w) != (spec.chi**n_out, spec.chi):
            raise ValueError(f"isometry shape {np.shape(w)} != {(spec.chi**n_out, spec.chi)}")
    for u in disentanglers:
        if np.shape(u) != (spec.chi**2, spec.chi**2):
            raise ValueError(f"disentangler shape {np.shape(u)} != {(spec.chi**2,) * 2}")
    if check:
        for g in list(isometries) + list(disentanglers):
            res = is_isometry(g, 1e-10)
            if not res.ok:
                raise ValueError(f"non-isometric gate (residual {res.residual:.2e})")
    gates = step_circuit(spec, isometries, disentanglers)
    in_wires, out_wires = step_wires(spec)
    m = evaluate(gates, in_wires, out_wires)
    return IsometryMap(m, tuple((w, spec.chi) for w in in_wires), tuple((w, spec.chi) for w in out_wires))


def random_step_gates(spec: MeraSpec, seed=None):
    rng = make_rng(seed)
    ws = [random_isometry(spec.chi, spec.chi**spec.factor, rng) for _ in range(spec.n_coarse)]
    us = [random_isometry(spec.chi**2, spec.chi**2, rng) for _ in range(spec.n_coarse)]
    return ws, us


# --- networks ----------------------------------------------------------------


@dataclass
class MeraNetwork:
    """``steps[l]`` maps lattice ``l+1`` to lattice ``l``; ``top`` lives on lattice ``layers``."""

    spec: MeraSpec
    steps: list = field(default_factory=list)  # [(isometries, disentanglers)]
    top: np.ndarray = None

    def __post_init__(self):
        if len(self.steps) != self.spec.layers:
            raise ValueError(f"expected {self.spec.layers} steps, got {len(self.steps)}")
        top = np.asarray(self.top, dtype=complex).reshape(-1)
        if top.size != self.spec.chi**self.spec.n_coarse:
            raise ValueError("top state has the wrong dimension")
        if abs(np.linalg.norm(top) - 1) > 1e-12:
            raise ValueError("top state must be normalized")
        self.top = top
        for level, (ws, us) in enumerate(self.steps):
            n = self.spec.lattice_size(level + 1)
            if len(ws) != n or len(us) != n:
                raise ValueError(f"step {level} needs {n} isometries and disentanglers")
            for g in list(ws) + list(us):
                if not is_isometry(g, 1e-10).ok:
                    raise ValueError(f"non-isometric gate in step {level}")


def random_network(spec: MeraSpec, seed=None) -> MeraNetwork:
    """Haar-random gates and top state, deterministic for a given seed."""
    rng = make_rng(seed)
    steps = []
    for level in range(spec.layers):
        steps.append(random_step_gates(spec.step(level), rng))
    top = random_isometry(1, spec.chi**spec.n_coarse, rng)[:, 0]
    return MeraNetwork(spec, steps, top)


def full_state(net: MeraNetwork) -> np.ndarray:
    spec = net.spec
    if spec.chi**spec.n_fine > BRUTE_FORCE_MAX_DIM:
        raise ValueError(f"fine dimension {spec.chi}^{spec.n_fine} exceeds brute-force limit")
    psi = net.top
    for level in reversed(range(spec.layers)):
        ws, us = net.steps[level]
        psi = assemble_step(spec.step(level), ws, us, check=False).matrix @ psi
    return psi


def _region_sites(first: int, width: int, n: int) -> list[int]:
    if width < 1 or width > n:
        raise ValueError("region width out of range")
    return [(first + j) % n for j in range(width)]


def _as_matrix(observable, width: int, chi: int) -> np.ndarray:
    obs = getattr(observable, "data", observable)
    obs = np.asarray(obs, dtype=complex)
    d = chi**width
    if obs.size != d * d:
        raise ValueError(f"observable must act on {width} sites of dimension {chi}")
    return obs.reshape(d, d)


def _width_of(observable, chi: int) -> int:
    obs = np.asarray(getattr(observable, "data", observable))
    d = int(round(math.sqrt(obs.size)))
    width = round(math.log(d, chi)) if chi > 1 else 1
    if chi**width != d:
        raise ValueError("observable dimension is not a power of chi")
    return width


def expectation_bruteforce(net: MeraNetwork, observable, first_site: int) -> complex:
    """Contract the whole network into a state vector and evaluate directly."""
    spec = net.spec
    psi = full_state(net)
    width = _width_of(observable, spec.chi)
    sites = _region_sites(first_site, width, spec.n_fine)
    obs = _as_matrix(observable, width, spec.chi).reshape((spec.chi,) * (2 * width))
    t = psi.reshape((spec.chi,) * spec.n_fine)
    n = spec.n_fine
    rows = list(range(n))
    cols = list(range(n))
    new = list(range(n, n + width))
    for j, s in enumerate(sites):
        cols[s] = new[j]
    value = np.einsum(t.conj(), rows, obs, [rows[s] for s in sites] + new, t, cols, [])
    return complex(value)


# --- causal cones --------------------------------------------------------------


class _LocalOperator:
    """Operator on a list of sites; axes are all rows (site order) then all columns."""

    def __init__(self, data: np.ndarray, sites: list, chi: int):
        self.sites = list(sites)
        self.chi = chi
        m = len(self.sites)
        self.data = np.asarray(data, dtype=complex).reshape((chi,) * (2 * m))

    @property
    def m(self) -> int:
        return len(self.sites)

    def ensure(self, sites):
        for s in sites:
            if s in self.sites:
                continue
            m = self.m
            t = np.multiply.outer(self.data, np.eye(self.chi))
            perm = list(range(m)) + [2 * m] + list(range(m, 2 * m)) + [2 * m + 1]
            self.data = t.transpose(perm)
            self.sites.append(s)

    def conjugate(self, gate: np.ndarray, gate_sites: Sequence, heisenberg: bool):
        """``g^dagger O g`` (Heisenberg) or ``g O g^dagger`` on ``gate_sites``."""
        m = self.m
        k = len(gate_sites)
        pos = [self.sites.index(s) for s in gate_sites]
        g = np.asarray(gate).reshape((self.chi,) * (2 * k))
        rows = list(range(m))
        cols = list(range(m, 2 * m))
        new_r = list(range(2 * m, 2 * m + k))
        new_c = list(range(2 * m + k, 2 * m + 2 * k))
        out_rows, out_cols = rows[:], cols[:]
        for j, p in enumerate(pos):
            out_rows[p] = new_r[j]
            out_cols[p] = new_c[j]
        if heisenberg:
            left, right = g.conj(), g
            left_sub = [rows[p] for p in pos] + new_r
            right_sub = [cols[p] for p in pos] + new_c
        else:
            left, right = g, g.conj()
            left_sub = new_r + [rows[p] for p in pos]
            right_sub = new_c + [cols[p] for p in pos]
        self.data = np.einsum(left, left_sub, self.data, rows + cols, right, right_sub, out_rows + out_cols)

    def pull_isometry(self, w: np.ndarray, out_sites: Sequence, new_site):
        """Heisenberg pull through ``w``: replace ``out_sites`` by ``new_site``."""
        m = self.m
        pos = [self.sites.index(s) for s in out_sites]
        k = len(pos)
        wt = np.asarray(w).reshape((self.chi,) * (k + 1))
        rows = list(range(m))
        cols = list(range(m, 2 * m))
        nr, nc = 2 * m, 2 * m + 1
        keep = [i for i in range(m) if i not in pos]
        out = [rows[i] for i in keep] + [nr] + [cols[i] for i in keep] + [nc]
        self.data = np.einsum(
            wt.conj(), [rows[p] for p in pos] + [nr],
            self.data, rows + cols,
            wt, [cols[p] for p in pos] + [nc],
            out,
        )
        self.sites = [self.sites[i] for i in keep] + [new_site]

    def push_isometry(self, w: np.ndarray, out_sites: Sequence, old_site):
        """Schrodinger push ``w rho w^dagger``: replace ``old_site`` by ``out_sites``."""
        m = self.m
        p = self.sites.index(old_site)
        k = len(out_sites)
        wt = np.asarray(w).reshape((self.chi,) * (k + 1))
        rows = list(range(m))
        cols = list(range(m, 2 * m))
        nr = list(range(2 * m, 2 * m + k))
        nc = list(range(2 * m + k, 2 * m + 2 * k))
        keep = [i for i in range(m) if i != p]
        out = [rows[i] for i in keep] + nr + [cols[i] for i in keep] + nc
        self.data = np.einsum(wt, nr + [rows[p]], self.data, rows + cols, wt.conj(), nc + [cols[p]], out)
        self.sites = [self.sites[i] for i in keep] + list(out_sites)

    def trace_out(self, sites):
        keep = [i for i, s in enumerate(self.sites) if s not in sites]
        m = self.m
        rows = list(range(m))
        cols = [m + i for i in range(m)]
        for i, s in enumerate(self.sites):
            if s in sites:
                cols[i] = rows[i]
        self.data = np.einsum(self.data, rows + cols, [rows[i] for i in keep] + [cols[i] for i in keep])
        self.sites = [self.sites[i] for i in keep]

    def reorder(self, sites):
        perm = [self.sites.index(s) for s in sites]
        m = self.m
        self.data = self.data.transpose(perm + [m + p for p in perm])
        self.sites = list(sites)

    def matrix(self) -> np.ndarray:
        d = self.chi**self.m
        return self.data.reshape(d, d)


def _cone_step(kind: str, sites: Sequence[int], n_coarse: int):
    """Disentanglers, isometries and coarse sites in the past of ``sites``."""
    n_fine = FACTOR[kind] * n_coarse
    us = [k for k in range(n_coarse) if set(disentangler_sites(kind, k, n_fine)) & set(sites)]
    touched = set(sites)
    for k in us:
        touched |= set(disentangler_sites(kind, k, n_fine))
    ws = [k for k in range(n_coarse) if set(isometry_sites(kind, k, n_fine)) & touched]
    return us, ws


def cone_sites(spec: MeraSpec, first_site: int, width: int) -> list[list[int]]:
    """Sites of the causal past of a fine region, per lattice level (0 = finest)."""
    sites = _region_sites(first_site, width, spec.n_fine)
    out = [sorted(sites)]
    for level in range(spec.layers):
        _, ws = _cone_step(spec.kind, sites, spec.lattice_size(level + 1))
        sites = ws
        out.append(sorted(sites))
    return out


def _check_region(spec: MeraSpec, width: int):
    if width > MAX_CONE_WIDTH[spec.kind]:
        raise ValueError(
            f"region width {width} exceeds the {spec.kind} cone limit {MAX_CONE_WIDTH[spec.kind]}"
        )


def _top_reduced(net: MeraNetwork, sites: Sequence[int]) -> np.ndarray:
    n = net.spec.n_coarse
    chi = net.spec.chi
    psi = net.top.reshape((chi,) * n)
    bra = list(range(n))
    ket = list(range(n))
    for j, s in enumerate(sites):
        bra[s] = n + j
    rho = np.einsum(psi, ket, psi.conj(), bra, list(sites) + [n + j for j in range(len(sites))])
    return rho.reshape(chi ** len(sites), -1)


def causal_cone_expectation(net: MeraNetwork, observable, first_site: int) -> complex:
    """Expectation of a local observable using only the gates in its causal cone.

    The observable on ``width`` contiguous fine sites starting at
    ``first_site`` is pulled back one step at a time through the dual of the
    cone channel, then evaluated on the reduced top state.
    """
    spec = net.spec
    width = _width_of(observable, spec.chi)
    _check_region(spec, width)
    sites = _region_sites(first_site, width, spec.n_fine)
    op = _LocalOperator(_as_matrix(observable, width, spec.chi), sites, spec.chi)
    for level in range(spec.layers):
        n_coarse = spec.lattice_size(level + 1)
        n_fine = spec.factor * n_coarse
        ws_all, us_all = net.steps[level]
        us, ws = _cone_step(spec.kind, op.sites, n_coarse)
        needed = sorted({s for k in ws for s in isometry_sites(spec.kind, k, n_fine)})
        op.ensure(needed)
        for k in us:
            op.conjugate(us_all[k], disentangler_sites(spec.kind, k, n_fine), heisenberg=True)
        for k in ws:
            op.pull_isometry(ws_all[k], isometry_sites(spec.kind, k, n_fine), ("c", k))
        op.sites = [s[1] for s in op.sites]
    top_sites = list(op.sites)
    rho = _top_reduced(net, top_sites)
    return complex(np.trace(rho @ op.matrix()))


def reduced_density_matrix(net: MeraNetwork, first_site: int, width: int) -> np.ndarray:
    """Density matrix of a contiguous fine region by descending through its causal cone."""
    spec = net.spec
    _check_region(spec, width)
    region = _region_sites(first_site, width, spec.n_fine)
    cones = [region]
    plans = []
    sites = region
    for level in range(spec.layers):
        us, ws = _cone_step(spec.kind, sites, spec.lattice_size(level + 1))
        plans.append((us, ws, sites))
        sites = ws
        cones.append(sites)
    rho = _LocalOperator(_top_reduced(net, sites), sites, spec.chi)
    for level in reversed(range(spec.layers)):
        us, ws, target = plans[level]
        n_coarse = spec.lattice_size(level + 1)
        n_fine = spec.factor * n_coarse
        ws_all, us_all = net.steps[level]
        rho.sites = [("c", s) for s in rho.sites]
        for k in ws:
            rho.push_isometry(ws_all[k], isometry_sites(spec.kind, k, n_fine), ("c", k))
        for k in us:
            rho.conjugate(us_all[k], disentangler_sites(spec.kind, k, n_fine), heisenberg=False)
        rho.trace_out([s for s in rho.sites if s not in target])
    rho.reorder(region)
    return rho.matrix()
