"""The MERA causal set and its embedding in two-dimensional de Sitter space.

Events are ``(layer, site)`` pairs; layer 0 is the fine (output) lattice and
deeper layers are earlier.  A link runs from a parent at layer ``k+1`` to each
child at layer ``k`` that its step can influence, so ``A <= B`` means ``A`` lies
in the causal past of ``B``.

Site positions on the fine lattice: a layer-``k`` site ``i`` sits at
``x = a^k i + c_k`` with ``c_k = delta (a^k - 1)/(a - 1)``, which centers every
site over its children (``delta = 1/2`` for binary steps, ``0`` for ternary).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import networkx as nx
import numpy as np

from .mera import FACTOR

STAGGER = {"binary": 0.5, "ternary": 0.0}
RADIUS = {"binary": 1.5, "ternary": 2.0}
# child offsets of a site at position a*i on the finer lattice, as in the step circuits
REACH = {"binary": range(-1, 3), "ternary": range(-2, 3)}


def children(kind: str, site: int, n_fine: int) -> set:
    a = FACTOR[kind]
    return {(a * site + d) % n_fine for d in REACH[kind]}


@dataclass(frozen=True)
class CausalSet:
    kind: str
    sizes: tuple  # sites per layer, layer 0 first
    links: frozenset  # ((k+1, i), (k, j))

    @property
    def layers(self) -> int:
        return len(self.sizes) - 1

    @property
    def events(self) -> list:
        return [(k, s) for k, n in enumerate(self.sizes) for s in range(n)]

    def __contains__(self, event) -> bool:
        k, s = event
        return 0 <= k < len(self.sizes) and 0 <= s < self.sizes[k]

    def check(self, event) -> tuple:
        event = (int(event[0]), int(event[1]))
        if event not in self:
            raise KeyError(f"unknown event {event}")
        return event

    @cached_property
    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.events)
        g.add_edges_from(self.links)
        return g

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "sizes": list(self.sizes),
            "links": sorted([list(p), list(c)] for p, c in self.links),
        }

    @classmethod
    def from_json(cls, data: dict) -> CausalSet:
        links = frozenset((tuple(p), tuple(c)) for p, c in data["links"])
        return cls(data["kind"], tuple(data["sizes"]), links)


def generate_mera_causet(kind: str, fine_size: int, layers: int) -> CausalSet:
    if kind not in FACTOR:
        raise ValueError(f"unknown kind {kind!r}")
    a = FACTOR[kind]
    if layers < 0 or fine_size < 1 or fine_size % a**layers:
        raise ValueError(f"fine_size {fine_size} is not divisible by {a}^{layers}")
    sizes = tuple(fine_size // a**k for k in range(layers + 1))
    links = set()
    for k in range(layers):
        for i in range(sizes[k + 1]):
            links.update(((k + 1, i), (k, j)) for j in children(kind, i, sizes[k]))
    return CausalSet(kind, sizes, frozenset(links))


def leq(cs: CausalSet, a, b) -> bool:
    """``A <= B``: ``A`` equals ``B`` or lies in its causal past."""
    a, b = cs.check(a), cs.check(b)
    return a == b or nx.has_path(cs.graph, a, b)


def covering_links(cs: CausalSet) -> set:
    """Covering pairs of the order generated by the links."""
    closure = nx.transitive_closure_dag(cs.graph)
    return set(nx.transitive_reduction(closure).edges())


def causal_past(cs: CausalSet, targets) -> dict:
    """Events below some target, grouped by layer (every layer present, maybe empty)."""
    targets = [cs.check(t) for t in targets]
    past = set(targets)
    for t in targets:
        past |= nx.ancestors(cs.graph, t)
    out = {k: [] for k in range(len(cs.sizes))}
    for k, s in sorted(past):
        out[k].append(s)
    return out


# --- charts -------------------------------------------------------------------


@dataclass(frozen=True)
class DeSitterChart:
    alpha: float = 1.0
    a: float = 2.0
    r: float = 1.5
    d: int = 1

    def __post_init__(self):
        if self.alpha <= 0 or self.a <= 1 or self.r <= 0:
            raise ValueError("need alpha > 0, a > 1 and r > 0")

    @classmethod
    def for_kind(cls, kind: str, alpha: float = 1.0) -> DeSitterChart:
        return cls(alpha, float(FACTOR[kind]), RADIUS[kind])

    @property
    def t0(self) -> float:
        return -self.r / (self.a - 1)

    @property
    def beta(self) -> float:
        return self.alpha

    @property
    def dzeta(self) -> float:
        """Spacing of neighbouring sites in zeta, the same on every layer."""
        return self.alpha * (self.a - 1) / self.r

    def t_of_layer(self, k) -> float:
        return -self.r * self.a**k / (self.a - 1)

    def tau_of_t(self, t):
        return -self.alpha * np.log(np.asarray(t) / self.t0)

    def t_of_tau(self, tau):
        return self.t0 * np.exp(-np.asarray(tau) / self.alpha)


@dataclass(frozen=True)
class Embedding:
    layer: int
    site: int
    t: float
    x: float
    tau: float
    zeta: float
    xi: float

    def row(self) -> list:
        return [self.layer, self.site, self.t, self.x, self.tau, self.zeta, self.xi]


def site_position(kind: str, a: float, k: int, site: int) -> float:
    delta = STAGGER[kind]
    return a**k * site + delta * (a**k - 1) / (a - 1)


def embed_event(chart: DeSitterChart, cs: CausalSet, event) -> Embedding:
    if chart.d != 1:
        raise ValueError("only d = 1 embeddings are supported")
    k, s = cs.check(event)
    t = chart.t_of_layer(k)
    x = site_position(cs.kind, chart.a, k, s)
    tau = float(chart.tau_of_t(t)) + 0.0  # no negative zero at layer 0
    zeta = -chart.alpha * x / t
    xi = -chart.alpha * x / chart.t0
    return Embedding(k, s, t, x, tau, zeta, xi)


def embed_all(chart: DeSitterChart, cs: CausalSet) -> list[Embedding]:
    return [embed_event(chart, cs, e) for e in cs.events]


@dataclass(frozen=True)
class MetricAt:
    g: np.ndarray
    volume_density: float


def metric_components(chart: DeSitterChart, frame: str, point) -> MetricAt:
    """Metric at ``point``: ``(t, x)`` conformal, ``(tau, zeta)`` static, ``(tau, xi)`` flrw."""
    alpha = chart.alpha
    p0, p1 = (float(c) for c in point)
    if frame == "conformal":
        if p0 >= 0:
            raise ValueError("conformal chart needs t < 0")
        f = (alpha / p0) ** 2
        return MetricAt(f * np.diag([-1.0, 1.0]), f)
    if frame == "static":
        rho = p1 / alpha
        g = np.array([[rho * rho - 1.0, -rho], [-rho, 1.0]])
        return MetricAt(g, 1.0)
    if frame == "flrw":
        s = math.exp(p0 / alpha)
        return MetricAt(np.diag([-1.0, s * s]), s)
    raise ValueError(f"unknown frame {frame!r}")


def lightlike_worldline(chart: DeSitterChart, zeta0, u, tau):
    """Null curve through ``zeta0`` at ``tau = 0``; tends to ``-alpha u`` as ``tau -> -inf``."""
    if u not in (1, -1):
        raise ValueError("u must be +1 or -1")
    tau = np.asarray(tau)
    e = np.exp(tau.astype(np.result_type(tau, float)) / chart.alpha)  # keeps extended precision
    return -chart.alpha * u * (1 - e) + zeta0 * e


def continuum_past_extent(chart: DeSitterChart, regions, tau) -> list[tuple]:
    """Zeta-intervals at time ``tau`` in the causal past of ``regions`` at ``tau = 0``."""
    if tau > 0:
        raise ValueError("tau must be <= 0")
    spans = []
    for lo, hi in regions:
        if lo > hi:
            raise ValueError(f"bad interval ({lo}, {hi})")
        # the left edge lies on the u = +1 ray, which arrives from the left
        spans.append(
            (float(lightlike_worldline(chart, lo, 1, tau)), float(lightlike_worldline(chart, hi, -1, tau)))
        )
    spans.sort()
    merged = []
    for lo, hi in spans:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def merge_time(chart: DeSitterChart, gap: float) -> float:
    """Time at which the pasts of two intervals ``gap`` apart first touch."""
    if gap <= 0:
        return 0.0
    return -chart.alpha * math.log((gap + 2 * chart.alpha) / (2 * chart.alpha))


@dataclass(frozen=True)
class VolumeCount:
    events: int
    static_volume: float
    density: float


def volume_count(chart: DeSitterChart, cs: CausalSet, tau_range, zeta_range) -> VolumeCount:
    """Events in the half-open box ``[tau0, tau1) x [zeta0, zeta1)``.

    The static volume element is 1, so the volume is the coordinate area.
    """
    (t0, t1), (z0, z1) = tau_range, zeta_range
    area = (t1 - t0) * (z1 - z0)
    if area <= 0:
        raise ValueError("empty box")
    emb = embed_all(chart, cs)
    taus = [e.tau for e in emb]
    zetas = [e.zeta for e in emb]
    if t1 <= min(taus) or t0 > max(taus) or z1 <= min(zetas) or z0 > max(zetas):
        raise ValueError("box lies outside the embedded events")
    n = sum(1 for e in emb if t0 <= e.tau < t1 and z0 <= e.zeta < z1)
    return VolumeCount(n, area, n / area)


def min_start_time(chart: DeSitterChart, corr_length: float) -> float:
    """Latest start time that still builds correlations up to ``corr_length``."""
    if corr_length <= 0:
        raise ValueError("correlation length must be positive")
    return -chart.alpha * math.log((corr_length + 2 * chart.alpha) / (4 * chart.alpha))
