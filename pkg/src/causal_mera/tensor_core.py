"""Dense complex tensors with labeled axes and the matrix helpers built on them.

Conventions used throughout the package:

* entries are stored row-major (C order);
* a :data:`Layout` is a tuple of ``(vertex_id, dimension)`` pairs describing a
  tensor-product factorization of a matrix's row or column space, first
  factor most significant;
* seeded randomness goes through :func:`numpy.random.default_rng`, i.e. the
  PCG64 bit generator seeded with a 64-bit integer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable, NamedTuple, Sequence

import numpy as np

DEFAULT_TOL = 1e-10

Layout = tuple  # tuple[tuple[Hashable, int], ...]


class DenseTensor:
    """Complex array whose axes carry distinct labels.

    Args:
        data: array-like of entries; converted to ``complex128``.
        labels: one label per axis, pairwise distinct.
    """

    __slots__ = ("data", "labels")

    def __init__(self, data, labels: Sequence[Hashable]):
        data = np.asarray(data, dtype=complex)
        labels = tuple(labels)
        if data.ndim != len(labels):
            raise ValueError(f"{data.ndim} axes but {len(labels)} labels")
        if len(set(labels)) != len(labels):
            raise ValueError(f"labels must be distinct, got {labels}")
        self.data = data
        self.labels = labels

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def axis(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown label {label!r}") from None

    def dim(self, label) -> int:
        return self.data.shape[self.axis(label)]

    def relabel(self, mapping: dict) -> DenseTensor:
        return DenseTensor(self.data, [mapping.get(l, l) for l in self.labels])

    def transpose(self, labels: Sequence[Hashable]) -> DenseTensor:
        perm = [self.axis(l) for l in labels]
        if sorted(perm) != list(range(self.data.ndim)):
            raise ValueError("transpose needs every label exactly once")
        return DenseTensor(self.data.transpose(perm), labels)

    def conj(self) -> DenseTensor:
        return DenseTensor(self.data.conj(), self.labels)

    def __repr__(self) -> str:
        return f"DenseTensor(shape={self.shape}, labels={self.labels})"


def contract(tensors: Sequence[DenseTensor], pairings: Iterable[tuple] = ()) -> DenseTensor:
    """Sum over paired axes of a tensor network.

    Every label must occur on exactly one input tensor.  Each pairing names two
    labels whose axes are summed together.  Unpaired axes are kept in
    left-to-right input order.

    >>> eye = DenseTensor(np.eye(2), ["o", "i"])
    >>> vec = DenseTensor([1, 0], ["v"])
    >>> contract([eye, vec], [("i", "v")]).data
    array([1.+0.j, 0.+0.j])
    """
    owner: dict = {}
    for t_idx, t in enumerate(tensors):
        for ax, lab in enumerate(t.labels):
            if lab in owner:
                raise ValueError(f"duplicate output label {lab!r}")
            owner[lab] = (t_idx, ax)

    ids: dict = {}
    next_id = 0
    for a, b in pairings:
        for lab in (a, b):
            if lab not in owner:
                raise KeyError(f"unknown label {lab!r}")
            if lab in ids:
                raise ValueError(f"label {lab!r} paired twice")
        (ta, xa), (tb, xb) = owner[a], owner[b]
        if tensors[ta].data.shape[xa] != tensors[tb].data.shape[xb]:
            raise ValueError(
                f"dimension mismatch pairing {a!r} ({tensors[ta].data.shape[xa]}) "
                f"with {b!r} ({tensors[tb].data.shape[xb]})"
            )
        ids[a] = ids[b] = next_id
        next_id += 1

    out_labels = []
    operands = []
    for t in tensors:
        sub = []
        for lab in t.labels:
            if lab not in ids:
                ids[lab] = next_id
                next_id += 1
                out_labels.append(lab)
            sub.append(ids[lab])
        operands += [t.data, sub]
    if next_id > 52:
        raise ValueError("network has too many distinct indices for einsum")
    result = np.einsum(*operands, [ids[l] for l in out_labels], optimize=len(tensors) > 2)
    return DenseTensor(result, out_labels)


def layout_dim(layout: Layout) -> int:
    return math.prod(d for _, d in layout)


def check_layout(layout: Layout, dim: int | None = None) -> Layout:
    layout = tuple((v, int(d)) for v, d in layout)
    verts = [v for v, _ in layout]
    if len(set(verts)) != len(verts):
        raise ValueError(f"vertex ids repeated in layout {verts}")
    if any(d < 1 for _, d in layout):
        raise ValueError("layout dimensions must be positive")
    if dim is not None and layout_dim(layout) != dim:
        raise ValueError(f"layout dimension {layout_dim(layout)} does not match {dim}")
    return layout


def group_axes(t: DenseTensor, row_labels: Sequence, col_labels: Sequence):
    """Flatten a tensor into a matrix.

    Returns:
        ``(matrix, row_layout, col_layout)`` where the layouts record the label
        and dimension of each grouped axis, in the order given.
    """
    row_labels, col_labels = list(row_labels), list(col_labels)
    wanted = row_labels + col_labels
    if len(set(wanted)) != len(wanted):
        raise ValueError("label repeated in grouping")
    if set(wanted) != set(t.labels):
        missing = set(t.labels) - set(wanted)
        raise ValueError(f"grouping must use every label exactly once; missing {missing}")
    tt = t.transpose(wanted)
    row_layout = tuple((l, t.dim(l)) for l in row_labels)
    col_layout = tuple((l, t.dim(l)) for l in col_labels)
    m = tt.data.reshape(layout_dim(row_layout), layout_dim(col_layout))
    return m, row_layout, col_layout


def ungroup(m: np.ndarray, row_layout: Layout, col_layout: Layout) -> DenseTensor:
    shape = [d for _, d in row_layout] + [d for _, d in col_layout]
    labels = [v for v, _ in row_layout] + [v for v, _ in col_layout]
    return DenseTensor(np.asarray(m).reshape(shape), labels)


class IsometryCheck(NamedTuple):
    ok: bool
    residual: float
    too_wide: bool = False


def is_isometry(m, tol: float = DEFAULT_TOL) -> IsometryCheck:
    """Test ``V^dagger V = 1``.

    A matrix with more columns than rows can never be isometric; that case is
    flagged with ``too_wide=True`` and an infinite residual instead of running
    the numeric test.
    """
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError("expected a matrix")
    rows, cols = m.shape
    if cols > rows:
        return IsometryCheck(False, math.inf, True)
    residual = float(np.max(np.abs(m.conj().T @ m - np.eye(cols)), initial=0.0))
    return IsometryCheck(residual <= tol, residual)


def partial_trace(op, layout: Layout, keep: Iterable) -> np.ndarray:
    """Trace out every factor of ``layout`` not listed in ``keep``.

    Kept factors stay in layout order.
    """
    op = np.asarray(op)
    layout = check_layout(layout)
    dim = layout_dim(layout)
    if op.shape != (dim, dim):
        raise ValueError(f"operator shape {op.shape} incompatible with layout dimension {dim}")
    keep = set(keep)
    verts = [v for v, _ in layout]
    unknown = keep - set(verts)
    if unknown:
        raise KeyError(f"unknown vertex {unknown.pop()!r}")
    n = len(layout)
    dims = [d for _, d in layout]
    t = op.reshape(dims + dims)
    rows = list(range(n))
    cols = [n + i for i in range(n)]
    for i, v in enumerate(verts):
        if v not in keep:
            cols[i] = rows[i]
    kept = [i for i, v in enumerate(verts) if v in keep]
    out = np.einsum(t, rows + cols, [rows[i] for i in kept] + [cols[i] for i in kept])
    d_keep = math.prod(dims[i] for i in kept)
    return out.reshape(d_keep, d_keep)


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_isometry(d_in: int, d_out: int, seed=None) -> np.ndarray:
    """Haar-distributed ``d_out x d_in`` isometry.

    QR of a complex Gaussian matrix, with the columns rephased so that the
    diagonal of R is real and positive.  ``seed`` may be an int or an existing
    :class:`numpy.random.Generator` (which is then advanced).
    """
    if d_in < 1 or d_out < 1:
        raise ValueError("dimensions must be positive")
    if d_out < d_in:
        raise ValueError(f"cannot embed dimension {d_in} isometrically into {d_out}")
    rng = make_rng(seed)
    z = (rng.standard_normal((d_out, d_in)) + 1j * rng.standard_normal((d_out, d_in))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def random_unitary(d: int, seed=None) -> np.ndarray:
    return random_isometry(d, d, seed)


def _resolve(layout: Layout, verts: Iterable, side: str) -> list[int]:
    names = [v for v, _ in layout]
    idx = []
    for v in verts:
        if v not in names:
            raise ValueError(f"inconsistent cut: {v!r} is not a {side} vertex")
        idx.append(names.index(v))
    return idx


def operator_schmidt(m, row_layout: Layout, col_layout: Layout, cut) -> np.ndarray:
    """Operator-Schmidt coefficients of ``m`` across a bipartition.

    Args:
        m: matrix with rows factored by ``row_layout`` and columns by
            ``col_layout``.
        cut: ``(row_vertices, col_vertices)`` forming the first block; every
            other vertex forms the second block.

    Returns:
        Singular values in descending order.  ``m`` factorizes as
        ``m1 (x) m2`` across the cut iff exactly one of them is nonzero.
    """
    m = np.asarray(m)
    row_layout, col_layout = check_layout(row_layout), check_layout(col_layout)
    if m.shape != (layout_dim(row_layout), layout_dim(col_layout)):
        raise ValueError("matrix shape does not match layouts")
    rows1, cols1 = cut
    r1 = _resolve(row_layout, rows1, "row")
    c1 = _resolve(col_layout, cols1, "column")
    if len(set(r1)) != len(r1) or len(set(c1)) != len(c1):
        raise ValueError("inconsistent cut: vertex listed twice")
    r2 = [i for i in range(len(row_layout)) if i not in r1]
    c2 = [i for i in range(len(col_layout)) if i not in c1]
    if not (r1 or c1) or not (r2 or c2):
        raise ValueError("inconsistent cut: one side is empty")
    nr = len(row_layout)
    t = m.reshape([d for _, d in row_layout] + [d for _, d in col_layout])
    perm = r1 + [nr + i for i in c1] + r2 + [nr + i for i in c2]
    t = t.transpose(perm)
    d1 = math.prod(row_layout[i][1] for i in r1) * math.prod(col_layout[i][1] for i in c1)
    return np.linalg.svd(t.reshape(d1, -1), compute_uv=False)


def hermitian_part(m) -> np.ndarray:
    m = np.asarray(m)
    return (m + m.conj().T) / 2


def gell_mann_basis(d: int) -> list[np.ndarray]:
    """Generalized Gell-Mann matrices plus the identity: a Hermitian basis of d x d."""
    basis = [np.eye(d, dtype=complex)]
    for j in range(d):
        for k in range(j + 1, d):
            s = np.zeros((d, d), dtype=complex)
            s[j, k] = s[k, j] = 1
            a = np.zeros((d, d), dtype=complex)
            a[j, k], a[k, j] = -1j, 1j
            basis += [s, a]
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1
        diag[l] = -l
        basis.append(np.diag(diag * np.sqrt(2 / (l * (l + 1)))).astype(complex))
    return basis


def embed_operator(op, layout: Layout, vertices: Sequence) -> np.ndarray:
    """Extend an operator on ``vertices`` (in the given order) by identities to the whole layout."""
    layout = check_layout(layout)
    names = [v for v, _ in layout]
    dims = [d for _, d in layout]
    pos = _resolve(layout, vertices, "layout")
    sub_dims = [dims[i] for i in pos]
    op = np.asarray(op).reshape(sub_dims + sub_dims)
    rest = [i for i in range(len(names)) if i not in pos]
    ident = np.eye(math.prod(dims[i] for i in rest)).reshape(
        [dims[i] for i in rest] + [dims[i] for i in rest]
    )
    n = len(names)
    # axes: op rows at pos, identity rows at rest; columns offset by n
    sub_op = pos + [n + i for i in pos]
    sub_id = rest + [n + i for i in rest]
    full = np.einsum(op, sub_op, ident, sub_id, list(range(2 * n)))
    d = math.prod(dims)
    return full.reshape(d, d)


@dataclass(frozen=True)
class IsometryMap:
    """Matrix from the ``in_layout`` space to the ``out_layout`` space.

    Isometry is not enforced here; use :func:`is_isometry` where it matters.
    """

    matrix: np.ndarray
    in_layout: Layout
    out_layout: Layout

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "in_layout", check_layout(self.in_layout, m.shape[1]))
        object.__setattr__(self, "out_layout", check_layout(self.out_layout, m.shape[0]))

    @property
    def in_vertices(self) -> list:
        return [v for v, _ in self.in_layout]

    @property
    def out_vertices(self) -> list:
        return [v for v, _ in self.out_layout]

    def reorder(self, out_order: Sequence | None = None, in_order: Sequence | None = None) -> IsometryMap:
        """Same map with the tensor factors permuted."""
        out_order = list(out_order) if out_order is not None else self.out_vertices
        in_order = list(in_order) if in_order is not None else self.in_vertices
        t = ungroup(
            self.matrix,
            tuple((("o", v), d) for v, d in self.out_layout),
            tuple((("i", v), d) for v, d in self.in_layout),
        )
        m, _, _ = group_axes(t, [("o", v) for v in out_order], [("i", v) for v in in_order])
        dims_o = dict(self.out_layout)
        dims_i = dict(self.in_layout)
        return IsometryMap(
            m,
            tuple((v, dims_i[v]) for v in in_order),
            tuple((v, dims_o[v]) for v in out_order),
        )
