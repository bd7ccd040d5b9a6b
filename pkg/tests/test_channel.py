import numpy as np
import pytest

from causal_mera.channel import (
    CausalRelation,
    LayoutMismatch,
    QuantumChannel,
    apply,
    choi,
    choi_rank,
    compose,
    depolarizing,
    heisenberg_dual,
    is_causal,
    isometry_channel,
    minimal_kraus,
    minimal_stinespring,
)
from causal_mera.tensor_core import IsometryMap, random_isometry, random_unitary

Q2 = (("a", 2), ("b", 2))


def random_channel(d_in, d_out, n_kraus, seed):
    v = random_isometry(d_in, d_out * n_kraus, seed).reshape(d_out, n_kraus, d_in)
    return QuantumChannel([v[:, k, :] for k in range(n_kraus)], (("i", d_in),), (("o", d_out),))


def random_state(d, seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def test_non_trace_preserving_kraus_rejected():
    with pytest.raises(ValueError, match="trace preserving"):
        QuantumChannel([np.eye(2) * 0.9], (("i", 2),), (("o", 2),))


def test_choi_matches_maximally_entangled_construction():
    c = random_channel(2, 3, 2, 1)
    phi = np.eye(2).reshape(-1)  # unnormalized sum_i |i>|i>
    ref = sum(np.kron(k, np.eye(2)) @ np.outer(phi, phi) @ np.kron(k, np.eye(2)).conj().T for k in c.kraus)
    assert np.abs(choi(c) - ref).max() < 1e-12
    # trace preservation shows up as tr_out J = 1
    j = choi(c).reshape(3, 2, 3, 2)
    assert np.abs(np.einsum("aiaj->ij", j) - np.eye(2)).max() < 1e-12


def test_dual_is_adjoint_of_apply():
    c = random_channel(3, 2, 3, 2)
    rho = random_state(3, 3)
    x = random_state(2, 4)
    lhs = np.trace(x @ apply(c, rho))
    rhs = np.trace(heisenberg_dual(c, x) @ rho)
    assert abs(lhs - rhs) < 1e-12
    assert np.abs(heisenberg_dual(c, np.eye(2)) - np.eye(3)).max() < 1e-12


def test_apply_rejects_invalid_state():
    c = random_channel(2, 2, 1, 5)
    with pytest.raises(ValueError, match="invalid state"):
        apply(c, np.diag([1.0, 1.0]))


def test_compose_order():
    first = random_channel(2, 3, 2, 6)
    second = QuantumChannel(random_channel(3, 2, 2, 7).kraus, (("o", 3),), (("p", 2),))
    rho = random_state(2, 8)
    assert np.abs(apply(compose(first, second), rho) - apply(second, apply(first, rho))).max() < 1e-12
    with pytest.raises(LayoutMismatch):
        compose(second, second)


def test_minimal_stinespring_reproduces_channel():
    # three redundant Kraus operators spanning a rank-2 channel
    base = random_channel(2, 2, 2, 9)
    k0, k1 = base.kraus
    redundant = QuantumChannel([k0 / np.sqrt(2), k0 / np.sqrt(2), k1], base.in_layout, base.out_layout)
    assert choi_rank(redundant) == 2
    v, d_env = minimal_stinespring(redundant)
    assert d_env == 2
    assert np.abs(v.matrix.conj().T @ v.matrix - np.eye(2)).max() < 1e-12
    rho = random_state(2, 10)
    out = v.matrix @ rho @ v.matrix.conj().T
    reduced = np.einsum("aebe->ab", out.reshape(2, 2, 2, 2))
    assert np.abs(reduced - apply(redundant, rho)).max() < 1e-12
    assert len(minimal_kraus(depolarizing(2))) == 4


def test_product_channel_is_causal_along_the_diagonal():
    u = np.kron(random_unitary(2, 11), random_unitary(2, 12))
    c = QuantumChannel([u], Q2, Q2)
    diagonal = CausalRelation(Q2, Q2, {("a", "a"), ("b", "b")})
    report = is_causal(c, diagonal, 1e-10)
    assert report.causal and report.max_residual < 1e-12


def test_swap_violates_the_diagonal_relation():
    swap = np.eye(4)[[0, 2, 1, 3]]
    c = QuantumChannel([swap], Q2, Q2)
    report = is_causal(c, CausalRelation(Q2, Q2, {("a", "a"), ("b", "b")}))
    assert not report.causal
    assert report.residuals[("a", "b")] > 0.5 and report.residuals[("b", "a")] > 0.5
    assert is_causal(c, CausalRelation(Q2, Q2, {("a", "b"), ("b", "a")})).causal


def test_cnot_target_influences_control():
    # X on the control pulls back to X (x) X, so the target is not shielded
    cnot = np.eye(4)[[0, 1, 3, 2]]
    c = QuantumChannel([cnot], Q2, Q2)
    r = CausalRelation(Q2, Q2, {("a", "a"), ("a", "b"), ("b", "b")})
    report = is_causal(c, r)
    assert not report.causal and report.residuals[("b", "a")] > 0.5
    assert is_causal(c, r.with_pairs([("b", "a")])).causal


def test_depolarizing_forbids_nothing():
    d = depolarizing(2)
    empty = CausalRelation(d.in_layout, d.out_layout, frozenset())
    assert is_causal(d, empty).causal


def test_is_causal_layout_and_size_checks():
    c = QuantumChannel([np.eye(4)], Q2, Q2)
    other = CausalRelation((("x", 2), ("y", 2)), Q2, frozenset())
    with pytest.raises(LayoutMismatch):
        is_causal(c, other)
    big = (("a", 128),)
    with pytest.raises(ValueError, match="limited"):
        is_causal(QuantumChannel([np.eye(128)], big, big), CausalRelation(big, big, frozenset()))


def test_isometry_channel_requires_isometry():
    with pytest.raises(ValueError):
        isometry_channel(IsometryMap(np.ones((4, 2)), (("i", 2),), Q2))


def test_relation_queries():
    r = CausalRelation(Q2, Q2, {("a", "a"), ("a", "b")})
    assert r.children("a") == ["a", "b"]
    assert r.parents("b") == ["a"]
    assert sorted(r.forbidden()) == [("b", "a"), ("b", "b")]
    with pytest.raises(ValueError):
        CausalRelation(Q2, Q2, {("a", "zz")})
