import numpy as np
import pytest

from causal_mera.channel import CausalRelation
from causal_mera.localize import (
    CausalityViolated,
    NotPurelyCausal,
    UnsupportedRelation,
    UnsupportedSpec,
    XChoiceDependent,
    counterexample_isometry,
    counterexample_relation,
    decompose_step,
    is_purely_causal,
    peel_factor,
    step_spec,
    verify_decomposition,
)
from causal_mera.mera import MeraSpec, assemble_step, random_step_gates
from causal_mera.tensor_core import IsometryMap, is_isometry, random_isometry, random_unitary

Q2 = (("a", 2), ("b", 2))
SWAP = np.eye(4)[[0, 2, 1, 3]]


def recombine(p, d_ap, d_bp, d_a, d_b):
    v = p.v.matrix.reshape(d_ap, p.env_dim, d_a)
    x = p.x.matrix.reshape(d_bp, p.env_dim, d_b)
    return np.einsum("pea,qeb->pqab", v, x).reshape(d_ap * d_bp, d_a * d_b)


def test_peel_product_isometry():
    wa, wb = random_isometry(2, 4, 1), random_isometry(2, 2, 2)
    w = IsometryMap(np.kron(wa, wb), Q2, (("A", 4), ("B", 2)))
    p = peel_factor(w, ["b"], ["A"])
    assert p.env_dim == 1 and p.residual < 1e-12
    assert np.abs(recombine(p, 4, 2, 2, 2) - w.matrix).max() < 1e-12
    assert is_isometry(p.v.matrix, 1e-12).ok and is_isometry(p.x.matrix, 1e-12).ok


def test_peel_counterexample_under_a_single_cut():
    # B1 cannot reach A, so the single peel exists; the obstruction needs both cuts at once
    v = counterexample_isometry(random_unitary(4, 3), random_unitary(4, 4))
    p = peel_factor(v, ["B1"], ["A"])
    assert p.env_dim == 2 and p.residual < 1e-12
    assert np.abs(recombine(p, 4, 4, 2, 2) - v.matrix).max() < 1e-12
    assert is_isometry(p.x.matrix, 1e-12).ok


def test_peel_on_a_ring_step():
    spec = MeraSpec("binary", 3)
    w = assemble_step(spec, *random_step_gates(spec, 3))
    p = peel_factor(w, ["c1"], ["f5", "f0"])
    assert p.residual < 1e-10
    assert is_isometry(p.x.matrix, 1e-10).ok
    assert p.x.out_layout == tuple((f"f{j}", 2) for j in range(1, 5))


def test_peel_rejects_signalling_maps():
    w = IsometryMap(SWAP, Q2, Q2)
    with pytest.raises(CausalityViolated) as err:
        peel_factor(w, ["b"], ["a"])
    assert err.value.residual > 0.5


def test_probe_dependence_detected_when_precheck_is_disabled():
    w = IsometryMap(SWAP, Q2, Q2)
    with pytest.raises(XChoiceDependent):
        peel_factor(w, ["b"], ["a"], causal_tol=10.0)


def test_peel_argument_validation():
    w = IsometryMap(np.eye(4), Q2, Q2)
    with pytest.raises(ValueError):
        peel_factor(w, ["zz"], ["a"])
    with pytest.raises(ValueError):
        peel_factor(w, ["a", "b"], ["a"])


@pytest.mark.parametrize("kind,n,seed", [("binary", 2, 0), ("binary", 3, 1), ("ternary", 2, 2), ("binary", 2, 11)])
def test_decompose_step_roundtrip(kind, n, seed):
    spec = MeraSpec(kind, n)
    w = assemble_step(spec, *random_step_gates(spec, seed))
    d = decompose_step(w, spec)
    assert d.residual < 1e-8
    assert verify_decomposition(d, w) < 1e-8
    for g in d.gates:
        assert is_isometry(g.matrix, 1e-8).ok
    assert sorted(g.name for g in d.gates) == sorted([f"w{k}" for k in range(n)] + [f"u{k}" for k in range(n)])
    assert all(v == 2 for v in d.bond_dims.values())
    # gate tensors carry their wire names
    t = d.tensors()["w0"]
    assert t.labels[-1] == "c0"


def test_generic_isometry_is_not_a_step_circuit():
    # two qubits into four: causal for the complete binary N=2 relation, but
    # 112 real parameters cannot come from 56 gate parameters
    spec = MeraSpec("binary", 2)
    w = IsometryMap(random_isometry(4, 16, 5), (("c0", 2), ("c1", 2)), tuple((f"f{j}", 2) for j in range(4)))
    with pytest.raises(NotPurelyCausal) as err:
        decompose_step(w, spec)
    assert err.value.residual > 1e-3


def test_decompose_rejects_noncausal_input():
    spec = MeraSpec("ternary", 2)
    w = IsometryMap(random_isometry(4, 64, 6), (("c0", 2), ("c1", 2)), tuple((f"f{j}", 2) for j in range(6)))
    with pytest.raises(CausalityViolated):
        decompose_step(w, spec)


def test_decompose_rejects_small_specs_and_wrong_layouts():
    with pytest.raises(UnsupportedSpec):
        step_spec("binary", 1)
    spec = MeraSpec("binary", 2)
    w = IsometryMap(random_isometry(4, 64, 7), (("c0", 2), ("c1", 2)), tuple((f"f{j}", 2) for j in range(6)))
    with pytest.raises(ValueError, match="layouts"):
        decompose_step(w, spec)


def test_verify_decomposition_shape_mismatch():
    spec = MeraSpec("binary", 2)
    w = assemble_step(spec, *random_step_gates(spec, 0))
    d = decompose_step(w, spec)
    with pytest.raises(ValueError, match="shape"):
        verify_decomposition(d, np.eye(4))


def test_counterexample_is_causal_but_not_purely_causal():
    from causal_mera.channel import is_causal, isometry_channel

    rng = np.random.default_rng(0)
    for _ in range(5):
        v = counterexample_isometry(random_unitary(4, rng), random_unitary(4, rng))
        r = counterexample_relation()
        assert is_causal(isometry_channel(v), r, 1e-10).causal
        verdict = is_purely_causal(v, r)
        assert not verdict.purely_causal and verdict.family == "two-block"
        s = np.array(verdict.singular_values)
        assert np.sum(s >= 0.5 * s[0]) == 2
        # direct SVD oracle of V reshaped across (A1 -> A) | (B1 -> B)
        t = v.matrix.reshape(4, 4, 2, 2).transpose(0, 2, 1, 3).reshape(8, 8)
        assert np.allclose(np.linalg.svd(t, compute_uv=False), s)


def test_product_state_omega_is_purely_causal():
    omega = np.kron([1, 0], [0, 1])
    v = counterexample_isometry(random_unitary(4, 1), random_unitary(4, 2), omega=omega)
    verdict = is_purely_causal(v, counterexample_relation())
    assert verdict.purely_causal


def test_is_purely_causal_on_steps_and_unsupported_relations():
    spec = MeraSpec("ternary", 2)
    w = assemble_step(spec, *random_step_gates(spec, 4))
    from causal_mera.mera import relation_for

    verdict = is_purely_causal(w, relation_for(spec))
    assert verdict.purely_causal and verdict.family == "ternary"
    chain = CausalRelation(Q2, Q2, {("a", "a"), ("a", "b"), ("b", "b")})
    with pytest.raises(UnsupportedRelation):
        is_purely_causal(IsometryMap(np.eye(4), Q2, Q2), chain)
