import json
import math
import time

import numpy as np
import pytest

from causal_mera import io
from causal_mera.causet import (
    DeSitterChart,
    causal_past,
    continuum_past_extent,
    embed_event,
    generate_mera_causet,
    lightlike_worldline,
    metric_components,
    volume_count,
)
from causal_mera.channel import is_causal, isometry_channel
from causal_mera.cli import main
from causal_mera.cmera import (
    GaussianFieldState,
    build_hamiltonian,
    check_canonical,
    evolve_covariance,
    ground_correlator,
    ground_state,
    propagator,
    symplectic_form,
)
from causal_mera.localize import counterexample_isometry, counterexample_relation, decompose_step, is_purely_causal
from causal_mera.mera import (
    MeraSpec,
    assemble_step,
    causal_cone_expectation,
    expectation_bruteforce,
    random_network,
    random_step_gates,
    relation_for,
)
from causal_mera.tensor_core import is_isometry, random_unitary

pytestmark = pytest.mark.acceptance

BINARY = DeSitterChart.for_kind("binary")

# 10 binary N=2, 10 binary N=3, 10 ternary N=2
STEP_CASES = [("binary", 2, s) for s in range(10)] + [("binary", 3, s) for s in range(10, 20)] + [
    ("ternary", 2, s) for s in range(20, 30)
]


def seeded_step(kind, n, seed):
    spec = MeraSpec(kind, n)
    return spec, assemble_step(spec, *random_step_gates(spec, seed))


def test_criterion_1_assembled_steps_are_causal(tmp_path, capsys, verdict):
    start = time.perf_counter()
    worst_pass, weakest_flip = 0.0, math.inf
    exits = []
    for kind, n, seed in STEP_CASES:
        spec, w = seeded_step(kind, n, seed)
        step, rel = tmp_path / "step.json", tmp_path / "rel.json"
        io.dump_json(io.isometry_to_json(w), step)
        io.dump_json(io.relation_to_json(relation_for(spec)), rel)
        exits.append(main(["check-causal", "--in", str(step), "--relation", str(rel), "--tol", "1e-10"]))
        worst_pass = max(worst_pass, json.loads(capsys.readouterr().out)["max_residual"])
        channel = isometry_channel(w)
        r = relation_for(spec)
        for pair in r.allowed:
            report = is_causal(channel, r.without(pair), 1e-10)
            weakest_flip = min(weakest_flip, report.residuals[pair])
    elapsed = time.perf_counter() - start
    ok = exits == [0] * 30 and worst_pass < 1e-10 and weakest_flip > 1e-3 and elapsed < 30
    verdict(1, ok, f"30 steps causal (max residual {worst_pass:.1e}), min flip residual {weakest_flip:.3f}, {elapsed:.1f} s")


def test_criterion_2_decomposition_roundtrip(verdict):
    start = time.perf_counter()
    worst_fit, worst_gate = 0.0, 0.0
    for kind, n, seed in STEP_CASES:
        spec, w = seeded_step(kind, n, seed)
        d = decompose_step(w, spec, tol=1e-8)
        worst_fit = max(worst_fit, d.residual)
        for g in d.gates:
            worst_gate = max(worst_gate, is_isometry(g.matrix, 1e-8).residual)
    elapsed = time.perf_counter() - start
    ok = worst_fit < 1e-8 and worst_gate < 1e-8 and elapsed < 60
    verdict(2, ok, f"roundtrip residual {worst_fit:.1e}, gate isometry residual {worst_gate:.1e}, {elapsed:.1f} s")


def test_criterion_3_counterexample_is_refuted(verdict):
    rng = np.random.default_rng(2024)
    r = counterexample_relation()
    ok, least_second = True, math.inf
    for _ in range(20):
        v = counterexample_isometry(random_unitary(4, rng), random_unitary(4, rng))
        causal = is_causal(isometry_channel(v), r, 1e-10).causal
        result = is_purely_causal(v, r)
        s = np.array(result.singular_values)
        # oracle: singular values of V regrouped as (A, A1) x (B, B1)
        oracle = np.linalg.svd(v.matrix.reshape(4, 4, 2, 2).transpose(0, 2, 1, 3).reshape(8, 8), compute_uv=False)
        strong = int(np.sum(oracle >= 0.5 * oracle[0]))
        ok &= causal and result.verdict == "NotPurelyCausal" and strong >= 2
        ok &= np.allclose(s, oracle, atol=1e-12)
        least_second = min(least_second, oracle[1] / oracle[0])
    verdict(3, bool(ok), f"20 counterexamples causal and NotPurelyCausal, min sigma2/sigma1 {least_second:.3f}")


def test_criterion_4_cone_matches_brute_force(verdict):
    rng = np.random.default_rng(4)
    shapes = [("binary", 2, 1), ("binary", 2, 2), ("binary", 3, 1), ("binary", 3, 2), ("ternary", 2, 1), ("ternary", 4, 1)]
    worst = 0.0
    for i in range(50):
        kind, n, layers = shapes[i % len(shapes)]
        net = random_network(MeraSpec(kind, n, 2, layers), seed=int(rng.integers(2**31)))
        assert net.spec.n_fine <= 12
        for width in (1, 2):
            g = rng.standard_normal((2**width,) * 2) + 1j * rng.standard_normal((2**width,) * 2)
            obs = g + g.conj().T
            site = int(rng.integers(net.spec.n_fine))
            worst = max(worst, abs(causal_cone_expectation(net, obs, site) - expectation_bruteforce(net, obs, site)))
    verdict(4, worst < 1e-10, f"50 networks, max |cone - brute| {worst:.1e}")


def test_criterion_5_chart_values(verdict):
    cs = generate_mera_causet("binary", 64, 5)
    dzeta = [embed_event(BINARY, cs, (k, 1)).zeta - embed_event(BINARY, cs, (k, 0)).zeta for k in range(6)]
    dtau = [embed_event(BINARY, cs, (k, 0)).tau - embed_event(BINARY, cs, (k + 1, 0)).tau for k in range(5)]
    tau0 = embed_event(BINARY, cs, (0, 0)).tau
    err = max(max(abs(d - 2 / 3) for d in dzeta), max(abs(d - math.log(2)) for d in dtau), abs(tau0), abs(BINARY.dzeta - 2 / 3))
    verdict(5, err < 1e-12, f"dzeta 2/3, dtau ln 2, tau0 0, max error {err:.1e}")


def test_criterion_6_metric_consistency(verdict):
    rng = np.random.default_rng(6)
    det_err = 0.0
    for tau, zeta in rng.uniform(-5, 5, size=(100, 2)):
        g = metric_components(BINARY, "static", (tau, zeta)).g
        det_err = max(det_err, abs(math.sqrt(abs(np.linalg.det(g))) - 1))

    # pullback of the conformal metric through (tau, zeta) -> (t, x), complex-step Jacobian
    def to_conformal(p):
        t = BINARY.t0 * np.exp(-p[0] / BINARY.alpha)
        return np.array([t, -p[1] * t / BINARY.alpha])

    pull_err = 0.0
    for tau, zeta in rng.uniform(-3, 1, size=(100, 2)) * [1, 4]:
        p, h = np.array([tau, zeta], dtype=complex), 1e-20
        jac = np.column_stack([to_conformal(p + 1j * h * e).imag / h for e in np.eye(2)])
        g_conf = metric_components(BINARY, "conformal", (to_conformal(p.real)[0].real, 0.0)).g
        g_static = metric_components(BINARY, "static", (tau, zeta)).g
        pull_err = max(pull_err, np.abs(jac.T @ g_conf @ jac - g_static).max())

    # central difference with step 1e-6; extended precision keeps roundoff below the truncation error
    null_err, h = 0.0, np.longdouble("1e-6")
    for zeta0 in (-2.0, 0.0, 0.5, 3.0):
        for u in (1, -1):
            for tau in np.linspace(-3, 0, 7, dtype=np.longdouble):
                z = float(lightlike_worldline(BINARY, zeta0, u, tau))
                dz = (lightlike_worldline(BINARY, zeta0, u, tau + h) - lightlike_worldline(BINARY, zeta0, u, tau - h)) / (2 * h)
                tangent = np.array([1.0, float(dz)])
                tau = float(tau)
                null_err = max(null_err, abs(tangent @ metric_components(BINARY, "static", (tau, z)).g @ tangent))
    ok = det_err < 1e-12 and pull_err < 1e-9 and null_err < 1e-10
    verdict(6, ok, f"det error {det_err:.1e}, pullback error {pull_err:.1e}, null error {null_err:.1e}")


def test_criterion_7_horizon_saturation(verdict):
    cs = generate_mera_causet("binary", 4096, 10)
    target = (0, 2048)
    past = causal_past(cs, [target])
    counts = [len(past[k]) for k in range(11)]
    zeta0 = embed_event(BINARY, cs, target).zeta
    edge_err = 0.0
    for k in range(11):
        zs = [embed_event(BINARY, cs, (k, s)).zeta for s in past[k]]
        (lo, hi), = continuum_past_extent(BINARY, [(zeta0, zeta0)], embed_event(BINARY, cs, (k, 0)).tau)
        edge_err = max(edge_err, abs(min(zs) - lo), abs(max(zs) - hi))
    ok = len(set(counts[4:])) == 1 and counts[4] <= 4 and edge_err <= 2 / 3
    verdict(7, ok, f"past counts {counts}, max edge offset {edge_err:.3f}")


def test_criterion_8_volume_density(verdict):
    cs = generate_mera_causet("binary", 2**14, 9)
    ln2 = math.log(2)
    densities = []
    for k in range(3, 9):
        tau = embed_event(BINARY, cs, (k, 0)).tau
        densities.append(volume_count(BINARY, cs, (tau - ln2 / 2, tau + ln2 / 2), (-10.0, 10.0)).density)
    spread = (max(densities) - min(densities)) / min(densities)
    verdict(8, spread <= 0.10, f"densities {[round(d, 4) for d in densities]}, spread {spread:.1%}")


def test_criterion_9_cmera_canonical_structure(verdict):
    n, dz, alpha, m, steps = 64, 0.1, 1.0, 0.5, 100
    h = build_hamiltonian(n, dz, alpha, m)
    dtau = alpha / steps
    canonical = check_canonical(propagator(h.total, alpha))
    g = ground_state(h)
    e0 = g.energy(h)
    energies = []
    evolve_covariance(g, h.total, dtau, steps, lambda _, cov: energies.append(GaussianFieldState(n, dz, cov).energy(h)))
    drift = max(abs(e - e0) for e in energies) / abs(e0)
    w = np.abs(np.linalg.eigvals(symplectic_form(n) @ h.mk).imag)
    k = 2 * np.pi * np.arange(n) / (n * dz)
    expected = np.sqrt(m**2 + (2 / dz * np.sin(k * dz / 2)) ** 2)
    disp = np.abs(np.sort(w) - np.sort(np.concatenate([expected, expected]))).max()
    ok = canonical < 1e-9 and drift < 1e-9 and disp < 1e-10
    verdict(9, ok, f"canonical {canonical:.1e}, energy drift {drift:.1e}, dispersion error {disp:.1e}")


def test_criterion_10_dilation_echo(verdict):
    # discretization-limited: lattice spacing and the finite ring bound the accuracy
    n, dz, s = 256, 0.1, 0.5
    h = build_hamiltonian(n, dz, 1.0, 0.5)
    evolved = evolve_covariance(ground_state(h), h.ml, s / 50, 50)
    center = n // 2
    seps = np.arange(3, n // 4 + 1)
    got = evolved.cov[center, center + seps]
    ref = ground_correlator(h, seps * dz * np.exp(-s))
    err = np.abs(got - ref).max() / abs(ground_correlator(h, [0.0])[0])
    verdict(10, err <= 0.05, f"n=256 dilated correlator error {err:.1%} of C(0)")
