import itertools

import numpy as np
import pytest

from sepdist import bell
from sepdist.bell import BellProtocolConfig, assemble_rho0, assemble_rho1, assemble_rho2, run_bell
from sepdist.certificates import CERTIFIED
from sepdist.checks import ConsistencyError
from sepdist.qudit import Bipartition, SystemLayout, min_eigenvalue, partial_trace, partial_transpose, permute_systems

TOL = 1e-10
CONFIGS = [(2, 3), (2, 4), (3, 7), (4, 15)]


def omega_pow(K, e):
    return np.exp(2j * np.pi * (e % K) / K)


def oracle_rho1(d, K, s):
    """Symmetrized state built directly from amplitude formulas over (A, C, B)."""
    n = d**3
    idx = lambda a, c, b: (a * d + c) * d + b
    M = np.zeros((n, n), dtype=complex)
    for k in range(K):
        v = np.zeros(n, dtype=complex)
        for j, l in itertools.product(range(d), repeat=2):
            v[idx(j, j, l)] = omega_pow(K, (s[j] - s[l]) * k) / d
        M += np.outer(v, v.conj())
    for j, l in itertools.product(range(d), repeat=2):
        if j != l:
            M[idx(j, l, j), idx(j, l, j)] += M[idx(j, j, l), idx(j, j, l)]
    return M / np.trace(M).real


@pytest.fixture(scope="module")
def traces():
    return {c: run_bell(BellProtocolConfig.make(*c), TOL) for c in CONFIGS}


def test_phi_state_qubit_example():
    cfg = BellProtocolConfig.make(2, 3)
    w = np.exp(2j * np.pi / 3)
    np.testing.assert_allclose(bell.phi_state(cfg, 1).amplitudes, np.array([1, w]) / np.sqrt(2), atol=TOL)
    np.testing.assert_allclose(bell.phi_state(cfg, 0, -1).amplitudes, np.array([1, 1]) / np.sqrt(2), atol=TOL)
    with pytest.raises(ValueError):
        bell.phi_state(cfg, 3)


def test_chi_examples_qubit():
    cfg = BellProtocolConfig.make(2, 3)
    w = np.exp(2j * np.pi / 3)
    np.testing.assert_allclose(bell.chi_state(cfg, 0, 2).amplitudes, np.array([1, 0, 0, 1]) / np.sqrt(2), atol=TOL)
    np.testing.assert_allclose(bell.chi_state(cfg, 1, 1).amplitudes, np.array([0, 1 / w, w, 0]) / np.sqrt(2), atol=TOL)
    # <chi_1(0)|chi_1(1)> = (w^-1 + w)/2 = cos(2 pi / 3)
    overlap = bell.chi_state(cfg, 1, 0).inner(bell.chi_state(cfg, 1, 1))
    assert abs(overlap - (-0.5)) < TOL


@pytest.mark.parametrize("d,K", CONFIGS)
def test_chi_states_are_maximally_entangled(d, K):
    cfg = BellProtocolConfig.make(d, K)
    for m, k in itertools.product(range(d), range(K)):
        red = partial_trace(bell.chi_state(cfg, m, k).projector(), {"A"})
        np.testing.assert_allclose(red.entries, np.eye(d) / d, atol=TOL)


def test_stage_states_example():
    cfg = BellProtocolConfig.make(2, 3)
    st = bell.stage_states(cfg, 0)
    np.testing.assert_allclose(st.phi0.amplitudes[[0, 1, 4, 5]], 0.5, atol=TOL)
    expected = np.zeros(8)
    expected[[0, 1, 6, 7]] = 0.5  # |j, j, l> over (A, C, B)
    np.testing.assert_allclose(st.phi1.amplitudes, expected, atol=TOL)


def test_phi1_literal_amplitudes_qutrit():
    cfg = BellProtocolConfig.make(3, 7)
    s = (0, 1, 3)
    for k in range(7):
        amp = bell.stage_states(cfg, k).phi1
        for j, l in itertools.product(range(3), repeat=2):
            assert abs(amp.amplitude((j, j, l)) - omega_pow(7, (s[j] - s[l]) * k) / 3) < TOL


@pytest.mark.parametrize("d,K", CONFIGS)
def test_rho1_matches_direct_oracle(d, K):
    cfg = BellProtocolConfig.make(d, K)
    r1 = assemble_rho1(cfg)
    np.testing.assert_allclose(r1.rho1.entries, oracle_rho1(d, K, cfg.phases.s), atol=TOL)
    assert all(c.passed for c in r1.checks)


def test_rho1_qubit_weights():
    cfg = BellProtocolConfig.make(2, 3)
    rho = assemble_rho1(cfg).rho1
    lay = rho.layout
    assert abs(rho.entries[0, 7] - 1 / 6) < TOL  # GHZ coherence = (1/3)(1/2)
    for digits in [(0, 0, 1), (1, 1, 0), (0, 1, 0), (1, 0, 1)]:
        i = lay.basis_index(digits)
        assert abs(rho.entries[i, i] - 1 / 6) < TOL
    assert abs(rho.trace() - 1) < TOL


def test_rho1_independent_of_K_beyond_minimum():
    a = assemble_rho1(BellProtocolConfig.make(2, 3)).rho1
    b = assemble_rho1(BellProtocolConfig.make(2, 4)).rho1
    np.testing.assert_allclose(a.entries, b.entries, atol=TOL)


@pytest.mark.parametrize("d,K,weight", [(2, 3, 2 / 9), (3, 7, 3 / 35)])
def test_rho0_weights(d, K, weight):
    cfg = BellProtocolConfig.make(d, K)
    assert abs(cfg.mixture_weight - weight) < 1e-15
    r1 = assemble_rho1(cfg)
    assert all(abs(w - weight) < TOL for w, _ in r1.ensemble[:K])
    r0 = assemble_rho0(cfg, r1)
    assert all(c.passed for c in r0.checks)


def test_rho0_projector_weight_qutrit():
    cfg = BellProtocolConfig.make(3, 7)
    assert abs(cfg.projector_weight - 1 / 15) < 1e-15
    r0 = assemble_rho0(cfg)
    abc = permute_systems(r0.rho, ("A", "B", "C"))
    # projector on |j, j, l - j> with j=0, l=1 ; the k-mixture has no support with C != 0
    i = abc.layout.basis_index((0, 0, 1))
    assert abs(abc.entries[i, i] - 1 / 15) < TOL


@pytest.mark.parametrize("d,K", CONFIGS)
def test_alice_gate_maps_rho0_to_rho1(d, K):
    cfg = BellProtocolConfig.make(d, K)
    r1 = assemble_rho1(cfg)
    r0 = assemble_rho0(cfg, r1)
    U = bell.alice_gate(cfg)
    np.testing.assert_allclose(U @ r0.rho.entries @ U.conj().T, r1.rho1.entries, atol=TOL)


@pytest.mark.parametrize("d,K", CONFIGS)
def test_rho2_chi0_term_and_outcomes(d, K, traces):
    t = traces[(d, K)]
    assert abs(t.success_probability - 1 / (2 * d - 1)) < TOL
    assert abs(t.success_fidelity - 1) < TOL
    probs = [o.probability for o in t.outcome_table]
    assert abs(sum(probs) - 1) < TOL
    assert all(abs(p - 2 / (2 * d - 1)) < TOL for p in probs[1:])


def test_rho2_qutrit_failure_probability_is_two_fifths(traces):
    t = traces[(3, 7)]
    assert [o.outcome for o in t.outcome_table] == ["0", "1", "2"]
    assert abs(t.outcome_table[1].probability - 0.4) < TOL


@pytest.mark.parametrize("d,K", CONFIGS)
def test_all_checks_and_certificates_pass(d, K, traces):
    t = traces[(d, K)]
    assert t.ok
    failed = [c.equation for c in t.checks if not c.passed]
    assert failed == []
    for cert in t.certificates:
        assert set(cert.verdicts.values()) == {CERTIFIED}


def test_run_examples():
    t = run_bell(BellProtocolConfig.make(2, 3))
    assert abs(t.success_probability - 1 / 3) < TOL
    t = run_bell(BellProtocolConfig.make(3, 7))
    assert abs(t.success_probability - 0.2) < TOL


@pytest.mark.parametrize("d,K", CONFIGS)
def test_rho1_separable_across_B_and_C(d, K, traces):
    rho = traces[(d, K)].rho1
    for side in ("B", "C"):
        assert min_eigenvalue(partial_transpose(rho, Bipartition.of(rho.layout, [side]))) >= -TOL


def test_chi0_is_k_independent_and_others_are_not():
    cfg = BellProtocolConfig.make(3, 7)
    ref = bell.chi_state(cfg, 0, 0)
    assert all(ref.allclose(bell.chi_state(cfg, 0, k)) for k in range(7))
    for m in (1, 2):
        assert min(abs(bell.chi_state(cfg, m, 0).inner(bell.chi_state(cfg, m, k))) for k in range(7)) < 1 - 1e-3


def test_rho2_decomposition_is_a_pure_state_ensemble():
    cfg = BellProtocolConfig.make(2, 3)
    r2 = assemble_rho2(cfg)
    assert abs(r2.decomposition.weight_sum() - 1) < TOL
    assert r2.decomposition.cut_name == "AB|C"


def test_invalid_configs():
    with pytest.raises(ValueError):
        BellProtocolConfig.make(1)
    with pytest.raises(ValueError):
        BellProtocolConfig.make(3, 6)
    with pytest.raises(ValueError):
        BellProtocolConfig.make(3, s=(0, 1, 2))


def test_strict_mode_raises_on_broken_closed_form(monkeypatch):
    original = bell.rho1_closed_form

    def corrupted(config):
        rho = original(config)
        mat = rho.entries.copy()
        mat[0, 0] += 1e-6
        mat[1, 1] -= 1e-6
        return type(rho)(rho.layout, mat)

    monkeypatch.setattr(bell, "rho1_closed_form", corrupted)
    with pytest.raises(ConsistencyError) as err:
        run_bell(BellProtocolConfig.make(2, 3))
    assert err.value.check.equation == "rho1_closed_form"
    assert err.value.trace is not None
    lenient = run_bell(BellProtocolConfig.make(2, 3), strict=False)
    assert not lenient.ok


def test_labels_are_ACB():
    cfg = BellProtocolConfig.make(2, 3)
    assert cfg.layout == SystemLayout.uniform("ACB", 2)
