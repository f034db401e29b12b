import itertools

import numpy as np
import pytest

from sepdist import ghz
from sepdist.certificates import CERTIFIED
from sepdist.checks import ConsistencyError
from sepdist.ghz import GhzProtocolConfig, ResourceGuardError, constraint_check, run_ghz
from sepdist.qudit import Bipartition, DensityMatrix, SystemLayout, min_eigenvalue, partial_transpose, permute_systems

TOL = 1e-10


def oracle_rho1_n3(exponents=(1, 2, 4), K=7):
    """k-average of the N=3 product form, mirrored under D_i <-> A_{i+1}.

    Qubit order (A1, D1, D2, A2, A3).
    """
    w = lambda e: np.exp(2j * np.pi * (e % K) / K)
    M = np.zeros((32, 32), dtype=complex)
    for k in range(K):
        al, be, ga = (w(e * k) for e in exponents)
        add = np.zeros(8, dtype=complex)
        add[0], add[7] = 1, al
        v = np.kron(np.kron(add, [1, be]), [1, ga]) / np.sqrt(8)
        M += np.outer(v, v.conj())
    diag = np.real(np.diag(M)).copy()
    bits = lambda i: tuple((i >> (4 - p)) & 1 for p in range(5))
    out = M.copy()
    for i in range(32):
        a, d1, d2, a2, a3 = bits(i)
        j = int("".join(map(str, (a, a2, a3, d1, d2))), 2)
        out[i, i] = max(diag[i], diag[j])
    return out / np.trace(out).real


@pytest.fixture(scope="module")
def traces():
    return {n: run_ghz(GhzProtocolConfig.make(n), TOL) for n in (3, 4)}


def test_default_exponents():
    assert ghz.default_exponents(3) == ((1, 2, 4), 7)
    assert ghz.default_exponents(4) == ((1, 2, 4, 8), 15)
    with pytest.raises(ValueError):
        ghz.default_exponents(2)


def test_layout_and_swap():
    cfg = GhzProtocolConfig.make(3)
    assert cfg.labels == ("A1", "D1", "D2", "A2", "A3")
    assert cfg.swap == (("D1", "A2"), ("D2", "A3"))


def test_resource_guard():
    with pytest.raises(ResourceGuardError):
        GhzProtocolConfig.make(6)
    with pytest.raises(ValueError):
        GhzProtocolConfig.make(2)


def test_constraint_check_default_passes():
    for n in (3, 4, 5):
        assert constraint_check(GhzProtocolConfig.make(n)).passed(TOL)


def test_constraint_check_power_sums_n3():
    rep = constraint_check(GhzProtocolConfig.make(3))
    powers = [e for e in rep.entries if e.family == "power"]
    assert [e.exponent for e in powers] == [1, 2, 3, 4, 5, 6]
    assert max(e.value for e in powers) < TOL


def test_constraint_check_constant_gamma_is_reported():
    # gamma = omega^0 for every k: sum_k gamma = K, so |mean| = 1
    rep = constraint_check(GhzProtocolConfig.make(3, exponents=(1, 2, 0), K=7))
    assert not rep.passed(TOL)
    gamma = [e for e in rep.entries if e.name == "sum_k gamma"]
    assert gamma and abs(gamma[0].value - 1) < TOL


@pytest.mark.parametrize("N", [3, 4, 5])
def test_default_exponent_differences_never_vanish_mod_K(N):
    """Integer oracle: only the GHZ pair of amplitude labels has equal exponent mod K."""
    e, K = ghz.default_exponents(N)
    labels = [(a, b) for a in (0, 1) for b in itertools.product((0, 1), repeat=N - 1)]
    expo = {lab: e[0] * lab[0] + sum(x * y for x, y in zip(e[1:], lab[1])) for lab in labels}
    ghz_pair = {(0, (0,) * (N - 1)), (1, (1,) * (N - 1))}
    for u, v in itertools.combinations(labels, 2):
        same = (expo[u] - expo[v]) % K == 0
        assert same == ({u, v} == ghz_pair)


def test_linear_exponents_break_the_product_constraint():
    # e_j = j: 1 + 2 + 3 = 6, not a multiple of 7
    rep = constraint_check(GhzProtocolConfig.make(3, exponents=(1, 2, 3), K=7))
    assert rep.family_max("product") > 0.5


def _cross_block_max(cfg):
    M2 = ghz.mixture_matrix(cfg, stage=2)
    order = cfg.ancillas + cfg.parties
    moved = permute_systems(DensityMatrix(cfg.layout, M2, validate=False), order).entries
    nb = 2 ** (cfg.N - 1)
    blocks = moved.reshape(nb, 2**cfg.N, nb, 2**cfg.N)
    return max(np.max(np.abs(blocks[x, :, y, :])) for x in range(nb) for y in range(nb) if x != y)


def test_cross_terms_vanish_exactly_when_branch_constraints_hold():
    agree = 0
    for e in itertools.product(range(7), repeat=3):
        cfg = GhzProtocolConfig.make(3, exponents=e, K=7)
        rep = constraint_check(cfg)
        vanish = _cross_block_max(cfg) / cfg.K < TOL
        assert vanish == (rep.family_max("branch-cross") < TOL), e
        if rep.passed(TOL):
            assert vanish
        agree += vanish
    assert 0 < agree < 343


@pytest.mark.parametrize("e", [(1, 2, 0), (1, 2, 3), (1, 1, 5)])
def test_corrupted_exponents_abort_with_named_sum(e):
    cfg = GhzProtocolConfig.make(3, exponents=e, K=7)
    with pytest.raises(ConsistencyError) as err:
        ghz.assemble_ghz_rho1(cfg)
    assert err.value.check.equation.startswith("constraints_")
    assert "sum_k" in err.value.check.description


def test_phi1_literal_product_form():
    cfg = GhzProtocolConfig.make(3)
    w = np.exp(2j * np.pi / 7)
    for k in range(7):
        v = ghz.phi1_state(cfg, k)
        lay = v.layout
        al, be, ga = w**k, w ** (2 * k), w ** (4 * k)
        for digits in itertools.product((0, 1), repeat=5):
            a, d1, d2, b, c = digits
            expect = 0
            if a == d1 == d2:
                expect = (al if a else 1) * (be if b else 1) * (ga if c else 1) / np.sqrt(8)
            assert abs(v.amplitude(digits) - expect) < TOL
            assert lay.labels == ("A1", "D1", "D2", "A2", "A3")


def test_chi_literal_branch_states():
    cfg = GhzProtocolConfig.make(3)
    w = np.exp(2j * np.pi / 7)
    k = 3
    al, be, ga = w**k, w ** (2 * k), w ** (4 * k)
    lay = SystemLayout.uniform(cfg.parties, 2)
    expected = {
        (0, 0): {(0, 0, 0): 1, (1, 1, 1): al * be * ga},
        (0, 1): {(0, 0, 1): ga, (1, 1, 0): al * be},
        (1, 0): {(0, 1, 0): be, (1, 0, 1): al * ga},
        (1, 1): {(0, 1, 1): be * ga, (1, 0, 0): al},
    }
    for x, amps in expected.items():
        vec = np.zeros(8, dtype=complex)
        for digits, c in amps.items():
            vec[lay.basis_index(digits)] = c / np.sqrt(2)
        np.testing.assert_allclose(ghz.chi_state(cfg, x, k).amplitudes, vec, atol=TOL)


def test_rho1_matches_oracle_n3():
    r1 = ghz.assemble_ghz_rho1(GhzProtocolConfig.make(3))
    np.testing.assert_allclose(r1.rho1.entries, oracle_rho1_n3(), atol=TOL)


@pytest.mark.parametrize("N", [3, 4])
def test_rho1_term_weights(N):
    rho = ghz.assemble_ghz_rho1(GhzProtocolConfig.make(N)).rho1.entries
    n = rho.shape[0]
    # GHZ_{2N-1} coherence is half its weight
    assert abs(rho[0, n - 1] - 0.5 / (2**N - 1)) < TOL
    diag = np.real(np.diag(rho)).copy()
    diag[0] -= 0.5 / (2**N - 1)
    diag[-1] -= 0.5 / (2**N - 1)
    nonzero = diag[diag > TOL]
    assert len(nonzero) == 2 ** (N + 1) - 4
    np.testing.assert_allclose(nonzero, 1 / (2 ** (N + 1) - 2), atol=TOL)


def test_rho1_closed_form_and_projector_count_n3():
    r1 = ghz.assemble_ghz_rho1(GhzProtocolConfig.make(3))
    assert len(r1.added_projectors) == 6
    assert all(c.passed for c in r1.checks)
    assert "rho1_closed_form" in [c.equation for c in r1.checks]


def test_rho0_weight_and_stage_map():
    cfg = GhzProtocolConfig.make(3)
    r1 = ghz.assemble_ghz_rho1(cfg)
    assert all(abs(w - 4 / 49) < TOL for w, _ in r1.ensemble[:7])
    r0 = ghz.assemble_ghz_rho0(cfg, r1)
    assert all(c.passed for c in r0.checks)
    U = ghz.alice_gate(cfg)
    np.testing.assert_allclose(U @ r0.rho.entries @ U.conj().T, r1.rho1.entries, atol=TOL)


@pytest.mark.parametrize("N", [3, 4])
def test_rho2_checks(N):
    r2 = ghz.assemble_ghz_rho2(GhzProtocolConfig.make(N))
    assert {c.equation: c.passed for c in r2.checks} == {
        "rho2_branch_cross_terms": True,
        "rho2_zero_branch": True,
        "rho2_mixture_full": True,
        "stage_map_rho1_rho2": True,
    }


def test_run_n3_outcomes(traces):
    t = traces[3]
    assert abs(t.success_probability - 1 / 7) < TOL
    assert abs(t.success_fidelity - 1) < TOL
    assert [o.outcome for o in t.outcome_table] == ["00", "01", "10", "11"]
    np.testing.assert_allclose([o.probability for o in t.outcome_table], [1 / 7, 2 / 7, 2 / 7, 2 / 7], atol=TOL)
    assert len(t.full_failure_table) == 12
    assert all(abs(o.probability - 1 / 14) < TOL for o in t.full_failure_table)


def test_run_n4(traces):
    t = traces[4]
    assert abs(t.success_probability - 1 / 15) < TOL
    assert len(t.full_failure_table) == 28


@pytest.mark.parametrize("N", [3, 4])
def test_everything_certified(N, traces):
    t = traces[N]
    assert t.ok
    for cert in t.certificates:
        assert set(cert.verdicts.values()) == {CERTIFIED}, cert.verdicts


@pytest.mark.parametrize("N", [3, 4])
def test_rho1_pairwise_ppt_on_each_ancilla(N, traces):
    t = traces[N]
    rho = t.rho1
    for a in t.config.ancillas:
        assert min_eigenvalue(partial_transpose(rho, Bipartition.of(rho.layout, [a]))) >= -TOL


def test_refined_decomposition_has_single_ancilla_factors():
    r1 = ghz.assemble_ghz_rho1(GhzProtocolConfig.make(3))
    groups = [tuple(g) for g in r1.refined.groups]
    assert ("D1",) in groups and ("D2",) in groups


def test_chi_k_dependence():
    cfg = GhzProtocolConfig.make(3)
    g = ghz.chi_state(cfg, (0, 0), 0)
    assert all(g.allclose(ghz.chi_state(cfg, (0, 0), k)) for k in range(7))
    for x in [(0, 1), (1, 0), (1, 1)]:
        ref = ghz.chi_state(cfg, x, 0)
        assert min(abs(ref.inner(ghz.chi_state(cfg, x, k))) for k in range(7)) < 1 - 1e-3
