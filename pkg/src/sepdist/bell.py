"""Two-party qudit Bell-state distribution with a separable carrier.

Alice holds ``|phi(k)>_A``, Bob holds ``|phi(-k)>_B`` and the carrier C
starts in ``|0>``. Alice adds A into C, C travels to Bob, Bob subtracts B
from C, and measuring C = 0 leaves AB in ``|chi_0> = sum_j |j j>/sqrt(d)``.

Every stage is stored over the fixed label order (A, C, B). The mixed
states are built by averaging over k and adding swap-mirror projectors
(the constructive route) and compared against closed forms written out
term by term.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .certificates import (
    CertificateReport,
    Ensemble,
    ProductDecomposition,
    certify,
    symmetrize_by_projectors,
    transport_by_swap,
)
from .checks import Check, ConsistencyError, first_failure
from .qudit import (
    EPS_NORM,
    Bipartition,
    DensityMatrix,
    Outcome,
    PureState,
    ScaledDensity,
    SystemLayout,
    apply_unitary,
    cadd_gate,
    fidelity,
    ghz_state,
    max_deviation,
    measure_subsystem,
    permute_systems,
    swap_labels,
    tensor,
)
from .sidon import PhaseSystem, canonical_system, minimal_K_for, orthogonality_sums, verify_conditions

LABELS = ("A", "C", "B")
SWAP = (("B", "C"),)


@dataclass(frozen=True)
class BellProtocolConfig:
    d: int
    phases: PhaseSystem

    def __post_init__(self):
        if self.phases.d != self.d:
            raise ValueError(f"phase system has {self.phases.d} exponents, d={self.d}")
        report = verify_conditions(self.phases.s, self.phases.K)
        if not report:
            raise ValueError(f"phase system violates its conditions: {report.violation}")

    @classmethod
    def make(cls, d: int, K: int | None = None, s=None) -> BellProtocolConfig:
        """Canonical exponents unless ``s`` is given; least admissible K unless ``K`` is given."""
        if s is None:
            s = canonical_system(d).s
        s = tuple(int(x) for x in s)
        if K is None:
            K = minimal_K_for(s)
        return cls(d, PhaseSystem(s, K))

    @property
    def K(self) -> int:
        return self.phases.K

    @property
    def layout(self) -> SystemLayout:
        return SystemLayout.uniform(LABELS, self.d)

    @property
    def mixture_weight(self) -> float:
        """Weight of each k term in the normalized state, ``d / (K (2d - 1))``."""
        return self.d / (self.K * (2 * self.d - 1))

    @property
    def projector_weight(self) -> float:
        return 1.0 / (self.d * (2 * self.d - 1))

    @property
    def success_probability(self) -> float:
        return 1.0 / (2 * self.d - 1)


def _check_k(config, k):
    if not 0 <= k < config.K:
        raise ValueError(f"k={k} outside 0..{config.K - 1}")


def phi_state(config: BellProtocolConfig, k: int, sign: int = 1, label: str | None = None) -> PureState:
    _check_k(config, k)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    label = label or ("A" if sign == 1 else "B")
    amps = config.phases.phases(k, sign) / np.sqrt(config.d)
    return PureState(SystemLayout(((label, config.d),)), amps)


def chi_state(config: BellProtocolConfig, m: int, k: int) -> PureState:
    """``(1/sqrt d) sum_j omega**((s_j - s_{j-m}) k) |j, j-m>`` on (A, B)."""
    _check_k(config, k)
    d, s, ps = config.d, config.phases.s, config.phases
    if not 0 <= m < d:
        raise ValueError(f"m={m} outside 0..{d - 1}")
    layout = SystemLayout.uniform(("A", "B"), d)
    vec = np.zeros(d * d, dtype=complex)
    for j in range(d):
        vec[layout.basis_index((j, (j - m) % d))] = ps.phase((s[j] - s[(j - m) % d]) * k)
    return PureState(layout, vec / np.sqrt(d))


@functools.lru_cache(maxsize=32)
def alice_gate(config) -> np.ndarray:
    U = cadd_gate(config.layout, "A", "C")
    U.setflags(write=False)
    return U


@functools.lru_cache(maxsize=32)
def bob_gate(config) -> np.ndarray:
    U = cadd_gate(config.layout, "B", "C", inverse=True)
    U.setflags(write=False)
    return U


@dataclass(frozen=True, eq=False)
class StageStates:
    phi0: PureState
    phi1: PureState
    phi2: PureState


def stage_states(config: BellProtocolConfig, k: int) -> StageStates:
    zero = PureState.basis(SystemLayout((("C", config.d),)), (0,))
    phi0 = tensor([phi_state(config, k, 1), zero, phi_state(config, k, -1)])
    phi1 = apply_unitary(phi0, alice_gate(config))
    phi2 = apply_unitary(phi1, bob_gate(config))
    return StageStates(phi0, phi1, phi2)


def phi1_formula(config, k) -> PureState:
    """``(1/d) sum_{j,l} omega**((s_j - s_l) k) |j, j, l>`` over (A, C, B)."""
    d, s, ps = config.d, config.phases.s, config.phases
    layout = config.layout
    vec = np.zeros(layout.total_dim, dtype=complex)
    for j in range(d):
        for l in range(d):
            vec[layout.basis_index((j, j, l))] = ps.phase((s[j] - s[l]) * k) / d
    return PureState(layout, vec)


def phi2_formula(config, k) -> PureState:
    """``(1/d) sum_{j,l} omega**((s_j - s_l) k) |j - l, j, l>`` over (C, A, B)."""
    d, s, ps = config.d, config.phases.s, config.phases
    layout = SystemLayout.uniform(("C", "A", "B"), d)
    vec = np.zeros(layout.total_dim, dtype=complex)
    for j in range(d):
        for l in range(d):
            vec[layout.basis_index(((j - l) % d, j, l))] = ps.phase((s[j] - s[l]) * k) / d
    return PureState(layout, vec)


def chi_expansion(config, k) -> PureState:
    """``(1/sqrt d) sum_m |m>_C |chi_m(k)>_AB`` over (C, A, B)."""
    vec = 0
    for m in range(config.d):
        c = PureState.basis(SystemLayout((("C", config.d),)), (m,))
        vec = vec + tensor([c, chi_state(config, m, k)]).amplitudes
    return PureState(SystemLayout.uniform(("C", "A", "B"), config.d), vec / np.sqrt(config.d))


def _projector_sum(layout, weighted_digits) -> np.ndarray:
    diag = np.zeros(layout.total_dim)
    for digits, w in weighted_digits:
        diag[layout.basis_index(digits)] += w
    return np.diag(diag).astype(complex)


def _off_diagonal_pairs(d):
    return [(j, l) for j in range(d) for l in range(d) if j != l]


def rho1_mixture_formula(config) -> np.ndarray:
    """``(K/d^2) (sum_{j!=l} pi_jjl + d |GHZ><GHZ|)`` over (A, C, B)."""
    d, K = config.d, config.K
    layout = config.layout
    proj = _projector_sum(layout, [((j, j, l), 1.0) for j, l in _off_diagonal_pairs(d)])
    return K / d**2 * (proj + d * ghz_state(layout).projector().entries)


def rho1_closed_form(config) -> DensityMatrix:
    d = config.d
    layout = config.layout
    terms = [((j, j, l), 1.0) for j, l in _off_diagonal_pairs(d)]
    terms += [((j, l, j), 1.0) for j, l in _off_diagonal_pairs(d)]
    mat = ghz_state(layout).projector().entries / (2 * d - 1) + config.projector_weight * _projector_sum(layout, terms)
    return DensityMatrix(layout, mat)


def rho0_closed_form(config) -> DensityMatrix:
    """Initial product mixture, written over (A, B, C) and returned over (A, C, B)."""
    d, K = config.d, config.K
    abc = SystemLayout.uniform(("A", "B", "C"), d)
    zero = PureState.basis(SystemLayout((("C", d),)), (0,))
    mat = np.zeros((abc.total_dim,) * 2, dtype=complex)
    for k in range(K):
        psi = tensor([phi_state(config, k, 1), phi_state(config, k, -1), zero])
        mat += np.outer(psi.amplitudes, psi.amplitudes.conj())
    mat *= d / (K * (2 * d - 1))
    mat += config.projector_weight * _projector_sum(
        abc, [((j, j, (l - j) % d), 1.0) for j, l in _off_diagonal_pairs(d)]
    )
    return permute_systems(DensityMatrix(abc, mat), LABELS)


def rho2_closed_form(config) -> DensityMatrix:
    """Final state, written over (A, B, C) and returned over (A, C, B)."""
    d = config.d
    abc = SystemLayout.uniform(("A", "B", "C"), d)
    zero = PureState.basis(SystemLayout((("C", d),)), (0,))
    bell = tensor([chi_state(config, 0, 0), zero]).projector().entries
    terms = [((j, l, (j - l) % d), 1.0) for j, l in _off_diagonal_pairs(d)]
    terms += [((j, j, (l - j) % d), 1.0) for j, l in _off_diagonal_pairs(d)]
    mat = bell / (2 * d - 1) + config.projector_weight * _projector_sum(abc, terms)
    return permute_systems(DensityMatrix(abc, mat), LABELS)


def closed_form_ensemble(config) -> Ensemble:
    """The closed-form state as GHZ plus computational projectors."""
    d = config.d
    layout = config.layout
    ens: Ensemble = [(config.success_probability, ghz_state(layout))]
    for j, l in _off_diagonal_pairs(d):
        ens.append((config.projector_weight, PureState.basis(layout, (j, j, l))))
        ens.append((config.projector_weight, PureState.basis(layout, (j, l, j))))
    return ens


@dataclass(frozen=True, eq=False)
class Rho1Assembly:
    rho1: DensityMatrix
    mixture: ScaledDensity
    added_projectors: list
    ensemble: Ensemble
    decomposition: ProductDecomposition
    transported: ProductDecomposition
    checks: list[Check]


def assemble_rho1(config: BellProtocolConfig, tol: float = EPS_NORM) -> Rho1Assembly:
    """Average over k, add mirror projectors, normalize; then cross-check."""
    layout = config.layout
    n = layout.total_dim
    M = np.zeros((n, n), dtype=complex)
    phis = []
    for k in range(config.K):
        phi1 = stage_states(config, k).phi1
        phis.append(phi1)
        M += np.outer(phi1.amplitudes, phi1.amplitudes.conj())
    added, projectors = symmetrize_by_projectors(M, layout, SWAP)
    total = M + added
    scale = float(np.trace(total).real)
    rho1 = DensityMatrix(layout, total / scale)

    ensemble: Ensemble = [(1.0 / scale, p) for p in phis]
    ensemble += [(w / scale, PureState.basis(layout, digits)) for digits, w in projectors]
    dec = ProductDecomposition.from_ensemble(ensemble, [("A", "C"), ("B",)])
    transported = transport_by_swap(dec, SWAP)

    checks = [
        Check.deviation("rho1_mixture", "sum_k Phi1 Phi1^dag equals (K/d^2)(sum pi_jjl + d GHZ)",
                        np.max(np.abs(M - rho1_mixture_formula(config))), tol),
        Check.deviation("rho1_closed_form", "mixture plus mirror projectors equals the closed form",
                        max_deviation(rho1, rho1_closed_form(config)), tol),
        Check.deviation("rho1_normalization", "normalization equals K(2d-1)/d",
                        abs(scale - config.K * (2 * config.d - 1) / config.d), tol),
        Check.deviation("rho1_swap_symmetry", "rho1 invariant under B<->C",
                        np.max(np.abs(swap_labels(rho1, SWAP).entries - rho1.entries)), tol),
    ]
    return Rho1Assembly(rho1, ScaledDensity.from_matrix(layout, M), projectors, ensemble, dec, transported, checks)


@dataclass(frozen=True, eq=False)
class StageAssembly:
    rho: DensityMatrix
    decomposition: ProductDecomposition
    checks: list[Check]


def assemble_rho0(config: BellProtocolConfig, rho1: Rho1Assembly | None = None, tol: float = EPS_NORM) -> StageAssembly:
    """Undo Alice's gate on the symmetrized state; the result is fully product."""
    rho1 = rho1 or assemble_rho1(config, tol)
    Uinv = cadd_gate(config.layout, "A", "C", inverse=True)
    rho0 = apply_unitary(rho1.rho1, Uinv)
    ens = [(w, apply_unitary(psi, Uinv)) for w, psi in rho1.ensemble]
    dec = ProductDecomposition.from_ensemble(ens, [("A",), ("C",), ("B",)])
    U = alice_gate(config)
    checks = [
        Check.deviation("rho0_closed_form", "inverse-gate image equals the product-mixture closed form",
                        max_deviation(rho0, rho0_closed_form(config)), tol),
        Check.deviation("stage_map_rho0_rho1", "Alice's gate maps rho0 to rho1",
                        max_deviation(apply_unitary(rho0, U), rho1.rho1), tol),
        Check.deviation("rho0_mixture_weight", "per-k weight equals d/(K(2d-1))",
                        max(abs(w - config.mixture_weight) for w, _ in rho1.ensemble[: config.K]), tol),
    ]
    return StageAssembly(rho0, dec, checks)


def assemble_rho2(config: BellProtocolConfig, rho1: Rho1Assembly | None = None, tol: float = EPS_NORM) -> StageAssembly:
    """Push the symmetrized state through Bob's inverse gate."""
    rho1 = rho1 or assemble_rho1(config, tol)
    U = bob_gate(config)
    rho2 = apply_unitary(rho1.rho1, U)
    ens = [(w, apply_unitary(psi, U)) for w, psi in closed_form_ensemble(config)]
    dec = ProductDecomposition.from_ensemble(ens, [("A", "B"), ("C",)])
    checks = [
        Check.deviation("rho2_closed_form", "Bob's gate image equals the final closed form",
                        max_deviation(rho2, rho2_closed_form(config)), tol),
        Check.deviation("stage_map_rho1_rho2", "closed forms are related by Bob's gate",
                        max_deviation(apply_unitary(rho1_closed_form(config), U), rho2_closed_form(config)), tol),
    ]
    return StageAssembly(rho2, dec, checks)


@dataclass(eq=False)
class BellProtocolTrace:
    config: BellProtocolConfig
    rho0: DensityMatrix
    rho1: DensityMatrix
    rho2: DensityMatrix
    certificates: list[CertificateReport]
    outcome_table: list[Outcome]
    success_probability: float
    success_fidelity: float
    checks: list[Check] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks) and all(c.ok for c in self.certificates)


def _cuts(layout, lefts):
    return [Bipartition.of(layout, left) for left in lefts]


def _state_checks(config, tol) -> list[Check]:
    ps = config.phases
    orth = orthogonality_sums(ps)
    checks = [
        Check("phase_conditions", "exponents satisfy the bound and distinct pair sums",
              0.0, 0.0, bool(verify_conditions(ps.s, ps.K))),
        Check.deviation("orthogonality", "character-sum identities over all index tuples",
                        orth.max_deviation, tol),
    ]
    dev1 = dev2 = devchi = 0.0
    for k in range(config.K):
        st = stage_states(config, k)
        dev1 = max(dev1, np.max(np.abs(st.phi1.amplitudes - phi1_formula(config, k).amplitudes)))
        p2 = permute_systems(st.phi2, ("C", "A", "B")).amplitudes
        dev2 = max(dev2, np.max(np.abs(p2 - phi2_formula(config, k).amplitudes)))
        devchi = max(devchi, np.max(np.abs(p2 - chi_expansion(config, k).amplitudes)))
    checks += [
        Check.deviation("phi1", "Alice's gate output matches the phase-sum formula", dev1, tol),
        Check.deviation("phi2", "Bob's gate output matches the shifted-index formula", dev2, tol),
        Check.deviation("phi2_chi_expansion", "final pure state equals sum_m |m>|chi_m(k)>/sqrt(d)", devchi, tol),
    ]
    chi0 = chi_state(config, 0, 0)
    dev0 = max(np.max(np.abs(chi_state(config, 0, k).amplitudes - chi0.amplitudes)) for k in range(config.K))
    checks.append(Check.deviation("chi0_k_independence", "chi_0(k) identical for all k", dev0, tol))
    worst = 0.0
    for m in range(1, config.d):
        ref = chi_state(config, m, 0)
        # smallest overlap modulus with chi_m(0); must drop below one
        least = min(abs(ref.inner(chi_state(config, m, k))) for k in range(config.K))
        worst = max(worst, least)
    checks.append(Check("chi_m_k_dependence", "every chi_m, m != 0, changes with k",
                        worst, 1.0 - tol, worst < 1.0 - tol))
    return checks


def run_bell(config: BellProtocolConfig, tol: float = EPS_NORM, strict: bool = True) -> BellProtocolTrace:
    """Build every stage, certify it, and measure the carrier.

    With ``strict`` the first failed check raises ConsistencyError carrying
    the partial trace.
    """
    d = config.d
    layout = config.layout
    checks = _state_checks(config, tol)
    r1 = assemble_rho1(config, tol)
    r0 = assemble_rho0(config, r1, tol)
    r2 = assemble_rho2(config, r1, tol)
    checks += r1.checks + r0.checks + r2.checks

    certs = [
        certify("rho0", r0.rho, [(r0.decomposition, "direct")], _cuts(layout, ["A", "B", "C"]), tol),
        certify("rho1", r1.rho1, [(r1.decomposition, "direct"), (r1.transported, "swap B<->C")],
                _cuts(layout, ["B", "C"]), tol),
        certify("rho2", r2.rho, [(r2.decomposition, "direct")], _cuts(layout, ["C"]), tol),
    ]
    table = measure_subsystem(r2.rho, ["C"])
    p_total = sum(o.probability for o in table)
    success = table[0]
    fid = fidelity(success.post_state, chi_state(config, 0, 0)) if success.post_state is not None else 0.0
    fail_dev = max(abs(o.probability - 2.0 / (2 * d - 1)) for o in table[1:])
    checks += [
        Check.deviation("outcome_normalization", "carrier outcome probabilities sum to 1", abs(p_total - 1.0), tol),
        Check.deviation("success_probability", "P(C=0) equals 1/(2d-1)",
                        abs(success.probability - config.success_probability), tol),
        Check.deviation("success_fidelity", "C=0 branch is exactly chi_0", 1.0 - fid, tol),
        Check.deviation("failure_probabilities", "each C=c != 0 has probability 2/(2d-1)", fail_dev, tol),
    ]
    trace = BellProtocolTrace(
        config, r0.rho, r1.rho1, r2.rho, certs, table, success.probability, fid, checks,
        notes=["carrier outcomes c != 0 are reported as failure branches; no recovery step is applied"],
    )
    if strict:
        bad = first_failure(checks)
        if bad is None:
            for cert in certs:
                if not cert.ok:
                    bad = Check(f"certificate_{cert.target}", "separability certificate", 1.0, 0.0, False)
                    break
        if bad is not None:
            raise ConsistencyError(bad, trace)
    return trace
