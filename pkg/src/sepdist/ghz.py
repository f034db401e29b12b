"""N-party qubit GHZ distribution with separable ancillas.

Party ``A_j`` holds ``(|0> + omega**(e_j k) |1>)/sqrt 2`` with
``omega = exp(2 pi i / K)``. ``A_1`` copies its qubit onto ancillas
``D_1 .. D_{N-1}``, ancilla ``D_{j-1}`` travels to party ``A_j`` who
applies a CNOT from ``A_j`` onto it, and the all-zero ancilla outcome
leaves the parties in GHZ_N.

Registers are stored over ``(A1, D1, .., D{N-1}, A2, .., AN)``. Qubits
only; the party gate would become an inverse controlled-add for qudits.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field

import numpy as np

from .certificates import (
    CertificateReport,
    Ensemble,
    ProductDecomposition,
    certify,
    split_factor,
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

MAX_PARTIES = 5
DIM = 2

EXPONENT_NOTE = (
    "party phases use exponents e_j = 2^(j-1) mod K; the linear choice e_j = j "
    "breaks the unit-product constraint for N >= 3"
)
MIXTURE_NOTE = (
    "the k-averaged final mixture contains, besides K/2^(N-1) |0..0><0..0|_D x GHZ_N, "
    "diagonal remnants K/2^N (pi_{0x} + pi_{1 not x}) on every ancilla branch x != 0"
)


class ResourceGuardError(ValueError):
    pass


@dataclass(frozen=True)
class GhzProtocolConfig:
    N: int
    K: int
    exponents: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple(int(e) for e in self.exponents))
        if self.N < 3:
            raise ValueError(f"need at least 3 parties, got {self.N}")
        if self.N > MAX_PARTIES:
            raise ResourceGuardError(
                f"N={self.N} exceeds the resource guard of {MAX_PARTIES} parties "
                f"({2 * self.N - 1} qubits)"
            )
        if len(self.exponents) != self.N:
            raise ValueError(f"expected {self.N} exponents, got {len(self.exponents)}")
        if self.K < 2:
            raise ValueError(f"K must be at least 2, got {self.K}")

    @classmethod
    def make(cls, N: int, exponents=None, K: int | None = None) -> GhzProtocolConfig:
        if exponents is None:
            exponents, default_K = default_exponents(N)
            K = K or default_K
        return cls(N, K if K is not None else 2**N - 1, tuple(exponents))

    @property
    def parties(self) -> tuple[str, ...]:
        return tuple(f"A{j}" for j in range(1, self.N + 1))

    @property
    def ancillas(self) -> tuple[str, ...]:
        return tuple(f"D{i}" for i in range(1, self.N))

    @property
    def labels(self) -> tuple[str, ...]:
        return (self.parties[0],) + self.ancillas + self.parties[1:]

    @property
    def layout(self) -> SystemLayout:
        return SystemLayout.uniform(self.labels, DIM)

    @property
    def swap(self) -> tuple[tuple[str, str], ...]:
        """Ancilla block against the remote parties: ``D_i <-> A_{i+1}``."""
        return tuple(zip(self.ancillas, self.parties[1:]))

    @property
    def success_probability(self) -> float:
        return 1.0 / (2**self.N - 1)

    @property
    def projector_weight(self) -> float:
        return 1.0 / (2 ** (self.N + 1) - 2)

    def phase(self, j: int, k: int) -> complex:
        """Phase of party ``j`` (1-based) at index ``k``."""
        return np.exp(2j * np.pi * ((self.exponents[j - 1] * k) % self.K) / self.K)


def default_exponents(N: int) -> tuple[tuple[int, ...], int]:
    if N < 3:
        raise ValueError(f"need at least 3 parties, got {N}")
    return tuple(2 ** (j - 1) for j in range(1, N + 1)), 2**N - 1


def _check_k(config, k):
    if not 0 <= k < config.K:
        raise ValueError(f"k={k} outside 0..{config.K - 1}")


def party_state(config: GhzProtocolConfig, j: int, k: int) -> PureState:
    _check_k(config, k)
    label = config.parties[j - 1]
    return PureState(SystemLayout(((label, DIM),)), np.array([1.0, config.phase(j, k)]) / np.sqrt(2))


@functools.lru_cache(maxsize=32)
def alice_gate(config, inverse: bool = False) -> np.ndarray:
    layout = config.layout
    U = np.eye(layout.total_dim, dtype=complex)
    for anc in config.ancillas:
        U = cadd_gate(layout, config.parties[0], anc, inverse=inverse) @ U
    U.setflags(write=False)
    return U


@functools.lru_cache(maxsize=32)
def party_gate(config) -> np.ndarray:
    """CNOTs from each remote party onto its ancilla."""
    layout = config.layout
    U = np.eye(layout.total_dim, dtype=complex)
    for anc, party in zip(config.ancillas, config.parties[1:]):
        U = cadd_gate(layout, party, anc, inverse=DIM > 2) @ U
    U.setflags(write=False)
    return U


def phi0_state(config, k) -> PureState:
    zeros = [PureState.basis(SystemLayout(((a, DIM),)), (0,)) for a in config.ancillas]
    return tensor([party_state(config, 1, k)] + zeros + [party_state(config, j, k) for j in range(2, config.N + 1)])


def phi1_state(config, k) -> PureState:
    return apply_unitary(phi0_state(config, k), alice_gate(config))


def phi2_state(config, k) -> PureState:
    return apply_unitary(phi1_state(config, k), party_gate(config))


def branch_labels(config):
    return list(itertools.product((0, 1), repeat=config.N - 1))


def chi_state(config: GhzProtocolConfig, x, k: int) -> PureState:
    """Party state attached to ancilla outcome ``x`` in the final pure state.

    ``(c0 |0, x> + c1 |1, not x>)/sqrt 2`` over ``(A1, .., AN)`` with the
    coefficients read off the party phases.
    """
    _check_k(config, k)
    x = tuple(int(b) for b in x)
    if len(x) != config.N - 1:
        raise ValueError(f"branch label needs {config.N - 1} bits")
    layout = SystemLayout.uniform(config.parties, DIM)
    xbar = tuple(1 - b for b in x)
    c0 = np.prod([config.phase(j, k) for j, b in zip(range(2, config.N + 1), x) if b])
    c1 = config.phase(1, k) * np.prod([config.phase(j, k) for j, b in zip(range(2, config.N + 1), xbar) if b])
    vec = np.zeros(layout.total_dim, dtype=complex)
    vec[layout.basis_index((0,) + x)] = c0
    vec[layout.basis_index((1,) + xbar)] = c1
    return PureState(layout, vec / np.sqrt(2))


def chi_expansion(config, k) -> PureState:
    """``2**(-(N-1)/2) sum_x |x>_D |chi_x(k)>`` over ``(D.., A..)``."""
    anc = SystemLayout.uniform(config.ancillas, DIM)
    vec = 0
    for x in branch_labels(config):
        vec = vec + tensor([PureState.basis(anc, x), chi_state(config, x, k)]).amplitudes
    return PureState(anc + SystemLayout.uniform(config.parties, DIM), vec / np.sqrt(2 ** (config.N - 1)))


# amplitude labels of Phi1(k): A1 bit a, ancillas all equal to a, parties bits b
def _amplitude_labels(config):
    return [(a, b) for a in (0, 1) for b in itertools.product((0, 1), repeat=config.N - 1)]


def _exponent(config, a, b) -> int:
    e = config.exponents
    return e[0] * a + sum(ej * bj for ej, bj in zip(e[1:], b))


def _branch(a, b):
    return tuple(bj ^ a for bj in b)


@dataclass(frozen=True)
class ConstraintEntry:
    name: str
    family: str
    exponent: int
    value: float
    required: str = "vanish"


@dataclass(frozen=True)
class ConstraintReport:
    entries: tuple[ConstraintEntry, ...]

    @property
    def max_value(self) -> float:
        return max(e.value for e in self.entries)

    def worst(self) -> ConstraintEntry:
        return max(self.entries, key=lambda e: e.value)

    def passed(self, tol: float = EPS_NORM) -> bool:
        return self.max_value <= tol

    def family_max(self, family: str) -> float:
        vals = [e.value for e in self.entries if e.family == family]
        return max(vals) if vals else 0.0


def _mean_phase(K, r) -> complex:
    k = np.arange(K)
    return complex(np.exp(2j * np.pi * ((r * k) % K) / K).mean())


_GREEK = ("alpha", "beta", "gamma")


def _monomial(config, a, b, a2, b2) -> str:
    """Readable phase ratio for the cross term between two amplitude labels."""
    names = _GREEK if config.N == 3 else tuple(f"p{j}" for j in range(1, config.N + 1))
    num, den = [], []
    for name, u, v in zip(names, (a,) + b, (a2,) + b2):
        if u and not v:
            num.append(name)
        elif v and not u:
            den.append(name)
    top = "*".join(num) or "1"
    return top if not den else f"{top}/({'*'.join(den)})"


def constraint_check(config: GhzProtocolConfig) -> ConstraintReport:
    """Every phase sum that must vanish for the k-average to be separable.

    Pairs of amplitude labels of the pure stage state are enumerated; the
    all-zero / all-one pair is the GHZ coherence and must average to 1,
    every other pair must average to 0. Pairs are grouped by whether they
    lie in different ancilla branches of the final state or inside one.
    Values are ``|mean_k omega**(r k)|`` (deviation from 1 for the GHZ pair).
    """
    labels = _amplitude_labels(config)
    ones = (1,) * (config.N - 1)
    zeros = (0,) * (config.N - 1)
    entries: dict[tuple[str, int], ConstraintEntry] = {}
    for (a, b), (a2, b2) in itertools.combinations(labels, 2):
        r = _exponent(config, a2, b2) - _exponent(config, a, b)
        mean = _mean_phase(config.K, r)
        if {(a, b), (a2, b2)} == {(0, zeros), (1, ones)}:
            family, value, req = "product", abs(mean - 1.0), "equal 1"
        elif _branch(a, b) != _branch(a2, b2):
            family, value, req = "branch-cross", abs(mean), "vanish"
        else:
            family, value, req = "in-branch", abs(mean), "vanish"
        key = (family, r % config.K)
        name = f"sum_k {_monomial(config, a2, b2, a, b)}"
        if key not in entries:
            entries[key] = ConstraintEntry(name, family, r % config.K, value, req)
    if config.N == 3:
        # single-phase power sums under beta = alpha^2, gamma = alpha^4
        for r in range(1, 7):
            mean = _mean_phase(config.K, config.exponents[0] * r)
            entries[("power", r)] = ConstraintEntry(f"sum_k alpha^{r}", "power", r, abs(mean))
    return ConstraintReport(tuple(entries.values()))


def mixture_matrix(config, stage: int = 1) -> np.ndarray:
    n = config.layout.total_dim
    M = np.zeros((n, n), dtype=complex)
    build = phi1_state if stage == 1 else phi2_state
    for k in range(config.K):
        v = build(config, k).amplitudes
        M += np.outer(v, v.conj())
    return M


def rho1_closed_form_n3(config) -> DensityMatrix:
    """Symmetrized state for three parties, written out term by term."""
    if config.N != 3:
        raise ValueError("closed form is only written out for N = 3")
    layout = config.layout
    two_bits = [(0, 0), (0, 1), (1, 0), (1, 1)]
    diag = np.zeros(layout.total_dim)

    def add(a, dd, bb):
        diag[layout.basis_index((a,) + dd + bb)] += 1.0 / 14

    for i in two_bits[1:]:
        add(0, (0, 0), i)
        add(0, i, (0, 0))
    for i in two_bits[:3]:
        add(1, (1, 1), i)
        add(1, i, (1, 1))
    mat = ghz_state(layout).projector().entries / 7 + np.diag(diag)
    return DensityMatrix(layout, mat)


def projector_ensemble(config) -> Ensemble:
    """Symmetrized state as GHZ_{2N-1} at 1/(2^N - 1) plus computational projectors."""
    layout = config.layout
    n = config.N - 1
    zeros, ones = (0,) * n, (1,) * n
    w = config.projector_weight
    ens: Ensemble = [(config.success_probability, ghz_state(layout))]
    for b in itertools.product((0, 1), repeat=n):
        if b != zeros:
            ens.append((w, PureState.basis(layout, (0,) + zeros + b)))
            ens.append((w, PureState.basis(layout, (0,) + b + zeros)))
        if b != ones:
            ens.append((w, PureState.basis(layout, (1,) + ones + b)))
            ens.append((w, PureState.basis(layout, (1,) + b + ones)))
    return ens


def rho2_mixture_formula(config) -> np.ndarray:
    """Full k-average of the final pure state, over the stored layout."""
    N, K = config.N, config.K
    labels = config.ancillas + config.parties
    lay = SystemLayout.uniform(labels, DIM)
    mat = np.zeros((lay.total_dim,) * 2, dtype=complex)
    zero = PureState.basis(SystemLayout.uniform(config.ancillas, DIM), (0,) * (N - 1))
    g = tensor([zero, ghz_state(SystemLayout.uniform(config.parties, DIM))]).amplitudes
    mat += K / 2 ** (N - 1) * np.outer(g, g.conj())
    for x in branch_labels(config):
        if any(x):
            xbar = tuple(1 - b for b in x)
            for digits in (x + (0,) + x, x + (1,) + xbar):
                i = lay.basis_index(digits)
                mat[i, i] += K / 2**N
    return permute_systems(DensityMatrix(lay, mat, validate=False), config.labels).entries


@dataclass(frozen=True, eq=False)
class GhzRho1Assembly:
    rho1: DensityMatrix
    mixture: ScaledDensity
    added_projectors: list
    ensemble: Ensemble
    decomposition: ProductDecomposition
    transported: ProductDecomposition
    refined: ProductDecomposition
    constraints: ConstraintReport
    checks: list[Check]


def constraint_checks(report: ConstraintReport, tol) -> list[Check]:
    checks = []
    for family, desc in (
        ("product", "GHZ coherence phases multiply to one"),
        ("branch-cross", "cross terms between different ancilla branches average out"),
        ("in-branch", "coherences inside failure branches average out"),
        ("power", "single-phase power sums r = 1..6 vanish"),
    ):
        entries = [e for e in report.entries if e.family == family]
        if not entries:
            continue
        worst = max(entries, key=lambda e: e.value)
        checks.append(Check.deviation(f"constraints_{family}", f"{desc} (worst: {worst.name})", worst.value, tol))
    return checks


def assemble_ghz_rho1(config: GhzProtocolConfig, tol: float = EPS_NORM) -> GhzRho1Assembly:
    """Average over k and add the ancilla/party mirror projectors.

    Raises ConsistencyError naming the first non-vanishing phase sum when
    the exponents leave cross terms behind.
    """
    report = constraint_check(config)
    sums = constraint_checks(report, tol)
    bad = first_failure(c for c in sums if not c.equation.endswith("power"))
    if bad is not None:
        raise ConsistencyError(bad)

    layout = config.layout
    M = np.zeros((layout.total_dim,) * 2, dtype=complex)
    phis = []
    for k in range(config.K):
        phi = phi1_state(config, k)
        phis.append(phi)
        M += np.outer(phi.amplitudes, phi.amplitudes.conj())
    added, projectors = symmetrize_by_projectors(M, layout, config.swap)
    total = M + added
    scale = float(np.trace(total).real)
    rho1 = DensityMatrix(layout, total / scale)

    ensemble: Ensemble = [(1.0 / scale, p) for p in phis]
    ensemble += [(w / scale, PureState.basis(layout, digits)) for digits, w in projectors]
    groups = [(config.parties[0],) + config.ancillas, config.parties[1:]]
    dec = ProductDecomposition.from_ensemble(ensemble, groups)
    transported = transport_by_swap(dec, config.swap)
    # ancilla factors of the transported terms are products of single qubits
    refined = split_factor(transported, 1, [(a,) for a in config.ancillas])

    proj_ens = projector_ensemble(config)
    proj_mat = sum(w * np.outer(p.amplitudes, p.amplitudes.conj()) for w, p in proj_ens)
    checks = sums + [
        Check.deviation("rho1_projector_form", "constructed state equals GHZ_{2N-1} plus mirror projectors",
                        np.max(np.abs(rho1.entries - proj_mat)), tol),
        Check.deviation("rho1_swap_symmetry", "state invariant under D_i <-> A_{i+1}",
                        np.max(np.abs(swap_labels(rho1, config.swap).entries - rho1.entries)), tol),
        Check.deviation("rho1_normalization", "normalization equals K(2^{N+1}-2)/2^N",
                        abs(scale - config.K * (2 ** (config.N + 1) - 2) / 2**config.N), tol),
        Check("rho1_projector_count", "number of mirror projectors added equals 2^N - 2",
              float(len(projectors)), 0.0, len(projectors) == 2**config.N - 2),
    ]
    if config.N == 3:
        checks.insert(len(sums), Check.deviation(
            "rho1_closed_form", "constructed state equals the three-party closed form",
            max_deviation(rho1, rho1_closed_form_n3(config)), tol))
    return GhzRho1Assembly(
        rho1, ScaledDensity.from_matrix(layout, M), projectors, ensemble, dec, transported, refined, report, checks
    )


@dataclass(frozen=True, eq=False)
class StageAssembly:
    rho: DensityMatrix
    decomposition: ProductDecomposition
    checks: list[Check]


def assemble_ghz_rho0(config, rho1: GhzRho1Assembly | None = None, tol: float = EPS_NORM) -> StageAssembly:
    rho1 = rho1 or assemble_ghz_rho1(config, tol)
    Uinv = alice_gate(config, inverse=True)
    rho0 = apply_unitary(rho1.rho1, Uinv)
    ens = [(w, apply_unitary(psi, Uinv)) for w, psi in rho1.ensemble]
    dec = ProductDecomposition.from_ensemble(ens, [(l,) for l in config.labels])
    expected_w = 2**config.N / (config.K * (2 ** (config.N + 1) - 2))
    checks = [
        Check.deviation("stage_map_rho0_rho1", "Alice's gates map rho0 to rho1",
                        max_deviation(apply_unitary(rho0, alice_gate(config)), rho1.rho1), tol),
        Check.deviation("rho0_mixture_weight", "per-k product weight equals 2^N/(K(2^{N+1}-2))",
                        max(abs(w - expected_w) for w, _ in rho1.ensemble[: config.K]), tol),
    ]
    return StageAssembly(rho0, dec, checks)


def assemble_ghz_rho2(config, rho1: GhzRho1Assembly | None = None, tol: float = EPS_NORM) -> StageAssembly:
    rho1 = rho1 or assemble_ghz_rho1(config, tol)
    U = party_gate(config)
    rho2 = apply_unitary(rho1.rho1, U)
    ens = [(w, apply_unitary(psi, U)) for w, psi in projector_ensemble(config)]
    dec = ProductDecomposition.from_ensemble(ens, [config.parties] + [(a,) for a in config.ancillas])

    M2 = mixture_matrix(config, stage=2)
    anc_first = SystemLayout.uniform(config.ancillas + config.parties, DIM)
    moved = permute_systems(DensityMatrix(config.layout, M2, validate=False), anc_first.labels).entries
    nb = 2 ** (config.N - 1)
    blocks = moved.reshape(nb, 2**config.N, nb, 2**config.N)
    cross = max(
        (np.max(np.abs(blocks[x, :, y, :])) for x in range(nb) for y in range(nb) if x != y),
        default=0.0,
    )
    zero_branch = ghz_state(SystemLayout.uniform(config.parties, DIM)).projector().entries
    checks = [
        Check.deviation("rho2_branch_cross_terms", "k-average has no coherence between ancilla branches",
                        cross, tol),
        Check.deviation("rho2_zero_branch", "all-zero ancilla block of the k-average is (K/2^{N-1}) GHZ_N",
                        np.max(np.abs(blocks[0, :, 0, :] - config.K / nb * zero_branch)), tol),
        Check.deviation("rho2_mixture_full", "k-average equals GHZ term plus diagonal branch remnants",
                        np.max(np.abs(M2 - rho2_mixture_formula(config))), tol),
        Check.deviation("stage_map_rho1_rho2", "party gates map the projector form of rho1 to rho2",
                        np.max(np.abs(dec.reconstruct(config.layout) - rho2.entries)), tol),
    ]
    return StageAssembly(rho2, dec, checks)


@dataclass(eq=False)
class GhzProtocolTrace:
    config: GhzProtocolConfig
    rho0: DensityMatrix
    rho1: DensityMatrix
    rho2: DensityMatrix
    certificates: list[CertificateReport]
    outcome_table: list[Outcome]
    full_failure_table: list[Outcome]
    success_probability: float
    success_fidelity: float
    constraints: ConstraintReport
    checks: list[Check] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks) and all(c.ok for c in self.certificates)


def _pure_state_checks(config, tol) -> list[Check]:
    zeros = (0,) * (config.N - 1)
    g = ghz_state(SystemLayout.uniform(config.parties, DIM))
    dev_exp = dev0 = 0.0
    for k in range(config.K):
        p2 = permute_systems(phi2_state(config, k), config.ancillas + config.parties)
        dev_exp = max(dev_exp, np.max(np.abs(p2.amplitudes - chi_expansion(config, k).amplitudes)))
        dev0 = max(dev0, np.max(np.abs(chi_state(config, zeros, k).amplitudes - g.amplitudes)))
    worst = 0.0
    for x in branch_labels(config):
        if any(x):
            ref = chi_state(config, x, 0)
            worst = max(worst, min(abs(ref.inner(chi_state(config, x, k))) for k in range(config.K)))
    checks = [
        Check.deviation("phi2_chi_expansion", "final pure state equals sum_x |x>_D |chi_x(k)>", dev_exp, tol),
        Check.deviation("chi00_k_independence", "all-zero branch state is GHZ_N for every k", dev0, tol),
        Check("chi_k_dependence", "every branch x != 0 changes with k", worst, 1.0 - tol, worst < 1.0 - tol),
    ]
    if config.N == 3:
        dev14 = 0.0
        for k in range(config.K):
            al, be, ga = (config.phase(j, k) for j in (1, 2, 3))
            ad = np.zeros(8, dtype=complex)
            ad[0], ad[7] = 1, al
            v = np.kron(np.kron(ad, [1, be]), [1, ga]) / np.sqrt(8)
            dev14 = max(dev14, np.max(np.abs(phi1_state(config, k).amplitudes - v)))
        checks.insert(0, Check.deviation(
            "phi1", "Alice's gate output equals (|000>+a|111>)(|0>+b|1>)(|0>+c|1>)/sqrt 8", dev14, tol))
    return checks


def run_ghz(config: GhzProtocolConfig, tol: float = EPS_NORM, strict: bool = True) -> GhzProtocolTrace:
    layout = config.layout
    checks = _pure_state_checks(config, tol)
    r1 = assemble_ghz_rho1(config, tol)
    r0 = assemble_ghz_rho0(config, r1, tol)
    r2 = assemble_ghz_rho2(config, r1, tol)
    checks += r1.checks + r0.checks + r2.checks

    single = [Bipartition.of(layout, [l]) for l in config.labels]
    anc_cuts = [Bipartition.of(layout, [a]) for a in config.ancillas]
    block = Bipartition.of(layout, config.ancillas)
    remote = Bipartition.of(layout, config.parties[1:])
    certs = [
        certify("rho0", r0.rho, [(r0.decomposition, "direct")], single, tol),
        certify(
            "rho1",
            r1.rho1,
            [
                (r1.decomposition, "direct"),
                (r1.transported, "swap " + ",".join(f"{a}<->{b}" for a, b in config.swap)),
                (r1.refined, "swap then split ancilla factor"),
            ],
            [remote, block] + anc_cuts,
            tol,
        ),
        certify("rho2", r2.rho, [(r2.decomposition, "direct")], [block] + anc_cuts, tol),
    ]

    table = measure_subsystem(r2.rho, list(config.ancillas))
    success = table[0]
    target = ghz_state(SystemLayout.uniform(config.parties, DIM))
    fid = fidelity(success.post_state, target) if success.post_state is not None else 0.0
    n_fail_expected = 2 ** (config.N + 1) - 4
    full = [o for o in measure_subsystem(r2.rho, list(config.labels)) if o.probability > 0]
    anc_positions = [config.labels.index(a) for a in config.ancillas]
    full_fail = [o for o in full if any(o.outcome[i] != "0" for i in anc_positions)]
    checks += [
        Check.deviation("outcome_normalization", "ancilla outcome probabilities sum to 1",
                        abs(sum(o.probability for o in table) - 1.0), tol),
        Check.deviation("success_probability", "P(ancillas all zero) equals 1/(2^N-1)",
                        abs(success.probability - config.success_probability), tol),
        Check.deviation("success_fidelity", "all-zero branch is exactly GHZ_N", 1.0 - fid, tol),
        Check.deviation("failure_probabilities", "each ancilla outcome x != 0 has probability 2/(2^N-1)",
                        max(abs(o.probability - 2.0 / (2**config.N - 1)) for o in table[1:]), tol),
        Check("failure_outcome_count", "full-register failure outcomes number 2^{N+1}-4",
              float(len(full_fail)), 0.0, len(full_fail) == n_fail_expected),
        Check.deviation("failure_outcome_weights", "each full-register failure outcome has weight 1/(2^{N+1}-2)",
                        max(abs(o.probability - config.projector_weight) for o in full_fail), tol),
    ]
    trace = GhzProtocolTrace(
        config, r0.rho, r1.rho1, r2.rho, certs, table, full_fail, success.probability, fid,
        r1.constraints, checks, notes=[EXPONENT_NOTE, MIXTURE_NOTE],
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
