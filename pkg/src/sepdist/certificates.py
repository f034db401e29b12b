"""Explicit separability certificates.

A :class:`ProductDecomposition` lists weighted product pure states over a
fixed grouping of subsystems. Verification rebuilds the weighted sum from
the local factors alone, so a verified decomposition is a certificate that
does not depend on how it was produced. Swap symmetry of the target lets a
decomposition across one cut be transported to the mirrored cut.

Partial-transpose spectra are reported alongside as a necessary condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .qudit import (
    EPS_NORM,
    Bipartition,
    DensityMatrix,
    LayoutError,
    PureState,
    SystemLayout,
    min_eigenvalue,
    partial_transpose,
    permute_systems,
    schmidt_factor,
    tensor,
)

CERTIFIED = "certified"
NECESSARY_ONLY = "necessary-condition-only"
FAILED = "failed"

Ensemble = list[tuple[float, PureState]]


@dataclass(frozen=True, eq=False)
class Term:
    weight: float
    states: tuple[PureState, ...]


@dataclass(frozen=True, eq=False)
class ProductDecomposition:
    groups: tuple[tuple[str, ...], ...]
    terms: tuple[Term, ...]

    def __post_init__(self):
        groups = tuple(tuple(g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if len(t.states) != len(groups):
                raise LayoutError(f"term has {len(t.states)} factors, cut has {len(groups)}")
            for g, st in zip(groups, t.states):
                if st.layout.labels != g:
                    raise LayoutError(f"factor over {st.layout.labels} does not match group {g}")

    @property
    def cut_name(self) -> str:
        return "|".join("".join(g) for g in self.groups)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for g in self.groups for label in g)

    def weight_sum(self) -> float:
        return float(sum(t.weight for t in self.terms))

    def reconstruct(self, layout: SystemLayout) -> np.ndarray:
        """Weighted sum of the product projectors, in ``layout`` order."""
        if sorted(self.labels) != sorted(layout.labels):
            raise LayoutError(f"cut {self.cut_name} does not cover layout {layout.labels}")
        n = layout.total_dim
        if not self.terms:
            return np.zeros((n, n), dtype=complex)
        V = np.stack([permute_systems(tensor(list(t.states)), layout.labels).amplitudes for t in self.terms], axis=1)
        w = np.array([t.weight for t in self.terms])
        return (V * w) @ V.conj().T

    def with_weights(self, weights: Sequence[float]) -> ProductDecomposition:
        return ProductDecomposition(
            self.groups, tuple(Term(w, t.states) for w, t in zip(weights, self.terms))
        )

    @classmethod
    def from_ensemble(cls, ensemble: Ensemble, groups: Sequence[Sequence[str]]) -> ProductDecomposition:
        """Factor each pure state of ``ensemble`` over ``groups``.

        Raises StateError if some state is entangled across the grouping.
        """
        groups = tuple(tuple(g) for g in groups)
        terms = []
        for w, psi in ensemble:
            terms.append(Term(float(w), _factor(psi, groups)))
        return cls(groups, tuple(terms))


def _factor(psi: PureState, groups) -> tuple[PureState, ...]:
    if sorted(l for g in groups for l in g) != sorted(psi.layout.labels):
        raise LayoutError(f"groups {groups} do not cover {psi.layout.labels}")
    factors = []
    rest = psi
    for g in groups[:-1]:
        a, rest = schmidt_factor(rest, g)
        factors.append(a)
    factors.append(permute_systems(rest, groups[-1]))
    return tuple(factors)


@dataclass(frozen=True)
class DecompositionCheck:
    name: str
    cut: str
    ok: bool
    max_deviation: float
    weight_error: float
    n_terms: int
    provenance: str = "direct"


def verify_decomposition(
    rho: DensityMatrix, dec: ProductDecomposition, tol: float = EPS_NORM, name: str = ""
) -> DecompositionCheck:
    if sorted(dec.labels) != sorted(rho.layout.labels):
        raise LayoutError(f"cut {dec.cut_name} does not cover layout {rho.layout.labels}")
    weight_error = abs(dec.weight_sum() - 1.0)
    negative = any(t.weight < 0 for t in dec.terms)
    dev = float(np.max(np.abs(dec.reconstruct(rho.layout) - rho.entries)))
    ok = (not negative) and weight_error <= tol and dev <= tol
    return DecompositionCheck(name or dec.cut_name, dec.cut_name, ok, dev, weight_error, len(dec.terms))


def transport_by_swap(dec: ProductDecomposition, swap: Iterable[tuple[str, str]]) -> ProductDecomposition:
    """Re-route every local factor through the label involution ``swap``.

    If the target matrix is invariant under the corresponding subsystem
    exchange, the result decomposes the same matrix across the image cut.
    """
    mapping: dict[str, str] = {}
    for a, b in swap:
        if a in mapping or b in mapping:
            raise LayoutError(f"label used twice in swap {list(swap)}")
        mapping[a], mapping[b] = b, a
    dims = {}
    for st in dec.terms[0].states if dec.terms else ():
        dims.update(dict(st.layout.subsystems))
    for a, b in mapping.items():
        if a in dims and b in dims and dims[a] != dims[b]:
            raise LayoutError(f"cannot swap {a} (dim {dims[a]}) with {b} (dim {dims[b]})")
    groups = tuple(tuple(mapping.get(l, l) for l in g) for g in dec.groups)
    terms = tuple(
        Term(t.weight, tuple(PureState(st.layout.relabel(mapping), st.amplitudes) for st in t.states))
        for t in dec.terms
    )
    return ProductDecomposition(groups, terms)


def split_factor(
    dec: ProductDecomposition, group_index: int, subgroups: Sequence[Sequence[str]]
) -> ProductDecomposition:
    """Refine one factor group into a product over ``subgroups``.

    Every local state on that group must itself be a product state.
    """
    subgroups = tuple(tuple(g) for g in subgroups)
    old = dec.groups[group_index]
    if sorted(l for g in subgroups for l in g) != sorted(old):
        raise LayoutError(f"subgroups {subgroups} do not partition group {old}")
    groups = dec.groups[:group_index] + subgroups + dec.groups[group_index + 1:]
    terms = []
    for t in dec.terms:
        parts = _factor(t.states[group_index], subgroups)
        terms.append(Term(t.weight, t.states[:group_index] + parts + t.states[group_index + 1:]))
    return ProductDecomposition(groups, tuple(terms))


@dataclass(frozen=True)
class PPTEntry:
    cut: str
    min_eigenvalue: float
    passed: bool


def ppt_report(rho: DensityMatrix, cuts: Iterable[Bipartition], tol: float = EPS_NORM) -> list[PPTEntry]:
    out = []
    for cut in cuts:
        lam = min_eigenvalue(partial_transpose(rho, cut))
        out.append(PPTEntry(cut.name, lam, lam >= -tol))
    return out


@dataclass
class CertificateReport:
    target: str
    decompositions: list[DecompositionCheck] = field(default_factory=list)
    transports: list[str] = field(default_factory=list)
    ppt: list[PPTEntry] = field(default_factory=list)
    verdicts: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return (
            all(d.ok for d in self.decompositions)
            and all(p.passed for p in self.ppt)
            and all(v != FAILED for v in self.verdicts.values())
        )


def certify(
    target: str,
    rho: DensityMatrix,
    decompositions: Sequence[tuple[ProductDecomposition, str]],
    claimed_cuts: Sequence[Bipartition],
    tol: float = EPS_NORM,
) -> CertificateReport:
    """Verify decompositions and grade every claimed cut.

    A cut is certified when some verified decomposition has no factor group
    straddling it and its partial transpose is positive; PPT alone gives
    ``necessary-condition-only``.
    """
    report = CertificateReport(target)
    verified: list[ProductDecomposition] = []
    for dec, provenance in decompositions:
        check = verify_decomposition(rho, dec, tol)
        report.decompositions.append(
            DecompositionCheck(check.name, check.cut, check.ok, check.max_deviation,
                               check.weight_error, check.n_terms, provenance)
        )
        if provenance != "direct":
            report.transports.append(f"{provenance} -> {dec.cut_name}")
        if check.ok:
            verified.append(dec)
    report.ppt = ppt_report(rho, claimed_cuts, tol)
    for cut, ppt in zip(claimed_cuts, report.ppt):
        has_dec = any(cut.separates(dec.groups) for dec in verified)
        if not ppt.passed:
            verdict = FAILED
        elif has_dec:
            verdict = CERTIFIED
        else:
            verdict = NECESSARY_ONLY
        report.verdicts[cut.name] = verdict
    return report


def symmetrize_by_projectors(
    matrix: np.ndarray, layout: SystemLayout, pairs: Iterable[tuple[str, str]]
) -> tuple[np.ndarray, list[tuple[tuple[int, ...], float]]]:
    """Add computational-basis projectors making the diagonal swap-invariant.

    For each basis string the diagonal is raised to the larger of its own
    value and that of its mirror image under ``pairs``. Returns the added
    diagonal matrix and the list of (digits, weight) projectors it holds.
    Off-diagonal entries are left alone.
    """
    mapping = {}
    for a, b in pairs:
        mapping[a], mapping[b] = b, a
    labels = layout.labels
    src = [layout.index(mapping.get(l, l)) for l in labels]
    diag = np.real(np.diag(matrix))
    added = np.zeros(layout.total_dim)
    projectors = []
    for i in range(layout.total_dim):
        digits = layout.digits(i)
        mirror = layout.basis_index([digits[j] for j in src])
        gap = diag[mirror] - diag[i]
        if gap > EPS_NORM * max(1.0, abs(diag).max()):
            added[i] = gap
            projectors.append((digits, float(gap)))
    return np.diag(added).astype(complex), projectors
