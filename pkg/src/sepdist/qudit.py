"""Dense linear algebra over labeled multi-qudit registers.

Basis ordering is mixed-radix with the first subsystem of a layout as the
most significant digit, so ``|0 1 1>`` over ``(A, B, C)`` is index 3 for
qubits. Every state and operator carries the layout it was built over and
all reorderings go through :func:`permute_systems`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

EPS_NORM = 1e-10


class LayoutError(ValueError):
    """Raised when labels or dimensions of subsystems are inconsistent."""


class StateError(ValueError):
    """Raised when an array fails the invariants of a state."""


@dataclass(frozen=True)
class SystemLayout:
    """Ordered subsystem labels with their local dimensions."""

    subsystems: tuple[tuple[str, int], ...]

    def __post_init__(self):
        subs = tuple((str(label), int(dim)) for label, dim in self.subsystems)
        object.__setattr__(self, "subsystems", subs)
        labels = [label for label, _ in subs]
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate labels in layout: {labels}")
        for label, dim in subs:
            if dim < 1:
                raise LayoutError(f"subsystem {label!r} has non-positive dimension {dim}")

    @classmethod
    def uniform(cls, labels: Iterable[str], dim: int) -> SystemLayout:
        return cls(tuple((label, dim) for label in labels))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.subsystems)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.subsystems else 1

    def __len__(self):
        return len(self.subsystems)

    def __contains__(self, label):
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown label {label!r}; layout has {self.labels}") from None

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def sub(self, labels: Sequence[str]) -> SystemLayout:
        """Layout restricted to ``labels``, in the order given."""
        return SystemLayout(tuple((label, self.dim(label)) for label in labels))

    def relabel(self, mapping: dict[str, str]) -> SystemLayout:
        return SystemLayout(tuple((mapping.get(l, l), d) for l, d in self.subsystems))

    def __add__(self, other: SystemLayout) -> SystemLayout:
        return SystemLayout(self.subsystems + other.subsystems)

    def basis_index(self, digits: Sequence[int]) -> int:
        if len(digits) != len(self):
            raise LayoutError(f"expected {len(self)} digits, got {len(digits)}")
        return int(np.ravel_multi_index(tuple(int(x) for x in digits), self.dims))

    def digits(self, index: int) -> tuple[int, ...]:
        return tuple(int(x) for x in np.unravel_index(index, self.dims))


@dataclass(frozen=True)
class Bipartition:
    """A two-sided cut of a layout's labels."""

    left: frozenset[str]
    right: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "left", frozenset(self.left))
        object.__setattr__(self, "right", frozenset(self.right))
        if self.left & self.right:
            raise LayoutError(f"cut sides overlap: {sorted(self.left & self.right)}")

    @classmethod
    def of(cls, layout: SystemLayout, left: Iterable[str]) -> Bipartition:
        left = frozenset(left)
        for label in left:
            layout.index(label)
        return cls(left, frozenset(layout.labels) - left)

    def check(self, layout: SystemLayout):
        if self.left | self.right != frozenset(layout.labels) or not self.left or not self.right:
            raise LayoutError(
                f"cut {self.name} does not split layout {layout.labels} into two non-empty sides"
            )

    @property
    def name(self) -> str:
        return "".join(sorted(self.left)) + "|" + "".join(sorted(self.right))

    def separates(self, groups: Iterable[Iterable[str]]) -> bool:
        """True if no group straddles the cut."""
        for group in groups:
            group = set(group)
            if group & self.left and group & self.right:
                return False
        return True


def _layout_of(layout) -> SystemLayout:
    if isinstance(layout, SystemLayout):
        return layout
    return SystemLayout(tuple(layout))


@dataclass(frozen=True, eq=False)
class PureState:
    layout: SystemLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        layout = _layout_of(self.layout)
        vec = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if vec.shape != (layout.total_dim,):
            raise StateError(
                f"amplitude vector has length {vec.size}, layout {layout.labels} needs {layout.total_dim}"
            )
        norm = np.linalg.norm(vec)
        if abs(norm - 1.0) > EPS_NORM:
            raise StateError(f"state norm is {norm!r}, expected 1")
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "amplitudes", vec)

    @classmethod
    def from_unnormalized(cls, layout, amplitudes) -> PureState:
        vec = np.asarray(amplitudes, dtype=complex).reshape(-1)
        return cls(layout, vec / np.linalg.norm(vec))

    @classmethod
    def basis(cls, layout, digits: Sequence[int]) -> PureState:
        layout = _layout_of(layout)
        vec = np.zeros(layout.total_dim, dtype=complex)
        vec[layout.basis_index(digits)] = 1.0
        return cls(layout, vec)

    def amplitude(self, digits: Sequence[int]) -> complex:
        return complex(self.amplitudes[self.layout.basis_index(digits)])

    def projector(self) -> DensityMatrix:
        return DensityMatrix(self.layout, np.outer(self.amplitudes, self.amplitudes.conj()))

    def inner(self, other: PureState) -> complex:
        """<self|other>, with ``other`` reordered to this layout if needed."""
        if other.layout != self.layout:
            other = permute_systems(other, self.layout.labels)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def allclose(self, other: PureState, atol: float = EPS_NORM) -> bool:
        if other.layout != self.layout:
            if set(other.layout.labels) != set(self.layout.labels):
                return False
            other = permute_systems(other, self.layout.labels)
        return bool(np.allclose(self.amplitudes, other.amplitudes, rtol=0, atol=atol))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    layout: SystemLayout
    entries: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        layout = _layout_of(self.layout)
        mat = np.asarray(self.entries, dtype=complex)
        n = layout.total_dim
        if mat.shape != (n, n):
            raise StateError(f"matrix shape {mat.shape} does not match layout dimension {n}")
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "entries", mat)
        if self.validate:
            check_density(mat)

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def allclose(self, other: DensityMatrix, atol: float = EPS_NORM) -> bool:
        return max_deviation(self, other) <= atol


def check_density(mat: np.ndarray, tol: float = EPS_NORM):
    """Raise StateError unless ``mat`` is Hermitian, unit trace and PSD within ``tol``."""
    herm = np.max(np.abs(mat - mat.conj().T)) if mat.size else 0.0
    if herm > tol:
        raise StateError(f"matrix is not Hermitian (deviation {herm:.3e})")
    tr = np.trace(mat)
    if abs(tr - 1.0) > tol:
        raise StateError(f"trace is {tr.real:.12g}, expected 1")
    lam = np.linalg.eigvalsh((mat + mat.conj().T) / 2).min()
    if lam < -tol:
        raise StateError(f"matrix has negative eigenvalue {lam:.3e}")


@dataclass(frozen=True, eq=False)
class ScaledDensity:
    """Un-normalized positive operator stored as ``scale * rho`` with ``trace(rho) == 1``."""

    rho: DensityMatrix
    scale: float

    @classmethod
    def from_matrix(cls, layout, matrix: np.ndarray) -> ScaledDensity:
        scale = float(np.trace(matrix).real)
        return cls(DensityMatrix(layout, matrix / scale), scale)

    @property
    def matrix(self) -> np.ndarray:
        return self.scale * self.rho.entries


def max_deviation(a: DensityMatrix, b: DensityMatrix) -> float:
    """Largest absolute entrywise difference, aligning ``b`` to ``a``'s label order."""
    if b.layout != a.layout:
        if set(b.layout.labels) != set(a.layout.labels):
            raise LayoutError(f"cannot compare {a.layout.labels} with {b.layout.labels}")
        b = permute_systems(b, a.layout.labels)
    return float(np.max(np.abs(a.entries - b.entries)))


def tensor(factors: Sequence[PureState]) -> PureState:
    if not factors:
        raise ValueError("tensor needs at least one factor")
    layout = factors[0].layout
    vec = factors[0].amplitudes
    for f in factors[1:]:
        layout = layout + f.layout
        vec = np.kron(vec, f.amplitudes)
    return PureState(layout, vec)


def tensor_density(factors: Sequence[DensityMatrix]) -> DensityMatrix:
    layout = factors[0].layout
    mat = factors[0].entries
    for f in factors[1:]:
        layout = layout + f.layout
        mat = np.kron(mat, f.entries)
    return DensityMatrix(layout, mat)


def cadd_gate(layout: SystemLayout, control: str, target: str, inverse: bool = False) -> np.ndarray:
    """Controlled-add permutation ``|i, j> -> |i, j + i mod d>`` on (control, target).

    With ``inverse`` the control value is subtracted instead. Acts as the
    identity on every other subsystem.
    """
    if control == target:
        raise LayoutError("control and target must differ")
    ci, ti = layout.index(control), layout.index(target)
    d = layout.dims[ti]
    if layout.dims[ci] != d:
        raise LayoutError(
            f"control {control!r} has dimension {layout.dims[ci]}, target {target!r} has {d}"
        )
    n = layout.total_dim
    digits = list(np.unravel_index(np.arange(n), layout.dims))
    shift = -digits[ci] if inverse else digits[ci]
    digits[ti] = (digits[ti] + shift) % d
    image = np.ravel_multi_index(tuple(digits), layout.dims)
    U = np.zeros((n, n), dtype=complex)
    U[image, np.arange(n)] = 1.0
    return U


def apply_unitary(state, U: np.ndarray):
    U = np.asarray(U)
    n = state.layout.total_dim
    if U.shape != (n, n):
        raise LayoutError(f"unitary shape {U.shape} does not match layout dimension {n}")
    if isinstance(state, PureState):
        return PureState(state.layout, U @ state.amplitudes)
    return DensityMatrix(state.layout, U @ state.entries @ U.conj().T)


def _axes_for(layout: SystemLayout, order: Sequence[str]) -> list[int]:
    if sorted(order) != sorted(layout.labels) or len(set(order)) != len(order):
        raise LayoutError(f"{tuple(order)} is not a permutation of {layout.labels}")
    return [layout.index(label) for label in order]


def permute_systems(state, order: Sequence[str]):
    """Reorder subsystems so that they appear in ``order``."""
    order = tuple(order)
    axes = _axes_for(state.layout, order)
    new_layout = state.layout.sub(order)
    dims = state.layout.dims
    if isinstance(state, PureState):
        vec = state.amplitudes.reshape(dims).transpose(axes).reshape(-1)
        return PureState(new_layout, vec)
    k = len(dims)
    mat = state.entries.reshape(dims + dims).transpose(axes + [a + k for a in axes])
    n = new_layout.total_dim
    return DensityMatrix(new_layout, mat.reshape(n, n), validate=False)


def swap_labels(state, pairs: Iterable[tuple[str, str]]):
    """Exchange the contents of each pair of subsystems, keeping the label order."""
    mapping = {}
    for a, b in pairs:
        mapping[a], mapping[b] = b, a
    labels = state.layout.labels
    # reading label l from the slot of its partner realizes the exchange
    order = [mapping.get(l, l) for l in labels]
    moved = permute_systems(state, order)
    if isinstance(state, PureState):
        return PureState(state.layout, moved.amplitudes)
    return DensityMatrix(state.layout, moved.entries, validate=False)


def partial_trace(rho: DensityMatrix, keep: Iterable[str]) -> DensityMatrix:
    wanted = set(keep)
    for label in wanted:
        rho.layout.index(label)
    keep = [label for label in rho.layout.labels if label in wanted]
    drop = [label for label in rho.layout.labels if label not in keep]
    moved = permute_systems(rho, keep + drop)
    dk = rho.layout.sub(keep).total_dim
    dd = rho.layout.sub(drop).total_dim
    mat = moved.entries.reshape(dk, dd, dk, dd)
    reduced = np.einsum("ajbj->ab", mat)
    return DensityMatrix(rho.layout.sub(keep), reduced)


def partial_transpose(rho, cut: Bipartition) -> np.ndarray:
    """Matrix of ``rho`` transposed on the labels of ``cut.left``."""
    layout = rho.layout
    cut.check(layout)
    dims = layout.dims
    k = len(dims)
    axes = list(range(2 * k))
    for label in cut.left:
        i = layout.index(label)
        axes[i], axes[i + k] = axes[i + k], axes[i]
    entries = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    n = layout.total_dim
    return entries.reshape(dims + dims).transpose(axes).reshape(n, n)


def min_eigenvalue(H: np.ndarray) -> float:
    H = np.asarray(H)
    return float(np.linalg.eigvalsh((H + H.conj().T) / 2)[0])


@dataclass(frozen=True, eq=False)
class Outcome:
    outcome: str
    probability: float
    post_state: DensityMatrix | None

    @property
    def is_zero(self) -> bool:
        return self.post_state is None


def outcome_label(digits: Sequence[int]) -> str:
    if all(x < 10 for x in digits):
        return "".join(str(x) for x in digits)
    return ",".join(str(x) for x in digits)


def measure_subsystem(rho: DensityMatrix, targets: Sequence[str], zero_tol: float = 1e-14) -> list[Outcome]:
    """Computational-basis measurement of ``targets``.

    Returns one entry per outcome in lexicographic order of the digits.
    Outcomes with probability at most ``zero_tol`` are reported with
    probability 0 and no post-state.
    """
    targets = list(targets)
    if not targets:
        raise ValueError("no subsystems to measure")
    rest = [label for label in rho.layout.labels if label not in targets]
    moved = permute_systems(rho, targets + rest)
    dt = rho.layout.sub(targets).total_dim
    dr = rho.layout.sub(rest).total_dim if rest else 1
    blocks = moved.entries.reshape(dt, dr, dt, dr)
    results = []
    for index, digits in enumerate(itertools.product(*(range(rho.layout.dim(t)) for t in targets))):
        block = blocks[index, :, index, :]
        p = float(np.trace(block).real)
        if p <= zero_tol:
            results.append(Outcome(outcome_label(digits), 0.0, None))
            continue
        post = DensityMatrix(rho.layout.sub(rest), block / p) if rest else None
        results.append(Outcome(outcome_label(digits), p, post))
    return results


def fidelity(rho: DensityMatrix, target: PureState) -> float:
    """``<target|rho|target>`` for a pure target, clipped to [0, 1]."""
    if target.layout != rho.layout:
        target = permute_systems(target, rho.layout.labels)
    v = target.amplitudes
    f = float(np.real(np.vdot(v, rho.entries @ v)))
    return min(1.0, max(0.0, f))


def ghz_state(layout: SystemLayout) -> PureState:
    """Uniform superposition of the all-equal basis strings ``|j j ... j>``."""
    d = layout.dims[0]
    if any(x != d for x in layout.dims):
        raise LayoutError("GHZ state needs equal local dimensions")
    vec = np.zeros(layout.total_dim, dtype=complex)
    for j in range(d):
        vec[layout.basis_index([j] * len(layout))] = 1.0
    return PureState(layout, vec / np.sqrt(d))


def basis_projector(layout: SystemLayout, digits: Sequence[int]) -> np.ndarray:
    n = layout.total_dim
    mat = np.zeros((n, n), dtype=complex)
    i = layout.basis_index(digits)
    mat[i, i] = 1.0
    return mat


def schmidt_factor(state: PureState, left: Sequence[str], tol: float = 1e-9):
    """Split a product state into (left factor, right factor).

    Raises StateError if ``state`` has Schmidt rank above one across the cut.
    Local phases are fixed so that each factor's largest amplitude is real.
    """
    left = list(left)
    right = [label for label in state.layout.labels if label not in left]
    moved = permute_systems(state, left + right)
    dl = state.layout.sub(left).total_dim
    mat = moved.amplitudes.reshape(dl, -1)
    u, s, vh = np.linalg.svd(mat)
    if len(s) > 1 and s[1] > tol:
        raise StateError(f"state is entangled across {left}|{right} (second Schmidt value {s[1]:.3e})")
    a = u[:, 0]
    b = vh[0, :] * s[0]
    phase = a[np.argmax(np.abs(a))]
    phase /= abs(phase)
    a, b = a / phase, b * phase
    b /= np.linalg.norm(b)
    return (
        PureState(state.layout.sub(left), a),
        PureState(state.layout.sub(right), b) if right else None,
    )
