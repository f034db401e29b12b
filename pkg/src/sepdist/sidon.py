"""Integer exponent systems for the phase families ``omega**(s_j k)``.

A system is a pair ``(s, K)`` of distinct non-negative exponents and a
modulus with

* every ``2 * s_i < K``, and
* all pair sums ``s_i + s_j`` (``i <= j``) distinct, i.e. ``s`` is a Sidon set.

Conditions are checked in exact integer arithmetic. The character-sum
identities they imply are evaluated numerically by :func:`orthogonality_sums`.
"""

from __future__ import annotations

import itertools
from dataclasses import InitVar, dataclass
from typing import Sequence

import numpy as np


class PhaseSystemError(ValueError):
    pass


@dataclass(frozen=True)
class ConditionReport:
    ok: bool
    violation: str | None = None
    # index violating the bound, or the offending (i, j, m, n) quadruple
    index: int | None = None
    quadruple: tuple[int, int, int, int] | None = None

    def __bool__(self):
        return self.ok


def _check_distinct(s: Sequence[int]):
    if any(int(x) < 0 for x in s):
        raise PhaseSystemError(f"exponents must be non-negative: {list(s)}")
    if len(set(s)) != len(s):
        raise PhaseSystemError(f"exponents must be distinct: {list(s)}")


def pair_sum_collision(s: Sequence[int]) -> tuple[int, int, int, int] | None:
    """First quadruple with ``s_i + s_j == s_m + s_n`` and ``{i, j} != {m, n}``."""
    seen: dict[int, tuple[int, int]] = {}
    for i, j in itertools.combinations_with_replacement(range(len(s)), 2):
        total = s[i] + s[j]
        if total in seen:
            m, n = seen[total]
            return (m, n, i, j)
        seen[total] = (i, j)
    return None


def verify_conditions(s: Sequence[int], K: int) -> ConditionReport:
    s = [int(x) for x in s]
    _check_distinct(s)
    for i, x in enumerate(s):
        if not 2 * x < K:
            return ConditionReport(False, f"s[{i}]={x} is not below K/2={K / 2:g}", index=i)
    q = pair_sum_collision(s)
    if q is not None:
        i, j, m, n = q
        return ConditionReport(
            False,
            f"s[{i}]+s[{j}] = s[{m}]+s[{n}] = {s[i] + s[j]}",
            quadruple=q,
        )
    return ConditionReport(True)


@dataclass(frozen=True)
class PhaseSystem:
    s: tuple[int, ...]
    K: int
    validate: InitVar[bool] = True

    def __post_init__(self, validate):
        object.__setattr__(self, "s", tuple(sorted(int(x) for x in self.s)))
        object.__setattr__(self, "K", int(self.K))
        if len(self.s) < 2:
            raise PhaseSystemError("need at least two exponents")
        if self.K < 2:
            raise PhaseSystemError(f"K must be at least 2, got {self.K}")
        if validate:
            report = verify_conditions(self.s, self.K)
            if not report:
                raise PhaseSystemError(f"invalid phase system ({list(self.s)}, K={self.K}): {report.violation}")
        else:
            _check_distinct(self.s)

    @property
    def d(self) -> int:
        return len(self.s)

    @property
    def omega(self) -> complex:
        return np.exp(2j * np.pi / self.K)

    def phase(self, exponent: int) -> complex:
        """``omega**exponent`` evaluated from the reduced exponent."""
        return np.exp(2j * np.pi * (int(exponent) % self.K) / self.K)

    def phases(self, k: int, sign: int = 1) -> np.ndarray:
        e = (sign * k * np.asarray(self.s, dtype=np.int64)) % self.K
        return np.exp(2j * np.pi * e / self.K)


def canonical_system(d: int) -> PhaseSystem:
    """``s_i = 2**i - 1`` with ``K = 2**d - 1``."""
    if d < 2:
        raise PhaseSystemError(f"d must be at least 2, got {d}")
    return PhaseSystem(tuple(2**i - 1 for i in range(d)), 2**d - 1)


def minimal_K_for(s: Sequence[int]) -> int:
    """Smallest modulus admitting ``s``; it is ``2 * max(s) + 1``."""
    s = [int(x) for x in s]
    _check_distinct(s)
    q = pair_sum_collision(s)
    if q is not None:
        raise PhaseSystemError(f"{s} has repeated pair sums at {q}; no K works")
    K = max(2, 2 * max(s) + 1)
    if not verify_conditions(s, K) or (K > 2 and verify_conditions(s, K - 1)):
        raise AssertionError(f"minimal K re-check failed for {s}")
    return K


def _sidon_dfs(d: int, bound: int):
    """Yield Sidon sets of size ``d`` with elements in ``[0, bound]``, in lex order.

    Pair sums of the current prefix are tracked in an int bitset.
    """
    chosen: list[int] = []

    def extend(start: int, sums: int):
        if len(chosen) == d:
            yield tuple(chosen)
            return
        for x in range(start, bound + 1):
            if bound - x < d - len(chosen) - 1:
                break
            new = 1 << (2 * x)
            for y in chosen:
                new |= 1 << (x + y)
            if new & sums:
                continue
            chosen.append(x)
            yield from extend(x + 1, sums | new)
            chosen.pop()

    yield from extend(0, 0)


def search_min_sidon(d: int, max_element_bound: int) -> PhaseSystem:
    """Exhaustive search for the admissible ``s`` of size ``d`` with the least K.

    Ties on K go to the lexicographically smallest ``s``. Raises
    PhaseSystemError if no set fits under ``max_element_bound``.
    """
    if d < 2:
        raise PhaseSystemError(f"d must be at least 2, got {d}")
    if max_element_bound < d - 1:
        raise PhaseSystemError(f"bound {max_element_bound} cannot hold {d} distinct elements")
    # K grows with max(s), so the first bound that admits a set is optimal
    # and the lex-first set found there is the tie-break winner
    for top in range(d - 1, max_element_bound + 1):
        for s in _sidon_dfs(d, top):
            return PhaseSystem(s, minimal_K_for(s))
    raise PhaseSystemError(f"no Sidon set of size {d} with elements <= {max_element_bound}")


@dataclass(frozen=True)
class OrthogonalityReport:
    first_max_deviation: float
    first_worst: tuple[int, int]
    second_max_deviation: float
    second_worst: tuple[int, int, int, int]

    @property
    def max_deviation(self) -> float:
        return max(self.first_max_deviation, self.second_max_deviation)


def _mean_phase(ps: PhaseSystem, exponents: np.ndarray) -> np.ndarray:
    k = np.arange(ps.K)
    e = np.mod(np.multiply.outer(exponents, k), ps.K)
    return np.exp(2j * np.pi * e / ps.K).mean(axis=-1)


def orthogonality_sums(ps: PhaseSystem) -> OrthogonalityReport:
    """Evaluate both character-sum identities over every index tuple.

    ``mean_k omega**((s_i - s_j) k) == delta_ij`` and
    ``mean_k omega**((s_i + s_j - s_m - s_n) k) ==
    delta_im delta_jn + delta_in delta_jm - delta_ij delta_mn delta_jm``.
    """
    s = np.asarray(ps.s, dtype=np.int64)
    d = len(s)
    eye = np.eye(d)
    first = _mean_phase(ps, s[:, None] - s[None, :])
    dev1 = np.abs(first - eye)

    diff = s[:, None, None, None] + s[None, :, None, None] - s[None, None, :, None] - s[None, None, None, :]
    second = _mean_phase(ps, diff)
    expected = (
        np.einsum("im,jn->ijmn", eye, eye)
        + np.einsum("in,jm->ijmn", eye, eye)
        - np.einsum("ij,mn,jm->ijmn", eye, eye, eye)
    )
    dev2 = np.abs(second - expected)
    w1 = np.unravel_index(np.argmax(dev1), dev1.shape)
    w2 = np.unravel_index(np.argmax(dev2), dev2.shape)
    return OrthogonalityReport(
        float(dev1.max()),
        tuple(int(x) for x in w1),
        float(dev2.max()),
        tuple(int(x) for x in w2),
    )
