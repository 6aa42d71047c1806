"""Order-by-order evaluation of the exact time-evolution expansion.

Each order-l amplitude matrix is a sum over length-l index paths of a
coupling product times a confluent divided difference of the phase
function over the energies visited.  The divided difference is symmetric
in its nodes, so paths are grouped by the multiset of interior levels
before the kernel is evaluated: the grouped weights are t-independent and
the kernel runs once per multiset instead of once per path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .ddkernel import _dd_value
from .model import SplitSystem

__all__ = [
    "DEFAULT_L_MAX",
    "AmplitudeMatrix",
    "StateVector",
    "amplitude_order",
    "evolve_truncated",
    "transition_amplitude",
]

#: Highest expansion order supported by default.  Closed-form cross-checks
#: exist up to l = 4 and label catalogs up to l = 6, so this is the range
#: the implementation is validated on.
DEFAULT_L_MAX = 6


@dataclass(frozen=True)
class AmplitudeMatrix:
    """One order of the evolution expansion at a fixed time.

    ``values[a, b]`` is the order-`order` amplitude connecting initial
    level ``b`` to final level ``a`` (matrix convention: rows are final).
    """

    order: int
    t: float
    values: NDArray[np.complex128]

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=np.complex128, copy=True)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise ValueError(f"values must be a square matrix, got shape {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "order", int(self.order))
        object.__setattr__(self, "t", float(self.t))

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class StateVector:
    """Expansion coefficients of a state in the working level basis."""

    coefficients: NDArray[np.complex128]

    def __post_init__(self) -> None:
        coeff = np.atleast_1d(np.array(self.coefficients, dtype=np.complex128, copy=True))
        if coeff.ndim != 1 or coeff.shape[0] < 1:
            raise ValueError(f"coefficients must be a non-empty vector, got shape {coeff.shape}")
        if not np.all(np.isfinite(coeff)):
            raise ValueError("state coefficients contain non-finite entries")
        coeff.setflags(write=False)
        object.__setattr__(self, "coefficients", coeff)

    @property
    def dimension(self) -> int:
        return int(self.coefficients.shape[0])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))


class _Accumulator:
    """Plain or Kahan-compensated complex summation with fixed add order."""

    __slots__ = ("_sum", "_comp", "_compensated")

    def __init__(self, compensated: bool) -> None:
        self._sum = 0.0 + 0.0j
        self._comp = 0.0 + 0.0j
        self._compensated = compensated

    def add(self, value: complex) -> None:
        if not self._compensated:
            self._sum += value
            return
        y = value - self._comp
        t = self._sum + y
        self._comp = (t - self._sum) - y
        self._sum = t

    @property
    def total(self) -> complex:
        return self._sum


def _interior_weights(
    g: NDArray[np.complex128], order: int, start: int, compensated: bool
) -> dict[tuple[int, tuple[int, ...]], complex]:
    """Sum coupling products over all length-`order` paths leaving `start`.

    Keys are (end level, sorted tuple of interior levels); the value is the
    sum of prod_j g[path_j, path_{j+1}] over every path in that class.
    Paths are walked depth-first in lexicographic order and any zero
    coupling factor prunes the whole subtree, so exact sparsity in g is
    exploited without thresholds.
    """
    n = g.shape[0]
    acc: dict[tuple[int, tuple[int, ...]], _Accumulator] = {}
    interiors: list[int] = []

    def extend(level: int, depth: int, product: complex) -> None:
        if depth == order:
            key = (level, tuple(sorted(interiors)))
            slot = acc.get(key)
            if slot is None:
                slot = acc[key] = _Accumulator(compensated)
            slot.add(product)
            return
        row = g[level]
        last_step = depth + 1 == order
        for nxt in range(n):
            val = row[nxt]
            if val == 0.0:
                continue
            if last_step:
                extend(nxt, depth + 1, product * val)
            else:
                interiors.append(nxt)
                extend(nxt, depth + 1, product * val)
                interiors.pop()

    extend(start, 0, 1.0 + 0.0j)
    return {key: slot.total for key, slot in acc.items()}


def _order_values(
    energies: NDArray[np.float64],
    g: NDArray[np.complex128],
    order: int,
    ts: NDArray[np.float64],
    compensated: bool,
) -> NDArray[np.complex128]:
    """Amplitude matrices for one order over a time grid, shape (T, N, N)."""
    n = energies.shape[0]
    out = np.zeros((ts.shape[0], n, n), dtype=np.complex128)
    if order == 0:
        idx = np.arange(n)
        out[:, idx, idx] = np.exp(-1j * np.outer(ts, energies))
        return out
    for start in range(n):
        weights = _interior_weights(g, order, start, compensated)
        if not weights:
            continue
        ordered = sorted(weights)
        node_arrays = [energies[(start, *interiors, end),] for end, interiors in ordered]
        for it, t in enumerate(ts):
            cells: dict[int, _Accumulator] = {}
            for key, nodes in zip(ordered, node_arrays):
                slot = cells.get(key[0])
                if slot is None:
                    slot = cells[key[0]] = _Accumulator(compensated)
                slot.add(weights[key] * _dd_value(nodes, float(t)))
            for end, slot in cells.items():
                out[it, start, end] = slot.total
    return out


def _check_order(l: int, l_max: int) -> None:
    if not isinstance(l, (int, np.integer)) or isinstance(l, bool):
        raise ValueError(f"order must be an integer, got {l!r}")
    if l < 0 or l > l_max:
        raise ValueError(f"order {l} outside supported range 0..{l_max}")


def amplitude_order(
    sys: SplitSystem,
    l: int,
    t: float,
    *,
    l_max: int = DEFAULT_L_MAX,
    compensated: bool = False,
) -> AmplitudeMatrix:
    """Order-l amplitude matrix of the evolution expansion at time t.

    Entry (a, b) sums, over all index paths a = p_1, ..., p_{l+1} = b, the
    divided difference of e^{-i*x*t} over the path energies times the
    product of coupling elements along the path.
    """
    _check_order(l, l_max)
    energies = np.asarray(sys.energies_redivided, dtype=np.float64)
    g = np.asarray(sys.g, dtype=np.complex128)
    ts = np.array([float(t)])
    values = _order_values(energies, g, l, ts, compensated)[0]
    return AmplitudeMatrix(order=l, t=float(t), values=values)


def evolve_truncated(
    sys: SplitSystem,
    psi0: StateVector,
    t: float,
    L: int,
    *,
    l_max: int = DEFAULT_L_MAX,
    compensated: bool = False,
) -> StateVector:
    """Apply the expansion truncated at order L to an initial state."""
    _check_order(L, l_max)
    if psi0.dimension != sys.dimension:
        raise ValueError(
            f"state dimension {psi0.dimension} does not match system dimension {sys.dimension}"
        )
    if psi0.norm == 0.0:
        raise ValueError("initial state has zero norm")
    energies = np.asarray(sys.energies_redivided, dtype=np.float64)
    g = np.asarray(sys.g, dtype=np.complex128)
    ts = np.array([float(t)])
    total = np.zeros((sys.dimension, sys.dimension), dtype=np.complex128)
    for l in range(L + 1):
        total += _order_values(energies, g, l, ts, compensated)[0]
    return StateVector(coefficients=total @ psi0.coefficients)


def transition_amplitude(
    sys: SplitSystem,
    from_level: int,
    to_level: int,
    t: float,
    L: int,
    *,
    l_max: int = DEFAULT_L_MAX,
    compensated: bool = False,
) -> complex:
    """Truncated amplitude for the transition from_level -> to_level."""
    _check_order(L, l_max)
    n = sys.dimension
    for name, idx in (("from_level", from_level), ("to_level", to_level)):
        if not 0 <= idx < n:
            raise ValueError(f"{name} {idx} outside 0..{n - 1}")
    energies = np.asarray(sys.energies_redivided, dtype=np.float64)
    g = np.asarray(sys.g, dtype=np.complex128)
    ts = np.array([float(t)])
    value = 0.0 + 0.0j
    for l in range(L + 1):
        value += _order_values(energies, g, l, ts, compensated)[0][to_level, from_level]
    return complex(value)


def _truncated_sum_grid(
    sys: SplitSystem,
    L: int,
    ts: NDArray[np.float64],
    *,
    compensated: bool = False,
) -> NDArray[np.complex128]:
    """Sum of orders 0..L over a time grid, shape (T, N, N).

    Internal helper for grid consumers (the command-line driver): the
    path-grouping weights are computed once per order and reused for every
    time sample.
    """
    energies = np.asarray(sys.energies_redivided, dtype=np.float64)
    g = np.asarray(sys.g, dtype=np.complex128)
    ts = np.asarray(ts, dtype=np.float64)
    n = energies.shape[0]
    total = np.zeros((ts.shape[0], n, n), dtype=np.complex128)
    for l in range(L + 1):
        total += _order_values(energies, g, l, ts, compensated)
    return total
