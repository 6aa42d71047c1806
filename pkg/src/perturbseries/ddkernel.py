"""Confluent divided differences of the phase function f(x) = exp(-i*x*t).

Every amplitude in the truncated evolution series is a sum of coupling
products weighted by a divided difference of the phase function over the
energies visited along an index path.  Repeated energies are the rule, not
the exception (paths revisit levels, and spectra may carry exact
degeneracies with decoupled partners), so the kernel must take the
confluent limit exactly rather than by epsilon-nudging nodes apart.

The evaluation route is the matrix-function identity: for the m x m
upper-bidiagonal matrix Z with the nodes on the diagonal and ones on the
superdiagonal, the divided difference over the m nodes equals entry
(1, m) of f(Z).  Computing exp(-i*t*Z) by scaling-and-squaring therefore
yields all confluent limits for free, with no branching on node gaps.
A mean-shift is applied first (f factors into a scalar phase times the
exponential of the centered matrix), which keeps the scaled norm small.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

__all__ = ["NodeList", "dd_exp", "dd_exp_batch", "dd_exp_parts"]

#: Taylor truncation order for the scaled exponential.  With the scaled
#: norm at or below 0.5 the series remainder is 0.5^14/14! ~ 7e-17, far
#: below the 1e-13 kernel budget.
_TAYLOR_ORDER = 13
_SCALE_LIMIT = 0.5


@dataclass(frozen=True)
class NodeList:
    """An ordered multiset of energy nodes together with the time argument."""

    nodes: NDArray[np.float64]
    t: float

    def __post_init__(self) -> None:
        arr = np.atleast_1d(np.array(self.nodes, dtype=np.float64, copy=True))
        if arr.ndim != 1 or arr.shape[0] < 1:
            raise ValueError(f"nodes must be a non-empty 1-d array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("nodes contain non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "nodes", arr)
        object.__setattr__(self, "t", float(self.t))

    @property
    def order(self) -> int:
        """Number of nodes m; the divided difference has order m - 1."""
        return int(self.nodes.shape[0])


def _dd_value(nodes: NDArray[np.float64], t: float) -> complex:
    """Divided difference of e^{-i*x*t} over the given nodes (array form)."""
    m = nodes.shape[0]
    if m == 1:
        return complex(np.exp(-1j * nodes[0] * t))

    mu = float(nodes.mean())
    centered = nodes - mu
    phase = complex(np.exp(-1j * mu * t))

    if np.ptp(centered) == 0.0:
        # All nodes equal: the confluent limit is the (m-1)-th derivative
        # of the phase function over (m-1)!.
        return phase * (-1j * t) ** (m - 1) / factorial(m - 1)

    a = np.zeros((m, m), dtype=np.complex128)
    idx = np.arange(m)
    a[idx, idx] = -1j * t * centered
    a[idx[:-1], idx[:-1] + 1] = -1j * t

    norm = float(np.max(np.sum(np.abs(a), axis=1)))
    squarings = 0
    if norm > _SCALE_LIMIT:
        squarings = int(np.ceil(np.log2(norm / _SCALE_LIMIT)))
        a /= 2.0**squarings

    # Horner form of the truncated Taylor series for exp(a).
    eye = np.eye(m, dtype=np.complex128)
    result = eye.copy()
    for k in range(_TAYLOR_ORDER, 0, -1):
        result = eye + (a / k) @ result
    for _ in range(squarings):
        result = result @ result
    return phase * complex(result[0, m - 1])


def dd_exp(node_list: NodeList) -> complex:
    """Confluent divided difference f[x_1, ..., x_m] of f(x) = e^{-i*x*t}.

    Total function: repeated and clustered nodes are handled by the same
    matrix-exponential route, and the value is independent of node order
    (divided differences are symmetric in their nodes).
    """
    return _dd_value(node_list.nodes, node_list.t)


def dd_exp_batch(node_lists: Sequence[NodeList]) -> list[complex]:
    """Element-wise dd_exp; output order matches input order."""
    return [dd_exp(nl) for nl in node_lists]


def _phi_derivatives(y: float, others: list[tuple[float, int]], up_to: int) -> list[float]:
    """Derivatives phi^(0..up_to) at y of phi(x) = prod (x - z)^(-mu_z).

    Uses the logarithmic-derivative recursion: with L = log(phi),
    phi^(n) = sum_{k<n} C(n-1, k) phi^(k) L^(n-k), and
    L^(m)(y) = -sum_z mu_z * (-1)^(m-1) * (m-1)! / (y - z)^m.
    """
    phi0 = 1.0
    for z, mult in others:
        phi0 *= (y - z) ** (-mult)
    log_derivs = [0.0]  # placeholder for m = 0 (unused)
    for m in range(1, up_to + 1):
        val = 0.0
        sign = -1.0 if (m - 1) % 2 else 1.0
        for z, mult in others:
            val -= mult * sign * factorial(m - 1) / (y - z) ** m
        log_derivs.append(val)
    phi = [phi0]
    for n in range(1, up_to + 1):
        acc = 0.0
        for k in range(n):
            acc += comb(n - 1, k) * phi[k] * log_derivs[n - k]
        phi.append(acc)
    return phi


def dd_exp_parts(nodes: NDArray[np.float64] | Sequence[float]) -> list[tuple[int, float, float]]:
    """Exact decomposition of the divided difference into t-power terms.

    Returns triples (p, y, a) such that for every t

        dd_exp(nodes, t) = sum over triples of  a * (-i*t)^p * e^{-i*y*t}.

    This is the Hermite partial-fraction form of the divided difference:
    each distinct node y of multiplicity mu contributes powers p < mu with
    real coefficients built from derivatives of prod (x - z)^(-mu_z).

    The coefficients grow like inverse powers of the node gaps, so this
    route is for structural analysis (splitting amplitudes by t-power),
    not for evaluation at clustered nodes — dd_exp handles that regime.
    """
    arr = np.atleast_1d(np.asarray(nodes, dtype=np.float64))
    values: list[float] = []
    counts: list[int] = []
    for x in arr:
        x = float(x)
        if values and x == values[-1]:
            counts[-1] += 1
            continue
        # group by exact value; nodes come from a finite energy alphabet
        found = False
        for i, v in enumerate(values):
            if x == v:
                counts[i] += 1
                found = True
                break
        if not found:
            values.append(x)
            counts.append(1)

    parts: list[tuple[int, float, float]] = []
    for i, (y, mult) in enumerate(zip(values, counts)):
        others = [(v, c) for j, (v, c) in enumerate(zip(values, counts)) if j != i]
        phi = _phi_derivatives(y, others, mult - 1)
        for p in range(mult):
            coeff = phi[mult - 1 - p] / (factorial(p) * factorial(mult - 1 - p))
            parts.append((p, y, coeff))
    return parts
