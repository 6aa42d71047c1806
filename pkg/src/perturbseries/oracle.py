"""Exact reference results for small Hermitian systems.

Everything downstream is compared against this module: a dense Hermitian
eigensolver (cyclic Jacobi, adequate for desk-scale matrices), the exact
propagator built from the spectral decomposition, exact transition
probabilities, and the closed-form solution of the coupled two-level
system.  The eigensolver is deliberately dependency-free so the reference
path shares no code with the series/kernel machinery it is checking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import NDArray

if TYPE_CHECKING:
    from .model import SplitSystem, SystemSpec

__all__ = [
    "ConvergenceError",
    "ExactSolution",
    "hermitian_eigh",
    "diagonalize",
    "exact_transition_probability",
    "two_state_closed_form",
]

#: Stop sweeping when the off-diagonal Frobenius norm falls below this
#: multiple of the full Frobenius norm.
OFFDIAG_TOL = 1e-14

#: Jacobi converges quadratically; a well-conditioned Hermitian matrix of
#: desk scale (N <= 16) is done in well under ten sweeps.
MAX_SWEEPS = 60


class ConvergenceError(RuntimeError):
    """The Jacobi sweep hit its iteration cap without converging."""


def _rotate(a: NDArray[np.complex128], v: NDArray[np.complex128], p: int, q: int) -> None:
    """Apply one complex Jacobi rotation zeroing a[p, q], updating a and v in place."""
    apq = a[p, q]
    mag = abs(apq)
    if mag == 0.0:
        return
    phase = apq / mag
    tau = (a[p, p].real - a[q, q].real) / (2.0 * mag)
    if tau >= 0.0:
        t = 1.0 / (tau + np.hypot(1.0, tau))
    else:
        t = -1.0 / (-tau + np.hypot(1.0, tau))
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c

    # Column update: columns p, q of the unitary U = [[c, -s*phase], [s*conj(phase), c]].
    col_p = a[:, p].copy()
    col_q = a[:, q].copy()
    a[:, p] = c * col_p + s * np.conj(phase) * col_q
    a[:, q] = -s * phase * col_p + c * col_q
    row_p = a[p, :].copy()
    row_q = a[q, :].copy()
    a[p, :] = c * row_p + s * phase * row_q
    a[q, :] = -s * np.conj(phase) * row_p + c * row_q
    # Clamp the pivot pair exactly; roundoff would otherwise linger.
    a[p, q] = 0.0
    a[q, p] = 0.0
    a[p, p] = a[p, p].real
    a[q, q] = a[q, q].real

    vcol_p = v[:, p].copy()
    vcol_q = v[:, q].copy()
    v[:, p] = c * vcol_p + s * np.conj(phase) * vcol_q
    v[:, q] = -s * phase * vcol_p + c * vcol_q


def _offdiag_norm(a: NDArray[np.complex128]) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def hermitian_eigh(
    matrix: NDArray[np.complex128],
    *,
    tol: float = OFFDIAG_TOL,
    max_sweeps: int = MAX_SWEEPS,
) -> tuple[NDArray[np.float64], NDArray[np.complex128]]:
    """Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi.

    Args:
        matrix: Hermitian N x N array (not modified).
        tol: convergence threshold on the off-diagonal Frobenius norm,
            relative to the Frobenius norm of the input.
        max_sweeps: hard cap on full cyclic sweeps.

    Returns:
        (eigenvalues, eigenvectors): eigenvalues ascending, eigenvectors
        as unitary columns.  Each column is phase-fixed so its
        largest-magnitude component is real and positive, which makes the
        output bit-stable across runs.

    Raises:
        ConvergenceError: the sweep cap was reached first.
    """
    a = np.array(matrix, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    if n == 1:
        return np.array([a[0, 0].real]), v

    scale = float(np.linalg.norm(a))
    if scale == 0.0:
        return np.zeros(n), v

    converged = False
    for _ in range(max_sweeps):
        if _offdiag_norm(a) <= tol * scale:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                _rotate(a, v, p, q)
    else:
        converged = _offdiag_norm(a) <= tol * scale
    if not converged:
        raise ConvergenceError(
            f"Jacobi sweep did not converge in {max_sweeps} sweeps "
            f"(off-diagonal residual {_offdiag_norm(a):.3e}, scale {scale:.3e})"
        )

    vals = np.real(np.diag(a)).copy()
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    vecs = v[:, order]

    # Deterministic phase: largest-magnitude component real positive.
    for k in range(n):
        col = vecs[:, k]
        idx = int(np.argmax(np.abs(col)))
        pivot = col[idx]
        if pivot != 0.0:
            vecs[:, k] = col * (np.conj(pivot) / abs(pivot))
            vecs[idx, k] = vecs[idx, k].real
    return vals, vecs


@dataclass(frozen=True)
class ExactSolution:
    """Spectral decomposition of the full Hamiltonian.

    eigenvalues are ascending; eigenvectors holds the corresponding
    unitary columns in the same (working) basis the input used.
    """

    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.complex128]

    @property
    def dimension(self) -> int:
        return int(self.eigenvalues.shape[0])

    def propagator(self, t: float) -> NDArray[np.complex128]:
        """The unitary e^{-iHt} assembled from the spectral form."""
        phases = np.exp(-1j * self.eigenvalues * t)
        return (self.eigenvectors * phases[np.newaxis, :]) @ self.eigenvectors.conj().T


def _hamiltonian_of(sys: SplitSystem | SystemSpec | NDArray[np.complex128]) -> NDArray[np.complex128]:
    if hasattr(sys, "energies_redivided"):
        return np.diag(sys.energies_redivided).astype(np.complex128) + sys.g
    if hasattr(sys, "energies"):
        return np.diag(sys.energies).astype(np.complex128) + sys.coupling_scale * sys.h1
    return np.asarray(sys, dtype=np.complex128)


def diagonalize(sys: SplitSystem | SystemSpec | NDArray[np.complex128]) -> ExactSolution:
    """Exactly diagonalize a system (or a raw Hermitian matrix).

    Accepts either representation of the system; a SplitSystem is
    diagonalized in its working basis, so the eigenvalues agree with the
    original representation while the eigenvector components refer to the
    rotated levels.
    """
    h = _hamiltonian_of(sys)
    herm_defect = float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0
    h_scale = float(np.max(np.abs(h))) if h.size else 0.0
    if herm_defect > 1e-12 * max(h_scale, 1.0):
        raise ValueError(f"matrix is not Hermitian (max deviation {herm_defect:.3e})")
    vals, vecs = hermitian_eigh(h)
    return ExactSolution(eigenvalues=vals, eigenvectors=vecs)


def exact_transition_probability(
    sol: ExactSolution,
    initial: int,
    final: int,
    t: float | NDArray[np.float64],
) -> float | NDArray[np.float64]:
    """|<final| e^{-iHt} |initial>|^2 via the spectral form.

    t may be a scalar or an array; the return matches.
    """
    n = sol.dimension
    if not (0 <= initial < n and 0 <= final < n):
        raise ValueError(f"level indices ({initial}, {final}) out of range for N={n}")
    ts = np.asarray(t, dtype=np.float64)
    weights = sol.eigenvectors[final, :] * np.conj(sol.eigenvectors[initial, :])
    amp = np.exp(-1j * np.outer(np.atleast_1d(ts), sol.eigenvalues)) @ weights
    prob = np.abs(amp) ** 2
    if ts.ndim == 0:
        return float(prob[0])
    return prob


def two_state_closed_form(
    e1: float,
    e2: float,
    v: complex,
    t: float | NDArray[np.float64],
) -> dict[str, float | NDArray[np.float64]]:
    """Closed-form solution of the coupled two-level system.

    For H = [[e1, v], [conj(v), e2]] with e2 > e1 the exact level energies
    split symmetrically about the mean by the dressed frequency
    sqrt(4|v|^2 + (e2-e1)^2), and the 1 -> 2 transition probability is the
    textbook oscillation at that frequency.

    Returns a dict with keys "e1", "e2" (exact level energies, ascending),
    "omega" (dressed frequency), and "p12" (transition probability at t,
    scalar or array matching t).
    """
    omega0 = e2 - e1
    if omega0 <= 0:
        raise ValueError(f"requires e2 > e1, got e1={e1}, e2={e2}")
    vv = abs(v)
    omega = float(np.sqrt(4.0 * vv * vv + omega0 * omega0))
    mean = 0.5 * (e1 + e2)
    ts = np.asarray(t, dtype=np.float64)
    p = vv * vv * np.sin(omega * ts / 2.0) ** 2 / (omega / 2.0) ** 2
    if ts.ndim == 0:
        p = float(p)
    return {
        "e1": mean - 0.5 * omega,
        "e2": mean + 0.5 * omega,
        "omega": omega,
        "p12": p,
    }
