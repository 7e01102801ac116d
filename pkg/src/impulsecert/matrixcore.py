"""Dense real-matrix numerics for small systems (n up to a few dozen).

Plain ``numpy.ndarray`` (2-D, float64) is the matrix type throughout the
package; this module adds the validated operations the certifiers rely on
and the 2x2 block container used for coupled-system quantities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DefinitenessError,
    DimensionError,
    NotHurwitzError,
    NumericsError,
    SymmetryError,
)

__all__ = [
    "Block2x2",
    "as_matrix",
    "as_square",
    "symmetrize",
    "mat_exp",
    "spectral_norm",
    "spectral_radius",
    "sym_eig_range",
    "gen_sym_eig_max",
    "solve_lyapunov",
    "is_positive_definite",
]

# Relative asymmetry tolerated before sym_eig_range refuses the input.
SYMMETRY_TOL = 1e-10


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return ``a`` as a finite 2-D float64 array."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.size == 0:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def as_square(a, name: str = "matrix") -> np.ndarray:
    m = as_matrix(a, name)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    return m


def symmetrize(a) -> np.ndarray:
    """(A + A^T)/2."""
    m = as_square(a)
    return 0.5 * (m + m.T)


def mat_exp(a, t: float = 1.0) -> np.ndarray:
    """Matrix exponential e^{tA} (scaling-and-squaring Pade kernel)."""
    m = as_square(a)
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    return scipy.linalg.expm(t * m)


def spectral_norm(a) -> float:
    """Largest singular value."""
    return float(np.linalg.norm(as_matrix(a), 2))


def spectral_radius(a) -> float:
    """max |lambda| over the eigenvalues of a square matrix."""
    m = as_square(a)
    try:
        ev = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericsError(f"eigenvalue iteration failed: {exc}") from exc
    return float(np.max(np.abs(ev)))


def sym_eig_range(s, tol: float = SYMMETRY_TOL) -> tuple[float, float]:
    """(smallest, largest) eigenvalue of the symmetric part of ``s``.

    Refuses input whose asymmetry exceeds ``tol`` relative to its norm.
    """
    m = as_square(s)
    scale = max(1.0, float(np.max(np.abs(m))))
    asym = float(np.max(np.abs(m - m.T)))
    if asym > tol * scale:
        raise SymmetryError(f"asymmetry {asym:.3e} exceeds tolerance {tol:.1e} (scale {scale:.3e})")
    ev = np.linalg.eigvalsh(0.5 * (m + m.T))
    return float(ev[0]), float(ev[-1])


def _cholesky_spd(p) -> np.ndarray:
    m = symmetrize(p)
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        smallest = float(np.linalg.eigvalsh(m)[0])
        raise DefinitenessError(
            f"matrix is not positive definite (smallest eigenvalue {smallest:.6e})",
            offending_eigenvalue=smallest,
        ) from None


def gen_sym_eig_max(s, p) -> float:
    """Largest eigenvalue of P^{-1} S for symmetric S and SPD P.

    Computed through the Cholesky factor of P (whitening congruence), never
    by forming a non-symmetric inverse product.
    """
    sm = symmetrize(as_square(s, "S"))
    pm = as_square(p, "P")
    if sm.shape != pm.shape:
        raise DimensionError(f"S and P shapes differ: {sm.shape} vs {pm.shape}")
    chol = _cholesky_spd(pm)
    w = scipy.linalg.solve_triangular(chol, sm, lower=True)
    w = scipy.linalg.solve_triangular(chol, w.T, lower=True)
    ev = np.linalg.eigvalsh(0.5 * (w + w.T))
    return float(ev[-1])


def solve_lyapunov(a, q) -> np.ndarray:
    """Unique SPD solution P of A^T P + P A = -Q for Hurwitz A, SPD Q.

    Solved by vectorizing over the Kronecker-sum linear system; fine at the
    problem sizes this package targets.
    """
    am = as_square(a, "A")
    qm = as_square(q, "Q")
    if am.shape != qm.shape:
        raise DimensionError(f"A and Q shapes differ: {am.shape} vs {qm.shape}")
    alpha = float(np.max(np.linalg.eigvals(am).real))
    if alpha >= 0.0:
        raise NotHurwitzError(f"A is not Hurwitz (max Re eigenvalue {alpha:.6e})")
    qs = symmetrize(qm)
    smallest = float(np.linalg.eigvalsh(qs)[0])
    if smallest <= 0.0:
        raise DefinitenessError(
            f"Q must be positive definite (smallest eigenvalue {smallest:.6e})",
            offending_eigenvalue=smallest,
        )
    n = am.shape[0]
    eye = np.eye(n)
    system = np.kron(am.T, eye) + np.kron(eye, am.T)
    p = np.linalg.solve(system, -qs.reshape(-1)).reshape(n, n)
    p = 0.5 * (p + p.T)
    residual = float(np.linalg.norm(am.T @ p + p @ am + qs, 2))
    if residual > 1e-10 * max(1.0, float(np.linalg.norm(qs, 2))):
        raise NumericsError(f"Lyapunov residual {residual:.3e} exceeds contract")
    return p


def is_positive_definite(s, margin: float = 0.0) -> bool:
    """True iff the symmetric part of ``s`` has all eigenvalues > margin."""
    return sym_eig_range(s)[0] > margin


@dataclass(frozen=True)
class Block2x2:
    """A 2x2 block matrix with consistent block dimensions.

    Houses every block-partitioned quantity in the package: the frozen
    dynamics matrix, the jump matrix, table entries and bracket matrices.
    """

    b11: np.ndarray
    b12: np.ndarray
    b21: np.ndarray
    b22: np.ndarray

    def __post_init__(self):
        b11 = as_square(self.b11, "b11")
        b22 = as_square(self.b22, "b22")
        b12 = as_matrix(self.b12, "b12")
        b21 = as_matrix(self.b21, "b21")
        if b12.shape != (b11.shape[0], b22.shape[0]):
            raise DimensionError(f"b12 shape {b12.shape} inconsistent with diagonal blocks")
        if b21.shape != (b22.shape[0], b11.shape[0]):
            raise DimensionError(f"b21 shape {b21.shape} inconsistent with diagonal blocks")
        object.__setattr__(self, "b11", b11)
        object.__setattr__(self, "b12", b12)
        object.__setattr__(self, "b21", b21)
        object.__setattr__(self, "b22", b22)

    @property
    def n1(self) -> int:
        return self.b11.shape[0]

    @property
    def n2(self) -> int:
        return self.b22.shape[0]

    @classmethod
    def from_full(cls, full, n1: int) -> "Block2x2":
        m = as_square(full)
        if not 0 < n1 < m.shape[0]:
            raise DimensionError(f"block split {n1} out of range for shape {m.shape}")
        return cls(m[:n1, :n1], m[:n1, n1:], m[n1:, :n1], m[n1:, n1:])

    @classmethod
    def symmetric(cls, b11, b12, b22) -> "Block2x2":
        """Build a symmetric block matrix from its upper blocks."""
        b12 = as_matrix(b12, "b12")
        return cls(symmetrize(b11), b12, b12.T, symmetrize(b22))

    def full(self) -> np.ndarray:
        return np.block([[self.b11, self.b12], [self.b21, self.b22]])

    def transpose(self) -> "Block2x2":
        return Block2x2(self.b11.T, self.b21.T, self.b12.T, self.b22.T)

    def symmetrized(self) -> "Block2x2":
        """Blockwise (self + self^T)/2; enforces exact transpose consistency."""
        off = 0.5 * (self.b12 + self.b21.T)
        return Block2x2(symmetrize(self.b11), off, off.T, symmetrize(self.b22))
