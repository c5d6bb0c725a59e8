"""Core state/operator types and linear algebra for small complex Hilbert spaces.

Everything is plain dense numpy in dimension <= 64. Values are validated on
construction and frozen afterwards, so they are safe to share between worker
processes; all operations are pure functions of their inputs plus an explicit
random generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MAX_DIM",
    "PureState",
    "DensityMatrix",
    "UnitaryMap",
    "HermitianOperator",
    "basis_state",
    "eig_hermitian",
    "entanglement_infidelity",
    "fidelity_pure",
    "gue_sample",
    "haar_random_state",
    "hermiticity_defect",
    "random_perturbation_unitary",
    "rng_stream",
]

MAX_DIM = 64

# Construction tolerances.
NORM_TOL = 1e-12
HERM_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
UNITARY_TOL = 1e-10


def rng_stream(master_seed: int, *path: int) -> np.random.Generator:
    """Deterministic random stream addressed by (master_seed, *path).

    Uses PCG64 seeded through numpy's SeedSequence, so streams derived from
    the same master seed but different index paths are statistically
    independent, and serial/parallel execution orders see identical draws.
    """
    entries = (int(master_seed),) + tuple(int(p) for p in path)
    if any(e < 0 for e in entries):
        raise ValueError("seed path entries must be non-negative integers")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entries)))


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _square_complex(m, name: str = "matrix") -> np.ndarray:
    a = np.array(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    return a


def _check_dim(dim: int) -> int:
    dim = int(dim)
    if dim < 1 or dim > MAX_DIM:
        raise ValueError(f"dimension must be in [1, {MAX_DIM}], got {dim}")
    return dim


def hermiticity_defect(m: np.ndarray) -> float:
    """Largest element-wise deviation of m from its conjugate transpose."""
    return float(np.max(np.abs(m - m.conj().T)))


@dataclass(frozen=True)
class PureState:
    """Normalized complex state vector in dimension `dim`."""

    dim: int
    amplitudes: np.ndarray

    def __post_init__(self):
        dim = _check_dim(self.dim)
        a = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if a.shape != (dim,):
            raise ValueError(f"expected {dim} amplitudes, got {a.shape}")
        norm_sq = float(np.sum(np.abs(a) ** 2))
        if abs(norm_sq - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized: sum |c|^2 = {norm_sq!r}")
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "amplitudes", _freeze(a))

    def density(self) -> "DensityMatrix":
        """Rank-1 density matrix |psi><psi|."""
        return DensityMatrix(self.dim, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite operator."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        dim = _check_dim(self.dim)
        m = _square_complex(self.matrix)
        if m.shape != (dim, dim):
            raise ValueError(f"expected {dim}x{dim} matrix, got {m.shape}")
        defect = hermiticity_defect(m)
        if defect > HERM_TOL:
            raise ValueError(f"density matrix not Hermitian (defect {defect:.3e})")
        tr = m.trace()
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace {tr!r} != 1")
        lo = float(np.linalg.eigvalsh(m)[0])
        if lo < -PSD_TOL:
            raise ValueError(f"density matrix not PSD (min eigenvalue {lo:.3e})")
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "matrix", _freeze(m))


@dataclass(frozen=True)
class UnitaryMap:
    """Unitary matrix on dimension `dim`."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        dim = _check_dim(self.dim)
        m = _square_complex(self.matrix)
        if m.shape != (dim, dim):
            raise ValueError(f"expected {dim}x{dim} matrix, got {m.shape}")
        defect = float(np.linalg.norm(m.conj().T @ m - np.eye(dim)))
        if defect > UNITARY_TOL:
            raise ValueError(f"matrix not unitary (Frobenius defect {defect:.3e})")
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "matrix", _freeze(m))


@dataclass(frozen=True)
class HermitianOperator:
    """Hermitian matrix on dimension `dim` (measurement effects, generators)."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        dim = _check_dim(self.dim)
        m = _square_complex(self.matrix)
        if m.shape != (dim, dim):
            raise ValueError(f"expected {dim}x{dim} matrix, got {m.shape}")
        defect = hermiticity_defect(m)
        if defect > HERM_TOL:
            raise ValueError(f"matrix not Hermitian (defect {defect:.3e})")
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "matrix", _freeze(m))


def basis_state(dim: int, k: int) -> PureState:
    """Standard basis vector |k> in dimension dim."""
    if not 0 <= k < dim:
        raise ValueError(f"basis index {k} out of range for dimension {dim}")
    a = np.zeros(dim, dtype=np.complex128)
    a[k] = 1.0
    return PureState(dim, a)


def as_matrix(op) -> np.ndarray:
    """Unwrap an operator-like object to its ndarray."""
    if isinstance(op, (HermitianOperator, DensityMatrix, UnitaryMap)):
        return op.matrix
    return _square_complex(op)


def eig_hermitian(op) -> tuple[np.ndarray, UnitaryMap]:
    """Eigendecomposition of a Hermitian operator.

    Returns eigenvalues sorted descending and the matching orthonormal
    eigenvectors as the columns of a UnitaryMap, so that
    A = V diag(w) V^dagger.
    """
    m = as_matrix(op)
    defect = hermiticity_defect(m)
    if defect > HERM_TOL:
        raise ValueError(f"input not Hermitian (defect {defect:.3e})")
    w, v = np.linalg.eigh(m)
    return np.ascontiguousarray(w[::-1]), UnitaryMap(m.shape[0], np.ascontiguousarray(v[:, ::-1]))


def fidelity_pure(psi: PureState, rho: DensityMatrix) -> float:
    """Overlap <psi| rho |psi>; subtract from 1 for the infidelity."""
    if psi.dim != rho.dim:
        raise ValueError(f"dimension mismatch: state {psi.dim}, density matrix {rho.dim}")
    return float(np.real(psi.amplitudes.conj() @ rho.matrix @ psi.amplitudes))


def haar_random_state(dim: int, rng: np.random.Generator) -> PureState:
    """Haar-uniform random pure state (normalized complex Gaussian vector)."""
    if dim < 2:
        raise ValueError(f"need dimension >= 2, got {dim}")
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return PureState(dim, z / np.linalg.norm(z))


def gue_sample(dim: int, rng: np.random.Generator) -> np.ndarray:
    """GUE draw rescaled to Tr(G^2) = dim, so strengths compare across dimensions."""
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    g = (a + a.conj().T) / 2.0
    g *= np.sqrt(dim / np.trace(g @ g).real)
    return g


def random_perturbation_unitary(dim: int, epsilon: float, rng: np.random.Generator) -> UnitaryMap:
    """Unitary exp(-i epsilon G) with G a normalized GUE draw.

    Models a fixed coherent error of strength epsilon on an intended identity;
    epsilon = 0 gives the identity map.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}")
    if epsilon == 0.0:
        return UnitaryMap(dim, np.eye(dim, dtype=np.complex128))
    g = gue_sample(dim, rng)
    w, v = np.linalg.eigh(g)
    u = (v * np.exp(-1j * epsilon * w)) @ v.conj().T
    return UnitaryMap(dim, u)


def entanglement_infidelity(u: UnitaryMap) -> float:
    """Process infidelity of a unitary relative to the identity, 1 - |Tr U|^2 / d^2."""
    d = u.dim
    return float(1.0 - np.abs(np.trace(u.matrix)) ** 2 / d**2)
