"""
Dense complex linear algebra and tensor reorderings.

Every composite index follows one convention: for factor dimensions
``[d1, d2, ...]`` the basis label ``(i1, i2, ...)`` maps to the flat index
``i1*d2*d3*... + i2*d3*... + ...`` (leftmost factor most significant). This is
exactly numpy's C-order reshape, so all reorderings below are reshape/transpose
pairs with no arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAX_SIDE = 4096
HERMITIAN_TOL = 1e-10


@dataclass(frozen=True)
class CheckReport:
    """Verdict of a verifier.

    ``passed`` is always ``max_residual <= tolerance_used``. ``witness`` lists
    index tuples locating the worst violation; ``components`` optionally breaks
    the residual into named parts.
    """

    passed: bool
    max_residual: float
    witness: list = field(default_factory=list)
    tolerance_used: float = 0.0
    components: dict = field(default_factory=dict)

    @classmethod
    def from_residual(cls, residual, tol, witness=(), components=None):
        residual = float(residual)
        return cls(
            passed=bool(residual <= tol),
            max_residual=residual,
            witness=[tuple(int(i) if isinstance(i, (int, np.integer)) else i for i in w) for w in witness],
            tolerance_used=float(tol),
            components=dict(components or {}),
        )

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_residual": self.max_residual,
            "witness": [list(w) for w in self.witness],
            "tolerance_used": self.tolerance_used,
            "components": self.components,
        }


def as_matrix(a, *, square: bool = False) -> np.ndarray:
    """Coerce ``a`` into a finite 2-d complex128 array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got array of shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    if max(m.shape) > MAX_SIDE:
        raise ValueError(f"matrix side {max(m.shape)} exceeds the size cap {MAX_SIDE}")
    if square and m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class StateVector:
    """Unit vector on a tensor-product space with declared factor dimensions."""

    dims: tuple
    amplitudes: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if any(d < 1 for d in dims):
            raise ValueError(f"invalid factor dimensions {dims}")
        if amps.size != int(np.prod(dims)):
            raise ValueError(f"{amps.size} amplitudes do not match dims {dims}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("state has non-finite amplitudes")
        if abs(np.linalg.norm(amps) - 1.0) > 1e-12:
            raise ValueError(f"state norm {np.linalg.norm(amps)!r} is not 1")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, amplitudes, dims=None):
        amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        return cls(dims if dims is not None else (amps.size,), amps / np.linalg.norm(amps))

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, PSD matrix with declared factor dimensions."""

    dims: tuple
    matrix: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        m = as_matrix(self.matrix, square=True)
        if m.shape[0] != int(np.prod(dims)):
            raise ValueError(f"side {m.shape[0]} does not match dims {dims}")
        if np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > 1e-12:
            raise ValueError(f"density matrix trace {np.trace(m).real!r} is not 1")
        if np.linalg.eigvalsh(m)[0] < -1e-10:
            raise ValueError("density matrix is not positive semidefinite")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", m)


def kron(a, b) -> np.ndarray:
    """Kronecker product with block structure ``a[i, j] * b``."""
    a = as_matrix(a)
    b = as_matrix(b)
    rows, cols = a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    if max(rows, cols) > MAX_SIDE:
        raise ValueError(f"kron result {rows}x{cols} exceeds the size cap {MAX_SIDE}")
    return np.kron(a, b)


def _hermitize(h) -> np.ndarray:
    h = as_matrix(h, square=True)
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    defect = float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0
    if defect > HERMITIAN_TOL * scale:
        raise ValueError(f"matrix is not Hermitian (defect {defect:.3e})")
    return (h + h.conj().T) / 2


def hermitian_eig(h):
    """Eigen-decomposition of a Hermitian matrix.

    Inputs within 1e-10 (relative to the largest entry) of Hermitian are
    symmetrized first; anything farther off raises ``ValueError``.

    Returns
    -------
    eigenvalues : ndarray
        Real, ascending.
    eigenvectors : ndarray
        Orthonormal columns, ``h @ v[:, k] == eigenvalues[k] * v[:, k]``.
    """
    return np.linalg.eigh(_hermitize(h))


def hermitian_eigvals(h) -> np.ndarray:
    return np.linalg.eigvalsh(_hermitize(h))


def singular_values(a) -> np.ndarray:
    """Singular values in descending order."""
    return np.linalg.svd(as_matrix(a), compute_uv=False)


def _split_dims(side: int, dims: Sequence[int]) -> tuple:
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise ValueError(f"invalid factor dimensions {dims}")
    if int(np.prod(dims)) != side:
        raise ValueError(f"matrix side {side} does not match factor dimensions {dims}")
    return dims


def partial_transpose(rho, d_a: int, d_b: int) -> np.ndarray:
    """Transpose on the second factor: ``<ij|out|lm> = <im|rho|lj>``."""
    rho = as_matrix(rho, square=True)
    _split_dims(rho.shape[0], (d_a, d_b))
    t = rho.reshape(d_a, d_b, d_a, d_b)
    return t.transpose(0, 3, 2, 1).reshape(d_a * d_b, d_a * d_b)


def reshuffle(u, d: int) -> np.ndarray:
    """Realignment ``out[(i,k),(j,l)] = u[(i,j),(k,l)]`` on a ``d x d`` system."""
    u = as_matrix(u, square=True)
    if u.shape[0] != d * d:
        raise ValueError(f"matrix side {u.shape[0]} is not {d}^2")
    return u.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)


def partial_trace(rho, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every factor not listed in ``keep``.

    The kept factors stay in ascending order. Keeping nothing returns the
    ``1x1`` trace.
    """
    rho = as_matrix(rho, square=True)
    dims = _split_dims(rho.shape[0], dims)
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {n} factors")
    drop = [k for k in range(n) if k not in keep]
    t = rho.reshape(dims + dims)
    # Bring (kept, dropped) row axes and (kept, dropped) column axes together.
    perm = keep + drop + [n + k for k in keep] + [n + k for k in drop]
    t = t.transpose(perm)
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    dd = int(np.prod([dims[k] for k in drop])) if drop else 1
    t = t.reshape(dk, dd, dk, dd)
    return np.einsum("ajbj->ab", t)


def permute_subsystems(m, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: factor ``perm[k]`` of the input becomes factor ``k``.

    Equivalent to conjugation ``P m P^T`` by the permutation matrix of basis
    labels, so the spectrum is unchanged.
    """
    m = as_matrix(m, square=True)
    dims = _split_dims(m.shape[0], dims)
    n = len(dims)
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(n)):
        raise ValueError(f"{perm} is not a permutation of {n} factors")
    t = m.reshape(dims + dims).transpose(perm + [n + p for p in perm])
    return t.reshape(m.shape)


def unitarity_defect(x, ord: str = "max"):
    """Residual of ``x^dagger x - 1``.

    ``ord="max"`` gives the largest entry modulus and its location;
    ``ord="spectral"`` gives the operator norm (unitarily invariant) and no
    location.
    """
    x = as_matrix(x, square=True)
    e = x.conj().T @ x - np.eye(x.shape[0])
    if ord == "spectral":
        return float(np.linalg.norm(e, 2)), None
    a = np.abs(e)
    idx = np.unravel_index(int(np.argmax(a)), a.shape)
    return float(a[idx]), (int(idx[0]), int(idx[1]))


def max_entangled_state(n: int) -> np.ndarray:
    """Amplitudes of ``sum_j |j>|j> / sqrt(n)``."""
    return np.eye(n, dtype=np.complex128).reshape(-1) / np.sqrt(n)


def haar_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return z / np.linalg.norm(z)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph
