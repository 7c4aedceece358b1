"""
SIC POVMs, mutually unbiased bases and complex Hadamard matrices.

Weyl-Heisenberg displacements use the convention common in the SIC
literature, ``D(p, q) = tau^(p q) X^p Z^q`` with ``tau = -exp(i pi / N)``, so
published numerical fiducials can be imported and checked as-is.

Bases are stored as ``N x N`` matrices whose columns are the basis vectors.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np

from .codec import encode_array, encode_state
from .linalg import CheckReport, as_matrix, unitarity_defect
from .search import Product, SearchConfig, Sphere, Unitary, minimize

SEARCH_TOL = 1e-8
CONSTRUCT_TOL = 1e-10


def shift_clock(n: int):
    """Shift ``X|j> = |j+1>`` and clock ``Z|j> = w^j |j>``."""
    x = np.roll(np.eye(n, dtype=np.complex128), 1, axis=0)
    z = np.diag(np.exp(2j * np.pi * np.arange(n) / n))
    return x, z


def wh_displacement(n: int, p: int, q: int) -> np.ndarray:
    if n < 2:
        raise ValueError("dimension must be at least 2")
    x, z = shift_clock(n)
    tau = -np.exp(1j * np.pi / n)
    return tau ** (p * q) * np.linalg.matrix_power(x, p % n) @ np.linalg.matrix_power(z, q % n)


@lru_cache(maxsize=32)
def _displacements(n: int) -> np.ndarray:
    d = np.stack([wh_displacement(n, p, q) for p in range(n) for q in range(n)])
    d.setflags(write=False)
    return d


def sic_orbit(fiducial) -> np.ndarray:
    """Weyl-Heisenberg orbit of ``fiducial``.

    Returns an ``(N^2, N)`` array whose row ``p*N + q`` is ``D(p, q) |fiducial>``;
    row 0 is the fiducial itself.
    """
    f = np.asarray(fiducial, dtype=np.complex128).reshape(-1)
    if abs(np.linalg.norm(f) - 1) > 1e-12:
        raise ValueError("fiducial must be a unit vector")
    return _displacements(f.size) @ f


def verify_sic(vectors, tol: float = CONSTRUCT_TOL) -> CheckReport:
    """Check ``|<psi_j|psi_k>|^2 = (N delta_jk + 1) / (N + 1)`` on ``N^2`` vectors."""
    v = np.asarray(vectors, dtype=np.complex128)
    if v.ndim != 2:
        raise ValueError("expected a stack of vectors")
    n = v.shape[1]
    if v.shape[0] != n * n:
        raise ValueError(f"a SIC in dimension {n} has {n * n} vectors, got {v.shape[0]}")
    gram = np.abs(v.conj() @ v.T) ** 2
    target = (n * np.eye(n * n) + 1) / (n + 1)
    dev = np.abs(gram - target)
    idx = np.unravel_index(int(np.argmax(dev)), dev.shape)
    return CheckReport.from_residual(dev[idx], tol, [idx])


def _overlaps(f: np.ndarray) -> np.ndarray:
    return np.einsum("i,kij,j->k", f.conj(), _displacements(f.size), f)


def sic_residual(fiducial) -> float:
    """Sum over ``(p, q) != (0, 0)`` of ``(|<f|D(p,q)|f>|^2 - 1/(N+1))^2``."""
    f = np.asarray(fiducial, dtype=np.complex128).reshape(-1)
    c = _overlaps(f)[1:]
    return float(np.sum((np.abs(c) ** 2 - 1 / (f.size + 1)) ** 2))


def sic_residual_grad(fiducial) -> np.ndarray:
    """Complex gradient ``df/dRe + i df/dIm`` of :func:`sic_residual`."""
    f = np.asarray(fiducial, dtype=np.complex128).reshape(-1)
    d = _displacements(f.size)[1:]
    c = np.einsum("i,kij,j->k", f.conj(), d, f)
    w = 4 * (np.abs(c) ** 2 - 1 / (f.size + 1))
    df = d @ f
    dhf = np.conj(np.transpose(d, (0, 2, 1))) @ f
    return np.einsum("k,ki->i", w * c.conj(), df) + np.einsum("k,ki->i", w * c, dhf)


def _split(x: np.ndarray) -> np.ndarray:
    n = x.size // 2
    return x[:n] + 1j * x[n:]


def _join(z: np.ndarray) -> np.ndarray:
    return np.concatenate([z.real, z.imag])


def sic_search(n: int, restarts: int = 200, seed: int = 0, max_iters: int = 10_000,
               target: float = 1e-20, tol: float = SEARCH_TOL, workers: int = 1):
    """Search for a Weyl-Heisenberg covariant SIC fiducial in dimension ``n``.

    The fiducial lives on the unit sphere of ``C^n = R^(2n)``; the search stops
    at the first restart whose residual reaches ``target``. The certificate's
    ``extra`` holds the verifier report of the best orbit.
    """
    config = SearchConfig(restarts=restarts, max_iters=max_iters, seed=seed,
                          target=target, gtol=0.0, workers=workers)
    cert = minimize(
        lambda x: sic_residual(_split(x)),
        Sphere(2 * n),
        config,
        gradient=lambda x: _join(sic_residual_grad(_split(x))),
        problem="sic",
        params={"dim": n},
        tolerances={"verify": tol, "target": target},
    )
    if cert.best_raw is not None:
        fid = _split(cert.best_raw)
        fid = fid / np.linalg.norm(fid)
        report = verify_sic(sic_orbit(fid), tol)
        cert.extra["fiducial"] = encode_state(fid, [n])
        cert.extra["report"] = report.to_dict()
        cert.extra["verdict"] = "sic-found" if report.passed else "not-found"
    return cert


def tetrahedron_fiducial() -> np.ndarray:
    """Qubit state with Bloch vector ``(1, 1, 1)/sqrt(3)``."""
    theta = np.arccos(1 / np.sqrt(3))
    return np.array([np.cos(theta / 2), np.exp(1j * np.pi / 4) * np.sin(theta / 2)])


def hesse_fiducial() -> np.ndarray:
    return np.array([0, 1, -1], dtype=np.complex128) / np.sqrt(2)


KNOWN_FIDUCIALS = {2: tetrahedron_fiducial, 3: hesse_fiducial}


# --------------------------------------------------------------------------
# Mutually unbiased bases
# --------------------------------------------------------------------------


def verify_mub(bases: Sequence, tol: float = CONSTRUCT_TOL) -> CheckReport:
    """Unbiasedness ``|<psi_i^m|psi_j^n>|^2 = 1/N`` plus orthonormality of each basis.

    Witnesses are ``(m, n, i, j)``; an orthonormality defect of basis ``m``
    is reported as ``(m, m, i, j)``.
    """
    mats = [as_matrix(b, square=True) for b in bases]
    if len(mats) < 2:
        raise ValueError("need at least two bases")
    n = mats[0].shape[0]
    if any(m.shape != (n, n) for m in mats):
        raise ValueError("bases have mismatched dimensions")
    worst, witness = -1.0, None
    ortho = cross = 0.0
    for a, ma in enumerate(mats):
        r, (i, j) = unitarity_defect(ma)
        ortho = max(ortho, r)
        if r > worst:
            worst, witness = r, (a, a, i, j)
    for a in range(len(mats)):
        for b in range(a + 1, len(mats)):
            dev = np.abs(np.abs(mats[a].conj().T @ mats[b]) ** 2 - 1 / n)
            i, j = np.unravel_index(int(np.argmax(dev)), dev.shape)
            cross = max(cross, dev[i, j])
            if dev[i, j] > worst:
                worst, witness = dev[i, j], (a, b, i, j)
    return CheckReport.from_residual(worst, tol, [witness],
                                     {"orthonormality": ortho, "unbiasedness": cross})


def _is_prime(p: int) -> bool:
    return p >= 2 and all(p % k for k in range(2, int(p ** 0.5) + 1))


def pauli_bases() -> list:
    """Eigenbases of sigma_z, sigma_x, sigma_y."""
    s = 1 / np.sqrt(2)
    return [
        np.eye(2, dtype=np.complex128),
        s * np.array([[1, 1], [1, -1]], dtype=np.complex128),
        s * np.array([[1, 1], [1j, -1j]], dtype=np.complex128),
    ]


def mub_prime(p: int) -> list:
    """Complete set of ``p + 1`` MUBs in prime dimension ``p``.

    Computational basis, then for ``m = 0..p-1`` the basis whose vector ``j``
    has components ``w^(m k^2 + j k) / sqrt(p)``. For ``p = 2`` the Pauli
    eigenbases are returned instead.
    """
    if not isinstance(p, (int, np.integer)) or not _is_prime(int(p)) or p > 97:
        raise ValueError(f"mub_prime needs a prime 2 <= p <= 97, got {p!r}")
    if p == 2:
        return pauli_bases()
    k = np.arange(p)
    w = np.exp(2j * np.pi / p)
    bases = [np.eye(p, dtype=np.complex128)]
    for m in range(p):
        # rows index the component k, columns the vector j
        expo = (m * k[:, None] ** 2 + k[:, None] * k[None, :]) % p
        bases.append(w ** expo / np.sqrt(p))
    return bases


def fourier_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def verify_complex_hadamard(u, tol: float = CONSTRUCT_TOL) -> CheckReport:
    """Unitary with every ``|U_ij|^2 = 1/N``."""
    u = as_matrix(u, square=True)
    n = u.shape[0]
    r_unit, loc = unitarity_defect(u)
    dev = np.abs(np.abs(u) ** 2 - 1 / n)
    idx = np.unravel_index(int(np.argmax(dev)), dev.shape)
    worst = (r_unit, loc) if r_unit >= dev[idx] else (dev[idx], idx)
    return CheckReport.from_residual(worst[0], tol, [worst[1]],
                                     {"unitarity": r_unit, "modulus": float(dev[idx])})


def hadamard_from_bases(b1, b2) -> np.ndarray:
    """Transition matrix ``U_ij = <b1_i|b2_j>``."""
    b1 = as_matrix(b1, square=True)
    b2 = as_matrix(b2, square=True)
    if b1.shape != b2.shape:
        raise ValueError("bases have different dimensions")
    return b1.conj().T @ b2


def mub_objective(unitaries, n: int) -> float:
    """Squared unbiasedness deviations of ``{I} + unitaries`` (pairs over all bases)."""
    mats = [np.eye(n, dtype=np.complex128)] + list(unitaries)
    total = 0.0
    for a in range(len(mats)):
        for b in range(a + 1, len(mats)):
            g = mats[a].conj().T @ mats[b]
            total += float(np.sum((np.abs(g) ** 2 - 1 / n) ** 2))
    return total


def mub_objective_grad(unitaries, n: int) -> tuple:
    mats = [np.eye(n, dtype=np.complex128)] + list(unitaries)
    grads = [np.zeros((n, n), dtype=np.complex128) for _ in mats]
    for a in range(len(mats)):
        for b in range(a + 1, len(mats)):
            g = mats[a].conj().T @ mats[b]
            gg = 4 * (np.abs(g) ** 2 - 1 / n) * g
            grads[b] += mats[a] @ gg
            grads[a] += mats[b] @ gg.conj().T
    return tuple(grads[1:])


def mub_search(n: int, k: int, restarts: int = 20, seed: int = 0, max_iters: int = 5000,
               target: float = 1e-22, tol: float = SEARCH_TOL, workers: int = 1):
    """Search for ``k`` MUBs in dimension ``n`` with basis 0 fixed to the identity."""
    if k < 2:
        raise ValueError("need at least two bases")
    manifold = Product(*[Unitary(n) for _ in range(k - 1)])
    config = SearchConfig(restarts=restarts, max_iters=max_iters, seed=seed,
                          target=target, gtol=0.0, workers=workers)
    cert = minimize(
        lambda us: mub_objective(us, n),
        manifold,
        config,
        gradient=lambda us: mub_objective_grad(us, n),
        problem="mub",
        params={"dim": n, "bases": k},
        tolerances={"verify": tol, "target": target},
    )
    if cert.best_raw is not None:
        bases = [np.eye(n, dtype=np.complex128)] + list(cert.best_raw)
        report = verify_mub(bases, tol)
        cert.extra["bases"] = [encode_array(b) for b in bases]
        cert.extra["report"] = report.to_dict()
        cert.extra["residual"] = report.max_residual
    return cert
