"""
Latin squares, quantum Latin squares, 2-unitary matrices, perfect tensors,
AME states and entangling power.

Latin squares are integer ``N x N`` arrays with symbols ``0..N-1``. Quantum
tables are ``(N, N, dim)`` arrays of state amplitudes: ``dim = N`` for a
quantum Latin square and ``dim = N^2`` for the bipartite (orthogonal) case.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .codec import encode_array
from .linalg import (
    MAX_SIDE,
    CheckReport,
    as_matrix,
    partial_trace,
    partial_transpose,
    reshuffle,
    unitarity_defect,
)
from .search import SearchConfig, Unitary, minimize


class NoSolutionError(ValueError):
    """Requested object provably does not exist."""


@dataclass(frozen=True)
class AmeCandidate:
    parties: int
    local_dim: int
    state: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.state, dtype=np.complex128).reshape(-1)
        if self.parties < 2:
            raise ValueError("an AME candidate needs at least two parties")
        if s.size != self.local_dim ** self.parties:
            raise ValueError(f"state length {s.size} != {self.local_dim}^{self.parties}")
        if abs(np.linalg.norm(s) - 1) > 1e-12:
            raise ValueError("state is not normalized")
        object.__setattr__(self, "state", s)


def _as_square(sq) -> np.ndarray:
    a = np.asarray(sq)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected an N x N array, got shape {a.shape}")
    if not np.issubdtype(a.dtype, np.integer):
        if not np.all(np.equal(np.mod(a, 1), 0)):
            raise ValueError("Latin square entries must be integers")
        a = a.astype(int)
    n = a.shape[0]
    if a.min() < 0 or a.max() >= n:
        raise ValueError(f"symbols must lie in 0..{n - 1}")
    return a


def verify_latin(sq) -> CheckReport:
    """Every row and column is a permutation of ``0..N-1``.

    The residual counts repeated symbols over all rows and columns; the
    witness is the first offending ``(axis, index, symbol)`` with axis 0 for
    rows and 1 for columns.
    """
    a = _as_square(sq)
    n = a.shape[0]
    repeats = 0
    witness = []
    for axis, lines in ((0, a), (1, a.T)):
        for idx, line in enumerate(lines):
            counts = np.bincount(line, minlength=n)
            repeats += int(np.sum(np.maximum(counts - 1, 0)))
            if not witness and counts.max() > 1:
                witness.append((axis, idx, int(np.argmax(counts))))
    return CheckReport.from_residual(repeats, 0, witness)


def verify_graeco_latin(a, b) -> CheckReport:
    """Both squares Latin and all ``N^2`` ordered pairs ``(a_ij, b_ij)`` distinct."""
    a, b = _as_square(a), _as_square(b)
    if a.shape != b.shape:
        raise ValueError("squares have different orders")
    n = a.shape[0]
    ra, rb = verify_latin(a), verify_latin(b)
    seen = {}
    clashes = 0
    witness = list(ra.witness) + list(rb.witness)
    for i in range(n):
        for j in range(n):
            key = (int(a[i, j]), int(b[i, j]))
            if key in seen:
                clashes += 1
                if len(witness) == 0:
                    witness.append(seen[key] + (i, j))
            else:
                seen[key] = (i, j)
    total = ra.max_residual + rb.max_residual + clashes
    return CheckReport.from_residual(total, 0, witness,
                                     {"latin_a": ra.max_residual, "latin_b": rb.max_residual,
                                      "repeated_pairs": clashes})


def graeco_latin(n: int):
    """Orthogonal pair ``A = (i + j) mod N``, ``B = (i + 2j) mod N`` for odd ``N``."""
    if n == 6:
        raise NoSolutionError("no Graeco-Latin square of order six exists")
    if n % 2 == 0 or not 3 <= n <= 99:
        raise ValueError(f"graeco_latin supports odd orders 3..99, got {n}")
    i, j = np.indices((n, n))
    return (i + j) % n, (i + 2 * j) % n


# Bridge-player square: ranks A K Q J -> 0..3, suits spades clubs diamonds hearts -> 0..3.
CARD_RANKS = np.array([[0, 1, 2, 3], [1, 0, 3, 2], [2, 3, 0, 1], [3, 2, 1, 0]])
CARD_SUITS = np.array([[0, 1, 2, 3], [3, 2, 1, 0], [1, 0, 3, 2], [2, 3, 0, 1]])


def _table(table, mode_dim) -> np.ndarray:
    t = np.asarray(table, dtype=np.complex128)
    if t.ndim != 3 or t.shape[0] != t.shape[1]:
        raise ValueError(f"expected an (N, N, dim) table, got shape {t.shape}")
    n = t.shape[0]
    if t.shape[2] != mode_dim(n):
        raise ValueError(f"table vectors have dimension {t.shape[2]}, wrong mode for N={n}")
    return t


def _gram_defect(vectors):
    g = vectors.conj() @ vectors.T - np.eye(vectors.shape[0])
    a = np.abs(g)
    idx = np.unravel_index(int(np.argmax(a)), a.shape)
    return float(a[idx]), idx


def verify_quantum_latin(table, tol: float = 1e-10) -> CheckReport:
    """Every row and every column of an ``N x N`` table of vectors in C^N is an orthonormal basis.

    Witness ``(axis, line, i, j)`` names the line and the pair of cells with the
    worst Gram-matrix defect.
    """
    t = _table(table, lambda n: n)
    n = t.shape[0]
    worst, witness = 0.0, (0, 0, 0, 0)
    for axis in (0, 1):
        for line in range(n):
            vecs = t[line] if axis == 0 else t[:, line]
            r, (i, j) = _gram_defect(vecs)
            if r > worst:
                worst, witness = r, (axis, line, i, j)
    return CheckReport.from_residual(worst, tol, [witness])


def _flatness(s: np.ndarray, n: int):
    """(norm defect, max deviation of Tr_B |s><s| from I/N) for ``s`` in C^N (x) C^N."""
    m = s.reshape(n, n)
    red = m @ m.conj().T
    return abs(np.linalg.norm(s) - 1), float(np.max(np.abs(red - np.eye(n) / n)))


def verify_oqls(table, tol: float = 1e-10) -> CheckReport:
    """Orthogonal quantum Latin square check on an ``(N, N, N^2)`` table.

    Components: ``orthonormality`` of all ``N^2`` vectors, and ``rows`` /
    ``columns``, the worst deviation of ``s = sum(line) / sqrt(N)`` from a
    maximally entangled state (unit norm with flat reduced state). Relative
    phases are taken as +1; callers with other conventions must rephase first.
    """
    t = _table(table, lambda n: n * n)
    n = t.shape[0]
    ortho, (a, b) = _gram_defect(t.reshape(n * n, n * n))
    parts = {"orthonormality": ortho}
    witness = [("orthonormality", divmod(int(a), n), divmod(int(b), n))]
    worst = ortho
    for axis, name in ((0, "rows"), (1, "columns")):
        comp = 0.0
        for line in range(n):
            vecs = t[line] if axis == 0 else t[:, line]
            r = max(_flatness(vecs.sum(axis=0) / np.sqrt(n), n))
            if r > comp:
                comp = r
                if r > worst:
                    worst = r
                    witness = [(name, line)]
        parts[name] = comp
    return CheckReport.from_residual(worst, tol, witness, parts)


def product_table(a, b) -> np.ndarray:
    """Cells ``|a_ij> (x) |b_ij>`` of a pair of Latin squares."""
    a, b = _as_square(a), _as_square(b)
    n = a.shape[0]
    t = np.zeros((n, n, n * n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            t[i, j, a[i, j] * n + b[i, j]] = 1
    return t


def basis_table(sq) -> np.ndarray:
    """Classical embedding of a Latin square: cell ``(i, j)`` holds ``|sq_ij>``."""
    a = _as_square(sq)
    n = a.shape[0]
    return np.eye(n, dtype=np.complex128)[a]


def permutation_unitary(a, b) -> np.ndarray:
    """Permutation ``|i, j> -> |a_ij, b_ij>`` of C^N (x) C^N."""
    a, b = _as_square(a), _as_square(b)
    n = a.shape[0]
    u = np.zeros((n * n, n * n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            u[a[i, j] * n + b[i, j], i * n + j] = 1
    return u


def _check_side(u, d):
    u = as_matrix(u, square=True)
    if u.shape[0] != d * d:
        raise ValueError(f"matrix side {u.shape[0]} is not {d}^2")
    return u


def verify_two_unitary(u, d: int, tol: float = 1e-10) -> CheckReport:
    """``U``, ``U^Gamma`` and ``U^R`` all unitary (entrywise max defect)."""
    u = _check_side(u, d)
    parts, worst, witness = {}, -1.0, None
    for name, x in (("U", u), ("partial_transpose", partial_transpose(u, d, d)), ("reshuffle", reshuffle(u, d))):
        r, loc = unitarity_defect(x)
        parts[name] = r
        if r > worst:
            worst, witness = r, (name,) + loc
    return CheckReport.from_residual(worst, tol, [witness], parts)


def two_unitary_objective(u, d: int) -> float:
    """``sum ||X^dagger X - I||_F^2`` over ``X in {U^Gamma, U^R}``."""
    total = 0.0
    eye = np.eye(d * d)
    for x in (partial_transpose(u, d, d), reshuffle(u, d)):
        total += float(np.sum(np.abs(x.conj().T @ x - eye) ** 2))
    return total


def two_unitary_objective_grad(u, d: int) -> np.ndarray:
    eye = np.eye(d * d)
    pt = partial_transpose(u, d, d)
    rs = reshuffle(u, d)
    # Both reorderings are involutive index permutations, hence self-adjoint.
    g = partial_transpose(4 * pt @ (pt.conj().T @ pt - eye), d, d)
    g = g + reshuffle(4 * rs @ (rs.conj().T @ rs - eye), d)
    return g


def two_unitary_search(d: int, restarts: int = 100, seed: int = 0, max_iters: int = 2000,
                       target: float = 1e-22, tol: float = 1e-8, workers: int = 1):
    """Minimize the 2-unitarity defect over U(d^2)."""
    cert = minimize(
        lambda u: two_unitary_objective(u, d),
        Unitary(d * d),
        SearchConfig(restarts=restarts, max_iters=max_iters, seed=seed, target=target,
                     gtol=0.0, workers=workers),
        gradient=lambda u: two_unitary_objective_grad(u, d),
        problem="two-unitary",
        params={"dim": d},
        tolerances={"verify": tol, "target": target},
    )
    if cert.best_raw is not None:
        report = verify_two_unitary(cert.best_raw, d, tol)
        cert.extra["report"] = report.to_dict()
        cert.extra["residual"] = report.max_residual
        cert.extra["unitary"] = encode_array(cert.best_raw)
    return cert


def tensor_from_unitary(u, d: int) -> np.ndarray:
    """``T[i, j, k, l] = U[(i, j), (k, l)]``."""
    return _check_side(u, d).reshape(d, d, d, d)


def verify_perfect_tensor(t, tol: float = 1e-10) -> CheckReport:
    """Flattenings ``(ij|kl)``, ``(ik|jl)`` and ``(il|jk)`` must all be unitary."""
    t = np.asarray(t, dtype=np.complex128)
    if t.ndim != 4 or len(set(t.shape)) != 1:
        raise ValueError(f"expected a rank-4 tensor with equal index ranges, got {t.shape}")
    d = t.shape[0]
    parts, worst, witness = {}, -1.0, None
    for name, perm in (("ij|kl", (0, 1, 2, 3)), ("ik|jl", (0, 2, 1, 3)), ("il|jk", (0, 3, 1, 2))):
        r, loc = unitarity_defect(t.transpose(perm).reshape(d * d, d * d))
        parts[name] = r
        if r > worst:
            worst, witness = r, (name,) + loc
    return CheckReport.from_residual(worst, tol, [witness], parts)


def _reduced(state: np.ndarray, n: int, d: int, keep) -> np.ndarray:
    keep = list(keep)
    rest = [k for k in range(n) if k not in keep]
    m = state.reshape([d] * n).transpose(keep + rest).reshape(d ** len(keep), -1)
    return m @ m.conj().T


def verify_ame(c: AmeCandidate, tol: float = 1e-10) -> CheckReport:
    """All reductions to ``k <= floor(n/2)`` parties equal ``I / d^k``."""
    n, d = c.parties, c.local_dim
    if d ** n > MAX_SIDE:
        raise ValueError(f"state dimension {d}^{n} exceeds the size cap {MAX_SIDE}")
    worst, witness = -1.0, None
    for k in range(1, n // 2 + 1):
        for subset in itertools.combinations(range(n), k):
            red = _reduced(c.state, n, d, subset)
            r = float(np.max(np.abs(red - np.eye(d ** k) / d ** k)))
            if r > worst:
                worst, witness = r, subset
    return CheckReport.from_residual(worst, tol, [witness])


def ame4_from_two_unitary(u, d: int, tol: float = 1e-8) -> AmeCandidate:
    """Four-party state with amplitudes ``U[(ij), (kl)] / d``."""
    report = verify_two_unitary(u, d, tol)
    if not report.passed:
        raise ValueError(f"matrix is not 2-unitary (residual {report.max_residual:.3e})")
    return AmeCandidate(4, d, _check_side(u, d).reshape(-1) / d)


def linear_entropy(psi: np.ndarray, d: int) -> np.ndarray:
    """``1 - Tr rho_A^2`` for a batch of pure states on C^d (x) C^d (rows of ``psi``)."""
    m = psi.reshape(-1, d, d)
    red = m @ np.conj(np.transpose(m, (0, 2, 1)))
    return 1 - np.real(np.einsum("kij,kji->k", red, red))


_MC_CHUNK = 4096


def _mc_chunk(u, d, seed, index, size):
    rng = np.random.default_rng([seed, index])
    za = rng.standard_normal((size, d)) + 1j * rng.standard_normal((size, d))
    zb = rng.standard_normal((size, d)) + 1j * rng.standard_normal((size, d))
    za /= np.linalg.norm(za, axis=1, keepdims=True)
    zb /= np.linalg.norm(zb, axis=1, keepdims=True)
    prod = np.einsum("ki,kj->kij", za, zb).reshape(size, d * d)
    return linear_entropy(prod @ u.T, d)


def entangling_power_mc(u, d: int, samples: int, seed: int, workers: int = 1):
    """Monte-Carlo entangling power: mean linear entropy of ``U |a>|b>`` over Haar ``a, b``.

    Samples are drawn in fixed chunks of 4096, chunk ``c`` seeded with
    ``(seed, c)``, so the estimate is bit-identical for any ``workers``.

    Returns
    -------
    estimate, stderr : float
        Sample mean and sample standard deviation / sqrt(samples).
    """
    u = _check_side(u, d)
    if unitarity_defect(u)[0] > 1e-10:
        raise ValueError("entangling power needs a unitary matrix")
    if samples < 2:
        raise ValueError("need at least two samples")
    sizes = [min(_MC_CHUNK, samples - lo) for lo in range(0, samples, _MC_CHUNK)]
    jobs = list(enumerate(sizes))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: _mc_chunk(u, d, seed, *job), jobs))
    else:
        parts = [_mc_chunk(u, d, seed, *job) for job in jobs]
    e = np.concatenate(parts)
    return float(e.mean()), float(e.std(ddof=1) / np.sqrt(samples))
