"""
Werner states, partial-transpose classification, n-copy distillability and
the Kronecker-sum singular-value bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .codec import encode_array
from .linalg import (
    CheckReport,
    DensityMatrix,
    as_matrix,
    haar_unitary,
    hermitian_eig,
    hermitian_eigvals,
    kron,
    max_entangled_state,
    partial_transpose,
    permute_subsystems,
)
from .search import Product, SearchConfig, Sphere, Unitary, minimize

ONE_COPY_THRESHOLD = -0.5
KS_BOUND = 0.5


def swap_operator(d: int) -> np.ndarray:
    """``<ij|V|kl> = delta_il delta_jk``."""
    if d < 2:
        raise ValueError("dimension must be at least 2")
    v = np.zeros((d * d, d * d), dtype=np.complex128)
    for i in range(d):
        for j in range(d):
            v[j * d + i, i * d + j] = 1
    return v


@dataclass(frozen=True)
class WernerState:
    d: int
    alpha: float
    rho: DensityMatrix

    @property
    def matrix(self) -> np.ndarray:
        return self.rho.matrix


def werner(d: int, alpha: float) -> WernerState:
    """``(I + alpha V) / (d^2 + alpha d)`` for ``alpha`` in ``[-1, 1]``."""
    alpha = float(alpha)
    if not -1 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [-1, 1], got {alpha}")
    m = (np.eye(d * d) + alpha * swap_operator(d)) / (d * d + alpha * d)
    return WernerState(int(d), alpha, DensityMatrix((d, d), m))


def werner_pt_spectrum(d: int, alpha: float):
    """Closed-form spectrum of the partially transposed Werner state.

    ``V^Gamma = d |psi+><psi+|``, so the spectrum is ``(1 + alpha d)/(d^2 + alpha d)``
    once and ``1/(d^2 + alpha d)`` with multiplicity ``d^2 - 1``.

    Returns
    -------
    lambda_min : float
    multiplicities : list of (eigenvalue, multiplicity), ascending
    """
    if not -1 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [-1, 1], got {alpha}")
    norm = d * d + alpha * d
    pairs = sorted([((1 + alpha * d) / norm, 1), (1 / norm, d * d - 1)])
    return pairs[0][0], pairs


def expand_spectrum(pairs) -> np.ndarray:
    return np.sort(np.concatenate([np.full(m, v) for v, m in pairs]))


def classify_werner(d: int, alpha: float) -> frozenset:
    """Label a Werner state by its partial transpose and one-copy distillability.

    NPT iff ``alpha < -1/d``. The compressed one-copy block is
    ``(I + alpha d |phi><phi|)/(d^2 + alpha d)`` with ``|phi|^2 <= 2/d``, so the
    state is 1-copy distillable iff ``alpha < -1/2`` in every dimension. NPT
    states that are not 1-copy distillable get ``distillability-open``.
    """
    if not -1 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [-1, 1], got {alpha}")
    if alpha >= -1 / d:
        return frozenset({"PPT", "separable-range"})
    if alpha < ONE_COPY_THRESHOLD:
        return frozenset({"NPT", "1-copy-distillable"})
    return frozenset({"NPT", "1-copy-nondistillable", "distillability-open"})


def dichotomic_check(rho, d: int | None = None, tol: float = 1e-10) -> CheckReport:
    """Is ``rho^Gamma`` proportional to a unitary (all eigenvalue moduli equal)?"""
    m = rho.matrix if hasattr(rho, "matrix") else as_matrix(rho, square=True)
    if d is None:
        d = int(round(np.sqrt(m.shape[0])))
    pt = partial_transpose(m, d, d)
    mods = np.abs(hermitian_eigvals(pt))
    spread = float(mods.max() - mods.min())
    g = pt @ pt.conj().T
    c = np.trace(g).real / g.shape[0]
    dev = np.abs(g - c * np.eye(g.shape[0]))
    idx = np.unravel_index(int(np.argmax(dev)), dev.shape)
    worst = max(spread, float(dev[idx]))
    return CheckReport.from_residual(worst, tol, [idx],
                                     {"modulus_spread": spread, "gram_defect": float(dev[idx]),
                                      "modulus": float(mods.mean())})


# --------------------------------------------------------------------------
# n-copy distillability
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DistillProbe:
    """Orthonormal row pairs spanning the rank-2 projectors on both sides."""

    d: int
    n: int
    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        side = self.d ** self.n
        for name in ("p", "q"):
            m = np.asarray(getattr(self, name), dtype=np.complex128)
            if m.shape != (2, side):
                raise ValueError(f"probe {name} must have shape (2, {side}), got {m.shape}")
            if np.max(np.abs(m @ m.conj().T - np.eye(2))) > 1e-10:
                raise ValueError(f"probe {name} rows are not orthonormal")
            object.__setattr__(self, name, m)

    @classmethod
    def from_raw(cls, d: int, n: int, p_raw, q_raw):
        return cls(d, n, gram_schmidt(p_raw), gram_schmidt(q_raw))


def gram_schmidt(rows) -> np.ndarray:
    """Orthonormalize rows in order (classical Gram-Schmidt, applied twice)."""
    out = []
    for r in np.asarray(rows, dtype=np.complex128):
        v = r.copy()
        for _ in range(2):
            for u in out:
                v = v - (u.conj() @ v) * u
        nv = np.linalg.norm(v)
        if nv < 1e-12:
            raise ValueError("probe rows are linearly dependent")
        out.append(v / nv)
    return np.array(out)


def regroup_perm(n: int) -> list:
    """Factor order taking ``A1 B1 ... An Bn`` to ``A1..An B1..Bn``."""
    return [2 * k for k in range(n)] + [2 * k + 1 for k in range(n)]


def pt_power(rho, d: int, n: int) -> np.ndarray:
    """``Pi (rho^Gamma)^{(x) n} Pi^dagger`` regrouped as (A1..An)(B1..Bn)."""
    m = rho.matrix if hasattr(rho, "matrix") else as_matrix(rho, square=True)
    pt = partial_transpose(m, d, d)
    x = pt
    for _ in range(n - 1):
        x = kron(x, pt)
    if n == 1:
        return x
    return permute_subsystems(x, [d] * (2 * n), regroup_perm(n))


def _check_probe(rho, n, probe):
    m = rho.matrix if hasattr(rho, "matrix") else as_matrix(rho, square=True)
    d = int(round(np.sqrt(m.shape[0])))
    if d * d != m.shape[0] or probe.d != d or probe.n != n:
        raise ValueError(f"probe (d={probe.d}, n={probe.n}) does not match state (d={d}, n={n})")
    return d


def compressed_matrix(x: np.ndarray, probe: DistillProbe) -> np.ndarray:
    k = np.kron(probe.p, probe.q)
    return k.conj() @ x @ k.T


def distill_value(rho, n: int, probe: DistillProbe, *, full: bool = False) -> float:
    """Minimum eigenvalue of ``(P (x) Q) (rho^Gamma)^{(x) n} (P (x) Q)`` on its support.

    The default route diagonalizes the 4x4 compression
    ``M[(a,b),(c,e)] = <p_a q_b| X |p_c q_e>``. ``full=True`` instead forms the
    projected ``d^(2n)``-sided matrix and takes the smallest eigenvalue of its
    restriction to the range of ``P (x) Q`` (slow oracle).
    """
    d = _check_probe(rho, n, probe)
    x = pt_power(rho, d, n)
    if not full:
        return float(hermitian_eigvals(compressed_matrix(x, probe))[0])
    return float(full_projected_spectrum(x, probe)[0])


def full_projected_spectrum(x: np.ndarray, probe: DistillProbe) -> np.ndarray:
    """Eigenvalues of ``Pi X Pi`` whose eigenvectors lie in the range of ``Pi = P (x) Q``."""
    pp = probe.p.T @ probe.p.conj()
    qq = probe.q.T @ probe.q.conj()
    proj = np.kron(pp, qq)
    w, v = hermitian_eig(proj @ x @ proj)
    weight = np.real(np.einsum("ij,ij->j", v.conj(), proj @ v))
    # The range is 4-dimensional; pick the eigenvectors that live in it.
    keep = np.sort(np.argsort(-weight)[:4])
    return np.sort(w[keep])


def _probe_from_point(point, d, n):
    side = d ** n
    rows = [z[:side] + 1j * z[side:] for z in point]
    return DistillProbe.from_raw(d, n, rows[:2], rows[2:])


def search_distillable(rho, n: int, budget: int, seed: int = 0, *, max_iters: int = 500,
                       tol_eig: float | None = None, workers: int = 1):
    """Minimize :func:`distill_value` over probes (``budget`` restarts).

    Each probe row is a point on the unit sphere in C^(d^n); rows are
    orthonormalized by Gram-Schmidt in a fixed order. The verdict is
    ``distillable-witness-found`` when the best value is below ``-10 tol_eig``
    (``tol_eig = 1e-12 ||X||``), ``inconclusive`` when negative but above that,
    and otherwise ``no-witness`` for one copy or ``open`` for two.
    """
    if budget < 1:
        raise ValueError("budget must be at least one restart")
    m = rho.matrix if hasattr(rho, "matrix") else as_matrix(rho, square=True)
    d = int(round(np.sqrt(m.shape[0])))
    if n not in (1, 2) or d > 4:
        raise ValueError("distillability search supports n in {1, 2} and d <= 4")
    x = pt_power(m, d, n)
    if tol_eig is None:
        tol_eig = 1e-12 * float(np.linalg.norm(x, 2))
    side = d ** n

    def objective(point):
        try:
            probe = _probe_from_point(point, d, n)
        except ValueError:
            return float("inf")
        return float(np.linalg.eigvalsh(compressed_matrix(x, probe))[0])

    params = {"dim": d, "copies": n}
    if isinstance(rho, WernerState):
        params["alpha"] = rho.alpha
    else:
        params["rho"] = encode_array(m)
    cert = minimize(
        objective,
        Product(*[Sphere(2 * side) for _ in range(4)]),
        SearchConfig(restarts=budget, max_iters=max_iters, seed=seed, workers=workers),
        problem="distill",
        params=params,
        tolerances={"tol_eig": tol_eig, "witness_threshold": -10 * tol_eig},
    )
    best = cert.best_value
    if best < -10 * tol_eig:
        verdict = "distillable-witness-found"
    elif best < 0:
        verdict = "inconclusive"
    else:
        verdict = "no-witness" if n == 1 else "open"
    if n == 2 and verdict != "distillable-witness-found":
        verdict = "open"
    cert.extra["verdict"] = verdict
    if cert.best_raw is not None:
        probe = _probe_from_point(cert.best_raw, d, n)
        cert.extra["probe"] = {"P": encode_array(probe.p), "Q": encode_array(probe.q)}
    return cert


# --------------------------------------------------------------------------
# Kronecker sums
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class KsInstance:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.a, square=True)
        b = as_matrix(self.b, square=True)
        if a.shape != (4, 4) or b.shape != (4, 4):
            raise ValueError("Kronecker-sum instances use 4x4 matrices")
        if abs(np.trace(a)) > 1e-10 or abs(np.trace(b)) > 1e-10:
            raise ValueError("A and B must be traceless")
        if abs(np.vdot(a, a).real + np.vdot(b, b).real - 0.25) > 1e-10:
            raise ValueError("Tr(A^dagger A) + Tr(B^dagger B) must equal 1/4")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def project(cls, a, b):
        """Remove traces, then rescale so the Frobenius norms squared sum to 1/4."""
        a = as_matrix(a, square=True)
        b = as_matrix(b, square=True)
        a = a - np.trace(a) / a.shape[0] * np.eye(a.shape[0])
        b = b - np.trace(b) / b.shape[0] * np.eye(b.shape[0])
        s = np.sqrt(np.vdot(a, a).real + np.vdot(b, b).real)
        if s == 0:
            raise ValueError("cannot normalize a zero pair")
        return cls(a / (2 * s), b / (2 * s))


def kronecker_sum(a, b) -> np.ndarray:
    """``A (x) I + I (x) B``."""
    a = as_matrix(a, square=True)
    b = as_matrix(b, square=True)
    return kron(a, np.eye(b.shape[0])) + kron(np.eye(a.shape[0]), b)


def ks_objective(inst: KsInstance) -> float:
    """Sum of squares of the two largest singular values of ``A (+) B``."""
    s = np.linalg.svd(kronecker_sum(inst.a, inst.b), compute_uv=False)
    return float(s[0] ** 2 + s[1] ** 2)


@lru_cache(maxsize=1)
def _traceless_basis() -> np.ndarray:
    """Orthonormal real basis (30 x 4 x 4 complex) of traceless 4x4 complex matrices."""
    mats = []
    for i in range(4):
        for j in range(4):
            if i != j:
                for ph in (1, 1j):
                    e = np.zeros((4, 4), dtype=np.complex128)
                    e[i, j] = ph
                    mats.append(e)
    diag = np.array([[1, -1, 0, 0], [1, 1, -2, 0], [1, 1, 1, -3]], dtype=float)
    diag /= np.linalg.norm(diag, axis=1, keepdims=True)
    for row in diag:
        for ph in (1, 1j):
            mats.append(np.diag(row * ph))
    return np.array(mats)


def _pair_from_sphere(x: np.ndarray):
    basis = _traceless_basis()
    a = np.tensordot(x[:30], basis, axes=1) / 2
    b = np.tensordot(x[30:], basis, axes=1) / 2
    return a, b


def _ks_value_grad(a, b):
    s = kronecker_sum(a, b)
    u, sv, vh = np.linalg.svd(s)
    val = sv[0] ** 2 + sv[1] ** 2
    g = 2 * sv[0] * np.outer(u[:, 0], vh[0]) + 2 * sv[1] * np.outer(u[:, 1], vh[1])
    g4 = g.reshape(4, 4, 4, 4)
    ga = np.einsum("abcb->ac", g4)
    gb = np.einsum("abae->be", g4)
    return float(val), ga, gb


def _normal_from(w, evals):
    return (w * evals) @ w.conj().T


def _evals_from_sphere(x, count):
    # traceless complex 4-vectors: orthonormal basis of sum-zero subspace of R^4
    basis = np.array([[1, -1, 0, 0], [1, 1, -2, 0], [1, 1, 1, -3]], dtype=float)
    basis /= np.linalg.norm(basis, axis=1, keepdims=True)
    out = []
    for k in range(count):
        c = x[6 * k:6 * k + 3] + 1j * x[6 * k + 3:6 * k + 6]
        out.append(c @ basis / 2)
    return out


KS_MODES = ("general", "normal", "one-normal")


def ks_search_violation(budget: int, seed: int = 0, *, mode: str = "general", max_iters: int = 300,
                        workers: int = 1):
    """Maximize ``sigma_1^2 + sigma_2^2`` of ``A (+) B`` over the constraint set.

    ``mode`` restricts the family: ``general`` (both arbitrary), ``normal``
    (both normal) or ``one-normal`` (A normal, B arbitrary). The verdict is
    ``violation`` above ``1/2 + 1e-8``; otherwise ``open`` for the general
    family and ``no-violation-found`` for the restricted ones.
    """
    if budget < 1:
        raise ValueError("budget must be at least one restart")
    if mode not in KS_MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {KS_MODES}")
    basis = _traceless_basis()

    if mode == "general":
        manifold = Sphere(60)

        def pair(x):
            return _pair_from_sphere(x)

        def objective(x):
            return -_ks_value_grad(*pair(x))[0]

        def gradient(x):
            _, ga, gb = _ks_value_grad(*pair(x))
            # d/dx of Re<grad, basis_k / 2>
            gx = np.concatenate([np.real(np.einsum("kij,ij->k", basis.conj(), ga)),
                                 np.real(np.einsum("kij,ij->k", basis.conj(), gb))]) / 2
            return -gx
    elif mode == "normal":
        manifold = Product(Unitary(4), Unitary(4), Sphere(12))
        gradient = None

        def pair(x):
            ea, eb = _evals_from_sphere(x[2], 2)
            return _normal_from(x[0], ea), _normal_from(x[1], eb)

        def objective(x):
            return -_ks_value_grad(*pair(x))[0]
    else:
        manifold = Product(Unitary(4), Sphere(36))
        gradient = None

        def pair(x):
            (ea,) = _evals_from_sphere(x[1][:6], 1)
            b = np.tensordot(x[1][6:], basis, axes=1) / 2
            return _normal_from(x[0], ea), b

        def objective(x):
            return -_ks_value_grad(*pair(x))[0]

    cert = minimize(
        objective,
        manifold,
        SearchConfig(restarts=budget, max_iters=max_iters, seed=seed, workers=workers),
        gradient=gradient,
        problem="ksum",
        params={"mode": mode},
        tolerances={"violation_margin": 1e-8},
    )
    best = -cert.best_value
    cert.extra["max_value"] = best
    if best > KS_BOUND + 1e-8:
        cert.extra["verdict"] = "violation"
    else:
        cert.extra["verdict"] = "open" if mode == "general" else "no-violation-found"
    if cert.best_raw is not None:
        a, b = pair(cert.best_raw)
        cert.extra["A"] = encode_array(a)
        cert.extra["B"] = encode_array(b)
    return cert


def random_normal_instance(rng: np.random.Generator) -> KsInstance:
    """Random pair of normal traceless matrices meeting the norm constraint."""
    ev = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
    ev -= ev.mean(axis=1, keepdims=True)
    ev /= 2 * np.linalg.norm(ev)
    a = _normal_from(haar_unitary(4, rng), ev[0])
    b = _normal_from(haar_unitary(4, rng), ev[1])
    a -= np.trace(a) / 4 * np.eye(4)
    b -= np.trace(b) / 4 * np.eye(4)
    return KsInstance(a, b)


def werner_probe_example(d: int = 4) -> DistillProbe:
    """``P = Q = span{|0>, |1>}`` for one copy."""
    e = np.eye(d, dtype=np.complex128)[:2]
    return DistillProbe(d, 1, e, e)


def max_entangled_projector(d: int) -> np.ndarray:
    psi = max_entangled_state(d)
    return np.outer(psi, psi.conj())
