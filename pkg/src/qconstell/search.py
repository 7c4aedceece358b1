"""
Seeded, restartable local optimization on spheres, unitary groups and
products of them.

Each restart ``r`` draws its starting point from a generator seeded with
``subseed(seed, r)``, so restarts are independent of execution order and may
run on a worker pool. The optimizer is Riemannian nonlinear conjugate
gradients (Polak-Ribiere+, restarted on loss of descent) with a backtracking
Armijo line search. Gradients are analytic when the caller supplies them and
central finite differences along an orthonormal tangent basis otherwise.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

import numpy as np

from .codec import encode_array
from .linalg import haar_unitary

_MASK64 = (1 << 64) - 1


def subseed(seed: int, restart: int) -> int:
    """splitmix64 mix of ``(seed, restart)`` into a 64-bit sub-seed."""
    z = (int(seed) * 0x9E3779B97F4A7C15 + int(restart) + 1) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


# --------------------------------------------------------------------------
# Manifolds
# --------------------------------------------------------------------------


class Sphere:
    """Unit sphere in R^k. Points and tangent vectors are real 1-d arrays."""

    def __init__(self, k: int):
        if k < 2:
            raise ValueError("sphere needs at least two ambient dimensions")
        self.k = int(k)
        self.dim = self.k - 1

    def describe(self):
        return {"kind": "unit-sphere", "k": self.k}

    def random(self, rng):
        x = rng.standard_normal(self.k)
        return x / np.linalg.norm(x)

    def proj(self, x, g):
        g = np.asarray(g, dtype=float)
        return g - x * (x @ g)

    def retract(self, x, v):
        y = x + v
        return y / np.linalg.norm(y)

    def inner(self, x, u, v):
        return float(u @ v)

    def lincomb(self, a, u, b, v):
        return a * u + b * v

    def zero(self, x):
        return np.zeros_like(x)

    def tangent_basis(self, x):
        m = np.eye(self.k)
        m[:, 0] = x
        q, _ = np.linalg.qr(m)
        return [q[:, j] for j in range(1, self.k)]

    def defect(self, x):
        return abs(float(np.linalg.norm(x)) - 1.0)

    def encode(self, x):
        return encode_array(x)


def _hermitian_basis(k: int):
    basis = []
    for j in range(k):
        e = np.zeros((k, k), dtype=np.complex128)
        e[j, j] = 1
        basis.append(e)
    s = 1 / math.sqrt(2)
    for j in range(k):
        for l in range(j + 1, k):
            e = np.zeros((k, k), dtype=np.complex128)
            e[j, l] = e[l, j] = s
            basis.append(e)
            e = np.zeros((k, k), dtype=np.complex128)
            e[j, l] = -1j * s
            e[l, j] = 1j * s
            basis.append(e)
    return basis


class Unitary:
    """Unitary group U(k). Tangent vectors at ``U`` are ambient ``U @ Omega``
    with ``Omega`` skew-Hermitian; the metric is ``Re tr(A^dagger B)``."""

    def __init__(self, k: int):
        self.k = int(k)
        self.dim = self.k * self.k
        self._herm = None

    def describe(self):
        return {"kind": "unitary", "k": self.k}

    def random(self, rng):
        return haar_unitary(self.k, rng)

    def proj(self, u, g):
        m = u.conj().T @ g
        return u @ ((m - m.conj().T) / 2)

    def retract(self, u, v):
        # Polar retraction keeps the iterate unitary to rounding error.
        w, _, vh = np.linalg.svd(u + v)
        return w @ vh

    def inner(self, x, a, b):
        return float(np.real(np.vdot(a, b)))

    def lincomb(self, a, u, b, v):
        return a * u + b * v

    def zero(self, x):
        return np.zeros_like(x)

    def tangent_basis(self, u):
        if self._herm is None:
            self._herm = _hermitian_basis(self.k)
        return [u @ (1j * e) for e in self._herm]

    def defect(self, u):
        return float(np.max(np.abs(u.conj().T @ u - np.eye(self.k))))

    def encode(self, u):
        return encode_array(u)


class Product:
    """Cartesian product; points and tangent vectors are tuples."""

    def __init__(self, *parts):
        self.parts = tuple(parts)
        self.dim = sum(p.dim for p in self.parts)

    def describe(self):
        return {"kind": "product", "parts": [p.describe() for p in self.parts]}

    def random(self, rng):
        return tuple(p.random(rng) for p in self.parts)

    def proj(self, x, g):
        return tuple(p.proj(xi, gi) for p, xi, gi in zip(self.parts, x, g))

    def retract(self, x, v):
        return tuple(p.retract(xi, vi) for p, xi, vi in zip(self.parts, x, v))

    def inner(self, x, u, v):
        return sum(p.inner(xi, ui, vi) for p, xi, ui, vi in zip(self.parts, x, u, v))

    def lincomb(self, a, u, b, v):
        return tuple(p.lincomb(a, ui, b, vi) for p, ui, vi in zip(self.parts, u, v))

    def zero(self, x):
        return tuple(p.zero(xi) for p, xi in zip(self.parts, x))

    def tangent_basis(self, x):
        out = []
        for j, (p, xj) in enumerate(zip(self.parts, x)):
            zeros = [q.zero(xi) for q, xi in zip(self.parts, x)]
            for b in p.tangent_basis(xj):
                vec = list(zeros)
                vec[j] = b
                out.append(tuple(vec))
        return out

    def defect(self, x):
        return max(p.defect(xi) for p, xi in zip(self.parts, x))

    def encode(self, x):
        return [p.encode(xi) for p, xi in zip(self.parts, x)]


def unitary_from_params(params, k: int) -> np.ndarray:
    """``exp(iH)`` for the Hermitian ``H`` built from ``k*k`` real parameters.

    Layout: the ``k`` diagonal entries, then ``(re, im)`` of each upper
    off-diagonal entry in row-major order.
    """
    params = np.asarray(params, dtype=float).reshape(-1)
    if params.size != k * k:
        raise ValueError(f"expected {k * k} parameters, got {params.size}")
    h = np.diag(params[:k]).astype(np.complex128)
    pos = k
    for j in range(k):
        for l in range(j + 1, k):
            h[j, l] = params[pos] + 1j * params[pos + 1]
            h[l, j] = np.conj(h[j, l])
            pos += 2
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * w)) @ v.conj().T


# --------------------------------------------------------------------------
# Certificates
# --------------------------------------------------------------------------


@dataclass
class SearchConfig:
    restarts: int = 10
    max_iters: int = 10_000
    seed: int = 0
    step0: float = 0.1
    shrink: float = 0.5
    armijo_c: float = 1e-4
    gtol: float = 1e-8
    fd_step: float = 1e-6
    target: Optional[float] = None
    workers: int = 1


@dataclass
class RestartResult:
    index: int
    subseed: int
    best_value: float
    point: object = None
    iterations: int = 0
    grad_norm: float = float("nan")
    stop: str = ""
    history: list = field(default_factory=list)


@dataclass
class SearchCertificate:
    problem: str
    params: dict
    seed: int
    restarts: int
    best_value: float
    best_restart: int
    best_point: object
    value_trace: list
    tolerances: dict
    manifold: dict
    config: dict
    wall_time: float
    aborted: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    histories: list = field(default_factory=list, repr=False)
    best_raw: object = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("histories", "best_raw")}
        d["best_value"] = _float_out(self.best_value)
        d["value_trace"] = [_float_out(v) for v in self.value_trace]
        return d


def _float_out(v):
    v = float(v)
    return v if math.isfinite(v) else None


# --------------------------------------------------------------------------
# Optimizer
# --------------------------------------------------------------------------


def _fd_gradient(objective, manifold, x, h):
    basis = manifold.tangent_basis(x)
    g = manifold.zero(x)
    for b in basis:
        fp = objective(manifold.retract(x, manifold.lincomb(h, b, 0.0, b)))
        fm = objective(manifold.retract(x, manifold.lincomb(-h, b, 0.0, b)))
        g = manifold.lincomb(1.0, g, (fp - fm) / (2 * h), b)
    return g


def _run_restart(objective, manifold, config: SearchConfig, gradient, r: int) -> RestartResult:
    s = subseed(config.seed, r)
    rng = np.random.default_rng(s)
    x = manifold.random(rng)
    res = RestartResult(index=r, subseed=s, best_value=float("inf"))

    def rgrad(point):
        if gradient is not None:
            return manifold.proj(point, gradient(point))
        return _fd_gradient(objective, manifold, point, config.fd_step)

    f = float(objective(x))
    if not math.isfinite(f):
        res.stop = "non-finite objective"
        return res
    res.history.append(f)
    g = rgrad(x)
    gg = manifold.inner(x, g, g)
    d = manifold.lincomb(-1.0, g, 0.0, g)
    t = config.step0
    it = 0
    force_steepest = False
    while True:
        res.grad_norm = math.sqrt(gg)
        if config.target is not None and f <= config.target:
            res.stop = "target reached"
            break
        if res.grad_norm <= config.gtol:
            res.stop = "gradient tolerance"
            break
        if it >= config.max_iters:
            res.stop = "iteration cap"
            break
        slope = manifold.inner(x, g, d)
        steepest = slope >= 0 or force_steepest
        if steepest:
            d = manifold.lincomb(-1.0, g, 0.0, g)
            slope = -gg
        force_steepest = False
        dn = math.sqrt(manifold.inner(x, d, d))
        step = min(2.0 * t, 1.0 / dn) if it else min(t, 1.0 / dn)
        accepted = False
        for _ in range(80):
            x_new = manifold.retract(x, manifold.lincomb(step, d, 0.0, d))
            f_new = float(objective(x_new))
            if not math.isfinite(f_new):
                res.stop = "non-finite objective"
                res.best_value, res.point, res.iterations = f, x, it
                return res
            if f_new <= f + config.armijo_c * step * slope:
                accepted = True
                break
            step *= config.shrink
        if not accepted:
            if not steepest:
                # CG direction failed; retry once along steepest descent.
                force_steepest = True
                continue
            res.stop = "line search stalled"
            break
        t = step
        g_new = rgrad(x_new)
        gg_new = manifold.inner(x_new, g_new, g_new)
        g_old = manifold.proj(x_new, g)
        d_old = manifold.proj(x_new, d)
        beta = max(0.0, (gg_new - manifold.inner(x_new, g_new, g_old)) / gg) if gg > 0 else 0.0
        d = manifold.lincomb(-1.0, g_new, beta, d_old)
        x, f, g, gg = x_new, f_new, g_new, gg_new
        res.history.append(f)
        it += 1
    res.best_value, res.point, res.iterations = f, x, it
    return res


def minimize(
    objective: Callable,
    manifold,
    config: SearchConfig,
    *,
    gradient: Optional[Callable] = None,
    problem: str = "custom",
    params: Optional[dict] = None,
    tolerances: Optional[dict] = None,
) -> SearchCertificate:
    """Multi-start local minimization of ``objective`` on ``manifold``.

    ``gradient``, when given, returns the Euclidean gradient in the ambient
    representation of the manifold (for complex entries, ``df/dRe + i df/dIm``).

    The run stops early once a restart reaches ``config.target``; the restarts
    executed are always a prefix ``0..R-1``, so replay is deterministic even
    with ``config.workers > 1``.
    """
    if config.restarts < 1:
        raise ValueError("need at least one restart")
    start = time.perf_counter()
    results: list = []

    def run(r):
        return _run_restart(objective, manifold, config, gradient, r)

    if config.workers <= 1:
        for r in range(config.restarts):
            results.append(run(r))
            if config.target is not None and results[-1].best_value <= config.target:
                break
    else:
        batch = config.workers
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            for lo in range(0, config.restarts, batch):
                chunk = list(pool.map(run, range(lo, min(lo + batch, config.restarts))))
                # Deterministic cut: keep restarts up to the first that hit the target.
                for res in chunk:
                    results.append(res)
                    if config.target is not None and res.best_value <= config.target:
                        break
                if config.target is not None and results[-1].best_value <= config.target:
                    break

    finite = [r for r in results if math.isfinite(r.best_value)]
    if finite:
        best = min(finite, key=lambda r: (r.best_value, r.index))
        best_value, best_index, best_point = best.best_value, best.index, manifold.encode(best.point)
    else:
        best_value, best_index, best_point = float("inf"), -1, None
    tol = {"gtol": config.gtol, "fd_step": config.fd_step}
    tol.update(tolerances or {})
    cert = SearchCertificate(
        problem=problem,
        params=dict(params or {}),
        seed=int(config.seed),
        restarts=len(results),
        best_value=best_value,
        best_restart=best_index,
        best_point=best_point,
        value_trace=[r.best_value for r in results],
        tolerances=tol,
        manifold=manifold.describe(),
        config=asdict(config),
        wall_time=time.perf_counter() - start,
        aborted=[{"restart": r.index, "reason": r.stop} for r in results if r.stop == "non-finite objective"],
        histories=[r.history for r in results],
        best_raw=best.point if finite else None,
    )
    cert.extra["stops"] = [r.stop for r in results]
    cert.extra["iterations"] = [r.iterations for r in results]
    return cert
