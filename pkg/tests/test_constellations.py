import cmath
import itertools

import numpy as np
import pytest

from qconstell import constellations as cs
from qconstell.linalg import haar_state, haar_unitary


def _bloch(v):
    # Bloch vector of a qubit state, computed from the Pauli matrices directly
    sx = np.array([[0, 1], [1, 0]])
    sy = np.array([[0, -1j], [1j, 0]])
    sz = np.diag([1, -1])
    return np.real([v.conj() @ s @ v for s in (sx, sy, sz)])


def _hesse_vectors():
    # Standard list of the nine Hesse SIC vectors, (0, 1, -w^k) and cyclic shifts
    w = cmath.exp(2j * cmath.pi / 3)
    out = []
    for k in range(3):
        base = [0, 1, -(w ** k)]
        for s in range(3):
            out.append(np.roll(base, s))
    return np.array(out, dtype=complex) / np.sqrt(2)


def _complex_fd(fun, z, h=1e-6):
    g = np.zeros_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e.flat[i] = h
        dre = (fun(z + e) - fun(z - e)) / (2 * h)
        dim = (fun(z + 1j * e) - fun(z - 1j * e)) / (2 * h)
        g.flat[i] = dre + 1j * dim
    return g


def test_displacements_are_unitary_and_commute_up_to_phase():
    n = 4
    for p, q in itertools.product(range(n), repeat=2):
        d = cs.wh_displacement(n, p, q)
        assert np.allclose(d.conj().T @ d, np.eye(n), atol=1e-13)
    x, z = cs.shift_clock(n)
    w = np.exp(2j * np.pi / n)
    assert np.allclose(z @ x, w * x @ z, atol=1e-13)


def test_tetrahedron_has_regular_bloch_tetrahedron():
    orbit = cs.sic_orbit(cs.tetrahedron_fiducial())
    b = np.array([_bloch(v) for v in orbit])
    assert np.allclose(np.linalg.norm(b, axis=1), 1.0, atol=1e-13)
    dots = b @ b.T
    off = dots[~np.eye(4, dtype=bool)]
    assert np.allclose(off, -1 / 3, atol=1e-13)
    assert cs.verify_sic(orbit, 1e-10).passed


def test_hesse_orbit_matches_reference_list():
    orbit = cs.sic_orbit(cs.hesse_fiducial())
    ref = _hesse_vectors()
    # every orbit vector equals some reference vector up to phase
    overlaps = np.abs(orbit.conj() @ ref.T)
    assert np.allclose(np.sort(overlaps.max(axis=1)), 1.0, atol=1e-13)
    assert np.allclose(np.abs(ref.conj() @ ref.T) ** 2, (3 * np.eye(9) + 1) / 4, atol=1e-13)
    assert cs.verify_sic(orbit, 1e-10).passed


def test_verify_sic_rejects_wrong_count():
    with pytest.raises(ValueError):
        cs.verify_sic(np.eye(3, dtype=complex))


def test_perturbation_detected_with_witness():
    orbit = cs.sic_orbit(cs.hesse_fiducial()).copy()
    orbit[4] += 1e-4 * np.array([1, 1j, 0]) / np.sqrt(2)
    rep = cs.verify_sic(orbit, 1e-10)
    assert not rep.passed
    assert 1e-5 <= rep.max_residual <= 1e-3
    assert 4 in rep.witness[0]


@pytest.mark.parametrize("n", [2, 3, 4])
def test_residual_gradient_matches_finite_differences(rng, n):
    f = haar_state(n, rng)
    g = cs.sic_residual_grad(f)
    assert np.allclose(g, _complex_fd(cs.sic_residual, f), atol=1e-7)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_residual_orbit_covariance(rng, n):
    f = haar_state(n, rng)
    base = cs.sic_residual(f)
    for p, q in itertools.product(range(n), repeat=2):
        assert abs(cs.sic_residual(cs.wh_displacement(n, p, q) @ f) - base) < 1e-12


@pytest.mark.parametrize("scale", [0.0, 1e-7, 1e-5, 1e-3, 1.0])
def test_residual_brackets_verifier_residual(rng, scale):
    for fid in (cs.tetrahedron_fiducial(), cs.hesse_fiducial()):
        n = fid.size
        f = fid + scale * haar_state(n, rng)
        f /= np.linalg.norm(f)
        r = cs.verify_sic(cs.sic_orbit(f), 1.0).max_residual
        s = cs.sic_residual(f)
        assert r * r - 1e-28 <= s <= (n * n - 1) * r * r + 1e-28
        # pass at tol t whenever the residual sum is below t^2
        t = 10 * np.sqrt(s) + 1e-15
        assert cs.verify_sic(cs.sic_orbit(f), t).passed


def test_global_unitary_leaves_residuals_unchanged(rng):
    orbit = cs.sic_orbit(cs.hesse_fiducial()) + 1e-6
    w = haar_unitary(3, rng)
    r0 = cs.verify_sic(orbit).max_residual
    r1 = cs.verify_sic(orbit @ w.T).max_residual
    assert abs(r0 - r1) < 1e-12
    bases = cs.mub_prime(5)
    bases[2] = bases[2] + 1e-6
    m0 = cs.verify_mub(bases).max_residual
    m1 = cs.verify_mub([w5 @ b for w5 in [haar_unitary(5, rng)] for b in bases]).max_residual
    assert abs(m0 - m1) < 1e-12


def _gauss_inner(p, m1, j1, m2, j2):
    # <b_{m1,j1}|b_{m2,j2}> from the quadratic-phase formula, computed with cmath
    s = sum(cmath.exp(2j * cmath.pi * ((m2 - m1) * k * k + (j2 - j1) * k) / p) for k in range(p))
    return s / p


@pytest.mark.parametrize("p", [2, 3, 5, 7])
def test_mub_prime_complete_and_unbiased(p):
    bases = cs.mub_prime(p)
    assert len(bases) == p + 1
    assert cs.verify_mub(bases, 1e-10).passed
    for a, b in itertools.combinations(bases, 2):
        assert cs.verify_complex_hadamard(cs.hadamard_from_bases(a, b), 1e-10).passed


@pytest.mark.parametrize("p", [3, 5, 7])
def test_mub_prime_matches_gauss_sums(p):
    bases = cs.mub_prime(p)
    for m1, m2 in itertools.combinations(range(p), 2):
        for j1, j2 in [(0, 0), (1, p - 1), (2, 1)]:
            got = bases[m1 + 1][:, j1].conj() @ bases[m2 + 1][:, j2]
            assert abs(got - _gauss_inner(p, m1, j1, m2, j2)) < 1e-12
            assert abs(abs(got) ** 2 - 1 / p) < 1e-12


@pytest.mark.parametrize("bad", [1, 4, 6, 9, 101, 2.0])
def test_mub_prime_rejects(bad):
    with pytest.raises(ValueError):
        cs.mub_prime(bad)


def test_fourier_is_hadamard():
    for n in range(2, 9):
        assert cs.verify_complex_hadamard(cs.fourier_matrix(n), 1e-12).passed
    rep = cs.verify_complex_hadamard(np.eye(3))
    assert not rep.passed and rep.components["modulus"] > 0.5


@pytest.mark.parametrize("n", [2, 3, 4])
def test_too_many_random_bases_fail(rng, n):
    for _ in range(20):
        bases = [haar_unitary(n, rng) for _ in range(n + 2)]
        assert not cs.verify_mub(bases, 0.99 / (2 * n)).passed


def test_mub_gradient_matches_finite_differences(rng):
    n = 3
    us = [haar_unitary(n, rng) for _ in range(2)]
    grads = cs.mub_objective_grad(us, n)
    for k in range(2):
        def f(x, k=k):
            v = list(us)
            v[k] = x
            return cs.mub_objective(v, n)
        assert np.allclose(grads[k], _complex_fd(f, us[k]), atol=1e-7)


def test_sic_search_small():
    cert = cs.sic_search(2, restarts=5, seed=1)
    assert cert.extra["verdict"] == "sic-found"
    assert cert.extra["report"]["max_residual"] <= 1e-8
    again = cs.sic_search(2, restarts=5, seed=1)
    assert again.best_value == cert.best_value


def test_mub_search_qubit():
    cert = cs.mub_search(2, 3, restarts=3, seed=0)
    assert cert.extra["residual"] <= 1e-10
    # no fourth basis in dimension two
    stalled = cs.mub_search(2, 4, restarts=3, seed=0, max_iters=500)
    assert stalled.extra["residual"] > 0.1
