import itertools

import numpy as np
import pytest

from qconstell import combinatorics as cb
from qconstell.linalg import haar_unitary, partial_transpose, reshuffle


CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def _swap(d):
    s = np.zeros((d * d, d * d))
    for i, j in itertools.product(range(d), repeat=2):
        s[j * d + i, i * d + j] = 1
    return s


def _operator_entropy(x, d):
    # linear entropy of the normalized operator-Schmidt spectrum
    lam = np.linalg.svd(reshuffle(x, d), compute_uv=False) ** 2 / d ** 2
    return 1 - np.sum(lam ** 2)


def _zanardi(u, d):
    # closed form of the Haar-averaged linear entropy of U|a>|b>
    s = _swap(d)
    return (d / (d + 1)) ** 2 * (_operator_entropy(u, d) + _operator_entropy(u @ s, d) - _operator_entropy(s, d))


def _qubit_quadrature(u, m=10):
    # Gauss-Legendre in cos(theta) times uniform phi on both Bloch spheres
    x, w = np.polynomial.legendre.leggauss(m)
    phis = 2 * np.pi * np.arange(m) / m
    states, weights = [], []
    for c, wc in zip(x, w):
        for phi in phis:
            th = np.arccos(c)
            states.append(np.array([np.cos(th / 2), np.exp(1j * phi) * np.sin(th / 2)]))
            weights.append(wc / 2 / m)
    states, weights = np.array(states), np.array(weights)
    total = 0.0
    for a, wa in zip(states, weights):
        prod = np.einsum("i,kj->kij", a, states).reshape(-1, 4)
        total += wa * np.sum(weights * cb.linear_entropy(prod @ u.T, 2))
    return total


def test_graeco_latin_orders():
    for n in (3, 5, 7, 9):
        a, b = cb.graeco_latin(n)
        assert cb.verify_graeco_latin(a, b).passed
    with pytest.raises(cb.NoSolutionError, match="six"):
        cb.graeco_latin(6)
    with pytest.raises(ValueError):
        cb.graeco_latin(4)


def test_card_square():
    rep = cb.verify_graeco_latin(cb.CARD_RANKS, cb.CARD_SUITS)
    assert rep.passed and rep.max_residual == 0


def test_latin_witness():
    sq = np.array([[0, 1, 2], [1, 2, 0], [1, 0, 2]])
    rep = cb.verify_latin(sq)
    assert not rep.passed
    assert rep.witness[0][0] == 1  # first clash is in a column
    with pytest.raises(ValueError):
        cb.verify_latin([[0, 3], [1, 0]])


def test_non_orthogonal_pair_fails():
    a, _ = cb.graeco_latin(3)
    rep = cb.verify_graeco_latin(a, a)
    assert not rep.passed and rep.components["repeated_pairs"] == 6


@pytest.mark.parametrize("n", [3, 5])
def test_classical_embedding_chain(n):
    a, b = cb.graeco_latin(n)
    assert cb.verify_quantum_latin(cb.basis_table(a), 1e-12).passed
    assert cb.verify_oqls(cb.product_table(a, b), 1e-12).passed
    u = cb.permutation_unitary(a, b)
    assert cb.verify_two_unitary(u, n, 1e-12).passed
    assert cb.verify_perfect_tensor(cb.tensor_from_unitary(u, n), 1e-12).passed


def test_oqls_fails_for_non_orthogonal_pair():
    a, _ = cb.graeco_latin(3)
    rep = cb.verify_oqls(cb.product_table(a, a), 1e-12)
    assert not rep.passed


def test_ame43_reductions_are_maximally_mixed():
    a, b = cb.graeco_latin(3)
    c = cb.ame4_from_two_unitary(cb.permutation_unitary(a, b), 3)
    rep = cb.verify_ame(c, 1e-10)
    assert rep.passed
    # independent oracle: two-party marginals via explicit reshaping
    t = c.state.reshape(3, 3, 3, 3)
    for keep in itertools.combinations(range(4), 2):
        rest = [k for k in range(4) if k not in keep]
        m = np.transpose(t, list(keep) + rest).reshape(9, 9)
        assert np.allclose(m @ m.conj().T, np.eye(9) / 9, atol=1e-12)


def _equivalence(u, d):
    a = cb.verify_two_unitary(u, d, 1e-8).passed
    b = cb.verify_perfect_tensor(cb.tensor_from_unitary(u, d), 1e-8).passed
    if a:
        c = cb.verify_ame(cb.ame4_from_two_unitary(u, d), 1e-8).passed
    else:
        amps = u.reshape(-1) / d
        c = cb.verify_ame(cb.AmeCandidate(4, d, amps / np.linalg.norm(amps)), 1e-8).passed
    return a, b, c


def test_equivalence_chain_at_d3(rng):
    a, b = cb.graeco_latin(3)
    good = cb.permutation_unitary(a, b)
    assert _equivalence(good, 3) == (True, True, True)
    bad = cb.permutation_unitary(a, a.T)
    assert _equivalence(bad, 3) == (False, False, False)
    assert _equivalence(haar_unitary(9, rng), 3) == (False, False, False)
    w = [haar_unitary(3, rng) for _ in range(4)]
    dressed = np.kron(w[0], w[1]) @ good @ np.kron(w[2], w[3])
    assert _equivalence(dressed, 3) == (True, True, True)
    with pytest.raises(ValueError):
        cb.ame4_from_two_unitary(bad, 3)


@pytest.mark.parametrize("d", [2, 3])
def test_local_unitary_invariance_of_spectral_defects(rng, d):
    u = haar_unitary(d * d, rng)
    w = [haar_unitary(d, rng) for _ in range(4)]
    v = np.kron(w[0], w[1]) @ u @ np.kron(w[2], w[3])

    def defects(x):
        out = []
        for y in (x, partial_transpose(x, d, d), reshuffle(x, d)):
            e = y.conj().T @ y - np.eye(d * d)
            out.append(np.linalg.norm(e, 2))
        return np.array(out)

    assert np.allclose(defects(u), defects(v), atol=1e-10)
    # the objective uses Frobenius norms and is invariant as well
    assert abs(cb.two_unitary_objective(u, d) - cb.two_unitary_objective(v, d)) < 1e-10


def test_two_unitary_gradient_matches_finite_differences(rng):
    d = 2
    u = haar_unitary(4, rng)
    g = cb.two_unitary_objective_grad(u, d)
    h = 1e-6
    for idx in [(0, 0), (1, 3), (2, 1), (3, 2)]:
        e = np.zeros((4, 4), dtype=complex)
        e[idx] = h
        dre = (cb.two_unitary_objective(u + e, d) - cb.two_unitary_objective(u - e, d)) / (2 * h)
        dim = (cb.two_unitary_objective(u + 1j * e, d) - cb.two_unitary_objective(u - 1j * e, d)) / (2 * h)
        assert abs(g[idx] - (dre + 1j * dim)) < 1e-7


def test_two_unitary_search_d3_finds_solution():
    cert = cb.two_unitary_search(3, restarts=5, seed=0, max_iters=1500)
    assert cert.extra["residual"] <= 1e-8


def test_cnot_entangling_power_quadrature():
    exact = _qubit_quadrature(CNOT)
    assert abs(exact - 2 / 9) < 1e-12
    assert abs(_zanardi(CNOT, 2) - 2 / 9) < 1e-12
    est, err = cb.entangling_power_mc(CNOT, 2, 40_000, seed=3)
    assert abs(est - 2 / 9) < 4 * err


@pytest.mark.parametrize("d", [2, 3])
def test_entangling_power_matches_closed_form(rng, d):
    u = haar_unitary(d * d, rng)
    est, err = cb.entangling_power_mc(u, d, 20_000, seed=11)
    assert abs(est - _zanardi(u, d)) < 4 * err


def test_two_unitary_maximizes_entangling_power(rng):
    a, b = cb.graeco_latin(3)
    good = cb.permutation_unitary(a, b)
    assert abs(_zanardi(good, 3) - 0.5) < 1e-12
    e_good, s_good = cb.entangling_power_mc(good, 3, 20_000, seed=0)
    for _ in range(5):
        perm = rng.permutation(9)
        p = np.eye(9)[perm]
        if cb.verify_two_unitary(p, 3, 1e-8).passed:
            continue
        e, s = cb.entangling_power_mc(p, 3, 20_000, seed=1)
        assert e_good - e > 3 * np.hypot(s_good, s)


def test_entangling_power_deterministic():
    a = cb.entangling_power_mc(CNOT, 2, 10_000, seed=5)
    b = cb.entangling_power_mc(CNOT, 2, 10_000, seed=5, workers=3)
    assert a == b


def test_entangling_power_input_checks():
    with pytest.raises(ValueError):
        cb.entangling_power_mc(2 * CNOT, 2, 100, seed=0)
    with pytest.raises(ValueError):
        cb.entangling_power_mc(CNOT, 2, 1, seed=0)
