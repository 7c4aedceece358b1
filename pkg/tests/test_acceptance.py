"""Acceptance criteria, each at its stated tolerance. One PASS/FAIL line per criterion."""

import json
from pathlib import Path

import numpy as np
import pytest

from qconstell import cli
from qconstell import combinatorics as cb
from qconstell import constellations as cs
from qconstell import entanglement as en
from qconstell.linalg import hermitian_eigvals, partial_transpose

from conftest import random_density

CERT_DIR = Path(__file__).resolve().parents[1] / "certificates"

pytestmark = pytest.mark.slow


@pytest.mark.criterion(1)
def test_sic_existence_small_dimensions(criterion):
    for n in (2, 3, 4, 5):
        cert = cs.sic_search(n, restarts=200, seed=0)
        res = cert.extra["report"]["max_residual"]
        criterion.check(res <= 1e-8 and cert.restarts <= 200 and cert.wall_time <= 300,
                        f"N={n} residual {res:.2e} after {cert.restarts} restarts in {cert.wall_time:.1f}s")
    assert criterion.ok


@pytest.mark.criterion(2)
def test_sic_verification_and_perturbation(criterion):
    rng = np.random.default_rng(1)
    for name, fid in (("tetrahedron", cs.tetrahedron_fiducial()), ("hesse", cs.hesse_fiducial())):
        orbit = cs.sic_orbit(fid)
        rep = cs.verify_sic(orbit, 1e-10)
        criterion.check(rep.passed, f"{name} residual {rep.max_residual:.1e}")
        lo, hi = np.inf, 0.0
        for k in range(len(orbit)):
            bumped = orbit.copy()
            delta = rng.normal(size=fid.size) + 1j * rng.normal(size=fid.size)
            bumped[k] += 1e-4 * delta / np.linalg.norm(delta)
            r = cs.verify_sic(bumped, 1e-10)
            lo, hi = min(lo, r.max_residual), max(hi, r.max_residual)
            criterion.ok &= (not r.passed) and 1e-5 <= r.max_residual <= 1e-3
        criterion.check(1e-5 <= lo and hi <= 1e-3, f"{name} perturbed residuals in [{lo:.1e}, {hi:.1e}]")
    assert criterion.ok


@pytest.mark.criterion(3)
def test_mub_counts(criterion):
    for p in (2, 3, 5, 7):
        bases = cs.mub_prime(p)
        rep = cs.verify_mub(bases, 1e-10)
        criterion.check(rep.passed and len(bases) == p + 1, f"p={p}: {len(bases)} bases, residual {rep.max_residual:.1e}")
    three = cs.mub_search(6, 3, restarts=20, seed=0)
    criterion.check(three.extra["residual"] <= 1e-10, f"d=6 K=3 residual {three.extra['residual']:.1e}")
    four = cs.mub_search(6, 4, restarts=10, seed=0)
    res4 = four.extra["residual"]
    criterion.check(np.isfinite(res4) and "verdict" not in four.extra, f"d=6 K=4 best residual {res4:.3e} (reported)")
    assert criterion.ok


@pytest.mark.criterion(4)
def test_euler_sanity(criterion):
    try:
        cb.graeco_latin(6)
        criterion.check(False, "graeco_latin(6) returned")
    except cb.NoSolutionError:
        criterion.check(True, "graeco_latin(6) errors")
    criterion.check(cb.verify_graeco_latin(cb.CARD_RANKS, cb.CARD_SUITS).passed, "card square")
    a, b = cb.graeco_latin(3)
    u = cb.permutation_unitary(a, b)
    r_oqls = cb.verify_oqls(cb.product_table(a, b), 1e-12)
    r_two = cb.verify_two_unitary(u, 3, 1e-12)
    r_pt = cb.verify_perfect_tensor(cb.tensor_from_unitary(u, 3), 1e-12)
    criterion.check(r_oqls.passed and r_two.passed and r_pt.passed, "d=3 OQLS / 2-unitary / perfect tensor at 1e-12")
    r_ame = cb.verify_ame(cb.ame4_from_two_unitary(u, 3), 1e-10)
    criterion.check(r_ame.passed, f"AME(4,3) reductions residual {r_ame.max_residual:.1e}")
    qubits = cb.two_unitary_search(2, restarts=100, seed=0, max_iters=2000, target=None)
    worst = min(v for v in qubits.value_trace)
    criterion.check(qubits.restarts == 100 and worst > 0.1,
                    f"d=2 stalls: min objective {worst:.3f} over {qubits.restarts} restarts")
    six = cb.two_unitary_search(6, restarts=100, seed=0, max_iters=300)
    criterion.check(six.restarts >= 100 and six.wall_time < 3600 and "verdict" not in six.extra,
                    f"d=6 best residual {six.extra['residual']:.3e} over {six.restarts} restarts "
                    f"in {six.wall_time:.0f}s (reported)")
    assert criterion.ok


@pytest.mark.criterion(5)
def test_werner_spectra(criterion):
    rng = np.random.default_rng(5)
    worst = 0.0
    for k in range(50):
        d = 2 + k % 5
        alpha = float(rng.uniform(-1, 1))
        numeric = hermitian_eigvals(partial_transpose(en.werner(d, alpha).matrix, d, d))
        worst = max(worst, float(np.max(np.abs(numeric - en.expand_spectrum(en.werner_pt_spectrum(d, alpha)[1])))))
    criterion.check(worst <= 1e-12, f"50-point grid max deviation {worst:.1e}")
    flips = all(en.werner_pt_spectrum(d, -1 / d - 1e-9)[0] < 0 < en.werner_pt_spectrum(d, -1 / d + 1e-9)[0]
                for d in range(2, 7))
    criterion.check(flips, "NPT boundary at alpha = -1/d (+-1e-9)")
    x = 14 * partial_transpose(en.werner(4, -0.5).matrix, 4, 4)
    unit = float(np.max(np.abs(x @ x.conj().T - np.eye(16))))
    spectrum_dev = float(np.max(np.abs(hermitian_eigvals(x) - np.array([-1.0] + [1.0] * 15))))
    criterion.check(unit <= 1e-12 and spectrum_dev <= 1e-12, f"14 rho(4,-1/2)^Gamma unitary {unit:.1e}, spectrum {spectrum_dev:.1e}")
    assert criterion.ok


@pytest.mark.criterion(6)
def test_distillability(criterion):
    hit = en.search_distillable(en.werner(4, -0.6), 1, 5, seed=0)
    criterion.check(hit.best_value <= -0.0147,
                    f"alpha=-0.6: {hit.best_value:.7f} (closed form {-0.2 / 13.6:.7f})")
    edge = en.search_distillable(en.werner(4, -0.5), 1, 100, seed=0)
    lowest = min(edge.value_trace)
    criterion.check(edge.restarts == 100 and lowest >= -1e-9,
                    f"alpha=-0.5 n=1: lowest over 100 restarts {lowest:.1e}")
    two = en.search_distillable(en.werner(4, -0.5), 2, 2, seed=7, max_iters=200)
    criterion.check(two.extra["verdict"] == "open" and two.wall_time < 7200,
                    f"alpha=-0.5 n=2: best {two.best_value:.1e}, verdict {two.extra['verdict']}, "
                    f"{two.wall_time:.0f}s")
    rng = np.random.default_rng(6)
    worst = 0.0
    for k in range(100):
        d = 2 + k % 2
        rho = random_density(d * d, rng)
        raw = rng.normal(size=(4, d)) + 1j * rng.normal(size=(4, d))
        probe = en.DistillProbe.from_raw(d, 1, raw[:2], raw[2:])
        x = en.pt_power(rho, d, 1)
        comp = hermitian_eigvals(en.compressed_matrix(x, probe))
        full = en.full_projected_spectrum(x, probe)
        worst = max(worst, float(np.max(np.abs(comp - full))))
    criterion.check(worst <= 1e-10, f"compression oracle over 100 trials {worst:.1e}")
    assert criterion.ok


@pytest.mark.criterion(7)
def test_kronecker_sum_bound(criterion):
    rng = np.random.default_rng(7)
    top = max(en.ks_objective(en.random_normal_instance(rng)) for _ in range(10_000))
    criterion.check(top <= 0.5 + 1e-10, f"10^4 normal instances max {top:.12f}")
    a = np.diag([1, -1, 0, 0]).astype(complex) / 4
    val = en.ks_objective(en.KsInstance(a, a))
    criterion.check(abs(val - 0.5) <= 1e-12, f"explicit instance {val:.15f}")
    general = en.ks_search_violation(1000, seed=0)
    criterion.check(general.restarts == 1000,
                    f"general search max {general.extra['max_value']:.15f} over {general.restarts} restarts (reported)")
    assert criterion.ok


@pytest.mark.criterion(8)
def test_replay_shipped_certificates(criterion, tmp_path):
    files = sorted(CERT_DIR.glob("*.json"))
    criterion.check(len(files) > 0, f"{len(files)} certificates")
    for f in files:
        out = tmp_path / f"replay-{f.name}"
        code = cli.run(["replay", "--input", str(f), "--out", str(out)])
        rep = json.loads(out.read_text())["replay"]
        criterion.check(code == 0 and rep["identical"], f"{f.stem} {rep['replayed_best_value']!r}")
    assert criterion.ok
