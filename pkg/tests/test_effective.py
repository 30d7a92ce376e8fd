import math

import numpy as np
import pytest

import tripletlink as tl
from tripletlink import algebra, dynamics, effective, model
from tripletlink.effective import WrongRegimeError
from tripletlink.model import SUBLEVELS


def test_symmetric_couplings_frozen_values(demf):
    s = tl.symmetric_spectrum(demf)
    assert abs(s.a_plus - 3.125 / 9899.7) < 1e-12
    assert abs(s.a_plus - 3.1566613e-4) < 1e-10
    assert abs(s.a_minus - 3.3574352e-4) < 1e-10
    assert abs(s.a_zero + 2.0077393e-5) < 1e-11
    # |a_pm / a_0| ~ omega_e / (2 |D|) to leading order
    ratio = s.a_plus / abs(s.a_zero)
    assert abs(ratio - demf.omega_e / (2 * abs(demf.D))) / ratio < 0.05


def test_symmetric_couplings_d_zero(demf):
    s = tl.symmetric_spectrum(demf.replace(D=0.0))
    assert s.a_plus == s.a_minus
    assert s.a_zero == 0.0


def test_symmetric_spectrum_relations(demf):
    s = tl.symmetric_spectrum(demf)
    assert s.a_zero == s.a_plus - s.a_minus
    assert s.delta[-1] == -2 * s.a_minus
    assert s.delta[0] == -2 * s.a_zero
    assert s.delta[1] == 2 * s.a_plus
    for j in SUBLEVELS:
        e1, e2, e3, e4 = s.energies[j]
        assert abs(e1 - (e3 - s.eps[j])) < 1e-12
        assert abs(e3 - (e2 - s.delta[j])) < 1e-12
        assert abs(e4 - (e2 + s.eps[j])) < 1e-12


def test_symmetric_spectrum_wrong_regime(dmfph):
    with pytest.raises(WrongRegimeError):
        tl.symmetric_spectrum(dmfph)


def test_perturbative_vs_exact_spectrum(demf):
    s = tl.symmetric_spectrum(demf)
    exact = np.linalg.eigvalsh(model.excited_block(demf))
    pert = np.sort(np.concatenate([s.energies[j] for j in SUBLEVELS]))
    dev = np.abs(np.sort(exact) - pert).max()
    assert dev <= 0.05 * abs(s.a_zero)


def test_crossover_exactness_at_small_asymmetry(demf):
    # third-order remainder bound holds for weak asymmetry as well
    p = demf.replace(omega_n_prime=demf.omega_n * 1.001, A_prime=demf.A * 1.0005)
    co = tl.crossover_spectrum(p)
    exact = np.linalg.eigvalsh(model.excited_block(p))
    pert = np.sort(np.concatenate([co.energies[j] for j in SUBLEVELS]))
    a = model.second_order_couplings(p)["a"]
    assert np.abs(np.sort(exact) - pert).max() <= 0.05 * min(abs(v) for v in a.values())


def test_xy_block_structure(demf):
    s = tl.symmetric_spectrum(demf)
    for j, k in ((-1, 1.0), (0, 1.0), (1, -1.0)):
        h = effective.symmetric_block_xy(s, j)
        a = {-1: s.a_minus, 0: s.a_zero, 1: s.a_plus}[j]
        assert abs(h[1, 2] - k * a) < 1e-15
        assert np.abs(h[0, :]).max() == 0.0 and np.abs(h[3, :]).max() == 0.0


def test_xy_block_full_flip_flop(demf):
    s = tl.symmetric_spectrum(demf)
    h = effective.symmetric_block_xy(s, 1)
    u = algebra.propagator(h, math.pi / (2 * s.a_plus))   # units cancel
    psi = u @ np.eye(4)[1]
    assert abs(abs(psi[2]) - 1.0) < 1e-12   # full du -> ud transfer


def test_rotating_frame_makes_block_static(demf):
    # conjugating the in-frame lab block by the frame rotation and removing
    # the frame generator leaves the bare XY coupling at any time
    s = tl.symmetric_spectrum(demf)
    ops_sz = np.diag([0.5, -0.5])
    k_tot = np.kron(ops_sz, np.eye(2)) + np.kron(np.eye(2), ops_sz)
    for j in SUBLEVELS:
        e1, e2, e3, e4 = s.energies[j]
        c = 0.5 * (e2 + e3) - 0.0   # middle-block centre
        lab = np.zeros((4, 4), dtype=complex)
        lab[0, 0], lab[3, 3] = e1, e4
        sq = 1 / math.sqrt(2)
        v2 = np.array([0, -sq, sq, 0]); v3 = np.array([0, sq, sq, 0])
        lab += e2 * np.outer(v2, v2) + e3 * np.outer(v3, v3)
        xy = effective.symmetric_block_xy(s, j)
        for t in (0.0, 0.37, 2.9):
            rot = dynamics.rotating_frame(lab, s.phi[j], t) - s.phi[j] * k_tot
            offset = rot[1, 1].real - xy[1, 1].real
            assert np.abs(rot - xy - offset * np.eye(4)).max() < 1e-9


def test_asymmetric_block(dmfph):
    h = effective.asymmetric_block(dmfph, 1)
    assert np.abs(h - np.diag(np.diag(h))).max() == 0.0
    a_plus = 0.5 * dmfph.A ** 2 / (-dmfph.D + dmfph.omega_e + dmfph.omega_n)
    phi_plus = -dmfph.omega_n - dmfph.A - a_plus
    assert abs((h[0, 0] - h[2, 2]).real - phi_plus) < 1e-12  # n-flip costs phi_+
    assert abs(phi_plus + 11.97180) < 1e-4


def test_asymmetric_block_free_precession_limit():
    p = tl.SystemParams(omega_n=2.0, omega_n_prime=7.0, omega_e=9000.0,
                        A=0.0, A_prime=0.0, D=-100.0)
    for j in SUBLEVELS:
        h = effective.asymmetric_block(p, j)
        assert abs((h[0, 0] - h[2, 2]).real + p.omega_n) < 1e-12


def test_asymmetric_block_wrong_regime(demf):
    with pytest.raises(WrongRegimeError):
        effective.asymmetric_block(demf, 1)


def test_crossover_symmetric_limit(demf):
    co = tl.crossover_spectrum(demf)
    s = tl.symmetric_spectrum(demf)
    for j in SUBLEVELS:
        assert np.allclose(np.sum(co.alpha[j] ** 2, axis=1), [2.0, 2.0])
        assert np.allclose(np.abs(co.alpha[j]), 1.0)
        assert np.allclose(co.energies[j], s.energies[j], atol=1e-9)
        assert np.allclose(co.alpha[j][0], [-1.0, 1.0])
        assert np.allclose(co.alpha[j][1], [1.0, 1.0])


def test_crossover_chi_one(demf):
    a0 = model.second_order_couplings(demf)["a"][0]
    p = demf.replace(omega_n_prime=demf.omega_n - 2.0 * a0)   # f_0 = a_0 > 0? sign via strengths
    co = tl.crossover_spectrum(p)
    assert abs(co.chi[0] - 1.0) < 1e-9
    w = co.alpha[0][0][0] ** 2   # |alpha_{0,2,1}|^2, doubled convention
    assert abs(w - (1 + math.copysign(1, a0 * co.f[0]) / math.sqrt(2))) < 1e-9


def test_crossover_middle_gap(demf):
    p = demf.replace(omega_n_prime=demf.omega_n * 1.01, A_prime=demf.A * 0.99)
    co = tl.crossover_spectrum(p)
    a = model.second_order_couplings(p)["a"]
    for j in SUBLEVELS:
        gap = abs(co.energies[j][2] - co.energies[j][1])
        assert abs(gap - 2.0 * math.hypot(a[j], co.f[j])) < 1e-12


def test_crossover_asymmetric_limit_scaling(demf):
    # at chi = 1e3 the computational-basis weights deviate by chi^-2 / 2
    a = model.second_order_couplings(demf)["a"]
    p = demf.replace(omega_n_prime=demf.omega_n - 2000.0 * a[0] / 1.0)
    co = tl.crossover_spectrum(p)
    chi = co.chi[0]
    assert chi > 900.0
    weights = 0.5 * co.alpha[0] ** 2
    dev = min(abs(weights[0][0] - 1.0), abs(weights[0][0]))
    assert dev <= 1.0 / chi ** 2


def test_crossover_continuity(demf):
    base = tl.crossover_spectrum(demf.replace(omega_n_prime=demf.omega_n * 1.001))
    step = tl.crossover_spectrum(demf.replace(omega_n_prime=demf.omega_n * 1.0010001))
    for j in SUBLEVELS:
        assert np.abs(np.array(base.energies[j]) - np.array(step.energies[j])).max() < 1e-6
        assert np.abs(base.alpha[j] - step.alpha[j]).max() < 1e-3


def test_effective_hamiltonian_conserves_nuclear_sz(demf, dmfph):
    sz_tot = model.spin_operators()["Sz_n"] + model.spin_operators()["Sz_np"]
    for p in (demf, dmfph):
        h = effective.effective_hamiltonian(p)
        assert np.abs(h @ sz_tot - sz_tot @ h).max() < 1e-12 * np.abs(h).max()


def test_transition_spectrum_frozen_values(dmfph):
    ts = tl.transition_spectrum(dmfph)
    assert abs(ts.rf[-1] - 0.02808) < 2e-5
    assert abs(ts.rf[0] - 5.97371) < 2e-5
    assert abs(ts.rf[1] - 11.97180) < 2e-5
    assert abs(ts.rf_prime[-1] - 3.74644) < 2e-5
    assert abs(ts.rf_prime[0] - 14.75247) < 2e-5
    assert abs(ts.rf_prime[1] - 25.74603) < 2e-5
    # dd / uu microwave lines split by A + A'
    for pair in ("+0", "0-"):
        assert abs(ts.mw[(pair, "dd")] - ts.mw[(pair, "uu")]
                   - (dmfph.A + dmfph.A_prime)) < 1e-12


def test_transition_spectrum_validated_against_exact(dmfph):
    ts = tl.transition_spectrum(dmfph)   # raises if beyond 5 max(|a|)
    lv = effective._exact_level_map(dmfph)
    a = model.second_order_couplings(dmfph)
    tol = 5.0 * max(max(abs(x) for x in a["a"].values()),
                    max(abs(x) for x in a["a_prime"].values()))
    for (pair, lab), freq in ts.mw.items():
        ja, jb = (1, 0) if pair == "+0" else (0, -1)
        assert abs(abs(lv[(ja, lab)] - lv[(jb, lab)]) - freq) <= tol


def test_transition_spectrum_equal_couplings_degenerate_mw_lines():
    # equal hyperfine couplings with unequal Zeeman splittings: asymmetric
    # regime, but the du and ud microwave lines coincide (A - A' = 0)
    p = tl.SystemParams(omega_n=5.0, omega_n_prime=15.0, omega_e=9700.0,
                        A=8.0, A_prime=8.0, D=-320.0)
    ts = tl.transition_spectrum(p)
    for pair in ("+0", "0-"):
        assert ts.mw[(pair, "du")] == ts.mw[(pair, "ud")]


def test_transition_spectrum_wrong_regime(demf):
    with pytest.raises(WrongRegimeError):
        tl.transition_spectrum(demf)


def test_mixing_corrections(demf):
    assert all(c == 0.0 for c in effective.mixing_corrections(
        demf.replace(A=0.0, A_prime=0.0)))
    vals = effective.mixing_corrections(demf)
    assert abs(max(vals) - 1.89968e-4) < 1e-8
    bigger = effective.mixing_corrections(demf.replace(omega_e=2 * demf.omega_e))
    assert max(bigger) < max(vals)
