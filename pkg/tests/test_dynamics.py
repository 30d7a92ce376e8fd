import math

import numpy as np
import pytest

import tripletlink as tl
from tripletlink import algebra, dynamics, effective, model, protocols
from tripletlink.dynamics import ANGULAR
from conftest import random_density


def test_dipole_maps_each_excited_state_down():
    d = dynamics.dipole_operator()
    for block in (1, 2, 3):
        for nuc in model.NUCLEAR_LABELS:
            v = model.basis_state(block, nuc)
            out = d @ v
            assert np.allclose(out, model.basis_state(0, nuc))
    # unit emission strength per excited basis state (diagonal of D+D)
    dd = algebra.dagger(d) @ d
    assert np.allclose(np.diag(dd)[4:].real, 1.0)


def test_twelve_strong_channels_symmetric(demf):
    h = model.build_full_hamiltonian(demf, include_omega0=False)
    channels = dynamics.decay_channels(h, demf.lifetimes)
    strong = [c for c in channels if c.amplitude > 0.5]
    assert len(strong) == 12
    # satellite lines from first-order state mixing are tiny
    weak = [c for c in channels if c.amplitude <= 0.5]
    assert all(c.amplitude < 1e-3 for c in weak)
    spec = protocols.symmetric_decay_spec(demf)
    assert len(spec.exempt_pairs) == 1   # the central T0 pair
    i, j = spec.exempt_pairs[0]
    split = abs(spec.channels[i].frequency - spec.channels[j].frequency)
    s = tl.symmetric_spectrum(demf)
    assert abs(split - ANGULAR * 2 * abs(s.a_zero)) < 0.05 * split


def test_channels_zero_hyperfine_three_frequencies(demf):
    p = demf.replace(A=0.0, A_prime=0.0)
    h = model.build_full_hamiltonian(p, include_omega0=False)
    channels = dynamics.decay_channels(h, p.lifetimes)
    freqs = {round(c.frequency, 6) for c in channels}
    assert len(freqs) == 3


def test_channel_gaps_asymmetric(dmfph):
    # all first-order-split lines are well separated at tau = 10 us; only the
    # central-sublevel cluster (second-order splittings) sits inside 30/tau
    h = effective.effective_hamiltonian(dmfph)
    channels = dynamics.decay_channels(h, 10.0)
    pairs = dynamics.find_exempt_pairs(channels, 10.0, threshold=30.0)
    for (i, j) in pairs:
        assert channels[i].sublevel == 0 and channels[j].sublevel == 0


def test_rate_for_frequency():
    assert dynamics.rate_for_frequency(5.0, 2.0) == 0.25
    assert dynamics.rate_for_frequency(-5.0, 2.0) == 0.0


def test_secular_rhs_ground_only_and_traceless(demf_fig5):
    p, tau = demf_fig5
    spec = protocols.symmetric_decay_spec(p)
    rho_ground = np.zeros((16, 16), dtype=complex)
    rho_ground[:4, :4] = np.eye(4) / 4
    assert np.abs(dynamics.secular_rhs(rho_ground, spec)).max() < 1e-15
    rng = np.random.default_rng(0)
    for _ in range(3):
        rho = random_density(rng, 16)
        out = dynamics.partial_rwa_rhs(0.3, rho, spec)
        assert abs(np.trace(out)) < 1e-12


def test_single_eigenstate_decays_exponentially(demf_fig5):
    p, tau = demf_fig5
    spec = protocols.symmetric_decay_spec(p)
    psi = protocols.excited_state(model.basis_state(0, "dd")[:4], 1)
    rho = np.outer(psi, psi.conj())
    for t in (0.5 * tau, 2.0 * tau):
        out = dynamics.integrate_master(rho, spec, t)
        assert abs(dynamics.excited_population(out) - math.exp(-t / tau)) < 1e-6


def test_partial_equals_secular_without_exempt_pairs(demf_fig5):
    p, _ = demf_fig5
    spec = protocols.symmetric_decay_spec(p)
    bare = dynamics.MasterEqSpec(channels=spec.channels, exempt_pairs=[])
    rng = np.random.default_rng(1)
    rho = random_density(rng, 16)
    a = dynamics.partial_rwa_rhs(0.7, rho, bare)
    b = dynamics.secular_rhs(rho, bare)
    assert np.abs(a - b).max() == 0.0
    # and with pairs all separated beyond 30/tau, the rule returns none
    h = effective.effective_hamiltonian(p)
    channels = dynamics.decay_channels(h, p.tau_zero)
    wide = dynamics.find_exempt_pairs(channels, p.tau_zero, threshold=1e-6)
    assert wide == []


def test_integrate_master_identity_with_no_channels():
    spec = dynamics.MasterEqSpec(channels=[], exempt_pairs=[], hamiltonian=None)
    rng = np.random.default_rng(5)
    rho = random_density(rng, 16)
    out = dynamics.integrate_master(rho, spec, 3.0)
    assert np.abs(out - rho).max() < 1e-12


def test_integrate_master_health_and_decay_bound(demf_fig5):
    p, tau = demf_fig5
    spec = protocols.symmetric_decay_spec(p)
    psi = protocols.excited_state(0.5 * np.ones(4), 0)
    rho0 = np.outer(psi, psi.conj())
    final, samples = dynamics.integrate_master(
        rho0, spec, 10.0 * tau, sample_times=np.linspace(0, 10 * tau, 21))
    for rho in samples:
        assert abs(np.trace(rho).real - 1.0) < 1e-6
        assert np.abs(rho - rho.conj().T).max() < 1e-9
        assert np.linalg.eigvalsh(rho).min() > -1e-8
    pops = [dynamics.excited_population(r) for r in samples]
    assert all(b <= a + 1e-7 for a, b in zip(pops, pops[1:]))
    assert dynamics.excited_population(final) <= math.exp(-10.0) + 1e-6


def test_closed_form_examples():
    # |e T+ ud> -> equal mixture of du and ud
    psi = protocols.excited_state(model.basis_state(0, "ud")[:4], 1)
    out = dynamics.final_nuclear_state_closed_form(np.outer(psi, psi.conj()))
    expected = np.zeros((4, 4)); expected[1, 1] = expected[2, 2] = 0.5
    assert np.abs(out - expected).max() < 1e-12
    # T0 middle-pair state passes through unchanged
    nuc = np.array([0.0, 0.6, 0.8j, 0.0])
    psi = protocols.excited_state(nuc, 0)
    out = dynamics.final_nuclear_state_closed_form(np.outer(psi, psi.conj()))
    assert np.abs(out - np.outer(nuc, nuc.conj())).max() < 1e-12
    # the full T0 superposition: quarter mixture plus middle cross coherence
    psi = protocols.excited_state(0.5 * np.ones(4), 0)
    out = dynamics.final_nuclear_state_closed_form(np.outer(psi, psi.conj()))
    expected = 0.25 * np.eye(4)
    expected[1, 2] = expected[2, 1] = 0.25
    assert np.abs(out - expected).max() < 1e-12
    assert abs(np.trace(out @ out).real - 3.0 / 8.0) < 1e-12
    # stretched T+ population decays into its own channel, no flip average
    psi = protocols.excited_state(model.basis_state(0, "dd")[:4], 1)
    out = dynamics.final_nuclear_state_closed_form(np.outer(psi, psi.conj()))
    assert abs(out[0, 0] - 1.0) < 1e-12


def test_closed_form_rejects_ground_weight():
    rho = np.zeros((16, 16), dtype=complex)
    rho[0, 0] = 1.0
    with pytest.raises(dynamics.UnsupportedSupportError):
        dynamics.final_nuclear_state_closed_form(rho)


def test_rotating_frame_basics():
    rng = np.random.default_rng(8)
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    v /= np.linalg.norm(v)
    assert np.allclose(dynamics.rotating_frame(v, 1.3, 0.0), v)
    rho = np.outer(v, v.conj())
    out = dynamics.rotating_frame(rho, (0.7, -2.0), 3.1)
    assert np.allclose(np.diag(out), np.diag(rho))
    assert abs(np.trace(out).real - 1.0) < 1e-12


def test_emission_spectrum_peak_and_overlap():
    tau = 7.0
    mk = lambda freq: dynamics.DecayChannel(
        frequency=freq, operator=np.zeros((16, 16)), rate=1 / (2 * tau),
        sublevel=0, amplitude=1.0)
    peak = dynamics.emission_spectrum([mk(2.0)], np.array([2.0]))
    assert abs(peak[0] - tau) < 1e-12

    def overlap(split):
        grid = np.linspace(-60 * max(split, 1 / tau), 60 * max(split, 1 / tau), 400001)
        l1 = dynamics.emission_spectrum([mk(0.0)], grid)
        l2 = dynamics.emission_spectrum([mk(split)], grid)
        self_ov = np.trapezoid(l1 * l1, grid)
        return np.trapezoid(l1 * l2, grid) / self_ov

    assert overlap(0.05 / tau) >= 0.99
    assert overlap(100.0 / tau) <= 0.01


def test_channel_weights(demf_fig5):
    p, _ = demf_fig5
    spec = protocols.symmetric_decay_spec(p)
    psi = protocols.excited_state(model.basis_state(0, "dd")[:4], 1)
    w = dynamics.channel_weights(spec.channels, np.outer(psi, psi.conj()))
    assert abs(w.sum() - 1.0) < 1e-9
    assert w.max() > 0.99
