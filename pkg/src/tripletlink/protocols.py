"""The four entanglement-generation protocols.

* symmetric free evolution with a polarized triplet (sublevel switching),
* the two-stage variant for a mixed triplet with per-sublevel lifetimes,
* the selective microwave 2pi-pulse CPHASE with power optimization,
* the rf + microwave shelving sequence, and
* the adiabatic-following CPHASE with Gaussian power envelope.

Times are microseconds; drive powers and transition frequencies are MHz
(ordinary frequencies), converted to angular form inside the propagators.
Rotating-frame conventions follow the static effective Hamiltonian: pulse
sequences are simulated in its interaction picture, where free evolution is
the identity and reported fidelities refer to rotating-frame target states.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import algebra, dynamics, effective, measures, model
from .dynamics import ANGULAR
from .effective import WrongRegimeError
from .model import (GROUND_DIM, NUCLEAR_LABELS, SUBLEVEL_BLOCK, SUBLEVELS,
                    Regime, SystemParams)


class OptimizationFailedError(RuntimeError):
    """Optimizer maximum sits on the search boundary."""


class NoSeparationError(ValueError):
    """A neighbouring transition coincides with the target."""


class DegenerateInputError(ValueError):
    """Both the drive strength and the detuning vanish."""


class PerturbationCondViolatedError(ValueError):
    """Drive too strong for the dispersive decoupling of the upper sublevel."""


class NoSolutionError(RuntimeError):
    """The conditional-phase equation has no solution at these settings."""


class InfeasibleError(RuntimeError):
    """No point of the search grid satisfies all constraints."""


class LifetimeHierarchyViolated(UserWarning):
    """Entangling time vs lifetime hierarchy does not hold."""


@dataclass(frozen=True)
class PulseSpec:
    """Drive pulse description.

    For a top-hat pulse, ``duration`` is set and the 2pi-pulse convention
    duration = 2pi / (sqrt(2) * power_angular) applies; for a Gaussian pulse
    the envelope is power * exp(-(t/sigma)^2) evaluated on [-3 sigma, 3 sigma].
    """
    shape: str                  # "tophat" | "gaussian"
    omega_drive: float          # carrier frequency, MHz
    power: float                # peak drive amplitude Omega_0, MHz
    duration: float = 0.0       # us (top-hat)
    sigma: float = 0.0          # us (gaussian)
    target: str = ""            # transition label, free-form

    def __post_init__(self):
        if self.shape not in ("tophat", "gaussian"):
            raise ValueError(f"unknown pulse shape {self.shape!r}")


@dataclass
class ProtocolReport:
    """Outcome of a protocol run."""
    final_nuclear_state: np.ndarray = field(repr=False)
    ef: float
    fidelity_to_target: float
    event_log: list
    diagnostics: dict

    def validate(self):
        algebra.validate_density_matrix(self.final_nuclear_state,
                                        herm_tol=1e-8, trace_tol=1e-5,
                                        eig_floor=-1e-7)


# ---------------------------------------------------------------------------
# shared helpers

def triplet_swap(j_a: int, j_b: int) -> np.ndarray:
    """Unitary permutation of two triplet sublevels (identity on the nuclei)."""
    perm = list(range(4))
    a, b = SUBLEVEL_BLOCK[j_a], SUBLEVEL_BLOCK[j_b]
    perm[a], perm[b] = perm[b], perm[a]
    return algebra.kron(np.eye(4)[perm], np.eye(4))


def excited_state(nuclear: np.ndarray, j: int) -> np.ndarray:
    """16-dim state |e T_j> (x) |nuclear>."""
    v = np.zeros(16, dtype=complex)
    b = SUBLEVEL_BLOCK[j]
    v[4 * b:4 * b + 4] = algebra.validate_state_vector(nuclear)
    return v


def ideal_deexcitation(rho16: np.ndarray) -> np.ndarray:
    """Coherence-preserving transfer |e T_j x> -> |0 x>, incoherent over j."""
    out = np.array(rho16[:4, :4], dtype=complex)
    for b in (1, 2, 3):
        out += rho16[4 * b:4 * b + 4, 4 * b:4 * b + 4]
    return out


def _propagate(h_mhz: np.ndarray, rho: np.ndarray, t: float) -> np.ndarray:
    u = algebra.propagator(ANGULAR * h_mhz, t)
    return u @ rho @ algebra.dagger(u)


def symmetric_decay_spec(p: SystemParams) -> dynamics.MasterEqSpec:
    """Interaction-picture master-equation spec for the symmetric protocols.

    Channels come from the exact Hamiltonian with per-sublevel lifetimes.
    Only the central pair of T0 lines -- the two strong transitions into the
    zero-magnetization ground doublet, split by the central flip-flop gap --
    keeps its cross terms; every other pair takes the full rotating-wave
    approximation.  This is the defining approximation behind the analytic
    post-decay states: the optical frequencies within one sublevel differ
    only at second order, but all transitions other than the central pair
    are treated as distinguishable.
    """
    h = effective.effective_hamiltonian(p)
    channels = dynamics.decay_channels(h, p.lifetimes, omega_0=p.omega_0)
    pairs = []
    central = [i for i, c in enumerate(channels)
               if c.sublevel == 0 and c.amplitude > 0.5
               and np.linalg.norm(c.operator[1:3, :]) > 0.5 * c.amplitude]
    for x in range(len(central)):
        for y in range(x + 1, len(central)):
            i, j = central[x], central[y]
            if abs(channels[i].frequency - channels[j].frequency) < 30.0 / p.tau_zero:
                pairs.append((i, j))
    return dynamics.MasterEqSpec(channels=channels, exempt_pairs=pairs,
                                 hamiltonian=None)


def _decay_until_empty(rho, spec, tol, threshold=1e-4, chunk=None, max_rounds=200):
    """Integrate decay until the excited population drops below threshold."""
    if chunk is None:
        slowest = max((1.0 / (2.0 * c.rate) for c in spec.channels), default=1.0)
        chunk = 2.0 * slowest
    elapsed = 0.0
    for _ in range(max_rounds):
        if dynamics.excited_population(rho) < threshold:
            break
        rho = dynamics.integrate_decay(rho, spec, chunk, tol=tol)
        elapsed += chunk
    return rho, elapsed


def _check_lifetime_hierarchy(p: SystemParams, spectrum) -> dict:
    """Entangling-time hierarchy: pi/(2 a_+) < tau_+ and tau_0 << pi/(2 |a_0|).

    The strong-inequality side uses a factor of 10.  Emits a
    LifetimeHierarchyViolated warning when either side fails.
    """
    t_ent = math.pi / (2.0 * ANGULAR * spectrum.a_plus)
    t_unwind = math.pi / (2.0 * ANGULAR * abs(spectrum.a_zero)) \
        if spectrum.a_zero != 0 else math.inf
    left = t_ent < min(p.tau_plus, p.tau_minus)
    right = 10.0 * p.tau_zero < t_unwind
    if not (left and right):
        warnings.warn("entangling-time/lifetime hierarchy violated: "
                      f"pi/(2a+)={t_ent:.3g} us, tau+={p.tau_plus:.3g} us, "
                      f"tau0={p.tau_zero:.3g} us, pi/(2|a0|)={t_unwind:.3g} us",
                      LifetimeHierarchyViolated)
    return {"entangling_time": t_ent, "unwind_time": t_unwind,
            "hierarchy_left": left, "hierarchy_right": right}


def _require_symmetric(p: SystemParams):
    regimes = model.classify_regime(p)
    if any(r is not Regime.SYMMETRIC for r in regimes.values()):
        raise WrongRegimeError("protocol requires a symmetric system")


def _ideal_quarter_target(spectrum, nuclear0: np.ndarray, switch_time: float,
                          j: int = 1) -> np.ndarray:
    """Decay-free image of nuclear0 under the sublevel-j flip-flop block."""
    h_xy = effective.symmetric_block_xy(spectrum, j)
    u = algebra.propagator(ANGULAR * h_xy, switch_time)
    return u @ nuclear0


# ---------------------------------------------------------------------------
# symmetric protocols

def run_symmetric_polarized(p: SystemParams, nuclear0: np.ndarray = None,
                            switch_time: float = None,
                            include_decay: bool = True,
                            tol: float = 1e-8) -> ProtocolReport:
    """Polarized-triplet protocol: flip to T+, evolve, flip back, decay.

    The triplet starts polarized in T0; a fast microwave pulse (modelled as
    an instantaneous sublevel swap) moves it to T+, the flip-flop coupling
    entangles the nuclei for ``switch_time`` (default pi/(4 a_+), which takes
    |du> to a maximally entangled state), a second pulse moves the
    population back to T0 and the excitation decays under the partial-RWA
    master equation until less than 1e-4 remains excited.  All stages use
    the effective Hamiltonian, whose fidelity against the exact spectrum is
    third-order small.
    """
    _require_symmetric(p)
    spectrum = effective.symmetric_spectrum(p)
    if nuclear0 is None:
        nuclear0 = model.basis_state(0, "du")[:4]
    nuclear0 = algebra.validate_state_vector(nuclear0)
    if switch_time is None:
        switch_time = math.pi / (4.0 * ANGULAR * spectrum.a_plus)
    diag = _check_lifetime_hierarchy(p, spectrum)
    h = effective.effective_hamiltonian(p)
    events = [(0.0, "optical excitation into T0; microwave swap T0<->T+")]
    psi = excited_state(nuclear0, j=1)
    rho = np.outer(psi, psi.conj())
    spec = symmetric_decay_spec(p) if include_decay else None
    if include_decay:
        rho = dynamics.integrate_decay(rho, spec, switch_time, tol=tol)
    rho = _propagate(h, rho, switch_time)
    events.append((switch_time, "microwave swap T+<->T0"))
    swap = triplet_swap(0, 1)
    rho = swap @ rho @ algebra.dagger(swap)
    decay_time = 0.0
    if include_decay:
        rho, decay_time = _decay_until_empty(rho, spec, tol)
    events.append((switch_time + decay_time, "excited population below 1e-4"))
    rho_nuc = ideal_deexcitation(rho)
    target = _ideal_quarter_target(spectrum, nuclear0, switch_time)
    report = ProtocolReport(
        final_nuclear_state=rho_nuc,
        ef=measures.entanglement_of_formation(rho_nuc, validate=False),
        fidelity_to_target=float((target.conj() @ rho_nuc @ target).real),
        event_log=events,
        diagnostics={**diag, "switch_time": switch_time,
                     "residual_excited": dynamics.excited_population(rho)})
    report.validate()
    return report


def run_symmetric_mixed(p: SystemParams, nuclear0: np.ndarray = None,
                        include_decay: bool = True,
                        tol: float = 1e-8) -> ProtocolReport:
    """Two-stage protocol for a triplet born as a sublevel mixture.

    Stage 1: free evolution entangles the T+ population for pi/(4 a_+); a
    microwave swap parks it in T0 whose short lifetime drains it to the
    ground state (wait 5 tau_0) with the coherence protected by the central
    line pair.  Stage 2: the T- population is swapped into T0 at the first
    phase-matched quarter-period multiple and drained in turn.

    The two flip-flop blocks rotate in opposite senses (block sign k(j)), so
    the T- branch reproduces the same Bell state only at quarter multiples
    k = 3 mod 4; the first stage-2 switching time is chosen accordingly
    (3 pi/(4 a_-) for the reference crystal parameters).
    """
    _require_symmetric(p)
    spectrum = effective.symmetric_spectrum(p)
    if nuclear0 is None:
        nuclear0 = model.basis_state(0, "du")[:4]
    nuclear0 = algebra.validate_state_vector(nuclear0)
    diag = _check_lifetime_hierarchy(p, spectrum)
    h = effective.effective_hamiltonian(p)
    spec = symmetric_decay_spec(p) if include_decay else None

    rho = np.zeros((16, 16), dtype=complex)
    for j, weight in zip(SUBLEVELS, p.populations):
        if weight > 0:
            psi = excited_state(nuclear0, j)
            rho += weight * np.outer(psi, psi.conj())

    def wait(rho, duration):
        if include_decay:
            rho = dynamics.integrate_decay(rho, spec, duration, tol=tol)
        return _propagate(h, rho, duration)

    t1 = math.pi / (4.0 * ANGULAR * spectrum.a_plus)
    events = [(0.0, "optical excitation (mixed triplet populations)")]
    rho = wait(rho, t1)
    swap_plus = triplet_swap(0, 1)
    rho = swap_plus @ rho @ algebra.dagger(swap_plus)
    events.append((t1, "microwave swap T0<->T+"))
    now = t1
    rho = wait(rho, 5.0 * p.tau_zero)
    now += 5.0 * p.tau_zero
    events.append((now, "T0 drained (5 tau_0)"))

    if p.p_minus > 1e-12:
        quarter = math.pi / (4.0 * ANGULAR * spectrum.a_minus)
        k = max(3, int(math.ceil(now / quarter)))
        while k % 4 != 3:
            k += 1
        t2 = k * quarter
        rho = wait(rho, t2 - now)
        swap_minus = triplet_swap(0, -1)
        rho = swap_minus @ rho @ algebra.dagger(swap_minus)
        events.append((t2, f"microwave swap T0<->T- (quarter multiple k={k})"))
        now = t2
    decay_time = 0.0
    if include_decay:
        rho, decay_time = _decay_until_empty(rho, spec, tol)
    events.append((now + decay_time, "excited population below 1e-4"))
    rho_nuc = ideal_deexcitation(rho)
    target = _ideal_quarter_target(spectrum, nuclear0, t1)
    report = ProtocolReport(
        final_nuclear_state=rho_nuc,
        ef=measures.entanglement_of_formation(rho_nuc, validate=False),
        fidelity_to_target=float((target.conj() @ rho_nuc @ target).real),
        event_log=events,
        diagnostics={**diag, "stage1_time": t1,
                     "residual_excited": dynamics.excited_population(rho)})
    report.validate()
    return report


# ---------------------------------------------------------------------------
# selective 2pi-pulse CPHASE

def _drive_hamiltonian(omega0: float, omega_drive: float) -> np.ndarray:
    """Microwave drive in the rotating frame: Omega0 Sx_e - omega_D Sz_e."""
    ops = model.spin_operators()
    return omega0 * ops["Sx_e"] - omega_drive * ops["Sz_e"]


def microwave_drive_frequency(p: SystemParams, nuclear: str = "uu",
                              pair: str = "+0") -> float:
    """Transition frequency between |T_a nuclear> and |T_b nuclear| (MHz)."""
    h = effective.effective_hamiltonian(p)
    idx = NUCLEAR_LABELS.index(nuclear)
    ja, jb = (1, 0) if pair == "+0" else (0, -1)
    ea = h[4 * SUBLEVEL_BLOCK[ja] + idx, 4 * SUBLEVEL_BLOCK[ja] + idx].real
    eb = h[4 * SUBLEVEL_BLOCK[jb] + idx, 4 * SUBLEVEL_BLOCK[jb] + idx].real
    return abs(ea - eb)


def tophat_2pi_duration(omega0: float) -> float:
    """Duration of a top-hat 2pi-pulse: 2pi / (sqrt(2) Omega0_angular)."""
    return 1.0 / (math.sqrt(2.0) * omega0)


def cphase_2pi(p: SystemParams, omega_D: float, Omega0: float, tau: float,
               nuclear0: np.ndarray = None, tol: float = 1e-8) -> ProtocolReport:
    """CPHASE through a selective microwave 2pi-pulse with optical decay.

    The effective Hamiltonian plus the rotating-frame drive is diagonalized
    to build the decay channels; pairs of channel frequencies closer than
    30/tau keep their oscillating cross terms.  The pulse lasts
    2pi/(sqrt2 Omega0); afterwards an ideal coherence-preserving
    de-excitation transfers the remaining excited amplitudes to the ground
    block and the nuclear state is scored.
    """
    if nuclear0 is None:
        nuclear0 = 0.5 * np.ones(4, dtype=complex)
    nuclear0 = algebra.validate_state_vector(nuclear0)
    h_eff = effective.effective_hamiltonian(p)
    h_mw = h_eff + _drive_hamiltonian(Omega0, omega_D)
    t_pulse = tophat_2pi_duration(Omega0)
    channels = dynamics.decay_channels(h_mw, tau, omega_0=p.omega_0)
    pairs = dynamics.find_exempt_pairs(channels, tau, threshold=30.0)
    spec = dynamics.MasterEqSpec(channels=channels, exempt_pairs=pairs,
                                 hamiltonian=None)
    psi = excited_state(nuclear0, j=0)
    rho = np.outer(psi, psi.conj())
    rho = dynamics.integrate_decay(rho, spec, t_pulse, tol=tol)
    rho = _propagate(h_mw, rho, t_pulse)
    rho_nuc = ideal_deexcitation(rho)

    # decay-free reference: free T0 phases plus a sign flip on the driven state
    t0b = 4 * SUBLEVEL_BLOCK[0]
    free = np.exp(-1j * ANGULAR * np.diag(h_eff)[t0b:t0b + 4].real * t_pulse)
    driven = int(np.argmin([abs(microwave_drive_frequency(p, lab) - omega_D)
                            for lab in NUCLEAR_LABELS]))
    target = free * nuclear0
    target[driven] = -target[driven]
    report = ProtocolReport(
        final_nuclear_state=rho_nuc,
        ef=measures.entanglement_of_formation(rho_nuc, validate=False),
        fidelity_to_target=float((target.conj() @ rho_nuc @ target).real),
        event_log=[(0.0, f"2pi microwave pulse on, Omega0={Omega0} MHz"),
                   (t_pulse, "pulse off; ideal de-excitation")],
        diagnostics={"t_pulse": t_pulse, "n_channels": len(channels),
                     "n_exempt_pairs": len(pairs), "driven_state":
                     NUCLEAR_LABELS[driven],
                     "residual_excited": dynamics.excited_population(rho)})
    report.validate()
    return report


def _golden_max(f, lo: float, hi: float, rtol: float):
    """Golden-section maximization on a log axis; returns (x*, f(x*))."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = math.log(lo), math.log(hi)
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(math.exp(c)), f(math.exp(d))
    while (b - a) > rtol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(math.exp(d))
    x = math.exp(0.5 * (a + b))
    return x, f(x)


def optimize_2pi_power(p: SystemParams, tau: float, nuclear0: np.ndarray = None,
                       omega_range=(1e-3, 1e2), per_decade: int = 20,
                       refine_rtol: float = 1e-3, nuclear: str = "uu"):
    """Maximize the 2pi-pulse entanglement of formation over the drive power.

    Coarse logarithmic grid (at least ``per_decade`` points per decade over
    ``omega_range``) followed by golden-section refinement of the bracket
    around the grid maximum.  Returns (Omega0*, EF*, t*).
    """
    omega_D = microwave_drive_frequency(p, nuclear=nuclear)
    lo, hi = omega_range
    n = int(math.ceil(per_decade * math.log10(hi / lo))) + 1
    grid = np.geomspace(lo, hi, n)

    def ef_of(omega0):
        return cphase_2pi(p, omega_D, omega0, tau, nuclear0=nuclear0).ef

    values = [ef_of(x) for x in grid]
    k = int(np.argmax(values))
    if k == 0 or k == n - 1:
        raise OptimizationFailedError(
            f"grid maximum at boundary Omega0={grid[k]:.3g} MHz; widen the range")
    omega_star, ef_star = _golden_max(ef_of, grid[k - 1], grid[k + 1], refine_rtol)
    if values[k] > ef_star:
        omega_star, ef_star = float(grid[k]), float(values[k])
    return omega_star, ef_star, tophat_2pi_duration(omega_star)


# ---------------------------------------------------------------------------
# pulse planning and the shelving sequence

def rabi_leakage(omega: float, delta: float) -> float:
    """Envelope maximum of the off-resonant transition probability.

    omega is the (full) Rabi frequency of the driven transition and delta
    the frequency offset of the neighbour, in common units.
    """
    if omega == 0.0 and delta == 0.0:
        raise DegenerateInputError("Rabi frequency and detuning are both zero")
    return omega * omega / (omega * omega + delta * delta)


def plan_selective_pulse(target: float, neighbors, bound: float = 0.01,
                         flip_angle: float = math.pi):
    """Strongest pulse whose leakage stays below ``bound`` on every neighbour.

    Returns (omega, duration): omega is the full Rabi frequency in MHz (the
    on-resonance transition probability is sin^2(pi omega t), so a pi flip
    takes 1/(2 omega) us) and duration = flip_angle / (2 pi omega).
    """
    neighbors = list(neighbors)
    if not neighbors:
        raise NoSeparationError("no neighbouring transitions supplied")
    dmin = min(abs(target - x) for x in neighbors)
    if dmin <= 1e-12 * max(1.0, abs(target)):
        raise NoSeparationError("a neighbouring transition coincides with the target")
    omega = dmin * math.sqrt(bound / (1.0 - bound))
    return omega, flip_angle / (ANGULAR * omega)


def _interaction_pulse(psi: np.ndarray, energies: np.ndarray, v: np.ndarray,
                       nu_drive: float, omega: float, matrix_element: float,
                       duration: float, rwa_cutoff: float = 100.0,
                       tol: float = 1e-10) -> np.ndarray:
    """Evolve a state through one pulse in the static interaction picture.

    The rotating-wave drive couples level pairs (a, b) of the diagonal
    static Hamiltonian through the operator ``v``, keeping pairs whose
    transition frequency lies within ``rwa_cutoff`` of the carrier.  The
    drive amplitude is omega / (2 * matrix_element) so that the resonant
    transition has full Rabi frequency ``omega``.
    """
    amp = 0.5 * omega / matrix_element
    kept = [(a, b, v[a, b]) for a in range(16) for b in range(16)
            if a != b and abs(v[a, b]) > 1e-12 and energies[a] > energies[b]
            and abs(energies[a] - energies[b] - nu_drive) < rwa_cutoff]
    detun = np.array([energies[a] - energies[b] - nu_drive for a, b, _ in kept])
    ia = np.array([a for a, _, _ in kept])
    ib = np.array([b for _, b, _ in kept])
    vab = np.array([x for _, _, x in kept])

    def rhs(t, y):
        cpl = amp * vab * np.exp(-1j * ANGULAR * detun * t)
        out = np.zeros(16, dtype=complex)
        np.add.at(out, ia, -1j * ANGULAR * cpl * y[ib])
        np.add.at(out, ib, -1j * ANGULAR * np.conj(cpl) * y[ia])
        return out

    sol = solve_ivp(rhs, (0.0, duration), psi.astype(complex),
                    rtol=tol, atol=tol * 1e-2)
    if not sol.success:
        raise RuntimeError(f"pulse integration failed: {sol.message}")
    return sol.y[:, -1]


def run_shelving(p: SystemParams, nuclear0: np.ndarray = None,
                 bound: float = 0.01, rwa_cutoff: float = 100.0) -> ProtocolReport:
    """Four-pulse rf/microwave sequence creating (|dd> + |uu>)/sqrt(2).

    Starting from |T0 dd>: an rf pi/2 on nucleus n splits off |T0 ud>, a
    selective microwave pi-pulse shelves the |T0 dd> component in T+, an rf
    pi on nucleus n' completes |T0 ud> -> |T0 uu>, and a final microwave pi
    un-shelves.  Each pulse is planned against its own frequency band: an rf
    pulse against the three lines of its nucleus (the two species are
    band-separated and independently addressable), a microwave pulse against
    the remaining seven electron lines.  States and fidelities are expressed
    in the rotating frame of the static effective Hamiltonian, and the
    sequence is short enough that optical decay is neglected.
    """
    regimes = model.classify_regime(p)
    if any(r is not Regime.ASYMMETRIC for r in regimes.values()):
        raise WrongRegimeError("shelving sequence requires the asymmetric regime")
    if nuclear0 is None:
        nuclear0 = model.basis_state(0, "dd")[:4]
    nuclear0 = algebra.validate_state_vector(nuclear0)
    trans = effective.transition_spectrum(p)
    h0 = effective.effective_hamiltonian(p)
    energies = np.diag(h0).real
    ops = model.spin_operators()
    v_n, v_np, v_e = ops["Sx_n"].real, ops["Sx_np"].real, ops["Sx_e"].real

    mw_target = trans.mw[("+0", "dd")]
    mw_neighbors = [f for key, f in trans.mw.items() if key != ("+0", "dd")]
    plan = [
        ("rf pi/2, nucleus n, T0 line", v_n, 0.5, trans.rf[0],
         [trans.rf[j] for j in (-1, 1)], math.pi / 2.0),
        ("mw pi, shelve dd in T+", v_e, 1.0 / math.sqrt(2.0), mw_target,
         mw_neighbors, math.pi),
        ("rf pi, nucleus n', T0 line", v_np, 0.5, trans.rf_prime[0],
         [trans.rf_prime[j] for j in (-1, 1)], math.pi),
        ("mw pi, un-shelve", v_e, 1.0 / math.sqrt(2.0), mw_target,
         mw_neighbors, math.pi),
    ]

    psi = excited_state(nuclear0, j=0)
    events, durations, omegas = [], [], []
    now = 0.0
    for label, v, mel, freq, neighbors, flip in plan:
        omega, duration = plan_selective_pulse(freq, neighbors, bound=bound,
                                               flip_angle=flip)
        for nb in neighbors:
            assert rabi_leakage(omega, freq - nb) <= bound * (1 + 1e-12)
        psi = _interaction_pulse(psi, energies, v, freq, omega, mel, duration,
                                 rwa_cutoff=rwa_cutoff)
        events.append((now, f"{label}: omega={omega:.4f} MHz, "
                            f"duration={duration:.4f} us"))
        now += duration
        durations.append(duration)
        omegas.append(omega)

    bell = (model.basis_state(2, "dd") + model.basis_state(2, "uu")) / math.sqrt(2.0)
    fidelity = abs(np.vdot(bell, psi)) ** 2
    rho16 = np.outer(psi, psi.conj())
    rho_nuc = ideal_deexcitation(rho16)
    report = ProtocolReport(
        final_nuclear_state=rho_nuc,
        ef=measures.entanglement_of_formation(rho_nuc, validate=False),
        fidelity_to_target=float(fidelity),
        event_log=events,
        diagnostics={"durations": durations, "omegas": omegas,
                     "total_duration": float(sum(durations)), "bound": bound})
    report.validate()
    return report


# ---------------------------------------------------------------------------
# adiabatic CPHASE

def adaptive_simpson(f, a: float, b: float, tol: float = 1e-8) -> float:
    """Recursive adaptive Simpson quadrature with absolute tolerance."""
    def simp(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def rec(x0, x2, f0, f1, f2, whole, tol):
        xm = 0.5 * (x0 + x2)
        lm, rm = 0.5 * (x0 + xm), 0.5 * (xm + x2)
        flm, frm = f(lm), f(rm)
        left = simp(x0, xm, f0, flm, f1)
        right = simp(xm, x2, f1, frm, f2)
        if abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return (rec(x0, xm, f0, flm, f1, left, 0.5 * tol)
                + rec(xm, x2, f1, frm, f2, right, 0.5 * tol))

    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    return rec(a, b, fa, fm, fb, simp(a, b, fa, fm, fb), tol)


def _adiabatic_detunings(p: SystemParams, omega_D: float):
    """(Delta_{i,1}, Delta_{i,2}) per nuclear label for carrier omega_D."""
    trans = effective.transition_spectrum(p)
    d1 = {lab: trans.mw[("0-", lab)] - omega_D for lab in NUCLEAR_LABELS}
    d2 = {lab: trans.mw[("+0", lab)] - omega_D for lab in NUCLEAR_LABELS}
    return d1, d2


def _phase_integrals(p: SystemParams, omega_D: float, Omega0: float,
                     tol: float = 1e-8) -> dict:
    d1, _ = _adiabatic_detunings(p, omega_D)
    out = {}
    for lab in NUCLEAR_LABELS:
        r = d1[lab] / Omega0
        out[lab] = adaptive_simpson(
            lambda x: math.sqrt(r * r + 2.0 * math.exp(-2.0 * x * x)), -3.0, 3.0, tol)
    return out


def adiabatic_phases(p: SystemParams, omega_D: float, Omega0: float,
                     sigma: float, tol: float = 1e-8) -> dict:
    """Dynamic phase of each nuclear state under the Gaussian pulse.

    theta_i is the integrated downward shift of the T0-branch eigenvalue of
    the dispersively decoupled three-level problem,
    theta_i = int (sqrt(Delta_i1^2 + 2 Omega(t)^2) - Delta_i1) / 2 dt,
    evaluated on the envelope support [-3 sigma, 3 sigma] by adaptive
    Simpson quadrature.  Radians.
    """
    d1, d2 = _adiabatic_detunings(p, omega_D)
    if Omega0 / math.sqrt(2.0) >= 0.1 * min(abs(v) for v in d2.values()):
        raise PerturbationCondViolatedError(
            "drive too strong for dispersive decoupling of the upper manifold")
    grals = _phase_integrals(p, omega_D, Omega0, tol)
    return {lab: (ANGULAR * Omega0 * sigma / 2.0) * grals[lab]
            - 0.5 * ANGULAR * d1[lab] * 6.0 * sigma
            for lab in NUCLEAR_LABELS}


def solve_sigma(p: SystemParams, omega_D: float, Omega0: float,
                tol: float = 1e-8) -> float:
    """Envelope width making the conditional phase combination equal pi.

    Solves pi = theta_dd - theta_du - theta_ud + theta_uu; the detuning
    terms cancel in the combination, leaving
    sigma = 2 pi / (Omega0_angular * S) with S the signed integral sum.
    """
    grals = _phase_integrals(p, omega_D, Omega0, tol)
    s = grals["dd"] - grals["du"] - grals["ud"] + grals["uu"]
    if abs(s) < 1e-12:
        raise NoSolutionError("signed phase-integral combination vanishes")
    if s < 0:
        raise NoSolutionError("phase combination has the wrong sign; place the "
                              "carrier on the other side of the transition manifold")
    return 2.0 * math.pi / (ANGULAR * Omega0 * s)


def _adiabatic_feasible(p, omega_D, Omega0, sigma) -> bool:
    d1, d2 = _adiabatic_detunings(p, omega_D)
    if min(d1.values()) <= 0:
        return False
    if Omega0 / math.sqrt(2.0) >= 0.1 * min(abs(v) for v in d2.values()):
        return False
    for v in d1.values():
        if ANGULAR * Omega0 / (ANGULAR * v) ** 2 >= 0.1 * sigma:
            return False
    return True


def optimize_adiabatic(p: SystemParams, tau: float,
                       offsets=None, powers=None, refine_rounds: int = 2,
                       nuclear0: np.ndarray = None):
    """Minimize the pulse duration 6 sigma under the adiabaticity constraints.

    Grid search over carrier offsets below the lower microwave manifold and
    logarithmic drive powers, refined locally; the entanglement of formation
    is evaluated once, at the optimum, with :func:`run_adiabatic`.
    Returns (omega_D*, Omega0*, sigma*, EF*).
    """
    trans = effective.transition_spectrum(p)
    base = min(trans.mw[("0-", lab)] for lab in NUCLEAR_LABELS)
    if offsets is None:
        offsets = np.geomspace(0.5, 300.0, 36)
    if powers is None:
        powers = np.geomspace(0.05, 60.0, 36)

    def evaluate(offset, power):
        omega_D = base - offset
        try:
            sigma = solve_sigma(p, omega_D, power)
        except NoSolutionError:
            return None
        if not _adiabatic_feasible(p, omega_D, power, sigma):
            return None
        return (6.0 * sigma, omega_D, power, sigma)

    best = None
    for off in offsets:
        for pw in powers:
            cand = evaluate(off, pw)
            if cand and (best is None or cand[0] < best[0]):
                best, best_off = cand, off
    if best is None:
        raise InfeasibleError("no grid point satisfies the adiabatic constraints")
    for _ in range(refine_rounds):
        offs = np.geomspace(best_off / 2.0, best_off * 2.0, 9)
        pows = np.geomspace(best[2] / 2.0, best[2] * 2.0, 9)
        for off in offs:
            for pw in pows:
                cand = evaluate(off, pw)
                if cand and cand[0] < best[0]:
                    best, best_off = cand, off
    _, omega_D, Omega0, sigma = best
    pulse = PulseSpec(shape="gaussian", omega_drive=omega_D, power=Omega0,
                      sigma=sigma, target="0- manifold, off-resonant")
    ef_star = run_adiabatic(p, pulse, tau, nuclear0=nuclear0).ef
    return omega_D, Omega0, sigma, ef_star


def run_adiabatic(p: SystemParams, pulse: PulseSpec, tau: float,
                  nuclear0: np.ndarray = None, tol: float = 1e-8) -> ProtocolReport:
    """Gaussian-envelope adiabatic CPHASE with optical decay.

    Integrates the Lindblad equation whose coherent part is the dispersively
    decoupled driven Hamiltonian (T- coupled to T0, T+ spectator) and whose
    dissipator uses the twelve constant computational decay channels of the
    undriven asymmetric system -- a deliberate overestimate of the decay
    damage.  After the pulse the remaining excited amplitudes are
    transferred to the ground block by the ideal de-excitation.
    """
    if pulse.shape != "gaussian":
        raise ValueError("run_adiabatic requires a gaussian PulseSpec")
    if nuclear0 is None:
        nuclear0 = 0.5 * np.ones(4, dtype=complex)
    nuclear0 = algebra.validate_state_vector(nuclear0)
    sigma, omega_d, omega0 = pulse.sigma, pulse.omega_drive, pulse.power
    d1, d2 = _adiabatic_detunings(p, omega_d)

    h_static = np.zeros((16, 16), dtype=complex)
    sz = (0.5, -0.5)
    for i, (s1, s2) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        h_static[i, i] = -p.omega_n * sz[s1] - p.omega_n_prime * sz[s2]
    for i, lab in enumerate(NUCLEAR_LABELS):
        h_static[4 + i, 4 + i] = d1[lab]          # T- block
        h_static[12 + i, 12 + i] = d2[lab]        # T+ block (spectator)
    coupling = np.zeros((16, 16), dtype=complex)
    for i in range(4):
        coupling[4 + i, 8 + i] = coupling[8 + i, 4 + i] = 1.0 / math.sqrt(2.0)

    h_undriven = effective.effective_hamiltonian(p)
    channels = dynamics.decay_channels(h_undriven, tau, omega_0=p.omega_0)
    spec = dynamics.MasterEqSpec(channels=channels, exempt_pairs=[],
                                 hamiltonian=None)

    def hamiltonian_t(t):
        return h_static + (omega0 * math.exp(-(t / sigma) ** 2)) * coupling

    psi = excited_state(nuclear0, j=0)
    rho = np.outer(psi, psi.conj())
    rho = dynamics.integrate_master(rho, spec, t_end=3.0 * sigma,
                                    t_start=-3.0 * sigma, tol=tol,
                                    hamiltonian_t=hamiltonian_t)
    rho_nuc = ideal_deexcitation(rho)
    combo = (np.angle(rho_nuc[0, 1]) - np.angle(rho_nuc[2, 3])) % (2.0 * math.pi) \
        if min(abs(rho_nuc[0, 1]), abs(rho_nuc[2, 3])) > 1e-12 else float("nan")
    theta = adiabatic_phases(p, omega_d, omega0, sigma)
    target = np.array([math.cos(0.0)] * 4, dtype=complex)
    target = np.exp(1j * np.array([theta[lab] for lab in NUCLEAR_LABELS])) * nuclear0
    report = ProtocolReport(
        final_nuclear_state=rho_nuc,
        ef=measures.entanglement_of_formation(rho_nuc, validate=False),
        fidelity_to_target=float((target.conj() @ rho_nuc @ target).real),
        event_log=[(-3.0 * sigma, "gaussian pulse on"),
                   (3.0 * sigma, "pulse off; ideal de-excitation")],
        diagnostics={"sigma": sigma, "duration": 6.0 * sigma,
                     "phase_combination": combo,
                     "residual_excited": dynamics.excited_population(rho),
                     "predicted_phases": theta})
    report.validate()
    return report
