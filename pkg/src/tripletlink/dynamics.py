"""Open-system evolution: decay channels, master equations, emission spectra.

Pictures and units
------------------
Hamiltonians enter in MHz (ordinary frequencies); every dynamical phase is
computed as ``2*pi * nu * t`` with ``t`` in microseconds (:data:`ANGULAR`).
Channel frequencies are stored in angular units (rad/us) because they feed
the ``exp(i(w'-w)t)`` cross terms and the secularization rule directly.

The Schroedinger-picture generator of the optical-decay master equation is
time independent; transforming with exp(iHt) produces the familiar
interaction-picture form in which the coherent term disappears and retained
cross terms oscillate at frequency differences.  A ``MasterEqSpec`` with
``hamiltonian=None`` therefore integrates in the interaction picture, which
is the efficient choice whenever only the decay dynamics matters: the ground
block is then an exact sink and the state freezes once the excited block has
emptied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import algebra, model
from .model import DIM, GROUND_DIM, SUBLEVELS, SystemParams

# conversion between quoted MHz values and angular frequencies (rad/us)
ANGULAR = 2.0 * math.pi

# population threshold below which the excited block counts as empty;
# chosen above integrator noise (atol) and far below every test tolerance
EXCITED_EMPTY = 1e-8


class StepSizeUnderflowError(RuntimeError):
    """Adaptive integration stalled (step size underflow)."""


class UnsupportedSupportError(ValueError):
    """State has weight outside the subspace required by the operation."""


def dipole_operator() -> np.ndarray:
    """Optical dipole operator: orbital lowering, spin conserving.

    Maps each |e T_j x> to |0 x> with unit amplitude, plus the Hermitian
    conjugate.  Its restriction to a single excited eigenstate has unit
    emission strength, so all radiative rates are set by the lifetimes alone.
    """
    lower = np.zeros((4, 4), dtype=complex)
    lower[0, 1] = lower[0, 2] = lower[0, 3] = 1.0
    return algebra.kron(lower + lower.conj().T, np.eye(4))


@dataclass(frozen=True)
class DecayChannel:
    """One incoherent emission channel A(w) from the excited to the ground block.

    frequency is angular (rad/us) and includes the omega_0 optical offset;
    rate is Gamma = 1/(2 tau_j) in 1/us; amplitude is the Frobenius norm of
    the transition operator (weak satellite lines have amplitude << 1).
    """
    frequency: float
    operator: np.ndarray = field(repr=False)
    rate: float
    sublevel: int
    amplitude: float


def _cluster(w: np.ndarray, tol: float):
    groups, cur = [], [0]
    for i in range(1, len(w)):
        if w[i] - w[cur[-1]] < tol:
            cur.append(i)
        else:
            groups.append(cur)
            cur = [i]
    groups.append(cur)
    return groups


def decay_channels(h: np.ndarray, tau, omega_0: float = 0.0,
                   cluster_tol_factor: float = 1e-9,
                   amplitude_cutoff: float = 1e-9) -> list:
    """Emission channels of a 16x16 Hamiltonian with the standard block layout.

    The ground (indices 0..3) and excited (4..15) sectors are diagonalized
    separately -- they are exactly uncoupled -- and eigenvalues within
    ``cluster_tol_factor * ||h||`` are merged into one eigenspace before the
    transition operators are formed, so degenerate lines do not fragment.
    Only downward (excited -> ground) channels are emitted; absorption is
    absent because the thermal photon occupation is negligible.

    Args:
        h: Hamiltonian in MHz with no ground-excited matrix elements.
        tau: single lifetime or (tau_minus, tau_zero, tau_plus) in us; a
            channel uses the lifetime of its dominant source sublevel.
        omega_0: optical excitation energy (MHz), added to the stored
            frequencies as a common offset.
    """
    h = np.asarray(h)
    cross = np.abs(h[:GROUND_DIM, GROUND_DIM:]).max()
    if cross > 1e-9 * max(1.0, np.abs(h).max()):
        raise ValueError("Hamiltonian couples ground and excited blocks")
    taus = (tau, tau, tau) if np.isscalar(tau) else tuple(tau)
    wg, vg = algebra.eigh(h[:GROUND_DIM, :GROUND_DIM])
    we, ve = algebra.eigh(h[GROUND_DIM:, GROUND_DIM:])
    tol = cluster_tol_factor * max(1.0, np.abs(h).max())
    dip = dipole_operator()
    channels = []
    for ge in _cluster(we, tol):
        pe = np.zeros((DIM, DIM), dtype=complex)
        pe[GROUND_DIM:, GROUND_DIM:] = algebra.projector(ve[:, ge])
        weights = [np.trace(pe[4 * b:4 * b + 4, 4 * b:4 * b + 4]).real
                   for b in (1, 2, 3)]
        sublevel = SUBLEVELS[int(np.argmax(weights))]
        rate = 1.0 / (2.0 * taus[int(np.argmax(weights))])
        e_exc = float(np.mean(we[ge]))
        for gg in _cluster(wg, tol):
            pg = np.zeros((DIM, DIM), dtype=complex)
            pg[:GROUND_DIM, :GROUND_DIM] = algebra.projector(vg[:, gg])
            op = pg @ dip @ pe
            amp = float(np.linalg.norm(op))
            if amp < amplitude_cutoff:
                continue
            freq = ANGULAR * (e_exc - float(np.mean(wg[gg])) + omega_0)
            channels.append(DecayChannel(frequency=freq, operator=op,
                                         rate=rate, sublevel=sublevel,
                                         amplitude=amp))
    return channels


def rate_for_frequency(omega: float, tau: float) -> float:
    """Phenomenological spontaneous-emission rate: 1/(2 tau) for omega > 0 else 0.

    ``omega`` is the full optical frequency including the omega_0 offset.
    """
    return 1.0 / (2.0 * tau) if omega > 0 else 0.0


def find_exempt_pairs(channels, tau: float, threshold: float = 30.0,
                      same_sublevel: bool = False,
                      min_amplitude: float = 0.0) -> list:
    """Channel pairs whose splitting is too small for the secular approximation.

    A pair (i, j) is exempt -- its oscillating cross terms are retained --
    iff |w_i - w_j| < threshold / tau.  Optional filters restrict pairing to
    channels from the same triplet sublevel or above an amplitude floor.
    """
    out = []
    for i in range(len(channels)):
        for j in range(i + 1, len(channels)):
            ci, cj = channels[i], channels[j]
            if same_sublevel and ci.sublevel != cj.sublevel:
                continue
            if min(ci.amplitude, cj.amplitude) < min_amplitude:
                continue
            if abs(ci.frequency - cj.frequency) < threshold / tau:
                out.append((i, j))
    return out


@dataclass
class MasterEqSpec:
    """Channels, exempt pairs and the optional coherent Hamiltonian.

    ``hamiltonian`` is in MHz; ``None`` selects the interaction picture
    (no coherent term).  ``exempt_pairs`` lists unordered index pairs whose
    cross terms survive the rotating-wave approximation.
    """
    channels: list
    exempt_pairs: list = field(default_factory=list)
    hamiltonian: np.ndarray | None = None

    def __post_init__(self):
        self._a = np.stack([c.operator for c in self.channels]) \
            if self.channels else np.zeros((0, DIM, DIM), dtype=complex)
        self._adag = self._a.conj().transpose(0, 2, 1)
        self._gamma = np.array([c.rate for c in self.channels])
        self._freq = np.array([c.frequency for c in self.channels])
        self._gsum = np.einsum("k,kij->ij", self._gamma, self._adag @ self._a) \
            if self.channels else np.zeros((DIM, DIM), dtype=complex)
        dim = self.channels[0].operator.shape[0] if self.channels else DIM
        if self.hamiltonian is not None and self.hamiltonian.shape != (dim, dim):
            raise algebra.DimensionMismatchError("hamiltonian/channel dimensions differ")
        self.dim = dim


def secular_dissipator(rho: np.ndarray, spec: MasterEqSpec) -> np.ndarray:
    """Sum over channels of Gamma * (2 A rho A+ - {A+A, rho})."""
    if not spec.channels:
        return np.zeros_like(rho)
    gain = np.einsum("k,kij->ij", 2.0 * spec._gamma, spec._a @ rho @ spec._adag)
    return gain - (spec._gsum @ rho + rho @ spec._gsum)


def _cross_terms(t: float, rho: np.ndarray, spec: MasterEqSpec) -> np.ndarray:
    out = np.zeros_like(rho)
    for (i, j) in spec.exempt_pairs:
        for (k, l) in ((i, j), (j, i)):
            ph = np.exp(1j * (spec._freq[l] - spec._freq[k]) * t)
            x = spec._gamma[k] * ph * (spec._a[k] @ rho @ spec._adag[l]
                                       - spec._adag[l] @ spec._a[k] @ rho)
            out += x + x.conj().T
    return out


def secular_rhs(rho: np.ndarray, spec: MasterEqSpec) -> np.ndarray:
    """Fully secular master equation right-hand side (trace free)."""
    out = secular_dissipator(rho, spec)
    if spec.hamiltonian is not None:
        h = spec.hamiltonian
        out = out - 1j * ANGULAR * (h @ rho - rho @ h)
    return out


def partial_rwa_rhs(t: float, rho: np.ndarray, spec: MasterEqSpec) -> np.ndarray:
    """Secular terms plus oscillating cross terms for the exempt pairs."""
    out = secular_rhs(rho, spec)
    if spec.exempt_pairs:
        out = out + _cross_terms(t, rho, spec)
    return out


def integrate_master(rho0: np.ndarray, spec: MasterEqSpec, t_end: float,
                     tol: float = 1e-8, t_start: float = 0.0,
                     sample_times=None, hamiltonian_t=None):
    """Adaptive integration of the (partial-RWA) master equation.

    Uses an embedded Runge-Kutta pair with step rejection; the state is
    re-symmetrized at every sampled point and at the end.  ``hamiltonian_t``
    may supply a time-dependent coherent Hamiltonian (MHz) overriding
    ``spec.hamiltonian``.

    Returns the final density matrix, or ``(final, samples)`` when
    ``sample_times`` is given (samples is a list of density matrices at the
    requested times).
    """
    rho0 = np.asarray(rho0, dtype=complex)
    dim = rho0.shape[0]

    if hamiltonian_t is None:
        def rhs(t, y):
            rho = y.reshape(dim, dim)
            return partial_rwa_rhs(t, rho, spec).ravel()
    else:
        def rhs(t, y):
            rho = y.reshape(dim, dim)
            h = hamiltonian_t(t)
            out = secular_dissipator(rho, spec)
            out = out - 1j * ANGULAR * (h @ rho - rho @ h)
            if spec.exempt_pairs:
                out = out + _cross_terms(t, rho, spec)
            return out.ravel()

    t_eval = None
    n_samples = 0
    if sample_times is not None:
        req = np.asarray(sample_times, dtype=float)
        n_samples = req.size
        t_eval = np.append(req, t_end)   # always land on t_end for the final state
    sol = solve_ivp(rhs, (t_start, t_end), rho0.ravel(), method="RK45",
                    rtol=tol, atol=tol * 1e-2, t_eval=t_eval, dense_output=False)
    if sol.status == -1:
        raise StepSizeUnderflowError(sol.message)
    if not sol.success:
        raise RuntimeError(f"integration failed: {sol.message}")

    def _sym(y):
        r = y.reshape(dim, dim)
        return 0.5 * (r + r.conj().T)

    if sample_times is not None:
        samples = [_sym(sol.y[:, k]) for k in range(n_samples)]
        return _sym(sol.y[:, -1]), samples
    return _sym(sol.y[:, -1])


def integrate_decay(rho0: np.ndarray, spec: MasterEqSpec, duration: float,
                    tol: float = 1e-8, horizon: float | None = None) -> np.ndarray:
    """Interaction-picture decay over a possibly very long duration.

    Valid only for specs without a coherent term whose channels all map the
    excited block to the ground block: the ground block is then an exact
    sink, so once the excited population falls below EXCITED_EMPTY the state
    is frozen and the remaining time can be skipped.  ``horizon`` bounds the
    chunk length (default 20 times the slowest channel lifetime).
    """
    if spec.hamiltonian is not None:
        raise ValueError("integrate_decay requires an interaction-picture spec")
    if horizon is None:
        slowest = max((1.0 / (2.0 * c.rate) for c in spec.channels), default=duration)
        horizon = 20.0 * slowest
    rho = np.asarray(rho0, dtype=complex)
    t = 0.0
    while t < duration:
        t_next = min(duration, t + horizon)
        rho = integrate_master(rho, spec, t_next, tol=tol, t_start=t)
        t = t_next
        if excited_population(rho) < EXCITED_EMPTY:
            break
    return rho


def excited_population(rho: np.ndarray) -> float:
    """Total population of the excited orbital block."""
    return float(np.trace(rho[GROUND_DIM:, GROUND_DIM:]).real)


def final_nuclear_state_closed_form(rho0: np.ndarray) -> np.ndarray:
    """Post-decay 4x4 nuclear state of an excited-block initial condition.

    Valid in the regime where the central T0 splitting times the lifetime is
    small.  Middle-pair elements (a, b in {du, ud}) combine the T0 block
    unchanged with the flip-averaged T+- blocks; the stretched populations
    (dd, uu) pass through unchanged sublevel by sublevel, since those states
    have no flip-flop partner and decay through a single channel each.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if float(np.trace(rho0[:GROUND_DIM, :GROUND_DIM]).real) > 1e-12:
        raise UnsupportedSupportError("initial state has ground-block weight")
    out = np.zeros((4, 4), dtype=complex)
    blocks = {j: rho0[4 * b:4 * b + 4, 4 * b:4 * b + 4]
              for j, b in ((-1, 1), (0, 2), (1, 3))}
    flip = {1: 2, 2: 1}
    for a in (0, 3):
        out[a, a] = blocks[0][a, a] + blocks[-1][a, a] + blocks[1][a, a]
    for a in (1, 2):
        for b in (1, 2):
            val = blocks[0][a, b]
            for j in (-1, 1):
                val += 0.5 * (blocks[j][a, b] + blocks[j][flip[a], flip[b]])
            out[a, b] = val
    return out


def rotating_frame(x: np.ndarray, phi, t: float) -> np.ndarray:
    """Apply the nuclear-pair rotating frame exp(-i 2pi phi S_z t) per nucleus.

    ``phi`` is a frequency in MHz, either a scalar (both nuclei) or a pair
    (phi_n, phi_n').  Vectors (4,) transform as U x, operators and density
    matrices (4, 4) as U x U+.  Computational-basis populations are invariant.
    """
    if np.isscalar(phi):
        phi = (phi, phi)
    sz = np.array([0.5, -0.5])
    phases = np.array([phi[0] * sz[s1] + phi[1] * sz[s2]
                       for s1 in (0, 1) for s2 in (0, 1)])
    u = np.exp(-1j * ANGULAR * phases * t)
    x = np.asarray(x, dtype=complex)
    if x.ndim == 1:
        return u * x
    return (u[:, None] * x) * u.conj()[None, :]


def channel_weights(channels, rho0: np.ndarray) -> np.ndarray:
    """Population about to decay through each channel: Tr(A+A rho0)."""
    return np.array([np.trace(algebra.dagger(c.operator) @ c.operator @ rho0).real
                     for c in channels])


def emission_spectrum(channels, grid, weights=None) -> np.ndarray:
    """Sum of lifetime-broadened Lorentzians over the channels.

    Each channel with rate Gamma = 1/(2 tau) contributes
    ``w * (1/tau) / ((omega - omega_i)^2 + (1/tau)^2)`` on the angular
    frequency grid; ``weights`` defaults to 1 per channel.
    """
    grid = np.asarray(grid, dtype=float)
    if weights is None:
        weights = np.ones(len(channels))
    out = np.zeros_like(grid)
    for c, w in zip(channels, weights):
        gamma = 2.0 * c.rate          # linewidth 1/tau
        out += w * gamma / ((grid - c.frequency) ** 2 + gamma ** 2)
    return out
