"""Entanglement and state-quality measures for two qubits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import algebra

MAX_ENTANGLING_POWER = 2.0 / 9.0

_SY = np.array([[0, -1j], [1j, 0]])
_YY = np.kron(_SY, _SY)


def purity(rho: np.ndarray) -> float:
    """Tr(rho^2)."""
    rho = np.asarray(rho)
    return float(np.trace(rho @ rho).real)


def linear_entropy(rho4: np.ndarray, validate: bool = True) -> float:
    """1 - Tr(rho_A^2) with rho_A the first qubit's reduced state."""
    rho4 = np.asarray(rho4, dtype=complex)
    if validate:
        algebra.validate_density_matrix(rho4, herm_tol=1e-8, trace_tol=1e-8)
    rho_a = algebra.partial_trace(rho4, (2, 2), keep=(0,))
    return 1.0 - float(np.trace(rho_a @ rho_a).real)


def concurrence(rho4: np.ndarray, validate: bool = True) -> float:
    """Wootters concurrence of a two-qubit density matrix."""
    rho4 = np.asarray(rho4, dtype=complex)
    if validate:
        algebra.validate_density_matrix(rho4, herm_tol=1e-8, trace_tol=1e-8)
    r = rho4 @ _YY @ rho4.conj() @ _YY
    ev = np.linalg.eigvals(r).real
    ev = np.sqrt(np.clip(ev, 0.0, None))   # tiny negatives are roundoff
    ev.sort()
    return max(0.0, ev[-1] - ev[-2] - ev[-3] - ev[-4])


def binary_entropy(x: float) -> float:
    """h(x) with the removable endpoint singularities set to 0."""
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def entanglement_of_formation(rho4: np.ndarray, validate: bool = True) -> float:
    """EF = h((1 + sqrt(1 - C^2)) / 2), monotone in the concurrence."""
    c = concurrence(rho4, validate=validate)
    return binary_entropy(0.5 * (1.0 + math.sqrt(max(0.0, 1.0 - c * c))))


def ef_from_concurrence(c: float) -> float:
    return binary_entropy(0.5 * (1.0 + math.sqrt(max(0.0, 1.0 - c * c))))


# ---------------------------------------------------------------------------
# entangling power

@dataclass(frozen=True)
class EntanglingPowerEstimate:
    """Monte-Carlo mean linear entropy over Haar product states."""
    mean: float
    std_error: float
    samples: int
    seed: int


def haar_product_states(n: int, rng: np.random.Generator) -> np.ndarray:
    """(n, 4) array of Haar-uniform two-qubit product states."""
    z = rng.normal(size=(n, 2, 2)) + 1j * rng.normal(size=(n, 2, 2))
    z /= np.linalg.norm(z, axis=2, keepdims=True)
    return np.einsum("ni,nj->nij", z[:, 0], z[:, 1]).reshape(n, 4)


def entangling_power_mc(u: np.ndarray, samples: int = 100_000,
                        seed: int = 0, block: int = 20_000) -> EntanglingPowerEstimate:
    """Monte-Carlo entangling power of a two-qubit unitary.

    Mean linear entropy of U |a>|b> over independent Haar-uniform single
    qubit states; deterministic for a given seed.  Samples are drawn from a
    single seeded stream in blocks (the block size only limits memory, it
    does not change the result).
    """
    u = np.asarray(u, dtype=complex)
    if not algebra.is_unitary(u, 1e-10):
        raise algebra.NotUnitaryError("entangling power requires a unitary")
    rng = np.random.default_rng(seed)
    total, total2, done = 0.0, 0.0, 0
    while done < samples:
        n = min(block, samples - done)
        psi = haar_product_states(n, rng) @ u.T
        m = psi.reshape(n, 2, 2)
        t = m @ m.conj().transpose(0, 2, 1)
        ent = 1.0 - np.einsum("nij,nji->n", t, t).real
        total += ent.sum()
        total2 += (ent * ent).sum()
        done += n
    mean = total / samples
    var = max(0.0, total2 / samples - mean * mean)
    return EntanglingPowerEstimate(mean=float(mean),
                                   std_error=float(math.sqrt(var / samples)),
                                   samples=samples, seed=seed)


def entangling_power_symmetric(a_j: float, t: float) -> float:
    """Closed-form entangling power of the flip-flop evolution.

    e = (1/9) (3 + cos(2 a t)) sin^2(a t); period pi/a, maximum 2/9 at
    a*t = pi/2 mod pi.  ``a_j`` and ``t`` must multiply to a phase in
    radians (i.e. pass an angular coupling, or absorb 2*pi into t).
    """
    x = a_j * t
    return (3.0 + math.cos(2.0 * x)) * math.sin(x) ** 2 / 9.0


def entangling_power_lemma(b: float, beta: float) -> float:
    """Entangling power of a unitary with product stretched states.

    For eigenvectors |dd>, -a|du>+b|ud>, b|du>+a|ud>, |uu> (a, b real,
    a^2 + b^2 = 1) and eigenvalues with E1 - E2 - E3 + E4 = 0:
    e = (16/9) q sin^2(beta/2) - (32/9) q^2 sin^4(beta/2) with q = b^2 - b^4
    and beta the middle splitting times t.  Symmetric under b <-> a.
    """
    if not -1.0 <= b <= 1.0:
        raise ValueError("amplitude b must lie in [-1, 1]")
    q = b * b - b ** 4
    s2 = math.sin(0.5 * beta) ** 2
    return (16.0 / 9.0) * q * s2 - (32.0 / 9.0) * q * q * s2 * s2


def crossover_entangling_power(a_j: float, chi_j: float, t: float) -> float:
    """Entangling power at asymmetry chi = |f/a|.

    Reduces to :func:`entangling_power_symmetric` at chi = 0; equals the
    lemma form with c^2 = (1 + chi/sqrt(1+chi^2))/2 and
    beta = 2 t |a| sqrt(1+chi^2).
    """
    if chi_j < 0:
        raise ValueError("chi must be non-negative")
    g = 1.0 + chi_j * chi_j
    x = a_j * t * math.sqrt(g)
    return (3.0 + 4.0 * chi_j * chi_j + math.cos(2.0 * x)) * math.sin(x) ** 2 / (9.0 * g * g)


def max_entangling_power(chi: float) -> float:
    """Peak entangling power over time: m = (2/9)(1 + 2 chi^2)/(1 + chi^2)^2."""
    if chi < 0:
        raise ValueError("chi must be non-negative")
    g = 1.0 + chi * chi
    return (2.0 / 9.0) * (1.0 + 2.0 * chi * chi) / (g * g)
