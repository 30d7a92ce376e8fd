"""Second-order perturbative spectra and effective block Hamiltonians.

All outputs are in the same MHz units as the inputs (see model docstring).
Sublevels are indexed j in (-1, 0, +1); nuclear-pair eigenvector components
refer to the (du, ud) middle pair unless stated otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import algebra, model
from .model import (KFACTOR, NUCLEAR_LABELS, SUBLEVELS, SUBLEVEL_BLOCK,
                    PerturbationInvalidError, Regime, SystemParams)


class WrongRegimeError(ValueError):
    """Operation called outside its validity regime."""


MW_PAIRS = ("+0", "0-")   # microwave transition manifolds T+<->T0 and T0<->T-


def _require_perturbative(p: SystemParams):
    if not p.perturbative_ok:
        raise PerturbationInvalidError(
            "couplings are not small compared to omega_e; perturbation theory invalid")


def _base_energies(p: SystemParams, j: int):
    """Second-order symmetric energies (E1, E2, E3, E4) for sublevel j."""
    a = model.second_order_couplings(p)["a"]
    eps = {-1: p.omega_n - p.A + 2 * a[-1],
           0: p.omega_n + 2 * a[1],
           1: p.omega_n + p.A}
    dlt = {-1: -2 * a[-1], 0: -2 * a[0], 1: 2 * a[1]}
    e2 = -j * p.omega_e + abs(j) * p.D
    e3 = e2 - dlt[j]
    return (e3 - eps[j], e2, e3, e2 + eps[j]), eps[j], dlt[j]


@dataclass(frozen=True)
class SymmetricSpectrum:
    """Couplings, splittings and second-order energies of a symmetric system.

    ``energies[j]`` holds (E_{j,1}, ..., E_{j,4}); ``eigvecs`` has the 12
    approximate excited eigenvectors as columns, ordered (j, i) with
    j = -1, 0, +1, in the 12-dim excited basis.
    """
    a_plus: float
    a_minus: float
    a_zero: float
    eps: dict
    delta: dict
    phi: dict
    energies: dict
    eigvecs: np.ndarray = field(repr=False)


def symmetric_spectrum(p: SystemParams) -> SymmetricSpectrum:
    """Second-order spectrum of a symmetric system (f_j = 0 for all j)."""
    _require_perturbative(p)
    regimes = model.classify_regime(p)
    if any(r is not Regime.SYMMETRIC for r in regimes.values()):
        raise WrongRegimeError("system is not symmetric (f_j != 0)")
    a = model.second_order_couplings(p)["a"]
    eps, dlt, phi, energies = {}, {}, {}, {}
    vecs = np.zeros((12, 12))
    s = 1.0 / math.sqrt(2.0)
    for col, j in enumerate(SUBLEVELS):
        (e1, e2, e3, e4), eps[j], dlt[j] = _base_energies(p, j)
        energies[j] = (e1, e2, e3, e4)
        b = (model.SUBLEVEL_BLOCK[j] - 1) * 4
        v = np.zeros((12, 4))
        v[b + 0, 0] = 1.0                       # |T_j dd>
        v[b + 1, 1], v[b + 2, 1] = -s, s        # (-|du> + |ud>)/sqrt2
        v[b + 1, 2], v[b + 2, 2] = s, s         # (+|du> + |ud>)/sqrt2
        v[b + 3, 3] = 1.0                       # |T_j uu>
        vecs[:, 4 * col:4 * col + 4] = v
    phi = {1: -p.omega_n - p.A - a[1],
           -1: -p.omega_n + p.A - a[-1],
           0: -p.omega_n - a[-1] - a[1]}
    return SymmetricSpectrum(a_plus=a[1], a_minus=a[-1], a_zero=a[0],
                             eps=eps, delta=dlt, phi=phi,
                             energies=energies, eigvecs=vecs)


def symmetric_block_xy(s: SymmetricSpectrum, j: int) -> np.ndarray:
    """Rotating-frame effective Hamiltonian of sublevel j: k(j)*2a_j*(XX+YY).

    4x4 on the nuclear pair; nonzero only on the (du, ud) block with
    off-diagonal element k(j)*a_j.
    """
    a = {-1: s.a_minus, 0: s.a_zero, 1: s.a_plus}[j]
    h = np.zeros((4, 4), dtype=complex)
    h[1, 2] = h[2, 1] = KFACTOR[j] * a
    return h


def asymmetric_block(p: SystemParams, j: int) -> np.ndarray:
    """Diagonal effective Hamiltonian phi'_j S_z,n' + phi_j S_z,n (4x4)."""
    if model.classify_regime(p)[j] is not Regime.ASYMMETRIC:
        raise WrongRegimeError(f"sublevel {j:+d} is not in the asymmetric regime")
    ph, php = rotating_frame_frequencies(p)
    sz = (0.5, -0.5)
    diag = [ph[j] * sz[s1] + php[j] * sz[s2]
            for s1 in (0, 1) for s2 in (0, 1)]
    return np.diag(np.array(diag, dtype=complex))


def rotating_frame_frequencies(p: SystemParams):
    """phi_j and phi'_j for both nuclei, keyed by sublevel."""
    c = model.second_order_couplings(p)

    def trio(omega, hf, a):
        return {1: -omega - hf - a[1], -1: -omega + hf - a[-1],
                0: -omega - a[-1] - a[1]}
    return (trio(p.omega_n, p.A, c["a"]),
            trio(p.omega_n_prime, p.A_prime, c["a_prime"]))


@dataclass(frozen=True)
class CrossoverSpectrum:
    """Spectrum interpolating between the symmetric and asymmetric limits.

    ``alpha[j]`` maps to a (2, 2) array of real middle-pair amplitudes in
    the sqrt(2)-prefactor convention: row 0 is the lower branch (index 2),
    row 1 the upper branch (index 3); columns are the (du, ud) components.
    Each row has squared norm 2.  ``Delta1``/``Delta2`` are the fractional
    asymmetries (+-inf when omega_n = 0 with unequal Zeeman splittings).
    """
    Delta1: float
    Delta2: float
    f: dict
    chi: dict
    alpha: dict
    energies: dict


def crossover_spectrum(p: SystemParams) -> CrossoverSpectrum:
    """Middle-pair mixing and energies with the asymmetry as perturbation."""
    _require_perturbative(p)
    a = model.second_order_couplings(p)["a"]
    f = model.asymmetry_strengths(p)
    if p.omega_n != 0.0:
        delta1 = (p.omega_n_prime - p.omega_n) / p.omega_n
    else:
        dw = p.omega_n_prime - p.omega_n
        delta1 = math.copysign(math.inf, dw) if dw != 0 else 0.0
    delta2 = (p.A_prime - p.A) / p.A if p.A != 0 else (
        math.copysign(math.inf, p.A_prime - p.A) if p.A_prime != p.A else 0.0)
    chi, alpha, energies = {}, {}, {}
    for j in SUBLEVELS:
        aj, fj = a[j], f[j]
        r = math.hypot(aj, fj)
        chi[j] = abs(fj / aj) if aj != 0 else math.inf
        sgn = math.copysign(1.0, aj)
        # middle-pair matrix [[-f, a], [a, f]] (up to the block sign k(j));
        # branch 2 belongs to the eigenvalue -sgn(a)*r, branch 3 to +sgn(a)*r
        if r == 0.0:
            lo, hi = np.array([-1.0, 1.0]), np.array([1.0, 1.0])
        else:
            lo = np.array([aj, fj - sgn * r])
            hi = np.array([aj, fj + sgn * r])
            lo = lo / np.linalg.norm(lo) * math.sqrt(2.0)
            hi = hi / np.linalg.norm(hi) * math.sqrt(2.0)
            # fix overall signs to the symmetric-limit rays (-1, 1) and (1, 1)
            if lo[1] < 0:
                lo = -lo
            if hi[0] < 0:
                hi = -hi
        alpha[j] = np.vstack([lo, hi])
        (e1, e2, _e3, e4), _, _ = _base_energies(p, j)
        k = KFACTOR[j]
        energies[j] = (e1 + k * fj,
                       e2 + k * (aj - sgn * r),
                       e2 + k * (aj + sgn * r),
                       e4 - k * fj)
    return CrossoverSpectrum(Delta1=delta1, Delta2=delta2, f=f, chi=chi,
                             alpha=alpha, energies=energies)


def mixing_corrections(p: SystemParams) -> list:
    """First-order computational-basis mixing magnitudes (diagnostics)."""
    out = []
    for omega, hf in ((p.omega_n, p.A), (p.omega_n_prime, p.A_prime)):
        for sign in (+1.0, -1.0):
            out.append(abs(hf) / (math.sqrt(2.0) * abs(p.D + sign * (p.omega_e + omega))))
    return out


@dataclass(frozen=True)
class TransitionSpectrum:
    """Dipole-allowed transition frequencies of the asymmetric system (MHz).

    ``rf[j]`` / ``rf_prime[j]`` are the nuclear lines of n and n' in
    sublevel j; ``mw[(pair, label)]`` are the eight electron lines with
    pair in ("+0", "0-") and label in ("dd", "du", "ud", "uu").
    """
    rf: dict
    rf_prime: dict
    mw: dict


def transition_spectrum(p: SystemParams, check_tol_factor: float = 5.0) -> TransitionSpectrum:
    """Closed-form rf and microwave lines, validated against exact energies.

    Every returned frequency is compared with the corresponding eigenvalue
    difference of the exact excited block; a deviation beyond
    ``check_tol_factor * max_j(|a_j|, |a'_j|)`` raises ValueError.
    """
    regimes = model.classify_regime(p)
    if any(r is not Regime.ASYMMETRIC for r in regimes.values()):
        raise WrongRegimeError("closed-form transition spectrum requires the "
                               "asymmetric regime for all sublevels")
    ph, php = rotating_frame_frequencies(p)
    rf = {j: abs(ph[j]) for j in SUBLEVELS}
    rf_prime = {j: abs(php[j]) for j in SUBLEVELS}
    half_sum = 0.5 * (p.A + p.A_prime)
    half_diff = 0.5 * (p.A - p.A_prime)
    mw = {}
    for pair, dsign in (("+0", -1.0), ("0-", +1.0)):
        base = p.omega_e + dsign * p.D
        mw[(pair, "dd")] = base + half_sum
        mw[(pair, "uu")] = base - half_sum
        mw[(pair, "du")] = base + half_diff
        mw[(pair, "ud")] = base - half_diff
    spec = TransitionSpectrum(rf=rf, rf_prime=rf_prime, mw=mw)
    _validate_transitions(p, spec, check_tol_factor)
    return spec


def _exact_level_map(p: SystemParams) -> dict:
    """Exact excited energies keyed by (j, nuclear label), by eigenvector overlap."""
    h = model.excited_block(p)
    w, v = algebra.eigh(h)
    levels = {}
    for i in range(12):
        k = int(np.argmax(np.abs(v[:, i])))
        j = SUBLEVELS[k // 4]
        levels[(j, NUCLEAR_LABELS[k % 4])] = w[i]
    if len(levels) != 12:
        raise WrongRegimeError("exact eigenvectors are not computational-basis-like; "
                               "transition labelling failed")
    return levels


def _validate_transitions(p: SystemParams, spec: TransitionSpectrum, factor: float):
    c = model.second_order_couplings(p)
    tol = factor * max(max(abs(x) for x in c["a"].values()),
                       max(abs(x) for x in c["a_prime"].values()))
    lv = _exact_level_map(p)
    for j in SUBLEVELS:
        for s2 in ("d", "u"):
            exact = abs(lv[(j, "u" + s2)] - lv[(j, "d" + s2)])
            if abs(exact - spec.rf[j]) > tol:
                raise ValueError(f"rf line of nucleus n, sublevel {j:+d}, deviates "
                                 f"from the exact splitting by more than {tol} MHz")
        for s1 in ("d", "u"):
            exact = abs(lv[(j, s1 + "u")] - lv[(j, s1 + "d")])
            if abs(exact - spec.rf_prime[j]) > tol:
                raise ValueError(f"rf line of nucleus n', sublevel {j:+d}, deviates "
                                 f"from the exact splitting by more than {tol} MHz")
    for (pair, lab), freq in spec.mw.items():
        ja, jb = (1, 0) if pair == "+0" else (0, -1)
        exact = abs(lv[(ja, lab)] - lv[(jb, lab)])
        if abs(exact - freq) > tol:
            raise ValueError(f"microwave line {pair}/{lab} deviates from the exact "
                             f"splitting by more than {tol} MHz")


def effective_hamiltonian(p: SystemParams) -> np.ndarray:
    """Effective 16x16 Hamiltonian: exact ground block, per-sublevel excited blocks.

    Each excited sublevel uses either the diagonal asymmetric form or the
    crossover eigensystem, selected by the mixing-weight criterion of
    :func:`tripletlink.model.classify_regime` (symmetric blocks come out of
    the crossover branch with f_j = 0).  Block offsets are kept so that the
    microwave detunings between sublevels are meaningful.
    """
    regimes = model.classify_regime(p)
    co = crossover_spectrum(p)
    ph, php = rotating_frame_frequencies(p)
    h = np.zeros((16, 16), dtype=complex)
    sz = (0.5, -0.5)
    for i, (s1, s2) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        h[i, i] = -p.omega_n * sz[s1] - p.omega_n_prime * sz[s2]
    s = 1.0 / math.sqrt(2.0)
    for j in SUBLEVELS:
        b = 4 * SUBLEVEL_BLOCK[j]
        if regimes[j] is Regime.ASYMMETRIC:
            off = -j * p.omega_e + abs(j) * p.D
            for i, (s1, s2) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
                h[b + i, b + i] = off + ph[j] * sz[s1] + php[j] * sz[s2]
        else:
            e1, e2, e3, e4 = co.energies[j]
            lo, hi = co.alpha[j] * s     # unit-norm middle eigenvectors
            h[b + 0, b + 0] = e1
            h[b + 3, b + 3] = e4
            mid = e2 * np.outer(lo, lo) + e3 * np.outer(hi, hi)
            h[b + 1:b + 3, b + 1:b + 3] = mid
    return h
