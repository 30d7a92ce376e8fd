"""Physical model: parameters, spin operators, basis ordering, Hamiltonians.

System
------
Two nuclear spin-1/2 qubits (labelled n and n') coupled to a mediator with a
spin-silent ground orbital ``|0>`` and an optically excited orbital carrying
an electron triplet (T-, T0, T+).  The full Hilbert space is 16-dimensional::

    index = 4 * block + nuc
    block:  0 = ground |0>,  1 = T-,  2 = T0,  3 = T+
    nuc:    0 = dd, 1 = du, 2 = ud, 3 = uu     (first arrow: nucleus n)

Spin conventions
----------------
* Nuclear operators are spin-1/2: ``S_z |down> = +1/2 |down>`` and
  ``S_z |up> = -1/2 |up>``.
* The electron triplet satisfies ``S_z,e |T+-> = -+ |T+->`` and
  ``S_z,e |T0> = 0``; in (T-, T0, T+) order ``S_z,e = diag(+1, 0, -1)`` and
  ``<T0| S_x,e |T+-> = 1/sqrt(2)``.

Units
-----
All frequency-type inputs (``omega_n``, ``omega_e``, ``A``, ``D``, ...) are
the laboratory values quoted in MHz, i.e. ordinary frequencies nu.  Spectral
formulas combine them linearly, so their outputs are in the same MHz units.
Time-domain code (propagators, master equations) converts to angular
frequency with a single factor 2*pi; times are microseconds throughout, decay
rates 1/us.  See :data:`tripletlink.dynamics.ANGULAR`.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from . import algebra

# nuclear pair basis, first symbol = nucleus n; d has S_z = +1/2
NUCLEAR_LABELS = ("dd", "du", "ud", "uu")
# orbital/triplet blocks of the 16-dim space
BLOCK_LABELS = ("ground", "T-", "T0", "T+")
SUBLEVELS = (-1, 0, 1)            # triplet sublevels j for T-, T0, T+
SUBLEVEL_BLOCK = {-1: 1, 0: 2, 1: 3}
KFACTOR = {-1: 1.0, 0: 1.0, 1: -1.0}   # block sign k(j) of the effective XY coupling

DIM = 16
GROUND_DIM = 4


class PerturbationInvalidError(ValueError):
    """Parameters violate the perturbative hierarchy (couplings vs omega_e)."""


class Regime(enum.Enum):
    SYMMETRIC = "symmetric"
    CROSSOVER = "crossover"
    ASYMMETRIC = "asymmetric"


@dataclass(frozen=True)
class SystemParams:
    """All physical constants of the three-spin model.

    Frequencies in MHz (see module docstring), lifetimes in microseconds,
    populations dimensionless.  ``omega_0`` is the optical excitation energy;
    it is bookkeeping only and never enters the spin dynamics.
    """

    omega_n: float
    omega_n_prime: float
    omega_e: float
    A: float
    A_prime: float
    D: float
    omega_0: float = 0.0
    tau_minus: float = 1.0e6
    tau_zero: float = 1.0e6
    tau_plus: float = 1.0e6
    p_minus: float = 0.0
    p_zero: float = 1.0
    p_plus: float = 0.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.omega_e > 0:
            raise ValueError("omega_e must be positive")
        if min(self.tau_minus, self.tau_zero, self.tau_plus) <= 0:
            raise ValueError("all lifetimes must be positive")
        psum = self.p_minus + self.p_zero + self.p_plus
        if abs(psum - 1.0) > 1e-9:
            raise ValueError(f"triplet populations sum to {psum}, expected 1")
        if min(self.p_minus, self.p_zero, self.p_plus) < 0:
            raise ValueError("triplet populations must be non-negative")

    @property
    def perturbative_ok(self) -> bool:
        """True when |omega_n|, |omega_n'|, |D|, A, A' are all < 0.05 * omega_e."""
        small = max(abs(self.omega_n), abs(self.omega_n_prime), abs(self.D),
                    abs(self.A), abs(self.A_prime))
        return small < 0.05 * self.omega_e

    @property
    def lifetimes(self) -> tuple:
        """(tau_minus, tau_zero, tau_plus) in microseconds."""
        return (self.tau_minus, self.tau_zero, self.tau_plus)

    @property
    def populations(self) -> tuple:
        """(p_minus, p_zero, p_plus) initial triplet populations."""
        return (self.p_minus, self.p_zero, self.p_plus)

    def replace(self, **kw) -> "SystemParams":
        return replace(self, **kw)

    def to_json(self) -> str:
        return json.dumps({f.name: getattr(self, f.name) for f in fields(self)},
                          indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "SystemParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown SystemParams keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "SystemParams":
        return cls.from_dict(json.loads(text))


def demf_params() -> SystemParams:
    """Symmetric fullerene mono-adduct characterization values.

    Two equivalent 13C labels; triplet-sublevel lifetimes and populations as
    measured on an oriented crystal sample.
    """
    return SystemParams(omega_n=3.7, omega_n_prime=3.7, omega_e=9600.0,
                        A=2.5, A_prime=2.5, D=-296.0,
                        tau_minus=570.0, tau_zero=20.0, tau_plus=570.0,
                        p_minus=0.49, p_zero=0.02, p_plus=0.49)


def dmfph_params(tau: float = 10.0) -> SystemParams:
    """Asymmetric phosphine-oxide fullerene values (H and P nuclei).

    ``tau`` sets a common optical lifetime for all sublevels (microseconds).
    """
    return SystemParams(omega_n=5.97, omega_n_prime=14.74, omega_e=9700.0,
                        A=6.0, A_prime=11.0, D=-320.0,
                        tau_minus=tau, tau_zero=tau, tau_plus=tau,
                        p_minus=0.0, p_zero=1.0, p_plus=0.0)


# ---------------------------------------------------------------------------
# spin operators

def _spin_half():
    sx = 0.5 * np.array([[0, 1], [1, 0]], dtype=complex)
    sy = 0.5 * np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = 0.5 * np.diag([1.0, -1.0]).astype(complex)
    return sx, sy, sz


def _spin_one():
    # (T-, T0, T+) ordering corresponds to magnetic numbers (+1, 0, -1)
    s = 1.0 / math.sqrt(2.0)
    sx = s * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
    sy = s * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex)
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return sx, sy, sz


def spin_operators() -> dict:
    """Operators on the 16-dim space plus the bare 3x3 electron matrices.

    Keys: ``Sx_n, Sy_n, Sz_n`` (nucleus n), ``Sx_np, Sy_np, Sz_np``
    (nucleus n'), ``Sx_e, Sy_e, Sz_e`` (electron, zero on the ground block),
    ``Sx_e3, Sy_e3, Sz_e3`` (bare triplet 3x3), and ``P_e`` (excited
    projector).
    """
    sx, sy, sz = _spin_half()
    ex, ey, ez = _spin_one()
    i2, i4 = np.eye(2), np.eye(4)
    ops = {}
    for name, op in (("Sx", sx), ("Sy", sy), ("Sz", sz)):
        ops[f"{name}_n"] = algebra.kron(i4, algebra.kron(op, i2))
        ops[f"{name}_np"] = algebra.kron(i4, algebra.kron(i2, op))
    for name, op in (("Sx", ex), ("Sy", ey), ("Sz", ez)):
        emb = np.zeros((4, 4), dtype=complex)
        emb[1:, 1:] = op
        ops[f"{name}_e"] = algebra.kron(emb, i4)
        ops[f"{name}_e3"] = op
    pe = np.zeros((4, 4))
    pe[1:, 1:] = np.eye(3)
    ops["P_e"] = algebra.kron(pe, i4)
    return ops


def state_index(block: int, nuc) -> int:
    """Flat index of |block, nuc> with nuc an index or a label like 'du'."""
    if isinstance(nuc, str):
        nuc = NUCLEAR_LABELS.index(nuc)
    return 4 * block + nuc


def basis_state(block: int, nuc) -> np.ndarray:
    v = np.zeros(DIM, dtype=complex)
    v[state_index(block, nuc)] = 1.0
    return v


def nuclear_swap() -> np.ndarray:
    """Unitary exchanging the two nuclei (identity on the orbital factor)."""
    swap4 = np.eye(4)[[0, 2, 1, 3]]
    return algebra.kron(np.eye(4), swap4)


# ---------------------------------------------------------------------------
# Hamiltonians

def build_full_hamiltonian(p: SystemParams, include_omega0: bool = True) -> np.ndarray:
    """Full 16x16 Hamiltonian (MHz units).

    Ground block: nuclear Zeeman only.  Excited block adds the electron
    Zeeman term, the two isotropic hyperfine couplings, the uniaxial
    zero-field splitting, and (optionally) the omega_0 identity shift.
    There are no ground-excited matrix elements.
    """
    ops = spin_operators()
    h = -p.omega_n * ops["Sz_n"] - p.omega_n_prime * ops["Sz_np"]
    h = h + p.omega_e * ops["Sz_e"] + p.D * (ops["Sz_e"] @ ops["Sz_e"])
    pe = ops["P_e"]
    for ax in ("Sx", "Sy", "Sz"):
        h = h + p.A * (ops[f"{ax}_n"] @ ops[f"{ax}_e"])
        h = h + p.A_prime * (ops[f"{ax}_np"] @ ops[f"{ax}_e"])
    if include_omega0:
        h = h + p.omega_0 * pe
    # hyperfine terms already vanish on the ground block because S_e does
    return h


def excited_block(p: SystemParams) -> np.ndarray:
    """The 12x12 excited-orbital block of the Hamiltonian, without omega_0."""
    h = build_full_hamiltonian(p, include_omega0=False)
    return h[GROUND_DIM:, GROUND_DIM:].copy()


# ---------------------------------------------------------------------------
# second-order couplings and regime classification

def second_order_couplings(p: SystemParams):
    """Flip-flop couplings (a_minus, a_zero, a_plus) and primed analogues.

    Returns a dict with keys 'a' and 'a_prime', each mapping sublevel j in
    (-1, 0, +1) to the corresponding coupling in MHz.
    """
    def trio(omega, hf):
        a_plus = 0.5 * hf**2 / (-p.D + p.omega_e + omega)
        a_minus = 0.5 * hf**2 / (p.D + p.omega_e + omega)
        return {-1: a_minus, 0: a_plus - a_minus, 1: a_plus}
    return {"a": trio(p.omega_n, p.A), "a_prime": trio(p.omega_n_prime, p.A_prime)}


def asymmetry_strengths(p: SystemParams) -> dict:
    """Perturbation strengths f_j in MHz, evaluated from raw differences.

    Uses A' - A and omega_n' - omega_n directly, so omega_n = 0 is handled
    without forming the fractional asymmetries.
    """
    da = p.A_prime - p.A
    dw = p.omega_n_prime - p.omega_n
    return {1: 0.5 * (da + dw), -1: 0.5 * (da - dw), 0: -0.5 * dw}


def mixing_weight(p: SystemParams, j: int) -> float:
    """Normalized middle-pair mixing weight |<du|E_{j,2}>|^2 in [0, 1].

    Equals 1/2 for a symmetric system and tends to 0 or 1 in the fully
    asymmetric limit.
    """
    a = second_order_couplings(p)["a"][j]
    f = asymmetry_strengths(p)[j]
    r = math.hypot(a, f)
    if r == 0.0:
        return 0.5
    return 0.5 * (1.0 + math.copysign(1.0, a) * f / r)


def classify_regime(p: SystemParams) -> dict:
    """Per-sublevel regime classification.

    Symmetric when the asymmetry strength f_j vanishes exactly; asymmetric
    when the middle-pair mixing weight leaves (0.001, 0.999); crossover
    otherwise.  Requires the perturbative hierarchy to hold.
    """
    if not p.perturbative_ok:
        raise PerturbationInvalidError(
            "couplings are not small compared to omega_e; perturbation theory invalid")
    out = {}
    f = asymmetry_strengths(p)
    for j in SUBLEVELS:
        if f[j] == 0.0:
            out[j] = Regime.SYMMETRIC
        else:
            w = mixing_weight(p, j)
            out[j] = Regime.ASYMMETRIC if (w <= 0.001 or w >= 0.999) else Regime.CROSSOVER
    return out
