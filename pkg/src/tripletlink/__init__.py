"""Optically mediated nuclear-spin entanglement: spectra, decay, protocols."""

from .model import (SystemParams, Regime, classify_regime, demf_params,
                    dmfph_params, build_full_hamiltonian, excited_block,
                    spin_operators)
from .effective import (SymmetricSpectrum, CrossoverSpectrum, TransitionSpectrum,
                        symmetric_spectrum, crossover_spectrum,
                        transition_spectrum, effective_hamiltonian)
from .dynamics import (ANGULAR, DecayChannel, MasterEqSpec, decay_channels,
                       integrate_master, final_nuclear_state_closed_form,
                       emission_spectrum)
from .measures import (concurrence, entanglement_of_formation, linear_entropy,
                       purity, entangling_power_mc, entangling_power_symmetric,
                       entangling_power_lemma, crossover_entangling_power,
                       max_entangling_power)
from .protocols import (ProtocolReport, PulseSpec, run_symmetric_polarized,
                        run_symmetric_mixed, cphase_2pi, optimize_2pi_power,
                        rabi_leakage, plan_selective_pulse, run_shelving,
                        adiabatic_phases, solve_sigma, optimize_adiabatic,
                        run_adiabatic)

__version__ = "0.1.0"
