"""Thermal generators for commuting-Pauli models and their spectral gaps."""

from .pauli import (PauliString, PauliSum, pauli_multiply, commutes,
                    commutant_dimension, to_matrix, write_coo_text,
                    read_coo_text)
from .models import (ModelSpec, SnakeCombPartition, ModelReport,
                     build_ising_ring, build_toric_code, verify_model)
from .basis import StabilizerFrame, build_frame
from .davies import (ThermalParams, JumpOperatorSet, JumpComponent,
                     SuperOperatorRep, fourier_decompose, build_generator,
                     default_couplings, detailed_balance_residual,
                     dissipativity_identity_check, stationarity_residual,
                     reconstruction_residual)
from .master import (MasterHamiltonian, BlockLabel, XBlockSpec, to_master,
                     block_labels, block_basis, block_decompose,
                     sign_flip_restriction)
from .spectral import (GapReport, gap, gap_from_blocks, analytic_bounds,
                       abelian_chain_hamiltonian, abelian_chain_kernel,
                       bond_pair_block, lemma1_check, lemma2_bound,
                       lemma3_bound, certify, sweep, write_sweep_csv)
from .dynamics import (AutocorrelationTrace, expm_action, evolve,
                       autocorrelation, relaxation_time, fit_decay_rate)

__all__ = [name for name in dir() if not name.startswith("_")]
