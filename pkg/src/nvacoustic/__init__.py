"""Dual-field Rabi spectroscopy toolkit for acoustically driven spin transitions.

The package models a piezoelectric bulk acoustic resonator driving both
magnetic and stress fields on a spin-1 defect ensemble: an equivalent
circuit ties the two drive fields to one parameter set, a Lindblad solver
evolves the spin ensemble, and a structural-similarity grid search
extracts the single- to double-quantum acoustic drive ratio.
"""

from .circuit import (ComplexSpectrum, DerivedQuantities, MbvdFit, MbvdParams,
                      admittance, derived_quantities, fit, model_rabi_fields,
                      motional_voltage)
from .errors import (ConvergenceError, EvolutionError, MissingCoefficientError,
                     NvAcousticError, ValidationError)
from .inference import (BPrimeResult, ScanResult, SsimConfig, extract_bprime,
                        rescale_to_dynamic_range, scan, ssim)
from .lindblad import (DecoherenceParams, TimeTrace, evolve, liouvillian,
                       prepare_state, rotating_frame_hamiltonian,
                       validate_density_matrix)
from .presets import MODES, ModePreset, get_mode
from .spectro import (EnsembleSpec, FourierMap, QFactorResult, RabiEstimate,
                      RabiSpectrogram, compute_beta, extract_rabi,
                      fft_spectrum, normalize_columns, q_from_linewidth,
                      simulate_spectrogram)
from .spin import (BASIS, CouplingRatios, DriveFields, SpinConstants,
                   StressState, build_rwa_hamiltonian, compose_sq_rabi,
                   rwa_components, spin1_operators)
from .stress import (Catalog, ElasticScalars, StiffnessConstants, StrainTensor,
                     StressTensor, SusceptibilitySet, Uncertain,
                     coupling_coefficients, strain_from_stress,
                     stress_to_strain_susceptibility, table1_catalog,
                     uniaxial_strain)

__version__ = "0.1.0"
