"""Coherent-state process tomography of heralded photon creation and
annihilation black boxes: simulation, reconstruction and analysis."""

from .boxes import (BlackBoxKind, HeraldedOutput, ImperfectionModel,
                    exact_two_mode_box, herald_counts, herald_probability_law,
                    ideal_box_first_order, simulate_probe_run)
from .config import RunConfig, load_config, parse_config
from .fock import (DensityMatrix, PureState, annihilation_matrix,
                   coherent_state, creation_matrix, density_fidelity,
                   displacement_operator, fock_state, loss_channel,
                   pure_state_fidelity, trace_distance, wigner)
from .homodyne import (QuadratureDataset, displacement_correct,
                       estimate_amplitude, quadrature_pdf, sample_quadratures)
from .tomography import (MLEConfig, MLEResult, ProcessTensor, apply_process,
                         covariant_sector_mask, ideal_process_tensor,
                         mle_reconstruct, reconstruct_process,
                         rescale_to_trace)
from .analysis import (CountRateFit, FidelityReport, WignerReport,
                       diagonal_elements, fit_count_rates, off_target_mass,
                       process_fidelity_to_ideal, wigner_report,
                       worst_case_fidelity)

__version__ = "0.1.0"

__all__ = [
    "BlackBoxKind", "CountRateFit", "DensityMatrix", "FidelityReport",
    "HeraldedOutput", "ImperfectionModel", "MLEConfig", "MLEResult",
    "ProcessTensor", "PureState", "QuadratureDataset", "RunConfig",
    "WignerReport", "annihilation_matrix", "apply_process", "coherent_state",
    "covariant_sector_mask", "creation_matrix", "density_fidelity",
    "diagonal_elements", "displacement_correct", "displacement_operator",
    "estimate_amplitude", "exact_two_mode_box", "fit_count_rates",
    "fock_state", "herald_counts", "herald_probability_law",
    "ideal_box_first_order", "ideal_process_tensor", "load_config",
    "loss_channel", "mle_reconstruct", "off_target_mass", "parse_config",
    "process_fidelity_to_ideal", "pure_state_fidelity", "quadrature_pdf",
    "reconstruct_process", "rescale_to_trace", "sample_quadratures",
    "simulate_probe_run", "trace_distance", "wigner", "wigner_report",
    "worst_case_fidelity",
]
