"""Suppressing qubit energy relaxation by measurement uncollapsing: closed forms and oracles."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    KET0,
    KET1,
    DensityMatrix,
    KrausSet,
    PureState,
    amplitude_damping,
    apply_channel,
    apply_selective,
    dephasing,
    make_pure,
    partial_measurement_null,
    pi_pulse,
    state_fidelity,
)
from .protocol import (  # noqa: E402
    FinalResult,
    OutcomeDecomposition,
    ProtocolParams,
    final_density_matrix,
    matched_pu,
    run_general,
    run_ideal,
    run_via_channels,
)
from .analysis import (  # noqa: E402
    FidelityReport,
    avg_fidelity_general,
    avg_fidelity_ideal,
    baseline_fidelity,
    naive_fidelity_ideal,
    process_fidelity,
    qpt_chi,
    six_state_average,
)
from .oracle import MCEstimate, bloch_avg_numeric, mc_run  # noqa: E402

__all__ = [
    "KET0", "KET1", "DensityMatrix", "KrausSet", "PureState", "amplitude_damping", "apply_channel",
    "apply_selective", "dephasing", "make_pure", "partial_measurement_null", "pi_pulse", "state_fidelity",
    "FinalResult", "OutcomeDecomposition", "ProtocolParams", "final_density_matrix", "matched_pu",
    "run_general", "run_ideal", "run_via_channels",
    "FidelityReport", "avg_fidelity_general", "avg_fidelity_ideal", "baseline_fidelity",
    "naive_fidelity_ideal", "process_fidelity", "qpt_chi", "six_state_average",
    "MCEstimate", "bloch_avg_numeric", "mc_run",
]
