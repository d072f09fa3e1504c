"""Classical-quantum oscillator path integrals."""

from ._core import (  # noqa: F401
    ActionConvention,
    CqoscError,
    OscillatorConfig,
    TimeGrid,
    corrected_QQ_plus,
    corrected_qq,
    decoherence_weight,
    evaluate_action,
    free_classical,
    free_quantum_minus,
    free_quantum_plus,
    langevin,
    lattice_moment,
    mpp,
    run_cli,
)
