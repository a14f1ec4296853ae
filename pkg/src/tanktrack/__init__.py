"""Funnel-controlled tracking for a cart-mounted water tank.

Simulates the coupled cart/shallow-water dynamics in linear and nonlinear
form, closes the loop with a funnel controller, and cross-checks the
linear model's frequency-domain description (transfer function, modal
series, impulse-response comb) against independent numerical solves.
"""

from .analysis import (
    DeltaComb,
    ModalData,
    TransferEval,
    bibo_convolution_check,
    impulse_response_comb,
    modal_data,
    resolvent_oracle,
    tanh_series_identity,
    transfer_closed_form,
    transfer_series,
)
from .cli_io import (
    PRESETS,
    TRACE_HEADER,
    ConfigError,
    ExperimentConfig,
    InitialProfile,
    RunFailure,
    TraceValidationError,
    derive_grids,
    emit_overlay_plots,
    emit_plots,
    format_config,
    main,
    parse_config,
    preset_experiment1,
    preset_experiment2,
    read_trace,
    run_setups,
    simulate_config,
    transfer_sweep,
    validate_run_config,
    validate_trace,
    write_config,
    write_trace,
)
from .closed_loop import (
    TRACE_COLUMNS,
    ClosedLoopState,
    RunSetup,
    TraceRecord,
    linear_output_rhs,
    run_closed_loop,
)
from .funnel_controller import (
    FeasibilityError,
    FunnelClassError,
    FunnelSpec,
    FunnelViolationError,
    GainState,
    check_initial_feasibility,
    control_input,
    validate_funnel_class,
)
from .model_core import (
    CartState,
    PhysicalParams,
    ReferenceSignal,
    SpatialGrid,
    StateField,
    energy,
    mass_integral,
)
from .pde_linear import (
    CFL_LIMIT,
    CflError,
    CharacteristicState,
    LinearStepConfig,
    from_characteristic,
    semi_discrete_system,
    solve_steady_state,
    step_linear,
    to_characteristic,
)
from .pde_nonlinear import (
    NonlinearState,
    PositivityError,
    friction,
    nonlinear_output_rhs,
    step_nonlinear,
)

__version__ = "0.1.0"
