"""Monte Carlo engine for LIBOR market models driven by NIG Levy processes.

Forward rates evolve under the terminal measure; three discretizations of
the log-rate equation (full state-dependent drift, deterministic frozen
drift, and a two-stage corrected scheme) share driver increments path by
path, so their prices and implied volatilities can be compared at common
random numbers.
"""

from .driver import (
    CumulantDomainError,
    DriverIncrements,
    ExponentialMomentBound,
    ExponentialMomentReport,
    LevyTriplet,
    NigParams,
    PiecewiseConstant,
    nig_cumulant,
    nig_jump_cumulant,
    nig_levy_density,
    nig_mean_rate,
    nig_variance_rate,
    path_rng,
    sample_inverse_gaussian,
    sample_nig_increment,
    simulate_driver_increments,
    validate_exponential_moments,
)
from .market import (
    BUNDLED_SETUP,
    CurveOrderError,
    DiscountCurve,
    MarketSetup,
    SetupValidationReport,
    TenorStructure,
    VolatilityStructure,
    bundled_setup,
    initial_libor,
    load_setup,
    setup_from_dict,
    setup_to_dict,
    validate_setup,
)
from .drift import (
    DriftEvaluator,
    DriftMethod,
    StateVector,
    deterministic_drift_table,
    drift_cumulant_expansion,
    drift_quadrature,
    jump_factor,
    link_weight,
    terminal_drift,
)
from .simulate import (
    PathBundle,
    Scheme,
    SimulationEngine,
    SimulationGrid,
    build_grid,
    dump_paths,
    simulate_ensemble,
    simulate_path,
)
from .pricing import (
    CapletSpec,
    ComparisonCell,
    ComparisonTable,
    CouponConvention,
    ImpliedVolError,
    McEstimate,
    SwaptionSpec,
    black76_implied_vol,
    black76_price,
    caplet_payoff,
    caplet_price_last_rate,
    compare_schemes,
    forward_swap_rate,
    price_caplet_mc,
    price_instruments_mc,
    price_swaption_mc,
    swaption_payoff,
    write_iv_surface,
    zero_strike_caplet_value,
)

__version__ = "0.1.0"
