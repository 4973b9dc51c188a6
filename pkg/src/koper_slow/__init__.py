"""Stochastic Koper model with alpha-stable noise and its random slow manifold."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BlowUpError,
    BoxEscapeError,
    ConfigError,
    ContractionError,
    ConvergenceError,
    DomainError,
    InputError,
    KoperError,
    NumericalError,
    RangeError,
    StatisticsError,
)
from .model import (  # noqa: E402
    EQUILIBRIUM,
    EXAMPLE,
    KoperParams,
    State,
    classify_equilibrium,
    drift,
    estimate_lipschitz,
    find_equilibrium,
    jacobian,
)
from .noise import (  # noqa: E402
    StablePath,
    ks_self_similarity,
    sample_path,
    sample_standard_stable,
    sample_uniform_path,
    shift,
)
from .integrators import (  # noqa: E402
    Trajectory,
    integrate_em,
    integrate_rescaled,
    integrate_rk4_deterministic,
)
from .manifold import (  # noqa: E402
    RandomODESetup,
    check_invariance,
    contraction_rate,
    exponential_tracking,
    lipschitz_bound,
    lp_iterate,
    make_setup,
    manifold_graph,
    solve_random_ode,
)
from .config import ExperimentConfig, parse_config, serialize  # noqa: E402
