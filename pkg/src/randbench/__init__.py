"""Randomized benchmarking simulation for small qubit registers.

Subpackages:

* :mod:`randbench.liouville` - density states and superoperators
* :mod:`randbench.clifford` - gate sets, Pauli tracking and recovery
* :mod:`randbench.noise` - noise models and timing
* :mod:`randbench.pulses` - BB1 composite pulses
* :mod:`randbench.protocol` - the benchmarking engines
* :mod:`randbench.rf` - analytic decay under r.f. inhomogeneity
* :mod:`randbench.fit` - decay fitting and model selection
"""
__version__ = "0.1.0"

from .liouville import (  # noqa: F401
    DensityState,
    Superoperator,
    ValidationError,
    depolarize,
    depolarizing_parameter,
    twirl,
)
from .noise import (  # noqa: F401
    Depolarizing,
    GateTiming,
    Ideal,
    LocalDepolarizing,
    OverRotation,
    Relaxation,
    RfDistribution,
    RfEnsemble,
    error_per_gate_lower_bound,
)
from .protocol import (  # noqa: F401
    DecayCurve,
    ExperimentConfig,
    run,
    run_multi_qubit_rb,
    run_single_qubit_rb,
    subsystem_benchmark,
)
from .fit import FitResult, fit_exponential, model_select  # noqa: F401
from .rf import analytic_decay, compare_mc_vs_analytic, pbar  # noqa: F401
