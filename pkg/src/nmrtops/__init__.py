"""Classical tops / hidden-spin model of pseudopure NMR quantum computation.

The package propagates circuits through an exact density-operator engine and
through the classical models, and reports where the two agree.
"""

from .circuit import CircuitFile, ParseError, format_circuit, load_circuit, parse_circuit, to_program
from .experiments import RunConfig, decay_curve, named_circuit, run_experiment
from .params import HiddenModelInapplicable, ModelParams, epsilon_from_alpha, eta_of
from .verify import verify_suite

__version__ = "0.1.0"

__all__ = [
    "CircuitFile",
    "HiddenModelInapplicable",
    "ModelParams",
    "ParseError",
    "RunConfig",
    "decay_curve",
    "epsilon_from_alpha",
    "eta_of",
    "format_circuit",
    "load_circuit",
    "named_circuit",
    "parse_circuit",
    "run_experiment",
    "to_program",
    "verify_suite",
]
