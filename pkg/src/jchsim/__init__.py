"""Polariton hopping and blockade in the trapped-ion Jaynes-Cummings-Hubbard model."""
from importlib.metadata import PackageNotFoundError, version

from .hilbert import CompositeSpace, OperatorMatrix, StateVector, expectation, projector_ge
from .model import ChainGeometry, JchParams, build_jch_hamiltonian, hopping_rate
from .spectrum import gap_table, generalized_rabi, jc_eigen
from .dynamics import InitialStateSpec, PulseSegment, PulseSequence, TrajectoryRecord, run_sequence
from .noise import NoiseModel, ensemble_run
from .analysis import blockade_comparison, detuning_sweep, find_min_detuning, time_averaged_leakage

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

__all__ = [
    "CompositeSpace", "OperatorMatrix", "StateVector", "expectation", "projector_ge",
    "ChainGeometry", "JchParams", "build_jch_hamiltonian", "hopping_rate",
    "gap_table", "generalized_rabi", "jc_eigen",
    "InitialStateSpec", "PulseSegment", "PulseSequence", "TrajectoryRecord", "run_sequence",
    "NoiseModel", "ensemble_run",
    "blockade_comparison", "detuning_sweep", "find_min_detuning", "time_averaged_leakage",
]
