"""Single-qubit / single-photon polaritonic quantum Otto engine."""
from .quantum_core import HilbertSpace, eig_hermitian, expectation
from .jaynes_cummings import JCParams, dressed_energies, dressed_levels, jc_hamiltonian
from .dynamics import BathParams, MeasurementScheme, RampSchedule, evolve_master, hold
from .otto_engine import (
    EngineConfig, analytic_work_multi, analytic_work_single, analytic_work_two_qubit,
    simulate_cycle, work_distribution,
)

__version__ = "0.1.0"
