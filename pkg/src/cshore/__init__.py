"""Shot-efficient Pauli-measurement benchmarking: samplers, estimators and a harness."""
from .pauli import PauliString, as_pauli, covers, measurement_basis
from .hamiltonian import Hamiltonian, load as load_hamiltonian
from .statesim import QuantumState, AnsatzSpec, ground_state, random_ansatz_state
from .sampling import ProductDistribution, APSSampler, cs_distribution, lbcs_optimize, diagonal_cost
from .ddiagram import DecisionDiagram, build as build_diagram, optimize_weights
from .derand import DerandConfig, derandomize, confidence_bound
from .estimators import EstimatorConfig, TallySet, TallyAccumulator, estimate

__version__ = "0.1.0"
