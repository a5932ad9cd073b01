"""Estimation, simulation and I/O services"""
from stdml.services.lattice_service import LatticeService
from stdml.services.field_service import GaussianFieldService
from stdml.services.tree_learner_service import TreeLearnerService
from stdml.services.regression_service import RegressionService
from stdml.services.dml_service import DMLService
from stdml.services.baseline_service import BaselineService
from stdml.services.simulation_service import SimulationService

__all__ = [
    "LatticeService",
    "GaussianFieldService",
    "TreeLearnerService",
    "RegressionService",
    "DMLService",
    "BaselineService",
    "SimulationService",
]
