# Services package
from .instance_service import InstanceService, ReferenceKind
from .lp_service import LpService
from .policy_service import PolicyService
from .oracle_service import OracleMode, OracleService
from .simulation_service import SimulationService
from .experiment_service import ExperimentService

__all__ = ['InstanceService', 'ReferenceKind', 'LpService', 'PolicyService', 'OracleMode', 'OracleService',
           'SimulationService', 'ExperimentService']
