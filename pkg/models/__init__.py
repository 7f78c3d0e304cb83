# Models package
from .instance import Assignment, Instance, OfflineType, OnlineType, RoundTable, ValidationReport, Violation
from .lp import LpProblem, LpSolution, LpStatus
from .policy import AttenuationTable, PolicyConfig, PolicyKind, PolicyState, RoundOutcome
from .results import ComponentDistribution, ExactEval, McSummary, OracleMethod, OracleValue, RunSpec, Trajectory

__all__ = [
    'Assignment', 'Instance', 'OfflineType', 'OnlineType', 'RoundTable', 'ValidationReport', 'Violation',
    'LpProblem', 'LpSolution', 'LpStatus',
    'AttenuationTable', 'PolicyConfig', 'PolicyKind', 'PolicyState', 'RoundOutcome',
    'ComponentDistribution', 'ExactEval', 'McSummary', 'OracleMethod', 'OracleValue', 'RunSpec', 'Trajectory'
]
