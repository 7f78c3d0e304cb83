import logging
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config.settings import Config
from models.instance import Assignment, Instance
from models.lp import LpSolution
from models.policy import PolicyConfig, PolicyState, RoundOutcome
from models.results import McSummary, Trajectory
from services.policy_service import PolicyService
from utils.errors import ContractError, ParameterError
from utils.rng import chunk_uniforms, replication_uniforms
from utils.stats_utils import BoundCalculator, RunningMoments

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ['replication', 't', 'arrival', 'sampled_edge', 'price_index', 'safe', 'accepted', 'profit']


@dataclass(frozen=True, eq=False)
class RoundPlan:
    """
    Precomputed draw tables of one round, shared by the scalar and chunked paths.

    Row a of the option arrays belongs to arrivals[a]; unused slots carry a
    cumulative mass of -1 so they are never hit.
    """
    arrivals: Tuple[str, ...]
    arrival_cum: np.ndarray
    options: Tuple[Tuple[Assignment, ...], ...]
    option_cum: np.ndarray
    option_agent: np.ndarray
    option_p: np.ndarray
    option_w: np.ndarray

    def arrival_index(self, u: np.ndarray) -> np.ndarray:
        picks = np.searchsorted(self.arrival_cum, u, side='right')
        return np.minimum(picks, len(self.arrivals) - 1)


class SimulationService:
    """Seeded replications of ATT / SAMP with three uniforms per round"""

    def __init__(self, policy_service: Optional[PolicyService] = None, chunk: Optional[int] = None):
        self.policy_service = policy_service or PolicyService()
        self.chunk = Config.GIGMATCH_CHUNK if chunk is None else chunk

    def run_trajectory(self, inst: Instance, sol: LpSolution, config: PolicyConfig,
                       seed: int, replication: int = 0) -> Trajectory:
        """
        One replication, round by round through PolicyService.step.

        The draws are those of replication `replication` under master seed
        `seed`, so trajectory k reproduces row k of monte_carlo.
        """
        state = self.policy_service.initial_state(inst, sol, config)
        plans = self._plans(inst, state)
        draws = replication_uniforms(seed, replication, inst.horizon)

        outcomes: List[RoundOutcome] = []
        for t in inst.rounds():
            u_arrival, u_sample, u_accept = draws[t - 1]
            plan = plans[t - 1]
            j = plan.arrivals[int(plan.arrival_index(np.array([u_arrival]))[0])]
            probs, _ = self.policy_service.sampling_distribution(state, j, t)
            sampled = self.policy_service.draw_assignment(probs, u_sample)
            accept = sampled is not None and u_accept < inst.p(sampled, t)
            state, outcome = self.policy_service.step(state, t, j, sampled, accept)
            outcomes.append(outcome)

        matches_by_type: Dict[str, int] = {}
        for i in inst.offline_ids:
            matches_by_type.setdefault(inst.original_of(i), 0)
        for outcome in outcomes:
            if outcome.chi:
                original = inst.original_of(outcome.sampled[0])
                matches_by_type[original] += 1

        total_profit = 0.0
        for outcome in outcomes:
            total_profit += outcome.profit
        return Trajectory(
            seed=seed,
            replication=replication,
            outcomes=tuple(outcomes),
            total_profit=total_profit,
            total_matches=sum(matches_by_type.values()),
            matches_by_type=matches_by_type
        )

    def monte_carlo(self, inst: Instance, sol: LpSolution, config: PolicyConfig,
                    n: int, master_seed: int) -> McSummary:
        """
        n replications in vectorised chunks.

        Replication k consumes the same uniforms as run_trajectory(seed=master_seed,
        replication=k); per-replication results are kept in index order and the
        moments are reduced chunk by chunk in that order.
        """
        if n < 1:
            raise ParameterError("monte_carlo needs n >= 1")
        started = time.perf_counter()
        state = self.policy_service.initial_state(inst, sol, config)
        plans = self._plans(inst, state)

        originals = list(dict.fromkeys(inst.original_of(i) for i in inst.offline_ids))
        group_of = np.array([originals.index(inst.original_of(i)) for i in inst.offline_ids], dtype=np.int64)

        profits = np.empty(n)
        matches = np.empty(n, dtype=np.int64)
        by_type = np.zeros(len(originals))
        profit_moments, h_moments = RunningMoments(), RunningMoments()

        for start in range(0, n, self.chunk):
            stop = min(n, start + self.chunk)
            draws = chunk_uniforms(master_seed, start, stop, inst.horizon)
            chunk_profit, consumed = self._run_chunk(inst, plans, draws)
            chunk_h = consumed.sum(axis=1)
            profits[start:stop] = chunk_profit
            matches[start:stop] = chunk_h
            if len(originals):
                by_type += np.bincount(group_of, weights=consumed.sum(axis=0), minlength=len(originals))
            profit_moments.update_batch(chunk_profit)
            h_moments.update_batch(chunk_h)
            logger.debug(f"Replications {start}..{stop - 1} done")

        summary = McSummary(
            n=n,
            master_seed=master_seed,
            mean_profit=profit_moments.mean,
            mean_h=h_moments.mean,
            se_profit=profit_moments.standard_error,
            se_h=h_moments.standard_error,
            var_h=h_moments.variance,
            var_profit=profit_moments.variance,
            se_var_h=h_moments.variance_standard_error,
            mean_h_by_type={i: float(total / n) for i, total in zip(originals, by_type)},
            profits=profits,
            matches=matches
        )
        logger.info(f"Monte Carlo {config.label()}: n={n}, seed={master_seed}, mean profit={summary.mean_profit:.6f}, "
                    f"mean H={summary.mean_h:.6f}, {time.perf_counter() - started:.2f}s")
        return summary

    @staticmethod
    def risk_bound(mean: float, variance: float, threshold: float) -> float:
        """Chebyshev bound on Pr[X <= threshold]"""
        return BoundCalculator.chebyshev_risk(mean, variance, threshold)

    def export_trajectories(self, inst: Instance, sol: LpSolution, config: PolicyConfig,
                            master_seed: int, replications: int) -> pd.DataFrame:
        """Event log of the first `replications` replications, one row per round"""
        rows = []
        for replication in range(replications):
            trajectory = self.run_trajectory(inst, sol, config, master_seed, replication)
            for outcome in trajectory.outcomes:
                f = outcome.sampled
                rows.append({
                    'replication': replication,
                    't': outcome.t,
                    'arrival': outcome.arrival,
                    'sampled_edge': f"{f[0]}|{f[1]}" if f else None,
                    'price_index': f[2] if f else None,
                    'safe': outcome.safe,
                    'accepted': outcome.accepted,
                    'profit': outcome.profit
                })
        frame = pd.DataFrame(rows, columns=TRACE_COLUMNS)
        frame['price_index'] = frame['price_index'].astype('Int64')
        return frame

    def _plans(self, inst: Instance, state: PolicyState) -> List[RoundPlan]:
        """Sampling masses do not depend on the safe set, so one table per round suffices"""
        position = {i: a for a, i in enumerate(inst.offline_ids)}
        plans = []
        for t in inst.rounds():
            arrivals = inst.arrival_support(t)
            if not arrivals:
                raise ContractError(f"Round {t} has no arriving online type")
            per_arrival = []
            for j in arrivals:
                probs, _ = self.policy_service.sampling_distribution(state, j, t)
                per_arrival.append([(f, prob) for f, prob in probs.items() if prob > 0.0])

            width = max(1, max(len(entries) for entries in per_arrival))
            option_cum = np.full((len(arrivals), width), -1.0)
            option_agent = np.zeros((len(arrivals), width), dtype=np.int64)
            option_p = np.zeros((len(arrivals), width))
            option_w = np.zeros((len(arrivals), width))
            for a, entries in enumerate(per_arrival):
                if not entries:
                    continue
                # positive entries only: a zero-mass option never changes the cumulative sum
                option_cum[a, :len(entries)] = np.cumsum([prob for _, prob in entries])
                for k, (f, _) in enumerate(entries):
                    option_agent[a, k] = position[f[0]]
                    option_p[a, k] = inst.p(f, t)
                    option_w[a, k] = inst.w(f, t)

            plans.append(RoundPlan(
                arrivals=arrivals,
                arrival_cum=np.cumsum([inst.q(j, t) for j in arrivals]),
                options=tuple(tuple(f for f, _ in entries) for entries in per_arrival),
                option_cum=option_cum,
                option_agent=option_agent,
                option_p=option_p,
                option_w=option_w
            ))
        return plans

    @staticmethod
    def _run_chunk(inst: Instance, plans: List[RoundPlan], draws: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Play a block of replications; returns profits and the consumed-agent matrix"""
        count = draws.shape[0]
        rows = np.arange(count)
        safe = np.ones((count, len(inst.offline_types)), dtype=bool)
        profit = np.zeros(count)

        for t, plan in enumerate(plans):
            u = draws[:, t, :]
            a = plan.arrival_index(u[:, 0])
            hit = u[:, 1, None] < plan.option_cum[a]
            sampled = hit.any(axis=1)
            k = hit.argmax(axis=1)
            agent = plan.option_agent[a, k]
            success = sampled & safe[rows, agent] & (u[:, 2] < plan.option_p[a, k])
            safe[rows[success], agent[success]] = False
            profit += np.where(success, plan.option_w[a, k], 0.0)

        return profit, ~safe
