import logging
import math
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from config.settings import Config
from models.instance import Instance, OfflineType, OnlineType, RoundTable, ValidationReport, Violation
from utils.errors import InstanceValidationError, ParameterError
from utils.rng import instance_generator

logger = logging.getLogger(__name__)

ArrivalInput = Union[Sequence[Sequence[float]], Mapping[Tuple[int, int], float]]


class ReferenceKind:
    ATT_CR = "att-cr"
    ATT_VAR = "att-var"
    SAMP_CR = "samp-cr"
    SAMP_VAR = "samp-var"

    ALL = (ATT_CR, ATT_VAR, SAMP_CR, SAMP_VAR)


class InstanceService:
    def __init__(self, prob_tol: Optional[float] = None):
        """Initialize instance service with the probability-mass tolerance"""
        self.prob_tol = Config.GIGMATCH_PROB_TOL if prob_tol is None else prob_tol

    def validate(self, inst: Instance) -> ValidationReport:
        """List every broken model invariant; never raises on bad data"""
        violations: List[Violation] = []

        def flag(rule: str, location: str, message: str):
            violations.append(Violation(rule, location, message))

        horizon = inst.horizon
        horizon_ok = isinstance(horizon, int) and not isinstance(horizon, bool) and horizon >= 1
        if not horizon_ok:
            flag('horizon', 'horizon', f"horizon must be a positive integer, got {horizon!r}")

        offline_ids = set()
        for o in inst.offline_types:
            if o.id in offline_ids:
                flag('duplicate-offline-id', f"offline:{o.id}", "offline id appears more than once")
            offline_ids.add(o.id)
            if isinstance(o.capacity, bool) or not isinstance(o.capacity, int) or o.capacity < 1:
                flag('capacity', f"offline:{o.id}", f"capacity must be an integer >= 1, got {o.capacity!r}")

        online_ids = set()
        for o in inst.online_types:
            if o.id in online_ids:
                flag('duplicate-online-id', f"online:{o.id}", "online id appears more than once")
            online_ids.add(o.id)

        if len(inst.prices) < 1:
            flag('no-prices', 'prices', "at least one price level is required")
        for k, a in enumerate(inst.prices):
            if not math.isfinite(a):
                flag('non-finite', f"price:{k}", f"price {a!r} is not finite")
            elif a < 0:
                flag('negative-price', f"price:{k}", f"price {a} is negative")

        edges = set()
        for i, j in inst.edges:
            if (i, j) in edges:
                flag('duplicate-edge', f"edge:{i}-{j}", "edge listed more than once")
            edges.add((i, j))
            if i not in offline_ids or j not in online_ids:
                flag('unknown-edge-endpoint', f"edge:{i}-{j}", "edge references an unknown agent type")

        mass: Dict[int, float] = {}
        for (j, t), q in inst.arrival.items():
            location = f"arrival:{j}@{t}"
            if j not in online_ids or not horizon_ok or not (isinstance(t, int) and 1 <= t <= horizon):
                flag('arrival-reference', location, "arrival entry references an unknown type or round")
                continue
            if not math.isfinite(q):
                flag('non-finite', location, f"arrival probability {q!r} is not finite")
                continue
            if q < 0 or q > 1:
                flag('arrival-range', location, f"arrival probability {q} outside [0, 1]")
            mass[t] = mass.get(t, 0.0) + q

        if horizon_ok:
            for t in range(1, horizon + 1):
                total = mass.get(t, 0.0)
                if abs(total - 1.0) > self.prob_tol:
                    flag('arrival-mass', f"round:{t}", f"arrival probabilities sum to {total}, expected 1")

        n_prices = len(inst.prices)
        self._check_table(inst.accept_prob, 'accept_prob', edges, n_prices, horizon, horizon_ok, flag,
                          lambda v: 0.0 < v <= 1.0, 'accept-prob-range', "acceptance probability outside (0, 1]")
        self._check_table(inst.profit, 'profit', edges, n_prices, horizon, horizon_ok, flag,
                          lambda v: v >= 0.0, 'negative-profit', "profit is negative")

        if not 0.0 < inst.accept_prob.default <= 1.0:
            flag('accept-prob-range', 'accept_prob:default', "default acceptance probability outside (0, 1]")
        if inst.profit.default < 0.0:
            flag('negative-profit', 'profit:default', "default profit is negative")

        return ValidationReport(tuple(violations))

    @staticmethod
    def _check_table(table: RoundTable, name: str, edges, n_prices: int, horizon, horizon_ok: bool,
                     flag, predicate, rule: str, message: str) -> None:
        for f, t, value in table.entries():
            i, j, k = f
            location = f"{name}:{i}-{j}/{k}" + (f"@{t}" if t is not None else "")
            if (i, j) not in edges or not (isinstance(k, int) and 0 <= k < n_prices):
                flag('assignment-reference', location, "entry references an unknown edge or price index")
                continue
            if t is not None and horizon_ok and not 1 <= t <= horizon:
                flag('assignment-reference', location, f"round {t} outside 1..{horizon}")
                continue
            if not math.isfinite(value):
                flag('non-finite', location, f"value {value!r} is not finite")
                continue
            if not predicate(value):
                flag(rule, location, f"{message}: {value}")

    def require_valid(self, inst: Instance) -> None:
        report = self.validate(inst)
        if not report.ok:
            logger.error(f"Instance failed validation: {report.rules()}")
            raise InstanceValidationError(report)

    def expand_capacities(self, inst: Instance) -> Instance:
        """Replace every offline type of capacity b > 1 by b unit copies 'i#1'..'i#b'"""
        self.require_valid(inst)

        copies: Dict[str, List[str]] = {}
        offline: List[OfflineType] = []
        origin: Dict[str, str] = {}
        for o in inst.offline_types:
            root = inst.original_of(o.id)
            if o.capacity == 1:
                ids = [o.id]
            else:
                ids = [f"{o.id}#{c}" for c in range(1, o.capacity + 1)]
            copies[o.id] = ids
            for copy_id in ids:
                offline.append(OfflineType(id=copy_id, capacity=1))
                if copy_id != root:
                    origin[copy_id] = root

        edges = [(copy_id, j) for (i, j) in inst.edges for copy_id in copies[i]]

        expanded = Instance(
            offline_types=tuple(offline),
            online_types=inst.online_types,
            prices=inst.prices,
            edges=tuple(edges),
            horizon=inst.horizon,
            arrival=inst.arrival,
            accept_prob=inst.accept_prob.remap(copies),
            profit=inst.profit.remap(copies),
            origin={**inst.origin, **origin}
        )
        logger.debug(f"Expanded capacities: {len(inst.offline_types)} -> {len(offline)} offline types")
        return expanded

    def build_reference_instance(self, kind: str, eps: Optional[float] = None, m: Optional[int] = None,
                                 gamma: Optional[float] = None) -> Instance:
        """
        Build one of the four tightness instances.

        Args:
            kind: 'att-cr', 'samp-cr' (need eps in (0,1)), 'att-var' (needs m >= 1)
                or 'samp-var' (needs m >= 1 and gamma in [0,1])
            eps: Arrival probability of the valuable type in round 2
            m: Number of disjoint edges
            gamma: Policy parameter fixing p = min(1, (1/2)/gamma)

        Returns:
            The requested Instance
        """
        if kind in (ReferenceKind.ATT_CR, ReferenceKind.SAMP_CR):
            if eps is None or not 0.0 < eps < 1.0:
                raise ParameterError(f"{kind} needs eps in (0, 1), got {eps}")
            high = 1.0 / eps if kind == ReferenceKind.ATT_CR else 1.0 / (eps * eps)
            return self._two_round_instance(eps, (1.0, 0.0, high))

        if kind in (ReferenceKind.ATT_VAR, ReferenceKind.SAMP_VAR):
            if m is None or isinstance(m, bool) or not isinstance(m, int) or m < 1:
                raise ParameterError(f"{kind} needs an integer m >= 1, got {m}")
            p = 1.0
            if kind == ReferenceKind.SAMP_VAR:
                if gamma is None or not 0.0 <= gamma <= 1.0:
                    raise ParameterError(f"{kind} needs gamma in [0, 1], got {gamma}")
                p = 1.0 if gamma == 0.0 else min(1.0, 0.5 / gamma)
            return self._disjoint_edges_instance(m, p)

        raise ParameterError(f"Unknown reference kind: {kind} (expected one of {', '.join(ReferenceKind.ALL)})")

    @staticmethod
    def _two_round_instance(eps: float, profits: Tuple[float, float, float]) -> Instance:
        online = tuple(OnlineType(f"j{n}") for n in (1, 2, 3))
        edges = tuple(("i1", o.id) for o in online)
        return Instance(
            offline_types=(OfflineType("i1", 1),),
            online_types=online,
            prices=(1.0,),
            edges=edges,
            horizon=2,
            arrival={("j1", 1): 1.0, ("j2", 2): 1.0 - eps, ("j3", 2): eps},
            accept_prob=RoundTable(constant={(i, j, 0): 1.0 for i, j in edges}, default=1.0),
            profit=RoundTable(constant={(i, j, 0): w for (i, j), w in zip(edges, profits)}, default=0.0)
        )

    @staticmethod
    def _disjoint_edges_instance(m: int, p: float) -> Instance:
        edges = tuple((f"i{n}", f"j{n}") for n in range(1, m + 1))
        return Instance(
            offline_types=tuple(OfflineType(f"i{n}", 1) for n in range(1, m + 1)),
            online_types=tuple(OnlineType(f"j{n}") for n in range(1, m + 1)),
            prices=(1.0,),
            edges=edges,
            horizon=m,
            arrival={(f"j{t}", t): 1.0 for t in range(1, m + 1)},
            accept_prob=RoundTable(constant={(i, j, 0): p for i, j in edges}, default=1.0),
            profit=RoundTable(constant={(i, j, 0): 1.0 for i, j in edges}, default=0.0)
        )

    def from_prophet(self, values: Sequence[float], arrival: ArrivalInput, capacity: int = 1) -> Instance:
        """
        Encode a (capacity-choice) prophet problem: one offline agent of the given
        capacity, one online type per value, p = 1 and w_{(.,j),t} = v_j.

        Args:
            values: Non-negative values v_j
            arrival: Dense rows (one per value, one column per round) or a
                mapping (j, t) -> q with 1-based j and t
            capacity: Number of values that may be kept

        Returns:
            The prophet Instance
        """
        values = [float(v) for v in values]
        if not values:
            raise ParameterError("At least one value is required")
        for n, v in enumerate(values, start=1):
            if not math.isfinite(v) or v < 0:
                raise ParameterError(f"Value v_{n} must be a non-negative number, got {v}")
        if isinstance(capacity, bool) or not isinstance(capacity, int) or capacity < 1:
            raise ParameterError(f"capacity must be an integer >= 1, got {capacity}")

        matrix = self._arrival_matrix(arrival, len(values))
        online = tuple(OnlineType(f"j{n}") for n in range(1, len(values) + 1))
        edges = tuple(("i1", o.id) for o in online)
        return Instance(
            offline_types=(OfflineType("i1", capacity),),
            online_types=online,
            prices=(1.0,),
            edges=edges,
            horizon=len(matrix[0]),
            arrival={(online[j].id, t + 1): q for j, row in enumerate(matrix) for t, q in enumerate(row) if q > 0},
            accept_prob=RoundTable(constant={(i, j, 0): 1.0 for i, j in edges}, default=1.0),
            profit=RoundTable(constant={(i, j, 0): v for (i, j), v in zip(edges, values)}, default=0.0)
        )

    def from_pricing(self, inventory: int, prices: Sequence[float], demand: Sequence[Sequence[float]]) -> Instance:
        """
        Encode single-item dynamic pricing: one seller with `inventory` units,
        one buyer type arriving every round, and price a_k bought with
        probability demand[k][t-1].

        Args:
            inventory: Units for sale (capacity of the single offline type)
            prices: Price levels a_k >= 0
            demand: One row per price, one column per round, entries in (0, 1]

        Returns:
            The pricing Instance
        """
        if isinstance(inventory, bool) or not isinstance(inventory, int) or inventory < 1:
            raise ParameterError(f"inventory must be an integer >= 1, got {inventory}")
        prices = [float(a) for a in prices]
        if not prices or any(not math.isfinite(a) or a < 0 for a in prices):
            raise ParameterError("prices must be a non-empty list of non-negative numbers")
        if len(demand) != len(prices):
            raise ParameterError(f"demand needs one row per price ({len(prices)}), got {len(demand)}")
        horizon = len(demand[0]) if demand else 0
        if horizon < 1 or any(len(row) != horizon for row in demand):
            raise ParameterError("demand rows must share a positive number of rounds")

        by_round = {}
        for k, row in enumerate(demand):
            for t, d in enumerate(row, start=1):
                d = float(d)
                if not 0.0 < d <= 1.0:
                    raise ParameterError(f"demand[{k}][{t - 1}] must lie in (0, 1], got {d}")
                by_round[(("seller", "buyer", k), t)] = d

        return Instance(
            offline_types=(OfflineType("seller", inventory),),
            online_types=(OnlineType("buyer"),),
            prices=tuple(prices),
            edges=(("seller", "buyer"),),
            horizon=horizon,
            arrival={("buyer", t): 1.0 for t in range(1, horizon + 1)},
            accept_prob=RoundTable(by_round=by_round, default=1.0),
            profit=RoundTable(constant={("seller", "buyer", k): a for k, a in enumerate(prices)}, default=0.0)
        )

    def _arrival_matrix(self, arrival: ArrivalInput, n_types: int) -> List[List[float]]:
        if isinstance(arrival, Mapping):
            if not arrival:
                raise ParameterError("arrival mapping is empty")
            horizon = max(t for (_, t) in arrival)
            matrix = [[0.0] * horizon for _ in range(n_types)]
            for (j, t), q in arrival.items():
                if not (1 <= j <= n_types and 1 <= t <= horizon):
                    raise ParameterError(f"arrival key {(j, t)} out of range")
                matrix[j - 1][t - 1] = float(q)
        else:
            matrix = [[float(q) for q in row] for row in arrival]
            if len(matrix) != n_types:
                raise ParameterError(f"arrival needs one row per value ({n_types}), got {len(matrix)}")
            horizon = len(matrix[0]) if matrix else 0
            if horizon < 1 or any(len(row) != horizon for row in matrix):
                raise ParameterError("arrival rows must share a positive number of rounds")

        for t in range(horizon):
            column = [matrix[j][t] for j in range(n_types)]
            if any(not math.isfinite(q) or q < 0 or q > 1 for q in column):
                raise ParameterError(f"arrival probabilities in round {t + 1} must lie in [0, 1]")
            if abs(sum(column) - 1.0) > self.prob_tol:
                raise ParameterError(f"arrival probabilities in round {t + 1} sum to {sum(column)}, expected 1")
        return matrix

    def random_instance(self, seed: int, n_offline: int, n_online: int, n_prices: int, horizon: int,
                        density: float = 1.0) -> Instance:
        """
        Draw a valid unit-capacity instance; identical output for identical arguments.

        Args:
            seed: Generator seed
            n_offline: |I|
            n_online: |J|
            n_prices: K
            horizon: T
            density: Probability that each (i, j) pair is an edge

        Returns:
            A valid random Instance
        """
        for name, value in (('n_offline', n_offline), ('n_online', n_online),
                            ('n_prices', n_prices), ('horizon', horizon)):
            if value < 1:
                raise ParameterError(f"{name} must be positive, got {value}")
        if not 0.0 < density <= 1.0:
            raise ParameterError(f"density must lie in (0, 1], got {density}")

        rng = instance_generator(seed)
        offline = tuple(OfflineType(f"i{n}", 1) for n in range(1, n_offline + 1))
        online = tuple(OnlineType(f"j{n}") for n in range(1, n_online + 1))
        prices = tuple(sorted(float(a) for a in rng.random(n_prices)))

        keep = rng.random((n_offline, n_online)) < density
        edges = tuple((offline[i].id, online[j].id)
                      for i in range(n_offline) for j in range(n_online) if keep[i, j])

        weights = rng.random((n_online, horizon)) + 1e-3
        weights = weights / weights.sum(axis=0, keepdims=True)
        arrival = {(online[j].id, t + 1): float(weights[j, t])
                   for j in range(n_online) for t in range(horizon)}

        assignments = [(i, j, k) for (i, j) in edges for k in range(n_prices)]
        accept = 1.0 - rng.random((len(assignments), horizon))
        profit = rng.random((len(assignments), horizon))
        accept_prob = RoundTable(by_round={(f, t + 1): float(accept[n, t])
                                           for n, f in enumerate(assignments) for t in range(horizon)},
                                 default=1.0)
        profits = RoundTable(by_round={(f, t + 1): float(profit[n, t])
                                       for n, f in enumerate(assignments) for t in range(horizon)},
                             default=0.0)

        return Instance(
            offline_types=offline,
            online_types=online,
            prices=prices,
            edges=edges,
            horizon=horizon,
            arrival=arrival,
            accept_prob=accept_prob,
            profit=profits
        )
