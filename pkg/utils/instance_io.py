import json
from typing import Dict, List, Tuple, Union

from models.instance import Instance, OfflineType, OnlineType, RoundTable
from utils.errors import InstanceFormatError

REQUIRED_KEYS = ('offline', 'online', 'prices', 'edges', 'horizon', 'arrival')
# table defaults are written only when they differ from these
DEFAULT_ACCEPT_PROB = 1.0
DEFAULT_PROFIT = 0.0


def parse_instance(document: Dict) -> Instance:
    """
    Build an Instance from a parsed JSON document.

    Shape problems raise InstanceFormatError; value problems (negative
    profits, bad probability mass, ...) are left for validation.

    Args:
        document: Mapping with keys offline, online, prices, edges, horizon,
            arrival and optional accept_prob / profit plus their
            accept_prob_default / profit_default

    Returns:
        The parsed Instance
    """
    if not isinstance(document, dict):
        raise InstanceFormatError("Instance document must be a JSON object")

    missing = [key for key in REQUIRED_KEYS if key not in document]
    if missing:
        raise InstanceFormatError(f"Missing required keys: {', '.join(missing)}")

    try:
        offline = tuple(_parse_offline(entry) for entry in document['offline'])
        online = tuple(_parse_online(entry) for entry in document['online'])
        prices = tuple(float(a) for a in document['prices'])
        edges = tuple(_parse_edge_pair(e) for e in document['edges'])
        horizon = document['horizon']
        if isinstance(horizon, bool) or not isinstance(horizon, int):
            raise InstanceFormatError(f"horizon must be an integer, got {horizon!r}")
        arrival = _parse_arrival(document['arrival'], [o.id for o in online], horizon)
        accept_prob = _parse_round_table(document.get('accept_prob', []), edges,
                                         default=float(document.get('accept_prob_default', DEFAULT_ACCEPT_PROB)))
        profit = _parse_round_table(document.get('profit', []), edges,
                                    default=float(document.get('profit_default', DEFAULT_PROFIT)))
    except InstanceFormatError:
        raise
    except (TypeError, ValueError, KeyError, IndexError, AttributeError) as e:
        raise InstanceFormatError(f"Malformed instance document: {str(e)}") from e

    return Instance(
        offline_types=offline,
        online_types=online,
        prices=prices,
        edges=edges,
        horizon=horizon,
        arrival=arrival,
        accept_prob=accept_prob,
        profit=profit
    )


def to_document(inst: Instance) -> Dict:
    """Canonical JSON-ready form: sparse sorted arrival, constant entries before per-round ones"""
    edge_index = {edge: n for n, edge in enumerate(inst.edges)}
    online_index = {j: n for n, j in enumerate(inst.online_ids)}

    arrival = sorted(
        ((t, j, q) for (j, t), q in inst.arrival.items() if q != 0.0),
        key=lambda item: (item[0], online_index.get(item[1], len(online_index)), item[1])
    )

    document = {
        'offline': [{'id': o.id, 'capacity': o.capacity} for o in inst.offline_types],
        'online': [{'id': o.id} for o in inst.online_types],
        'prices': list(inst.prices),
        'edges': [[i, j] for i, j in inst.edges],
        'horizon': inst.horizon,
        'arrival': [{'online': j, 't': t, 'value': q} for t, j, q in arrival],
        'accept_prob': _table_entries(inst.accept_prob, edge_index),
        'profit': _table_entries(inst.profit, edge_index)
    }
    if inst.accept_prob.default != DEFAULT_ACCEPT_PROB:
        document['accept_prob_default'] = inst.accept_prob.default
    if inst.profit.default != DEFAULT_PROFIT:
        document['profit_default'] = inst.profit.default
    return document


def dumps_instance(inst: Instance) -> str:
    return json.dumps(to_document(inst), sort_keys=True, indent=2) + "\n"


def loads_instance(text: str) -> Instance:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceFormatError(f"Invalid JSON: {str(e)}") from e
    return parse_instance(document)


def load_instance(path: str) -> Instance:
    with open(path, encoding='utf-8') as f:
        return loads_instance(f.read())


def dump_instance(inst: Instance, path: str) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        f.write(dumps_instance(inst))


def _parse_offline(entry) -> OfflineType:
    if isinstance(entry, str):
        return OfflineType(id=entry)
    if not isinstance(entry, dict):
        raise InstanceFormatError(f"Offline entries must be ids or objects, got {entry!r}")
    capacity = entry.get('capacity', 1)
    if isinstance(capacity, float) and capacity.is_integer():
        capacity = int(capacity)
    return OfflineType(id=str(entry['id']), capacity=capacity)


def _parse_online(entry) -> OnlineType:
    if isinstance(entry, str):
        return OnlineType(id=entry)
    if not isinstance(entry, dict):
        raise InstanceFormatError(f"Online entries must be ids or objects, got {entry!r}")
    return OnlineType(id=str(entry['id']))


def _parse_edge_pair(edge) -> Tuple[str, str]:
    if not isinstance(edge, (list, tuple)) or len(edge) != 2:
        raise InstanceFormatError(f"Edge must be an [offline, online] pair, got {edge!r}")
    return str(edge[0]), str(edge[1])


def _parse_arrival(arrival, online_ids: List[str], horizon: int) -> Dict[Tuple[str, int], float]:
    result: Dict[Tuple[str, int], float] = {}
    if not isinstance(arrival, list):
        raise InstanceFormatError("arrival must be a list (dense rows or sparse triplets)")

    if arrival and all(isinstance(row, list) for row in arrival):
        # dense: one row per online type, one column per round
        if len(arrival) != len(online_ids):
            raise InstanceFormatError(f"Dense arrival needs {len(online_ids)} rows, got {len(arrival)}")
        for j, row in zip(online_ids, arrival):
            if len(row) != horizon:
                raise InstanceFormatError(f"Dense arrival row for {j} needs {horizon} columns, got {len(row)}")
            for t, value in enumerate(row, start=1):
                if float(value) != 0.0:
                    result[(j, t)] = float(value)
        return result

    for entry in arrival:
        if not isinstance(entry, dict):
            raise InstanceFormatError(f"Sparse arrival entries must be objects, got {entry!r}")
        result[(str(entry['online']), int(entry['t']))] = float(entry['value'])
    return result


def _resolve_edge(ref, edges: Tuple[Tuple[str, str], ...]) -> Tuple[str, str]:
    if isinstance(ref, int) and not isinstance(ref, bool):
        if not 0 <= ref < len(edges):
            raise InstanceFormatError(f"Edge index {ref} out of range")
        return edges[ref]
    return _parse_edge_pair(ref)


def _parse_round_table(entries, edges, default: float) -> RoundTable:
    if not isinstance(entries, list):
        raise InstanceFormatError("accept_prob / profit must be lists of entries")
    constant = {}
    by_round = {}
    for entry in entries:
        if not isinstance(entry, dict):
            raise InstanceFormatError(f"accept_prob / profit entries must be objects, got {entry!r}")
        i, j = _resolve_edge(entry['edge'], edges)
        k = entry['price_index']
        if isinstance(k, bool) or not isinstance(k, int):
            raise InstanceFormatError(f"price_index must be an integer, got {k!r}")
        f = (i, j, k)
        value = float(entry['value'])
        if entry.get('t') is None:
            constant[f] = value
        else:
            by_round[(f, int(entry['t']))] = value
    return RoundTable(constant=constant, by_round=by_round, default=default)


def _table_entries(table: RoundTable, edge_index: Dict) -> List[Dict]:
    def order(item):
        f, t, _ = item
        return (0 if t is None else 1, edge_index.get((f[0], f[1]), len(edge_index)), f[0], f[1], f[2], t or 0)

    entries: List[Dict[str, Union[int, float, list]]] = []
    for f, t, value in sorted(table.entries(), key=order):
        entry = {'edge': [f[0], f[1]], 'price_index': f[2], 'value': value}
        if t is not None:
            entry['t'] = t
        entries.append(entry)
    return entries
