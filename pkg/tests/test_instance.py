import dataclasses
import json
import os
import tempfile
import unittest

from hypothesis import given, settings, strategies as st

from models.instance import Instance, OfflineType, OnlineType, RoundTable
from services.instance_service import InstanceService, ReferenceKind
from tests.test_config import BaseTestCase
from utils.errors import InstanceFormatError, InstanceValidationError, ParameterError
from utils.instance_io import (dump_instance, dumps_instance, load_instance, loads_instance, parse_instance,
                               to_document)


def single_edge(capacity=1, q=1.0, p=1.0, w=2.0, horizon=1):
    return Instance(
        offline_types=(OfflineType("i", capacity),),
        online_types=(OnlineType("j"),),
        prices=(1.0,),
        edges=(("i", "j"),),
        horizon=horizon,
        arrival={("j", t): q for t in range(1, horizon + 1)},
        accept_prob=RoundTable(constant={("i", "j", 0): p}, default=1.0),
        profit=RoundTable(constant={("i", "j", 0): w}, default=0.0)
    )


def break_one_field(inst, field):
    """Return a copy of a valid random instance with one invariant broken, plus the rule expected to fire"""
    i, j = inst.edges[0]
    f = (i, j, 0)
    if field == 'arrival-mass':
        return dataclasses.replace(inst, arrival={**inst.arrival, (j, 1): inst.q(j, 1) / 2}), 'arrival-mass'
    if field == 'negative-q':
        return dataclasses.replace(inst, arrival={**inst.arrival, (j, 1): -0.1}), 'arrival-range'
    if field in ('p-zero', 'p-above-one'):
        value = 0.0 if field == 'p-zero' else 1.5
        table = dataclasses.replace(inst.accept_prob, by_round={**inst.accept_prob.by_round, (f, 1): value})
        return dataclasses.replace(inst, accept_prob=table), 'accept-prob-range'
    if field == 'negative-w':
        table = dataclasses.replace(inst.profit, by_round={**inst.profit.by_round, (f, 1): -1.0})
        return dataclasses.replace(inst, profit=table), 'negative-profit'
    if field == 'capacity-zero':
        offline = (OfflineType(inst.offline_types[0].id, 0),) + inst.offline_types[1:]
        return dataclasses.replace(inst, offline_types=offline), 'capacity'
    if field == 'unknown-endpoint':
        return dataclasses.replace(inst, edges=inst.edges + (("ghost", j),)), 'unknown-edge-endpoint'
    if field == 'price-index':
        k = len(inst.prices)
        table = dataclasses.replace(inst.profit, constant={**inst.profit.constant, (i, j, k): 1.0})
        return dataclasses.replace(inst, profit=table), 'assignment-reference'
    if field == 'horizon-zero':
        return dataclasses.replace(inst, horizon=0), 'horizon'
    raise ValueError(field)


MUTATIONS = ('arrival-mass', 'negative-q', 'p-zero', 'p-above-one', 'negative-w', 'capacity-zero',
             'unknown-endpoint', 'price-index', 'horizon-zero')


class TestValidate(BaseTestCase):
    """Test cases for instance validation"""

    def test_reference_instances_are_valid(self):
        for kind, params in ((ReferenceKind.ATT_CR, {'eps': 0.1}), (ReferenceKind.SAMP_CR, {'eps': 0.01}),
                             (ReferenceKind.ATT_VAR, {'m': 3}), (ReferenceKind.SAMP_VAR, {'m': 3, 'gamma': 0.8})):
            report = self.instances.validate(self.instances.build_reference_instance(kind, **params))
            self.assertTrue(report.ok, f"{kind}: {report.rules()}")
            self.assertEqual(report.violations, ())

    def test_arrival_mass_violation(self):
        inst = single_edge(q=0.9)
        report = self.instances.validate(inst)
        self.assertFalse(report.ok)
        self.assertIn('arrival-mass', report.rules())

    def test_negative_profit_violation(self):
        report = self.instances.validate(single_edge(w=-1.0))
        self.assertEqual(report.rules(), ['negative-profit'])

    def test_accept_prob_must_be_positive(self):
        report = self.instances.validate(single_edge(p=0.0))
        self.assertIn('accept-prob-range', report.rules())

    def test_unknown_edge_endpoint_and_capacity(self):
        inst = dataclasses.replace(single_edge(), offline_types=(OfflineType("i", 0),),
                                   edges=(("i", "j"), ("x", "j")))
        rules = self.instances.validate(inst).rules()
        self.assertIn('capacity', rules)
        self.assertIn('unknown-edge-endpoint', rules)

    def test_assignment_reference_out_of_price_range(self):
        inst = dataclasses.replace(single_edge(), profit=RoundTable(constant={("i", "j", 3): 1.0}))
        self.assertIn('assignment-reference', self.instances.validate(inst).rules())

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1),
           dims=st.tuples(st.integers(1, 4), st.integers(1, 3), st.integers(1, 3), st.integers(1, 4)),
           field=st.sampled_from(MUTATIONS))
    def test_single_field_mutations_are_rejected(self, seed, dims, field):
        service = InstanceService()
        inst = service.random_instance(seed, *dims)
        self.assertTrue(service.validate(inst).ok)
        broken, rule = break_one_field(inst, field)
        report = service.validate(broken)
        self.assertFalse(report.ok, field)
        self.assertIn(rule, report.rules(), field)

    def test_require_valid_raises_with_report(self):
        with self.assertRaises(InstanceValidationError) as ctx:
            self.instances.require_valid(single_edge(q=0.5))
        self.assertIn('arrival-mass', ctx.exception.report.rules())

    def test_report_to_dict(self):
        document = self.instances.validate(single_edge(w=-1.0)).to_dict()
        self.assertFalse(document['ok'])
        self.assertEqual(document['violations'][0]['rule'], 'negative-profit')


class TestExpandCapacities(BaseTestCase):
    """Test cases for unit-capacity expansion"""

    def two_types(self):
        return Instance(
            offline_types=(OfflineType("a", 2), OfflineType("b", 1)),
            online_types=(OnlineType("x"), OnlineType("y")),
            prices=(1.0,),
            edges=(("a", "x"), ("a", "y"), ("b", "x")),
            horizon=2,
            arrival={("x", 1): 0.5, ("y", 1): 0.5, ("x", 2): 1.0},
            accept_prob=RoundTable(constant={("a", "x", 0): 0.5}, default=1.0),
            profit=RoundTable(constant={("a", "x", 0): 2.0, ("a", "y", 0): 1.0, ("b", "x", 0): 1.5},
                              by_round={(("a", "y", 0), 2): 4.0})
        )

    def test_copy_counts(self):
        inst = Instance(
            offline_types=(OfflineType("a", 2), OfflineType("b", 1)),
            online_types=(OnlineType("x"), OnlineType("y")),
            prices=(1.0,),
            edges=(("a", "x"), ("a", "y"), ("b", "y")),
            horizon=1,
            arrival={("x", 1): 1.0}
        )
        expanded = self.instances.expand_capacities(inst)
        self.assertEqual(expanded.offline_ids, ("a#1", "a#2", "b"))
        self.assertEqual(len(expanded.edges), 5)
        self.assertTrue(expanded.is_unit_capacity)
        self.assertEqual(expanded.total_capacity, inst.total_capacity)

    def test_copies_inherit_tables_and_origin(self):
        expanded = self.instances.expand_capacities(self.two_types())
        for copy_id in ("a#1", "a#2"):
            self.assertEqual(expanded.original_of(copy_id), "a")
            self.assertEqual(expanded.p((copy_id, "x", 0), 1), 0.5)
            self.assertEqual(expanded.w((copy_id, "y", 0), 1), 1.0)
            self.assertEqual(expanded.w((copy_id, "y", 0), 2), 4.0)
        self.assertEqual(expanded.original_of("b"), "b")

    def test_unit_instance_is_unchanged(self):
        inst = self.instances.build_reference_instance(ReferenceKind.ATT_VAR, m=3)
        expanded = self.instances.expand_capacities(inst)
        self.assertEqual(expanded.offline_ids, inst.offline_ids)
        self.assertEqual(expanded.edges, inst.edges)
        self.assertEqual(expanded.total_capacity, 3)
        self.assertEqual(dumps_instance(expanded), dumps_instance(inst))

    def test_invalid_instance_is_rejected(self):
        with self.assertRaises(InstanceValidationError):
            self.instances.expand_capacities(single_edge(q=0.2))


class TestReferenceInstances(BaseTestCase):
    """Test cases for the four tightness instances"""

    def test_att_cr_shape(self):
        inst = self.instances.build_reference_instance(ReferenceKind.ATT_CR, eps=0.1)
        self.assertEqual(inst.horizon, 2)
        self.assertEqual(len(inst.offline_types), 1)
        self.assertEqual(inst.online_ids, ("j1", "j2", "j3"))
        arrival = [[inst.q(j, t) for t in inst.rounds()] for j in inst.online_ids]
        self.assertEqual(arrival[0], [1.0, 0.0])
        self.assertAlmostEqual(arrival[1][1], 0.9)
        self.assertAlmostEqual(arrival[2][1], 0.1)
        profits = [inst.w(f, 2) for f in inst.assignments]
        self.assertEqual(profits[:2], [1.0, 0.0])
        self.assertAlmostEqual(profits[2], 10.0)

    def test_samp_cr_high_profit(self):
        inst = self.instances.build_reference_instance(ReferenceKind.SAMP_CR, eps=0.01)
        self.assertAlmostEqual(inst.w(("i1", "j3", 0), 2), 10000.0)

    def test_att_var_shape(self):
        inst = self.instances.build_reference_instance(ReferenceKind.ATT_VAR, m=3)
        self.assertEqual(len(inst.offline_types), 3)
        self.assertEqual(len(inst.online_types), 3)
        self.assertEqual(len(inst.edges), 3)
        self.assertEqual(inst.horizon, 3)

    def test_samp_var_acceptance(self):
        inst = self.instances.build_reference_instance(ReferenceKind.SAMP_VAR, m=3, gamma=0.8)
        for f in inst.assignments:
            for t in inst.rounds():
                self.assertAlmostEqual(inst.p(f, t), 0.625)
        zero = self.instances.build_reference_instance(ReferenceKind.SAMP_VAR, m=2, gamma=0.0)
        self.assertEqual(zero.p(("i1", "j1", 0), 1), 1.0)

    def test_parameter_errors(self):
        with self.assertRaises(ParameterError):
            self.instances.build_reference_instance(ReferenceKind.ATT_CR, eps=1.0)
        with self.assertRaises(ParameterError):
            self.instances.build_reference_instance(ReferenceKind.ATT_VAR, m=0)
        with self.assertRaises(ParameterError):
            self.instances.build_reference_instance(ReferenceKind.SAMP_VAR, m=2, gamma=1.5)
        with self.assertRaises(ParameterError):
            self.instances.build_reference_instance("fig-9", eps=0.1)


class TestBuilders(BaseTestCase):
    """Test cases for prophet, pricing and random builders"""

    def test_prophet_matches_att_cr_structure(self):
        eps = 0.1
        inst = self.instances.from_prophet([1.0, 1.0 / eps, 0.0], {(1, 1): 1.0, (3, 2): 1.0 - eps, (2, 2): eps})
        self.assertTrue(self.instances.validate(inst).ok)
        expanded, sol = self.prepare(inst)
        self.assertAlmostEqual(sol.objective, 2.0 - eps, delta=1e-7)

    def test_prophet_single_value(self):
        _, sol = self.prepare(self.instances.from_prophet([5.0], [[1.0]]))
        self.assertAlmostEqual(sol.objective, 5.0, delta=1e-9)

    def test_prophet_capacity(self):
        inst = self.instances.from_prophet([3.0, 1.0], [[0.5, 0.5], [0.5, 0.5]], capacity=2)
        self.assertEqual(inst.total_capacity, 2)
        expanded = self.instances.expand_capacities(inst)
        self.assertEqual(len(expanded.offline_types), 2)

    def test_prophet_errors(self):
        with self.assertRaises(ParameterError):
            self.instances.from_prophet([-1.0], [[1.0]])
        with self.assertRaises(ParameterError):
            self.instances.from_prophet([1.0, 2.0], [[0.5], [0.4]])
        with self.assertRaises(ParameterError):
            self.instances.from_prophet([1.0], [[1.0]], capacity=0)

    def test_pricing(self):
        inst = self.instances.from_pricing(2, [1.0, 2.0], [[0.9, 0.8], [0.5, 0.4]])
        self.assertTrue(self.instances.validate(inst).ok)
        self.assertEqual(inst.horizon, 2)
        self.assertEqual(inst.p(("seller", "buyer", 1), 2), 0.4)
        self.assertEqual(inst.w(("seller", "buyer", 1), 1), 2.0)
        with self.assertRaises(ParameterError):
            self.instances.from_pricing(1, [1.0], [[0.0]])

    def test_random_is_deterministic(self):
        a = self.instances.random_instance(11, 3, 3, 2, 4)
        b = self.instances.random_instance(11, 3, 3, 2, 4)
        self.assertEqual(dumps_instance(a), dumps_instance(b))

    def test_random_arrival_columns(self):
        inst = self.instances.random_instance(3, 3, 3, 2, 4)
        self.assertEqual(inst.horizon, 4)
        for t in inst.rounds():
            self.assertAlmostEqual(sum(inst.q(j, t) for j in inst.online_ids), 1.0, delta=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1),
           dims=st.tuples(st.integers(1, 5), st.integers(1, 4), st.integers(1, 3), st.integers(1, 5)),
           density=st.floats(min_value=0.2, max_value=1.0))
    def test_random_instances_validate(self, seed, dims, density):
        inst = InstanceService().random_instance(seed, *dims, density=density)
        self.assertTrue(InstanceService().validate(inst).ok)
        self.assertTrue(inst.is_unit_capacity)


class TestInstanceCodec(BaseTestCase):
    """Test cases for the JSON instance format"""

    def test_canonical_round_trip(self):
        for inst in (self.instances.build_reference_instance(ReferenceKind.ATT_CR, eps=0.1),
                     self.instances.random_instance(5, 3, 2, 2, 3),
                     self.instances.from_pricing(3, [1.0, 2.5], [[0.9, 0.7], [0.3, 0.2]])):
            text = dumps_instance(inst)
            self.assertEqual(dumps_instance(loads_instance(text)), text)

    def test_dense_arrival_and_defaults(self):
        document = {
            'offline': ['i'], 'online': ['a', 'b'], 'prices': [1.0], 'edges': [['i', 'a'], ['i', 'b']],
            'horizon': 2, 'arrival': [[1.0, 0.25], [0.0, 0.75]],
            'profit': [{'edge': 0, 'price_index': 0, 'value': 3.0},
                       {'edge': ['i', 'b'], 'price_index': 0, 'value': 1.0, 't': 2}]
        }
        inst = parse_instance(document)
        self.assertEqual(inst.q('b', 1), 0.0)
        self.assertEqual(inst.q('b', 2), 0.75)
        self.assertEqual(inst.p(('i', 'a', 0), 1), 1.0)
        self.assertEqual(inst.w(('i', 'a', 0), 2), 3.0)
        self.assertEqual(inst.w(('i', 'b', 0), 1), 0.0)
        self.assertEqual(inst.w(('i', 'b', 0), 2), 1.0)
        self.assertTrue(self.instances.validate(inst).ok)

    def test_canonical_form_is_sparse_and_sorted(self):
        document = to_document(self.instances.build_reference_instance(ReferenceKind.ATT_CR, eps=0.1))
        self.assertEqual([(a['t'], a['online']) for a in document['arrival']],
                         [(1, 'j1'), (2, 'j2'), (2, 'j3')])
        self.assertTrue(all('t' not in entry for entry in document['profit']))

    def test_format_errors(self):
        with self.assertRaises(InstanceFormatError):
            loads_instance("{not json")
        with self.assertRaises(InstanceFormatError):
            parse_instance({'offline': []})
        with self.assertRaises(InstanceFormatError):
            parse_instance({'offline': ['i'], 'online': ['j'], 'prices': [1], 'edges': [['i']],
                            'horizon': 1, 'arrival': [[1.0]]})
        with self.assertRaises(InstanceFormatError):
            parse_instance({'offline': ['i'], 'online': ['j'], 'prices': [1], 'edges': [['i', 'j']],
                            'horizon': 1, 'arrival': [[1.0, 0.0]]})
        base = {'offline': ['i'], 'online': ['j'], 'prices': [1], 'edges': [['i', 'j']], 'horizon': 1,
                'arrival': [[1.0]]}
        for key, value in (('offline', [1]), ('online', [None]), ('profit', [3.0]), ('accept_prob', ['x'])):
            with self.assertRaises(InstanceFormatError, msg=key):
                parse_instance({**base, key: value})

    def test_table_defaults_round_trip(self):
        inst = dataclasses.replace(single_edge(), accept_prob=RoundTable(default=0.5),
                                   profit=RoundTable(default=2.0))
        document = to_document(inst)
        self.assertEqual((document['accept_prob_default'], document['profit_default']), (0.5, 2.0))
        loaded = loads_instance(dumps_instance(inst))
        self.assertEqual(loaded.p(("i", "j", 0), 1), 0.5)
        self.assertEqual(loaded.w(("i", "j", 0), 1), 2.0)
        self.assertAlmostEqual(self.lp.solve_instance(loaded).objective, 1.0, delta=1e-9)
        self.assertNotIn('profit_default', to_document(single_edge()))

    def test_file_round_trip(self):
        inst = self.instances.build_reference_instance(ReferenceKind.SAMP_VAR, m=2, gamma=0.8)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'inst.json')
            dump_instance(inst, path)
            loaded = load_instance(path)
            with open(path, encoding='utf-8') as f:
                self.assertEqual(json.loads(f.read())['horizon'], 2)
        self.assertEqual(dumps_instance(loaded), dumps_instance(inst))


if __name__ == '__main__':
    unittest.main()
