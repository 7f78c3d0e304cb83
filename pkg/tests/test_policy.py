import unittest

from models.policy import AttenuationTable, PolicyConfig, PolicyKind
from services.instance_service import ReferenceKind
from tests.test_config import BaseTestCase
from tests.test_instance import single_edge
from utils.errors import ContractError, ParameterError


class TestPolicyConfig(BaseTestCase):

    def test_gamma_ranges(self):
        self.assertEqual(PolicyConfig('ATT', 0.5).kind, PolicyKind.ATT)
        self.assertEqual(PolicyConfig('samp', 1.0).gamma_bar, 0.5)
        for kind, gamma in ((PolicyKind.ATT, 0.6), (PolicyKind.SAMP, 1.1), (PolicyKind.ATT, -0.1), ('greedy', 0.2)):
            with self.assertRaises(ParameterError):
                PolicyConfig(kind, gamma)

    def test_label(self):
        self.assertEqual(PolicyConfig(PolicyKind.SAMP, 0.8).label(), "SAMP(0.8)")


class TestAttenuation(BaseTestCase):
    """Test cases for ATT attenuation factors"""

    def test_att_cr_values(self):
        inst, sol = self.reference(ReferenceKind.ATT_CR, eps=0.1)
        table = self.policies.precompute_attenuation(inst, sol, 0.5)
        self.assertEqual(table.get("i1", 1), 1.0)
        self.assertAlmostEqual(table.get("i1", 2), 0.55, delta=1e-12)

    def test_zero_gamma(self):
        inst, sol = self.reference(ReferenceKind.ATT_CR, eps=0.1)
        table = self.policies.precompute_attenuation(inst, sol, 0.0)
        self.assertTrue(all(beta == 1.0 for beta in table.beta.values()))

    def test_bounds_and_monotonicity_on_random_instances(self):
        for seed in range(20):
            inst, sol = self.prepare(self.instances.random_instance(seed, 3, 3, 2, 4))
            for gamma in (0.2, 0.5):
                table = self.policies.precompute_attenuation(inst, sol, gamma)
                self.assertGreaterEqual(table.minimum(), gamma - 1e-12)
                for i in inst.offline_ids:
                    self.assertEqual(table.get(i, 1), 1.0)
                    betas = [table.get(i, t) for t in inst.rounds()]
                    self.assertTrue(all(b >= a - 1e-15 for a, b in zip(betas[1:], betas)))

    def test_errors(self):
        inst, sol = self.reference(ReferenceKind.ATT_CR, eps=0.1)
        with self.assertRaises(ParameterError):
            self.policies.precompute_attenuation(inst, sol, 0.7)
        bad = type(sol)(x={key: 2.0 * v for key, v in sol.x.items()}, objective=0.0)
        with self.assertRaises(ContractError):
            self.policies.precompute_attenuation(inst, bad, 0.5)
        with self.assertRaises(ContractError):
            self.policies.precompute_attenuation(single_edge(capacity=2), sol, 0.5)


class TestSamplingDistribution(BaseTestCase):
    """Test cases for per-round sampling masses"""

    def test_att_query(self):
        inst, sol = self.reference(ReferenceKind.ATT_CR, eps=0.1)
        state = self.policies.initial_state(inst, sol, PolicyConfig(PolicyKind.ATT, 0.5))
        probs, reject = self.policies.sampling_distribution(state, "j3", 2)
        self.assertAlmostEqual(probs[("i1", "j3", 0)], 0.5 / 0.55, delta=1e-9)
        self.assertAlmostEqual(reject, 1.0 - 0.5 / 0.55, delta=1e-9)

    def test_samp_query(self):
        inst, sol = self.reference(ReferenceKind.ATT_CR, eps=0.1)
        state = self.policies.initial_state(inst, sol, PolicyConfig(PolicyKind.SAMP, 0.5))
        probs, _ = self.policies.sampling_distribution(state, "j3", 2)
        self.assertAlmostEqual(probs[("i1", "j3", 0)], 0.5, delta=1e-12)

    def test_zero_gamma_rejects(self):
        inst, sol = self.reference(ReferenceKind.ATT_CR, eps=0.1)
        state = self.policies.initial_state(inst, sol, PolicyConfig(PolicyKind.SAMP, 0.0))
        probs, reject = self.policies.sampling_distribution(state, "j1", 1)
        self.assertEqual(reject, 1.0)
        self.assertTrue(all(p == 0.0 for p in probs.values()))

    def test_non_arriving_type(self):
        inst, sol = self.reference(ReferenceKind.ATT_CR, eps=0.1)
        state = self.policies.initial_state(inst, sol, PolicyConfig(PolicyKind.SAMP, 0.5))
        with self.assertRaises(ContractError):
            self.policies.sampling_distribution(state, "j1", 2)

    def test_masses_are_valid_and_ignore_safe_set(self):
        for seed in range(20):
            inst, sol = self.prepare(self.instances.random_instance(seed, 4, 3, 2, 3))
            for config in (PolicyConfig(PolicyKind.ATT, 0.5), PolicyConfig(PolicyKind.SAMP, 1.0)):
                state = self.policies.initial_state(inst, sol, config)
                emptied = type(state)(inst, sol, config, state.attenuation, frozenset(), 1)
                for t in inst.rounds():
                    for j in inst.arrival_support(t):
                        probs, reject = self.policies.sampling_distribution(state, j, t)
                        self.assertLessEqual(sum(probs.values()), 1.0 + 1e-12)
                        self.assertGreaterEqual(reject, 0.0)
                        self.assertEqual(list(probs), list(inst.assignments_for_online(j)))
                        self.assertEqual(self.policies.sampling_distribution(emptied, j, t)[0], probs)

    def test_draw_assignment_cumulative_order(self):
        probs = {("i", "a", 0): 0.0, ("i", "a", 1): 0.25, ("k", "a", 0): 0.5}
        self.assertEqual(self.policies.draw_assignment(probs, 0.0), ("i", "a", 1))
        self.assertEqual(self.policies.draw_assignment(probs, 0.25), ("k", "a", 0))
        self.assertIsNone(self.policies.draw_assignment(probs, 0.75))


class TestStep(BaseTestCase):
    """Test cases for applying one round"""

    def setUp(self):
        super().setUp()
        self.inst = single_edge()
        self.sol = self.lp.solve_instance(self.inst)
        self.state = self.policies.initial_state(self.inst, self.sol, PolicyConfig(PolicyKind.SAMP, 1.0))
        self.f = ("i", "j", 0)

    def test_accepted_on_safe_agent(self):
        state, outcome = self.policies.step(self.state, 1, "j", self.f, True)
        self.assertEqual(state.safe, frozenset())
        self.assertEqual(state.t, 2)
        self.assertEqual(outcome.profit, 2.0)
        self.assertTrue(outcome.chi)

    def test_unsafe_agent_is_rejected(self):
        emptied, _ = self.policies.step(self.state, 1, "j", self.f, True)
        state, outcome = self.policies.step(emptied, 1, "j", self.f, True)
        self.assertEqual(state.safe, frozenset())
        self.assertFalse(outcome.safe)
        self.assertEqual(outcome.profit, 0.0)
        self.assertFalse(outcome.chi)

    def test_declined_and_no_sample(self):
        state, outcome = self.policies.step(self.state, 1, "j", self.f, False)
        self.assertEqual(state.safe, self.state.safe)
        self.assertTrue(outcome.safe)
        self.assertFalse(outcome.chi)
        state, outcome = self.policies.step(self.state, 1, "j", None, False)
        self.assertEqual(state.safe, self.state.safe)
        self.assertIsNone(outcome.sampled)
        self.assertEqual(outcome.profit, 0.0)

    def test_assignment_must_match_arrival(self):
        with self.assertRaises(ContractError):
            self.policies.step(self.state, 1, "j", ("i", "other", 0), True)

    def test_attenuation_table_is_read_only(self):
        table = AttenuationTable(gamma=0.5, beta={("i", 1): 1.0})
        with self.assertRaises(TypeError):
            table.beta[("i", 2)] = 0.5


if __name__ == '__main__':
    unittest.main()
