import io
import json
import os
import shutil
import sys
import tempfile
import unittest
from unittest.mock import patch

import pandas as pd

import main
from config.settings import Config
from models.instance import Instance, OfflineType, OnlineType, RoundTable
from src.app import EXIT_BUDGET, EXIT_DOMAIN, EXIT_IO, EXIT_OK, create_parser, run
from tests.test_instance import single_edge
from utils.instance_io import dump_instance, load_instance


class CliTestCase(unittest.TestCase):
    """Runs the command line in-process and captures stdout"""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def path(self, name):
        return os.path.join(self.tmp, name)

    def call(self, *argv):
        out = io.StringIO()
        code = run(list(argv), stdout=out)
        return code, out.getvalue()


class TestValidateCommand(CliTestCase):

    def test_valid_instance(self):
        dump_instance(single_edge(), self.path('edge.json'))
        self.assertEqual(self.call('validate', self.path('edge.json')), (EXIT_OK, "ok\n"))

    def test_invalid_instance_lists_violations(self):
        bad = Instance(offline_types=(OfflineType("i"),), online_types=(OnlineType("a"), OnlineType("b")),
                       prices=(1.0,), edges=(("i", "a"),), horizon=1, arrival={("a", 1): 0.7, ("b", 1): 0.6})
        dump_instance(bad, self.path('bad.json'))
        code, text = self.call('validate', self.path('bad.json'))
        self.assertEqual(code, EXIT_DOMAIN)
        self.assertTrue(text.strip())
        self.assertNotIn("ok", text.splitlines())

    def test_unreadable_input(self):
        with open(self.path('broken.json'), 'w') as f:
            f.write("{not json")
        self.assertEqual(self.call('validate', self.path('broken.json'))[0], EXIT_IO)
        self.assertEqual(self.call('validate', self.path('missing.json'))[0], EXIT_IO)

    def test_malformed_entries_exit_two(self):
        for key, value in (('offline', [1]), ('online', [None]), ('profit', [3.0])):
            document = {'offline': ['i'], 'online': ['j'], 'prices': [1], 'edges': [['i', 'j']], 'horizon': 1,
                        'arrival': [[1.0]], key: value}
            with open(self.path('malformed.json'), 'w') as f:
                json.dump(document, f)
            self.assertEqual(self.call('validate', self.path('malformed.json'))[0], EXIT_IO, key)

    def test_argparse_errors_exit_two(self):
        with self.assertRaises(SystemExit) as ctx:
            create_parser().parse_args(['reproduce', '9'])
        self.assertEqual(ctx.exception.code, 2)


class TestLpCommand(CliTestCase):

    def test_reference_objective(self):
        self.assertEqual(self.call('lp', '--ref', 'att-cr', '--eps', '0.1'), (EXIT_OK, "1.900000000\n"))

    def test_instance_file(self):
        dump_instance(single_edge(), self.path('edge.json'))
        self.assertEqual(self.call('lp', self.path('edge.json')), (EXIT_OK, "2.000000000\n"))
        self.assertEqual(self.call('lp', '--instance', self.path('edge.json')), (EXIT_OK, "2.000000000\n"))

    def test_dump(self):
        code, text = self.call('lp', '--ref', 'att-var', '--m', '3', '--dump', '--out', self.path('lp.txt'))
        self.assertEqual((code, text), (EXIT_OK, "3.000000000\n"))
        with open(self.path('lp.txt')) as f:
            self.assertIn("maximize", f.read())

    def test_missing_source(self):
        self.assertEqual(self.call('lp')[0], EXIT_DOMAIN)

    def test_column_cap_exits_four(self):
        with patch.object(Config, 'GIGMATCH_MAX_LP_COLUMNS', 2):
            self.assertEqual(self.call('lp', '--ref', 'att-cr', '--eps', '0.1')[0], EXIT_BUDGET)


class TestRunCommands(CliTestCase):
    """Test cases for run / sweep / exact"""

    def test_zero_gamma_run(self):
        code, text = self.call('run', '--ref', 'att-cr', '--eps', '0.1', '--policy', 'samp', '--gamma', '0',
                               '--n', '50', '--seed', '1')
        self.assertEqual(code, EXIT_OK)
        row = pd.read_csv(io.StringIO(text)).iloc[0]
        self.assertEqual(row['mean_profit'], 0.0)
        self.assertEqual(row['mean_h'], 0.0)
        self.assertAlmostEqual(row['opt_lp'], 1.9)

    def test_json_run_with_trace_and_risk(self):
        code, text = self.call('run', '--ref', 'att-var', '--m', '10', '--gamma', '0.3', '--n', '400',
                               '--format', 'json', '--trace', self.path('trace.csv'), '--trace-reps', '3',
                               '--risk-threshold', '0.5')
        self.assertEqual(code, EXIT_OK)
        row = json.loads(text)[0]
        self.assertEqual(row['policy'], 'att')
        self.assertAlmostEqual(row['var_bound'], 2.1)
        self.assertTrue(0.0 <= row['risk_bound'] <= 1.0)
        trace = pd.read_csv(self.path('trace.csv'))
        self.assertEqual(len(trace), 3 * 10)

    def test_out_of_range_gamma(self):
        self.assertEqual(self.call('run', '--ref', 'att-cr', '--eps', '0.1', '--gamma', '0.7', '--n', '10')[0],
                         EXIT_DOMAIN)

    def test_sweep(self):
        code, text = self.call('sweep', '--ref', 'att-cr', '--eps', '0.1', '--gammas', '0.1,0.3,0.5', '--n', '200')
        self.assertEqual(code, EXIT_OK)
        frame = pd.read_csv(io.StringIO(text))
        self.assertEqual(len(frame), 3)
        self.assertEqual(list(frame['gamma']), [0.1, 0.3, 0.5])
        self.assertEqual(self.call('sweep', '--ref', 'att-cr', '--eps', '0.1', '--gammas', '', '--n', '10')[0],
                         EXIT_DOMAIN)

    def test_att_variance_grows_with_gamma(self):
        code, text = self.call('sweep', '--ref', 'att-var', '--m', '20', '--policy', 'att',
                               '--gammas', '0.1,0.3,0.5', '--n', '4000', '--seed', '3')
        self.assertEqual(code, EXIT_OK)
        frame = pd.read_csv(io.StringIO(text))
        self.assertTrue(frame['var_h'].is_monotonic_increasing, frame.to_string())
        for _, row in frame.iterrows():
            self.assertLessEqual(abs(row['var_h'] - row['var_bound']), 4 * row['se_var_h'], row['gamma'])

    def test_samp_variance_stays_at_quarter_capacity(self):
        code, text = self.call('sweep', '--ref', 'samp-var', '--m', '20', '--policy', 'samp',
                               '--gammas', '0.5,0.7,0.9', '--n', '4000', '--seed', '3')
        self.assertEqual(code, EXIT_OK)
        frame = pd.read_csv(io.StringIO(text))
        for _, row in frame.iterrows():
            self.assertAlmostEqual(row['var_bound'], 0.25 * 20)
            self.assertLessEqual(abs(row['var_h'] - row['var_bound']), 4 * row['se_var_h'], row['gamma'])

    def test_exact(self):
        code, text = self.call('exact', '--ref', 'att-cr', '--eps', '0.1', '--format', 'json')
        self.assertEqual(code, EXIT_OK)
        report = json.loads(text)
        self.assertAlmostEqual(report['expected_profit'], 0.95, delta=1e-9)
        self.assertAlmostEqual(report['opt_lp'], 1.9, delta=1e-7)

    def test_exact_over_agent_cap_exits_four(self):
        with patch.object(Config, 'GIGMATCH_MAX_AGENTS', 2):
            code, _ = self.call('exact', '--instance', self._three_way_instance(), '--policy', 'samp',
                                '--gamma', '1')
        self.assertEqual(code, EXIT_BUDGET)

    def _three_way_instance(self):
        online = tuple(OnlineType(f"j{n}") for n in range(1, 4))
        inst = Instance(offline_types=tuple(OfflineType(f"i{n}") for n in range(1, 4)), online_types=online,
                        prices=(1.0,), edges=tuple((f"i{n}", f"j{n}") for n in range(1, 4)), horizon=1,
                        arrival={(o.id, 1): 1.0 / 3 for o in online},
                        profit=RoundTable(constant={(f"i{n}", f"j{n}", 0): 1.0 for n in range(1, 4)}))
        dump_instance(inst, self.path('three.json'))
        return self.path('three.json')


class TestInstanceAndReproduce(CliTestCase):

    def test_reference_instance_round_trips(self):
        code, _ = self.call('instance', '--ref', 'samp-var', '--m', '4', '--ref-gamma', '0.8',
                            '--out', self.path('ref.json'))
        self.assertEqual(code, EXIT_OK)
        inst = load_instance(self.path('ref.json'))
        self.assertEqual(len(inst.offline_types), 4)
        self.assertEqual(self.call('validate', self.path('ref.json'))[1], "ok\n")

    def test_generators(self):
        code, text = self.call('instance', '--random', '3', '--size', '2,2,2,3')
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(json.loads(text)['horizon'], 3)
        code, text = self.call('instance', '--prophet', '3,1', '--horizon', '4', '--capacity', '2')
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(json.loads(text)['offline'], [{'id': 'i1', 'capacity': 2}])
        self.assertEqual(self.call('instance', '--random', '3', '--size', '2,2')[0], EXIT_DOMAIN)
        self.assertEqual(self.call('instance', '--pricing', '1,2')[0], EXIT_DOMAIN)

    def test_reproduce_checks_pass(self):
        for figure, n in (('1', '4000'), ('2', '4000'), ('3', '200000'), ('4', '4000')):
            code, text = self.call('reproduce', figure, '--n', n, '--seed', '7')
            frame = pd.read_csv(io.StringIO(text))
            self.assertEqual(code, EXIT_OK, frame.to_string())
            self.assertTrue(frame['passed'].all(), frame.to_string())

    def test_ratio_rows_carry_estimates(self):
        code, text = self.call('reproduce', '3', '--n', '200000', '--seed', '11')
        self.assertEqual(code, EXIT_OK)
        frame = pd.read_csv(io.StringIO(text))
        ratios = frame[frame['quantity'] == 'ratio']
        self.assertEqual(len(ratios), 3)
        self.assertTrue(ratios['estimate'].notna().all())
        self.assertTrue((ratios['standard_error'] > 0).all())
        monotone = frame[frame['band'] == 'monotone']
        self.assertEqual(len(monotone), 1)
        self.assertTrue(monotone['passed'].iloc[0])

    def test_reproduce_needs_two_replications(self):
        self.assertEqual(self.call('reproduce', '2', '--n', '1')[0], EXIT_DOMAIN)


class TestEntryPoint(CliTestCase):

    def test_out_flag_writes_file(self):
        code, text = self.call('sweep', '--ref', 'att-cr', '--eps', '0.1', '--gammas', '0.5', '--n', '50',
                               '--out', self.path('sweep.csv'))
        self.assertEqual((code, text), (EXIT_OK, ""))
        self.assertEqual(list(pd.read_csv(self.path('sweep.csv'))['gamma']), [0.5])

    def test_main_exits_with_run_code(self):
        with patch.object(sys, 'argv', ['main.py', 'lp', '--ref', 'att-cr', '--eps', '0.1']), \
                patch('main.run', return_value=EXIT_OK):
            with self.assertRaises(SystemExit) as ctx:
                main.main()
        self.assertEqual(ctx.exception.code, EXIT_OK)

    def test_main_unexpected_error_exits_one(self):
        with patch.object(sys, 'argv', ['main.py', 'lp']), \
                patch('main.run', side_effect=RuntimeError("boom")), \
                self.assertLogs(level='ERROR') as logs:
            with self.assertRaises(SystemExit) as ctx:
                main.main()
        self.assertEqual(ctx.exception.code, 1)
        self.assertIn("boom", logs.output[0])


if __name__ == '__main__':
    unittest.main()
