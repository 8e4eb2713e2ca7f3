import csv
import math
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, tag

from apps.data.models import Regime
from apps.losses.models import LossKind
from apps.metrics.utils import read_csv
from apps.solver.models import ThetaMode, Variant
from .models import VariantSpec, is_synthetic_source
from .tasks import run_solver_task
from .utils import (
    FAILURE_RETURNCODE,
    RESIDUALS_DIR,
    USAGE_RETURNCODE,
    build_payloads,
    parse_args,
    parse_variant,
    read_config_tokens,
    run_experiment,
)

SYNTHETIC = 'synthetic:n=40,d=6,spread=1,seed=3'


def read_summary(path):
    with open(path, newline='', encoding='utf-8') as handle:
        return list(csv.DictReader(handle))


class ParseVariantTests(SimpleTestCase):

    def test_plain_names(self):
        self.assertEqual(parse_variant('adfsdca').variant, Variant.ADAPTIVE)
        self.assertEqual(parse_variant('uniform').variant, Variant.UNIFORM)
        self.assertEqual(parse_variant('plus').shrink, 10.0)

    def test_parameters(self):
        spec = parse_variant('minibatch:b=8,theta=fixed,regime=average')
        self.assertEqual(spec.batch_size, 8)
        self.assertIs(spec.theta_mode, ThetaMode.FIXED)
        self.assertIs(spec.regime, Regime.AVERAGE_CONVEX)
        self.assertEqual(spec.label, 'minibatch-b8-fixed-average')
        self.assertEqual(parse_variant('plus:s=2.5').label, 'plus-s2.5')

    def test_shrink_below_one_is_usage_error(self):
        with self.assertRaises(CommandError) as ctx:
            parse_variant('plus:s=0.5')
        self.assertEqual(ctx.exception.returncode, USAGE_RETURNCODE)

    def test_rejected_descriptions(self):
        for text in ('sgd', 'adfsdca:s=2', 'plus:b=4', 'minibatch:b=0', 'minibatch:b=two', 'uniform:theta=slow', 'plus:s'):
            with self.subTest(text=text), self.assertRaises(CommandError) as ctx:
                parse_variant(text)
            self.assertEqual(ctx.exception.returncode, USAGE_RETURNCODE)

    def test_payload_round_trip(self):
        spec = parse_variant('plus:s=3,theta=fixed')
        self.assertEqual(VariantSpec.from_dict(spec.as_dict()), spec)


class ParseArgsTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = str(Path(self.tmp.name) / 'out')

    def test_single_variant_with_defaults(self):
        spec = parse_args(['--data', SYNTHETIC, '--variant', 'adfsdca', '--out', self.out])
        self.assertEqual(len(spec.variants), 1)
        self.assertEqual(spec.loss, LossKind.QUADRATIC)
        self.assertIsNone(spec.lam)
        self.assertEqual(spec.seeds, [42])
        self.assertEqual(spec.epochs, 30)
        self.assertTrue(spec.is_synthetic)

    def test_repeated_flags(self):
        spec = parse_args([
            '--data', SYNTHETIC, '--out', self.out, '--loss', 'logistic',
            '--variant', 'adfsdca', '--variant', 'plus:s=10',
            '--seed', '1', '--seed', '2', '--seed', '3',
        ])
        self.assertEqual(spec.run_count(), 6)
        self.assertEqual(spec.loss, LossKind.LOGISTIC)

    def test_missing_required_options(self):
        for argv in (
            ['--variant', 'adfsdca', '--out', self.out],
            ['--data', SYNTHETIC, '--variant', 'adfsdca'],
            ['--data', SYNTHETIC, '--out', self.out],
        ):
            with self.subTest(argv=argv), self.assertRaises(CommandError) as ctx:
                parse_args(argv)
            self.assertEqual(ctx.exception.returncode, USAGE_RETURNCODE)

    def test_invalid_values(self):
        base = ['--data', SYNTHETIC, '--out', self.out]
        for extra in (
            ['--variant', 'adfsdca', '--lambda', '0'],
            ['--variant', 'adfsdca', '--epochs', '-1'],
            ['--variant', 'adfsdca', '--variant', 'adfsdca'],
            ['--variant', 'adfsdca', '--lambda', 'abc'],
            ['--variant', 'adfsdca', '--unknown'],
        ):
            with self.subTest(extra=extra), self.assertRaises(CommandError) as ctx:
                parse_args(base + extra)
            self.assertEqual(ctx.exception.returncode, USAGE_RETURNCODE)

    def test_missing_data_file_names_the_path(self):
        missing = str(Path(self.tmp.name) / 'nowhere.svm')
        with self.assertRaises(CommandError) as ctx:
            parse_args(['--data', missing, '--variant', 'adfsdca', '--out', self.out])
        self.assertEqual(ctx.exception.returncode, USAGE_RETURNCODE)
        self.assertIn(missing, str(ctx.exception))

    def test_bad_synthetic_key(self):
        with self.assertRaises(CommandError):
            parse_args(['--data', 'synthetic:rows=5', '--variant', 'adfsdca', '--out', self.out])

    def test_config_file_fills_missing_options(self):
        config = Path(self.tmp.name) / 'run.conf'
        config.write_text('# defaults\nlambda = 0.5\nepochs=3\nno_wall_time=true\n', encoding='utf-8')
        self.assertEqual(read_config_tokens(config), ['--lambda', '0.5', '--epochs', '3', '--no-wall-time'])

        spec = parse_args([
            '--data', SYNTHETIC, '--variant', 'adfsdca', '--out', self.out,
            '--config', str(config), '--lambda', '0.25',
        ])
        self.assertEqual(spec.lam, 0.25)
        self.assertEqual(spec.epochs, 3)
        self.assertFalse(spec.record_wall_time)

    def test_shipped_config_file(self):
        config = Path(settings.BASE_DIR).parent / 'experiment.conf'
        spec = parse_args(['--config', str(config), '--out', self.out])
        self.assertEqual([variant.label for variant in spec.variants], ['adfsdca', 'plus-s10', 'minibatch-b8', 'uniform'])
        self.assertEqual(spec.seeds, [1, 2, 3])
        self.assertEqual(spec.out_dir, Path(self.out))
        self.assertTrue(spec.is_synthetic)

    def test_synthetic_sources(self):
        self.assertTrue(is_synthetic_source('synthetic:n=5'))
        self.assertTrue(is_synthetic_source('synthetic'))
        self.assertFalse(is_synthetic_source('data/synthetic.svm'))

    def test_config_line_without_value(self):
        config = Path(self.tmp.name) / 'bad.conf'
        config.write_text('lambda\n', encoding='utf-8')
        with self.assertRaises(CommandError) as ctx:
            read_config_tokens(config)
        self.assertEqual(ctx.exception.returncode, USAGE_RETURNCODE)


class RunSolverTaskTests(SimpleTestCase):

    def test_task_writes_records(self):
        with tempfile.TemporaryDirectory() as tmp:
            spec = parse_args([
                '--data', SYNTHETIC, '--variant', 'plus:s=10', '--out', tmp,
                '--lambda', '0.5', '--epochs', '4', '--no-wall-time',
            ])
            payload = build_payloads(spec, spec.lam)[0]
            row = run_solver_task(payload)

            self.assertEqual(row['variant'], 'plus-s10')
            self.assertEqual(row['seed'], 42)
            records = read_csv(row['path'])
            self.assertEqual(records[0].epoch, 0.0)
            self.assertEqual(records[-1].gap, row['final_gap'])
            self.assertTrue(all(record.wall_ms == 0.0 for record in records))

    def test_concurrent_runs_match_sequential_runs(self):
        outputs = {}
        with tempfile.TemporaryDirectory() as tmp:
            for mode in ('sequential', 'concurrent'):
                out = Path(tmp) / mode
                out.mkdir()
                spec = parse_args([
                    '--data', SYNTHETIC, '--out', str(out), '--epochs', '4', '--no-wall-time',
                    '--variant', 'adfsdca', '--variant', 'plus:s=10', '--variant', 'minibatch:b=4',
                    '--seed', '1', '--seed', '2',
                ])
                payloads = build_payloads(spec, 0.2)
                if mode == 'sequential':
                    rows = [run_solver_task(payload) for payload in payloads]
                else:
                    with ThreadPoolExecutor(max_workers=4) as pool:
                        rows = list(pool.map(run_solver_task, payloads))
                self.assertEqual(len(rows), 6)
                outputs[mode] = {
                    str(path.relative_to(out)): path.read_bytes() for path in out.rglob('*.csv')
                }
        self.assertEqual(len(outputs['sequential']), 12)
        self.assertEqual(outputs['sequential'], outputs['concurrent'])


class RunExperimentTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def test_one_csv_per_variant_and_seed(self):
        out = self.root / 'grid'
        spec = parse_args([
            '--data', SYNTHETIC, '--out', str(out), '--lambda', '0.5', '--epochs', '3',
            '--variant', 'adfsdca', '--variant', 'uniform',
            '--seed', '1', '--seed', '2', '--seed', '3',
        ])
        self.assertEqual(run_experiment(spec), 0)

        names = sorted(path.name for path in out.glob('*.csv'))
        self.assertEqual(names, sorted(
            [f'adfsdca_{seed}.csv' for seed in (1, 2, 3)]
            + [f'uniform_{seed}.csv' for seed in (1, 2, 3)]
            + ['summary.csv']
        ))
        rows = read_summary(out / 'summary.csv')
        self.assertEqual(len(rows), 8)
        self.assertEqual([row['seed'] for row in rows[-2:]], ['median', 'median'])
        self.assertEqual([row['variant'] for row in rows[-2:]], ['adfsdca', 'uniform'])
        residual_names = sorted(path.name for path in (out / RESIDUALS_DIR).glob('*.csv'))
        self.assertEqual(residual_names, [name for name in names if name != 'summary.csv'])
        for row in rows[:6]:
            self.assertGreater(int(row['iteration_bound']), 0)
        histogram = read_summary(out / RESIDUALS_DIR / 'adfsdca_1.csv')
        self.assertEqual(len(histogram), 20 * 4)
        self.assertEqual(sum(int(row['count']) for row in histogram if row['epoch'] == '0'), 40)

    def test_smoke_run_reaches_tolerance(self):
        out = self.root / 'smoke'
        spec = parse_args([
            '--data', SYNTHETIC, '--out', str(out), '--lambda', '1', '--epochs', '200',
            '--gap-tol', '1e-6', '--variant', 'adfsdca',
        ])
        self.assertEqual(run_experiment(spec), 0)
        row = read_summary(out / 'summary.csv')[0]
        self.assertTrue(math.isfinite(float(row['epochs_to_tol'])))
        self.assertIn(row['status'], ('tolerance', 'converged'))

    def test_runs_without_wall_time_are_byte_identical(self):
        outputs = []
        for name in ('first', 'second'):
            out = self.root / name
            spec = parse_args([
                '--data', SYNTHETIC, '--out', str(out), '--epochs', '5', '--seed', '7',
                '--variant', 'adfsdca', '--variant', 'minibatch:b=4', '--no-wall-time',
            ])
            self.assertEqual(run_experiment(spec), 0)
            outputs.append({path.name: path.read_bytes() for path in out.glob('*.csv')})
        self.assertEqual(outputs[0], outputs[1])

    def test_malformed_data_file_fails(self):
        data = self.root / 'broken.svm'
        data.write_text('1 3:1.0 1:2.0\n', encoding='utf-8')
        spec = parse_args(['--data', str(data), '--out', str(self.root / 'out'), '--variant', 'adfsdca'])
        self.assertEqual(run_experiment(spec), FAILURE_RETURNCODE)

    def test_undecodable_data_file_fails(self):
        data = self.root / 'latin.svm'
        data.write_bytes(b'1 1:1.0\n\xff\xfe 2:1\n')
        spec = parse_args(['--data', str(data), '--out', str(self.root / 'out'), '--variant', 'adfsdca'])
        with self.assertLogs('apps.experiments', level='ERROR') as logs:
            self.assertEqual(run_experiment(spec), FAILURE_RETURNCODE)
        self.assertIn(str(data), '\n'.join(logs.output))

    def test_batch_larger_than_dataset(self):
        spec = parse_args([
            '--data', 'synthetic:n=5,d=3', '--out', str(self.root / 'out'), '--variant', 'minibatch:b=8',
        ])
        self.assertEqual(run_experiment(spec), USAGE_RETURNCODE)


class RunExperimentCommandTests(SimpleTestCase):

    def test_command_writes_summary(self):
        with tempfile.TemporaryDirectory() as tmp:
            call_command(
                'run_experiment', '--data', SYNTHETIC, '--variant', 'adfsdca',
                '--epochs', '2', '--out', tmp, '--no-wall-time', verbosity=0,
            )
            self.assertTrue((Path(tmp) / 'summary.csv').is_file())
            self.assertTrue((Path(tmp) / 'adfsdca_42.csv').is_file())

    def test_command_usage_error(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(CommandError) as ctx:
                call_command('run_experiment', '--data', SYNTHETIC, '--variant', 'plus:s=0.5', '--out', tmp)
            self.assertEqual(ctx.exception.returncode, USAGE_RETURNCODE)

    @tag('slow')
    def test_logistic_command(self):
        with tempfile.TemporaryDirectory() as tmp:
            call_command(
                'run_experiment', '--data', 'synthetic:n=60,d=8,seed=2', '--loss', 'logistic',
                '--variant', 'adfsdca', '--variant', 'plus:s=10', '--variant', 'uniform',
                '--epochs', '10', '--out', tmp, verbosity=0,
            )
            rows = read_summary(Path(tmp) / 'summary.csv')
            self.assertTrue(all(row['status'] != 'diverged' for row in rows[:3]))
