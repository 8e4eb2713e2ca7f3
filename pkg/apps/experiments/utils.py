"""
وحدة المساعدة لتطبيق التجارب
تحتوي على تحليل الخيارات وملفات الإعداد وتوزيع التشغيلات وكتابة الملخص
"""

import csv
import logging
import math
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
from django.core.management.base import CommandError, CommandParser
from django.utils.translation import gettext_lazy as _

from apps.core.exceptions import SolverError
from apps.core.settings import SettingsManager
from apps.data.models import Dataset, Regime
from apps.data.utils import load_dataset, make_synthetic
from apps.losses.models import LossKind
from apps.metrics.utils import format_real
from apps.solver.engine import RunStatus
from apps.solver.models import ThetaMode, Variant
from .models import ExperimentSpec, VariantSpec, is_synthetic_source

logger = logging.getLogger(__name__)

USAGE_RETURNCODE = 2
FAILURE_RETURNCODE = 1

SUMMARY_COLUMNS = ['variant', 'seed', 'epochs_to_tol', 'final_gap', 'status', 'iteration_bound']

# مجلد توزيعات |κ| لكل تشغيل داخل مجلد النتائج
RESIDUALS_DIR = 'residuals'

# القيم الافتراضية للبيانات الاصطناعية synthetic:n=..,d=..
SYNTHETIC_DEFAULTS = {'n': 200, 'd': 20, 'seed': 0, 'spread': 2.0, 'density': 0.3}

VARIANT_NAMES = {
    'adfsdca': Variant.ADAPTIVE,
    'plus': Variant.HEURISTIC,
    'minibatch': Variant.MINIBATCH,
    'uniform': Variant.UNIFORM,
}


def usage_error(message) -> CommandError:
    return CommandError(str(message), returncode=USAGE_RETURNCODE)


def add_experiment_arguments(parser) -> None:
    """خيارات أمر run_experiment

    جميع القيم الافتراضية None حتى يمكن دمجها مع ملف الإعداد.
    """
    parser.add_argument('--data', help=_('LIBSVM file (optionally .gz) or synthetic:n=N,d=D,...'))
    parser.add_argument('--loss', choices=[kind.value for kind in LossKind])
    parser.add_argument('--lambda', dest='lam', type=float, help=_('regularization (default 1/n)'))
    parser.add_argument('--variant', action='append', dest='variants',
                        help=_('adfsdca, plus:s=S, minibatch:b=B or uniform; repeatable'))
    parser.add_argument('--epochs', type=int)
    parser.add_argument('--seed', action='append', dest='seeds', type=int, help=_('repeatable'))
    parser.add_argument('--gap-tol', dest='gap_tol', type=float)
    parser.add_argument('--out', help=_('output directory'))
    parser.add_argument('--config', help=_('key=value file, command-line flags take precedence'))
    parser.add_argument('--n-features', dest='n_features', type=int)
    parser.add_argument('--no-wall-time', dest='no_wall_time', action='store_true', default=None,
                        help=_('write wall_ms as 0 for byte-identical CSVs'))


def build_parser() -> CommandParser:
    parser = CommandParser(prog='run_experiment', called_from_command_line=False)
    add_experiment_arguments(parser)
    return parser


def _parse_tokens(tokens: Sequence[str]) -> dict:
    try:
        return vars(build_parser().parse_args(list(tokens)))
    except CommandError as exc:
        raise usage_error(exc) from exc


def read_config_tokens(path) -> List[str]:
    """تحويل ملف key=value إلى خيارات سطر أوامر

    Examples:
        lambda=0.1      ->  --lambda 0.1
        no-wall-time=1  ->  --no-wall-time
    """
    try:
        lines = Path(path).read_text(encoding='utf-8').splitlines()
    except OSError as exc:
        raise usage_error(_('--config: cannot read %(path)s: %(error)s') % {'path': path, 'error': exc}) from exc

    tokens = []
    for number, raw in enumerate(lines, start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        key, separator, value = line.partition('=')
        if not separator:
            raise usage_error(_('--config line %(line)s: expected key=value') % {'line': number})
        flag = '--' + key.strip().replace('_', '-')
        value = value.strip()
        if flag == '--no-wall-time':
            if value.lower() in ('1', 'true', 'yes'):
                tokens.append(flag)
            continue
        tokens.extend([flag, value])
    return tokens


def merge_options(options: dict) -> dict:
    """دمج خيارات سطر الأوامر مع ملف الإعداد، والأولوية لسطر الأوامر"""
    merged = dict(options)
    if options.get('config'):
        file_options = _parse_tokens(read_config_tokens(options['config']))
        for key, value in file_options.items():
            if merged.get(key) is None:
                merged[key] = value
    return merged


def parse_variant(text: str) -> VariantSpec:
    """تحليل وصف نسخة مثل minibatch:b=8,theta=fixed

    Raises:
        CommandError: برمز 2 عند اسم أو معامل غير صالح
    """
    name, _sep, params = text.strip().partition(':')
    if name not in VARIANT_NAMES:
        raise usage_error(_('--variant: unknown variant %(name)r') % {'name': name})
    options = {'variant': VARIANT_NAMES[name]}
    applies_to = {'s': 'plus', 'b': 'minibatch'}

    for item in filter(None, (part.strip() for part in params.split(','))):
        key, separator, value = item.partition('=')
        if not separator:
            raise usage_error(_('--variant %(text)s: expected key=value, got %(item)r') % {'text': text, 'item': item})
        if applies_to.get(key, name) != name:
            raise usage_error(_('--variant %(text)s: %(key)s does not apply to %(name)s') % {
                'text': text, 'key': key, 'name': name,
            })
        try:
            if key == 's':
                options['shrink'] = float(value)
            elif key == 'b':
                options['batch_size'] = int(value)
            elif key == 'theta':
                options['theta_mode'] = ThetaMode(value)
            elif key == 'regime':
                options['regime'] = Regime(value)
            else:
                raise usage_error(_('--variant %(text)s: unknown key %(key)r') % {'text': text, 'key': key})
        except ValueError as exc:
            raise usage_error(_('--variant %(text)s: %(error)s') % {'text': text, 'error': exc}) from exc

    spec = VariantSpec(**options)
    if spec.variant is Variant.HEURISTIC and not spec.shrink >= 1:
        raise usage_error(_('--variant %(text)s: s must be at least 1') % {'text': text})
    if spec.variant is Variant.MINIBATCH and spec.batch_size < 1:
        raise usage_error(_('--variant %(text)s: b must be a positive integer') % {'text': text})
    return spec


def spec_from_options(options: dict) -> ExperimentSpec:
    """بناء ExperimentSpec من خيارات الأمر بعد دمج ملف الإعداد

    Raises:
        CommandError: برمز 2 مع اسم الخيار المخالف
    """
    options = merge_options(options)
    data = options.get('data')
    if not data:
        raise usage_error(_('--data is required'))
    if is_synthetic_source(data):
        parse_synthetic(data)
    elif not Path(data).is_file():
        raise usage_error(_('--data: no such file %(path)s') % {'path': data})
    if not options.get('out'):
        raise usage_error(_('--out is required'))
    if not options.get('variants'):
        raise usage_error(_('--variant is required at least once'))

    variants = [parse_variant(text) for text in options['variants']]
    labels = [variant.label for variant in variants]
    if len(set(labels)) != len(labels):
        raise usage_error(_('--variant: duplicate variants %(labels)s') % {'labels': labels})

    lam = options.get('lam')
    if lam is not None and not lam > 0:
        raise usage_error(_('--lambda must be positive, got %(lam)s') % {'lam': lam})
    epochs = options.get('epochs')
    epochs = SettingsManager.get_setting('epochs', 30) if epochs is None else epochs
    if epochs < 0:
        raise usage_error(_('--epochs must be non-negative'))
    gap_tol = options.get('gap_tol')
    seeds = options.get('seeds') or [SettingsManager.get_setting('seed', 42)]
    if options.get('no_wall_time') is None:
        record_wall_time = SettingsManager.get_setting('record_wall_time', True)
    else:
        record_wall_time = not options['no_wall_time']

    return ExperimentSpec(
        data=data,
        out_dir=Path(options['out']),
        variants=variants,
        loss=LossKind(options.get('loss') or LossKind.QUADRATIC.value),
        lam=lam,
        epochs=epochs,
        gap_tolerance=SettingsManager.get_setting('gap_tolerance', 1e-10) if gap_tol is None else gap_tol,
        seeds=list(seeds),
        n_features=options.get('n_features'),
        record_wall_time=record_wall_time,
    )


def parse_args(argv: Sequence[str]) -> ExperimentSpec:
    """تحليل خيارات run_experiment إلى ExperimentSpec"""
    return spec_from_options(_parse_tokens(argv))


def parse_synthetic(data: str) -> Dict[str, float]:
    params = dict(SYNTHETIC_DEFAULTS)
    _name, _sep, rest = data.partition(':')
    for item in filter(None, (part.strip() for part in rest.split(','))):
        key, _sep, value = item.partition('=')
        if key not in params:
            raise usage_error(_('--data %(data)s: unknown key %(key)r') % {'data': data, 'key': key})
        try:
            params[key] = type(SYNTHETIC_DEFAULTS[key])(value)
        except ValueError as exc:
            raise usage_error(_('--data %(data)s: %(error)s') % {'data': data, 'error': exc}) from exc
    return params


@lru_cache(maxsize=8)
def cached_dataset(data: str, n_features: Optional[int], loss: str) -> Dataset:
    """تحميل البيانات مرة واحدة لكل عامل"""
    if is_synthetic_source(data):
        params = parse_synthetic(data)
        return make_synthetic(
            int(params['n']), int(params['d']),
            density=params['density'],
            spread=params['spread'],
            loss_kind=LossKind(loss),
            seed=int(params['seed']),
        )
    return load_dataset(data, n_features)


def build_payloads(spec: ExperimentSpec, lam: float) -> List[dict]:
    """مهمة مستقلة لكل زوج (نسخة، بذرة)"""
    return [
        {
            'data': spec.data,
            'n_features': spec.n_features,
            'loss': spec.loss.value,
            'lam': lam,
            'variant': variant.as_dict(),
            'seed': seed,
            'epochs': spec.epochs,
            'gap_tolerance': spec.gap_tolerance,
            'record_wall_time': spec.record_wall_time,
            'out_dir': str(spec.out_dir),
        }
        for variant in spec.variants
        for seed in spec.seeds
    ]


def _median(values: Iterable[float]) -> float:
    values = [math.inf if value is None else value for value in values]
    return float(np.median(values)) if values else math.nan


def write_summary(rows: List[dict], path) -> None:
    """summary.csv: صف لكل تشغيل ثم صف وسيط لكل نسخة"""
    def cell(value):
        return 'inf' if value is None else format_real(value)

    def bound_cell(value):
        return '' if value is None else str(int(value))

    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([row['variant'], row['seed'], cell(row['epochs_to_tol']),
                             cell(row['final_gap']), row['status'], bound_cell(row.get('iteration_bound'))])
        for label in dict.fromkeys(row['variant'] for row in rows):
            group = [row for row in rows if row['variant'] == label]
            bounds = [row['iteration_bound'] for row in group if row.get('iteration_bound') is not None]
            writer.writerow([
                label,
                'median',
                format_real(_median(row['epochs_to_tol'] for row in group)),
                format_real(_median(row['final_gap'] for row in group)),
                '',
                format_real(np.median(bounds)) if bounds else '',
            ])


def _failed_row(label: str, seed: int) -> dict:
    return {'variant': label, 'seed': seed, 'epochs_to_tol': None, 'final_gap': math.nan, 'status': 'failed'}


def run_experiment(spec: ExperimentSpec) -> int:
    """تنفيذ جميع التشغيلات وكتابة ملفات CSV والملخص

    Returns:
        int: 0 عند النجاح، 1 عند فشل أو تباعد أي تشغيل، 2 عند إعداد غير صالح للبيانات
    """
    from .tasks import run_solver_task

    try:
        ds = cached_dataset(spec.data, spec.n_features, spec.loss.value)
    except SolverError as exc:
        logger.error("Cannot load dataset %s: %s", spec.data, exc)
        return FAILURE_RETURNCODE
    except CommandError as exc:
        logger.error("%s", exc)
        return USAGE_RETURNCODE

    lam = spec.lam if spec.lam is not None else 1.0 / ds.n
    for variant in spec.variants:
        if variant.variant is Variant.MINIBATCH and variant.batch_size > ds.n:
            logger.error("Batch size %d of %s exceeds n=%d", variant.batch_size, variant.label, ds.n)
            return USAGE_RETURNCODE

    try:
        spec.out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        logger.error("Cannot create output directory %s: %s", spec.out_dir, exc)
        return FAILURE_RETURNCODE

    logger.info(
        "Running %d runs on %s %r with lambda=%g",
        spec.run_count(), 'synthetic' if spec.is_synthetic else spec.data, ds, lam,
    )
    # إرسال جميع المهام أولاً ثم جمع النتائج حتى تعمل العمال بالتوازي
    pending = []
    for payload in build_payloads(spec, lam):
        label = VariantSpec.from_dict(payload['variant']).label
        logger.info("Dispatching %s seed=%d", label, payload['seed'])
        try:
            pending.append((label, payload['seed'], run_solver_task.delay(payload)))
        except SolverError as exc:
            logger.error("Run %s seed=%d failed: %s", label, payload['seed'], exc)
            pending.append((label, payload['seed'], None))

    rows = []
    for label, seed, result in pending:
        if result is None:
            rows.append(_failed_row(label, seed))
            continue
        try:
            rows.append(result.get())
        except SolverError as exc:
            logger.error("Run %s seed=%d failed: %s", label, seed, exc)
            rows.append(_failed_row(label, seed))

    try:
        write_summary(rows, spec.out_dir / 'summary.csv')
    except OSError as exc:
        logger.error("Cannot write summary: %s", exc)
        return FAILURE_RETURNCODE

    failed = [row for row in rows if row['status'] in (RunStatus.DIVERGED, 'failed')]
    if failed:
        logger.error("%d of %d runs failed or diverged", len(failed), len(rows))
        return FAILURE_RETURNCODE
    return 0
