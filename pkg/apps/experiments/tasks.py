"""
مهام Celery لتطبيق التجارب
كل مهمة تشغّل نسخة واحدة ببذرة واحدة وتكتب ملفات CSV الخاصة بها
"""

import logging
from pathlib import Path

from celery import shared_task

from apps.losses.models import LossKind, LossModel
from apps.metrics.utils import epochs_to_tolerance, histogram_rows, write_csv, write_histogram_csv
from apps.solver.engine import DualFreeSolver
from .models import VariantSpec
from .utils import RESIDUALS_DIR, cached_dataset

logger = logging.getLogger(__name__)


@shared_task(name='experiments.run_solver')
def run_solver_task(payload: dict) -> dict:
    """تشغيل واحد من build_payloads

    يكتب سجل الدورات في <out>/<label>_<seed>.csv وتوزيع |κ| لكل دورة
    في <out>/residuals/<label>_<seed>.csv.

    Returns:
        dict: صف summary.csv مع مسار ملف السجلات
    """
    loss_kind = LossKind(payload['loss'])
    ds = cached_dataset(payload['data'], payload['n_features'], loss_kind.value)
    config = VariantSpec.from_dict(payload['variant']).to_config(
        lam=payload['lam'],
        loss=loss_kind,
        epochs=payload['epochs'],
        seed=payload['seed'],
        gap_tolerance=payload['gap_tolerance'],
        record_wall_time=payload['record_wall_time'],
    )
    solver = DualFreeSolver(ds, LossModel(loss_kind), config)
    histogram = []
    result = solver.run(callbacks=[lambda record: histogram.extend(histogram_rows(record.epoch, solver.state.kappa))])

    out_dir = Path(payload['out_dir'])
    name = f"{config.label}_{config.seed}.csv"
    write_csv(result.records, out_dir / name)
    (out_dir / RESIDUALS_DIR).mkdir(exist_ok=True)
    write_histogram_csv(histogram, out_dir / RESIDUALS_DIR / name)
    logger.info("%s seed=%d: %s after %d records", config.label, config.seed, result.status, len(result.records))

    tolerance = payload['gap_tolerance']
    return {
        'variant': config.label,
        'seed': config.seed,
        'epochs_to_tol': epochs_to_tolerance(result.records, tolerance) if tolerance is not None else None,
        'final_gap': result.final.gap,
        'status': result.status,
        'iteration_bound': result.iteration_bound(tolerance),
        'path': str(out_dir / name),
    }
