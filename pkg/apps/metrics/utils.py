"""
وحدة المساعدة لتطبيق القياسات
تحتوي على الهدف الأولي والثنائي وفجوة الثنائية وكتابة ملفات CSV
"""

import csv
import logging
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np
from django.utils.translation import gettext_lazy as _

from apps.core.exceptions import DataIOError, ParseError, RangeError
from apps.core.settings import SettingsManager
from apps.data.models import Dataset
from apps.losses.models import LossModel
from .models import RunRecord

logger = logging.getLogger(__name__)


def primal_objective(state, ds: Dataset, loss: LossModel, lam: float) -> float:
    """P(w) = (1/n)Σφ_i(z_i) + (λ/2)‖w‖² من ذاكرة الهوامش"""
    return float(np.mean(loss.value(state.z, ds.y)) + 0.5 * lam * np.dot(state.w, state.w))


def primal_gradient(state, ds: Dataset, loss: LossModel, lam: float) -> np.ndarray:
    """∇P(w) = (1/n)Σφ'_i(z_i)x_i + λw"""
    return ds.X.T @ loss.derivative(state.z, ds.y) / ds.n + lam * state.w


def mapped_dual_point(state, ds: Dataset, loss: LossModel) -> np.ndarray:
    """ᾱ_i = -φ'_i(z_i)، تقع دائماً داخل مجال الدالة المرافقة"""
    return -loss.derivative(state.z, ds.y)


def dual_objective_mapped(state, ds: Dataset, loss: LossModel, lam: float) -> float:
    """D(ᾱ) = -(1/n)Σφ*_i(-ᾱ_i) - (λ/2)‖(1/λn)Σᾱ_i x_i‖²"""
    alpha_bar = mapped_dual_point(state, ds, loss)
    w_bar = ds.X.T @ alpha_bar / (lam * ds.n)
    return float(-np.mean(loss.conjugate(alpha_bar, ds.y)) - 0.5 * lam * np.dot(w_bar, w_bar))


def duality_gap(state, ds: Dataset, loss: LossModel, lam: float,
                primal: Optional[float] = None, dual: Optional[float] = None) -> float:
    """P(w) - D(ᾱ)، مع قبول قيمتي الهدفين إذا حُسبتا مسبقاً"""
    if primal is None:
        primal = primal_objective(state, ds, loss, lam)
    if dual is None:
        dual = dual_objective_mapped(state, ds, loss, lam)
    return primal - dual


def residual_sq_norm(state, ds: Dataset, loss: LossModel) -> float:
    kappa = state.alpha + loss.derivative(state.z, ds.y)
    return float(np.dot(kappa, kappa))


def residual_histogram(kappa, bins: Optional[int] = None):
    """توزيع |κ_i| على فترات متساوية فوق [0, max|κ|]، الفترة الأخيرة مغلقة من اليمين

    Returns:
        tuple: (العدد في كل فترة، حدود الفترات)
    """
    if bins is None:
        bins = SettingsManager.get_setting('histogram_bins', 20)
    if bins < 1:
        raise RangeError(_("histogram needs at least one bin"))
    magnitudes = np.abs(np.asarray(kappa, dtype=float))
    top = float(magnitudes.max()) if magnitudes.size else 0.0
    if top == 0.0:
        counts = np.zeros(bins, dtype=np.int64)
        counts[0] = magnitudes.size
        return counts, np.zeros(bins + 1)
    return np.histogram(magnitudes, bins=bins, range=(0.0, top))


def make_record(state, ds: Dataset, loss: LossModel, theta_used: float = 0.0,
                wall_ms: float = 0.0) -> RunRecord:
    """بناء سجل دورة من الحالة الحالية"""
    primal = primal_objective(state, ds, loss, state.lam)
    dual = dual_objective_mapped(state, ds, loss, state.lam)
    return RunRecord(
        epoch=float(state.epoch),
        primal=primal,
        dual=dual,
        gap=duality_gap(state, ds, loss, state.lam, primal, dual),
        residual_sq_norm=residual_sq_norm(state, ds, loss),
        theta_used=float(theta_used),
        wall_ms=float(wall_ms),
    )


def format_real(value: float) -> str:
    digits = SettingsManager.get_setting('csv_significant_digits', 17)
    return format(float(value), f'.{digits}g')


def write_csv(records: Iterable[RunRecord], sink) -> None:
    """كتابة السجلات بصيغة CSV بعدد 17 رقماً معنوياً

    Args:
        records: سجلات الدورات
        sink: مسار ملف أو كائن نصي قابل للكتابة

    Raises:
        DataIOError: عند فشل الكتابة إلى المسار
    """
    if isinstance(sink, (str, Path)):
        records = list(records)
        try:
            with open(sink, 'w', newline='', encoding='utf-8') as handle:
                write_csv(records, handle)
        except OSError as exc:
            raise DataIOError(_('cannot write %(path)s: %(error)s') % {'path': sink, 'error': exc}) from exc
        logger.debug("Wrote %d records to %s", len(records), sink)
        return

    writer = csv.writer(sink, lineterminator='\n')
    writer.writerow(RunRecord.columns())
    for record in records:
        writer.writerow([format_real(value) for value in record.as_row()])


def read_csv(source) -> List[RunRecord]:
    """قراءة ملف أنتجته write_csv

    Raises:
        DataIOError: عند تعذر فتح المسار
        ParseError: عند اختلاف الترويسة أو وجود قيمة غير عددية
    """
    if isinstance(source, (str, Path)):
        try:
            with open(source, newline='', encoding='utf-8') as handle:
                return read_csv(handle)
        except OSError as exc:
            raise DataIOError(_('cannot read %(path)s: %(error)s') % {'path': source, 'error': exc}) from exc

    reader = csv.reader(source)
    header = next(reader, None)
    if header != RunRecord.columns():
        raise ParseError(_('unexpected header %(header)s') % {'header': header}, line=1)
    records = []
    for line, row in enumerate(reader, start=2):
        try:
            records.append(RunRecord(*(float(value) for value in row)))
        except (TypeError, ValueError) as exc:
            raise ParseError(str(exc), line=line) from exc
    return records


def epochs_to_tolerance(records: Iterable[RunRecord], tolerance: float) -> Optional[float]:
    """أول دورة تصل فيها الفجوة إلى tolerance أو أقل"""
    for record in records:
        if record.gap <= tolerance:
            return record.epoch
    return None


HISTOGRAM_COLUMNS = ['epoch', 'bin', 'lower', 'upper', 'count']


def histogram_rows(epoch: float, kappa, bins: Optional[int] = None) -> List[tuple]:
    """صفوف توزيع |κ| لدورة واحدة بصيغة HISTOGRAM_COLUMNS"""
    counts, edges = residual_histogram(kappa, bins)
    return [
        (float(epoch), k, float(edges[k]), float(edges[k + 1]), int(count))
        for k, count in enumerate(counts)
    ]


def write_histogram_csv(rows: Iterable[tuple], path) -> None:
    """كتابة صفوف histogram_rows لجميع الدورات في ملف واحد

    Raises:
        DataIOError: عند فشل الكتابة
    """
    try:
        with open(path, 'w', newline='', encoding='utf-8') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(HISTOGRAM_COLUMNS)
            for epoch, k, lower, upper, count in rows:
                writer.writerow([format_real(epoch), k, format_real(lower), format_real(upper), count])
    except OSError as exc:
        raise DataIOError(_('cannot write %(path)s: %(error)s') % {'path': path, 'error': exc}) from exc
