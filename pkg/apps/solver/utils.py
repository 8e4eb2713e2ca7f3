"""
وحدة المساعدة لتطبيق المحلل
تحتوي على العمليات المشتركة بين جميع النسخ: البواقي والاحتمالات وحجم الخطوة والتحديث
"""

import logging

import numpy as np

from apps.core.exceptions import Converged
from apps.data.models import Dataset
from apps.losses.models import LossModel
from .models import SolverState

logger = logging.getLogger(__name__)

# أكبر قيمة مسموحة لـ θ داخل (0, 1)
THETA_CEILING = np.nextafter(1.0, 0.0)


def init_state(ds: Dataset, loss: LossModel, lam: float) -> SolverState:
    """الحالة الابتدائية: α = 0 ومنها w = 0 و z = 0 و κ = φ'(0)"""
    state = SolverState(ds.n, ds.d, lam)
    state.kappa = loss.derivative(state.z, ds.y) + state.alpha
    state.kappa_fresh = True
    return state


def dual_residuals(state: SolverState, ds: Dataset, loss: LossModel) -> np.ndarray:
    """حساب κ_i = α_i + φ'_i(z_i) لجميع العينات من ذاكرة الهوامش"""
    state.kappa = state.alpha + loss.derivative(state.z, ds.y)
    state.kappa_fresh = True
    return state.kappa


def adaptive_probabilities(kappa, v, gamma: float, lam: float, n: int) -> np.ndarray:
    """الاحتمالات المثلى p*_i ∝ √(v_iγ + nλ²)·|κ_i|

    Raises:
        Converged: عندما تكون جميع البواقي صفرية
    """
    kappa = np.asarray(kappa, dtype=float)
    weights = np.sqrt(np.asarray(v, dtype=float) * gamma + n * lam * lam) * np.abs(kappa)
    total = weights.sum()
    if not total > 0:
        raise Converged()
    return weights / total


def theta(kappa, p, v, gamma: float, lam: float, n: int, b: int = 1) -> float:
    """حجم الخطوة Θ(κ, p) على دعم κ، مقصوصاً إلى (0, 1)

    في حالة الدفعات يُمرر v' بدلاً من v ويضرب البسط في b.

    Examples:
        >>> theta([1.0, 1.0], [0.5, 0.5], [1.0, 1.0], 1.0, 1.0, 2)
        0.3333333333333333
    """
    kappa = np.asarray(kappa, dtype=float)
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    support = kappa != 0
    if not support.any():
        raise Converged()
    k2 = kappa[support] ** 2
    n_lam_sq = n * lam * lam
    numerator = n_lam_sq * b * k2.sum()
    denominator = np.sum((n_lam_sq + v[support] * gamma) * k2 / p[support])
    return float(min(numerator / denominator, THETA_CEILING))


def apply_update(state: SolverState, i: int, step: float, p_i: float, ds: Dataset, loss: LossModel,
                 b: int = 1, residue=None) -> np.ndarray:
    """تحديث الإحداثي i وصيانة w و z و κ تدريجياً

    α_i ← α_i - θκ_i/(c·p_i)  و  w ← w - θκ_i x_i/(nλc·p_i)  حيث c = b.
    يُمرر residue عند تحديث الدفعات لاستخدام κ_i المحسوبة قبل بدء الدفعة.

    Returns:
        np.ndarray: أرقام العينات التي تغيرت هوامشها
    """
    kappa_i = state.kappa[i] if residue is None else residue
    if kappa_i == 0:
        return np.empty(0, dtype=np.int64)

    delta = step * kappa_i / (b * p_i)
    state.alpha[i] -= delta

    features, values = ds.row(i)
    dw = values * (-delta / (ds.n * state.lam))
    state.w[features] += dw

    touched = [np.array([i], dtype=np.int64)]
    for f, dw_f in zip(features, dw):
        samples, column = ds.column(f)
        state.z[samples] += dw_f * column
        touched.append(samples)
    touched = np.unique(np.concatenate(touched))

    state.kappa[touched] = state.alpha[touched] + loss.derivative(state.z[touched], ds.y[touched])
    return touched


def potential(state: SolverState, ref_state, gamma: float) -> float:
    """D = (1/n)‖α - α*‖² + γ‖w - w*‖²"""
    n = state.alpha.size
    dual_part = np.sum((state.alpha - ref_state.alpha) ** 2) / n
    primal_part = np.sum((state.w - ref_state.w) ** 2)
    return float(dual_part + gamma * primal_part)


def expected_update_direction(state: SolverState, p, ds: Dataset, loss: LossModel) -> np.ndarray:
    """Σ_i p_i · κ_i x_i/(n p_i) محسوبة بشكل حتمي

    تساوي ∇P(w) عند تحقق علاقة الربط بين α و w.
    """
    kappa = dual_residuals(state, ds, loss)
    p = np.asarray(p, dtype=float)
    coefficients = np.zeros(ds.n)
    positive = p > 0
    coefficients[positive] = p[positive] * kappa[positive] / (ds.n * p[positive])
    return ds.X.T @ coefficients


def variance_of_update(state: SolverState, p, ds: Dataset) -> float:
    """Σ_i p_i ‖κ_i x_i/(n p_i)‖² = Σ_i κ_i² v_i/(n² p_i) على دعم p"""
    p = np.asarray(p, dtype=float)
    positive = p > 0
    kappa = state.kappa[positive]
    return float(np.sum(kappa ** 2 * ds.v[positive] / p[positive]) / ds.n ** 2)


def _relative_error(value, reference) -> float:
    # أرضية الوحدة تمنع تضخيم الخطأ عند متجه مرجعي قريب من الصفر
    return float(np.linalg.norm(value - reference) / max(np.linalg.norm(reference), 1.0))


def check_mapping(state: SolverState, ds: Dataset) -> float:
    """الخطأ النسبي بين w و (1/λn)Σα_i x_i"""
    return _relative_error(state.w, ds.X.T @ state.alpha / (state.lam * ds.n))


def check_margins(state: SolverState, ds: Dataset) -> float:
    """الخطأ النسبي بين ذاكرة الهوامش و X w"""
    return _relative_error(state.z, ds.X @ state.w)


def refresh_margins(state: SolverState, ds: Dataset, loss: LossModel) -> None:
    """إعادة بناء w و z و κ من α بعد تراكم أخطاء التقريب"""
    state.w = ds.X.T @ state.alpha / (state.lam * ds.n)
    state.z = ds.X @ state.w
    dual_residuals(state, ds, loss)
    logger.debug("Margins rebuilt from alpha at t=%d", state.t)


def closed_form_ridge(ds: Dataset, lam: float) -> SolverState:
    """الحل الدقيق لانحدار الحافة عبر المعادلات الطبيعية

    w* = (XᵀX/n + λI)⁻¹ Xᵀy/n  و  α*_i = y_i - x_iᵀw*
    """
    n, d = ds.n, ds.d
    gram = (ds.X.T @ ds.X).toarray() / n + lam * np.eye(d)
    rhs = ds.X.T @ ds.y / n
    state = SolverState(n, d, lam)
    state.w = np.linalg.solve(gram, rhs)
    state.z = ds.X @ state.w
    state.alpha = ds.y - state.z
    state.kappa = np.zeros(n)
    state.kappa_fresh = True
    return state

