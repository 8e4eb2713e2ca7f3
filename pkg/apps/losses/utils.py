"""
وحدة المساعدة لتطبيق دوال الخسارة
"""

import numpy as np
from django.utils.translation import gettext_lazy as _

from apps.core.exceptions import EmptyInput
from .models import LossModel, SmoothnessConstants


def _scalar_or_array(result):
    return float(result) if np.ndim(result) == 0 else result


def loss_value(model: LossModel, margin, label):
    """قيمة الخسارة φ(z) عند الهامش z والتصنيف y

    Examples:
        >>> loss_value(LossModel.from_name('quadratic'), 3.0, 1.0)
        2.0
    """
    return _scalar_or_array(model.value(margin, label))


def loss_derivative(model: LossModel, margin, label):
    """المشتقة φ'(z)"""
    return _scalar_or_array(model.derivative(margin, label))


def conjugate_value(model: LossModel, dual, label):
    """قيمة المرافق φ*(-α)

    Raises:
        DomainError: إذا خرج α·y عن [0, 1] في الخسارة اللوجستية
    """
    return _scalar_or_array(model.conjugate(dual, label))


def smoothness_constants(model: LossModel, v) -> SmoothnessConstants:
    """حساب L_i = v_i · L̃ لكل عينة مع L = max L_i

    Args:
        model: نموذج الخسارة
        v: مربعات أطوال العينات

    Raises:
        EmptyInput: إذا كان المتجه فارغاً
    """
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise EmptyInput(_('Cannot compute smoothness constants of an empty sample set'))
    per_sample = v * model.smoothness
    return SmoothnessConstants(
        per_sample=per_sample,
        L=float(per_sample.max()),
        L_tilde=model.smoothness,
    )
