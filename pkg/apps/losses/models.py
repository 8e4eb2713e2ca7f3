"""
نماذج دوال الخسارة: القيمة والمشتقة والدالة المرافقة وثوابت النعومة
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit, xlogy
from django.utils.translation import gettext_lazy as _

from apps.core.exceptions import DomainError
from apps.core.settings import SettingsManager


class LossKind(Enum):
    """أنواع الخسارة المدعومة"""
    QUADRATIC = 'quadratic'
    LOGISTIC = 'logistic'


# ثابت ليبشيتز لمشتقة كل نوع
SMOOTHNESS = {
    LossKind.QUADRATIC: 1.0,
    LossKind.LOGISTIC: 0.25,
}


@dataclass(frozen=True)
class LossModel:
    """نموذج دالة الخسارة φ_i(z) مع مرافقها φ*_i

    جميع الدوال تقبل أعداداً مفردة أو مصفوفات numpy بنفس الشكل.
    """

    kind: LossKind

    @classmethod
    def from_name(cls, name):
        return cls(LossKind(str(name).lower()))

    @property
    def smoothness(self) -> float:
        """L̃: ثابت النعومة المشترك لجميع العينات"""
        return SMOOTHNESS[self.kind]

    def value(self, margin, label):
        margin = np.asarray(margin, dtype=float)
        label = np.asarray(label, dtype=float)
        if self.kind is LossKind.QUADRATIC:
            return 0.5 * (margin - label) ** 2
        # softplus(-yz) بصيغة آمنة من الفيضان
        return np.logaddexp(0.0, -label * margin)

    def derivative(self, margin, label):
        margin = np.asarray(margin, dtype=float)
        label = np.asarray(label, dtype=float)
        if self.kind is LossKind.QUADRATIC:
            return margin - label
        # -y / (1 + exp(yz)) == -y * sigmoid(-yz)
        return -label * expit(-label * margin)

    def conjugate(self, dual, label):
        """φ*(-α) عند المتغير الثنائي α"""
        dual = np.asarray(dual, dtype=float)
        label = np.asarray(label, dtype=float)
        if self.kind is LossKind.QUADRATIC:
            return 0.5 * dual ** 2 - dual * label

        s = dual * label
        tolerance = SettingsManager.get_setting('conjugate_tolerance', 1e-12)
        if np.any(s < -tolerance) or np.any(s > 1.0 + tolerance):
            raise DomainError(
                _('Logistic conjugate needs alpha*y in [0, 1], got range [%(low)s, %(high)s]') % {
                    'low': float(np.min(s)),
                    'high': float(np.max(s)),
                }
            )
        s = np.clip(s, 0.0, 1.0)
        # 0·log 0 = 0 عند الطرفين
        return xlogy(s, s) + xlogy(1.0 - s, 1.0 - s)


@dataclass(frozen=True)
class SmoothnessConstants:
    """ثوابت النعومة لكل عينة L_i = v_i · L̃"""

    per_sample: np.ndarray
    L: float
    L_tilde: float
