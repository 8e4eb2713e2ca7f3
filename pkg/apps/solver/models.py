"""
نماذج المحلل: حالة التكرار وإعدادات التشغيل
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from django.utils.translation import gettext_lazy as _

from apps.core.exceptions import RangeError
from apps.core.settings import SettingsManager
from apps.data.models import Regime
from apps.losses.models import LossKind


class Variant(Enum):
    """نسخ المحلل المدعومة"""
    ADAPTIVE = 'adfsdca'  # احتمالات تكيفية في كل تكرار
    HEURISTIC = 'plus'  # إعادة البناء كل دورة مع تقليص الإحداثي المسحوب
    MINIBATCH = 'minibatch'  # دفعات غير منتظمة بحجم ثابت
    UNIFORM = 'uniform'  # خط الأساس المنتظم


class ThetaMode(Enum):
    PER_ITERATION = 'adaptive'
    FIXED = 'fixed'


@dataclass(frozen=True)
class SolverConfig:
    """إعدادات تشغيل واحد للمحلل"""

    lam: float
    loss: LossKind = LossKind.QUADRATIC
    variant: Variant = Variant.ADAPTIVE
    shrink: float = 10.0
    batch_size: int = 1
    regime: Regime = Regime.ALL_CONVEX
    epochs: int = field(default_factory=lambda: SettingsManager.get_setting('epochs', 30))
    seed: int = field(default_factory=lambda: SettingsManager.get_setting('seed', 42))
    theta_mode: ThetaMode = ThetaMode.PER_ITERATION
    gap_tolerance: Optional[float] = field(default_factory=lambda: SettingsManager.get_setting('gap_tolerance', 1e-10))
    record_wall_time: bool = field(
        default_factory=lambda: SettingsManager.get_setting('record_wall_time', True), compare=False,
    )

    def clean(self, n: Optional[int] = None):
        """التحقق من صحة الإعدادات

        Raises:
            RangeError: عند مخالفة أي قيد
        """
        if not self.lam > 0:
            raise RangeError(_('lambda must be positive, got %(lam)s') % {'lam': self.lam})
        if self.variant is Variant.HEURISTIC and not self.shrink >= 1:
            raise RangeError(_('shrink parameter s must be at least 1, got %(s)s') % {'s': self.shrink})
        if self.variant is Variant.MINIBATCH and self.batch_size < 1:
            raise RangeError(_('batch size must be at least 1, got %(b)s') % {'b': self.batch_size})
        if n is not None and self.variant is Variant.MINIBATCH and self.batch_size > n:
            raise RangeError(_('batch size %(b)s exceeds n=%(n)s') % {'b': self.batch_size, 'n': n})
        if self.epochs < 0:
            raise RangeError(_('epoch budget must be non-negative'))

    @property
    def effective_batch(self) -> int:
        return self.batch_size if self.variant is Variant.MINIBATCH else 1

    @property
    def label(self) -> str:
        """اسم قصير يستخدم في أسماء ملفات النتائج"""
        if self.variant is Variant.HEURISTIC:
            name = f"plus-s{self.shrink:g}"
        elif self.variant is Variant.MINIBATCH:
            name = f"minibatch-b{self.batch_size}"
        else:
            name = self.variant.value
        if self.theta_mode is ThetaMode.FIXED and self.variant is not Variant.UNIFORM:
            name += '-fixed'
        if self.regime is Regime.AVERAGE_CONVEX:
            name += '-average'
        return name


class SolverState:
    """حالة المحلل القابلة للتعديل

    الخصائص:
        w: المتجه الأولي (d)
        alpha: المتغيرات الثنائية الزائفة (n)
        z: الهوامش المخزنة z_i = x_i^T w
        kappa: البواقي الثنائية κ_i = α_i + φ'(z_i)
        t: عداد التكرارات
        epoch: عدد المرات على البيانات (كسري)
    """

    def __init__(self, n: int, d: int, lam: float):
        self.lam = lam
        self.w = np.zeros(d)
        self.alpha = np.zeros(n)
        self.z = np.zeros(n)
        self.kappa = np.zeros(n)
        self.kappa_fresh = False
        self.t = 0
        self.epoch = 0.0

    @property
    def n(self) -> int:
        return self.alpha.size

    @property
    def d(self) -> int:
        return self.w.size

    def copy(self) -> 'SolverState':
        clone = SolverState(self.n, self.d, self.lam)
        clone.w = self.w.copy()
        clone.alpha = self.alpha.copy()
        clone.z = self.z.copy()
        clone.kappa = self.kappa.copy()
        clone.kappa_fresh = self.kappa_fresh
        clone.t = self.t
        clone.epoch = self.epoch
        return clone

    def __repr__(self):
        return f"SolverState(n={self.n}, d={self.d}, t={self.t}, epoch={self.epoch:.3f})"
