"""
نماذج التجارب: وصف النسخة المطلوبة ووصف التجربة كاملة
"""

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

from apps.data.models import Regime
from apps.losses.models import LossKind
from apps.solver.models import SolverConfig, ThetaMode, Variant


@dataclass(frozen=True)
class VariantSpec:
    """نسخة محلل مع معاملاتها كما كُتبت في سطر الأوامر"""

    variant: Variant = Variant.ADAPTIVE
    shrink: float = 10.0
    batch_size: int = 1
    theta_mode: ThetaMode = ThetaMode.PER_ITERATION
    regime: Regime = Regime.ALL_CONVEX

    def to_config(self, lam: float, loss: LossKind, epochs: int, seed: int,
                  gap_tolerance: Optional[float], record_wall_time: bool = True) -> SolverConfig:
        return SolverConfig(
            lam=lam,
            loss=loss,
            variant=self.variant,
            shrink=self.shrink,
            batch_size=self.batch_size,
            regime=self.regime,
            epochs=epochs,
            seed=seed,
            theta_mode=self.theta_mode,
            gap_tolerance=gap_tolerance,
            record_wall_time=record_wall_time,
        )

    @property
    def label(self) -> str:
        return self.to_config(1.0, LossKind.QUADRATIC, 0, 0, None).label

    def as_dict(self) -> dict:
        """صيغة JSON لتمريرها إلى مهام Celery"""
        data = asdict(self)
        for key in ('variant', 'theta_mode', 'regime'):
            data[key] = data[key].value
        return data

    @classmethod
    def from_dict(cls, data: dict) -> 'VariantSpec':
        return cls(
            variant=Variant(data['variant']),
            shrink=float(data['shrink']),
            batch_size=int(data['batch_size']),
            theta_mode=ThetaMode(data['theta_mode']),
            regime=Regime(data['regime']),
        )


def is_synthetic_source(data: str) -> bool:
    return data.startswith('synthetic')


@dataclass
class ExperimentSpec:
    """وصف تجربة كاملة: بيانات ونسخ وبذور ومجلد نتائج

    lam = None تعني λ = 1/n بعد تحميل البيانات.
    """

    data: str
    out_dir: Path
    variants: List[VariantSpec]
    loss: LossKind = LossKind.QUADRATIC
    lam: Optional[float] = None
    epochs: int = 30
    gap_tolerance: float = 1e-10
    seeds: List[int] = field(default_factory=lambda: [42])
    n_features: Optional[int] = None
    record_wall_time: bool = True

    @property
    def is_synthetic(self) -> bool:
        return is_synthetic_source(self.data)

    def run_count(self) -> int:
        return len(self.variants) * len(self.seeds)
