import math
from dataclasses import astuple, dataclass, fields


@dataclass(frozen=True)
class RunRecord:
    """سجل قياسات دورة واحدة

    gap = primal - dual محسوبة عند النقطة الثنائية المقابلة ᾱ = -φ'(z).
    """

    epoch: float
    primal: float
    dual: float
    gap: float
    residual_sq_norm: float
    theta_used: float
    wall_ms: float

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]

    def as_row(self):
        return astuple(self)

    @property
    def is_finite(self) -> bool:
        return all(math.isfinite(value) for value in self.as_row())
