"""
خليط الدفعات غير المنتظمة ذات الحجم الثابت
"""

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .alias import AliasTable


@dataclass(frozen=True)
class BatchMixture:
    """تمثيل سحب دفعة بحجم b كخليط مكونات (r_k, i^k, j^k)

    المكون k يثبت المواقع المرتبة 1..i^k-1 ويسحب b-i^k+1 موقعاً بانتظام من
    i^k..j^k. الفهارس i و j هنا بالترقيم من 1 كما في المواقع المرتبة، و perm
    يعيد الموقع المرتب إلى رقم الإحداثي الأصلي.
    """

    b: int
    r: np.ndarray
    starts: np.ndarray
    ends: np.ndarray
    perm: np.ndarray
    component_table: AliasTable = field(repr=False, compare=False)

    @property
    def m(self) -> int:
        return int(self.r.size)

    @property
    def n(self) -> int:
        return int(self.perm.size)

    @property
    def components(self):
        return [(float(r), int(i), int(j)) for r, i, j in zip(self.r, self.starts, self.ends)]

    def inclusion_rates(self) -> np.ndarray:
        """(b - i^k + 1) / (j^k - i^k + 1) لكل مكون"""
        return (self.b - self.starts + 1) / (self.ends - self.starts + 1)

    def sorted_marginals(self) -> np.ndarray:
        positions = np.arange(1, self.n + 1)[:, None]
        fixed = positions < self.starts[None, :]
        uniform = (positions >= self.starts[None, :]) & (positions <= self.ends[None, :])
        return (fixed * self.r).sum(axis=1) + (uniform * (self.r * self.inclusion_rates())).sum(axis=1)

    def draw(self, rng, component=None) -> np.ndarray:
        """سحب دفعة: المكون أولاً ثم المجموعة الجزئية المنتظمة"""
        k = self.component_table.sample(rng) if component is None else component
        start, end = int(self.starts[k]), int(self.ends[k])
        free = rng.choice(np.arange(start - 1, end), size=self.b - start + 1, replace=False)
        positions = np.concatenate([np.arange(start - 1), free])
        return np.sort(self.perm[positions])

    def subset_probability(self, subset) -> float:
        """الاحتمال الدقيق لسحب المجموعة subset (أرقام أصلية)"""
        inverse = np.empty_like(self.perm)
        inverse[self.perm] = np.arange(self.n)
        positions = np.sort(inverse[np.asarray(sorted(subset), dtype=np.int64)]) + 1
        if positions.size != self.b or np.unique(positions).size != self.b:
            return 0.0
        total = 0.0
        for r, start, end in zip(self.r, self.starts, self.ends):
            prefix = positions[:start - 1]
            rest = positions[start - 1:]
            if np.array_equal(prefix, np.arange(1, start)) and np.all((rest >= start) & (rest <= end)):
                total += r / comb(int(end - start + 1), int(self.b - start + 1))
        return float(total)
