"""
جدول الأسماء المستعارة (طريقة Vose) للسحب بزمن ثابت
"""

import numpy as np
from django.utils.translation import gettext_lazy as _

from apps.core.exceptions import DegenerateDistribution, RangeError


class AliasTable:
    """جدول أسماء مستعارة يبنى بزمن O(n) ويسحب بزمن O(1)

    الخانة k تعيد k باحتمال prob[k] وإلا alias[k].
    """

    __slots__ = ('n', 'prob', 'alias')

    def __init__(self, weights):
        weights = np.asarray(weights, dtype=float)
        if weights.ndim != 1 or weights.size == 0:
            raise DegenerateDistribution(_('An alias table needs a non-empty weight vector'))
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise RangeError(_('Sampling weights must be finite and non-negative'))
        total = weights.sum()
        if total <= 0:
            raise DegenerateDistribution()

        n = weights.size
        scaled = (weights / total * n).tolist()
        prob = [1.0] * n
        alias = list(range(n))

        small = [k for k, value in enumerate(scaled) if value < 1.0]
        large = [k for k, value in enumerate(scaled) if value >= 1.0]
        while small and large:
            s = small.pop()
            g = large.pop()
            prob[s] = scaled[s]
            alias[s] = g
            scaled[g] = (scaled[g] + scaled[s]) - 1.0
            if scaled[g] < 1.0:
                small.append(g)
            else:
                large.append(g)
        # ما يتبقى يشغل خانته بالكامل (فروق تقريب فقط)
        for k in small + large:
            prob[k] = 1.0
            alias[k] = k

        self.n = n
        self.prob = np.asarray(prob)
        self.alias = np.asarray(alias, dtype=np.int64)

    def sample(self, rng) -> int:
        # سحب منتظم واحد: الجزء الصحيح للخانة والكسري للمقارنة
        x = rng.random() * self.n
        k = min(int(x), self.n - 1)
        return k if (x - k) < self.prob[k] else int(self.alias[k])

    def probabilities(self) -> np.ndarray:
        """إعادة بناء التوزيع من (prob, alias)"""
        mass = self.prob.copy()
        np.add.at(mass, self.alias, 1.0 - self.prob)
        return mass / self.n
