"""
شجرة المجاميع الثنائية: تحديث وسحب بزمن O(log n)
"""

import numpy as np
from django.utils.translation import gettext_lazy as _

from apps.core.exceptions import DegenerateDistribution, RangeError


class SumTree:
    """شجرة ثنائية كاملة فوق أوزان غير سالبة

    العقدة 1 هي الجذر، وأبناء العقدة k هما 2k و 2k+1، والأوراق تبدأ من capacity.
    """

    def __init__(self, weights):
        weights = np.asarray(weights, dtype=float)
        if weights.ndim != 1 or weights.size == 0:
            raise DegenerateDistribution(_('A sum tree needs a non-empty weight vector'))
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise RangeError(_('Sampling weights must be finite and non-negative'))

        self.n = weights.size
        capacity = 1
        while capacity < self.n:
            capacity <<= 1
        self.capacity = capacity
        self.nodes = np.zeros(2 * capacity)
        self.nodes[capacity:capacity + self.n] = weights

        level = capacity
        while level > 1:
            parents = np.arange(level // 2, level)
            self.nodes[parents] = self.nodes[2 * parents] + self.nodes[2 * parents + 1]
            level //= 2

        if self.total <= 0:
            raise DegenerateDistribution()

    @property
    def total(self) -> float:
        return float(self.nodes[1])

    @property
    def weights(self) -> np.ndarray:
        return self.nodes[self.capacity:self.capacity + self.n]

    def __getitem__(self, i) -> float:
        return float(self.nodes[self.capacity + i])

    def update(self, i: int, weight: float) -> None:
        if not 0 <= i < self.n:
            raise RangeError(_('Leaf %(i)s outside [0, %(n)s)') % {'i': i, 'n': self.n})
        if weight < 0 or not np.isfinite(weight):
            raise RangeError(_('Sampling weights must be finite and non-negative'))
        node = self.capacity + i
        self.nodes[node] = weight
        node >>= 1
        while node >= 1:
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1]
            node >>= 1

    def sample(self, rng) -> int:
        total = self.total
        if total <= 0:
            raise DegenerateDistribution()
        mass = rng.random() * total
        node = 1
        while node < self.capacity:
            left = self.nodes[2 * node]
            right = self.nodes[2 * node + 1]
            # فرع بوزن صفري لا يُختار حتى مع أخطاء التقريب
            if (mass < left and left > 0) or right <= 0:
                node = 2 * node
            else:
                mass -= left
                node = 2 * node + 1
        return node - self.capacity

    def probability(self, i: int) -> float:
        return self[i] / self.total
