"""
وحدة المساعدة لتطبيق أخذ العينات
تحتوي على عمليات البناء والسحب وتفكيك الهوامش إلى خليط دفعات
"""

import logging

import numpy as np
from django.utils.translation import gettext_lazy as _

from apps.core.exceptions import InfeasibleMarginal, InvalidMarginal, NonTermination
from apps.core.settings import SettingsManager
from .models import AliasTable, BatchMixture, SumTree

logger = logging.getLogger(__name__)


def alias_build(p) -> AliasTable:
    """بناء جدول أسماء مستعارة من متجه احتمالات (يُعاد تطبيعه داخلياً)

    Raises:
        DegenerateDistribution: إذا كانت جميع الأوزان صفرية
    """
    return AliasTable(p)


def alias_sample(table: AliasTable, rng) -> int:
    return table.sample(rng)


def sumtree_build(weights) -> SumTree:
    return SumTree(weights)


def sumtree_update(tree: SumTree, i: int, weight: float) -> None:
    tree.update(i, weight)


def sumtree_sample(tree: SumTree, rng) -> int:
    return tree.sample(rng)


def sumtree_total(tree: SumTree) -> float:
    return tree.total


def sumtree_weights(tree: SumTree) -> np.ndarray:
    return tree.weights


def clip_marginals(p, b: int) -> np.ndarray:
    """تحويل توزيع p إلى هوامش دفعة q مجموعها b

    إذا كانت max p_i < 1/b فإن q = b·p، وإلا يُقص كل q_i تجاوز 1-ε إلى 1-ε
    ويوزع الفائض على الإحداثيات غير المقصوصة بنسبة p، مع التكرار حتى الجدوى.
    عندما يساوي عدد الإحداثيات الموجبة b بالضبط تكون الهوامش الوحيدة الممكنة 1.

    Raises:
        InfeasibleMarginal: إذا كان b أكبر من عدد الإحداثيات ذات p_i > 0
    """
    p = np.asarray(p, dtype=float)
    p = p / p.sum()
    positive = p > 0
    count = int(positive.sum())
    if b > count:
        raise InfeasibleMarginal(
            _('batch size %(b)s exceeds the %(count)s coordinates with positive probability') % {
                'b': b, 'count': count,
            }
        )
    if b == count:
        return positive.astype(float)

    cap = 1.0 - SettingsManager.get_setting('cap_epsilon', 1e-9)
    q = b * p
    capped = np.zeros(p.size, dtype=bool)
    while True:
        over = (q > cap) & ~capped
        if not over.any():
            break
        capped |= over
        q[capped] = cap
        free = positive & ~capped
        excess = b - cap * capped.sum()
        q[free] = excess * p[free] / p[free].sum()
    return q


def minibatch_decompose(q, b: int) -> BatchMixture:
    """تفكيك هوامش q إلى خليط مكونات "بادئة ثابتة + مجموعة منتظمة"

    Args:
        q: الهوامش المطلوبة، q_i في (0, 1) ومجموعها b
        b: حجم الدفعة، 1 <= b < n

    Returns:
        BatchMixture: الخليط الذي يحقق الهوامش بالضبط

    Raises:
        InvalidMarginal: عند مخالفة الشروط المسبقة
        NonTermination: إذا تجاوزت الحلقة n+1 خطوة

    Examples:
        >>> mix = minibatch_decompose([0.8, 0.6, 0.4, 0.2], 2)
        >>> [(round(r, 12), i, j) for r, i, j in mix.components]
        [(0.2, 2, 2), (0.4, 2, 3), (0.4, 1, 4)]
    """
    q = np.asarray(q, dtype=float)
    n = q.size
    if not 1 <= b < n:
        raise InvalidMarginal(_('batch size %(b)s outside [1, %(n)s)') % {'b': b, 'n': n})
    if np.any(q <= 0) or np.any(q >= 1):
        raise InvalidMarginal(_('every marginal must lie strictly inside (0, 1)'))
    if abs(q.sum() - b) > 1e-9 * max(1.0, b):
        raise InvalidMarginal(_('marginals sum to %(total)s instead of %(b)s') % {'total': q.sum(), 'b': b})

    eps = SettingsManager.get_setting('marginal_tolerance', 1e-12) * b
    perm = np.argsort(-q, kind='stable')
    level = q[perm].copy()

    rates, starts, ends = [], [], []
    for _step in range(n + 2):
        if np.all(level <= eps):
            break
        qb = level[b - 1]
        # الترقيم من 1: i و j حدود المجموعة المساوية لـ q_b
        i = b
        while i > 1 and abs(level[i - 2] - qb) <= eps:
            i -= 1
        j = b
        while j < n and abs(level[j] - qb) <= eps:
            j += 1
        q_next = level[j] if j < n else 0.0
        width = j - i + 1

        if i > 1:
            to_prefix = width / (j - b) * (level[i - 2] - qb) if j > b else np.inf
            to_next = width / (b - i + 1) * (qb - q_next)
            r = min(to_prefix, to_next)
        else:
            r = j / b * (qb - q_next)

        level[:i - 1] -= r
        level[i - 1:j] = qb - (b - i + 1) / width * r
        np.maximum(level, 0.0, out=level)

        rates.append(r)
        starts.append(i)
        ends.append(j)
    else:
        raise NonTermination(_('decomposition exceeded %(steps)s steps') % {'steps': n + 1})

    r = np.asarray(rates)
    r /= r.sum()
    logger.debug("Decomposed %d marginals with b=%d into %d components", n, b, r.size)
    return BatchMixture(
        b=b,
        r=r,
        starts=np.asarray(starts, dtype=np.int64),
        ends=np.asarray(ends, dtype=np.int64),
        perm=perm,
        component_table=AliasTable(r),
    )


def minibatch_sample(mixture: BatchMixture, rng, component=None) -> np.ndarray:
    """سحب دفعة من b إحداثيات مختلفة (أرقام أصلية مرتبة)

    يستهلك المولد سحب المكون أولاً ثم سحب المجموعة الجزئية.
    """
    return mixture.draw(rng, component=component)


def mixture_marginals(mixture: BatchMixture) -> np.ndarray:
    """الهوامش التحليلية للخليط بترتيب الإحداثيات الأصلي"""
    marginals = np.empty(mixture.n)
    marginals[mixture.perm] = mixture.sorted_marginals()
    return marginals


def subset_probability(mixture: BatchMixture, subset) -> float:
    return mixture.subset_probability(subset)
