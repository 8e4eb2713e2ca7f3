"""
حزمة النماذج لتطبيق أخذ العينات
تحتوي على جدول الأسماء المستعارة وشجرة المجاميع وخليط الدفعات
"""

from .alias import AliasTable
from .sum_tree import SumTree
from .minibatch import BatchMixture

__all__ = [
    'AliasTable',
    'SumTree',
    'BatchMixture',
]
