"""
نماذج البيانات: مصفوفة العينات المتفرقة والثوابت النظرية
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import sparse
from django.utils.translation import gettext_lazy as _

from apps.core.exceptions import EmptyInput, FeatureIndexError


class Regime(Enum):
    """افتراض التحدب على دوال الخسارة"""
    ALL_CONVEX = 'all'  # كل φ_i محدبة
    AVERAGE_CONVEX = 'average'  # المتوسط فقط محدب


class Dataset:
    """مجموعة بيانات متفرقة بعرضين: صفوف (CSR) وأعمدة (CSC)

    الخصائص:
        X: مصفوفة CSR بحجم n×d
        columns: نفس القيم بصيغة CSC
        y: التصنيفات
        v: مربعات أطوال الصفوف ||x_i||^2
        feature_nnz: عدد العناصر غير الصفرية في كل عمود |J_j|
    """

    def __init__(self, X, y):
        X = sparse.csr_matrix(X, dtype=float, copy=True)
        y = np.array(y, dtype=float)
        n, d = X.shape
        if n == 0 or d == 0:
            raise EmptyInput(_('A dataset needs at least one sample and one feature'))
        if y.shape != (n,):
            raise EmptyInput(_('Expected %(n)s labels, got %(m)s') % {'n': n, 'm': y.size})

        row_ids = np.repeat(np.arange(n), np.diff(X.indptr))
        same_row = row_ids[1:] == row_ids[:-1]
        unordered = same_row & (np.diff(X.indices) <= 0)
        if np.any(unordered):
            raise FeatureIndexError(line=int(row_ids[np.argmax(unordered)]) + 1)

        X.eliminate_zeros()
        row_ids = np.repeat(np.arange(n), np.diff(X.indptr))
        self.X = X
        self.columns = X.tocsc()
        self.columns.sort_indices()
        self.y = y
        self.n = n
        self.d = d

        # الجمع بترتيب التخزين لكل صف
        self.v = np.bincount(row_ids, weights=X.data * X.data, minlength=n).astype(float)
        self.feature_nnz = np.diff(self.columns.indptr).astype(int)

        for array in (self.X.data, self.y, self.v):
            array.setflags(write=False)

    def __repr__(self):
        return f"Dataset(n={self.n}, d={self.d}, nnz={self.X.nnz})"

    @property
    def max_feature_nnz(self) -> int:
        return int(self.feature_nnz.max()) if self.d else 0

    def row(self, i):
        """الفهارس والقيم غير الصفرية للعينة i"""
        start, stop = self.X.indptr[i], self.X.indptr[i + 1]
        return self.X.indices[start:stop], self.X.data[start:stop]

    def column(self, f):
        """العينات التي تحتوي الخاصية f مع قيمها"""
        start, stop = self.columns.indptr[f], self.columns.indptr[f + 1]
        return self.columns.indices[start:stop], self.columns.data[start:stop]


@dataclass(frozen=True)
class TheoryConstants:
    """الثوابت النظرية لمعدل التقارب

    gamma هي λ·L̃ في حالة التحدب الكلي، و γ̄ = (1/n)ΣL_i² في حالة تحدب المتوسط.
    """

    lam: float
    gamma: float
    Q: float
    Q_prime: float
    M: float
    theta_star: float
    regime: Regime
    batch_size: int
    n: int
    L: float
    L_tilde: float
    v_prime: np.ndarray = field(repr=False)

    @property
    def gamma_kind(self) -> str:
        return 'gamma' if self.regime is Regime.ALL_CONVEX else 'gamma_bar'
