"""
وحدة المساعدة لتطبيق البيانات
تحتوي على قراءة وكتابة صيغة LIBSVM وحساب الثوابت النظرية
"""

import gzip
import logging
import math
import zlib
from typing import Iterable, Optional, TextIO, Union

import numpy as np
from scipy import sparse
from django.utils.translation import gettext_lazy as _

from apps.core.exceptions import DataIOError, FeatureIndexError, ParseError, RangeError
from apps.losses.models import LossKind, LossModel
from apps.losses.utils import smoothness_constants
from .models import Dataset, Regime, TheoryConstants

logger = logging.getLogger(__name__)

# مجموعات التصنيف الثنائية التي تُحوَّل إلى {-1, +1}
BINARY_LABEL_SETS = {
    frozenset({0.0, 1.0}): {0.0: -1.0, 1.0: 1.0},
    frozenset({1.0, 2.0}): {1.0: -1.0, 2.0: 1.0},
}


def parse_libsvm(text_stream: Union[str, Iterable[str]], n_features: Optional[int] = None) -> Dataset:
    """تحليل نص بصيغة LIBSVM إلى Dataset

    Args:
        text_stream: نص كامل أو أي مصدر أسطر (ملف مفتوح مثلاً)
        n_features: فرض عدد الخصائص d لمطابقة مجموعة أخرى

    Returns:
        Dataset: البيانات مع العرضين والإحصاءات

    Raises:
        ParseError: عند وجود رمز غير صالح، مع رقم السطر
        FeatureIndexError: عند فهارس غير متزايدة تماماً

    Examples:
        >>> parse_libsvm("+1 1:1 3:2\\n-1 2:1\\n").v
        array([5., 1.])
    """
    if isinstance(text_stream, str):
        text_stream = text_stream.splitlines()

    labels = []
    indptr = [0]
    indices = []
    values = []
    max_index = 0

    for line_number, raw_line in enumerate(text_stream, start=1):
        line = raw_line.split('#', 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise ParseError(_('invalid label %(token)r') % {'token': tokens[0]}, line=line_number)

        previous = 0
        for token in tokens[1:]:
            index_text, sep, value_text = token.partition(':')
            if not sep:
                raise ParseError(_('expected idx:val, got %(token)r') % {'token': token}, line=line_number)
            try:
                index = int(index_text)
                value = float(value_text)
            except ValueError:
                raise ParseError(_('invalid pair %(token)r') % {'token': token}, line=line_number)
            if index < 1:
                raise ParseError(_('feature indices are 1-based, got %(index)s') % {'index': index}, line=line_number)
            if index <= previous:
                raise FeatureIndexError(
                    _('index %(index)s does not follow %(previous)s') % {'index': index, 'previous': previous},
                    line=line_number,
                )
            previous = index
            if value != 0.0:
                indices.append(index - 1)
                values.append(value)
        max_index = max(max_index, previous)
        indptr.append(len(indices))

    if not labels:
        raise ParseError(_('empty input'))

    d = max_index
    if n_features is not None:
        if n_features < max_index:
            raise ParseError(
                _('n_features=%(d)s is smaller than the largest index %(index)s') % {
                    'd': n_features, 'index': max_index,
                }
            )
        d = n_features
    if d == 0:
        raise ParseError(_('no features found'))

    y = np.asarray(labels, dtype=float)
    mapping = BINARY_LABEL_SETS.get(frozenset(np.unique(y).tolist()))
    if mapping is not None:
        y = np.where(y == min(mapping), -1.0, 1.0)

    X = sparse.csr_matrix(
        (np.asarray(values, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(labels), d),
    )
    return Dataset(X, y)


def write_libsvm(ds: Dataset, sink: TextIO) -> None:
    """كتابة Dataset بصيغة LIBSVM بدقة تكفي لإعادة القراءة حرفياً"""
    for i in range(ds.n):
        indices, values = ds.row(i)
        pairs = ' '.join(f"{int(j) + 1}:{float(x)!r}" for j, x in zip(indices, values))
        label = repr(float(ds.y[i]))
        sink.write(f"{label} {pairs}\n" if pairs else f"{label}\n")


def _decoded_lines(stream, path: str):
    for line_number, raw in enumerate(stream, start=1):
        try:
            yield raw.decode('utf-8')
        except UnicodeDecodeError as exc:
            raise ParseError(
                _('%(path)s is not valid UTF-8: %(reason)s') % {'path': path, 'reason': exc},
                line=line_number,
            ) from exc


def load_dataset(path, n_features: Optional[int] = None) -> Dataset:
    """فتح ملف LIBSVM (مضغوط gzip إذا انتهى الاسم بـ .gz) وتحليله

    Raises:
        DataIOError: إذا تعذرت قراءة الملف
        ParseError: عند محتوى غير صالح، ومنه ترميز غير UTF-8
    """
    path = str(path)
    opener = gzip.open if path.endswith('.gz') else open
    try:
        with opener(path, 'rb') as stream:
            ds = parse_libsvm(_decoded_lines(stream, path), n_features=n_features)
    except (OSError, EOFError, zlib.error) as exc:
        raise DataIOError(_('cannot read dataset %(path)s: %(reason)s') % {'path': path, 'reason': exc}) from exc
    logger.info("Loaded %s: n=%d d=%d nnz=%d", path, ds.n, ds.d, ds.X.nnz)
    return ds


def eso_constants(ds: Dataset, b: int) -> np.ndarray:
    """v'_i = min{b, max_j |J_j|} · v_i

    Raises:
        RangeError: إذا كان b خارج [1, n]
    """
    if not 1 <= b <= ds.n:
        raise RangeError(_('batch size %(b)s outside [1, %(n)s]') % {'b': b, 'n': ds.n})
    return min(b, ds.max_feature_nnz) * ds.v


def theory_constants(ds: Dataset, loss: LossModel, lam: float, regime: Regime = Regime.ALL_CONVEX,
                     b: int = 1) -> TheoryConstants:
    """حساب γ و Q و Q' و M و θ* لنسخة المحلل المطلوبة

    Raises:
        RangeError: إذا كانت λ غير موجبة
    """
    if not lam > 0:
        raise RangeError(_('lambda must be positive, got %(lam)s') % {'lam': lam})
    n = ds.n
    smooth = smoothness_constants(loss, ds.v)
    if regime is Regime.ALL_CONVEX:
        gamma = lam * smooth.L_tilde
    else:
        gamma = float(np.mean(smooth.per_sample ** 2))

    v_prime = eso_constants(ds, b) if b > 1 else ds.v
    Q = float(np.mean(ds.v))
    Q_prime = float(np.mean(v_prime))
    n_lam_sq = n * lam * lam
    theta_star = n_lam_sq * b / float(np.sum(v_prime * gamma + n_lam_sq))

    return TheoryConstants(
        lam=lam,
        gamma=gamma,
        Q=Q,
        Q_prime=Q_prime,
        M=Q * (1.0 + gamma * Q / (lam * lam * n)),
        theta_star=theta_star,
        regime=regime,
        batch_size=b,
        n=n,
        L=smooth.L,
        L_tilde=smooth.L_tilde,
        v_prime=v_prime,
    )


def iteration_bound(constants: TheoryConstants, C0: float, eps: float) -> int:
    """عدد التكرارات الكافي نظرياً لبلوغ دقة eps في الهدف الأولي

    القيمة للتقرير فقط، ولا تُستخدم لإيقاف المحلل.
    """
    c = constants
    lam, n, b = c.lam, c.n, c.batch_size
    if b == 1:
        if c.regime is Regime.ALL_CONVEX:
            factor = n + c.L_tilde * c.Q / lam
            argument = (lam + c.L) * C0 / (2 * lam * c.L_tilde * eps)
        else:
            factor = n + c.gamma * c.Q / lam ** 2
            argument = (lam + c.L) * C0 / (2 * c.gamma * eps)
    else:
        if c.regime is Regime.ALL_CONVEX:
            factor = n / b + c.L_tilde * c.Q_prime / (b * lam)
            argument = (lam + c.L_tilde) * C0 / (lam * c.L_tilde * eps)
        else:
            factor = n / b + c.Q_prime * c.gamma / (b * lam)
            argument = (lam + c.L_tilde) * C0 / (c.gamma * eps)
    if argument <= 1.0:
        return 0
    return int(math.ceil(factor * math.log(argument)))


def make_synthetic(n: int, d: int, density: float = 0.3, spread: float = 2.0,
                   loss_kind: LossKind = LossKind.QUADRATIC, seed: int = 0, noise: float = 0.1) -> Dataset:
    """توليد مجموعة بيانات اصطناعية تمتد أطوال صفوفها على spread رتبة عشرية

    Args:
        n: عدد العينات
        d: عدد الخصائص
        density: نسبة العناصر غير الصفرية
        spread: مدى v_i بالرتب العشرية (max v / min v = 10**spread)
        loss_kind: يحدد شكل التصنيفات (حقيقية أو ±1)
        seed: بذرة المولد
        noise: انحراف الضجيج المضاف
    """
    rng = np.random.default_rng(seed)
    mask = rng.random((n, d)) < density
    mask[np.arange(n), rng.integers(0, d, size=n)] = True
    dense = np.where(mask, rng.standard_normal((n, d)), 0.0)
    dense /= np.linalg.norm(dense, axis=1, keepdims=True)

    exponents = np.linspace(0.0, spread, n) if n > 1 else np.zeros(1)
    dense *= np.sqrt(10.0 ** rng.permutation(exponents))[:, None]

    w_true = rng.standard_normal(d)
    margins = dense @ w_true + noise * rng.standard_normal(n)
    if loss_kind is LossKind.LOGISTIC:
        y = np.where(margins >= 0, 1.0, -1.0)
    else:
        y = margins
    return Dataset(sparse.csr_matrix(dense), y)
