"""
أخطاء النظام المشتركة بين جميع التطبيقات
"""

from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _


class SolverError(ValidationError):
    """الخطأ الأساسي لجميع أخطاء المحلل

    يحتفظ بنمط ValidationError: رسالة مترجمة ورمز ومعاملات.
    """

    default_message = _('Solver error')
    default_code = 'solver_error'

    def __init__(self, message=None, code=None, params=None):
        super().__init__(
            message or self.default_message,
            code=code or self.default_code,
            params=params,
        )

    def __str__(self):
        # ValidationError يعرض القائمة، نعرض الرسالة المنسقة مباشرة
        return '; '.join(str(m) for m in self.messages)


class DomainError(SolverError):
    """قيمة خارج مجال الدالة المرافقة"""
    default_message = _('Argument outside the conjugate domain')
    default_code = 'domain'


class EmptyInput(SolverError):
    default_message = _('Input is empty')
    default_code = 'empty_input'


class ParseError(SolverError):
    """خطأ في تحليل ملف LIBSVM مع رقم السطر"""
    default_message = _('Malformed input')
    default_code = 'parse'

    def __init__(self, message=None, line=None, code=None):
        self.line = line
        detail = message or self.default_message
        if line is not None:
            detail = _('line %(line)s: %(detail)s') % {'line': line, 'detail': detail}
        super().__init__(detail, code=code)


class FeatureIndexError(ParseError):
    """فهارس الخصائص غير متزايدة تماماً"""
    default_message = _('Feature indices must be strictly increasing')
    default_code = 'feature_index'


class RangeError(SolverError):
    default_message = _('Parameter out of range')
    default_code = 'range'


class DegenerateDistribution(SolverError):
    default_message = _('All weights are zero')
    default_code = 'degenerate'


class InvalidMarginal(SolverError):
    default_message = _('Invalid marginal vector')
    default_code = 'invalid_marginal'


class InfeasibleMarginal(SolverError):
    default_message = _('Batch size exceeds the number of coordinates with positive probability')
    default_code = 'infeasible_marginal'


class NonTermination(SolverError):
    default_message = _('Mini-batch decomposition did not terminate')
    default_code = 'non_termination'


class Converged(SolverError):
    """إشارة الوصول إلى الحل الأمثل (جميع البواقي صفرية)"""
    default_message = _('Dual residue vanished, optimum reached')
    default_code = 'converged'


class DataIOError(SolverError):
    default_message = _('Input/output failure')
    default_code = 'io'
