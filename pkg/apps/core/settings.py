"""
نظام إدارة إعدادات المحلل باستخدام نظام إعدادات Django
"""

from django.conf import settings


class SettingsManager:
    """
    مدير إعدادات المحلل

    يقرأ القاموس SOLVER_SETTINGS من ملف الإعدادات، ويعود للقيم الافتراضية
    عند غياب المفتاح.
    """

    SETTINGS_KEY = 'SOLVER'

    DEFAULTS = {
        'epochs': 30,
        'seed': 42,
        'gap_tolerance': 1e-10,
        'marginal_tolerance': 1e-12,
        'cap_epsilon': 1e-9,
        'conjugate_tolerance': 1e-12,
        'csv_significant_digits': 17,
        'record_wall_time': True,
        'histogram_bins': 20,
    }

    @classmethod
    def get_settings(cls) -> dict:
        """الحصول على جميع الإعدادات بعد دمجها مع الافتراضية

        Returns:
            dict: الإعدادات المستخرجة من ملف الإعدادات أو الافتراضية
        """
        configured = getattr(settings, f'{cls.SETTINGS_KEY}_SETTINGS', {}) or {}
        merged = dict(cls.DEFAULTS)
        merged.update(configured)
        return merged

    @classmethod
    def get_setting(cls, key, default=None):
        """
        الحصول على قيمة إعداد

        :param key: مفتاح الإعداد
        :param default: القيمة الافتراضية إذا لم يتم العثور على الإعداد
        :return: قيمة الإعداد
        """
        return cls.get_settings().get(key, default)
