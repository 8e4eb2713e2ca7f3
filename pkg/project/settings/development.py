from .base import *

# تفعيل السجلات التفصيلية أثناء التطوير
LOGGING['loggers']['apps']['level'] = env("LOG_LEVEL", default="DEBUG")

# تشغيل المهام داخل العملية أثناء التطوير
CELERY_TASK_ALWAYS_EAGER = True
