import os
import environ
from pathlib import Path
from django.utils.translation import gettext_lazy as _

# تحديد مسار المشروع
BASE_DIR = Path(__file__).resolve().parent.parent

# تحميل المتغيرات البيئية
env = environ.Env()
environ.Env.read_env(BASE_DIR / ".env")

# مفاتيح الأمان
SECRET_KEY = env("SECRET_KEY", default="adaptive-sdca-local-key")
DEBUG = env.bool("DEBUG", default=True)

ALLOWED_HOSTS = env.list("ALLOWED_HOSTS", default=["localhost", "127.0.0.1"])

# التطبيقات المثبتة
INSTALLED_APPS = [
    # تطبيقات المشروع
    'apps.core.apps.CoreConfig',
    'apps.losses.apps.LossesConfig',
    'apps.data.apps.DataConfig',
    'apps.sampling.apps.SamplingConfig',
    'apps.solver.apps.SolverAppConfig',
    'apps.metrics.apps.MetricsConfig',
    'apps.experiments.apps.ExperimentsConfig',
]

# لا توجد نماذج قاعدة بيانات، قاعدة مؤقتة في الذاكرة تكفي لأدوات Django
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': ':memory:',
    }
}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# إعدادات الترجمة واللغات
LANGUAGE_CODE = 'en'

LANGUAGES = [
    ('en', _('English')),
    ('ar', _('Arabic')),
]

USE_I18N = True

LOCALE_PATHS = [
    os.path.join(BASE_DIR.parent, 'locale'),
]

# المنطقة الزمنية
TIME_ZONE = 'UTC'
USE_TZ = True

# إعدادات Celery
# التشغيل المتزامن داخل العملية افتراضياً، ويكفي ضبط CELERY_ALWAYS_EAGER=False مع وسيط Redis للتوزيع على العمال
CELERY_BROKER_URL = env("CELERY_BROKER", default="redis://redis:6379/0")
CELERY_RESULT_BACKEND = env("CELERY_RESULT_BACKEND", default="redis://redis:6379/1")
CELERY_TASK_ALWAYS_EAGER = env.bool("CELERY_ALWAYS_EAGER", default=True)
CELERY_TASK_EAGER_PROPAGATES = True
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_ACCEPT_CONTENT = ['json']
CELERY_WORKER_CONCURRENCY = env.int("SOLVER_MAX_WORKERS", default=4)

# إعدادات السجلات
LOG_LEVEL = env("LOG_LEVEL", default="INFO")

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'apps': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}

# إعدادات المحلل
# ==================

SOLVER_SETTINGS = {
    'epochs': env.int("SOLVER_EPOCHS", default=30),
    'seed': env.int("SOLVER_SEED", default=42),
    'gap_tolerance': env.float("SOLVER_GAP_TOL", default=1e-10),
    'marginal_tolerance': 1e-12,
    'cap_epsilon': 1e-9,
    'conjugate_tolerance': 1e-12,
    'csv_significant_digits': 17,
    'record_wall_time': env.bool("SOLVER_RECORD_WALL_TIME", default=True),
    'histogram_bins': 20,
}
