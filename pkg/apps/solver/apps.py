from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class SolverAppConfig(AppConfig):
    name = 'apps.solver'
    verbose_name = _('Dual-Free SDCA Solver')
