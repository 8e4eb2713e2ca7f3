import logging

from django.dispatch import receiver

from apps.solver.signals import epoch_completed

logger = logging.getLogger(__name__)


@receiver(epoch_completed)
def log_epoch_record(sender, record, config=None, **kwargs):
    """تسجيل ملخص كل دورة"""
    label = config.label if config is not None else sender.__name__
    logger.debug(
        "[%s] epoch=%.3f primal=%.10e gap=%.3e |kappa|^2=%.3e theta=%.3e",
        label, record.epoch, record.primal, record.gap, record.residual_sq_norm, record.theta_used,
    )
