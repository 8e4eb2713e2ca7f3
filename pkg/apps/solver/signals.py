"""
إشارات المحلل
"""

from django.dispatch import Signal

# تُرسل بعد كل دورة مع: record, state, config
epoch_completed = Signal()

# تُرسل بعد كل تكرار عند وجود مستقبلين مع: state, theta, probabilities, batch, marginals
iteration_completed = Signal()
