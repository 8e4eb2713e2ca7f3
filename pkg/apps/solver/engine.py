"""
حلقة المحلل لجميع النسخ

تتبع الحلقة نمط الإرسال حسب النوع: لكل نسخة دالة خطوة خاصة بها،
وتشترك جميعها في صيانة الحالة وتسجيل الدورات وشروط التوقف.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional

import numpy as np

from apps.core.exceptions import Converged
from apps.core.settings import SettingsManager
from apps.data.models import Dataset, Regime
from apps.data.utils import iteration_bound, theory_constants
from apps.losses.models import LossKind, LossModel
from apps.metrics.models import RunRecord
from apps.metrics.utils import make_record
from apps.sampling.utils import (
    alias_build,
    alias_sample,
    clip_marginals,
    minibatch_decompose,
    minibatch_sample,
    mixture_marginals,
    sumtree_build,
    sumtree_sample,
    sumtree_total,
    sumtree_update,
    sumtree_weights,
)
from .models import SolverConfig, SolverState, ThetaMode, Variant
from .signals import epoch_completed, iteration_completed
from .utils import (
    adaptive_probabilities,
    apply_update,
    check_mapping,
    check_margins,
    closed_form_ridge,
    init_state,
    potential,
    refresh_margins,
    theta,
)

logger = logging.getLogger(__name__)

# حد الخطأ النسبي المقبول في علاقة الربط وذاكرة الهوامش
MAPPING_TOLERANCE = 1e-8


class RunStatus:
    CONVERGED = 'converged'  # جميع البواقي صفرية
    TOLERANCE = 'tolerance'  # الفجوة دون الحد المطلوب
    BUDGET = 'budget'  # انتهى عدد الدورات
    DIVERGED = 'diverged'  # ظهرت قيم غير منتهية


@dataclass
class SolveResult:
    records: List[RunRecord]
    state: SolverState
    status: str
    constants: object = field(repr=False, default=None)

    @property
    def final(self) -> RunRecord:
        return self.records[-1]

    def iteration_bound(self, tolerance: Optional[float]) -> Optional[int]:
        """عدد التكرارات النظري لبلوغ tolerance

        C0 هي قيمة دالة الجهد عند البداية α = 0 و w = 0، مقدرة بالحالة النهائية بدلاً من الحل الأمثل.
        """
        if tolerance is None or not tolerance > 0:
            return None
        start = SolverState(self.state.n, self.state.d, self.state.lam)
        c0 = potential(start, self.state, self.constants.gamma)
        if not math.isfinite(c0):
            return None
        return iteration_bound(self.constants, c0, tolerance)


class DualFreeSolver:
    """محلل SDCA الخالي من المسألة الثنائية بنسخه الأربع

    مثال:
        solver = DualFreeSolver(ds, LossModel(LossKind.QUADRATIC), SolverConfig(lam=0.1))
        result = solver.run()
    """

    def __init__(self, ds: Dataset, loss: LossModel, config: SolverConfig):
        config.clean(ds.n)
        self.ds = ds
        self.loss = loss
        self.config = config
        self.batch = config.effective_batch
        self.constants = theory_constants(ds, loss, config.lam, config.regime, self.batch)
        self.gamma = self.constants.gamma
        self.v = self.constants.v_prime
        self.rng = np.random.default_rng(config.seed)
        self.state = init_state(ds, loss, config.lam)
        self._tree = None
        self._uniform_theta = config.lam / (config.lam * ds.n + self.constants.L_tilde * float(ds.v.max()))

    def step(self) -> float:
        """تنفيذ تكرار واحد حسب النسخة وإرجاع θ المستخدمة"""
        variant = self.config.variant
        if variant == Variant.ADAPTIVE:
            return self._step_adaptive()
        elif variant == Variant.HEURISTIC:
            return self._step_heuristic()
        elif variant == Variant.MINIBATCH:
            return self._step_minibatch()
        elif variant == Variant.UNIFORM:
            return self._step_uniform()

    def _step_size(self, kappa, p, v, b=1) -> float:
        if self.config.theta_mode is ThetaMode.FIXED:
            return self.constants.theta_star
        return theta(kappa, p, v, self.gamma, self.config.lam, self.ds.n, b)

    def _notify(self, step, probabilities=None, batch=None, marginals=None):
        iteration_completed.send(
            sender=self.__class__,
            state=self.state,
            theta=step,
            probabilities=probabilities,
            batch=batch,
            marginals=marginals,
        )

    def _step_adaptive(self) -> float:
        state, n = self.state, self.ds.n
        p = adaptive_probabilities(state.kappa, self.v, self.gamma, self.config.lam, n)
        step = self._step_size(state.kappa, p, self.v)
        i = alias_sample(alias_build(p), self.rng)
        apply_update(state, i, step, p[i], self.ds, self.loss)
        if iteration_completed.has_listeners():
            self._notify(step, probabilities=p, batch=np.array([i]))
        return step

    def _step_heuristic(self) -> float:
        state, n = self.state, self.ds.n
        if self._tree is None or state.t % n == 0:
            p_star = adaptive_probabilities(state.kappa, self.v, self.gamma, self.config.lam, n)
            self._tree = sumtree_build(p_star)

        tree = self._tree
        p = sumtree_weights(tree) / sumtree_total(tree)
        i = sumtree_sample(tree, self.rng)
        sumtree_update(tree, i, tree[i] / self.config.shrink)

        # θ على الإحداثيات ذات الاحتمال الموجب فقط، لأن التوزيع المقلص قد لا يغطي دعم κ
        support = (state.kappa != 0) & (p > 0)
        if state.kappa[i] == 0 or not support.any():
            step = 0.0
        else:
            step = self._step_size(state.kappa[support], p[support], self.v[support])
            apply_update(state, i, step, p[i], self.ds, self.loss)
        if iteration_completed.has_listeners():
            self._notify(step, probabilities=p, batch=np.array([i]))
        return step

    def _step_minibatch(self) -> float:
        state, n, b = self.state, self.ds.n, self.batch
        p = adaptive_probabilities(state.kappa, self.v, self.gamma, self.config.lam, n)
        support = np.flatnonzero(p > 0)

        q = np.zeros(n)
        if support.size <= b:
            batch = support
            q[support] = 1.0
            mixture = None
        else:
            q = clip_marginals(p, b)
            mixture = minibatch_decompose(q[support], b)
            batch = support[minibatch_sample(mixture, self.rng)]

        step = self._step_size(state.kappa[support], q[support] / b, self.v[support], b)
        residues = state.kappa[batch].copy()
        for i, residue in zip(batch, residues):
            apply_update(state, i, step, q[i] / b, self.ds, self.loss, b=b, residue=residue)

        if iteration_completed.has_listeners():
            marginals = q.copy()
            if mixture is not None:
                marginals[support] = mixture_marginals(mixture)
            self._notify(step, probabilities=p, batch=batch, marginals=marginals)
        return step

    def _step_uniform(self) -> float:
        state, n = self.state, self.ds.n
        if not np.any(state.kappa):
            raise Converged()
        step = self._uniform_theta
        i = int(self.rng.integers(n))
        apply_update(state, i, step, 1.0 / n, self.ds, self.loss)
        if iteration_completed.has_listeners():
            self._notify(step, probabilities=np.full(n, 1.0 / n), batch=np.array([i]))
        return step

    def _verify_state(self):
        errors = (check_mapping(self.state, self.ds), check_margins(self.state, self.ds))
        if max(errors) > MAPPING_TOLERANCE:
            logger.warning(
                "Mapping drift at t=%d (mapping=%.2e, margins=%.2e), rebuilding from alpha",
                self.state.t, errors[0], errors[1],
            )
            refresh_margins(self.state, self.ds, self.loss)

    def run(self, callbacks: Iterable[Callable[[RunRecord], None]] = ()) -> SolveResult:
        """تشغيل المحلل حتى انتهاء الدورات أو بلوغ الفجوة المطلوبة

        Args:
            callbacks: دوال تستقبل كل RunRecord عند صدوره

        Returns:
            SolveResult: السجلات والحالة النهائية وسبب التوقف
        """
        config, state, n = self.config, self.state, self.ds.n
        callbacks = list(callbacks)
        record_wall = config.record_wall_time
        tolerance = config.gap_tolerance
        started = time.perf_counter()
        records = []
        thetas = []

        def emit():
            wall_ms = (time.perf_counter() - started) * 1000.0 if record_wall else 0.0
            mean_theta = float(np.mean(thetas)) if thetas else 0.0
            record = make_record(state, self.ds, self.loss, mean_theta, wall_ms)
            records.append(record)
            thetas.clear()
            for callback in callbacks:
                callback(record)
            epoch_completed.send(sender=self.__class__, record=record, state=state, config=config)
            return record

        logger.info(
            "Starting %s on %r: lambda=%g, theta*=%.3e, epochs=%d, seed=%d",
            config.label, self.ds, config.lam, self.constants.theta_star, config.epochs, config.seed,
        )
        record = emit()
        status = RunStatus.BUDGET
        if tolerance is not None and record.gap <= tolerance:
            status = RunStatus.TOLERANCE

        completed_epochs = 0
        while status == RunStatus.BUDGET and completed_epochs < config.epochs:
            try:
                thetas.append(self.step())
            except Converged:
                state.epoch = state.t * self.batch / n
                record = emit()
                # بواقي NaN تجعل مجموع الأوزان غير موجب أيضاً
                status = RunStatus.CONVERGED if record.is_finite else RunStatus.DIVERGED
                break
            state.t += 1
            state.epoch = state.t * self.batch / n

            if math.floor(state.epoch) > completed_epochs:
                completed_epochs = math.floor(state.epoch)
                self._verify_state()
                record = emit()
                if not record.is_finite:
                    status = RunStatus.DIVERGED
                    logger.error("%s diverged at epoch %.3f", config.label, state.epoch)
                elif tolerance is not None and record.gap <= tolerance:
                    status = RunStatus.TOLERANCE

        logger.info(
            "Finished %s after %d iterations (epoch %.3f): %s, gap=%.3e",
            config.label, state.t, state.epoch, status, records[-1].gap,
        )
        return SolveResult(records=records, state=state, status=status, constants=self.constants)


def solve(ds: Dataset, loss: LossModel, config: SolverConfig,
          callbacks: Iterable[Callable[[RunRecord], None]] = ()) -> SolveResult:
    """تشغيل نسخة واحدة من المحلل وإرجاع السجلات والحالة النهائية"""
    return DualFreeSolver(ds, loss, config).run(callbacks)


def reference_solve(ds: Dataset, loss: LossModel, lam: float, epochs: int = 10_000,
                    seed: Optional[int] = None) -> SolverState:
    """حل مرجعي عالي الدقة (α*, w*)

    للخسارة التربيعية يُستخدم الحل المغلق، وإلا تشغيل طويل لـ AdfSDCA.
    """
    if loss.kind is LossKind.QUADRATIC:
        return closed_form_ridge(ds, lam)
    config = SolverConfig(
        lam=lam,
        loss=loss.kind,
        variant=Variant.ADAPTIVE,
        regime=Regime.ALL_CONVEX,
        epochs=epochs,
        seed=SettingsManager.get_setting('seed', 42) if seed is None else seed,
        gap_tolerance=1e-15,
    )
    result = solve(ds, loss, config)
    logger.info("Reference solve finished with gap %.3e (%s)", result.final.gap, result.status)
    return result.state
