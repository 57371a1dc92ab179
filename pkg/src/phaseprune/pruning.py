"""Hardware-aware magnitude pruning of mesh phases.

Thresholds are ``alpha`` times the standard deviation of the non-zero
phases of one mesh, by default the population std of their magnitudes
(see ThresholdRule). Pruned
phases are clamped to exactly 0 and held there by a binary mask that gates
the gradient during fine-tuning. The hybrid pipeline runs a sweep of
independent one-shot candidates, then ramps ``alpha`` iteratively from the
best candidate until accuracy drops below a floor.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .network import ScIpnn, TrainConfig, evaluate, train

STAGES = ("baseline", "oneshot", "iterative")


@dataclass(frozen=True)
class PruneReport:
    stage: str
    alpha: float
    ps_sparsity_pct: float
    mean_phase_rad: float
    accuracy: float
    epochs_finetuned: int = 0
    wall_time_s: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ThresholdRule:
    """Which spread the threshold scales: magnitudes or signed phases,
    population (``ddof=0``) or sample (``ddof=1``) form."""

    signed: bool = False
    ddof: int = 0

    def __post_init__(self):
        if self.ddof not in (0, 1):
            raise ValueError("ddof must be 0 or 1")


@dataclass(frozen=True)
class OsConfig:
    alphas: tuple[float, ...]
    acc_min: float
    finetune: TrainConfig = field(default_factory=TrainConfig)
    rule: ThresholdRule = ThresholdRule()

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if not self.alphas:
            raise ValueError("need at least one one-shot alpha")
        if min(self.alphas) < 0:
            raise ValueError("alphas must be >= 0")


@dataclass(frozen=True)
class ItConfig:
    delta_alpha: float
    acc_min: float
    finetune: TrainConfig = field(default_factory=TrainConfig)
    max_iters: int = 50
    alpha0: float | None = None  # None: start from the one-shot winner's alpha
    rule: ThresholdRule = ThresholdRule()

    def __post_init__(self):
        if not self.delta_alpha > 0:
            raise ValueError("delta_alpha must be > 0")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.alpha0 is not None and self.alpha0 < 0:
            raise ValueError("alpha0 must be >= 0")


@dataclass(eq=False)
class PrunedModel:
    net: ScIpnn
    mask: np.ndarray
    report: PruneReport


class NoQualifyingCandidate(Exception):
    """No one-shot candidate reached the accuracy floor."""

    def __init__(self, reports: list[PruneReport], acc_min: float):
        best = max((r.accuracy for r in reports), default=float("nan"))
        super().__init__(f"no one-shot candidate reached accuracy {acc_min:.4f} (best {best:.4f})")
        self.reports = reports
        self.acc_min = acc_min


def initial_mask(net: ScIpnn) -> np.ndarray:
    return net.phases != 0


def threshold_for_mesh(phases, alpha: float, rule: ThresholdRule = ThresholdRule()) -> float:
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    values = np.asarray(phases, dtype=float)
    values = values[values != 0]
    if values.size <= rule.ddof or alpha == 0:
        return 0.0
    if not rule.signed:
        values = np.abs(values)
    return float(alpha * values.std(ddof=rule.ddof))


def apply_magnitude_prune(
    net: ScIpnn, alpha: float, prior_mask=None, rule: ThresholdRule = ThresholdRule()
) -> tuple[ScIpnn, np.ndarray]:
    """Zero every phase whose magnitude is strictly below its mesh threshold.

    Returns a pruned copy of ``net`` and the new mask. Bits already cleared
    in ``prior_mask`` stay cleared.
    """
    mask = initial_mask(net) if prior_mask is None else np.asarray(prior_mask, dtype=bool)
    if mask.shape != (net.layout.n_phases,):
        raise ValueError(f"mask has shape {mask.shape}, expected ({net.layout.n_phases},)")
    pruned = net.copy()
    phases = pruned.params[net.layout.phase_section]
    new_mask = mask.copy()
    for sl in net.mesh_phase_slices():
        chunk = phases[sl]
        thr = threshold_for_mesh(chunk, alpha, rule)
        new_mask[sl] &= (np.abs(chunk) >= thr) & (chunk != 0)
    phases[~new_mask] = 0.0
    return pruned, new_mask


def sparsity(mask) -> float:
    mask = np.asarray(mask, dtype=bool)
    if mask.size == 0:
        raise ValueError("empty mask")
    return 100.0 * np.count_nonzero(~mask) / mask.size


def mean_phase(net: ScIpnn) -> float:
    """Mean |phase| over every phase shifter; proportional to static tuning power."""
    return float(np.mean(np.abs(net.phases)))


def _finetune(pruned: ScIpnn, mask, changed: bool, cfg: TrainConfig, train_data):
    if not changed:
        return pruned, 0
    tuned, _ = train(pruned, train_data, cfg, mask)
    return tuned, cfg.epochs


def _os_candidate(args) -> PrunedModel:
    net, base_mask, alpha, cfg, train_data, eval_data = args
    start = time.perf_counter()
    pruned, mask = apply_magnitude_prune(net, alpha, base_mask, cfg.rule)
    changed = not np.array_equal(mask, base_mask)
    pruned, epochs = _finetune(pruned, mask, changed, cfg.finetune, train_data)
    report = PruneReport(
        "oneshot",
        alpha,
        sparsity(mask),
        mean_phase(pruned),
        evaluate(pruned, eval_data),
        epochs,
        time.perf_counter() - start,
    )
    return PrunedModel(pruned, mask, report)


def select_winner(candidates: list[PrunedModel], acc_min: float) -> PrunedModel | None:
    """Highest sparsity among candidates at or above the floor; ties go to
    higher accuracy, then smaller alpha."""
    ok = [c for c in candidates if c.report.accuracy >= acc_min]
    if not ok:
        return None
    return max(ok, key=lambda c: (c.report.ps_sparsity_pct, c.report.accuracy, -c.report.alpha))


def one_shot_prune(net: ScIpnn, cfg: OsConfig, train_data, eval_data=None, workers: int = 1):
    """Prune-and-fine-tune once per alpha; return ``(winner, candidates)``.

    Candidates are returned sorted by alpha. Raises NoQualifyingCandidate
    when none reaches ``cfg.acc_min``.
    """
    eval_data = train_data if eval_data is None else eval_data
    base_mask = initial_mask(net)
    jobs = [(net, base_mask, a, cfg, train_data, eval_data) for a in sorted(set(cfg.alphas))]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(min(workers, len(jobs))) as pool:
            candidates = list(pool.map(_os_candidate, jobs))
    else:
        candidates = [_os_candidate(j) for j in jobs]
    winner = select_winner(candidates, cfg.acc_min)
    if winner is None:
        raise NoQualifyingCandidate([c.report for c in candidates], cfg.acc_min)
    return winner, candidates


def iterative_prune(start: PrunedModel, cfg: ItConfig, train_data, eval_data=None):
    """Raise alpha by ``delta_alpha`` each round; stop at the first round
    below ``cfg.acc_min`` and fall back to the previous checkpoint.

    Returns ``(final_model, reports)``; ``reports`` includes the failing round.
    """
    eval_data = train_data if eval_data is None else eval_data
    alpha0 = start.report.alpha if cfg.alpha0 is None else cfg.alpha0
    current = start
    reports = []
    for i in range(1, cfg.max_iters + 1):
        alpha = alpha0 + i * cfg.delta_alpha
        t0 = time.perf_counter()
        pruned, mask = apply_magnitude_prune(current.net, alpha, current.mask, cfg.rule)
        changed = not np.array_equal(mask, current.mask)
        pruned, epochs = _finetune(pruned, mask, changed, cfg.finetune, train_data)
        report = PruneReport(
            "iterative",
            alpha,
            sparsity(mask),
            mean_phase(pruned),
            evaluate(pruned, eval_data),
            epochs,
            time.perf_counter() - t0,
        )
        reports.append(report)
        if report.accuracy < cfg.acc_min:
            break
        current = PrunedModel(pruned, mask, report)
    return current, reports


@dataclass(eq=False)
class ChampResult:
    baseline: PrunedModel
    oneshot: PrunedModel
    final: PrunedModel
    oneshot_reports: list[PruneReport]
    iterative_reports: list[PruneReport]

    @property
    def trail(self) -> list[PruneReport]:
        return [self.baseline.report] + self.oneshot_reports + self.iterative_reports

    @property
    def path(self) -> list[PruneReport]:
        """Baseline, the one-shot winner, then every iterative round."""
        return [self.baseline.report, self.oneshot.report] + self.iterative_reports


def baseline_model(net: ScIpnn, eval_data) -> PrunedModel:
    mask = initial_mask(net)
    report = PruneReport("baseline", 0.0, sparsity(mask), mean_phase(net), evaluate(net, eval_data))
    return PrunedModel(net.copy(), mask, report)


def champ(net: ScIpnn, os_cfg: OsConfig, it_cfg: ItConfig, train_data, eval_data=None, workers: int = 1) -> ChampResult:
    """One-shot sweep followed by iterative pruning from the winner."""
    eval_data = train_data if eval_data is None else eval_data
    base = baseline_model(net, eval_data)
    winner, candidates = one_shot_prune(net, os_cfg, train_data, eval_data, workers)
    final, it_reports = iterative_prune(winner, it_cfg, train_data, eval_data)
    return ChampResult(base, winner, final, [c.report for c in candidates], it_reports)
