"""Monte Carlo accuracy under Gaussian phase-shifter noise."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import wrap_phase
from .network import ScIpnn, count_correct

MODES = ("power_gated", "removed")


@dataclass(frozen=True)
class UncertaintyConfig:
    sigma_ps: float  # noise std in units of pi
    iterations: int = 1000
    mode: str = "power_gated"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sigma_ps", float(self.sigma_ps))
        if self.sigma_ps < 0:
            raise ValueError("sigma_ps must be >= 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class McResult:
    sigma_ps: float
    mode: str
    mean_accuracy: float
    std_accuracy: float
    iterations: int

    @property
    def std_error(self) -> float:
        return self.std_accuracy / np.sqrt(self.iterations)


def iteration_rng(seed: int, iteration: int) -> np.random.Generator:
    return np.random.default_rng([seed, iteration])


def perturb(net: ScIpnn, mask, cfg: UncertaintyConfig, rng: np.random.Generator) -> ScIpnn:
    """Add N(0, (sigma_ps * pi)^2) to each eligible phase and re-wrap.

    In ``power_gated`` mode every phase shifter is eligible; in ``removed``
    mode pruned ones (mask 0) are physically absent and keep their exact 0.
    The noise vector is drawn for all phases in both modes so that the two
    modes see the same sample for a given rng state.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (net.layout.n_phases,):
        raise ValueError(f"mask has shape {mask.shape}, expected ({net.layout.n_phases},)")
    noise = rng.normal(0.0, cfg.sigma_ps * np.pi, size=net.layout.n_phases)
    out = net.copy()
    if cfg.sigma_ps == 0:
        return out
    phases = out.params[net.layout.phase_section]
    eligible = np.ones_like(mask) if cfg.mode == "power_gated" else mask
    phases[eligible] = wrap_phase(phases[eligible] + noise[eligible])
    return out


def _correct_counts(args) -> list[int]:
    net, mask, data, cfg, iterations = args
    return [count_correct(perturb(net, mask, cfg, iteration_rng(cfg.seed, i)), data) for i in iterations]


def monte_carlo_accuracy(net: ScIpnn, mask, data, cfg: UncertaintyConfig, workers: int = 1) -> McResult:
    """Mean/std of accuracy over ``cfg.iterations`` independent perturbations.

    Iteration ``i`` always uses the rng seeded by ``(cfg.seed, i)``, so the
    result does not depend on ``workers``.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    idx = list(range(cfg.iterations))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        chunks = [idx[w::workers] for w in range(workers)]
        counts = np.empty(cfg.iterations, dtype=np.int64)
        with ProcessPoolExecutor(workers) as pool:
            jobs = [(net, mask, data, cfg, c) for c in chunks]
            for chunk, vals in zip(chunks, pool.map(_correct_counts, jobs)):
                counts[chunk] = vals
    else:
        counts = np.array(_correct_counts((net, mask, data, cfg, idx)), dtype=np.int64)
    # integer aggregation keeps the noiseless case exactly equal to evaluate()
    n = len(data)
    mean = int(counts.sum()) / (n * cfg.iterations)
    std = float(np.std(counts.astype(float))) / n
    return McResult(cfg.sigma_ps, cfg.mode, mean, std, cfg.iterations)


def sigma_sweep(net, mask, data, sigmas, modes=MODES, iterations=1000, seed=0, workers=1) -> list[McResult]:
    return [
        monte_carlo_accuracy(net, mask, data, UncertaintyConfig(s, iterations, mode, seed), workers)
        for s in sigmas
        for mode in modes
    ]
