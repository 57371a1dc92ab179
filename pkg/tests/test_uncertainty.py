import numpy as np
import pytest

from phaseprune.network import evaluate, init_network
from phaseprune.uncertainty import (
    UncertaintyConfig,
    iteration_rng,
    monte_carlo_accuracy,
    perturb,
    sigma_sweep,
)


def zero_phase_net(dims=(8, 16, 10)):
    net = init_network(dims, dims[-1], seed=0)
    net.params[net.layout.phase_section] = 0.0
    return net


def test_zero_sigma_leaves_net_unchanged():
    net = init_network((4, 5, 3), 3, seed=2)
    mask = np.ones(net.layout.n_phases, bool)
    out = perturb(net, mask, UncertaintyConfig(0.0), iteration_rng(0, 0))
    assert out.params.tobytes() == net.params.tobytes()


@pytest.mark.parametrize("mode", ["power_gated", "removed"])
def test_gains_and_biases_never_perturbed(mode):
    net = init_network((4, 5, 3), 3, seed=2)
    mask = np.ones(net.layout.n_phases, bool)
    out = perturb(net, mask, UncertaintyConfig(0.3, mode=mode), iteration_rng(0, 0))
    n = net.layout.n_phases
    assert out.params[n:].tobytes() == net.params[n:].tobytes()
    assert not np.array_equal(out.phases, net.phases)
    assert np.all((out.phases > -np.pi) & (out.phases <= np.pi))


def test_removed_mode_keeps_pruned_phases_at_zero(rng):
    net = init_network((4, 5, 3), 3, seed=2)
    mask = rng.random(net.layout.n_phases) < 0.5
    net.params[net.layout.phase_section][~mask] = 0.0
    removed = perturb(net, mask, UncertaintyConfig(0.2, mode="removed"), iteration_rng(5, 1))
    gated = perturb(net, mask, UncertaintyConfig(0.2, mode="power_gated"), iteration_rng(5, 1))
    assert np.all(removed.phases[~mask] == 0.0)
    assert np.all(gated.phases[~mask] != 0.0)
    # same draw in both modes on the live shifters
    assert np.array_equal(removed.phases[mask], gated.phases[mask])


def test_sampler_std_within_two_percent():
    sigma = 0.05
    net = zero_phase_net()
    mask = np.ones(net.layout.n_phases, bool)
    cfg = UncertaintyConfig(sigma)
    draws, i = [], 0
    while sum(len(d) for d in draws) < 100_000:
        draws.append(perturb(net, mask, cfg, iteration_rng(0, i)).phases.copy())
        i += 1
    sample = np.concatenate(draws)
    assert abs(sample.std() / (sigma * np.pi) - 1) < 0.02


def test_zero_sigma_mean_equals_deterministic_accuracy(toy_data, toy_trained):
    _, test_data = toy_data
    net, acc = toy_trained
    mask = np.ones(net.layout.n_phases, bool)
    res = monte_carlo_accuracy(net, mask, test_data, UncertaintyConfig(0.0, iterations=7))
    assert res.mean_accuracy == acc == evaluate(net, test_data)
    assert res.std_accuracy == 0.0


def test_reproducible_across_worker_counts(toy_data, toy_trained):
    _, test_data = toy_data
    net, _ = toy_trained
    mask = np.ones(net.layout.n_phases, bool)
    cfg = UncertaintyConfig(0.05, iterations=12, seed=4)
    a = monte_carlo_accuracy(net, mask, test_data, cfg, workers=1)
    b = monte_carlo_accuracy(net, mask, test_data, cfg, workers=3)
    assert a == b


def test_degradation_is_monotone_in_sigma(toy_data, toy_trained):
    _, test_data = toy_data
    net, acc = toy_trained
    mask = np.ones(net.layout.n_phases, bool)
    res = sigma_sweep(net, mask, test_data, [0.0, 0.05, 0.2], modes=("power_gated",), iterations=60, seed=1)
    means = [r.mean_accuracy for r in res]
    assert means[0] == acc
    assert means[0] >= means[1] >= means[2]


def test_removed_mode_is_at_least_as_robust(toy_champ, toy_data):
    _, test_data = toy_data
    final = toy_champ.final
    res = sigma_sweep(final.net, final.mask, test_data, [0.05], iterations=100, seed=2)
    gated, removed = res
    assert removed.mean_accuracy >= gated.mean_accuracy - gated.std_error


def test_unpruned_model_modes_identical(toy_data, toy_trained):
    _, test_data = toy_data
    net, _ = toy_trained
    mask = np.ones(net.layout.n_phases, bool)
    gated, removed = sigma_sweep(net, mask, test_data, [0.1], iterations=10, seed=0)
    assert gated.mean_accuracy == removed.mean_accuracy
    assert gated.std_accuracy == removed.std_accuracy


def test_config_validation():
    with pytest.raises(ValueError):
        UncertaintyConfig(-0.1)
    with pytest.raises(ValueError):
        UncertaintyConfig(0.1, iterations=0)
    with pytest.raises(ValueError):
        UncertaintyConfig(0.1, mode="dropped")
    assert isinstance(UncertaintyConfig(0).sigma_ps, float)
