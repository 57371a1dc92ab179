import math

import numpy as np
import pytest

import oracles
from phaseprune.network import TrainConfig, init_network
from phaseprune.pruning import (
    ItConfig,
    NoQualifyingCandidate,
    OsConfig,
    PruneReport,
    PrunedModel,
    ThresholdRule,
    apply_magnitude_prune,
    champ,
    iterative_prune,
    mean_phase,
    one_shot_prune,
    select_winner,
    sparsity,
    threshold_for_mesh,
)

FT = TrainConfig(learning_rate=0.05, epochs=2, batch_size=16, seed=1)


def test_threshold_example():
    phases = [0.0, 0.1, -0.2, 0.0, 0.3]
    expected = oracles.population_std([0.1, 0.2, 0.3])
    assert expected == pytest.approx(0.0816496580927726, abs=1e-12)
    assert threshold_for_mesh(phases, 1.0) == pytest.approx(expected, abs=1e-15)
    assert threshold_for_mesh(phases, 2.5) == pytest.approx(2.5 * expected, abs=1e-15)


def test_threshold_degenerate():
    assert threshold_for_mesh(np.zeros(5), 3.0) == 0.0
    assert threshold_for_mesh([0.5, 2.0, -3.0], 0.0) == 0.0
    with pytest.raises(ValueError):
        threshold_for_mesh([1.0], -1.0)


def test_threshold_rule_variants():
    phases = np.array([0.0, 0.1, -0.2, 0.3, -0.4])
    nz = phases[phases != 0]
    assert threshold_for_mesh(phases, 1.0, ThresholdRule(signed=True)) == pytest.approx(np.sqrt(np.mean((nz - nz.mean()) ** 2)))
    sample = np.sqrt(np.sum((np.abs(nz) - 0.25) ** 2) / 3)
    assert threshold_for_mesh(phases, 1.0, ThresholdRule(ddof=1)) == pytest.approx(sample, abs=1e-15)
    assert threshold_for_mesh([0.0, 0.7], 1.0, ThresholdRule(ddof=1)) == 0.0
    with pytest.raises(ValueError):
        ThresholdRule(ddof=2)


def test_signed_rule_same_on_one_sided_more_on_mixed_signs():
    phases = np.linspace(0.2, 1.0, 9)
    net = net_with_phases((3, 3), np.concatenate([phases, -phases]))
    _, by_mag = apply_magnitude_prune(net, 1.0)
    _, signed = apply_magnitude_prune(net, 1.0, rule=ThresholdRule(signed=True))
    assert np.array_equal(by_mag, signed)
    mixed = net_with_phases((3, 3), np.concatenate([phases * np.resize([1, -1], 9)] * 2))
    _, m_mag = apply_magnitude_prune(mixed, 1.0)
    _, m_signed = apply_magnitude_prune(mixed, 1.0, rule=ThresholdRule(signed=True))
    assert sparsity(m_signed) > sparsity(m_mag)


def net_with_phases(dims, phases):
    net = init_network(dims, dims[-1], seed=0)
    net.params[net.layout.phase_section] = phases
    return net


def test_alpha_zero_is_noop(rng):
    net = init_network((4, 5, 3), 3, seed=1)
    pruned, mask = apply_magnitude_prune(net, 0.0)
    assert pruned.params.tobytes() == net.params.tobytes()
    assert mask.all()


def test_huge_alpha_prunes_everything():
    net = init_network((4, 5, 3), 3, seed=1)
    pruned, mask = apply_magnitude_prune(net, 1e9)
    assert sparsity(mask) == 100.0
    assert np.all(pruned.phases == 0.0)
    assert np.array_equal(pruned.params[net.layout.sigma_section], net.params[net.layout.sigma_section])


def test_two_cluster_mesh(rng):
    dims = (3, 3)
    size = 9
    small = rng.uniform(0.005, 0.02, size) * rng.choice([-1, 1], size)
    large = rng.uniform(2.8, 3.1, size) * rng.choice([-1, 1], size)
    is_small = rng.random(size) < 0.5
    phases = np.concatenate([np.where(is_small, small, large)] * 2)
    pruned, mask = apply_magnitude_prune(net_with_phases(dims, phases), 1.0)
    # brute force: per mesh, compare every entry with alpha * population std of nonzero magnitudes
    for sl in (slice(0, 9), slice(9, 18)):
        mags = np.abs(phases[sl])
        thr = oracles.population_std(mags[mags != 0])
        for k, v in enumerate(mags):
            assert bool(mask[sl][k]) == (v >= thr)
    assert np.array_equal(mask, np.tile(~is_small, 2))
    assert np.all(pruned.phases[~mask] == 0)


def test_boundary_value_survives():
    # magnitudes {1, 3}: population std exactly 1, so alpha=1 puts 1.0 on the threshold
    phases = np.array([1.0, -3.0, 1.0, 3.0] + [0.5] * 8 + [0.0])
    pruned, mask = apply_magnitude_prune(net_with_phases((2, 3), phases), 1.0)
    assert np.all(mask[:12])
    assert not mask[12]


def test_thresholds_are_per_mesh():
    narrow = np.linspace(0.1, 0.2, 9)
    wide = np.linspace(0.1, 3.0, 9)
    net = net_with_phases((3, 3), np.concatenate([narrow, wide]))
    assert threshold_for_mesh(narrow, 1.0) != threshold_for_mesh(wide, 1.0)
    _, mask = apply_magnitude_prune(net, 1.0)
    assert sparsity(mask[:9]) != sparsity(mask[9:])


def test_masks_only_shrink_and_zero_clamp(rng):
    net = init_network((5, 6, 4), 4, seed=3)
    prior = rng.random(net.layout.n_phases) < 0.8
    net.params[net.layout.phase_section][~prior] = 0.0
    for alpha in (0.3, 0.9, 1.5):
        pruned, mask = apply_magnitude_prune(net, alpha, prior)
        assert not np.any(mask & ~prior)
        assert np.array_equal(pruned.phases == 0, ~mask)


def test_sparsity_examples():
    assert sparsity(np.ones(12, bool)) == 0.0
    assert sparsity(np.zeros(12, bool)) == 100.0
    m = np.ones(12, bool)
    m[[1, 5, 7]] = False
    assert sparsity(m) == 25.0
    with pytest.raises(ValueError):
        sparsity(np.zeros(0, bool))


def test_mean_phase_examples():
    assert mean_phase(net_with_phases((1, 1, 1), np.zeros(4))) == 0.0
    net = net_with_phases((1, 1, 1), [np.pi / 2, 0.0, np.pi, -np.pi / 2])
    assert mean_phase(net) == pytest.approx(np.pi / 2, abs=1e-15)


def test_mean_phase_non_increasing_over_alpha_sweep():
    net = init_network((6, 8, 5), 5, seed=4)
    values = [mean_phase(apply_magnitude_prune(net, a)[0]) for a in np.linspace(0, 3, 13)]
    assert all(b <= a for a, b in zip(values, values[1:]))
    assert values[-1] < values[0]


def test_one_shot_alpha_zero(toy_data, toy_trained):
    train_data, test_data = toy_data
    net, acc = toy_trained
    winner, cands = one_shot_prune(net, OsConfig((0.0,), acc, FT), train_data, test_data)
    assert winner.report.ps_sparsity_pct == 0.0
    assert winner.report.accuracy == acc
    assert winner.report.epochs_finetuned == 0
    with pytest.raises(NoQualifyingCandidate) as info:
        one_shot_prune(net, OsConfig((0.0,), acc + 1e-9, FT), train_data, test_data)
    assert len(info.value.reports) == 1


def test_one_shot_full_prune_is_chance_and_rejected(toy_data, toy_trained):
    train_data, test_data = toy_data
    net, _ = toy_trained
    with pytest.raises(NoQualifyingCandidate) as info:
        one_shot_prune(net, OsConfig((1e6,), 0.5, FT), train_data, test_data)
    (report,) = info.value.reports
    assert report.ps_sparsity_pct == 100.0
    # ten balanced classes: chance 0.1, binomial sd over the test split
    sd = math.sqrt(0.1 * 0.9 / len(test_data))
    assert report.accuracy < 0.1 + 4 * sd


def test_one_shot_parallel_matches_serial(toy_data, toy_trained):
    train_data, test_data = toy_data
    net, acc = toy_trained
    cfg = OsConfig((1.0, 2.0), acc - 0.2, FT)
    w1, c1 = one_shot_prune(net, cfg, train_data, test_data, workers=1)
    w2, c2 = one_shot_prune(net, cfg, train_data, test_data, workers=2)
    assert [c.report.alpha for c in c1] == [1.0, 2.0]
    for a, b in zip(c1, c2):
        assert a.net.params.tobytes() == b.net.params.tobytes()
        assert a.report.accuracy == b.report.accuracy
    assert w1.report.alpha == w2.report.alpha


def report(alpha, sp, acc):
    return PrunedModel(None, None, PruneReport("oneshot", alpha, sp, 0.0, acc))


def test_winner_tie_breaking():
    cands = [report(1.0, 50.0, 0.9), report(1.5, 60.0, 0.8), report(2.0, 60.0, 0.85), report(2.5, 60.0, 0.85)]
    assert select_winner(cands, 0.8).report.alpha == 2.0
    assert select_winner(cands, 0.86).report.alpha == 1.0
    assert select_winner(cands, 0.95) is None


def test_iterative_immediate_stop_returns_input(toy_data, toy_trained):
    train_data, test_data = toy_data
    net, acc = toy_trained
    winner, _ = one_shot_prune(net, OsConfig((1.5,), 0.0, FT), train_data, test_data)
    final, reports = iterative_prune(winner, ItConfig(5.0, 1.01, FT, max_iters=5), train_data, test_data)
    assert final is winner
    assert len(reports) == 1 and reports[0].accuracy < 1.01


def test_iterative_sparsity_non_decreasing_and_max_iters(toy_data, toy_trained):
    train_data, test_data = toy_data
    net, acc = toy_trained
    winner, _ = one_shot_prune(net, OsConfig((1.0,), 0.0, FT), train_data, test_data)
    final, reports = iterative_prune(winner, ItConfig(0.5, 0.0, FT, max_iters=4), train_data, test_data)
    assert len(reports) == 4
    assert [r.alpha for r in reports] == [1.5, 2.0, 2.5, 3.0]
    sp = [winner.report.ps_sparsity_pct] + [r.ps_sparsity_pct for r in reports]
    assert all(b >= a for a, b in zip(sp, sp[1:]))
    assert final.report is reports[-1]


def test_champ_degenerate_hybrid(toy_data, toy_trained):
    train_data, test_data = toy_data
    net, acc = toy_trained
    res = champ(net, OsConfig((0.0,), acc, FT), ItConfig(0.5, acc - 0.1, FT, max_iters=3), train_data, test_data)
    assert res.oneshot.report.ps_sparsity_pct == 0.0
    assert res.oneshot.net.params.tobytes() == net.params.tobytes()
    assert res.iterative_reports[0].alpha == 0.5


def test_champ_toy_properties(toy_champ):
    res = toy_champ
    assert res.final.report.ps_sparsity_pct >= res.oneshot.report.ps_sparsity_pct
    assert not np.any(res.final.mask & ~res.oneshot.mask)
    assert not np.any(res.oneshot.mask & ~res.baseline.mask)
    for model in (res.oneshot, res.final):
        assert np.array_equal(model.net.phases == 0, ~model.mask)
    assert res.trail[0].stage == "baseline"
    assert [r.alpha for r in res.oneshot_reports] == [1.0, 1.5, 2.0]


def test_config_validation():
    with pytest.raises(ValueError):
        OsConfig((), 0.5)
    with pytest.raises(ValueError):
        OsConfig((-1.0,), 0.5)
    with pytest.raises(ValueError):
        ItConfig(0.0, 0.5)
