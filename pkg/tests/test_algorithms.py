import numpy as np
import pytest
from numpy.testing import assert_allclose
from udakit import divergences
from udakit.algorithms import ALGORITHMS, BNMConfig, CoralConfig, DANConfig, DANNConfig, DEFAULT_OPTIMIZERS, DSANConfig, OptimizerConfig, SSRTConfig, SourceOnlyConfig, TrainerState, diversity, init_safe_training, lr_at, parse_algorithm, r_schedule, safe_training_tick, sgd_step, train_step
from udakit.bench.gradsuite import run_gradsuite
from udakit.data import ShiftSpec, make_shift_pair, sample_balanced_batch
from udakit.divergences import KernelSpec
from udakit.errors import ConfigError, NumericError, TrainingError
from udakit.algorithms import methods
from udakit.algorithms.methods import build_objective
from udakit.models import LayerSpec, init_bundle
from udakit.models.bundle import classify, discriminate, ef_forward
from udakit.models.grl import GrlCoefficient
from udakit.ndgraph import Tape, Tensor, ops


EF = LayerSpec((2, 8, 4))
H = LayerSpec((4, 2))
D = LayerSpec((4, 4, 1))
PLAIN = OptimizerConfig(lr0 = 0.05, momentum = 0.9, weight_decay = 1e-3)


def fresh_state(seed = 0, optimizer = PLAIN, total_steps = 100):
    return TrainerState(init_bundle(EF, H, D, seed), optimizer, total_steps = total_steps, rng = np.random.default_rng(seed))


@pytest.fixture(scope = "module")
def domains():
    return make_shift_pair(ShiftSpec(n_per_domain = 60, rotation_deg = 30.0, seed = 2))


def same_params(a, b):
    return all(np.array_equal(a.params[k].data, b.params[k].data) for k in a.names())


def test_lr_decay():
    assert lr_at(0.01, 0.0, 10.0, 0.75) == 0.01
    assert lr_at(0.01, 1.0, 10.0, 0.75) == pytest.approx(0.01 * 11.0 ** -0.75)
    assert lr_at(0.01, 0.5, 0.0, 0.75) == 0.01


def test_sgd_step_by_hand():
    state = fresh_state()
    before = {k: t.numpy() for k, t in state.bundle.params.items()}
    grads = {k: np.full(v.shape, 0.5) for k, v in before.items()}
    sgd_step(state, grads, 0.1)
    for k, theta in before.items():
        v1 = 0.5 + 1e-3 * theta
        assert_allclose(state.bundle.params[k].data, theta - 0.1 * v1, rtol = 1e-14)
    after_one = {k: t.numpy() for k, t in state.bundle.params.items()}
    sgd_step(state, {}, 0.1)
    for k, theta in after_one.items():
        v1 = 0.5 + 1e-3 * before[k]
        v2 = 0.9 * v1 + 1e-3 * theta
        assert_allclose(state.bundle.params[k].data, theta - 0.1 * v2, rtol = 1e-14)


def test_sgd_step_rejects_non_finite_gradients():
    state = fresh_state()
    before = state.bundle.snapshot()
    grads = {k: np.zeros(t.shape) for k, t in state.bundle.params.items()}
    grads["h.0.bias"] = np.full(grads["h.0.bias"].shape, np.nan)
    with pytest.raises(TrainingError) as info:
        sgd_step(state, grads, 0.1)
    assert info.value.parameter == "h.0.bias"
    assert same_params(state.bundle, before)
    with pytest.raises(TrainingError):
        sgd_step(state, {"x.0.weight": np.zeros((1, 1))}, 0.1)


def test_parse_algorithm():
    assert parse_algorithm("BNM") == BNMConfig()
    dsan = parse_algorithm({"method": "DSAN", "lam": 0.5, "kernel": {"bandwidths": [1.0]}})
    assert dsan == DSANConfig(lam = 0.5, kernel = KernelSpec.fixed(1.0))
    dann = parse_algorithm({"method": "DANN", "grl": {"value": 1.0, "schedule": "ramp"}})
    assert dann.grl == GrlCoefficient(1.0, "ramp")
    assert parse_algorithm(SSRTConfig(T = 7).to_dict()) == SSRTConfig(T = 7)
    with pytest.raises(ConfigError):
        parse_algorithm({"method": "MCD"})
    with pytest.raises(ConfigError):
        parse_algorithm({"method": "Coral", "lambda": 1.0})
    with pytest.raises(ConfigError):
        CoralConfig(lam = -1.0)
    with pytest.raises(ConfigError):
        SSRTConfig(eps = 1.0)


def test_every_method_has_a_default_optimizer():
    assert set(DEFAULT_OPTIMIZERS) == set(ALGORITHMS)
    assert SSRTConfig().default_optimizer().lr0 == 1e-3
    assert SSRTConfig().ramp_length == 100 and SSRTConfig(ramp_steps = 40).ramp_length == 40


def test_r_schedule():
    s = init_safe_training(fresh_state(), interval = 100)
    assert r_schedule(s, 0) == 0.0
    assert r_schedule(s, 50) == pytest.approx(np.sin(np.pi / 4.0))
    assert r_schedule(s, 100) == 1.0
    assert r_schedule(s, 150) == 1.0
    s.t_r = 200
    assert r_schedule(s, 200) == 0.0
    assert r_schedule(s, 250) == pytest.approx(np.sin(np.pi / 4.0))


def test_r_schedule_ramp_is_monotone():
    s = init_safe_training(fresh_state(), interval = 10, ramp_steps = 300)
    assert r_schedule(s, 100) == pytest.approx(0.5, abs = 1e-12)
    grid = [r_schedule(s, t) for t in range(1000)]
    assert all(b >= a for a, b in zip(grid, grid[1:]))
    assert all(v == 1.0 for v in grid[300:])


def test_diversity_counts_distinct_predictions():
    assert diversity(np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 1.0]])) == 2
    assert diversity(Tensor([[0.5, 0.5], [0.5, 0.5]])) == 1


def test_safe_training_restores_after_collapse():
    trainer = fresh_state()
    s = init_safe_training(trainer, interval = 2)
    for _ in range(2):
        trainer.step += 1
        s, trainer, restored = safe_training_tick(s, trainer, 2)
        assert not restored
    good = trainer.snapshot()
    trainer.bundle.params = {k: Tensor(t.data + 1.0) for k, t in trainer.bundle.params.items()}
    trainer.buffers = {k: v + 3.0 for k, v in trainer.buffers.items()}
    trainer.step += 1
    s, trainer, restored = safe_training_tick(s, trainer, 0)
    assert not restored
    trainer.step += 1
    s, trainer, restored = safe_training_tick(s, trainer, 0)
    assert restored and s.restores == 1
    assert same_params(trainer.bundle, good.bundle)
    assert all(np.array_equal(trainer.buffers[k], good.buffers[k]) for k in good.buffers)
    assert s.t_r == trainer.step == 4
    assert r_schedule(s, 4) == 0.0


def test_safe_training_keeps_steady_runs():
    trainer = fresh_state()
    s = init_safe_training(trainer, interval = 3)
    for _ in range(30):
        trainer.step += 1
        s, trainer, restored = safe_training_tick(s, trainer, 2)
        assert not restored
    assert s.restores == 0 and len(s.history) == 10


def test_safe_training_validation():
    with pytest.raises(ConfigError):
        init_safe_training(fresh_state(), interval = 0)
    with pytest.raises(ConfigError):
        init_safe_training(fresh_state(), interval = 5, collapse_ratio = 1.0)


@pytest.mark.parametrize("cfg", [
    CoralConfig(lam = 0.0),
    DANConfig(lam = 0.0),
    DANNConfig(lam = 0.0),
    DSANConfig(lam = 0.0),
    BNMConfig(lam = 0.0),
    SSRTConfig(alpha = 0.0, beta = 0.0),
], ids = lambda c: c.method)
def test_zero_weights_reduce_to_source_only(cfg, domains):
    source, target = domains
    base = fresh_state(seed = 4)
    other = fresh_state(seed = 4)
    rng_a, rng_b = np.random.default_rng(9), np.random.default_rng(9)
    for _ in range(100):
        base, _ = train_step(SourceOnlyConfig(), base, sample_balanced_batch(source, target, 8, rng_a))
        other, record = train_step(cfg, other, sample_balanced_batch(source, target, 8, rng_b))
    for k in base.bundle.names():
        assert np.array_equal(other.bundle.params[k].data, base.bundle.params[k].data), k


@pytest.mark.parametrize("method", sorted(ALGORITHMS))
def test_train_step_records_losses(method, domains):
    source, target = domains
    state = fresh_state(seed = 1)
    cfg = parse_algorithm(method)
    safe = init_safe_training(state, 10) if method == "SSRT" else None
    state, record = train_step(cfg, state, sample_balanced_batch(source, target, 8, np.random.default_rng(0)), safe)
    assert state.step == 1 and record.step == 0
    assert np.isfinite(record.total) and record.ce > 0.0
    assert 1 <= record.diversity <= 2
    if method == "SourceOnly":
        assert record.adapt == 0.0 and record.total == record.ce
    if method == "SSRT":
        assert record.r == 0.0 and record.total == pytest.approx(record.ce)


def test_ssrt_rejects_missing_hidden_layer(domains):
    source, target = domains
    state = fresh_state()
    with pytest.raises(ConfigError):
        train_step(SSRTConfig(perturb_layer = 1), state, sample_balanced_batch(source, target, 4, np.random.default_rng(0)))


def test_train_step_raises_on_non_finite_loss(domains):
    source, target = domains
    state = fresh_state()
    params = dict(state.bundle.params)
    params["ef.0.weight"] = Tensor(np.full(params["ef.0.weight"].shape, 1e308))
    state.bundle.params = params
    batch = sample_balanced_batch(source, target, 4, np.random.default_rng(0))
    with pytest.raises(NumericError):
        train_step(SourceOnlyConfig(), state, batch)
    assert state.step == 0
    assert state.bundle.params["ef.0.weight"] is params["ef.0.weight"]


def test_objective_gradients_match_finite_differences():
    results = run_gradsuite(instances = 2, seed = 3, names = ["objective:%s" % (m,) for m in sorted(ALGORITHMS)])
    assert len(results) == len(ALGORITHMS)
    for case in results:
        assert case.passed, str(case.worst)


def test_failed_step_leaves_the_generator_untouched(domains, monkeypatch):
    source, target = domains
    state = fresh_state(seed = 2)
    batch = sample_balanced_batch(source, target, 8, np.random.default_rng(0))
    before = state.rng.bit_generator.state


    def refuse(*args, **kwargs):
        raise TrainingError("Gradient of 'ef.0.weight' is not finite.", "ef.0.weight")


    monkeypatch.setattr(methods, "sgd_step", refuse)
    with pytest.raises(TrainingError):
        train_step(SSRTConfig(), state, batch)
    assert state.rng.bit_generator.state == before
    assert state.step == 0


def test_ssrt_without_perturbation_follows_dann(domains):
    source, target = domains
    dann = fresh_state(seed = 5)
    ssrt = fresh_state(seed = 5)
    rng_a, rng_b = np.random.default_rng(3), np.random.default_rng(3)
    for _ in range(20):
        dann, _ = train_step(DANNConfig(), dann, sample_balanced_batch(source, target, 8, rng_a))
        ssrt, _ = train_step(SSRTConfig(lambda_max = 0.0), ssrt, sample_balanced_batch(source, target, 8, rng_b))
    for k in dann.bundle.names():
        assert_allclose(ssrt.bundle.params[k].data, dann.bundle.params[k].data, rtol = 0.0, atol = 1e-10, err_msg = k)


def parameter_grads(build):
    tape = Tape()
    return tape.backward(build(tape)).parameters()


def test_dann_reverses_only_the_feature_gradient(domains):
    source, target = domains
    state = fresh_state(seed = 6)
    batch = sample_balanced_batch(source, target, 8, np.random.default_rng(1))
    m = state.bundle
    c = 0.7


    def plain(tape, with_domain_loss = True):
        fs = ef_forward(m, tape.constant(batch.xs)).features
        ft = ef_forward(m, tape.constant(batch.xt)).features
        ce = divergences.cross_entropy(classify(m, fs), batch.ys)
        if not with_domain_loss:
            return ce
        return ce + divergences.domain_adv_loss(discriminate(m, ops.concat_rows(fs, ft)), batch.z)


    reversed_grads = parameter_grads(lambda tape: build_objective(DANNConfig(grl = GrlCoefficient(c)), tape, state, batch).total)
    plain_grads = parameter_grads(plain)
    ce_grads = parameter_grads(lambda tape: plain(tape, False))
    zero = lambda k: np.zeros(m.params[k].shape)
    for k in m.names("d"):
        assert np.abs(plain_grads[k]).max() > 0.0
        assert_allclose(reversed_grads[k], plain_grads[k], rtol = 1e-10, atol = 1e-12)
    for k in m.names("h"):
        assert_allclose(reversed_grads[k], ce_grads[k], rtol = 1e-10, atol = 1e-12)
    for k in m.names("ef"):
        adv = plain_grads[k] - ce_grads.get(k, zero(k))
        assert_allclose(reversed_grads[k] - ce_grads.get(k, zero(k)), -c * adv, rtol = 1e-8, atol = 1e-12)


def test_safe_training_recovers_a_collapsed_run(domains):
    source, target = domains
    trainer = fresh_state(seed = 7, total_steps = 300)
    rng = np.random.default_rng(11)
    for _ in range(100):
        trainer, _ = train_step(SourceOnlyConfig(), trainer, sample_balanced_batch(source, target, 16, rng))
    cfg = SSRTConfig(T = 5)
    s = init_safe_training(trainer, cfg.T, collapse_ratio = 0.75)
    for _ in range(4 * cfg.T):
        trainer, record = train_step(cfg, trainer, sample_balanced_batch(source, target, 16, rng), s)
        s, trainer, _ = safe_training_tick(s, trainer, record.diversity)
    assert max(s.history) >= 1.5
    good = trainer.snapshot()
    params = dict(trainer.bundle.params)
    params["h.0.bias"] = Tensor([[60.0, -60.0]])
    trainer.bundle.params = params
    restored = []
    for _ in range(cfg.T):
        trainer, record = train_step(cfg, trainer, sample_balanced_batch(source, target, 16, rng), s)
        assert record.diversity == 1
        s, trainer, flag = safe_training_tick(s, trainer, record.diversity)
        restored.append(flag)
    assert restored == [False] * (cfg.T - 1) + [True]
    assert s.t_r == trainer.step
    assert same_params(trainer.bundle, good.bundle)
    assert all(np.array_equal(trainer.buffers[k], good.buffers[k]) for k in good.buffers)
    assert r_schedule(s, trainer.step) == 0.0
