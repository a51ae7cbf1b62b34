import dataclasses
import struct

import numpy as np
import pytest

from rumigan import training as TR
from rumigan.distributions import Dataset, SplitSpec, make_split, mixture_of
from rumigan.evaluation import region_mass
from rumigan.losses import RumiWeights
from rumigan.training import AdamState, Checkpoint, TrainConfig, TrainingDiverged

SPLIT = make_split("disjoint-1d")


def small(**kw):
    base = dict(steps=20, checkpoint_every=10, batch_size=16, g_hidden=(8,), d_hidden=(8,),
                eval_samples=200, num_clusters=5, num_angles=11)
    base.update(kw)
    return TrainConfig(**base)


def flat(ck: Checkpoint):
    return np.concatenate([a.ravel() for a in ck.g_params + ck.d_params])


# -- Adam ------------------------------------------------------------------------------

def test_adam_defaults():
    s = AdamState()
    assert (s.lr, s.beta1, s.beta2, s.eps) == (1e-4, 0.5, 0.999, 1e-8)


def test_adam_zero_gradient_leaves_params():
    p = [np.arange(3.0)]
    s = AdamState.for_params(p)
    out = TR.adam_step(s, p, [np.zeros(3)])
    assert np.array_equal(out[0], p[0]) and s.t == 1


def test_adam_first_step_is_lr_times_sign():
    g = np.array([0.3, -2.0, 1e-3])
    s = AdamState.for_params([np.zeros(3)])
    out = TR.adam_step(s, [np.zeros(3)], [g])
    np.testing.assert_allclose(out[0], -1e-4 * g / (np.abs(g) + 1e-8), rtol=1e-12)


def test_adam_matches_reference_over_100_steps():
    rng = np.random.default_rng(0)
    x = rng.normal(size=5)
    s = AdamState.for_params([x], lr=1e-2)
    ref, m, v = x.copy(), np.zeros(5), np.zeros(5)
    for t in range(1, 101):
        g = 2 * x - 1  # gradient of |x|^2 - sum(x)
        (x,) = TR.adam_step(s, [x], [g])
        gr = 2 * ref - 1
        m = 0.5 * m + 0.5 * gr
        v = 0.999 * v + 0.001 * gr * gr
        ref = ref - 1e-2 * (m / (1 - 0.5 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    assert np.max(np.abs(x - ref)) <= 1e-12


def test_adam_shape_errors():
    s = AdamState.for_params([np.zeros(2)])
    with pytest.raises(ValueError):
        TR.adam_step(s, [np.zeros(2)], [np.zeros(3)])
    with pytest.raises(ValueError):
        TR.adam_step(s, [np.zeros(2), np.zeros(2)], [np.zeros(2)])


# -- config and latents ------------------------------------------------------------------

def test_latent_sample():
    z = TR.latent_sample(20_000, 8, 3)
    assert z.shape == (20_000, 8)
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01
    assert np.array_equal(z, TR.latent_sample(20_000, 8, 3))
    with pytest.raises(ValueError):
        TR.latent_sample(0, 8, 0)


@pytest.mark.parametrize("kw,field", [
    (dict(family="gan"), "family"), (dict(steps=0), "steps"), (dict(d_steps=3), "d_steps"),
    (dict(gp_coef=-1.0), "gp_coef"),
])
def test_config_validation(kw, field):
    with pytest.raises(ValueError, match=field):
        TrainConfig(**kw)


def test_config_family_weight_checks_and_heads():
    with pytest.raises(ValueError, match="gamma"):
        TrainConfig(family="rumi-fgan:kl", weights=RumiWeights(gamma_plus=2.0, gamma_minus=0.5))
    TrainConfig(family="lsgan", d_steps=3)
    TrainConfig(family="rumi-lsgan", d_steps=3, joint_d_update=True)
    assert TrainConfig(family="rumi-sgan").d_head == "sigmoid"
    assert TrainConfig(family="rumi-lsgan").d_head == "identity"


# -- checkpoints ------------------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    ck = TR.train(small(steps=10), SPLIT, evaluate_checkpoints=False).checkpoints[-1]
    data = ck.to_bytes()
    assert data[:4] == b"RUMI"
    version, step, n_blocks = struct.unpack("<IQI", data[4:20])
    assert (version, step) == (TR.FORMAT_VERSION, 10)
    assert n_blocks == 2 * 4 + 2 * (2 * 4 + 1) + 1
    back = Checkpoint.from_bytes(data)
    assert back.to_bytes() == data
    assert back.step == 10 and back.rng_state == ck.rng_state
    assert all(np.array_equal(a, b) for a, b in zip(back.g_params, ck.g_params))
    assert back.g_adam.t == ck.g_adam.t and back.d_adam.lr == ck.d_adam.lr
    path = tmp_path / "c.rumi"
    ck.save(path)
    assert Checkpoint.load(path).to_bytes() == data


def test_checkpoint_rejects_corruption():
    data = TR.train(small(steps=10), SPLIT, evaluate_checkpoints=False).checkpoints[-1].to_bytes()
    for bad in (b"XXXX" + data[4:], data[:-3], data + b"\x00"):
        with pytest.raises(ValueError):
            Checkpoint.from_bytes(bad)


# -- determinism and resume -----------------------------------------------------------------

def test_seed_replay_is_bit_exact():
    a = TR.train(small(), SPLIT)
    b = TR.train(small(), SPLIT)
    assert [ck.to_bytes() for ck in a.checkpoints] == [ck.to_bytes() for ck in b.checkpoints]
    assert a.metric_rows() == b.metric_rows()
    c = TR.train(small(seed=1), SPLIT)
    assert not np.array_equal(flat(a.checkpoints[-1]), flat(c.checkpoints[-1]))


@pytest.mark.parametrize("family", ["rumi-lsgan", "rumi-wgan-gp", "lsgan"])
def test_resume_matches_uninterrupted(family):
    cfg = small(family=family, weights=RumiWeights(gamma_plus=5.0, gamma_minus=1.0))
    full = TR.train(cfg, SPLIT, evaluate_checkpoints=False)
    mid = Checkpoint.from_bytes(full.checkpoints[0].to_bytes())
    resumed = TR.train(cfg, SPLIT, resume=mid, evaluate_checkpoints=False)
    assert resumed.checkpoints[-1].to_bytes() == full.checkpoints[-1].to_bytes()


def test_checkpoint_schedule_and_callback():
    seen = []
    res = TR.train(small(steps=25), SPLIT, on_checkpoint=lambda ck, rep, gen: seen.append((ck.step, rep.step, gen.shape)))
    assert [ck.step for ck in res.checkpoints] == [10, 20, 25]
    assert seen == [(10, 10, (200, 1)), (20, 20, (200, 1)), (25, 25, (200, 1))]
    assert [r["step"] for r in res.metric_rows()] == [10, 20, 25]


# -- update schedule ----------------------------------------------------------------------

@pytest.mark.parametrize("family", ["sgan", "lsgan"])
def test_baseline_never_samples_negatives(family):
    split = SplitSpec(SPLIT.positive, Dataset(None, 1, "negatives"), "disjoint")
    res = TR.train(small(family=family, steps=5, checkpoint_every=5), split, evaluate_checkpoints=False)
    assert res.checkpoints[-1].step == 5
    with pytest.raises(RuntimeError, match="not loaded"):
        TR.train(small(family="rumi-lsgan", steps=1), split, evaluate_checkpoints=False)


@pytest.mark.parametrize("family", ["rumi-sgan", "rumi-lsgan", "rumi-fgan:kl", "rumi-fgan:reverse-kl",
                                    "rumi-fgan:pearson", "rumi-fgan:hellinger", "rumi-fgan:sgan",
                                    "rumi-wgan-gp", "sgan", "lsgan"])
def test_every_family_trains(family):
    w = RumiWeights(alpha_plus=0.8, alpha_minus=0.2, gamma_plus=1.0, gamma_minus=0.0)
    if family == "rumi-wgan-gp":
        w = RumiWeights(gamma_plus=5.0, gamma_minus=1.0)
    res = TR.train(small(family=family, weights=w, steps=10), SPLIT, evaluate_checkpoints=False)
    assert all(np.isfinite([d, g]).all() for _, d, g in res.losses)


def test_joint_and_reused_batch_variants_differ():
    a = TR.train(small(steps=10), SPLIT, evaluate_checkpoints=False)
    b = TR.train(small(steps=10, joint_d_update=True), SPLIT, evaluate_checkpoints=False)
    assert not np.array_equal(flat(a.checkpoints[-1]), flat(b.checkpoints[-1]))
    c = TR.train(small(family="lsgan", steps=10), SPLIT, evaluate_checkpoints=False)
    d = TR.train(small(family="lsgan", steps=10, reuse_baseline_batch=True), SPLIT, evaluate_checkpoints=False)
    assert not np.array_equal(flat(c.checkpoints[-1]), flat(d.checkpoints[-1]))


def test_divergence_aborts_with_last_good_state():
    cfg = small(family="rumi-fgan:kl", steps=10)
    ok = Checkpoint.from_bytes(TR.train(cfg, SPLIT, evaluate_checkpoints=False).checkpoints[-1].to_bytes())
    ok.g_adam.lr = ok.d_adam.lr = 1e3  # optimizer state travels with the checkpoint
    with pytest.raises(TrainingDiverged) as err:
        TR.train(dataclasses.replace(cfg, steps=20), SPLIT, resume=ok, evaluate_checkpoints=False)
    assert err.value.snapshot.step == 10
    assert err.value.snapshot.to_bytes() == ok.to_bytes()


def test_baseline_on_pooled_data_covers_negatives():
    # sanity contrast: a single-class LSGAN fed the pooled data puts real mass on negatives
    pooled = SplitSpec(mixture_of(SPLIT.positive, SPLIT.negative), SPLIT.negative, "overlapping")
    cfg = TrainConfig(family="lsgan", steps=1000, checkpoint_every=1000)
    res = TR.train(cfg, pooled, evaluate_checkpoints=False)
    _, neg, _ = region_mass(TR.eval_samples(res.generator, cfg, 1000), SPLIT)
    assert neg > 0.2
