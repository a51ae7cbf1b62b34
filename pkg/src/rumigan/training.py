"""Adam, the alternating generator/discriminator loop and binary checkpoints.

Checkpoint container (all integers little-endian)::

    b"RUMI" | u32 version | u64 step | u32 n_blocks
    then n_blocks times:
    u16 name_len | name (utf-8) | u8 kind | u32 ndim | u64 dims[ndim] | u64 nbytes | payload

``kind`` 1 is a float64 array (payload is the raw little-endian buffer),
kind 2 is UTF-8 JSON (ndim 0). Block names: ``g/<i>`` and ``d/<i>`` for
network parameters, ``adam_g/m/<i>``, ``adam_g/v/<i>``, ``adam_g/meta`` (and
the ``adam_d`` equivalents), ``rng`` for the bit-generator state.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import losses as L
from . import tensor as T
from .distributions import SplitSpec, sample
from .evaluation import DEFAULT_ANGLES, DEFAULT_CLUSTERS, EvalReport, evaluate
from .losses import LsganLabels, RumiWeights
from .nn import Mlp
from .tensor import Tape

MAGIC = b"RUMI"
FORMAT_VERSION = 1
KIND_F64, KIND_JSON = 1, 2

MAIN_LABELS = LsganLabels(a=0.0, b_plus=2.0, b_minus=-1.0, c=1.5)
BASELINE_LSGAN = (0.0, 1.0, 1.0)  # (a, b, c)
SYNTHETIC_LATENT = 8
DATASET_LATENT = 100


class TrainingDiverged(RuntimeError):
    """Non-finite loss or parameter; ``snapshot`` is the last good state."""

    def __init__(self, message: str, snapshot: "Checkpoint"):
        super().__init__(message)
        self.snapshot = snapshot


# -- Adam -------------------------------------------------------------------------

@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    t: int = 0

    @classmethod
    def for_params(cls, params, **kw) -> "AdamState":
        arrays = [np.asarray(getattr(p, "data", p)) for p in params]
        return cls(m=[np.zeros_like(a) for a in arrays], v=[np.zeros_like(a) for a in arrays], **kw)


def adam_step(state: AdamState, params, grads) -> list[np.ndarray]:
    """One bias-corrected Adam update; mutates ``state`` and returns new parameters."""
    params, grads = list(params), list(grads)
    if not (len(params) == len(grads) == len(state.m)):
        raise ValueError("parameter/gradient/state length mismatch")
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        p, g = np.asarray(p, dtype=np.float64), np.asarray(g, dtype=np.float64)
        if g.shape != state.m[i].shape:
            raise ValueError(f"gradient {i} has shape {g.shape}, expected {state.m[i].shape}")
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        out.append(p - state.lr * (state.m[i] / c1) / (np.sqrt(state.v[i] / c2) + state.eps))
    return out


# -- config -------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    family: str = "rumi-lsgan"
    weights: RumiWeights = RumiWeights()
    labels: LsganLabels = MAIN_LABELS
    latent_dim: int = SYNTHETIC_LATENT
    batch_size: int = 100
    steps: int = 5000
    d_steps: int = 2
    n_critic: int = 5
    gp_coef: float = L.DEFAULT_GP_COEF
    seed: int = 0
    checkpoint_every: int = 1000
    eval_samples: int = 2000
    num_clusters: int = DEFAULT_CLUSTERS
    num_angles: int = DEFAULT_ANGLES
    joint_d_update: bool = False
    reuse_baseline_batch: bool = False
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    g_hidden: tuple[int, ...] = (64, 64)
    d_hidden: tuple[int, ...] = (64, 64)
    g_output: str = "identity"

    def __post_init__(self):
        if self.family not in L.FAMILIES:
            raise ValueError(f"family: unknown {self.family!r}; known: {list(L.FAMILIES)}")
        self.weights.check(self.family)
        for name in ("latent_dim", "batch_size", "steps", "d_steps", "n_critic",
                     "checkpoint_every", "eval_samples"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name}: must be >= 1")
        if self.family.startswith("rumi-") and self.family != "rumi-wgan-gp" \
                and not self.joint_d_update and self.d_steps % 2:
            raise ValueError("d_steps: split positive/negative updates need an even count")
        if self.gp_coef < 0:
            raise ValueError("gp_coef: must be >= 0")

    @property
    def is_rumi(self) -> bool:
        return self.family.startswith("rumi-")

    @property
    def d_head(self) -> str:
        return "sigmoid" if self.family in ("rumi-sgan", "sgan") else "identity"


def latent_sample(n: int, dim: int, seed) -> np.ndarray:
    """Standard-normal latent batch of shape ``(n, dim)``."""
    if n < 1 or dim < 1:
        raise ValueError("latent batch size and dimension must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.standard_normal((n, dim))


# -- checkpoints ----------------------------------------------------------------------

@dataclass
class Checkpoint:
    step: int
    g_params: list[np.ndarray]
    d_params: list[np.ndarray]
    g_adam: AdamState
    d_adam: AdamState
    rng_state: dict

    def to_bytes(self) -> bytes:
        blocks: list[tuple[str, int, object]] = []
        blocks += [(f"g/{i}", KIND_F64, p) for i, p in enumerate(self.g_params)]
        blocks += [(f"d/{i}", KIND_F64, p) for i, p in enumerate(self.d_params)]
        for tag, st in (("adam_g", self.g_adam), ("adam_d", self.d_adam)):
            blocks += [(f"{tag}/m/{i}", KIND_F64, a) for i, a in enumerate(st.m)]
            blocks += [(f"{tag}/v/{i}", KIND_F64, a) for i, a in enumerate(st.v)]
            meta = {"lr": st.lr, "beta1": st.beta1, "beta2": st.beta2, "eps": st.eps, "t": st.t}
            blocks.append((f"{tag}/meta", KIND_JSON, meta))
        blocks.append(("rng", KIND_JSON, self.rng_state))
        out = [MAGIC, struct.pack("<IQI", FORMAT_VERSION, self.step, len(blocks))]
        for name, kind, value in blocks:
            raw = name.encode()
            if kind == KIND_F64:
                arr = np.ascontiguousarray(value, dtype="<f8")
                payload, dims = arr.tobytes(), arr.shape
            else:
                payload, dims = json.dumps(value, sort_keys=True).encode(), ()
            out.append(struct.pack("<H", len(raw)) + raw + struct.pack("<BI", kind, len(dims)))
            out.append(struct.pack(f"<{len(dims)}Q", *dims) + struct.pack("<Q", len(payload)) + payload)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Checkpoint":
        if data[:4] != MAGIC:
            raise ValueError("not a checkpoint (bad magic)")
        try:
            version, step, n = struct.unpack_from("<IQI", data, 4)
            if version != FORMAT_VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            pos = 4 + struct.calcsize("<IQI")
            blocks = {}
            for _ in range(n):
                (ln,) = struct.unpack_from("<H", data, pos)
                pos += 2
                name = data[pos:pos + ln].decode()
                pos += ln
                kind, ndim = struct.unpack_from("<BI", data, pos)
                pos += 5
                dims = struct.unpack_from(f"<{ndim}Q", data, pos)
                pos += 8 * ndim
                (nbytes,) = struct.unpack_from("<Q", data, pos)
                pos += 8
                payload = data[pos:pos + nbytes]
                if len(payload) != nbytes:
                    raise ValueError("truncated checkpoint block")
                pos += nbytes
                if kind == KIND_F64:
                    blocks[name] = np.frombuffer(payload, dtype="<f8").reshape(dims).astype(np.float64)
                elif kind == KIND_JSON:
                    blocks[name] = json.loads(payload.decode())
                else:
                    raise ValueError(f"unknown block kind {kind}")
        except struct.error as err:
            raise ValueError(f"truncated checkpoint: {err}") from None
        if pos != len(data):
            raise ValueError("trailing bytes after checkpoint blocks")

        def seq(prefix):
            out, i = [], 0
            while f"{prefix}/{i}" in blocks:
                out.append(blocks[f"{prefix}/{i}"])
                i += 1
            return out

        def adam(tag):
            meta = blocks[f"{tag}/meta"]
            return AdamState(meta["lr"], meta["beta1"], meta["beta2"], meta["eps"],
                             seq(f"{tag}/m"), seq(f"{tag}/v"), meta["t"])

        return cls(step, seq("g"), seq("d"), adam("adam_g"), adam("adam_d"), blocks["rng"])

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Checkpoint":
        return cls.from_bytes(Path(path).read_bytes())


# -- training loop ------------------------------------------------------------------------

@dataclass
class TrainResult:
    checkpoints: list[Checkpoint]
    reports: list[EvalReport]
    losses: list[tuple[int, float, float]]
    generator: Mlp

    def metric_rows(self) -> list[dict]:
        return [r.row() for r in self.reports]


def build_networks(config: TrainConfig, dim: int, rng: np.random.Generator) -> tuple[Mlp, Mlp]:
    g = Mlp([config.latent_dim, *config.g_hidden, dim], rng, hidden="tanh", output=config.g_output)
    d = Mlp([dim, *config.d_hidden, 1], rng, hidden="tanh", output=config.d_head)
    return g, d


def generate(generator: Mlp, n: int, latent_dim: int, seed) -> np.ndarray:
    return generator(latent_sample(n, latent_dim, seed)).data


class Trainer:
    """Holds networks, optimizer states and the single training RNG stream."""

    def __init__(self, config: TrainConfig, split: SplitSpec, resume: Checkpoint | None = None):
        self.cfg = config
        self.split = split
        self.rng = np.random.default_rng(config.seed)
        self.G, self.D = build_networks(config, split.dim, self.rng)
        kw = dict(lr=config.lr, beta1=config.beta1, beta2=config.beta2)
        self.g_adam = AdamState.for_params(self.G.params, **kw)
        self.d_adam = AdamState.for_params(self.D.params, **kw)
        self.step = 0
        self.div = L.divergence(config.family.split(":", 1)[1]) if config.family.startswith("rumi-fgan:") else None
        if resume is not None:
            self.restore(resume)

    # state ----------------------------------------------------------------
    def snapshot(self) -> Checkpoint:
        def copy_adam(s):
            return replace(s, m=[a.copy() for a in s.m], v=[a.copy() for a in s.v])
        return Checkpoint(self.step, [p.data.copy() for p in self.G.params],
                          [p.data.copy() for p in self.D.params], copy_adam(self.g_adam),
                          copy_adam(self.d_adam), json.loads(json.dumps(self.rng.bit_generator.state)))

    def restore(self, ck: Checkpoint) -> None:
        self.G.set_params([a.copy() for a in ck.g_params])
        self.D.set_params([a.copy() for a in ck.d_params])
        self.g_adam = replace(ck.g_adam, m=[a.copy() for a in ck.g_adam.m], v=[a.copy() for a in ck.g_adam.v])
        self.d_adam = replace(ck.d_adam, m=[a.copy() for a in ck.d_adam.m], v=[a.copy() for a in ck.d_adam.v])
        self.rng.bit_generator.state = ck.rng_state
        self.step = ck.step

    # pieces ---------------------------------------------------------------
    def _batch(self, spec) -> np.ndarray:
        return sample(spec, self.cfg.batch_size, self.rng)

    def _fake(self) -> np.ndarray:
        return generate(self.G, self.cfg.batch_size, self.cfg.latent_dim, self.rng)

    def _out(self, x):
        """Discriminator output in the form the family's loss expects."""
        if x is None:
            return None
        if self.div is not None:
            return self.div.activation(self.D.logits(x))
        return self.D(x)

    def _update(self, net: Mlp, state: AdamState, loss_fn: Callable[[], T.Tensor]) -> float:
        tape = Tape()
        with tape:
            params = [tape.watch(p) for p in net.params]
            loss = loss_fn()
        grads = tape.gradient(loss, params)
        new = adam_step(state, [p.data for p in params], [g.data for g in grads])
        if not all(np.all(np.isfinite(a)) for a in new):
            raise FloatingPointError("non-finite parameter after update")
        net.set_params(new)
        return loss.item()

    def _rumi_d_loss(self, x_pos, x_neg, x_gen):
        cfg = self.cfg
        if cfg.family == "rumi-wgan-gp":
            d_loss, _ = L.rumi_wgan_losses(self.D(x_pos), self.D(x_neg), self.D(x_gen), cfg.weights)
            if cfg.gp_coef > 0:
                gp = L.gradient_penalty(self.D, x_gen, x_pos, x_neg, self.rng)
                d_loss = T.add(d_loss, T.mul(cfg.gp_coef, gp))
            return d_loss
        pos, neg, gen = L.rumi_d_terms(cfg.family, self._out(x_pos), self._out(x_neg),
                                       self._out(x_gen), cfg.weights, cfg.labels)
        total = gen
        for term in (pos, neg):
            if term is not None:
                total = T.add(total, term)
        return total

    def _baseline_d_loss(self, x_real, x_gen):
        if self.cfg.family == "sgan":
            return L.baseline_sgan_losses(self.D(x_real), self.D(x_gen))[0]
        a, b, c = BASELINE_LSGAN
        return L.baseline_lsgan_losses(self.D(x_real), self.D(x_gen), a, b, c)[0]

    def _g_loss(self, x_pos, x_neg):
        cfg = self.cfg
        z = latent_sample(cfg.batch_size, cfg.latent_dim, self.rng)

        def fn():
            out_gen = self._out(self.G(z))
            if cfg.family == "sgan":
                return L.baseline_sgan_losses(self.D(x_pos), out_gen)[1]
            if cfg.family == "lsgan":
                a, b, c = BASELINE_LSGAN
                return L.baseline_lsgan_losses(self.D(x_pos), out_gen, a, b, c)[1]
            out_pos, out_neg = self._out(x_pos), self._out(x_neg)
            if cfg.family == "rumi-sgan":
                return L.rumi_sgan_g_loss(out_pos, out_gen, out_neg, cfg.weights)
            if cfg.family == "rumi-lsgan":
                return L.rumi_lsgan_g_loss(out_pos, out_neg, out_gen, cfg.weights, cfg.labels)
            if cfg.family == "rumi-wgan-gp":
                return L.rumi_wgan_losses(out_pos, out_neg, out_gen, cfg.weights)[1]
            return L.rumi_fgan_g_loss(out_pos, out_neg, out_gen, cfg.weights, self.div)
        return fn

    def train_step(self) -> tuple[float, float]:
        """One generator step with its discriminator updates."""
        cfg, split = self.cfg, self.split
        d_loss = 0.0
        if cfg.family == "rumi-wgan-gp":
            for _ in range(cfg.n_critic):
                x_pos, x_neg, x_gen = self._batch(split.positive), self._batch(split.negative), self._fake()
                d_loss = self._update(self.D, self.d_adam, lambda: self._rumi_d_loss(x_pos, x_neg, x_gen))
        elif cfg.is_rumi and cfg.joint_d_update:
            for _ in range(cfg.d_steps):
                x_pos, x_neg, x_gen = self._batch(split.positive), self._batch(split.negative), self._fake()
                d_loss = self._update(self.D, self.d_adam, lambda: self._rumi_d_loss(x_pos, x_neg, x_gen))
        elif cfg.is_rumi:
            # one update on (positive, generated), one on (negative, generated)
            for _ in range(cfg.d_steps // 2):
                x_pos, x_gen = self._batch(split.positive), self._fake()
                d_loss = self._update(self.D, self.d_adam, lambda: self._rumi_d_loss(x_pos, None, x_gen))
                x_neg, x_gen = self._batch(split.negative), self._fake()
                d_loss = self._update(self.D, self.d_adam, lambda: self._rumi_d_loss(None, x_neg, x_gen))
        else:
            x_pos = self._batch(split.positive)
            for i in range(cfg.d_steps):
                if i > 0 and not cfg.reuse_baseline_batch:
                    x_pos = self._batch(split.positive)
                x_gen = self._fake()
                d_loss = self._update(self.D, self.d_adam, lambda: self._baseline_d_loss(x_pos, x_gen))
        if cfg.is_rumi:
            x_pos, x_neg = self._batch(split.positive), self._batch(split.negative)
        else:
            x_pos, x_neg = self._batch(split.positive), None
        g_loss = self._update(self.G, self.g_adam, self._g_loss(x_pos, x_neg))
        self.step += 1
        return d_loss, g_loss


def reference_samples(config: TrainConfig, split: SplitSpec) -> np.ndarray:
    return sample(split.target, config.eval_samples, np.random.default_rng([config.seed, 0x4EF]))


def eval_samples(generator: Mlp, config: TrainConfig, step: int) -> np.ndarray:
    """Generated points for evaluation; independent of the training stream."""
    return generate(generator, config.eval_samples, config.latent_dim,
                    np.random.default_rng([config.seed, step, 0xE7A1]))


def train(config: TrainConfig, split: SplitSpec, resume: Checkpoint | None = None,
          on_checkpoint: Callable[[Checkpoint, EvalReport, np.ndarray], None] | None = None,
          evaluate_checkpoints: bool = True) -> TrainResult:
    """Run (or resume) training, evaluating and checkpointing every ``checkpoint_every`` steps.

    Raises :class:`TrainingDiverged` with the last good state if a loss or
    parameter becomes non-finite.
    """
    trainer = Trainer(config, split, resume)
    ref = reference_samples(config, split) if evaluate_checkpoints else None
    checkpoints, reports, losses = [], [], []
    good = trainer.snapshot()
    while trainer.step < config.steps:
        try:
            d_loss, g_loss = trainer.train_step()
        except (FloatingPointError, ZeroDivisionError, ValueError) as err:
            # loss-domain violations and overflow both mean the run has left the rails
            raise TrainingDiverged(f"step {trainer.step + 1}: {err}", good) from err
        if not (math.isfinite(d_loss) and math.isfinite(g_loss)):
            raise TrainingDiverged(f"step {trainer.step}: non-finite loss", good)
        if trainer.step % config.checkpoint_every == 0 or trainer.step == config.steps:
            ck = trainer.snapshot()
            losses.append((trainer.step, d_loss, g_loss))
            checkpoints.append(ck)
            if evaluate_checkpoints:
                gen = eval_samples(trainer.G, config, trainer.step)
                report = evaluate(gen, ref, split, trainer.step, config.num_clusters,
                                  config.num_angles, seed=config.seed)
                reports.append(report)
                if on_checkpoint is not None:
                    on_checkpoint(ck, report, gen)
            good = ck
    return TrainResult(checkpoints, reports, losses, trainer.G)
