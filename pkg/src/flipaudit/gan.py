"""Adversarial approximation of the transport map.

A small feed-forward generator is trained against a weight-clipped critic.
The generator loss adds a transport-cost penalty, steering the learned map
toward the minimum-cost coupling while the critic pushes the generated
sample onto the target distribution:

    L_G = mean D(G(x)) + cost_weight * mean c(x, G(x))
    L_D = mean D(x') - mean D(G(x))

Both losses are minimized. Everything here is plain numpy with hand-written
backpropagation so training is deterministic and the analytic gradients can
be checked against finite differences.
"""

import json
import logging
from dataclasses import asdict, dataclass

import numpy as np

from .data import CostFunction, FeatureMatrix, Normalizer, cost_grad_rows, mean_cost_rows
from .errors import BadParamsError, DimensionMismatchError, NonFiniteLossError
from .rng import substream

log = logging.getLogger(__name__)

DEFAULT_HIDDEN = (128, 128)
INIT_SCALE = 0.05
RMSPROP_DECAY = 0.9
RMSPROP_EPSILON = 1e-8


class Mlp:
    """Dense net with ReLU hidden layers and a linear output layer.

    Parameters are a flat list alternating (W, b) per layer; W has shape
    (fan_in, fan_out) and rows are the input coordinates, so serialized
    weights are row-major over inputs.
    """

    def __init__(self, layer_dims, weights, biases):
        self.layer_dims = tuple(int(d) for d in layer_dims)
        if len(weights) != len(biases) or len(weights) != len(self.layer_dims) - 1:
            raise BadParamsError("one (W, b) pair per consecutive dim pair required")
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expect = (self.layer_dims[i], self.layer_dims[i + 1])
            if w.shape != expect or b.shape != (expect[1],):
                raise BadParamsError(f"layer {i}: W{w.shape}/b{b.shape}, expected {expect}")

    @classmethod
    def init_random(cls, layer_dims, rng: np.random.Generator, scale: float = INIT_SCALE) -> "Mlp":
        """Uniform weights in [-scale, scale], zero biases."""
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            weights.append(rng.uniform(-scale, scale, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(layer_dims, weights, biases)

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    def params(self) -> list:
        """Parameter arrays in update order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = np.asarray(x, dtype=float)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i != last:
                np.maximum(h, 0.0, out=h)
        return h

    def forward_cached(self, x: np.ndarray):
        """Forward pass keeping per-layer inputs for backpropagation."""
        h = np.asarray(x, dtype=float)
        inputs = []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            h = h @ w + b
            if i != last:
                np.maximum(h, 0.0, out=h)
        return h, inputs

    def backward(self, inputs: list, grad_out: np.ndarray):
        """Backpropagate ``grad_out`` (dL/doutput, shape (n, out)).

        Returns (param_grads, grad_input) where param_grads matches
        :meth:`params` order. ReLU uses subgradient 0 at 0.
        """
        grads = [None] * (2 * len(self.weights))
        g = grad_out
        for i in range(len(self.weights) - 1, -1, -1):
            h_in = inputs[i]
            if i != len(self.weights) - 1:
                # post-activation of layer i is the input of layer i+1
                g = g * (inputs[i + 1] > 0.0)
            grads[2 * i] = h_in.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return grads, g

    def copy(self) -> "Mlp":
        return Mlp(self.layer_dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases])


class Generator:
    """Transport-map network: output dimension equals input dimension."""

    def __init__(self, net: Mlp):
        if net.out_dim != net.in_dim:
            raise BadParamsError("generator must map d -> d")
        self.net = net

    @classmethod
    def build(cls, d: int, rng: np.random.Generator, hidden=DEFAULT_HIDDEN) -> "Generator":
        return cls(Mlp.init_random((d, *hidden, d), rng))

    def transform(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != self.net.in_dim:
            raise DimensionMismatchError(
                f"points have {values.shape[-1]} features, generator expects {self.net.in_dim}"
            )
        return self.net.forward(values)


class Critic:
    """Scalar-output scoring network for the adversarial game."""

    def __init__(self, net: Mlp):
        if net.out_dim != 1:
            raise BadParamsError("critic must have scalar output")
        self.net = net

    @classmethod
    def build(cls, d: int, rng: np.random.Generator, hidden=DEFAULT_HIDDEN) -> "Critic":
        return cls(Mlp.init_random((d, *hidden, 1), rng))

    def score(self, values: np.ndarray) -> np.ndarray:
        return self.net.forward(np.asarray(values, dtype=float))[:, 0]


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the adversarial training run."""

    cost_weight: float = 1e-4
    batch_size: int = 64
    generator_steps: int = 20_000
    critic_steps_per_gen: int = 5
    learning_rate: float = 5e-5
    clip: float = 0.01
    seed: int = 0
    hidden: tuple = DEFAULT_HIDDEN

    def __post_init__(self):
        if self.cost_weight < 0:
            raise BadParamsError("cost_weight must be >= 0")
        if min(self.batch_size, self.generator_steps, self.critic_steps_per_gen) < 1:
            raise BadParamsError("counts must be >= 1")
        if self.clip <= 0 or self.learning_rate <= 0:
            raise BadParamsError("clip and learning_rate must be > 0")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


class RmsPropState:
    """Running mean of squared gradients, one accumulator per parameter."""

    def __init__(self, params, decay: float = RMSPROP_DECAY, epsilon: float = RMSPROP_EPSILON):
        self.sq_avg = [np.zeros_like(p) for p in params]
        self.decay = decay
        self.epsilon = epsilon

    def update(self, params, grads, lr: float) -> None:
        for p, g, v in zip(params, grads, self.sq_avg):
            v *= self.decay
            v += (1.0 - self.decay) * g * g
            p -= lr * g / (np.sqrt(v) + self.epsilon)


def generator_loss(
    gen: Generator, critic: Critic, batch: np.ndarray, cost_weight: float, c: CostFunction
) -> float:
    """mean D(G(x)) + cost_weight * mean c(x, G(x)) over the batch."""
    batch = np.asarray(batch, dtype=float)
    mapped = gen.transform(batch)
    return float(critic.score(mapped).mean() + cost_weight * mean_cost_rows(c, batch, mapped))


def critic_loss(critic: Critic, gen: Generator, batch_a: np.ndarray, batch_b: np.ndarray) -> float:
    """mean D(x') over the target batch minus mean D(G(x)) over the source batch."""
    return float(critic.score(batch_b).mean() - critic.score(gen.transform(batch_a)).mean())


def generator_loss_grads(
    gen: Generator, critic: Critic, batch: np.ndarray, cost_weight: float, c: CostFunction
):
    """Loss value and analytic gradients w.r.t. the generator parameters."""
    batch = np.asarray(batch, dtype=float)
    n = batch.shape[0]
    mapped, cache_g = gen.net.forward_cached(batch)
    scores, cache_d = critic.net.forward_cached(mapped)
    loss = scores.mean() + cost_weight * mean_cost_rows(c, batch, mapped)
    _, d_mapped = critic.net.backward(cache_d, np.full((n, 1), 1.0 / n))
    d_mapped = d_mapped + (cost_weight / n) * cost_grad_rows(c, batch, mapped)
    grads, _ = gen.net.backward(cache_g, d_mapped)
    return float(loss), grads


def critic_loss_grads(critic: Critic, gen: Generator, batch_a: np.ndarray, batch_b: np.ndarray):
    """Loss value and analytic gradients w.r.t. the critic parameters."""
    fake = gen.transform(batch_a)
    batch_b = np.asarray(batch_b, dtype=float)
    n_real, n_fake = len(batch_b), len(fake)
    # one pass over the stacked batch instead of two separate ones
    scores, cache = critic.net.forward_cached(np.vstack([batch_b, fake]))
    loss = scores[:n_real].mean() - scores[n_real:].mean()
    grad_out = np.empty((n_real + n_fake, 1))
    grad_out[:n_real] = 1.0 / n_real
    grad_out[n_real:] = -1.0 / n_fake
    grads, _ = critic.net.backward(cache, grad_out)
    return float(loss), grads


def map_points(gen: Generator, points: FeatureMatrix) -> FeatureMatrix:
    """Row-wise image of ``points`` under the generator."""
    return FeatureMatrix(gen.transform(points.values), points.feature_names)


def train(data, cfg: TrainConfig, c: CostFunction = CostFunction.SQUARED_L1) -> Generator:
    """Train a generator mapping group_a onto group_b's distribution.

    Each outer step runs ``critic_steps_per_gen`` critic updates on fresh
    with-replacement batches (clamping every critic parameter into
    [-clip, clip] after each update), then one generator update. All updates
    use RMSProp. Fully deterministic for a fixed config and data.
    """
    src = data.group_a.values
    tgt = data.group_b.values
    if src.shape[0] == 0 or tgt.shape[0] == 0:
        raise BadParamsError("both groups must be nonempty")
    d = src.shape[1]

    rng_init = substream(cfg.seed, "init")
    rng_batch = substream(cfg.seed, "batches")
    gen = Generator(Mlp.init_random((d, *cfg.hidden, d), rng_init))
    critic = Critic(Mlp.init_random((d, *cfg.hidden, 1), rng_init))
    opt_g = RmsPropState(gen.net.params())
    opt_c = RmsPropState(critic.net.params())

    log_every = max(1, cfg.generator_steps // 10)
    for step in range(cfg.generator_steps):
        for _ in range(cfg.critic_steps_per_gen):
            batch_a = src[rng_batch.integers(0, src.shape[0], size=cfg.batch_size)]
            batch_b = tgt[rng_batch.integers(0, tgt.shape[0], size=cfg.batch_size)]
            loss_c, grads = critic_loss_grads(critic, gen, batch_a, batch_b)
            if not np.isfinite(loss_c):
                raise NonFiniteLossError(step, "critic", loss_c)
            params = critic.net.params()
            opt_c.update(params, grads, cfg.learning_rate)
            for p in params:
                np.clip(p, -cfg.clip, cfg.clip, out=p)
        batch = src[rng_batch.integers(0, src.shape[0], size=cfg.batch_size)]
        loss_g, grads = generator_loss_grads(gen, critic, batch, cfg.cost_weight, c)
        if not np.isfinite(loss_g):
            raise NonFiniteLossError(step, "generator", loss_g)
        opt_g.update(gen.net.params(), grads, cfg.learning_rate)
        if (step + 1) % log_every == 0:
            log.info("step %d/%d: L_G=%.4f L_D=%.4f", step + 1, cfg.generator_steps, loss_g, loss_c)
    return gen


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------


def generator_to_dict(
    gen: Generator, cfg: TrainConfig | None = None, normalizer: Normalizer | None = None
) -> dict:
    return {
        "layer_dims": list(gen.net.layer_dims),
        "activation": "relu",
        "weights": [w.tolist() for w in gen.net.weights],
        "biases": [b.tolist() for b in gen.net.biases],
        "train_config": None if cfg is None else asdict(cfg),
        "normalizer": None if normalizer is None else normalizer.to_dict(),
    }


def generator_from_dict(d: dict):
    gen = Generator(Mlp(d["layer_dims"], d["weights"], d["biases"]))
    cfg = None
    if d.get("train_config") is not None:
        raw = dict(d["train_config"])
        raw["hidden"] = tuple(raw.get("hidden", DEFAULT_HIDDEN))
        cfg = TrainConfig(**raw)
    norm = None if d.get("normalizer") is None else Normalizer.from_dict(d["normalizer"])
    return gen, cfg, norm


def save_generator(path, gen: Generator, cfg=None, normalizer=None) -> None:
    with open(path, "w") as fh:
        json.dump(generator_to_dict(gen, cfg, normalizer), fh)


def load_generator(path):
    """Returns (Generator, TrainConfig | None, Normalizer | None)."""
    with open(path) as fh:
        return generator_from_dict(json.load(fh))
