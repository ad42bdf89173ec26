"""Implicit quantile network surrogates.

One network maps (input x, quantile level tau) to two heads: a point
anchor mu_hat and a conditional quantile estimate q_hat(tau | x). Training
draws fresh tau levels every epoch and minimizes a weighted three-term
objective (anchor L1 + ordering penalty + pinball). Prediction queries the
q_hat head only; the anchor head exists purely to stabilize training and is
never used at test time.

Architecture, fixed up to widths:

    input branch   x   -> relu dense (d -> hidden)
    level branch   tau -> cosine features -> relu dense (embed -> hidden)
    merge              = elementwise product of the two branches
    trunk              -> relu dense (hidden -> hidden)
    head               -> identity dense (hidden -> 2), columns (mu_hat, q_hat)
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import TrainingDivergedError
from .nn import AdamState, DenseLayer, adam_step, cosine_lr
from .rng import SeededRng

__all__ = [
    "LossWeights",
    "DEFAULT_WEIGHTS",
    "QUANTILE_DOMINANT_WEIGHTS",
    "IqnConfig",
    "cosine_embed",
    "IqnNetwork",
    "three_term_loss",
    "train_iqn",
    "IqnModel",
    "PredictiveSamples",
]


@dataclass(frozen=True)
class LossWeights:
    """Non-negative weights on the three loss terms; sum must be positive.

    anchor   : L1 pull of the mu head toward observed responses.
    ordering : penalty on quantile estimates lying on the wrong side of y,
               scaled by |tau - 1/2|.
    pinball  : check loss on the q head.
    """

    anchor: float
    ordering: float
    pinball: float

    def __post_init__(self):
        vals = (self.anchor, self.ordering, self.pinball)
        if any(not np.isfinite(v) or v < 0 for v in vals):
            raise ValueError(f"loss weights must be finite and >= 0, got {vals}")
        if sum(vals) <= 0:
            raise ValueError("at least one loss weight must be positive")

    def as_tuple(self):
        return (self.anchor, self.ordering, self.pinball)


DEFAULT_WEIGHTS = LossWeights(anchor=0.3, ordering=0.3, pinball=0.4)
QUANTILE_DOMINANT_WEIGHTS = LossWeights(anchor=0.1, ordering=0.2, pinball=0.7)


@dataclass
class IqnConfig:
    """Hyperparameters for one quantile-network fit."""

    input_dim: int
    hidden_width: int = 256
    embed_dim: int = 32
    weights: LossWeights = field(default_factory=lambda: DEFAULT_WEIGHTS)
    epochs: int = 3000
    batch_size: int = 128
    learning_rate: float = 1e-3
    lr_min: float = 0.0
    tau_mode: str = "per_row"  # or "per_batch": one shared tau per minibatch
    standardize: bool = True
    dtype: str = "float32"  # "float64" for gradient diagnostics

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.hidden_width < 1 or self.embed_dim < 1:
            raise ValueError("hidden_width and embed_dim must be >= 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0 or self.lr_min < 0:
            raise ValueError("learning_rate must be > 0 and lr_min >= 0")
        if self.tau_mode not in ("per_row", "per_batch"):
            raise ValueError(f"tau_mode must be per_row or per_batch, got {self.tau_mode!r}")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype!r}")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64


def cosine_embed(taus, embed_dim):
    """Cosine features for quantile levels: phi_j(tau) = cos(j pi tau).

    j runs 0..embed_dim-1, so the first feature is identically 1 and
    tau = 0 maps to the all-ones vector.
    """
    taus = np.asarray(taus, dtype=np.float64)
    if not np.all(np.isfinite(taus)) or np.any(taus < 0) or np.any(taus > 1):
        raise ValueError("quantile levels must be finite and lie in [0, 1]")
    j = np.arange(embed_dim, dtype=np.float64)
    return np.cos(np.pi * taus[..., None] * j)


class IqnNetwork:
    """The four dense blocks plus fixed-graph forward/backward."""

    BLOCKS = ("input_branch", "level_branch", "trunk", "head")

    def __init__(self, input_branch, level_branch, trunk, head, embed_dim):
        self.input_branch = input_branch
        self.level_branch = level_branch
        self.trunk = trunk
        self.head = head
        self.embed_dim = embed_dim

    @classmethod
    def create(cls, rng, input_dim, hidden_width=256, embed_dim=32,
               dtype=np.float32):
        r_x, r_t, r_1, r_o = rng.split(4)
        return cls(
            DenseLayer.create(r_x, input_dim, hidden_width, "relu", "input_branch", dtype),
            DenseLayer.create(r_t, embed_dim, hidden_width, "relu", "level_branch", dtype),
            DenseLayer.create(r_1, hidden_width, hidden_width, "relu", "trunk", dtype),
            DenseLayer.create(r_o, hidden_width, 2, "identity", "head", dtype),
            embed_dim,
        )

    @property
    def dtype(self):
        return self.input_branch.weight.dtype

    @property
    def input_dim(self):
        return self.input_branch.weight.shape[0]

    def layers(self):
        return [self.input_branch, self.level_branch, self.trunk, self.head]

    def param_blocks(self):
        out = []
        for layer in self.layers():
            out.extend(layer.params())
        return out

    def forward(self, x, taus):
        """Evaluate both heads; returns (mu_hat, q_hat, cache).

        The cache feeds backward(); discard it for inference.
        """
        dtype = self.dtype
        phi = cosine_embed(taus, self.embed_dim).astype(dtype)
        h_x, z_x = self.input_branch.forward(x)
        h_t, z_t = self.level_branch.forward(phi)
        merged = h_x * h_t
        h_1, z_1 = self.trunk.forward(merged)
        out, z_out = self.head.forward(h_1)
        cache = (x, phi, z_x, h_x, z_t, h_t, merged, z_1, h_1, z_out)
        return out[:, 0], out[:, 1], cache

    def backward(self, cache, d_mu, d_q):
        """Gradients of a scalar loss wrt every parameter block.

        d_mu / d_q are the loss gradients wrt the two head columns.
        Returns {block_name: gradient array} keyed like param_blocks().
        """
        if cache is None:
            raise RuntimeError("backward called before forward")
        x, phi, z_x, h_x, z_t, h_t, merged, z_1, h_1, z_out = cache
        d_out = np.empty((d_mu.shape[0], 2), dtype=self.dtype)
        d_out[:, 0] = d_mu
        d_out[:, 1] = d_q
        d_h1, d_w_head, d_b_head = self.head.backward(d_out, z_out, h_1)
        d_merged, d_w_trunk, d_b_trunk = self.trunk.backward(d_h1, z_1, merged)
        d_hx = d_merged * h_t
        d_ht = d_merged * h_x
        _, d_w_in, d_b_in = self.input_branch.backward(d_hx, z_x, x)
        _, d_w_lv, d_b_lv = self.level_branch.backward(d_ht, z_t, phi)
        return {
            "input_branch.weight": d_w_in, "input_branch.bias": d_b_in,
            "level_branch.weight": d_w_lv, "level_branch.bias": d_b_lv,
            "trunk.weight": d_w_trunk, "trunk.bias": d_b_trunk,
            "head.weight": d_w_head, "head.bias": d_b_head,
        }


def three_term_loss(mu_hat, q_hat, y, taus, weights):
    """Batch-mean loss and its gradients wrt the two heads.

    loss_i = w_a |y_i - mu_i|
           + w_o |tau_i - 1/2| * wrong_side_i
           + w_p max(tau_i e_i, (tau_i - 1) e_i),   e_i = y_i - q_i

    wrong_side_i penalizes q above y when tau < 1/2 and q below y when
    tau >= 1/2. Subgradients at kinks are taken as 0.

    Returns (loss, d_mu, d_q).
    """
    w_a, w_o, w_p = weights.as_tuple()
    e = y - q_hat
    resid = y - mu_hat
    below = taus < 0.5
    wrong_side = np.where(below, np.maximum(q_hat - y, 0.0), np.maximum(e, 0.0))
    ord_scale = np.abs(taus - 0.5)
    pinball = np.maximum(taus * e, (taus - 1.0) * e)
    loss = float(
        np.mean(w_a * np.abs(resid) + w_o * ord_scale * wrong_side + w_p * pinball)
    )
    n = y.shape[0]
    d_mu = (-w_a / n) * np.sign(resid)
    d_wrong = np.where(below, (q_hat > y).astype(e.dtype), -((y > q_hat).astype(e.dtype)))
    d_pin = np.where(e > 0, -taus, np.where(e < 0, 1.0 - taus, 0.0))
    d_q = (w_o * ord_scale * d_wrong + w_p * d_pin) / n
    return loss, d_mu.astype(e.dtype, copy=False), d_q.astype(e.dtype, copy=False)


@dataclass
class PredictiveSamples:
    """Draws from the predictive distribution at one input point."""

    values: np.ndarray
    taus: np.ndarray
    x_star: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.taus.shape:
            raise ValueError("values and taus must have matching length")
        if np.any(self.taus < 0) or np.any(self.taus > 1):
            raise ValueError("sampled quantile levels must lie in [0, 1]")


class IqnModel:
    """A trained quantile network plus its input/response transforms.

    Optionally carries a frozen additive prior network (for randomized-prior
    ensemble members): predictions are trainable(x, tau) + scale * prior(x, tau).
    """

    def __init__(self, network, config, x_offset, x_span, y_mean, y_std,
                 loss_history, prior=None, prior_scale=0.0):
        self.network = network
        self.config = config
        self.x_offset = x_offset
        self.x_span = x_span
        self.y_mean = y_mean
        self.y_std = y_std
        self.loss_history = loss_history
        self.prior = prior
        self.prior_scale = prior_scale

    # -- internal -----------------------------------------------------
    def _scale_inputs(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.network.input_dim:
            raise ValueError(
                f"expected {self.network.input_dim} input columns, got {x.shape[1]}"
            )
        xs = (x - self.x_offset) / self.x_span
        return xs.astype(self.network.dtype)

    def _forward_q(self, xs, taus):
        _, q, _ = self.network.forward(xs, taus)
        if self.prior is not None and self.prior_scale != 0.0:
            _, q_prior, _ = self.prior.forward(xs, taus)
            q = q + self.prior_scale * q_prior
        return q

    # -- public -------------------------------------------------------
    def sample_predictive(self, x_star, n_samples, rng, force_tau=None):
        """n_samples predictive draws at one input point.

        Each draw evaluates the q head at an independent tau ~ U[0,1].
        force_tau pins every draw to one level; that is a read-only
        diagnostic hook, not part of the sampling contract.
        """
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        rng = rng if isinstance(rng, SeededRng) else SeededRng(rng)
        x_star = np.asarray(x_star, dtype=np.float64).reshape(-1)
        xs = self._scale_inputs(x_star)
        xs = np.repeat(xs, n_samples, axis=0)
        if force_tau is None:
            taus = rng.uniform(size=n_samples)
        else:
            if not 0.0 <= force_tau <= 1.0:
                raise ValueError("force_tau must lie in [0, 1]")
            taus = np.full(n_samples, float(force_tau))
        q = self._forward_q(xs, taus)
        values = q.astype(np.float64) * self.y_std + self.y_mean
        return PredictiveSamples(values=values, taus=taus, x_star=x_star)

    def predict_quantiles(self, x, levels):
        """Quantile estimates at sorted levels for a batch of inputs.

        Returns an (n, len(levels)) float64 array in response units.
        """
        levels = np.asarray(levels, dtype=np.float64).reshape(-1)
        if levels.size == 0:
            raise ValueError("levels must be non-empty")
        if np.any(levels <= 0) or np.any(levels >= 1):
            raise ValueError("levels must lie strictly inside (0, 1)")
        if np.any(np.diff(levels) < 0):
            raise ValueError("levels must be sorted ascending")
        xs = self._scale_inputs(x)
        n = xs.shape[0]
        out = np.empty((n, levels.size), dtype=np.float64)
        for k, level in enumerate(levels):
            taus = np.full(n, level)
            out[:, k] = self._forward_q(xs, taus).astype(np.float64)
        return out * self.y_std + self.y_mean

    def point(self, x):
        """Predicted median, the point prediction used for RMSE."""
        return self.predict_quantiles(x, [0.5])[:, 0]


def _validate_training_data(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.ndim != 2:
        raise ValueError("x must be a 2-d array (n, d)")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
    if x.shape[0] < 2:
        raise ValueError("training needs at least 2 rows")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("training data must be finite")
    return x, y


def train_iqn(x, y, config, seed, prior=None, prior_scale=0.0,
              initial_network=None):
    """Fit a quantile network; deterministic given (data, config, seed).

    Args:
        x: (n, d) inputs; y: (n,) responses.
        config: IqnConfig; config.input_dim must match d (plus any
            augmentation columns already appended by the caller).
        seed: int or SeededRng.
        prior: optional frozen IqnNetwork added with weight prior_scale to
            both heads during training and prediction; gradients never flow
            into it.
        initial_network: optional warm-start weights (same shape); used by
            active-learning loops when warm_start is enabled.

    Returns an IqnModel.
    """
    x, y = _validate_training_data(x, y)
    if config.input_dim != x.shape[1]:
        raise ValueError(
            f"config.input_dim={config.input_dim} but data has {x.shape[1]} columns"
        )
    rng = seed if isinstance(seed, SeededRng) else SeededRng(seed)
    init_rng, tau_rng, batch_rng = rng.split(3)

    dtype = config.np_dtype
    if config.standardize:
        x_offset = x.min(axis=0)
        x_span = x.max(axis=0) - x_offset
        x_span = np.where(x_span > 0, x_span, 1.0)  # constant columns pass through
        y_mean = float(y.mean())
        y_std = float(y.std())
        if y_std < 1e-12:
            y_std = 1.0
    else:
        x_offset = np.zeros(x.shape[1])
        x_span = np.ones(x.shape[1])
        y_mean, y_std = 0.0, 1.0
    xs = ((x - x_offset) / x_span).astype(dtype)
    ys = ((y - y_mean) / y_std).astype(dtype)

    if initial_network is not None:
        net = initial_network
    else:
        net = IqnNetwork.create(init_rng, config.input_dim, config.hidden_width,
                                config.embed_dim, dtype)
    blocks = net.param_blocks()
    states = {name: AdamState.for_param(p) for name, p in blocks}

    n = xs.shape[0]
    # Small problems train full-batch; the stated batch size applies above
    # the 2x threshold so a 130-row fit does not see a 2-row tail batch.
    batch = n if n < 2 * config.batch_size else config.batch_size
    n_batches = (n + batch - 1) // batch
    use_prior = prior is not None and prior_scale != 0.0

    history = np.empty(config.epochs, dtype=np.float64)
    for epoch in range(config.epochs):
        lr = cosine_lr(epoch, config.epochs, config.learning_rate, config.lr_min)
        if config.tau_mode == "per_row":
            taus_epoch = tau_rng.uniform(size=n)
        else:
            taus_epoch = None
        order = batch_rng.permutation(n) if n_batches > 1 else np.arange(n)
        epoch_loss = 0.0
        for b in range(n_batches):
            idx = order[b * batch:(b + 1) * batch]
            xb = xs[idx]
            yb = ys[idx]
            if taus_epoch is not None:
                tb = taus_epoch[idx]
            else:
                tb = np.full(idx.shape[0], tau_rng.uniform())
            mu, q, cache = net.forward(xb, tb)
            if use_prior:
                mu_p, q_p, _ = prior.forward(xb, tb)
                mu = mu + prior_scale * mu_p
                q = q + prior_scale * q_p
            loss, d_mu, d_q = three_term_loss(mu, q, yb, tb.astype(dtype), config.weights)
            epoch_loss += loss * idx.shape[0]
            grads = net.backward(cache, d_mu, d_q)
            for name, param in blocks:
                adam_step(param, grads[name], states[name], lr, name=name)
        epoch_loss /= n
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError(
                f"training loss became non-finite at epoch {epoch}"
            )
        history[epoch] = epoch_loss

    return IqnModel(net, config, x_offset, x_span, y_mean, y_std, history,
                    prior=prior if use_prior else None,
                    prior_scale=prior_scale if use_prior else 0.0)
