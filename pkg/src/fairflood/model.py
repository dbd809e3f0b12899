"""Encoder / task-head / adversary assembly with gradient-reversal routing.

The encoder and task head always draw their initial weights from the
``init`` stream and dropout masks from the ``dropout`` stream; the
adversary initializes from its own ``adversary_init`` stream. A fair model
at lambda goes through one combined backward per step: the encoder receives
the task gradient plus ``-lambda`` times the adversary gradient, and a
single Adam instance updates every parameter group simultaneously.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import FEATURE_ORDER, StandardizationParams
from .errors import DataError
from .nn import (BatchNorm, Dense, Dropout, Relu, Sequential, Softplus,
                 cross_entropy_loss, grl_backward, mse_loss)

__all__ = [
    "VARIANT_FAIR",
    "VARIANT_BASELINE",
    "ModelConfig",
    "StepOutput",
    "FairModel",
    "init_model",
    "training_step",
    "predict",
    "save_checkpoint",
    "load_checkpoint",
]

VARIANT_FAIR = "fair"
VARIANT_BASELINE = "baseline"

CHECKPOINT_SCHEMA_VERSION = 1
# inputs with |z| beyond this were almost certainly never standardized
STANDARDIZED_INPUT_LIMIT = 20.0


@dataclass
class ModelConfig:
    """Architecture hyperparameters; defaults land the trainable parameter
    count in the tens of thousands."""

    n_districts: int
    input_dim: int = len(FEATURE_ORDER)
    encoder_widths: tuple = (128, 128, 64)
    task_hidden: int = 128
    adversary_hidden: int = 128
    dropout: float = 0.3
    lam: float = 1.0

    def validate(self):
        if self.n_districts < 1:
            raise DataError("n_districts must be positive")
        if self.input_dim < 1:
            raise DataError("input_dim must be positive")
        if not self.encoder_widths or any(w < 1 for w in self.encoder_widths):
            raise DataError("encoder widths must be positive")
        if self.task_hidden < 1 or self.adversary_hidden < 1:
            raise DataError("head widths must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise DataError("dropout must be in [0, 1)")
        if self.lam < 0.0:
            raise DataError("lambda must be non-negative")

    @property
    def representation_dim(self):
        return self.encoder_widths[-1]

    def to_dict(self):
        return {
            "n_districts": self.n_districts,
            "input_dim": self.input_dim,
            "encoder_widths": list(self.encoder_widths),
            "task_hidden": self.task_hidden,
            "adversary_hidden": self.adversary_hidden,
            "dropout": self.dropout,
            "lam": self.lam,
        }

    @classmethod
    def from_dict(cls, payload):
        return cls(
            n_districts=int(payload["n_districts"]),
            input_dim=int(payload["input_dim"]),
            encoder_widths=tuple(payload["encoder_widths"]),
            task_hidden=int(payload["task_hidden"]),
            adversary_hidden=int(payload["adversary_hidden"]),
            dropout=float(payload["dropout"]),
            lam=float(payload["lam"]),
        )


@dataclass
class StepOutput:
    """Losses and diagnostics from one optimizer step. The total is the
    task loss minus lambda times the adversarial loss, exactly as logged."""

    task_loss: float
    adv_loss: float
    total_loss: float
    predictions: np.ndarray
    adv_accuracy: float


@dataclass
class FairModel:
    config: ModelConfig
    variant: str
    seed: int
    encoder: Sequential
    task_head: Sequential
    adversary: Sequential | None
    standardization: StandardizationParams | None = None
    district_labels: list = field(default_factory=list)
    train_upazila_ids: list | None = None
    # damage is regressed on a scale-normalized target (y / output_scale) so
    # the task and adversarial losses are commensurate and lambda weights
    # them meaningfully; predictions convert back to USD millions
    output_scale: float = 1.0

    @property
    def lam(self):
        return self.config.lam if self.variant == VARIANT_FAIR else 0.0

    def _groups(self):
        groups = {"encoder": self.encoder, "task_head": self.task_head}
        if self.adversary is not None:
            groups["adversary"] = self.adversary
        return groups

    def parameters(self):
        """Trainable arrays keyed by 'group.layer.name', insertion-ordered;
        this ordering is the documented checkpoint layout."""
        out = {}
        for prefix, seq in self._groups().items():
            for name, arr in seq.params().items():
                out[f"{prefix}.{name}"] = arr
        return out

    def gradients(self):
        out = {}
        for prefix, seq in self._groups().items():
            for name, arr in seq.grads().items():
                out[f"{prefix}.{name}"] = arr
        return out

    def state_arrays(self):
        """Non-trainable state (batchnorm running stats), checkpoint-ordered."""
        out = {}
        for prefix, seq in self._groups().items():
            for name, arr in seq.state().items():
                out[f"{prefix}.{name}"] = arr
        return out

    @property
    def param_count(self):
        return int(sum(arr.size for arr in self.parameters().values()))

    def set_dropout_frozen(self, frozen):
        for seq in self._groups().values():
            for layer in seq.layers:
                if isinstance(layer, Dropout):
                    layer.freeze_mask = frozen

    def set_batchnorm_stats_frozen(self, frozen):
        for seq in self._groups().values():
            for layer in seq.layers:
                if isinstance(layer, BatchNorm):
                    layer.freeze_stats = frozen

    def forward(self, x, train=False):
        """Standardized inputs -> (non-negative predictions, district logits).

        The logits are None for the baseline variant. Inference mode is
        deterministic (running-stat batchnorm, identity dropout).
        """
        if x.ndim != 2 or x.shape[1] != self.config.input_dim:
            raise DataError(
                f"expected {self.config.input_dim} input columns, got {x.shape}")
        if np.abs(x).max(initial=0.0) > STANDARDIZED_INPUT_LIMIT:
            raise DataError(
                "input exceeds |z| > 20; features must be standardized first")
        z = self.encoder.forward(x, train=train)
        y_hat = self.task_head.forward(z, train=train)
        s_logits = None
        if self.adversary is not None:
            # GRL forward is the identity, so the adversary reads z directly
            s_logits = self.adversary.forward(z, train=train)
        return y_hat, s_logits

    def backward(self, grad_y, grad_logits, lam):
        """Route gradients: task head back to the representation, adversary
        back through the GRL (scaled by -lam), then both into the encoder."""
        grad_z = self.task_head.backward(grad_y)
        if self.adversary is not None and grad_logits is not None:
            grad_z = grad_z + grl_backward(self.adversary.backward(grad_logits), lam)
        self.encoder.backward(grad_z)


def _encoder_layers(config, init_rng, dropout_rng):
    layers = []
    in_dim = config.input_dim
    for width in config.encoder_widths:
        dense = Dense(in_dim, width)
        dense.init_he_uniform(init_rng)
        layers.extend([dense, BatchNorm(width), Relu(),
                       Dropout(config.dropout, rng=dropout_rng)])
        in_dim = width
    return layers


def _head_layers(in_dim, hidden, out_dim, rng, positive_output):
    first = Dense(in_dim, hidden)
    first.init_he_uniform(rng)
    second = Dense(hidden, out_dim)
    second.init_he_uniform(rng)
    layers = [first, Relu(), second]
    if positive_output:
        layers.append(Softplus())
    return layers


def init_model(config, streams, variant=VARIANT_FAIR):
    """Build and initialize a model.

    The adversary draws from its own named stream so a fair and a baseline
    model built from the same seed share bit-identical encoder and task-head
    initializations.
    """
    config.validate()
    if variant not in (VARIANT_FAIR, VARIANT_BASELINE):
        raise DataError(f"unknown variant {variant!r}")
    init_rng = streams.stream("init")
    dropout_rng = streams.stream("dropout")
    encoder = Sequential(_encoder_layers(config, init_rng, dropout_rng))
    task_head = Sequential(_head_layers(
        config.representation_dim, config.task_hidden, 1, init_rng,
        positive_output=True))
    adversary = None
    if variant == VARIANT_FAIR:
        adv_rng = streams.stream("adversary_init")
        adversary = Sequential(_head_layers(
            config.representation_dim, config.adversary_hidden,
            config.n_districts, adv_rng, positive_output=False))
    return FairModel(config=config, variant=variant, seed=streams.seed,
                     encoder=encoder, task_head=task_head, adversary=adversary)


def set_output_level(model, target_mean):
    """Point the softplus output at the (scaled) target mean before training.

    Initializing the final task bias to softplus^-1(mean) spares the first
    few hundred Adam steps from just learning the bulk damage level; both
    variants receive the same value so seed-matched runs stay comparable.
    """
    if target_mean <= 0.0:
        return
    final_dense = [l for l in model.task_head.layers if isinstance(l, Dense)][-1]
    final_dense.bias[...] = np.log(np.expm1(target_mean))


def training_step(model, x, y, s, optimizer, lam=None):
    """One combined forward/backward/Adam update on a batch.

    ``y`` is in raw USD millions; gradients come from the scale-normalized
    residuals while the reported task loss is converted back to USD-M^2.
    The adversary parameters receive plain cross-entropy gradients (they
    minimize it); the encoder receives the task gradient plus the reversed,
    lambda-scaled adversarial gradient.
    """
    if x.shape[0] < 2:
        raise DataError("training batches must have at least 2 rows")
    lam = model.lam if lam is None else lam
    scale = model.output_scale
    y_scaled = np.asarray(y, dtype=np.float64).reshape(-1, 1) / scale
    y_hat, s_logits = model.forward(x, train=True)
    task_loss_scaled, grad_y = mse_loss(y_hat, y_scaled)
    task_loss = task_loss_scaled * scale * scale
    adv_loss = 0.0
    adv_accuracy = 0.0
    grad_logits = None
    if model.adversary is not None:
        s = np.asarray(s, dtype=np.int64).reshape(-1)
        adv_loss, grad_logits = cross_entropy_loss(s_logits, s)
        adv_accuracy = float(np.mean(np.argmax(s_logits, axis=1) == s))
    model.backward(grad_y, grad_logits, lam)
    optimizer.step(model.gradients())
    return StepOutput(
        task_loss=task_loss,
        adv_loss=adv_loss,
        total_loss=task_loss - lam * adv_loss,
        predictions=y_hat.reshape(-1) * scale,
        adv_accuracy=adv_accuracy,
    )


def loss_and_param_grads(model, x, y, s, lam=None, wrt="encoder_task"):
    """Total (or adversarial) loss and its gradients for gradient checks.

    ``wrt='encoder_task'`` returns d(task - lam*adv)/d(theta) for encoder
    and task-head parameters; ``wrt='adversary'`` returns d(adv)/d(psi).
    The task term stays in the model's internal output scale so the check
    probes the exact loss the optimizer sees. The caller must freeze
    dropout masks and batchnorm stat updates first, making this a pure
    function of the parameter values.
    """
    lam = model.lam if lam is None else lam
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1) / model.output_scale
    y_hat, s_logits = model.forward(x, train=True)
    task_loss, grad_y = mse_loss(y_hat, y)
    adv_loss = 0.0
    grad_logits = None
    if model.adversary is not None:
        adv_loss, grad_logits = cross_entropy_loss(
            s_logits, np.asarray(s, dtype=np.int64).reshape(-1))
    model.backward(grad_y, grad_logits, lam)
    grads = model.gradients()
    if wrt == "encoder_task":
        loss = task_loss - lam * adv_loss
        keys = [k for k in grads if k.startswith(("encoder.", "task_head."))]
    elif wrt == "adversary":
        loss = adv_loss
        keys = [k for k in grads if k.startswith("adversary.")]
    else:
        raise ValueError(f"unknown wrt {wrt!r}")
    return loss, {k: grads[k].copy() for k in keys}


def encoder_grad_components(model, x, y, s):
    """Decompose the encoder gradient into its task and adversarial parts.

    Returns (task_part, adv_part) dicts over encoder parameters such that
    the routed gradient at any lambda is task_part - lam * adv_part. Uses
    the caches of a single forward pass, so freeze stochastic state first.
    """
    if model.adversary is None:
        raise DataError("gradient decomposition requires the fair variant")
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1) / model.output_scale
    y_hat, s_logits = model.forward(x, train=True)
    _, grad_y = mse_loss(y_hat, y)
    _, grad_logits = cross_entropy_loss(
        s_logits, np.asarray(s, dtype=np.int64).reshape(-1))
    grad_z_task = model.task_head.backward(grad_y)
    grad_z_adv = model.adversary.backward(grad_logits)
    model.encoder.backward(grad_z_task)
    task_part = {k: v.copy() for k, v in model.encoder.grads().items()}
    model.encoder.backward(grad_z_adv)
    adv_part = {k: v.copy() for k, v in model.encoder.grads().items()}
    return task_part, adv_part


def predict(model, dataset):
    """Per-row damage estimates in USD millions for a dataset, using the
    model's embedded standardization and output scale."""
    if model.standardization is None:
        raise DataError("model has no standardization parameters")
    x = model.standardization.apply(dataset.feature_matrix())
    y_hat, _ = model.forward(x, train=False)
    return y_hat.reshape(-1) * model.output_scale


# ---------------------------------------------------------------------------
# Checkpoint serialization: a single JSON document with the manifest plus a
# base64 blob of float64 little-endian parameter bytes in layout order
# (trainable parameters first, then batchnorm running stats).

def _all_arrays(model):
    arrays = dict(model.parameters())
    arrays.update(model.state_arrays())
    return arrays


def save_checkpoint(model, path):
    arrays = _all_arrays(model)
    blob = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes()
                    for a in arrays.values())
    payload = {
        "kind": "fairflood-checkpoint",
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "variant": model.variant,
        "seed": model.seed,
        "config": model.config.to_dict(),
        "district_labels": list(model.district_labels),
        "standardization": (model.standardization.to_dict()
                            if model.standardization else None),
        "output_scale": model.output_scale,
        "train_upazila_ids": (list(model.train_upazila_ids)
                              if model.train_upazila_ids is not None else None),
        "param_count": model.param_count,
        "layout": [{"name": k, "shape": list(a.shape)} for k, a in arrays.items()],
        "parameters_sha256": hashlib.sha256(blob).hexdigest(),
        "parameters_b64": base64.b64encode(blob).decode("ascii"),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)


def load_checkpoint(path):
    """Rebuild a model bit-exactly from a checkpoint file."""
    from .nn import RngStreams  # local import to keep module load light

    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    if payload.get("kind") != "fairflood-checkpoint":
        raise DataError(f"{path} is not a fairflood checkpoint")
    if payload.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
        raise DataError("unsupported checkpoint schema version")

    blob = base64.b64decode(payload["parameters_b64"])
    if hashlib.sha256(blob).hexdigest() != payload["parameters_sha256"]:
        raise DataError(f"checkpoint {path} failed its integrity check")

    config = ModelConfig.from_dict(payload["config"])
    model = init_model(config, RngStreams(int(payload["seed"])),
                       variant=payload["variant"])
    arrays = _all_arrays(model)
    layout = payload["layout"]
    if [e["name"] for e in layout] != list(arrays):
        raise DataError("checkpoint layout does not match the architecture")
    offset = 0
    for entry in layout:
        arr = arrays[entry["name"]]
        if list(arr.shape) != entry["shape"]:
            raise DataError(f"shape mismatch for {entry['name']!r} in checkpoint")
        nbytes = arr.size * 8
        chunk = np.frombuffer(blob, dtype="<f8", count=arr.size,
                              offset=offset).reshape(arr.shape)
        arr[...] = chunk
        offset += nbytes
    if offset != len(blob):
        raise DataError("checkpoint parameter blob has trailing bytes")

    if payload.get("standardization"):
        model.standardization = StandardizationParams.from_dict(
            payload["standardization"])
    model.output_scale = float(payload.get("output_scale", 1.0))
    model.district_labels = list(payload.get("district_labels", []))
    ids = payload.get("train_upazila_ids")
    model.train_upazila_ids = list(ids) if ids is not None else None
    return model
