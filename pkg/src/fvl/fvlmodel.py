"""Multi-stream GRU forecaster for future vehicle bounding boxes.

Past normalized boxes (and optionally ROI-pooled optical flow) are each
embedded by a relu projection and consumed by their own GRU encoder; the
final hidden states are averaged and projected into one fused state.  A
GRU decoder unrolls from that state for the prediction horizon,
averaging its own state embedding with an embedded future ego-motion
feature at each step when the variant has one, and a linear head emits
each future box as a residual against the last observed box.  Variants:

    x    boxes only
    xe   boxes + future ego-motion
    xo   boxes + pooled flow
    xoe  boxes + pooled flow + future ego-motion

Everything runs in float64 with explicit seeds, so one (config, seed,
dataset) triple reproduces a training run bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import diffcore as dc
from .dataio import Sample, normalize_sample
from .diffcore import DiffArray, GradCheckReport, Tape, grad_check
from .errors import DataFormatError, NumericFailure, ValidationError
from .nnkit import Adam, GruCell, Projection, load_params, mse_loss, save_params
from .rng import Xoshiro256

__all__ = [
    "VARIANTS",
    "ModelConfig",
    "Prediction",
    "TrainResult",
    "BoxForecaster",
    "train_model",
    "save_model",
    "load_model",
    "gradient_check_model",
]

VARIANTS = ("x", "xe", "xo", "xoe")

# xor-ed into the seed for streams that must not replay the weight
# initialization draws (data shuffling, gradient-check probe data)
_DATA_STREAM = 0x6A09E667F3BCC908


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters; `variant` picks the input streams."""

    variant: str = "xoe"
    hidden: int = 64
    embed: int = 64
    tau: int = 10
    delta: int = 10
    pooled_dim: int = 50

    def __post_init__(self):
        object.__setattr__(self, "variant", str(self.variant).lower())
        if self.variant not in VARIANTS:
            raise ValidationError(
                f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if self.tau < 2 or self.delta < 1:
            raise ValidationError(
                f"need tau >= 2 and delta >= 1, got ({self.tau}, {self.delta})")
        for name in ("hidden", "embed", "pooled_dim"):
            if getattr(self, name) < 1:
                raise ValidationError(
                    f"{name} must be >= 1, got {getattr(self, name)}")

    @property
    def uses_flow(self) -> bool:
        return "o" in self.variant

    @property
    def uses_ego(self) -> bool:
        return "e" in self.variant


@dataclass(frozen=True)
class Prediction:
    """Decoded future boxes in normalized units.

    `absolute` is literally `anchor + residuals`, so subtracting the
    anchor from a reported box recovers the emitted residual exactly.
    """

    anchor: np.ndarray
    residuals: np.ndarray
    absolute: np.ndarray

    def __post_init__(self):
        for name in ("anchor", "residuals", "absolute"):
            object.__setattr__(self, name,
                               np.asarray(getattr(self, name), dtype=np.float64))
        if self.anchor.shape != (4,):
            raise ValidationError(
                f"anchor must be one box [cx, cy, w, h], got {self.anchor.shape}")
        if (self.residuals.ndim != 2 or self.residuals.shape[1] != 4
                or self.absolute.shape != self.residuals.shape):
            raise ValidationError(
                f"residuals {self.residuals.shape} and absolute "
                f"{self.absolute.shape} must both be [delta x 4]")

    def pixel_boxes(self, width: float, height: float) -> np.ndarray:
        """Absolute boxes scaled back to pixels, [delta x 4]."""
        return self.absolute * np.array([width, height, width, height])


@dataclass(frozen=True)
class TrainResult:
    """Outcome of one training run.

    `params` are the weights after the last update; `best_params` are the
    snapshot with the lowest held-out pixel ADE (equal to `params` when
    no epochs ran).  Losses are per-epoch means of the batch MSE in
    normalized units; `val_ades` is nan-filled when the dataset was too
    small to hold anything out.
    """

    config: ModelConfig
    params: dict
    best_params: dict
    best_epoch: int
    train_losses: tuple
    val_ades: tuple
    train_indices: tuple
    val_indices: tuple


class BoxForecaster:
    """One model instance: parameter leaves on a private tape.

    Construction order fixes the weight-draw order, so the initial state
    is a pure function of (config, seed).  Pass `params` to overwrite the
    random initialization with checkpoint values.
    """

    def __init__(self, config: ModelConfig, seed: int = 0, params=None):
        self.config = config
        self.tape = Tape()
        rng = Xoshiro256(seed)
        c = config
        self.box_embed = Projection(self.tape, rng, 4, c.embed,
                                    "relu", "box_embed")
        self.box_encoder = GruCell(self.tape, rng, c.embed, c.hidden,
                                   "box_encoder")
        if c.uses_flow:
            self.flow_embed = Projection(self.tape, rng, c.pooled_dim, c.embed,
                                         "relu", "flow_embed")
            self.flow_encoder = GruCell(self.tape, rng, c.embed, c.hidden,
                                        "flow_encoder")
        self.fuse = Projection(self.tape, rng, c.hidden, c.hidden,
                               "relu", "fuse")
        self.state_embed = Projection(self.tape, rng, c.hidden, c.embed,
                                      "relu", "state_embed")
        if c.uses_ego:
            self.ego_embed = Projection(self.tape, rng, 3, c.embed,
                                        "relu", "ego_embed")
        self.decoder = GruCell(self.tape, rng, c.embed, c.hidden, "decoder")
        self.head = Projection(self.tape, rng, c.hidden, 4, "none", "head")
        if params is not None:
            self.load_values(params)

    @property
    def params(self) -> dict[str, DiffArray]:
        modules = [self.box_embed, self.box_encoder]
        if self.config.uses_flow:
            modules += [self.flow_embed, self.flow_encoder]
        modules += [self.fuse, self.state_embed]
        if self.config.uses_ego:
            modules.append(self.ego_embed)
        modules += [self.decoder, self.head]
        merged: dict[str, DiffArray] = {}
        for module in modules:
            merged.update(module.params)
        return merged

    def parameter_values(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self.params.items()}

    def load_values(self, values) -> None:
        params = self.params
        missing = sorted(set(params) - set(values))
        extra = sorted(set(values) - set(params))
        if missing or extra:
            raise DataFormatError(
                f"checkpoint does not fit a {self.config.variant!r} model "
                f"(missing {missing}, unexpected {extra})")
        for name, p in params.items():
            arr = np.asarray(values[name], dtype=np.float64)
            if arr.shape != p.value.shape:
                raise DataFormatError(
                    f"parameter {name!r}: checkpoint shape {arr.shape} does "
                    f"not match model shape {p.value.shape}")
            p.value[...] = arr

    # --- forward passes ---------------------------------------------------

    def encode(self, boxes, flows=None):
        """Fused hidden state of the past window.

        `boxes` is [tau x 4] or [batch x tau x 4]; `flows` ([tau x pooled]
        or [batch x tau x pooled]) must be given exactly when the variant
        has a flow stream.
        """
        c = self.config
        boxes = np.asarray(boxes, dtype=np.float64)
        if boxes.ndim not in (2, 3) or boxes.shape[-2:] != (c.tau, 4):
            raise ValidationError(
                f"expected past boxes shaped [{c.tau} x 4], got {boxes.shape}")
        if c.uses_flow and flows is None:
            raise ValidationError(
                f"variant {c.variant!r} needs the pooled-flow stream")
        if not c.uses_flow and flows is not None:
            raise ValidationError(
                f"variant {c.variant!r} does not take a flow stream")
        batched = boxes.ndim == 3
        h = self._run_encoder(self.box_embed, self.box_encoder, boxes, batched)
        if c.uses_flow:
            flows = np.asarray(flows, dtype=np.float64)
            if (flows.ndim != boxes.ndim
                    or flows.shape[-2:] != (c.tau, c.pooled_dim)
                    or (batched and flows.shape[0] != boxes.shape[0])):
                raise ValidationError(
                    f"expected pooled flow shaped [{c.tau} x {c.pooled_dim}] "
                    f"matching the boxes, got {flows.shape}")
            h_flow = self._run_encoder(self.flow_embed, self.flow_encoder,
                                       flows, batched)
            h = 0.5 * (h + h_flow)
        return self.fuse(h)

    def _run_encoder(self, embed, cell, series, batched):
        if batched:
            h = np.zeros((series.shape[0], self.config.hidden))
        else:
            h = np.zeros(self.config.hidden)
        for t in range(self.config.tau):
            x = series[:, t, :] if batched else series[t]
            h = cell.step(embed(x), h)
        return h

    def decode_steps(self, fused, ego=None) -> list:
        """Unroll the decoder; one residual per future step.

        This is the differentiable core behind decode/predict: while the
        tape is recording, the entries are DiffArrays.
        """
        c = self.config
        if c.uses_ego and ego is None:
            raise ValidationError(
                f"variant {c.variant!r} needs {c.delta} future ego features")
        if not c.uses_ego and ego is not None:
            raise ValidationError(
                f"variant {c.variant!r} does not take ego features")
        value = fused.value if isinstance(fused, DiffArray) else np.asarray(fused)
        batched = value.ndim == 2
        if ego is not None:
            ego = np.asarray(ego, dtype=np.float64)
            expected = 3 if batched else 2
            if ego.ndim != expected or ego.shape[-2:] != (c.delta, 3):
                raise ValidationError(
                    f"expected {c.delta} ego features of width 3, "
                    f"got shape {ego.shape}")
            if batched and ego.shape[0] != value.shape[0]:
                raise ValidationError(
                    f"{ego.shape[0]} ego rows for {value.shape[0]} samples")
        h = fused
        residuals = []
        for i in range(c.delta):
            inp = self.state_embed(h)
            if ego is not None:
                step_ego = ego[:, i, :] if batched else ego[i]
                inp = 0.5 * (inp + self.ego_embed(step_ego))
            h = self.decoder.step(inp, h)
            residuals.append(self.head(h))
        return residuals

    def decode(self, fused, anchor, ego=None) -> Prediction:
        """Inference wrapper around decode_steps for a single sample."""
        anchor = np.asarray(anchor, dtype=np.float64)
        with self.tape.no_grad():
            steps = self.decode_steps(fused, ego)
        residuals = np.stack([np.asarray(s) for s in steps])
        return Prediction(anchor=anchor, residuals=residuals,
                          absolute=anchor + residuals)

    def predict(self, sample: Sample) -> Prediction:
        """Pure inference on one dataio sample (pixels in, normalized out)."""
        c = self.config
        if sample.tau != c.tau or sample.delta != c.delta:
            raise ValidationError(
                f"sample window ({sample.tau}, {sample.delta}) does not "
                f"match config ({c.tau}, {c.delta})")
        norm = normalize_sample(sample, sample.width, sample.height)
        boxes = np.array([b.as_array() for b in norm.past])
        flows = _flow_matrix(norm, c) if c.uses_flow else None
        ego = np.array([e.as_vector() for e in norm.ego]) if c.uses_ego else None
        with self.tape.no_grad():
            fused = self.encode(boxes, flows)
            steps = self.decode_steps(fused, ego)
        residuals = np.stack([np.asarray(s) for s in steps])
        anchor = norm.past[-1].as_array()
        return Prediction(anchor=anchor, residuals=residuals,
                          absolute=anchor + residuals)


def _flow_matrix(sample: Sample, config: ModelConfig) -> np.ndarray:
    mat = np.array([f.values for f in sample.flow])
    if mat.shape != (config.tau, config.pooled_dim):
        raise ValidationError(
            f"pooled flow is {mat.shape[-1]} wide, config expects "
            f"{config.pooled_dim} (lattice mismatch?)")
    return mat


# --- training -----------------------------------------------------------------


def _prepare(config: ModelConfig, samples) -> dict:
    """Stack normalized samples into training tensors, validating shapes."""
    boxes, anchors, targets = [], [], []
    flows, egos, future_px, scales = [], [], [], []
    for i, sample in enumerate(samples):
        if sample.tau != config.tau or sample.delta != config.delta:
            raise ValidationError(
                f"sample {i}: window ({sample.tau}, {sample.delta}) does not "
                f"match config ({config.tau}, {config.delta})")
        norm = normalize_sample(sample, sample.width, sample.height)
        past = np.array([b.as_array() for b in norm.past])
        future = np.array([b.as_array() for b in norm.future])
        boxes.append(past)
        anchors.append(past[-1])
        targets.append(future - past[-1])
        if config.uses_flow:
            try:
                flows.append(_flow_matrix(norm, config))
            except ValidationError as exc:
                raise ValidationError(f"sample {i}: {exc}") from None
        if config.uses_ego:
            egos.append(np.array([e.as_vector() for e in norm.ego]))
        future_px.append(np.array([b.as_array() for b in sample.future]))
        scales.append((sample.width, sample.height, sample.width, sample.height))
    return {
        "boxes": np.stack(boxes),
        "anchors": np.stack(anchors),
        "targets": np.stack(targets),
        "flows": np.stack(flows) if config.uses_flow else None,
        "egos": np.stack(egos) if config.uses_ego else None,
        "future_px": np.stack(future_px),
        "scales": np.asarray(scales, dtype=np.float64),
    }


def _batch_loss(model: BoxForecaster, data: dict, indices):
    c = model.config
    idx = np.asarray(indices, dtype=int)
    fused = model.encode(data["boxes"][idx],
                         data["flows"][idx] if c.uses_flow else None)
    steps = model.decode_steps(fused,
                               data["egos"][idx] if c.uses_ego else None)
    target = data["targets"][idx]
    total = mse_loss(steps[0], target[:, 0, :])
    for i in range(1, c.delta):
        total = dc.add(total, mse_loss(steps[i], target[:, i, :]))
    return dc.mul(total, 1.0 / c.delta)


def _pixel_ade(model: BoxForecaster, data: dict, indices) -> float:
    """Mean center displacement error in pixels over the indexed samples."""
    c = model.config
    idx = np.asarray(indices, dtype=int)
    with model.tape.no_grad():
        fused = model.encode(data["boxes"][idx],
                             data["flows"][idx] if c.uses_flow else None)
        steps = model.decode_steps(fused,
                                   data["egos"][idx] if c.uses_ego else None)
    residuals = np.stack([np.asarray(s) for s in steps], axis=1)
    absolute = data["anchors"][idx][:, None, :] + residuals
    pred_px = absolute * data["scales"][idx][:, None, :]
    truth = data["future_px"][idx]
    errors = np.hypot(pred_px[..., 0] - truth[..., 0],
                      pred_px[..., 1] - truth[..., 1])
    return float(errors.mean())


def train_model(config: ModelConfig, samples, epochs: int = 40,
                batch_size: int = 64, lr: float = 5e-4,
                seed: int = 0) -> TrainResult:
    """Mini-batch Adam on the MSE of future residuals.

    Weights come from `seed`; the validation split and every epoch
    shuffle come from a second stream derived from the same seed, so runs
    repeat bit-for-bit.  When the dataset has at least two samples, 10%
    (at least one) is held out and the epoch with the lowest held-out
    pixel ADE provides `best_params`; otherwise selection falls back to
    the training loss.
    """
    if epochs < 0:
        raise ValidationError(f"epochs must be >= 0, got {epochs}")
    if batch_size < 1:
        raise ValidationError(f"batch size must be >= 1, got {batch_size}")
    if not (math.isfinite(lr) and lr > 0):
        raise ValidationError(f"learning rate must be positive, got {lr}")
    samples = list(samples)
    if not samples:
        raise ValidationError("cannot train on an empty dataset")

    model = BoxForecaster(config, seed=seed)
    data = _prepare(config, samples)
    data_rng = Xoshiro256(seed ^ _DATA_STREAM)

    n = len(samples)
    order = data_rng.permutation(n)
    val_count = 0 if n < 2 else max(1, int(round(0.1 * n)))
    val_idx = sorted(order[:val_count])
    train_idx = sorted(order[val_count:])

    adam = Adam(model.params, lr=lr)
    train_losses: list[float] = []
    val_ades: list[float] = []
    best_epoch = -1
    best_score = math.inf
    best_params = model.parameter_values()
    for epoch in range(epochs):
        perm = data_rng.permutation(len(train_idx))
        shuffled = [train_idx[i] for i in perm]
        epoch_loss = 0.0
        for start in range(0, len(shuffled), batch_size):
            batch = shuffled[start:start + batch_size]
            model.tape.reset()
            loss = _batch_loss(model, data, batch)
            if not np.isfinite(loss.value):
                raise NumericFailure(
                    f"epoch {epoch} batch {start // batch_size}: "
                    f"loss is {float(loss.value)!r}")
            model.tape.backward(loss)
            try:
                adam.step()
            except NumericFailure as exc:
                raise NumericFailure(
                    f"epoch {epoch} batch {start // batch_size}: {exc}") from None
            epoch_loss += float(loss.value) * len(batch)
        train_losses.append(epoch_loss / len(shuffled))
        if val_idx:
            score = _pixel_ade(model, data, val_idx)
            val_ades.append(score)
        else:
            score = train_losses[-1]
            val_ades.append(math.nan)
        if score < best_score:
            best_score = score
            best_epoch = epoch
            best_params = model.parameter_values()
    return TrainResult(config=config, params=model.parameter_values(),
                       best_params=best_params, best_epoch=best_epoch,
                       train_losses=tuple(train_losses),
                       val_ades=tuple(val_ades),
                       train_indices=tuple(train_idx),
                       val_indices=tuple(val_idx))


# --- checkpoints ---------------------------------------------------------------
#
# A checkpoint is the nnkit binary weight file plus a `<path>.cfg` text
# sidecar recording the ModelConfig as key=value lines, so a file on disk
# is self-describing.


def save_model(path, config: ModelConfig, params) -> None:
    save_params(path, params)
    header = (f"variant={config.variant}\n"
              f"hidden={config.hidden}\n"
              f"embed={config.embed}\n"
              f"tau={config.tau}\n"
              f"delta={config.delta}\n"
              f"pooled_dim={config.pooled_dim}\n")
    Path(f"{path}.cfg").write_text(header)


def load_model(path) -> BoxForecaster:
    """Rebuild a forecaster from save_model output, verifying shapes."""
    cfg_path = Path(f"{path}.cfg")
    if not cfg_path.exists():
        raise DataFormatError(
            f"{cfg_path}: missing config header for checkpoint {path}")
    fields = {}
    for lineno, line in enumerate(cfg_path.read_text().splitlines()):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataFormatError(f"{cfg_path}:{lineno + 1}: expected key=value")
        key, value = line.split("=", 1)
        fields[key.strip()] = value.strip()
    try:
        config = ModelConfig(variant=fields["variant"],
                             hidden=int(fields["hidden"]),
                             embed=int(fields["embed"]),
                             tau=int(fields["tau"]),
                             delta=int(fields["delta"]),
                             pooled_dim=int(fields["pooled_dim"]))
    except (KeyError, ValueError, ValidationError) as exc:
        raise DataFormatError(f"{cfg_path}: {exc}") from None
    return BoxForecaster(config, params=load_params(path))


def gradient_check_model(config: ModelConfig, seed: int = 7,
                         step: float = 1e-6,
                         tolerance: float = 1e-4) -> GradCheckReport:
    """Check the full encode-decode gradient on one random sample."""
    model = BoxForecaster(config, seed=seed)
    rng = Xoshiro256(seed ^ _DATA_STREAM)
    boxes = rng.uniforms((config.tau, 4), 0.1, 0.9)
    flows = (rng.uniforms((config.tau, config.pooled_dim), -0.2, 0.2)
             if config.uses_flow else None)
    ego = (rng.uniforms((config.delta, 3), -0.5, 0.5)
           if config.uses_ego else None)
    target = rng.uniforms((config.delta, 4), -0.3, 0.3)

    def f():
        fused = model.encode(boxes, flows)
        steps = model.decode_steps(fused, ego)
        total = mse_loss(steps[0], target[0])
        for i in range(1, config.delta):
            total = dc.add(total, mse_loss(steps[i], target[i]))
        return dc.mul(total, 1.0 / config.delta)

    return grad_check(f, model.params, step=step, tolerance=tolerance)
