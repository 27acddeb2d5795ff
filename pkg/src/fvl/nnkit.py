"""Neural building blocks on top of the autodiff core.

A :class:`GruCell` and :class:`Projection` cover every learnable piece of
the forecasting models; :class:`Adam` trains them; :func:`mse_loss` scores
them.  Cells and projections operate on single vectors or on row-stacked
batches, dispatching on input rank, so the same code path serves
per-sample inference and batched training.

Parameter initialization is uniform fan-in: weights are drawn from
U(-1/sqrt(fan_in), +1/sqrt(fan_in)) elementwise in row-major order from a
single :class:`fvl.rng.Xoshiro256` stream, biases start at zero.  The
draw order is fixed by construction order, which makes a model's initial
state a pure function of its seed.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from . import diffcore as dc
from .diffcore import DiffArray, Tape
from .errors import DataFormatError, DimensionError, NumericFailure
from .rng import Xoshiro256

__all__ = [
    "GruCell",
    "Projection",
    "Adam",
    "mse_loss",
    "uniform_fan_in",
    "save_params",
    "load_params",
    "CHECKPOINT_MAGIC",
]

CHECKPOINT_MAGIC = b"FVLW"
CHECKPOINT_VERSION = 1


def uniform_fan_in(rng: Xoshiro256, out_size: int, in_size: int) -> np.ndarray:
    """Weight matrix [out x in] drawn uniformly within +-1/sqrt(in)."""
    bound = 1.0 / np.sqrt(in_size)
    return rng.uniforms((out_size, in_size), -bound, bound)


class Projection:
    """Linear map with optional relu: y = act(W x + b)."""

    def __init__(self, tape: Tape, rng: Xoshiro256, in_size: int, out_size: int,
                 activation: str = "relu", name: str = "proj"):
        if activation not in ("relu", "none"):
            raise ValueError(f"unknown activation {activation!r}")
        self.in_size = in_size
        self.out_size = out_size
        self.activation = activation
        self.name = name
        self.weight = tape.leaf(uniform_fan_in(rng, out_size, in_size),
                                name=f"{name}.weight")
        self.bias = tape.leaf(np.zeros(out_size), name=f"{name}.bias")

    @property
    def params(self) -> dict[str, DiffArray]:
        return {p.name: p for p in (self.weight, self.bias)}

    def __call__(self, x):
        if _rank(x) == 1:
            y = self.weight @ x + self.bias
        else:
            rows = _rows(x)
            y = dc.matmul(x, dc.transpose(self.weight)) + dc.tile_rows(self.bias, rows)
        return dc.relu(y) if self.activation == "relu" else y


class GruCell:
    """Gated recurrent unit over concatenated [input; hidden] vectors.

    Uses the reset-before-candidate formulation: the reset gate scales the
    previous hidden state inside the candidate's input.
    """

    def __init__(self, tape: Tape, rng: Xoshiro256, input_size: int,
                 hidden_size: int, name: str = "gru"):
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.name = name
        joint = input_size + hidden_size
        self.w_update = tape.leaf(uniform_fan_in(rng, hidden_size, joint),
                                  name=f"{name}.w_update")
        self.w_reset = tape.leaf(uniform_fan_in(rng, hidden_size, joint),
                                 name=f"{name}.w_reset")
        self.w_cand = tape.leaf(uniform_fan_in(rng, hidden_size, joint),
                                name=f"{name}.w_cand")
        self.b_update = tape.leaf(np.zeros(hidden_size), name=f"{name}.b_update")
        self.b_reset = tape.leaf(np.zeros(hidden_size), name=f"{name}.b_reset")
        self.b_cand = tape.leaf(np.zeros(hidden_size), name=f"{name}.b_cand")

    @property
    def params(self) -> dict[str, DiffArray]:
        return {p.name: p for p in (self.w_update, self.w_reset, self.w_cand,
                                    self.b_update, self.b_reset, self.b_cand)}

    def step(self, x, h_prev):
        """One recurrence update; returns the next hidden state.

        Accepts a single step ([input] with [hidden]) or a row-stacked
        batch ([B x input] with [B x hidden]).
        """
        if _last_dim(x) != self.input_size or _last_dim(h_prev) != self.hidden_size:
            raise DimensionError(
                f"{self.name}: expected input width {self.input_size} and hidden "
                f"width {self.hidden_size}, got {_shape(x)} and {_shape(h_prev)}")
        xh = dc.concat_last(x, h_prev)
        if _rank(x) == 1:
            z = dc.sigmoid(self.w_update @ xh + self.b_update)
            r = dc.sigmoid(self.w_reset @ xh + self.b_reset)
            xrh = dc.concat_last(x, r * h_prev)
            h_cand = dc.tanh(self.w_cand @ xrh + self.b_cand)
        else:
            rows = _rows(x)
            z = dc.sigmoid(dc.matmul(xh, dc.transpose(self.w_update))
                           + dc.tile_rows(self.b_update, rows))
            r = dc.sigmoid(dc.matmul(xh, dc.transpose(self.w_reset))
                           + dc.tile_rows(self.b_reset, rows))
            xrh = dc.concat_last(x, r * h_prev)
            h_cand = dc.tanh(dc.matmul(xrh, dc.transpose(self.w_cand))
                             + dc.tile_rows(self.b_cand, rows))
        return (1.0 - z) * h_prev + z * h_cand


class Adam:
    """Bias-corrected Adam over a named parameter set, updating in place."""

    def __init__(self, params: dict[str, DiffArray], lr: float = 5e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = {n: np.zeros_like(p.value) for n, p in params.items()}
        self._v = {n: np.zeros_like(p.value) for n, p in params.items()}

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        for name, p in self.params.items():
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise NumericFailure(f"non-finite gradient for parameter {name!r}")
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / (1.0 - self.beta1 ** t)
            v_hat = v / (1.0 - self.beta2 ** t)
            p.value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def mse_loss(pred, target):
    """Mean of squared differences over all elements; target is constant."""
    target = np.asarray(target, dtype=np.float64)
    pred_shape = pred.shape if isinstance(pred, DiffArray) else np.asarray(pred).shape
    if pred_shape != target.shape:
        raise DimensionError(
            f"mse_loss shapes differ: prediction {pred_shape} vs target {target.shape}")
    diff = dc.sub(pred, target)
    return dc.mean_all(dc.mul(diff, diff))


# --- checkpoint file format -------------------------------------------------
#
# Little-endian binary layout:
#   magic "FVLW" | u32 format version | u32 parameter count
#   per parameter:
#     u16 name length | name bytes (utf-8) | u8 rank | u32 dim per axis
#     | float64 values, row-major


def save_params(path, params: dict[str, np.ndarray | DiffArray]) -> None:
    path = Path(path)
    chunks = [CHECKPOINT_MAGIC,
              struct.pack("<II", CHECKPOINT_VERSION, len(params))]
    for name, p in params.items():
        # note: ascontiguousarray would promote 0-d arrays to 1-d
        arr = np.asarray(p.value if isinstance(p, DiffArray) else p,
                         dtype="<f8", order="C")
        name_bytes = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(name_bytes)))
        chunks.append(name_bytes)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    path.write_bytes(b"".join(chunks))


def load_params(path) -> dict[str, np.ndarray]:
    path = Path(path)
    data = path.read_bytes()

    def fail(offset: int, why: str):
        raise DataFormatError(f"{path}: {why} at offset {offset}")

    if data[:4] != CHECKPOINT_MAGIC:
        fail(0, f"bad magic {data[:4]!r}, expected {CHECKPOINT_MAGIC!r}")
    version, count = struct.unpack_from("<II", data, 4)
    if version != CHECKPOINT_VERSION:
        fail(4, f"unsupported checkpoint version {version}")
    offset = 12
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        try:
            (name_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            name = data[offset:offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<B", data, offset)
            offset += 1
            dims = struct.unpack_from(f"<{rank}I", data, offset)
            offset += 4 * rank
            size = int(np.prod(dims)) if rank else 1
            values = np.frombuffer(data, dtype="<f8", count=size, offset=offset)
            offset += 8 * size
        except (struct.error, ValueError) as exc:
            fail(offset, f"truncated parameter record ({exc})")
        params[name] = values.reshape(dims).astype(np.float64)
    if offset != len(data):
        fail(offset, f"{len(data) - offset} trailing bytes")
    return params


def _rank(x) -> int:
    return (x.value if isinstance(x, DiffArray) else np.asarray(x)).ndim


def _rows(x) -> int:
    return (x.value if isinstance(x, DiffArray) else np.asarray(x)).shape[0]


def _shape(x):
    return (x.value if isinstance(x, DiffArray) else np.asarray(x)).shape


def _last_dim(x) -> int:
    return _shape(x)[-1]
