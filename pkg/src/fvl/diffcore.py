"""Reverse-mode automatic differentiation over dense float64 arrays.

This is the numerical core the rest of the package trains on: a dynamic
tape that records one backward closure per primitive, replayed in reverse
order by :meth:`Tape.backward`.  It is deliberately small.  Supported
primitives are matrix products, a handful of elementwise functions
(add, sub, mul, sigmoid, tanh, relu), concatenation, row tiling,
transpose, and full reductions.  Broadcasting is restricted to exact
shape match or scalar-with-array so every backward rule stays auditable;
the one structural exception is :func:`tile_rows`, an explicit primitive
whose adjoint is a row sum.

Gradient semantics follow the usual tape convention: leaf adjoints
accumulate across repeated :meth:`Tape.backward` calls, intermediate
adjoints are recomputed fresh on each call, and :meth:`Tape.reset`
clears the recording and zeroes every adjoint exactly.

Everything is float64.  A tape and the arrays it owns are confined to a
single thread; run one tape per worker if you want parallelism.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ValidationError

__all__ = [
    "DiffArray",
    "Tape",
    "GradCheckReport",
    "matmul",
    "add",
    "sub",
    "mul",
    "sigmoid",
    "tanh",
    "relu",
    "concat_last",
    "tile_rows",
    "transpose",
    "sum_all",
    "mean_all",
    "grad_check",
]


class DiffArray:
    """A float64 array plus an adjoint buffer, registered on a tape.

    ``grad`` is allocated lazily so that forward-only evaluation never
    pays for adjoint storage.
    """

    __slots__ = ("value", "_grad", "tape", "node_id", "is_leaf", "name")

    # Keep numpy from absorbing us in mixed expressions like `ndarray + leaf`;
    # returning NotImplemented routes those through our reflected operators.
    __array_ufunc__ = None

    def __init__(self, value: np.ndarray, tape: "Tape", node_id: int,
                 is_leaf: bool, name: str | None = None):
        self.value = value
        self._grad: np.ndarray | None = None
        self.tape = tape
        self.node_id = node_id
        self.is_leaf = is_leaf
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            self._grad = np.zeros(self.value.shape, dtype=np.float64)
        return self._grad

    @grad.setter
    def grad(self, value: np.ndarray) -> None:
        self._grad = value

    def zero_grad(self) -> None:
        if self._grad is not None:
            self._grad[...] = 0.0

    def __repr__(self) -> str:
        tag = self.name or ("leaf" if self.is_leaf else "node")
        return f"DiffArray({tag}#{self.node_id}, shape={self.shape})"

    # Arithmetic sugar; delegates to the module-level primitives.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, -1.0)


class Tape:
    """Ordered record of primitive applications for one forward pass.

    Leaves (parameters) persist across passes; intermediates belong to
    the current recording and are discarded on :meth:`reset`.
    """

    def __init__(self):
        self._leaves: list[DiffArray] = []
        self._nodes: list[DiffArray] = []
        self._backward_ops: list = []
        self._next_id = 0
        self.recording = True

    def leaf(self, value, name: str | None = None) -> DiffArray:
        """Register a persistent differentiable array (a parameter)."""
        arr = np.array(value, dtype=np.float64)
        node = DiffArray(arr, self, self._next_id, is_leaf=True, name=name)
        self._next_id += 1
        self._leaves.append(node)
        return node

    def _intermediate(self, value: np.ndarray) -> DiffArray:
        node = DiffArray(value, self, self._next_id, is_leaf=False)
        self._next_id += 1
        self._nodes.append(node)
        return node

    def _record(self, backward_fn) -> None:
        self._backward_ops.append(backward_fn)

    @contextmanager
    def no_grad(self):
        """Run forward code without recording; primitives return ndarrays."""
        previous = self.recording
        self.recording = False
        try:
            yield
        finally:
            self.recording = previous

    def backward(self, loss: DiffArray) -> None:
        """Populate adjoints of everything reachable from a scalar loss.

        Leaf adjoints accumulate across calls; intermediate adjoints are
        rebuilt from zero on every call, which makes backward(l1) followed
        by backward(l2) equal to backward(l1 + l2) on the leaves.
        """
        if not isinstance(loss, DiffArray) or loss.tape is not self:
            raise ValidationError("backward requires a DiffArray recorded on this tape")
        if loss.shape != ():
            raise ValidationError(
                f"backward requires a scalar loss, got shape {loss.shape}")
        for node in self._nodes:
            node.zero_grad()
        loss.grad[...] += 1.0
        for fn in reversed(self._backward_ops):
            fn()

    def reset(self) -> None:
        """Drop the recording and restore every adjoint to exactly zero."""
        for node in self._leaves:
            node.zero_grad()
        self._nodes.clear()
        self._backward_ops.clear()


def _value(x) -> np.ndarray:
    if isinstance(x, DiffArray):
        return x.value
    return np.asarray(x, dtype=np.float64)


def _context(*args) -> Tape | None:
    """The recording tape of the first DiffArray argument, if any."""
    for a in args:
        if isinstance(a, DiffArray):
            return a.tape if a.tape.recording else None
    return None


def _accumulate(x, g: np.ndarray) -> None:
    """Add an adjoint contribution, reducing over a scalar operand."""
    if not isinstance(x, DiffArray):
        return
    if x.shape == g.shape:
        x.grad += g
    else:  # scalar operand against an array result
        x.grad += g.sum()


def _check_elementwise(av: np.ndarray, bv: np.ndarray, op: str) -> None:
    if av.shape != bv.shape and av.shape != () and bv.shape != ():
        raise DimensionError(
            f"{op}: shapes {av.shape} and {bv.shape} are neither equal "
            f"nor scalar-with-array")


def add(a, b):
    av, bv = _value(a), _value(b)
    _check_elementwise(av, bv, "add")
    tape = _context(a, b)
    out_value = av + bv
    if tape is None:
        return out_value
    out = tape._intermediate(out_value)

    def backward():
        g = out.grad
        _accumulate(a, g)
        _accumulate(b, g)

    tape._record(backward)
    return out


def sub(a, b):
    av, bv = _value(a), _value(b)
    _check_elementwise(av, bv, "sub")
    tape = _context(a, b)
    out_value = av - bv
    if tape is None:
        return out_value
    out = tape._intermediate(out_value)

    def backward():
        g = out.grad
        _accumulate(a, g)
        _accumulate(b, -g)

    tape._record(backward)
    return out


def mul(a, b):
    av, bv = _value(a), _value(b)
    _check_elementwise(av, bv, "mul")
    tape = _context(a, b)
    out_value = av * bv
    if tape is None:
        return out_value
    out = tape._intermediate(out_value)

    def backward():
        g = out.grad
        _accumulate(a, g * bv)
        _accumulate(b, g * av)

    tape._record(backward)
    return out


def sigmoid(x):
    xv = _value(x)
    with np.errstate(over="ignore", invalid="ignore"):
        s = np.where(xv >= 0.0,
                     1.0 / (1.0 + np.exp(-xv)),
                     np.exp(xv) / (1.0 + np.exp(xv)))
    tape = _context(x)
    if tape is None:
        return s
    out = tape._intermediate(s)

    def backward():
        _accumulate(x, out.grad * s * (1.0 - s))

    tape._record(backward)
    return out


def tanh(x):
    xv = _value(x)
    t = np.tanh(xv)
    tape = _context(x)
    if tape is None:
        return t
    out = tape._intermediate(t)

    def backward():
        _accumulate(x, out.grad * (1.0 - t * t))

    tape._record(backward)
    return out


def relu(x):
    xv = _value(x)
    tape = _context(x)
    out_value = np.maximum(xv, 0.0)
    if tape is None:
        return out_value
    out = tape._intermediate(out_value)
    # relu'(0) is defined as 0: the mask is strict.
    mask = xv > 0.0

    def backward():
        _accumulate(x, out.grad * mask)

    tape._record(backward)
    return out


def matmul(a, b):
    """Matrix product of a 2-d left operand with a 1-d or 2-d right operand."""
    av, bv = _value(a), _value(b)
    if av.ndim != 2 or bv.ndim not in (1, 2):
        raise DimensionError(
            f"matmul supports [m x k] @ [k] or [m x k] @ [k x n], "
            f"got shapes {av.shape} and {bv.shape}")
    if av.shape[1] != bv.shape[0]:
        raise DimensionError(
            f"matmul inner dimensions differ: {av.shape} vs {bv.shape}")
    tape = _context(a, b)
    out_value = av @ bv
    if tape is None:
        return out_value
    out = tape._intermediate(out_value)

    def backward():
        g = out.grad
        if isinstance(a, DiffArray):
            a.grad += g @ bv.T if bv.ndim == 2 else np.outer(g, bv)
        if isinstance(b, DiffArray):
            b.grad += av.T @ g

    tape._record(backward)
    return out


def concat_last(a, b):
    """Concatenate along the last axis (two vectors, or two matrices with
    equal row counts)."""
    av, bv = _value(a), _value(b)
    if av.ndim != bv.ndim or av.ndim not in (1, 2):
        raise DimensionError(
            f"concat_last needs two 1-d or two 2-d arrays, got shapes "
            f"{av.shape} and {bv.shape}")
    if av.ndim == 2 and av.shape[0] != bv.shape[0]:
        raise DimensionError(
            f"concat_last row counts differ: {av.shape} vs {bv.shape}")
    tape = _context(a, b)
    out_value = np.concatenate([av, bv], axis=-1)
    if tape is None:
        return out_value
    out = tape._intermediate(out_value)
    split = av.shape[-1]

    def backward():
        g = out.grad
        _accumulate(a, g[..., :split])
        _accumulate(b, g[..., split:])

    tape._record(backward)
    return out


def tile_rows(x, count: int):
    """Stack `count` copies of a vector into a matrix.

    The adjoint of a row tiling is the sum over rows, stated here
    explicitly instead of relying on implicit broadcasting.
    """
    xv = _value(x)
    if xv.ndim != 1:
        raise DimensionError(f"tile_rows expects a vector, got shape {xv.shape}")
    if count < 1:
        raise ValidationError(f"tile_rows count must be >= 1, got {count}")
    tape = _context(x)
    out_value = np.tile(xv, (count, 1))
    if tape is None:
        return out_value
    out = tape._intermediate(out_value)

    def backward():
        _accumulate(x, out.grad.sum(axis=0))

    tape._record(backward)
    return out


def transpose(x):
    xv = _value(x)
    if xv.ndim != 2:
        raise DimensionError(f"transpose expects a matrix, got shape {xv.shape}")
    tape = _context(x)
    if tape is None:
        return xv.T.copy()
    out = tape._intermediate(xv.T.copy())

    def backward():
        _accumulate(x, out.grad.T)

    tape._record(backward)
    return out


def sum_all(x):
    """Sum of all elements, as a 0-d scalar."""
    xv = _value(x)
    tape = _context(x)
    out_value = np.asarray(xv.sum())
    if tape is None:
        return out_value
    out = tape._intermediate(out_value)

    def backward():
        if isinstance(x, DiffArray):
            x.grad += out.grad  # 0-d broadcasts over the operand

    tape._record(backward)
    return out


def mean_all(x):
    """Mean of all elements, as a 0-d scalar."""
    xv = _value(x)
    n = xv.size
    tape = _context(x)
    out_value = np.asarray(xv.sum() / n)
    if tape is None:
        return out_value
    out = tape._intermediate(out_value)

    def backward():
        if isinstance(x, DiffArray):
            x.grad += out.grad / n

    tape._record(backward)
    return out


@dataclass
class GradCheckReport:
    """Per-parameter agreement between analytic adjoints and central
    finite differences.  Relative error is |a - n| / max(1, |a|, |n|)."""

    step: float
    tolerance: float
    per_parameter: dict[str, float] = field(default_factory=dict)

    @property
    def max_rel_error(self) -> float:
        return max(self.per_parameter.values(), default=0.0)

    @property
    def worst_parameter(self) -> str:
        if not self.per_parameter:
            return ""
        return max(self.per_parameter, key=self.per_parameter.get)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [f"gradient check: {status} "
                 f"(max rel err {self.max_rel_error:.3e}, tol {self.tolerance:.1e})"]
        width = max((len(n) for n in self.per_parameter), default=0)
        for name, err in sorted(self.per_parameter.items()):
            lines.append(f"  {name:<{width}}  {err:.3e}")
        return "\n".join(lines)


def grad_check(f, params, step: float = 1e-6,
               tolerance: float = 1e-4) -> GradCheckReport:
    """Compare analytic gradients of ``f`` against central finite differences.

    ``f`` takes no arguments, reads the given parameter leaves, and returns
    a scalar loss.  ``params`` is a mapping of names to leaves (or a plain
    sequence).  Parameter values are perturbed in place and restored
    bit-exactly.  The caller is responsible for keeping relu inputs away
    from their kink; points within finite-difference reach of 0 make the
    numeric estimate meaningless.
    """
    if step <= 0:
        raise ValidationError(f"finite-difference step must be positive, got {step}")
    if not isinstance(params, dict):
        params = {f"param{i}": p for i, p in enumerate(params)}
    if not params:
        raise ValidationError("grad_check needs at least one parameter")
    tape = next(iter(params.values())).tape

    tape.reset()
    loss = f()
    tape.backward(loss)
    analytic = {name: p.grad.copy() for name, p in params.items()}
    tape.reset()

    report = GradCheckReport(step=step, tolerance=tolerance)
    for name, p in params.items():
        flat = p.value.reshape(-1)
        grads = analytic[name].reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            with tape.no_grad():
                loss_plus = float(_value(f()))
            flat[i] = original - step
            with tape.no_grad():
                loss_minus = float(_value(f()))
            flat[i] = original
            numeric = (loss_plus - loss_minus) / (2.0 * step)
            a = grads[i]
            rel = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            if rel > worst:
                worst = rel
        report.per_parameter[name] = worst
    return report
