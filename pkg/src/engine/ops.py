# src/engine/ops.py
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from ..utils.errors import ShapeError
from .tensor import Function, Tensor

Operand = Union[Tensor, float, int]


def as_tensor(value: Operand, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.dtype))


def _broadcast_kind(op: str, a: np.ndarray, b: np.ndarray) -> str:
    # Only same-shape, scalar and trailing-channel bias operands are supported.
    if a.shape == b.shape:
        return "same"
    if b.ndim == 0:
        return "scalar"
    if b.ndim == 1 and a.ndim >= 1 and b.shape[0] == a.shape[-1]:
        return "bias"
    axis = "channel" if b.ndim == 1 else "shape"
    raise ShapeError(op, axis, a.shape, b.shape)


def _reduce_to(grad: np.ndarray, kind: str) -> np.ndarray:
    if kind == "same":
        return grad
    if kind == "scalar":
        return np.asarray(grad.sum(), dtype=grad.dtype)
    return grad.reshape(-1, grad.shape[-1]).sum(axis=0)


class Add(Function):
    def forward(self, a, b):
        self.kind = _broadcast_kind("add", a, b)
        return a + b

    def backward(self, grad):
        return grad, _reduce_to(grad, self.kind)


class Sub(Function):
    def forward(self, a, b):
        self.kind = _broadcast_kind("sub", a, b)
        return a - b

    def backward(self, grad):
        return grad, -_reduce_to(grad, self.kind)


class Mul(Function):
    def forward(self, a, b):
        self.kind = _broadcast_kind("mul", a, b)
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return grad * self.b, _reduce_to(grad * self.a, self.kind)


class Scale(Function):
    def forward(self, a):
        return a * np.asarray(self.factor, dtype=a.dtype)

    def backward(self, grad):
        return (grad * np.asarray(self.factor, dtype=grad.dtype),)


class Exp(Function):
    def forward(self, a):
        self.out = np.exp(a)
        return self.out

    def backward(self, grad):
        return (grad * self.out,)


class Log(Function):
    def forward(self, a):
        self.a = a
        return np.log(a)

    def backward(self, grad):
        return (grad / self.a,)


class Square(Function):
    def forward(self, a):
        self.a = a
        return a * a

    def backward(self, grad):
        return (2 * grad * self.a,)


class Relu(Function):
    def forward(self, a):
        self.mask = a > 0
        return np.where(self.mask, a, np.zeros_like(a))

    def backward(self, grad):
        return (grad * self.mask,)


class Sigmoid(Function):
    def forward(self, a):
        self.out = expit(a)
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1 - self.out),)


class Clip(Function):
    def forward(self, a):
        self.mask = (a >= self.low) & (a <= self.high)
        return np.clip(a, self.low, self.high)

    def backward(self, grad):
        return (grad * self.mask,)


class MatMul(Function):
    def forward(self, a, b):
        if a.ndim != 2 or b.ndim != 2:
            raise ShapeError("matmul", "rank", 2, (a.ndim, b.ndim))
        if a.shape[1] != b.shape[0]:
            raise ShapeError("matmul", "inner", a.shape[1], b.shape[0])
        self.a, self.b = a, b
        return a @ b

    def backward(self, grad):
        return grad @ self.b.T, self.a.T @ grad


class Reshape(Function):
    def forward(self, a):
        self.in_shape = a.shape
        target = tuple(self.shape)
        if -1 not in target and int(np.prod(target)) != a.size:
            raise ShapeError("reshape", "size", a.size, int(np.prod(target)))
        if -1 in target:
            known = int(np.prod([d for d in target if d != -1]))
            if known == 0 or a.size % known:
                raise ShapeError("reshape", "size", a.size, target)
        return a.reshape(target)

    def backward(self, grad):
        return (grad.reshape(self.in_shape),)


class ReduceSum(Function):
    def forward(self, a):
        self.in_shape = a.shape
        return np.sum(a, axis=self.axes)

    def backward(self, grad):
        expanded = np.expand_dims(grad, self.axes) if self.axes is not None else grad
        return (np.broadcast_to(expanded, self.in_shape).copy(),)


class ReduceMean(Function):
    def forward(self, a):
        self.in_shape = a.shape
        axes = self.axes if self.axes is not None else tuple(range(a.ndim))
        self.count = int(np.prod([a.shape[ax] for ax in axes]))
        return np.mean(a, axis=self.axes)

    def backward(self, grad):
        expanded = np.expand_dims(grad, self.axes) if self.axes is not None else grad
        scaled = expanded / np.asarray(self.count, dtype=grad.dtype)
        return (np.broadcast_to(scaled, self.in_shape).copy(),)


def _axes(axes) -> Union[None, Tuple[int, ...]]:
    if axes is None:
        return None
    if isinstance(axes, int):
        return (axes,)
    return tuple(axes)


def add(a: Tensor, b: Operand) -> Tensor:
    return Add.apply(a, as_tensor(b, a))


def sub(a: Tensor, b: Operand) -> Tensor:
    return Sub.apply(a, as_tensor(b, a))


def mul(a: Tensor, b: Operand) -> Tensor:
    return Mul.apply(a, as_tensor(b, a))


def scale(a: Tensor, factor: float) -> Tensor:
    return Scale.apply(a, factor=factor)


def exp(a: Tensor) -> Tensor:
    return Exp.apply(a)


def log(a: Tensor) -> Tensor:
    return Log.apply(a)


def square(a: Tensor) -> Tensor:
    return Square.apply(a)


def relu(a: Tensor) -> Tensor:
    return Relu.apply(a)


def sigmoid(a: Tensor) -> Tensor:
    return Sigmoid.apply(a)


def clip(a: Tensor, low: float, high: float) -> Tensor:
    return Clip.apply(a, low=low, high=high)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return MatMul.apply(a, b)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(a, shape=tuple(shape))


def flatten(a: Tensor) -> Tensor:
    """Collapse every axis after the batch axis"""
    return reshape(a, (a.shape[0], -1))


def reduce_sum(a: Tensor, axes=None) -> Tensor:
    return ReduceSum.apply(a, axes=_axes(axes))


def reduce_mean(a: Tensor, axes=None) -> Tensor:
    return ReduceMean.apply(a, axes=_axes(axes))


def dense(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    if bias.shape != (weights.shape[-1],):
        raise ShapeError("dense", "out_features", (weights.shape[-1],), bias.shape)
    return add(matmul(x, weights), bias)


def sigma_eps(mu: Tensor, log_var: Tensor, eps: Tensor) -> Tensor:
    """mu + exp(log_var / 2) * eps"""
    return add(mu, mul(exp(scale(log_var, 0.5)), eps))


def sqrt_sigma_eps(mu: Tensor, log_var: Tensor, eps: Tensor) -> Tensor:
    """mu + sqrt(sigma) * eps, the square-root reading of the perturbation"""
    return add(mu, mul(exp(scale(log_var, 0.25)), eps))
