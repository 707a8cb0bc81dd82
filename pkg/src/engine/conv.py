# src/engine/conv.py
"""2-D convolution and its transpose over NHWC tensors.

Both ops share three kernels: the forward correlation, its adjoint with respect to the
input, and its adjoint with respect to the kernel. Each is a fixed loop over the kh*kw
kernel offsets so the summation order never depends on data or thread count.
"""
from typing import Tuple

import numpy as np

from ..utils.errors import ShapeError
from .tensor import Function, Tensor

Pads = Tuple[int, int, int, int]


def same_padding(size: int, kernel: int, stride: int) -> Tuple[int, int, int]:
    """Output size and (before, after) pad; the odd pixel goes after"""
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    before = total // 2
    return out, before, total - before


def conv_geometry(height: int, width: int, kh: int, kw: int, stride: int,
                  padding: str) -> Tuple[int, int, Pads]:
    if stride < 1:
        raise ShapeError("conv2d", "stride", ">= 1", stride)
    if padding == "same":
        oh, top, bottom = same_padding(height, kh, stride)
        ow, left, right = same_padding(width, kw, stride)
        return oh, ow, (top, bottom, left, right)
    if padding == "valid":
        oh = (height - kh) // stride + 1
        ow = (width - kw) // stride + 1
        if oh < 1:
            raise ShapeError("conv2d", "height", f">= {kh}", height)
        if ow < 1:
            raise ShapeError("conv2d", "width", f">= {kw}", width)
        return oh, ow, (0, 0, 0, 0)
    raise ShapeError("conv2d", "padding", "same|valid", padding)


def _pad(x: np.ndarray, pads: Pads) -> np.ndarray:
    top, bottom, left, right = pads
    return np.pad(x, ((0, 0), (top, bottom), (left, right), (0, 0)))


def _window(i: int, j: int, oh: int, ow: int, stride: int):
    return (slice(None), slice(i, i + stride * (oh - 1) + 1, stride),
            slice(j, j + stride * (ow - 1) + 1, stride), slice(None))


def correlate(x: np.ndarray, kernels: np.ndarray, stride: int, pads: Pads,
              out_hw: Tuple[int, int]) -> np.ndarray:
    kh, kw, _, cout = kernels.shape
    oh, ow = out_hw
    padded = _pad(x, pads)
    out = np.zeros((x.shape[0], oh, ow, cout), dtype=np.result_type(x, kernels))
    for i in range(kh):
        for j in range(kw):
            out += np.tensordot(padded[_window(i, j, oh, ow, stride)], kernels[i, j],
                                axes=([3], [0]))
    return out


def correlate_input_adjoint(grad: np.ndarray, kernels: np.ndarray, stride: int,
                            pads: Pads, in_shape: Tuple[int, ...]) -> np.ndarray:
    kh, kw, cin, _ = kernels.shape
    n, height, width, _ = in_shape
    top, bottom, left, right = pads
    oh, ow = grad.shape[1], grad.shape[2]
    padded = np.zeros((n, height + top + bottom, width + left + right, cin),
                      dtype=np.result_type(grad, kernels))
    for i in range(kh):
        for j in range(kw):
            padded[_window(i, j, oh, ow, stride)] += np.tensordot(
                grad, kernels[i, j], axes=([3], [1]))
    return padded[:, top:top + height, left:left + width, :]


def correlate_kernel_adjoint(x: np.ndarray, grad: np.ndarray, stride: int, pads: Pads,
                             kernel_shape: Tuple[int, ...]) -> np.ndarray:
    kh, kw = kernel_shape[0], kernel_shape[1]
    oh, ow = grad.shape[1], grad.shape[2]
    padded = _pad(x, pads)
    dk = np.zeros(kernel_shape, dtype=np.result_type(x, grad))
    for i in range(kh):
        for j in range(kw):
            dk[i, j] = np.tensordot(padded[_window(i, j, oh, ow, stride)], grad,
                                    axes=([0, 1, 2], [0, 1, 2]))
    return dk


def _check_operands(op: str, x: np.ndarray, kernels: np.ndarray, bias: np.ndarray,
                    in_axis: int, out_axis: int):
    if x.ndim != 4:
        raise ShapeError(op, "rank", 4, x.ndim)
    if kernels.ndim != 4:
        raise ShapeError(op, "kernel_rank", 4, kernels.ndim)
    if kernels.shape[in_axis] != x.shape[3]:
        raise ShapeError(op, "in_channels", kernels.shape[in_axis], x.shape[3])
    if bias.shape != (kernels.shape[out_axis],):
        raise ShapeError(op, "out_channels", (kernels.shape[out_axis],), bias.shape)


class Conv2D(Function):
    def forward(self, x, kernels, bias):
        _check_operands("conv2d", x, kernels, bias, in_axis=2, out_axis=3)
        kh, kw = kernels.shape[:2]
        oh, ow, self.pads = conv_geometry(x.shape[1], x.shape[2], kh, kw, self.stride,
                                          self.padding)
        self.x, self.kernels = x, kernels
        return correlate(x, kernels, self.stride, self.pads, (oh, ow)) + bias

    def backward(self, grad):
        dx = correlate_input_adjoint(grad, self.kernels, self.stride, self.pads, self.x.shape)
        dk = correlate_kernel_adjoint(self.x, grad, self.stride, self.pads, self.kernels.shape)
        return dx, dk, grad.sum(axis=(0, 1, 2))


class Conv2DTranspose(Function):
    """Adjoint of Conv2D's linear map; kernels are laid out (kh, kw, out_ch, in_ch)"""

    def forward(self, x, kernels, bias):
        _check_operands("conv2d_transpose", x, kernels, bias, in_axis=3, out_axis=2)
        kh, kw, cout, _ = kernels.shape
        n, height, width, _ = x.shape
        s = self.stride
        if self.padding == "same":
            out_h, out_w = height * s, width * s
        elif self.padding == "valid":
            out_h, out_w = (height - 1) * s + kh, (width - 1) * s + kw
        else:
            raise ShapeError("conv2d_transpose", "padding", "same|valid", self.padding)
        _, _, self.pads = conv_geometry(out_h, out_w, kh, kw, s, self.padding)
        self.x, self.kernels = x, kernels
        out = correlate_input_adjoint(x, kernels, s, self.pads, (n, out_h, out_w, cout))
        return out + bias

    def backward(self, grad):
        dx = correlate(grad, self.kernels, self.stride, self.pads, self.x.shape[1:3])
        dk = correlate_kernel_adjoint(grad, self.x, self.stride, self.pads, self.kernels.shape)
        return dx, dk, grad.sum(axis=(0, 1, 2))


def conv2d(x: Tensor, kernels: Tensor, bias: Tensor, stride: int = 1,
           padding: str = "same") -> Tensor:
    return Conv2D.apply(x, kernels, bias, stride=stride, padding=padding)


def conv2d_transpose(x: Tensor, kernels: Tensor, bias: Tensor, stride: int = 1,
                     padding: str = "same") -> Tensor:
    return Conv2DTranspose.apply(x, kernels, bias, stride=stride, padding=padding)
