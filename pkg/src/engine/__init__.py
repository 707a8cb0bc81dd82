# src/engine/__init__.py
from .tensor import Function, Graph, Node, Tensor, backward, current_graph
from .ops import (add, clip, dense, exp, flatten, log, matmul, mul, reduce_mean,
                  reduce_sum, relu, reshape, scale, sigma_eps, sigmoid, sqrt_sigma_eps,
                  square, sub)
from .conv import conv2d, conv2d_transpose, same_padding
