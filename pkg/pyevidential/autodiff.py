###############################################################################
#
# Authors: pyevidential contributors
#
# Copyright (c) 2026 pyevidential contributors
#
# Licensed to the Apache Software Foundation (ASF) under one
# or more contributor license agreements.  See the NOTICE file
# distributed with this work for additional information
# regarding copyright ownership.  The ASF licenses this file
# to you under the Apache License, Version 2.0 (the
# "License"); you may not use this file except in compliance
# with the License.  You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing,
# software distributed under the License is distributed on an
# "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
# KIND, either express or implied.  See the License for the
# specific language governing permissions and limitations
# under the License.
#
###############################################################################

# reverse-mode automatic differentiation over numpy arrays

import logging

import numpy as np

LOGGER = logging.getLogger(__name__)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`"""

    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """stores an array value and its gradient"""

    def __init__(self, value, _children=(), _op=''):
        self.value = np.asarray(value, dtype=float)
        self.grad = np.zeros_like(self.value)
        # internal variables used for graph construction
        self._backward = lambda: None
        self._prev = tuple(_children)
        self._op = _op

    @classmethod
    def custom(cls, value, parents: tuple, backward, op: str = 'custom'):
        """
        Node with a user-supplied vector-Jacobian product

        :param value: output value
        :param parents: input `Tensor`s
        :param backward: callable mapping the output gradient to a `list` of
                         gradients, one per parent
        :param op: label

        :returns: `pyevidential.autodiff.Tensor`
        """

        out = cls(value, parents, op)

        def _backward():
            for parent, grad in zip(parents, backward(out.grad)):
                parent.grad += _unbroadcast(np.asarray(grad),
                                            parent.value.shape)
        out._backward = _backward

        return out

    def __add__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.value + other.value, (self, other), '+')

        def _backward():
            self.grad += _unbroadcast(out.grad, self.value.shape)
            other.grad += _unbroadcast(out.grad, other.value.shape)
        out._backward = _backward

        return out

    def __matmul__(self, other):
        out = Tensor(self.value @ other.value, (self, other), '@')

        def _backward():
            self.grad += out.grad @ other.value.T
            other.grad += self.value.T @ out.grad
        out._backward = _backward

        return out

    def relu(self):
        mask = self.value > 0
        out = Tensor(np.where(mask, self.value, 0.0), (self,), 'ReLU')

        def _backward():
            self.grad += mask * out.grad
        out._backward = _backward

        return out

    def backward(self):

        # topological order all of the children in the graph
        topo = []
        visited = set()

        def build_topo(v):
            if id(v) not in visited:
                visited.add(id(v))
                for child in v._prev:
                    build_topo(child)
                topo.append(v)
        build_topo(self)

        # go one node at a time and apply the chain rule
        self.grad = np.ones_like(self.value)
        for v in reversed(topo):
            v._backward()

    def __repr__(self):
        return f'Tensor(shape={self.value.shape}, op={self._op!r})'
