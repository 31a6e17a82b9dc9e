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

# dense linear algebra over small symmetric positive definite matrices

from dataclasses import dataclass
import logging

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from pyevidential.errors import (DimensionMismatch, DomainError,
                                 NotPositiveDefinite)

LOGGER = logging.getLogger(__name__)

# squared pivot below which a matrix is rejected (underflow guard)
PIVOT_TOLERANCE = 1e-300
SYMMETRY_TOLERANCE = 1e-12

Vector = np.ndarray
SymMatrix = np.ndarray


def as_vector(v, n: int = None) -> Vector:
    """
    Coerce to a finite float64 vector

    :param v: array-like
    :param n: expected dimension (optional)

    :returns: `numpy.ndarray` of shape (n,)
    """

    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.ndim != 1:
        raise DimensionMismatch(f'Expected a vector, got shape {v.shape}')
    if n is not None and v.shape[0] != n:
        raise DimensionMismatch(f'Expected dimension {n}, got {v.shape[0]}')
    if not np.all(np.isfinite(v)):
        raise DomainError('Vector has non-finite entries')
    return v


def as_sym_matrix(a) -> SymMatrix:
    """
    Coerce to a finite, symmetric float64 matrix

    Symmetry is checked to `SYMMETRY_TOLERANCE` relative to the largest
    entry (with a floor of one); the returned matrix is exactly symmetric.

    :param a: array-like (a scalar is read as a 1x1 matrix)

    :returns: `numpy.ndarray` of shape (n, n)
    """

    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f'Expected a square matrix, got {a.shape}')
    if not np.all(np.isfinite(a)):
        raise DomainError('Matrix has non-finite entries')

    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > SYMMETRY_TOLERANCE * scale:
        raise NotPositiveDefinite('Matrix is not symmetric')

    return 0.5 * (a + a.T)


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    """Lower-triangular factor L with strictly positive diagonal"""

    L: np.ndarray

    def __post_init__(self):
        L = np.asarray(self.L, dtype=float)
        if L.ndim == 0:
            L = L.reshape(1, 1)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise DimensionMismatch(f'Expected a square factor, got {L.shape}')
        if not np.all(np.isfinite(L)):
            raise DomainError('Factor has non-finite entries')
        if np.any(np.triu(L, 1) != 0):
            raise DomainError('Factor is not lower triangular')
        if np.any(np.diag(L) <= 0):
            raise NotPositiveDefinite('Factor diagonal must be positive')

        L = L.copy()
        L.setflags(write=False)
        object.__setattr__(self, 'L', L)

    @property
    def n(self) -> int:
        return self.L.shape[0]

    def matrix(self) -> SymMatrix:
        """
        Reconstruct L·Lᵀ

        :returns: `numpy.ndarray` of the SPD matrix
        """

        return self.L @ self.L.T

    def scaled(self, factor: float) -> 'CholeskyFactor':
        """
        Factor of `factor`·L·Lᵀ

        :param factor: positive scale

        :returns: `pyevidential.linalg.CholeskyFactor`
        """

        if factor <= 0:
            raise DomainError(f'Scale must be positive, got {factor}')
        return CholeskyFactor(np.sqrt(factor) * self.L)


def cholesky(a: SymMatrix) -> CholeskyFactor:
    """
    Cholesky factorization of a symmetric positive definite matrix

    :param a: symmetric matrix

    :returns: `pyevidential.linalg.CholeskyFactor`
    """

    a = as_sym_matrix(a)

    try:
        L = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as err:
        LOGGER.debug(f'Cholesky failed: {err}')
        raise NotPositiveDefinite(f'Matrix is not positive definite: {err}')

    pivots = np.diag(L) ** 2
    if np.any(~(pivots > PIVOT_TOLERANCE)):
        raise NotPositiveDefinite(f'Pivot below tolerance: {pivots.min()}')

    return CholeskyFactor(L)


def logdet(l: CholeskyFactor) -> float:
    """
    log-determinant of L·Lᵀ

    :param l: Cholesky factor

    :returns: `float` of 2·Σ log L_jj
    """

    return 2.0 * float(np.sum(np.log(np.diag(l.L))))


def spd_solve(l: CholeskyFactor, b: Vector) -> Vector:
    """
    Solve L·Lᵀ·x = b by forward/back substitution

    :param l: Cholesky factor
    :param b: right-hand side

    :returns: `numpy.ndarray` of x
    """

    b = as_vector(b, l.n)
    return cho_solve((l.L, True), b)


def whiten(l: CholeskyFactor, v: Vector) -> Vector:
    """
    Forward substitution L⁻¹·v, so that ‖L⁻¹v‖² = vᵀ(LLᵀ)⁻¹v

    :param l: Cholesky factor
    :param v: vector

    :returns: `numpy.ndarray` of L⁻¹·v
    """

    v = as_vector(v, l.n)
    return solve_triangular(l.L, v, lower=True)


def quad_form(l: CholeskyFactor, v: Vector) -> float:
    """
    Quadratic form vᵀ(LLᵀ)⁻¹v

    :param l: Cholesky factor
    :param v: vector

    :returns: `float`
    """

    z = whiten(l, v)
    return float(z @ z)


def sylvester_logdet_rank1(l: CholeskyFactor, c: float, v: Vector) -> float:
    """
    log|Ψ + c·vvᵀ| via Sylvester's determinant identity

    :param l: Cholesky factor of Ψ
    :param c: non-negative scale of the rank-1 update
    :param v: update vector

    :returns: `float` of logdet(Ψ) + log(1 + c·vᵀΨ⁻¹v)
    """

    if c < 0:
        raise DomainError(f'Rank-1 scale must be non-negative, got {c}')

    return logdet(l) + float(np.log1p(c * quad_form(l, v)))
