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

# loss functions with closed-form gradients

from dataclasses import dataclass
from enum import Enum
import logging

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import digamma, gammaln

from pyevidential.distributions import (EvidentialParams, NigParams,
                                        model_evidence_logpdf)
from pyevidential.errors import DimensionMismatch, DomainError
from pyevidential.linalg import (CholeskyFactor, SymMatrix, Vector,
                                 as_vector, sylvester_logdet_rank1)

LOGGER = logging.getLogger(__name__)


class EvidenceKind(Enum):
    """Definition of the total evidence Φ used by the regularizer"""

    LEGACY = 'legacy'  # Φ = 2κ + α
    VIRTUAL = 'virtual'  # Φ′ = κ + 2α (univariate), κ + ν (multivariate)
    NONE = 'none'


@dataclass(frozen=True)
class RegularizerConfig:
    """Evidence regularizer: coupling λ and the Φ definition"""

    coupling: float = 0.0
    evidence_kind: EvidenceKind = EvidenceKind.NONE

    def __post_init__(self):
        if not (np.isfinite(self.coupling) and self.coupling >= 0):
            raise DomainError(f'coupling must be >= 0, got {self.coupling}')
        object.__setattr__(self, 'evidence_kind',
                           EvidenceKind(self.evidence_kind))


@dataclass(frozen=True, eq=False)
class LossValue:
    """Loss value and gradient aligned with the producing parameter layout"""

    value: float
    gradients: np.ndarray


@dataclass(frozen=True, eq=False)
class UncertaintyReport:
    """Prediction with aleatoric and epistemic covariances"""

    prediction: Vector
    aleatoric: SymMatrix
    epistemic: SymMatrix
    nu: float


def tril_size(n: int) -> int:
    """Number of free entries of an n×n lower-triangular matrix"""

    return n * (n + 1) // 2


def head_output_size(n: int) -> int:
    """Number of raw outputs for μ₀, ℓ and ν: n(n+3)/2 + 1"""

    return n * (n + 3) // 2 + 1


def factor_from_ell(ell, n: int) -> np.ndarray:
    """
    Lower-triangular L from ℓ (row-major lower triangle, log-diagonal)

    :param ell: array of shape (..., n(n+1)/2)
    :param n: dimension

    :returns: `numpy.ndarray` of shape (..., n, n)
    """

    ell = np.asarray(ell, dtype=float)
    if ell.shape[-1] != tril_size(n):
        raise DimensionMismatch(
            f'ell needs {tril_size(n)} entries, got {ell.shape[-1]}')

    rows, cols = np.tril_indices(n)
    L = np.zeros(ell.shape[:-1] + (n, n))
    L[..., rows, cols] = ell
    diag = np.arange(n)
    L[..., diag, diag] = np.exp(ell[..., rows == cols])

    return L


@dataclass(frozen=True, eq=False)
class CoupledHeadParams:
    """Evidential head output (μ₀, ℓ, ν) with the global coupling r"""

    mu0: Vector
    ell: np.ndarray
    nu: float
    r: float

    def __post_init__(self):
        mu0 = np.array(as_vector(self.mu0))
        ell = np.array(as_vector(self.ell))
        if ell.shape[0] != tril_size(mu0.shape[0]):
            raise DimensionMismatch(
                f'ell needs {tril_size(mu0.shape[0])} entries, '
                f'got {ell.shape[0]}')
        if not (np.isfinite(self.r) and self.r > 0):
            raise DomainError(f'r must be positive, got {self.r}')
        if not np.isfinite(self.nu):
            raise DomainError(f'nu must be finite, got {self.nu}')

        object.__setattr__(self, 'mu0', mu0)
        object.__setattr__(self, 'ell', ell)
        object.__setattr__(self, 'nu', float(self.nu))
        object.__setattr__(self, 'r', float(self.r))

    @property
    def n(self) -> int:
        return self.mu0.shape[0]

    @property
    def kappa(self) -> float:
        return self.nu / self.r

    @property
    def chol(self) -> CholeskyFactor:
        return CholeskyFactor(factor_from_ell(self.ell, self.n))

    def to_evidential_params(self) -> EvidentialParams:
        """NIW hyperparameters with κ = ν/r and Ψ = ν·L·Lᵀ"""

        return EvidentialParams(self.mu0, self.chol.scaled(self.nu),
                                self.kappa, self.nu)


def gaussian_nll(y: float, mu: float, sigma2: float) -> LossValue:
    """
    Gaussian negative log-likelihood ½log(2πσ²) + (y-μ)²/(2σ²)

    Gradient layout: (μ, σ²).

    :returns: `pyevidential.losses.LossValue`
    """

    if not sigma2 > 0:
        raise DomainError(f'sigma2 must be positive, got {sigma2}')

    d = y - mu
    value = 0.5 * np.log(2 * np.pi * sigma2) + d * d / (2 * sigma2)
    gradients = np.array([
        -d / sigma2,
        0.5 / sigma2 - d * d / (2 * sigma2 * sigma2)
    ])

    return LossValue(float(value), gradients)


def nig_nll(y: float, p: NigParams) -> LossValue:
    """
    NIG negative log-likelihood -log St_{2α}(y | μ₀, β(1+κ)/(κα))

    Gradient layout: (μ₀, κ, α, β).

    :returns: `pyevidential.losses.LossValue`
    """

    mu0, kappa, alpha, beta = p.mu0, p.kappa, p.alpha, p.beta
    d = y - mu0
    omega = 2 * beta * (1 + kappa)
    denom = omega + kappa * d * d

    value = (gammaln(alpha) - gammaln(alpha + 0.5)
             + 0.5 * np.log(np.pi / kappa) - alpha * np.log(omega)
             + (alpha + 0.5) * np.log(denom))

    gradients = np.array([
        -(2 * alpha + 1) * kappa * d / denom,
        (-0.5 / kappa - alpha / (1 + kappa)
         + (alpha + 0.5) * (2 * beta + d * d) / denom),
        digamma(alpha) - digamma(alpha + 0.5) - np.log(omega) + np.log(denom),
        -alpha / beta + (2 * alpha + 1) * (1 + kappa) / denom
    ])

    return LossValue(float(value), gradients)


def total_evidence(p: NigParams, kind: EvidenceKind) -> float:
    """
    Total evidence of a NIG prior

    :param p: NIG hyperparameters
    :param kind: LEGACY (2κ+α) or VIRTUAL (κ+2α)

    :returns: `float` of Φ
    """

    kind = EvidenceKind(kind)
    if kind is EvidenceKind.LEGACY:
        return 2 * p.kappa + p.alpha
    if kind is EvidenceKind.VIRTUAL:
        return p.kappa + 2 * p.alpha
    raise DomainError('No total evidence for EvidenceKind.NONE')


def total_evidence_niw(m: EvidentialParams, kind: EvidenceKind) -> float:
    """
    Total evidence of a NIW prior (α = ν/2 for the legacy definition)

    :param m: NIW hyperparameters
    :param kind: LEGACY (2κ+ν/2) or VIRTUAL (κ+ν)

    :returns: `float` of Φ
    """

    kind = EvidenceKind(kind)
    if kind is EvidenceKind.LEGACY:
        return 2 * m.kappa + 0.5 * m.nu
    if kind is EvidenceKind.VIRTUAL:
        return m.kappa + m.nu
    raise DomainError('No total evidence for EvidenceKind.NONE')


def evidence_regularizer(y: float, p: NigParams,
                         cfg: RegularizerConfig) -> LossValue:
    """
    Evidence regularizer |y-μ₀|·Φ (not scaled by λ)

    Gradient layout: (μ₀, κ, α, β); the subgradient at y = μ₀ is 0.

    :returns: `pyevidential.losses.LossValue`
    """

    if cfg.evidence_kind is EvidenceKind.NONE:
        raise DomainError('Regularizer requested with EvidenceKind.NONE')

    d = y - p.mu0
    phi = total_evidence(p, cfg.evidence_kind)

    if cfg.evidence_kind is EvidenceKind.LEGACY:
        dphi = (2.0, 1.0)
    else:
        dphi = (1.0, 2.0)

    gradients = np.array([
        -np.sign(d) * phi,
        abs(d) * dphi[0],
        abs(d) * dphi[1],
        0.0
    ])

    return LossValue(float(abs(d) * phi), gradients)


def regularized_nig_nll(y: float, p: NigParams,
                        cfg: RegularizerConfig) -> LossValue:
    """
    Total univariate loss nig_nll + λ·|y-μ₀|·Φ

    :returns: `pyevidential.losses.LossValue`
    """

    loss = nig_nll(y, p)
    if cfg.evidence_kind is EvidenceKind.NONE or cfg.coupling == 0:
        return loss

    reg = evidence_regularizer(y, p, cfg)
    return LossValue(loss.value + cfg.coupling * reg.value,
                     loss.gradients + cfg.coupling * reg.gradients)


def niw_nll(y: Vector, m: EvidentialParams) -> LossValue:
    """
    NIW negative log-likelihood -log p(y | 𝔪)

    Gradient layout: (μ₀ [n], lower triangle of the Cholesky factor of Ψ
    [n(n+1)/2, row-major], κ, ν).

    :returns: `pyevidential.losses.LossValue`
    """

    n = m.n
    if m.nu <= n - 1:
        raise DomainError(f'nu must exceed n-1={n - 1}, got {m.nu}')

    value = -model_evidence_logpdf(y, m)

    L = m.psi_chol.L
    d = as_vector(y, n) - m.mu0
    kappa, nu = m.kappa, m.nu
    c = kappa / (1 + kappa)

    w = cho_solve((L, True), d)
    q = float(d @ w)
    psi_inv = cho_solve((L, True), np.eye(n))

    g_mu = -(nu + 1) * c * w / (1 + c * q)
    g_kappa = (-n / (2 * kappa * (1 + kappa))
               + (nu + 1) * q / (2 * (1 + kappa) ** 2 * (1 + c * q)))
    g_nu = 0.5 * (digamma(0.5 * (nu - n + 1)) - digamma(0.5 * (nu + 1))
                  + np.log1p(c * q))

    G = 0.5 * psi_inv - 0.5 * (nu + 1) * c / (1 + c * q) * np.outer(w, w)
    g_L = (2 * G @ L)[np.tril_indices(n)]

    gradients = np.concatenate([g_mu, g_L, [g_kappa, g_nu]])
    return LossValue(float(value), gradients)


def coupled_niw_nll_batch(y, mu0, ell, nu, r: float) -> tuple:
    """
    Coupled NIW loss (ν = rκ, Ψ = ν·L·Lᵀ) over a batch, constant dropped

    Gradient layout per row: (μ₀ [n], ℓ [n(n+1)/2], ν).

    :param y: targets (B, n)
    :param mu0: predicted means (B, n)
    :param ell: Cholesky parametrization (B, n(n+1)/2)
    :param nu: degrees of freedom (B,), each > n+1
    :param r: global coupling (> 0)

    :returns: `tuple` of values (B,) and gradients (B, n(n+3)/2 + 1)
    """

    y = np.atleast_2d(np.asarray(y, dtype=float))
    mu0 = np.atleast_2d(np.asarray(mu0, dtype=float))
    ell = np.atleast_2d(np.asarray(ell, dtype=float))
    nu = np.atleast_1d(np.asarray(nu, dtype=float))

    batch, n = y.shape
    if mu0.shape != (batch, n) or ell.shape != (batch, tril_size(n)) \
            or nu.shape != (batch,):
        raise DimensionMismatch(
            f'Inconsistent batch shapes: y {y.shape}, mu0 {mu0.shape}, '
            f'ell {ell.shape}, nu {nu.shape}')
    if not r > 0:
        raise DomainError(f'r must be positive, got {r}')
    if np.any(~(nu > n + 1)):
        raise DomainError(f'nu must exceed n+1={n + 1}, got {nu.min()}')

    rows, cols = np.tril_indices(n)
    on_diag = rows == cols

    L = factor_from_ell(ell, n)
    L_inv = np.linalg.inv(L)
    d = y - mu0
    s = r + nu

    z = np.einsum('bij,bj->bi', L_inv, d)
    q = np.sum(z * z, axis=1)
    u = 1 + q / s
    ell_sum = np.sum(ell[:, on_diag], axis=1)
    logdet_update = 2 * ell_sum + np.log1p(q / s)

    values = (gammaln(0.5 * (nu - n + 1)) - gammaln(0.5 * (nu + 1))
              + 0.5 * n * np.log(s) - nu * ell_sum
              + 0.5 * (nu + 1) * logdet_update)

    w = np.einsum('bji,bj->bi', L_inv, z)
    g_mu = -((nu + 1) / (s * u))[:, None] * w

    g_nu = (0.5 * digamma(0.5 * (nu - n + 1)) - 0.5 * digamma(0.5 * (nu + 1))
            + 0.5 * n / s + 0.5 * np.log(u)
            - 0.5 * (nu + 1) * q / (s * s * u))

    psi_inv = np.swapaxes(L_inv, -1, -2) @ L_inv
    G = (0.5 * psi_inv - (0.5 * (nu + 1) / (s * u))[:, None, None]
         * np.einsum('bi,bj->bij', w, w))
    g_ell = (2 * G @ L)[:, rows, cols]
    g_ell[:, on_diag] *= np.exp(ell[:, on_diag])

    gradients = np.concatenate([g_mu, g_ell, g_nu[:, None]], axis=1)
    return values, gradients


def coupled_niw_nll(y: Vector, h: CoupledHeadParams) -> LossValue:
    """
    Coupled NIW loss for a single observation

    Equals `niw_nll` at κ = ν/r, Ψ = ν·L·Lᵀ minus the constant (n/2)·log π.
    Gradient layout: (μ₀ [n], ℓ [n(n+1)/2], ν).

    :returns: `pyevidential.losses.LossValue`
    """

    y = as_vector(y, h.n)
    values, gradients = coupled_niw_nll_batch(
        y[None, :], h.mu0[None, :], h.ell[None, :], [h.nu], h.r)

    return LossValue(float(values[0]), gradients[0])


def coupled_logdet_update(y: Vector, h: CoupledHeadParams) -> float:
    """log|L·Lᵀ + (y-μ₀)(y-μ₀)ᵀ/(r+ν)| through the Sylvester identity"""

    return sylvester_logdet_rank1(h.chol, 1 / (h.r + h.nu),
                                  as_vector(y, h.n) - h.mu0)


def uncertainty_from_head(h: CoupledHeadParams) -> UncertaintyReport:
    """
    Prediction and uncertainties of a coupled head

    The global scale is not identifiable once ν = rκ; the proportionality
    constant is fixed to one, aleatoric = ν/(ν-n-1)·L·Lᵀ and
    epistemic = aleatoric/ν. Rescale downstream if an absolute scale is
    needed.

    :returns: `pyevidential.losses.UncertaintyReport`
    """

    n = h.n
    if h.nu <= n + 1:
        raise DomainError(f'nu must exceed n+1={n + 1}, got {h.nu}')

    aleatoric = h.nu / (h.nu - n - 1) * h.chol.matrix()
    return UncertaintyReport(np.array(h.mu0), aleatoric, aleatoric / h.nu,
                             h.nu)
