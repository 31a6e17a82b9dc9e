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

# Gaussian / inverse-gamma / inverse-Wishart / NIG / NIW / Student-t family

from dataclasses import dataclass
import logging

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln, multigammaln

from pyevidential.errors import DimensionMismatch, DomainError
from pyevidential.linalg import (CholeskyFactor, SymMatrix, Vector,
                                 as_sym_matrix, as_vector, cholesky, logdet,
                                 quad_form, sylvester_logdet_rank1)

LOGGER = logging.getLogger(__name__)

LOG_2PI = np.log(2 * np.pi)

MINIMUM_MC_SAMPLES = 10_000
MC_CHUNK_SIZE = 100_000


class RngStream:
    """
    Seeded, splittable random stream

    Backed by numpy's counter-based Philox bit generator; child streams come
    from `SeedSequence.spawn` so parallel workers never share state.
    """

    def __init__(self, seed: int = 0, seed_sequence=None):
        """
        initializer

        :param seed: root seed (64-bit non-negative integer)
        :param seed_sequence: `numpy.random.SeedSequence` (for children)

        :returns: `pyevidential.distributions.RngStream`
        """

        if seed_sequence is None:
            seed_sequence = np.random.SeedSequence(int(seed))

        self.seed = int(seed)
        self.seed_sequence = seed_sequence
        self.generator = np.random.Generator(np.random.Philox(seed_sequence))

    @property
    def spawn_key(self) -> tuple:
        return self.seed_sequence.spawn_key

    def split(self, count: int) -> list:
        """
        Spawn independent child streams

        :param count: number of children

        :returns: `list` of `RngStream`
        """

        return [RngStream(self.seed, child)
                for child in self.seed_sequence.spawn(count)]

    def __repr__(self):
        return f'RngStream(seed={self.seed}, spawn_key={self.spawn_key})'


def derive_seeds(seed: int, count: int) -> list:
    """
    Derive `count` integer seeds from a root seed

    :param seed: root seed
    :param count: number of seeds

    :returns: `list` of `int`
    """

    state = np.random.SeedSequence(int(seed)).generate_state(count, np.uint32)
    return [int(s) for s in state]


@dataclass(frozen=True, eq=False)
class NigParams:
    """Normal-inverse-gamma hyperparameters (μ₀, κ; α, β)"""

    mu0: float
    kappa: float
    alpha: float
    beta: float

    def __post_init__(self):
        values = (self.mu0, self.kappa, self.alpha, self.beta)
        if not all(np.isfinite(v) for v in values):
            raise DomainError(f'Non-finite NIG parameters: {values}')
        if self.kappa <= 0:
            raise DomainError(f'kappa must be positive, got {self.kappa}')
        if self.alpha <= 0:
            raise DomainError(f'alpha must be positive, got {self.alpha}')
        if self.beta <= 0:
            raise DomainError(f'beta must be positive, got {self.beta}')


@dataclass(frozen=True, eq=False)
class EvidentialParams:
    """Normal-inverse-Wishart hyperparameters (μ₀, Ψ, κ, ν)"""

    mu0: Vector
    psi_chol: CholeskyFactor
    kappa: float
    nu: float

    def __post_init__(self):
        mu0 = np.array(as_vector(self.mu0))
        if mu0.shape[0] != self.psi_chol.n:
            raise DimensionMismatch(
                f'mu0 has dimension {mu0.shape[0]}, Psi {self.psi_chol.n}')
        if not (np.isfinite(self.kappa) and self.kappa > 0):
            raise DomainError(f'kappa must be positive, got {self.kappa}')
        if not np.isfinite(self.nu):
            raise DomainError(f'nu must be finite, got {self.nu}')

        mu0.setflags(write=False)
        object.__setattr__(self, 'mu0', mu0)
        object.__setattr__(self, 'kappa', float(self.kappa))
        object.__setattr__(self, 'nu', float(self.nu))

    @classmethod
    def from_psi(cls, mu0, psi, kappa: float,
                 nu: float) -> 'EvidentialParams':
        return cls(as_vector(mu0), cholesky(psi), kappa, nu)

    @classmethod
    def from_sigma0(cls, mu0, sigma0, kappa: float,
                    nu: float) -> 'EvidentialParams':
        """Parametrize by Σ₀ = Ψ/ν ("ν observations with deviation Σ₀")"""

        if nu <= 0:
            raise DomainError(f'nu must be positive, got {nu}')
        return cls(as_vector(mu0), cholesky(as_sym_matrix(sigma0) * nu),
                   kappa, nu)

    @classmethod
    def from_nig(cls, p: NigParams) -> 'EvidentialParams':
        """Univariate embedding with ν = 2α and Ψ = 2β"""

        return cls.from_psi([p.mu0], [[2 * p.beta]], p.kappa, 2 * p.alpha)

    @property
    def n(self) -> int:
        return self.psi_chol.n

    @property
    def psi(self) -> SymMatrix:
        return self.psi_chol.matrix()

    @property
    def sigma0(self) -> SymMatrix:
        return self.psi / self.nu

    def to_nig(self) -> NigParams:
        if self.n != 1:
            raise DimensionMismatch(f'NIG needs n=1, got n={self.n}')
        return NigParams(float(self.mu0[0]), self.kappa, self.nu / 2,
                         float(self.psi[0, 0]) / 2)


@dataclass(frozen=True, eq=False)
class Moments:
    """Prediction E[μ], aleatoric E[Σ] and epistemic var[μ]"""

    mean: Vector
    aleatoric: SymMatrix
    epistemic: SymMatrix


def mvn_logpdf(x: Vector, mu: Vector, sigma_chol: CholeskyFactor) -> float:
    """
    Multivariate normal log-density

    :param x: point
    :param mu: mean
    :param sigma_chol: Cholesky factor of the covariance

    :returns: `float` of log N(x | μ, Σ)
    """

    n = sigma_chol.n
    x = as_vector(x, n)
    mu = as_vector(mu, n)

    return (-0.5 * n * LOG_2PI - 0.5 * logdet(sigma_chol)
            - 0.5 * quad_form(sigma_chol, x - mu))


def inv_gamma_logpdf(x: float, alpha: float, beta: float) -> float:
    """
    Inverse-gamma log-density

    :param x: point (> 0)
    :param alpha: shape
    :param beta: scale

    :returns: `float`
    """

    if alpha <= 0 or beta <= 0:
        raise DomainError(f'Invalid inverse gamma parameters: {alpha}, {beta}')
    if x <= 0:
        raise DomainError(f'Inverse gamma support is x > 0, got {x}')

    return float(alpha * np.log(beta) - gammaln(alpha)
                 - (alpha + 1) * np.log(x) - beta / x)


def inv_wishart_logpdf(sigma: SymMatrix, psi_chol: CholeskyFactor,
                       nu: float) -> float:
    """
    Inverse-Wishart log-density W⁻¹(Σ | Ψ, ν)

    :param sigma: SPD matrix
    :param psi_chol: Cholesky factor of the scale matrix Ψ
    :param nu: degrees of freedom (> n-1)

    :returns: `float`
    """

    n = psi_chol.n
    if nu <= n - 1:
        raise DomainError(f'nu must exceed n-1={n - 1}, got {nu}')

    sigma_chol = cholesky(sigma)
    if sigma_chol.n != n:
        raise DimensionMismatch(f'Sigma is {sigma_chol.n}x{sigma_chol.n}, '
                                f'Psi is {n}x{n}')

    # tr(ΨΣ⁻¹) = ‖L_Σ⁻¹ L_Ψ‖_F²
    m = solve_triangular(sigma_chol.L, psi_chol.L, lower=True)
    trace = float(np.sum(m * m))

    return float(0.5 * nu * logdet(psi_chol) - 0.5 * nu * n * np.log(2)
                 - multigammaln(0.5 * nu, n)
                 - 0.5 * (nu + n + 1) * logdet(sigma_chol) - 0.5 * trace)


def niw_logpdf(mu: Vector, sigma: SymMatrix, m: EvidentialParams) -> float:
    """
    Normal-inverse-Wishart log-density

    :param mu: mean
    :param sigma: covariance
    :param m: NIW hyperparameters

    :returns: `float` of log N(μ | μ₀, Σ/κ) + log W⁻¹(Σ | Ψ, ν)
    """

    sigma = as_sym_matrix(sigma)
    return (mvn_logpdf(mu, m.mu0, cholesky(sigma / m.kappa))
            + inv_wishart_logpdf(sigma, m.psi_chol, m.nu))


def _bartlett_draws(m: EvidentialParams, rng: RngStream, size: int) -> tuple:
    """
    Raw draws of the hierarchical NIW sampler

    Σ⁻¹ ~ W(Ψ⁻¹, ν) is written as L⁻ᵀ·A·Aᵀ·L⁻¹ with Ψ = L·Lᵀ and A the
    Bartlett factor, hence Σ = B·Bᵀ with B = L·A⁻ᵀ and μ = μ₀ + B·z/√κ.

    :returns: `tuple` of Bartlett factors A (size, n, n) and normals z
    """

    n = m.n
    if m.nu <= n - 1:
        raise DomainError(f'nu must exceed n-1={n - 1}, got {m.nu}')

    gen = rng.generator
    A = np.zeros((size, n, n))
    rows, cols = np.tril_indices(n, -1)
    A[:, rows, cols] = gen.standard_normal((size, rows.size))
    diag = np.arange(n)
    A[:, diag, diag] = np.sqrt(gen.chisquare(m.nu - diag, size=(size, n)))
    z = gen.standard_normal((size, n))

    return A, z


def sample_niw_batch(m: EvidentialParams, rng: RngStream,
                     size: int) -> tuple:
    """
    Draw (μ, Σ) pairs from the NIW hierarchy

    :param m: NIW hyperparameters
    :param rng: random stream (advanced in place)
    :param size: number of draws

    :returns: `tuple` of μ (size, n) and Σ (size, n, n)
    """

    A, z = _bartlett_draws(m, rng, size)
    B = m.psi_chol.L @ np.swapaxes(np.linalg.inv(A), -1, -2)
    sigma = B @ np.swapaxes(B, -1, -2)
    mu = m.mu0 + np.einsum('sij,sj->si', B, z) / np.sqrt(m.kappa)

    return mu, sigma


def sample_niw(m: EvidentialParams, rng: RngStream) -> tuple:
    """
    Draw a single (μ, Σ) pair: Σ ~ W⁻¹(Ψ, ν), μ | Σ ~ N(μ₀, Σ/κ)

    :param m: NIW hyperparameters
    :param rng: random stream (advanced in place)

    :returns: `tuple` of μ (n,) and Σ (n, n)
    """

    mu, sigma = sample_niw_batch(m, rng, 1)
    return mu[0], sigma[0]


def niw_moments(m: EvidentialParams) -> Moments:
    """
    First moments of the NIW distribution

    :param m: NIW hyperparameters (ν > n+1)

    :returns: `pyevidential.distributions.Moments`
    """

    if m.nu <= m.n + 1:
        raise DomainError(f'Moments need nu > n+1={m.n + 1}, got {m.nu}')

    aleatoric = m.psi / (m.nu - m.n - 1)
    return Moments(np.array(m.mu0), aleatoric, aleatoric / m.kappa)


def nig_moments(p: NigParams) -> Moments:
    """
    Prediction and uncertainties of a NIG distribution

    :param p: NIG hyperparameters (α > 1)

    :returns: `pyevidential.distributions.Moments` with n=1
    """

    if p.alpha <= 1:
        raise DomainError(f'Moments need alpha > 1, got {p.alpha}')

    aleatoric = np.array([[p.beta / (p.alpha - 1)]])
    return Moments(np.array([p.mu0]), aleatoric, aleatoric / p.kappa)


def posterior_update(prior: EvidentialParams, data) -> EvidentialParams:
    """
    Conjugate NIW update with m observations

    :param prior: NIW hyperparameters
    :param data: sequence of observations, each of dimension n

    :returns: posterior `pyevidential.distributions.EvidentialParams`
    """

    Y = np.asarray(data, dtype=float)
    if Y.ndim == 1 and prior.n == 1:
        Y = Y[:, None]
    if Y.ndim != 2 or Y.shape[1] != prior.n:
        raise DimensionMismatch(
            f'Observations of shape {Y.shape} do not match n={prior.n}')

    m = Y.shape[0]
    if m < 1:
        raise DomainError('At least one observation is required')

    kappa = prior.kappa + m
    mean = Y.mean(axis=0)
    residuals = Y - mean
    delta = prior.mu0 - mean

    mu0 = (prior.kappa * prior.mu0 + m * mean) / kappa
    psi = (prior.psi + residuals.T @ residuals
           + m * (prior.kappa / kappa) * np.outer(delta, delta))

    LOGGER.debug(f'Posterior after {m} observations: kappa={kappa}')
    return EvidentialParams.from_psi(mu0, psi, kappa, prior.nu + m)


def model_evidence_logpdf(y: Vector, m: EvidentialParams) -> float:
    """
    log of the NIW model evidence, a multivariate t with ν-n+1 DoF

    :param y: observation
    :param m: NIW hyperparameters (ν > n-1)

    :returns: `float` of log p(y | 𝔪)
    """

    n = m.n
    dof = m.nu - n + 1
    if dof <= 0:
        raise DomainError(f'nu must exceed n-1={n - 1}, got {m.nu}')

    d = as_vector(y, n) - m.mu0
    c = m.kappa / (1 + m.kappa)
    logdet_psi = logdet(m.psi_chol)
    logdet_update = sylvester_logdet_rank1(m.psi_chol, c, d)

    return float(gammaln(0.5 * (m.nu + 1)) - gammaln(0.5 * dof)
                 + 0.5 * n * np.log(c / np.pi) - 0.5 * logdet_psi
                 - 0.5 * (m.nu + 1) * (logdet_update - logdet_psi))


def model_evidence_mc(y: Vector, m: EvidentialParams, samples: int,
                      rng: RngStream) -> tuple:
    """
    Monte Carlo estimate of ∫ N(y | μ, Σ) NIW(μ, Σ | 𝔪) dμ dΣ

    :param y: observation
    :param m: NIW hyperparameters
    :param samples: number of NIW draws (≥ 10⁴)
    :param rng: random stream (advanced in place)

    :returns: `tuple` of estimate and its standard error
    """

    if samples < MINIMUM_MC_SAMPLES:
        raise DomainError(f'At least {MINIMUM_MC_SAMPLES} samples required, '
                          f'got {samples}')

    n = m.n
    w = solve_triangular(m.psi_chol.L, as_vector(y, n) - m.mu0, lower=True)
    logdet_psi = logdet(m.psi_chol)

    total = 0.0
    total_sq = 0.0
    remaining = samples

    while remaining > 0:
        size = min(remaining, MC_CHUNK_SIZE)
        A, z = _bartlett_draws(m, rng, size)

        # B⁻¹(y - μ) = Aᵀ·L⁻¹(y - μ₀) - z/√κ
        u = np.einsum('sji,j->si', A, w) - z / np.sqrt(m.kappa)
        logdet_sigma = logdet_psi - 2 * np.sum(
            np.log(np.diagonal(A, axis1=1, axis2=2)), axis=1)
        values = np.exp(-0.5 * n * LOG_2PI - 0.5 * logdet_sigma
                        - 0.5 * np.sum(u * u, axis=1))

        total += float(np.sum(values))
        total_sq += float(np.sum(values * values))
        remaining -= size

    estimate = total / samples
    variance = max(total_sq - samples * estimate ** 2, 0.0) / (samples - 1)
    stderr = float(np.sqrt(variance / samples))

    LOGGER.debug(f'MC evidence {estimate} ± {stderr} ({samples} samples)')
    return estimate, stderr


def student_t_logpdf(x, nu: float, mu: float, sigma2: float):
    """
    Non-standardized Student-t log-density St_ν(x | μ, σ²)

    :param x: point or array of points
    :param nu: degrees of freedom (> 0)
    :param mu: location
    :param sigma2: squared scale (> 0)

    :returns: `float` (or `numpy.ndarray` for array input)
    """

    if nu <= 0 or sigma2 <= 0:
        raise DomainError(f'Invalid Student-t parameters: nu={nu}, '
                          f'sigma2={sigma2}')

    x = np.asarray(x, dtype=float)
    value = (gammaln(0.5 * (nu + 1)) - gammaln(0.5 * nu)
             - 0.5 * np.log(nu * np.pi * sigma2)
             - 0.5 * (nu + 1) * np.log1p((x - mu) ** 2 / (nu * sigma2)))

    return float(value) if value.ndim == 0 else value
