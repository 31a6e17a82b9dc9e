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

# synthetic data generators

from dataclasses import dataclass, field
import logging
from pathlib import Path

import click
import numpy as np

from pyevidential.distributions import RngStream
from pyevidential.errors import DimensionMismatch, DomainError
from pyevidential.linalg import SymMatrix
from pyevidential.util import (get_cli_common_options, get_output_dir,
                               make_provenance, read_csv, read_json,
                               setup_logger, write_csv, write_json)

LOGGER = logging.getLogger(__name__)

TWO_PI = 2 * np.pi

GENERATORS = ['circle']


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Ordered (t, y) records with the provenance needed to regenerate them

    `t` holds the scalar inputs (m,), `y` the targets (m, n).
    """

    t: np.ndarray
    y: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.array(self.t, dtype=float).reshape(-1)
        y = np.array(self.y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]

        if y.ndim != 2 or y.shape[0] != t.shape[0]:
            raise DimensionMismatch(
                f'{t.shape[0]} inputs vs targets of shape {y.shape}')
        if t.shape[0] == 0:
            raise DomainError('Dataset is empty')
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
            raise DomainError('Dataset contains non-finite values')

        t.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, 't', t)
        object.__setattr__(self, 'y', y)

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def n(self) -> int:
        return self.y.shape[1]

    @property
    def records(self) -> list:
        return list(zip(self.t.tolist(), self.y))

    @property
    def inputs(self) -> np.ndarray:
        """network inputs (m, 1)"""

        return self.t[:, None]

    def subset(self, indices) -> 'Dataset':
        """
        Dataset restricted to `indices` (provenance is kept)

        :param indices: integer index array

        :returns: `pyevidential.datagen.Dataset`
        """

        indices = np.asarray(indices)
        return Dataset(self.t[indices], self.y[indices], self.provenance)


@dataclass(frozen=True)
class CircleConfig:
    """∨-density unit-circle generator settings"""

    count: int = 300
    radial_noise: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if int(self.count) < 1:
            raise DomainError(f'count must be >= 1, got {self.count}')
        if not (np.isfinite(self.radial_noise) and self.radial_noise >= 0):
            raise DomainError(
                f'radial_noise must be >= 0, got {self.radial_noise}')
        if int(self.seed) < 0:
            raise DomainError(f'seed must be >= 0, got {self.seed}')

    def to_dict(self) -> dict:
        return {
            'count': int(self.count),
            'radial_noise': float(self.radial_noise),
            'seed': int(self.seed)
        }


def vee_density_pdf(t):
    """
    ∨-shaped density f(t) = |t - π|/π² on [0, 2π], zero elsewhere

    :param t: point or array of points

    :returns: `float` (or `numpy.ndarray` for array input)
    """

    t = np.asarray(t, dtype=float)
    value = np.where((t >= 0) & (t <= TWO_PI), np.abs(t - np.pi) / np.pi ** 2,
                     0.0)

    return float(value) if value.ndim == 0 else value


def vee_cdf(t):
    """
    Cumulative distribution function of the ∨ density

    :param t: point or array of points

    :returns: `float` (or `numpy.ndarray` for array input)
    """

    t = np.clip(np.asarray(t, dtype=float), 0, TWO_PI)
    lower = (np.pi * t - 0.5 * t * t) / np.pi ** 2
    upper = 0.5 + (t - np.pi) ** 2 / (2 * np.pi ** 2)
    value = np.where(t <= np.pi, lower, upper)

    return float(value) if value.ndim == 0 else value


def sample_vee(rng: RngStream, size: int = None):
    """
    Draw from the ∨ density by inverse-CDF transform

    :param rng: `pyevidential.distributions.RngStream`
    :param size: number of draws (`None` for a single `float`)

    :returns: `float` or `numpy.ndarray`
    """

    u = np.asarray(rng.generator.random(size))
    lower = np.pi * (1 - np.sqrt(np.clip(1 - 2 * u, 0, None)))
    upper = np.pi * (1 + np.sqrt(np.clip(2 * u - 1, 0, None)))
    t = np.where(u <= 0.5, lower, upper)

    return float(t) if t.ndim == 0 else t


def circle_dataset(cfg: CircleConfig) -> Dataset:
    """
    Noisy unit circle x = (1+ε)cos t, y = (1+ε)sin t with t from the ∨ density

    All inputs are drawn before the radial noise.

    :param cfg: `pyevidential.datagen.CircleConfig`

    :returns: `pyevidential.datagen.Dataset`
    """

    rng = RngStream(cfg.seed)
    t = sample_vee(rng, int(cfg.count))
    epsilon = rng.generator.normal(0.0, cfg.radial_noise, int(cfg.count))

    radius = 1.0 + epsilon
    y = np.column_stack([radius * np.cos(t), radius * np.sin(t)])

    LOGGER.debug(f'Generated {cfg.count} circle points (seed {cfg.seed})')
    provenance = make_provenance('generate', cfg.to_dict(), [cfg.seed],
                                 generator='circle')

    return Dataset(t, y, provenance)


def regenerate(provenance: dict) -> Dataset:
    """
    Rebuild a dataset from its provenance

    :param provenance: `dict` of provenance (as written next to the CSV)

    :returns: `pyevidential.datagen.Dataset`
    """

    generator = provenance.get('generator')

    if generator == 'circle':
        return circle_dataset(CircleConfig(**provenance['parameters']))

    msg = f'Cannot regenerate from generator {generator!r}'
    LOGGER.error(msg)
    raise DomainError(msg)


def sidecar_path(filename: Path) -> Path:
    """`<stem>.provenance.json` next to a dataset file"""

    filename = Path(filename)
    return filename.with_name(f'{filename.stem}.provenance.json')


def write_dataset(dataset: Dataset, filename: Path) -> Path:
    """
    Write a dataset as CSV `t,y1,...,yn` plus its provenance sidecar

    :param dataset: `pyevidential.datagen.Dataset`
    :param filename: path to CSV file

    :returns: `pathlib.Path` of CSV file
    """

    header = ['t'] + [f'y{i + 1}' for i in range(dataset.n)]
    rows = ([t] + list(y) for t, y in zip(dataset.t, dataset.y))

    filename = write_csv(filename, header, rows)
    if dataset.provenance:
        write_json(sidecar_path(filename), dataset.provenance,
                   'provenance.json')

    return filename


def read_dataset(filename: Path) -> Dataset:
    """
    Read a dataset CSV (and its provenance sidecar, when present)

    :param filename: path to CSV file

    :returns: `pyevidential.datagen.Dataset`
    """

    header, rows = read_csv(filename)

    expected = ['t'] + [f'y{i + 1}' for i in range(len(header) - 1)]
    if len(header) < 2 or header != expected:
        msg = f'Invalid dataset header {header}; expected t,y1,...,yn'
        LOGGER.error(msg)
        raise DomainError(msg)

    try:
        values = np.array([[float(v) for v in row] for row in rows])
    except ValueError as err:
        raise DomainError(f'Invalid dataset value: {err}')

    if values.ndim != 2 or values.shape[1] != len(header):
        raise DimensionMismatch(f'Ragged dataset rows in {filename}')

    sidecar = sidecar_path(filename)
    if sidecar.exists():
        provenance = read_json(sidecar, 'provenance.json')
    else:
        LOGGER.warning(f'No provenance found for {filename}')
        provenance = {}

    return Dataset(values[:, 0], values[:, 1:], provenance)


def true_covariance(t: float, sigma_r2: float) -> SymMatrix:
    """
    Ground-truth covariance of the circle targets at input t

    Radial noise only, propagated through the polar-to-Cartesian Jacobian.

    :param t: angle
    :param sigma_r2: radial noise variance

    :returns: `numpy.ndarray` (2, 2)
    """

    direction = np.array([np.cos(t), np.sin(t)])
    return sigma_r2 * np.outer(direction, direction)


def true_correlation_sign(t: float):
    """
    Ground-truth sign of corr(x, y) at input t

    :param t: angle

    :returns: `+1`, `-1`, or `None` at multiples of π/2
    """

    quarter = t / (0.5 * np.pi)
    if abs(quarter - round(quarter)) < 1e-12:
        return None

    return 1 if np.sin(2 * t) > 0 else -1


def student_t_samples(nu: float, mu: float, sigma2: float, count: int,
                      rng: RngStream) -> np.ndarray:
    """
    I.i.d. Student-t draws μ + σ·z/√(χ²_ν/ν)

    :param nu: degrees of freedom (> 0)
    :param mu: location
    :param sigma2: squared scale (> 0)
    :param count: number of draws
    :param rng: `pyevidential.distributions.RngStream`

    :returns: `numpy.ndarray` (count,)
    """

    if not (nu > 0 and sigma2 > 0):
        raise DomainError(f'Invalid Student-t parameters: nu={nu}, '
                          f'sigma2={sigma2}')

    z = rng.generator.standard_normal(count)
    chi2 = rng.generator.chisquare(nu, count)

    return mu + np.sqrt(sigma2) * z / np.sqrt(chi2 / nu)


@click.command()
@click.pass_context
@get_cli_common_options
@click.option('--count', type=click.IntRange(min=1), default=300,
              help='Number of points')
@click.option('--noise', type=click.FloatRange(min=0), default=0.1,
              help='Radial noise standard deviation')
@click.option('--seed', type=click.IntRange(min=0), default=0,
              help='Random seed')
@click.option('--out', '-o', type=click.Path(dir_okay=False),
              help='Output CSV file')
def generate(ctx, count, noise, seed, out, logfile, verbosity):
    """generate the ∨-density circle dataset"""

    setup_logger(verbosity, logfile)

    if out is None:
        out = get_output_dir() / 'circle.csv'

    dataset = circle_dataset(CircleConfig(count, noise, seed))

    try:
        filename = write_dataset(dataset, out)
    except OSError as err:
        raise click.ClickException(str(err))

    click.echo(f'Wrote {len(dataset)} points to {filename}')
