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

# fully connected evidential regression network and trainer

from dataclasses import dataclass, field
import logging
from pathlib import Path
import time

import click
import numpy as np

from pyevidential.autodiff import Tensor
from pyevidential.datagen import Dataset, read_dataset
from pyevidential.distributions import RngStream
from pyevidential.errors import (DimensionMismatch, DomainError,
                                 EvidentialError, NonFiniteLoss)
from pyevidential.losses import (CoupledHeadParams, UncertaintyReport,
                                 coupled_niw_nll_batch, head_output_size,
                                 tril_size, uncertainty_from_head)
from pyevidential.util import (get_cli_common_options, get_output_dir,
                               parse_int_list, read_json, setup_logger,
                               write_csv, write_json, write_provenance)

LOGGER = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 'pyevidential-checkpoint/1'

ACTIVATIONS = ['relu']


@dataclass(frozen=True)
class HeadConfig:
    """
    Evidential output head

    ν is mapped into the open interval (nu_lo, nu_hi) by
    ν = (nu_hi+nu_lo)/2 + (nu_hi-nu_lo)/2·tanh(p_last), held one ulp inside
    the bounds where tanh saturates. A lower bound of n+1 (the default) is
    stored as the first double above it; for n=2 the map is
    ν = 8 + 5·tanh(p₆).
    """

    n: int = 2
    r: float = 1.0
    nu_lo: float = None
    nu_hi: float = None

    def __post_init__(self):
        n = int(self.n)
        nu_lo = float(n + 1 if self.nu_lo is None else self.nu_lo)
        nu_hi = float(n + 11 if self.nu_hi is None else self.nu_hi)

        if n < 1:
            raise DomainError(f'n must be >= 1, got {n}')
        if not (np.isfinite(self.r) and self.r > 0):
            raise DomainError(f'r must be positive, got {self.r}')
        if nu_lo == n + 1:
            nu_lo = float(np.nextafter(nu_lo, np.inf))
        if not nu_lo > n + 1:
            raise DomainError(f'nu_lo must exceed n+1={n + 1}, got {nu_lo}')
        if not (np.isfinite(nu_hi) and nu_hi > nu_lo):
            raise DomainError(f'nu_hi must exceed nu_lo={nu_lo}, got {nu_hi}')

        object.__setattr__(self, 'n', n)
        object.__setattr__(self, 'r', float(self.r))
        object.__setattr__(self, 'nu_lo', nu_lo)
        object.__setattr__(self, 'nu_hi', nu_hi)

    @property
    def nu_mid(self) -> float:
        return 0.5 * (self.nu_hi + self.nu_lo)

    @property
    def nu_half_range(self) -> float:
        return 0.5 * (self.nu_hi - self.nu_lo)

    def to_dict(self) -> dict:
        return {'n': self.n, 'r': self.r, 'nu_lo': self.nu_lo,
                'nu_hi': self.nu_hi}


@dataclass(frozen=True)
class NetworkConfig:
    """Fully connected ReLU network feeding an evidential head"""

    input_dim: int = 1
    hidden: tuple = (32, 32)
    activation: str = 'relu'
    head: HeadConfig = field(default_factory=HeadConfig)
    output_dim: int = None

    def __post_init__(self):
        hidden = tuple(int(h) for h in self.hidden)
        activation = str(self.activation).lower()
        output_dim = head_output_size(self.head.n)

        if int(self.input_dim) < 1:
            raise DomainError(f'input_dim must be >= 1, got {self.input_dim}')
        if any(h < 1 for h in hidden):
            raise DomainError(f'Invalid hidden layer widths {hidden}')
        if activation not in ACTIVATIONS:
            raise DomainError(f'Unsupported activation {self.activation}')
        if self.output_dim is not None and self.output_dim != output_dim:
            raise DimensionMismatch(
                f'n={self.head.n} needs {output_dim} outputs, '
                f'got {self.output_dim}')

        object.__setattr__(self, 'input_dim', int(self.input_dim))
        object.__setattr__(self, 'hidden', hidden)
        object.__setattr__(self, 'activation', activation)
        object.__setattr__(self, 'output_dim', output_dim)

    @property
    def layer_sizes(self) -> list:
        return [self.input_dim, *self.hidden, self.output_dim]

    @property
    def parameter_count(self) -> int:
        sizes = self.layer_sizes
        return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))

    def to_dict(self) -> dict:
        return {
            'input_dim': self.input_dim,
            'hidden': list(self.hidden),
            'activation': self.activation,
            'head': self.head.to_dict()
        }

    @classmethod
    def from_dict(cls, document: dict) -> 'NetworkConfig':
        return cls(document['input_dim'], tuple(document['hidden']),
                   document['activation'], HeadConfig(**document['head']))


@dataclass(frozen=True, eq=False)
class ModelState:
    """Per-layer weights (fan_in, fan_out) and biases of a network"""

    config: NetworkConfig
    weights: tuple
    biases: tuple
    seed: int = 0

    def __post_init__(self):
        sizes = self.config.layer_sizes
        shapes = list(zip(sizes[:-1], sizes[1:]))

        if len(self.weights) != len(shapes) or \
                len(self.biases) != len(shapes):
            raise DimensionMismatch(
                f'Expected {len(shapes)} layers, got {len(self.weights)}')

        weights, biases = [], []
        for (fan_in, fan_out), w, b in zip(shapes, self.weights, self.biases):
            w = np.array(w, dtype=float)
            b = np.array(b, dtype=float)
            if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
                raise DimensionMismatch(
                    f'Layer {fan_in}->{fan_out} got weights {w.shape} '
                    f'and biases {b.shape}')
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise DomainError('Non-finite model parameters')
            w.setflags(write=False)
            b.setflags(write=False)
            weights.append(w)
            biases.append(b)

        object.__setattr__(self, 'weights', tuple(weights))
        object.__setattr__(self, 'biases', tuple(biases))
        object.__setattr__(self, 'seed', int(self.seed))

    @property
    def head(self) -> HeadConfig:
        return self.config.head

    @property
    def parameter_count(self) -> int:
        return self.config.parameter_count

    def parameters(self) -> np.ndarray:
        """flat parameter vector (layer by layer, weights then biases)"""

        return np.concatenate([
            np.concatenate([w.ravel(), b]) for w, b in
            zip(self.weights, self.biases)])

    def with_parameters(self, theta) -> 'ModelState':
        """
        New model state from a flat parameter vector

        :param theta: vector laid out as `parameters()`

        :returns: `pyevidential.network.ModelState`
        """

        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.parameter_count,):
            raise DimensionMismatch(
                f'Expected {self.parameter_count} parameters, '
                f'got {theta.shape}')

        weights, biases = [], []
        offset = 0
        for w, b in zip(self.weights, self.biases):
            weights.append(theta[offset:offset + w.size].reshape(w.shape))
            offset += w.size
            biases.append(theta[offset:offset + b.size])
            offset += b.size

        return ModelState(self.config, tuple(weights), tuple(biases),
                          self.seed)

    def to_dict(self) -> dict:
        return {
            'format': CHECKPOINT_FORMAT,
            'seed': self.seed,
            'network': self.config.to_dict(),
            'layers': [{'weights': w.tolist(), 'biases': b.tolist()}
                       for w, b in zip(self.weights, self.biases)]
        }

    @classmethod
    def from_dict(cls, document: dict) -> 'ModelState':
        config = NetworkConfig.from_dict(document['network'])
        weights = tuple(np.array(layer['weights'], dtype=float).reshape(
            len(layer['weights']), -1) for layer in document['layers'])
        biases = tuple(np.array(layer['biases'], dtype=float)
                       for layer in document['layers'])

        return cls(config, weights, biases, document['seed'])


@dataclass(frozen=True)
class TrainConfig:
    """Adaptive-moment training settings"""

    epochs: int = 2000
    batch_size: int = 300
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if int(self.epochs) < 1:
            raise DomainError(f'epochs must be >= 1, got {self.epochs}')
        if int(self.batch_size) < 1:
            raise DomainError(
                f'batch_size must be >= 1, got {self.batch_size}')
        if not (np.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise DomainError(
                f'learning_rate must be >= 0, got {self.learning_rate}')
        for name in ['adam_beta1', 'adam_beta2']:
            if not 0 < getattr(self, name) < 1:
                raise DomainError(f'{name} must lie in (0, 1)')
        if not self.adam_eps > 0:
            raise DomainError(
                f'adam_eps must be positive, got {self.adam_eps}')
        if int(self.seed) < 0:
            raise DomainError(f'seed must be >= 0, got {self.seed}')

    def to_dict(self) -> dict:
        return {
            'epochs': int(self.epochs),
            'batch_size': int(self.batch_size),
            'learning_rate': float(self.learning_rate),
            'adam_beta1': float(self.adam_beta1),
            'adam_beta2': float(self.adam_beta2),
            'adam_eps': float(self.adam_eps),
            'seed': int(self.seed)
        }


class Adam:
    """adaptive moment estimation over a flat parameter vector"""

    def __init__(self, size: int, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, epsilon: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon

        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grads: np.ndarray) -> None:
        """update `params` in place"""

        self.t += 1

        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        step_size = self.lr / bc1

        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grads

        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * (grads * grads)

        denom = np.sqrt(self.v * (1.0 / bc2)) + self.epsilon
        params -= step_size * self.m / denom


def init(config: NetworkConfig, seed: int = 0) -> ModelState:
    """
    Fan-in scaled (He) normal initialization, zero biases

    :param config: `pyevidential.network.NetworkConfig`
    :param seed: random seed

    :returns: `pyevidential.network.ModelState`
    """

    rng = RngStream(seed)
    sizes = config.layer_sizes

    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.generator.normal(0.0, np.sqrt(2.0 / fan_in),
                                            (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))

    LOGGER.debug(f'Initialized {config.parameter_count} parameters '
                 f'(seed {seed})')
    return ModelState(config, tuple(weights), tuple(biases), seed)


def _as_inputs(model: ModelState, t) -> tuple:
    x = np.asarray(t, dtype=float)
    single = x.ndim <= 1
    x = x.reshape(1, -1) if single else x

    if x.ndim != 2 or x.shape[1] != model.config.input_dim:
        raise DimensionMismatch(
            f'Expected inputs of dimension {model.config.input_dim}, '
            f'got shape {np.shape(t)}')

    return x, single


def _graph(model: ModelState, x: np.ndarray) -> tuple:
    """build the tape; returns the output node and parameter leaves"""

    leaves = []
    h = Tensor(x)
    last = len(model.weights) - 1

    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        w = Tensor(w)
        b = Tensor(b)
        leaves.extend([w, b])
        h = h @ w + b
        if i < last:
            h = h.relu()

    return h, leaves


def forward(model: ModelState, t) -> np.ndarray:
    """
    Raw head outputs for one input vector (or a batch of rows)

    :param model: `pyevidential.network.ModelState`
    :param t: input vector (input_dim,) or batch (B, input_dim)

    :returns: `numpy.ndarray` (output_dim,) or (B, output_dim)
    """

    x, single = _as_inputs(model, t)
    out, _ = _graph(model, x)

    return out.value[0] if single else out.value


def split_head(p, head: HeadConfig) -> tuple:
    """
    Split raw outputs into μ₀, ℓ, ν and dν/dp_last

    :param p: raw outputs (..., n(n+3)/2 + 1)
    :param head: `pyevidential.network.HeadConfig`

    :returns: `tuple` of (mu0, ell, nu, dnu)
    """

    p = np.asarray(p, dtype=float)
    n = head.n
    if p.shape[-1] != head_output_size(n):
        raise DimensionMismatch(
            f'n={n} needs {head_output_size(n)} outputs, got {p.shape[-1]}')

    k = tril_size(n)
    tanh = np.tanh(p[..., -1])
    nu = np.clip(head.nu_mid + head.nu_half_range * tanh,
                 np.nextafter(head.nu_lo, np.inf),
                 np.nextafter(head.nu_hi, -np.inf))
    assert np.all((nu > head.nu_lo) & (nu < head.nu_hi)), 'ν out of range'

    return (p[..., :n], p[..., n:n + k], nu,
            head.nu_half_range * (1.0 - tanh * tanh))


def head_transform(p, head: HeadConfig) -> CoupledHeadParams:
    """
    Raw outputs to (μ₀, ℓ, ν, r)

    :param p: raw outputs (n(n+3)/2 + 1,)
    :param head: `pyevidential.network.HeadConfig`

    :returns: `pyevidential.losses.CoupledHeadParams`
    """

    mu0, ell, nu, _ = split_head(p, head)
    return CoupledHeadParams(mu0, ell, float(nu), head.r)


def _loss_and_grad(model: ModelState, x: np.ndarray, y: np.ndarray) -> tuple:
    head = model.head
    if y.ndim != 2 or y.shape[1] != head.n:
        raise DimensionMismatch(
            f'Targets of shape {y.shape} for a head with n={head.n}')

    out, leaves = _graph(model, x)
    mu0, ell, nu, dnu = split_head(out.value, head)
    values, grads = coupled_niw_nll_batch(y, mu0, ell, nu, head.r)

    grads[:, -1] *= dnu
    grads /= values.shape[0]

    loss = Tensor.custom(values.mean(), (out,), lambda g: [g * grads],
                         'coupled_niw_nll')
    loss.backward()

    return float(loss.value), np.concatenate([
        leaf.grad.ravel() for leaf in leaves])


def loss_and_grad(model: ModelState, batch: Dataset) -> tuple:
    """
    Mean coupled NIW loss over a batch and its parameter gradient

    :param model: `pyevidential.network.ModelState`
    :param batch: `pyevidential.datagen.Dataset`

    :returns: `tuple` of mean loss `float` and gradient (parameter_count,)
    """

    x, _ = _as_inputs(model, batch.inputs)
    return _loss_and_grad(model, x, np.asarray(batch.y))


def _batches(size: int, batch_size: int, generator) -> list:
    if batch_size >= size:
        return [np.arange(size)]

    order = generator.permutation(size)
    return [order[i:i + batch_size] for i in range(0, size, batch_size)]


def train(model: ModelState, data: Dataset, cfg: TrainConfig) -> tuple:
    """
    Adaptive-moment training on the coupled NIW loss

    Full batch unless `batch_size` is smaller than the data, in which case
    every epoch draws a permutation from the training seed.

    :param model: `pyevidential.network.ModelState`
    :param data: `pyevidential.datagen.Dataset`
    :param cfg: `pyevidential.network.TrainConfig`

    :returns: `tuple` of trained `ModelState` and `list` of per-epoch mean
              loss
    """

    x, _ = _as_inputs(model, data.inputs)
    y = np.asarray(data.y)
    generator = RngStream(cfg.seed).generator

    theta = model.parameters()
    optimizer = Adam(theta.shape[0], cfg.learning_rate, cfg.adam_beta1,
                     cfg.adam_beta2, cfg.adam_eps)

    LOGGER.info(f'Training {model.parameter_count} parameters on '
                f'{len(data)} points for {cfg.epochs} epochs')

    history = []
    for epoch in range(int(cfg.epochs)):
        total = 0.0
        for indices in _batches(len(data), int(cfg.batch_size), generator):
            loss, grads = _loss_and_grad(model.with_parameters(theta),
                                         x[indices], y[indices])
            if not (np.isfinite(loss) and np.all(np.isfinite(grads))):
                msg = f'Non-finite loss {loss} at epoch {epoch}'
                LOGGER.error(msg)
                raise NonFiniteLoss(msg, epoch)

            optimizer.step(theta, grads)
            total += loss * len(indices)

        history.append(total / len(data))
        if epoch % 100 == 0:
            LOGGER.debug(f'epoch {epoch}: loss {history[-1]}')

    if not np.all(np.isfinite(theta)):
        raise NonFiniteLoss('Non-finite parameters after training',
                            int(cfg.epochs) - 1)

    LOGGER.info(f'Final loss {history[-1]}')
    return model.with_parameters(theta), history


def predict(model: ModelState, t) -> UncertaintyReport:
    """
    Prediction with aleatoric and epistemic covariances for one input

    :param model: `pyevidential.network.ModelState`
    :param t: input vector (input_dim,)

    :returns: `pyevidential.losses.UncertaintyReport`
    """

    return uncertainty_from_head(head_transform(forward(model, t),
                                                model.head))


def predict_grid(model: ModelState, ts) -> list:
    """
    Predictions along a grid of inputs

    :param model: `pyevidential.network.ModelState`
    :param ts: inputs (G,) for input_dim 1, else (G, input_dim)

    :returns: `list` of `pyevidential.losses.UncertaintyReport`
    """

    x = np.asarray(ts, dtype=float).reshape(-1, model.config.input_dim)
    outputs = forward(model, x)

    return [uncertainty_from_head(head_transform(p, model.head))
            for p in outputs]


def save_model(model: ModelState, filename: Path) -> Path:
    """
    Write a model checkpoint (JSON, schema validated)

    :param model: `pyevidential.network.ModelState`
    :param filename: path to checkpoint

    :returns: `pathlib.Path` of checkpoint
    """

    return write_json(filename, model.to_dict(), 'checkpoint.json')


def load_model(filename: Path) -> ModelState:
    """
    Read a model checkpoint

    :param filename: path to checkpoint

    :returns: `pyevidential.network.ModelState`
    """

    return ModelState.from_dict(read_json(filename, 'checkpoint.json'))


def report_row(t, report: UncertaintyReport) -> list:
    """CSV row: t, prediction, ν, upper triangles of both covariances"""

    rows, cols = np.triu_indices(report.prediction.shape[0])
    return ([t, *report.prediction, report.nu,
             *report.aleatoric[rows, cols], *report.epistemic[rows, cols]])


def report_header(n: int) -> list:
    rows, cols = np.triu_indices(n)
    pairs = [f'{i + 1}{j + 1}' for i, j in zip(rows, cols)]

    return (['t'] + [f'mu{i + 1}' for i in range(n)] + ['nu']
            + [f'aleatoric_{p}' for p in pairs]
            + [f'epistemic_{p}' for p in pairs])


@click.command('train')
@click.pass_context
@get_cli_common_options
@click.option('--data', '-d', required=True,
              type=click.Path(exists=True, dir_okay=False),
              help='Dataset CSV')
@click.option('--out-dir', '-o', type=click.Path(file_okay=False),
              help='Output directory')
@click.option('--epochs', type=click.IntRange(min=1), default=2000,
              help='Number of epochs')
@click.option('--batch-size', type=click.IntRange(min=1), default=300,
              help='Minibatch size')
@click.option('--lr', type=click.FloatRange(min=0), default=1e-3,
              help='Learning rate')
@click.option('--hidden', default='32,32', callback=parse_int_list,
              help='Hidden layer widths (comma-separated)')
@click.option('--r', 'r', type=click.FloatRange(min=0, min_open=True),
              default=1.0, help='Coupling ν = rκ')
@click.option('--nu-lo', type=float, help='Lower ν bound, >= n+1')
@click.option('--nu-hi', type=float, help='Upper ν bound (default n+11)')
@click.option('--seed', type=click.IntRange(min=0), default=0,
              help='Random seed')
def train_command(ctx, data, out_dir, epochs, batch_size, lr, hidden, r,
                  nu_lo, nu_hi, seed, logfile, verbosity):
    """train an evidential network"""

    setup_logger(verbosity, logfile)

    out_dir = Path(out_dir) if out_dir else get_output_dir() / 'train'
    start = time.perf_counter()

    try:
        dataset = read_dataset(data)
        config = NetworkConfig(dataset.inputs.shape[1], hidden, 'relu',
                               HeadConfig(dataset.n, r, nu_lo, nu_hi))
        cfg = TrainConfig(epochs, batch_size, lr, seed=seed)
        model, history = train(init(config, seed), dataset, cfg)
        checkpoint = save_model(model, out_dir / 'model.json')
    except NonFiniteLoss as err:
        raise click.ClickException(f'{err} (epoch {err.epoch})')
    except (EvidentialError, OSError) as err:
        raise click.ClickException(str(err))

    history_csv = write_csv(out_dir / 'history.csv', ['epoch', 'loss'],
                            enumerate(history))

    parameters = {
        'data': str(data),
        'network': config.to_dict(),
        'train': cfg.to_dict()
    }
    write_provenance(out_dir / 'train.provenance.json', 'train', parameters,
                     [seed], wall_time_seconds=time.perf_counter() - start,
                     outputs=[checkpoint.name, history_csv.name])

    click.echo(f'Final loss {history[-1]}; checkpoint {checkpoint}')


@click.command('predict')
@click.pass_context
@get_cli_common_options
@click.option('--model', '-m', 'model_file', required=True,
              type=click.Path(exists=True, dir_okay=False),
              help='Model checkpoint')
@click.option('--t', 't_values', type=float, multiple=True,
              help='Input value (repeatable)')
@click.option('--grid-points', type=click.IntRange(min=2), default=200,
              help='Uniform grid on [0, 2π] when no --t is given')
@click.option('--out', '-o', type=click.Path(dir_okay=False),
              help='Output CSV file')
def predict_command(ctx, model_file, t_values, grid_points, out, logfile,
                    verbosity):
    """predict with uncertainties"""

    setup_logger(verbosity, logfile)

    out = Path(out) if out else get_output_dir() / 'predictions.csv'
    ts = (np.array(t_values) if t_values
          else np.linspace(0, 2 * np.pi, grid_points))

    try:
        model = load_model(model_file)
        reports = predict_grid(model, ts)
    except (EvidentialError, OSError) as err:
        raise click.ClickException(str(err))

    filename = write_csv(out, report_header(model.head.n),
                         [report_row(t, r) for t, r in zip(ts, reports)])
    write_provenance(out.with_name(f'{out.stem}.provenance.json'), 'predict',
                     {'model': str(model_file), 't': ts.tolist()},
                     [model.seed], outputs=[filename.name])

    click.echo(f'Wrote {len(reports)} predictions to {filename}')
