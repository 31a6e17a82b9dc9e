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

# reproducible experiments: degeneration, Student-t fit bias, ν-gate ensemble

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import logging
from pathlib import Path
import time

import click
import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import digamma, gammaln

from pyevidential.datagen import (Dataset, read_dataset,
                                  student_t_samples, true_correlation_sign)
from pyevidential.distributions import (NigParams, RngStream, derive_seeds,
                                        student_t_logpdf)
from pyevidential.errors import (DimensionMismatch, DomainError,
                                 EvidentialError, FitDiverged,
                                 NonFiniteLoss)
from pyevidential.losses import (EvidenceKind, RegularizerConfig, nig_nll,
                                 regularized_nig_nll)
from pyevidential.network import (HeadConfig, NetworkConfig, TrainConfig,
                                  init, predict_grid, train)
from pyevidential.util import (get_cli_common_options, get_output_dir,
                               parse_int_list, setup_logger, write_csv,
                               write_provenance)

LOGGER = logging.getLogger(__name__)

FIT_STARTS = 5
FIT_MAXITER = 500
BOOTSTRAP_RESAMPLES = 2000
RESIDUAL_QUANTILES = (0.16, 0.5, 0.84)
STUDENT_T_PARAMETERS = ('nu', 'mu', 'sigma2')


def run_tasks(function, tasks: list, jobs: int = 1) -> list:
    """
    Map `function` over `tasks`, in a process pool when `jobs` > 1

    Results keep task order.

    :param function: picklable module-level callable
    :param tasks: `list` of task arguments
    :param jobs: maximum number of worker processes

    :returns: `list` of results
    """

    if jobs <= 1 or len(tasks) <= 1:
        return [function(task) for task in tasks]

    LOGGER.debug(f'Running {len(tasks)} tasks on {jobs} workers')
    chunksize = max(1, len(tasks) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(function, tasks, chunksize=chunksize))


def degeneration_scan(alpha: float, y_minus_mu0: float, product: float,
                      kappa_grid, regularizer: RegularizerConfig = None
                      ) -> list:
    """
    NIG loss along the manifold β(1+κ)/κ = product

    :param alpha: fixed α
    :param y_minus_mu0: residual y - μ₀
    :param product: value of β(1+κ)/κ
    :param kappa_grid: positive κ values
    :param regularizer: optional `RegularizerConfig` for a `total` column

    :returns: `list` of `dict` rows (kappa, beta, nll[, total])
    """

    kappa_grid = np.asarray(kappa_grid, dtype=float)
    if not product > 0:
        raise DomainError(f'product must be positive, got {product}')
    if kappa_grid.size == 0 or np.any(~(kappa_grid > 0)):
        raise DomainError('kappa grid must be non-empty and positive')

    rows = []
    for kappa in kappa_grid:
        beta = product * kappa / (1 + kappa)
        p = NigParams(0.0, float(kappa), alpha, float(beta))
        row = {'kappa': float(kappa), 'beta': float(beta),
               'nll': nig_nll(y_minus_mu0, p).value}
        if regularizer is not None:
            row['total'] = regularized_nig_nll(y_minus_mu0, p,
                                               regularizer).value
        rows.append(row)

    return rows


@dataclass(frozen=True)
class StudentTFit:
    """Maximum-likelihood Student-t parameters"""

    nu: float
    mu: float
    sigma2: float
    converged: bool
    log_likelihood: float = None


def _student_t_objective(theta: np.ndarray, x: np.ndarray) -> tuple:
    """mean negative log-likelihood in (log ν, μ, log σ²) and its gradient"""

    nu = np.exp(theta[0])
    mu = theta[1]
    sigma2 = np.exp(theta[2])

    d = x - mu
    d2 = d * d
    denom = nu * sigma2 + d2
    log_term = np.log1p(d2 / (nu * sigma2))

    loglik = (gammaln(0.5 * (nu + 1)) - gammaln(0.5 * nu)
              - 0.5 * np.log(nu * np.pi * sigma2)
              - 0.5 * (nu + 1) * log_term)

    dnu = (0.5 * digamma(0.5 * (nu + 1)) - 0.5 * digamma(0.5 * nu)
           - 0.5 / nu - 0.5 * log_term + 0.5 * (nu + 1) * d2 / (nu * denom))
    dmu = (nu + 1) * d / denom
    dsigma2 = -0.5 / sigma2 + 0.5 * (nu + 1) * d2 / (sigma2 * denom)

    gradient = np.array([nu * dnu.mean(), dmu.mean(),
                         sigma2 * dsigma2.mean()])

    return -loglik.mean(), -gradient


def fit_student_t(samples, bounds: tuple = (0.5, 100.0),
                  starts: int = FIT_STARTS) -> StudentTFit:
    """
    Student-t maximum likelihood by multi-start bounded L-BFGS-B

    Optimizes (log ν, μ, log σ²) with the analytic gradient; ν is bounded.
    A start counts as converged when it terminates on a finite objective
    without exhausting its iterations; `converged` on the result reports
    whether the best start also met the optimizer's own stopping test.

    :param samples: at least 10 real values
    :param bounds: (lower, upper) bounds on ν
    :param starts: number of ν starting values (geometric between bounds)

    :returns: `pyevidential.experiments.StudentTFit`
    """

    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.shape[0] < 10:
        raise DomainError(f'Need at least 10 samples, got {x.shape[0]}')
    if not np.all(np.isfinite(x)):
        raise DomainError('Non-finite samples')

    nu_lo, nu_hi = bounds
    if not 0 < nu_lo < nu_hi:
        raise DomainError(f'Invalid nu bounds {bounds}')

    mu_start = np.median(x)
    q25, q75 = np.quantile(x, [0.25, 0.75])
    scale = (q75 - q25) / 1.349
    if not scale > 0:
        scale = max(np.std(x), 1e-3)

    nu_starts = np.geomspace(min(2 * nu_lo, nu_hi), max(nu_hi / 2, nu_lo),
                             starts)
    log_bounds = [(np.log(nu_lo), np.log(nu_hi)), (None, None), (None, None)]

    best = None
    errors = []
    for nu_start in nu_starts:
        theta0 = np.array([np.log(nu_start), mu_start, 2 * np.log(scale)])
        result = minimize(_student_t_objective, theta0, args=(x,), jac=True,
                          method='L-BFGS-B', bounds=log_bounds,
                          options={'maxiter': FIT_MAXITER})

        if not np.isfinite(result.fun) or result.nit >= FIT_MAXITER:
            msg = f'start nu={nu_start:.3g}: {result.message}'
            LOGGER.debug(msg)
            errors.append(msg)
            continue

        if best is None or result.fun < best.fun:
            best = result

    if best is None:
        msg = f'No Student-t fit converged ({len(errors)} starts)'
        LOGGER.warning(msg)
        raise FitDiverged(msg, errors)

    return StudentTFit(float(np.exp(best.x[0])), float(best.x[1]),
                       float(np.exp(best.x[2])), bool(best.success),
                       float(-best.fun * x.shape[0]))


def fit_scale_fixed_nu(nu_fit: float, nu_data: float = 2.0,
                       interval: tuple = (-3.0, 3.0),
                       points: int = 601) -> float:
    """
    Least-squares scale of a St_ν(0, σ²) density with ν held at `nu_fit`,
    matched to the standard St_{nu_data} density on `interval`

    :param nu_fit: degrees of freedom of the fitted density
    :param nu_data: degrees of freedom of the target density
    :param interval: (lower, upper) evaluation range
    :param points: number of evaluation points

    :returns: fitted σ
    """

    lower, upper = interval
    if not (nu_fit > 0 and nu_data > 0):
        raise DomainError(f'Invalid degrees of freedom {nu_fit}, {nu_data}')
    if not lower < upper or int(points) < 2:
        raise DomainError(f'Invalid interval {interval} or points {points}')

    x = np.linspace(lower, upper, int(points))
    target = np.exp(student_t_logpdf(x, nu_data, 0.0, 1.0))

    def objective(log_sigma):
        density = np.exp(student_t_logpdf(x, nu_fit, 0.0,
                                          np.exp(2 * log_sigma)))
        return float(np.sum((density - target) ** 2))

    result = minimize_scalar(objective, bounds=(np.log(1e-3), np.log(1e3)),
                             method='bounded', options={'xatol': 1e-10})
    if not result.success:
        raise FitDiverged(f'Scale fit with nu={nu_fit} failed',
                          [str(result.message)])

    return float(np.exp(result.x))


def nu_scale_profile(nu_values, nu_data: float = 2.0,
                     interval: tuple = (-3.0, 3.0)) -> list:
    """
    Fitted σ for each fixed ν against the same core-only target

    :returns: `list` of `dict` rows (nu, sigma)
    """

    return [{'nu': float(nu),
             'sigma': fit_scale_fixed_nu(float(nu), nu_data, interval)}
            for nu in nu_values]


@dataclass(frozen=True)
class BiasStudyConfig:
    """Repeated Student-t fits at growing sample sizes"""

    gt_nu: float = 3.0
    gt_mu: float = 0.0
    gt_sigma2: float = 1.0
    sample_sizes: tuple = (20, 50, 100, 200, 500, 1000)
    repetitions: int = 200
    fit_bounds: tuple = (0.5, 100.0)
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sample_sizes)
        if not sizes or sizes[0] < 10 or \
                any(a >= b for a, b in zip(sizes[:-1], sizes[1:])):
            raise DomainError(
                f'sample_sizes must be ascending and >= 10, got {sizes}')
        if int(self.repetitions) < 2:
            raise DomainError(
                f'repetitions must be >= 2, got {self.repetitions}')
        if not (self.gt_nu > 0 and self.gt_sigma2 > 0):
            raise DomainError('Invalid ground-truth Student-t parameters')
        if not 0 < self.fit_bounds[0] < self.fit_bounds[1]:
            raise DomainError(f'Invalid fit bounds {self.fit_bounds}')

        object.__setattr__(self, 'sample_sizes', sizes)
        object.__setattr__(self, 'fit_bounds',
                           tuple(float(b) for b in self.fit_bounds))

    @property
    def ground_truth(self) -> np.ndarray:
        return np.array([self.gt_nu, self.gt_mu, self.gt_sigma2])

    def to_dict(self) -> dict:
        return {
            'gt_nu': float(self.gt_nu),
            'gt_mu': float(self.gt_mu),
            'gt_sigma2': float(self.gt_sigma2),
            'sample_sizes': list(self.sample_sizes),
            'repetitions': int(self.repetitions),
            'fit_bounds': list(self.fit_bounds),
            'seed': int(self.seed)
        }


@dataclass(frozen=True, eq=False)
class ResidualTable:
    """
    Fitted-minus-ground-truth residuals per sample size

    `residuals` maps each sample size to an array (fits, 3) over
    (ν, μ, σ²); `failed` counts diverged fits per size.
    """

    residuals: dict
    failed: dict

    @property
    def sample_sizes(self) -> list:
        return sorted(self.residuals)

    def quantiles(self, size: int) -> np.ndarray:
        """(3 quantiles, 3 parameters) at 16%, 50% and 84%"""

        return np.quantile(self.residuals[size], RESIDUAL_QUANTILES, axis=0)

    def median_abs_residual(self, size: int, parameter: str = 'nu') -> float:
        column = STUDENT_T_PARAMETERS.index(parameter)
        return float(np.median(np.abs(self.residuals[size][:, column])))

    @property
    def total_failed(self) -> int:
        return sum(self.failed.values())

    @staticmethod
    def header() -> list:
        columns = ['sample_size', 'fits', 'failed']
        for name in STUDENT_T_PARAMETERS:
            columns.extend([f'{name}_q16', f'{name}_median', f'{name}_q84'])
        return columns

    def rows(self) -> list:
        rows = []
        for size in self.sample_sizes:
            row = [size, self.residuals[size].shape[0], self.failed[size]]
            if self.residuals[size].shape[0] == 0:
                row.extend([None] * 3 * len(STUDENT_T_PARAMETERS))
            else:
                q = self.quantiles(size)
                for column in range(len(STUDENT_T_PARAMETERS)):
                    row.extend(q[:, column])
            rows.append(row)
        return rows


def _bias_fit(task: tuple) -> tuple:
    size, rng, cfg = task

    samples = student_t_samples(cfg.gt_nu, cfg.gt_mu, cfg.gt_sigma2, size, rng)
    try:
        fit = fit_student_t(samples, cfg.fit_bounds)
    except FitDiverged as err:
        return size, None, str(err)

    residual = np.array([fit.nu, fit.mu, fit.sigma2]) - cfg.ground_truth
    return size, residual, None


def bias_study(cfg: BiasStudyConfig, jobs: int = 1) -> ResidualTable:
    """
    Fit bias of Student-t maximum likelihood versus sample size

    Every fit draws from its own child stream of the configured seed, so
    results do not depend on `jobs`.

    :param cfg: `pyevidential.experiments.BiasStudyConfig`
    :param jobs: number of worker processes

    :returns: `pyevidential.experiments.ResidualTable`
    """

    sizes = [size for size in cfg.sample_sizes
             for _ in range(cfg.repetitions)]
    streams = RngStream(cfg.seed).split(len(sizes))
    tasks = [(size, rng, cfg) for size, rng in zip(sizes, streams)]

    LOGGER.info(f'Running {len(tasks)} Student-t fits')
    residuals = {size: [] for size in cfg.sample_sizes}
    failed = {size: 0 for size in cfg.sample_sizes}

    for size, residual, error in run_tasks(_bias_fit, tasks, jobs):
        if residual is None:
            LOGGER.warning(f'Fit at size {size} diverged: {error}')
            failed[size] += 1
        else:
            residuals[size].append(residual)

    return ResidualTable(
        {size: np.array(r).reshape(-1, 3) for size, r in residuals.items()},
        failed)


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    """
    Predictions of independently trained models along an input grid

    Arrays are indexed (model, grid point, ...) over the converged models
    listed in `members`.
    """

    grid: np.ndarray
    seeds: list
    members: list
    prediction: np.ndarray
    nu: np.ndarray
    aleatoric: np.ndarray
    epistemic: np.ndarray
    final_loss: np.ndarray
    failed: list = field(default_factory=list)

    @property
    def correlation(self) -> np.ndarray:
        """corr(y₁, y₂) from the aleatoric covariance (models, grid)"""

        if self.aleatoric.shape[-1] != 2:
            raise DimensionMismatch('correlation needs n=2')

        cov = self.aleatoric
        corr = cov[..., 0, 1] / np.sqrt(cov[..., 0, 0] * cov[..., 1, 1])
        return np.clip(corr, -1.0, 1.0)

    def grid_index(self, t: float) -> int:
        return int(np.argmin(np.abs(self.grid - t)))


def _train_member(task: tuple) -> dict:
    index, seed, dataset, network_config, train_cfg, grid = task

    model = init(network_config, seed)
    try:
        model, history = train(model, dataset, replace(train_cfg, seed=seed))
        reports = predict_grid(model, grid)
    except NonFiniteLoss as err:
        return {'index': index, 'seed': seed,
                'error': f'{err} (epoch {err.epoch})'}
    except DomainError as err:
        return {'index': index, 'seed': seed, 'error': str(err)}

    return {
        'index': index,
        'seed': seed,
        'error': None,
        'prediction': np.array([r.prediction for r in reports]),
        'nu': np.array([r.nu for r in reports]),
        'aleatoric': np.array([r.aleatoric for r in reports]),
        'epistemic': np.array([r.epistemic for r in reports]),
        'final_loss': history[-1]
    }


def circle_ensemble(dataset: Dataset, k_models: int, train_cfg: TrainConfig,
                    eval_grid, network_config: NetworkConfig = None,
                    jobs: int = 1) -> EnsembleResult:
    """
    Train `k_models` networks from distinct seeds and evaluate them on a grid

    Member seeds derive from `train_cfg.seed`; members that hit a
    non-finite loss or leave the domain of the loss are recorded in `failed`
    and excluded.

    :param dataset: `pyevidential.datagen.Dataset` with n=2
    :param k_models: number of models
    :param train_cfg: `pyevidential.network.TrainConfig`
    :param eval_grid: evaluation inputs
    :param network_config: `pyevidential.network.NetworkConfig`
                           (default: [32, 32] ReLU, n=2 head)
    :param jobs: number of worker processes

    :returns: `pyevidential.experiments.EnsembleResult`
    """

    if dataset.n != 2:
        raise DimensionMismatch(f'Circle ensemble needs n=2, got {dataset.n}')
    if int(k_models) < 1:
        raise DomainError(f'k_models must be >= 1, got {k_models}')

    if network_config is None:
        network_config = NetworkConfig(head=HeadConfig(n=2))

    grid = np.asarray(eval_grid, dtype=float).reshape(-1)
    seeds = derive_seeds(train_cfg.seed, int(k_models))
    tasks = [(i, seed, dataset, network_config, train_cfg, grid)
             for i, seed in enumerate(seeds)]

    LOGGER.info(f'Training an ensemble of {k_models} models')
    results = run_tasks(_train_member, tasks, jobs)

    converged = [r for r in results if r['error'] is None]
    failed = [(r['index'], r['seed'], r['error']) for r in results
              if r['error'] is not None]
    for index, seed, error in failed:
        LOGGER.warning(f'Ensemble member {index} (seed {seed}) failed: '
                       f'{error}')

    n = network_config.head.n
    g = grid.shape[0]

    def stack(key, shape):
        if not converged:
            return np.zeros((0,) + shape)
        return np.array([r[key] for r in converged])

    return EnsembleResult(
        grid, seeds, [r['index'] for r in converged],
        stack('prediction', (g, n)), stack('nu', (g,)),
        stack('aleatoric', (g, n, n)), stack('epistemic', (g, n, n)),
        stack('final_loss', ()), failed)


def correlation_curve(result: EnsembleResult) -> tuple:
    """
    Per-model and median correlation along the grid

    :param result: `pyevidential.experiments.EnsembleResult`

    :returns: `tuple` of header `list` and `list` of rows
              (t, median_corr, true_sign, per-model corr...)
    """

    if not result.members:
        raise DomainError('Ensemble has no converged members')

    corr = result.correlation
    median = np.median(corr, axis=0)

    header = (['t', 'median_corr', 'true_sign']
              + [f'corr_{result.seeds[i]}' for i in result.members])
    rows = [[t, median[j], true_correlation_sign(t), *corr[:, j]]
            for j, t in enumerate(result.grid)]

    return header, rows


def _bootstrap_median(values: np.ndarray, rng: RngStream,
                      resamples: int) -> tuple:
    picks = rng.generator.integers(0, values.shape[0],
                                   (resamples, values.shape[0]))
    medians = np.median(values[picks], axis=1)
    return tuple(np.quantile(medians, [0.025, 0.975]))


def nu_gate_comparison(result: EnsembleResult, t_sparse: float = np.pi,
                       t_dense: float = 0.1,
                       resamples: int = BOOTSTRAP_RESAMPLES,
                       seed: int = 0) -> dict:
    """
    Median ν across models where data are sparse vs dense

    :param result: `pyevidential.experiments.EnsembleResult`
    :param t_sparse: input in the sparse region
    :param t_dense: input in the dense region
    :param resamples: bootstrap resamples
    :param seed: bootstrap seed

    :returns: `dict` of medians, 95% bootstrap intervals and whether the
              intervals are disjoint with the sparse one below
    """

    if not result.members:
        raise DomainError('Ensemble has no converged members')

    rng = RngStream(seed)
    comparison = {}
    for key, t in [('sparse', t_sparse), ('dense', t_dense)]:
        j = result.grid_index(t)
        values = result.nu[:, j]
        comparison[key] = {
            't': float(result.grid[j]),
            'median': float(np.median(values)),
            'interval': [float(v) for v in
                         _bootstrap_median(values, rng, resamples)]
        }

    comparison['gate_closes'] = (comparison['sparse']['median']
                                 < comparison['dense']['median'])
    comparison['disjoint'] = (comparison['sparse']['interval'][1]
                              < comparison['dense']['interval'][0])

    return comparison


def member_rows(result: EnsembleResult) -> list:
    """rows of (model, seed, t, x, y, nu, cov_xx, cov_xy, cov_yy, corr)"""

    corr = result.correlation
    rows = []
    for k, index in enumerate(result.members):
        for j, t in enumerate(result.grid):
            cov = result.aleatoric[k, j]
            rows.append([index, result.seeds[index], t,
                         *result.prediction[k, j], result.nu[k, j],
                         cov[0, 0], cov[0, 1], cov[1, 1], corr[k, j]])
    return rows


MEMBER_HEADER = ['model', 'seed', 't', 'x', 'y', 'nu', 'cov_xx', 'cov_xy',
                 'cov_yy', 'corr']


def _out_dir(out_dir, name: str) -> Path:
    return Path(out_dir) if out_dir else get_output_dir() / name


@click.command()
@click.pass_context
@get_cli_common_options
@click.option('--alpha', type=click.FloatRange(min=0, min_open=True),
              default=2.0, help='Fixed α')
@click.option('--product', type=click.FloatRange(min=0, min_open=True),
              default=2.0, help='β(1+κ)/κ along the scan')
@click.option('--residual', type=float, default=1.0, help='y - μ₀')
@click.option('--kappa-min', type=click.FloatRange(min=0, min_open=True),
              default=1e-3, help='Smallest κ')
@click.option('--kappa-max', type=click.FloatRange(min=0, min_open=True),
              default=1e3, help='Largest κ')
@click.option('--points', type=click.IntRange(min=2), default=61,
              help='Number of κ values (log-spaced)')
@click.option('--evidence', type=click.Choice(['legacy', 'virtual', 'none']),
              default='legacy', help='Evidence regularizer variant')
@click.option('--coupling', type=click.FloatRange(min=0), default=1.0,
              help='Regularizer weight λ')
@click.option('--out-dir', '-o', type=click.Path(file_okay=False),
              help='Output directory')
def degeneration(ctx, alpha, product, residual, kappa_min, kappa_max, points,
                 evidence, coupling, out_dir, logfile, verbosity):
    """scan the NIG loss along a degenerate manifold"""

    setup_logger(verbosity, logfile)

    out_dir = _out_dir(out_dir, 'degeneration')
    start = time.perf_counter()

    regularizer = None
    if evidence != 'none':
        regularizer = RegularizerConfig(coupling, EvidenceKind(evidence))

    kappa_grid = np.geomspace(kappa_min, kappa_max, points)
    rows = degeneration_scan(alpha, residual, product, kappa_grid,
                             regularizer)

    header = list(rows[0])
    filename = write_csv(out_dir / 'degeneration.csv', header,
                         [[row[key] for key in header] for row in rows])

    parameters = {
        'alpha': alpha, 'product': product, 'residual': residual,
        'kappa_min': kappa_min, 'kappa_max': kappa_max, 'points': points,
        'evidence': evidence, 'coupling': coupling
    }
    write_provenance(out_dir / 'degeneration.provenance.json',
                     'degeneration', parameters,
                     wall_time_seconds=time.perf_counter() - start,
                     outputs=[filename.name])

    nll = np.array([row['nll'] for row in rows])
    click.echo(f'Wrote {filename} (NLL spread {np.ptp(nll):.3e})')


@click.command('bias-study')
@click.pass_context
@get_cli_common_options
@click.option('--reps', type=click.IntRange(min=2), default=200,
              help='Fits per sample size')
@click.option('--sizes', default='20,50,100,200,500,1000',
              callback=parse_int_list, help='Sample sizes (comma-separated)')
@click.option('--gt-nu', type=click.FloatRange(min=0, min_open=True),
              default=3.0, help='Ground-truth ν')
@click.option('--gt-mu', type=float, default=0.0, help='Ground-truth μ')
@click.option('--gt-sigma2', type=click.FloatRange(min=0, min_open=True),
              default=1.0, help='Ground-truth σ²')
@click.option('--nu-min', type=click.FloatRange(min=0, min_open=True),
              default=0.5, help='Lower ν fit bound')
@click.option('--nu-max', type=float, default=100.0,
              help='Upper ν fit bound')
@click.option('--seed', type=click.IntRange(min=0), default=0,
              help='Random seed')
@click.option('--jobs', '-j', type=click.IntRange(min=1), default=1,
              help='Worker processes')
@click.option('--max-failures', type=click.IntRange(min=0), default=10,
              help='Diverged fits tolerated before failing')
@click.option('--out-dir', '-o', type=click.Path(file_okay=False),
              help='Output directory')
def bias_study_command(ctx, reps, sizes, gt_nu, gt_mu, gt_sigma2, nu_min,
                       nu_max, seed, jobs, max_failures, out_dir, logfile,
                       verbosity):
    """Student-t fit bias versus sample size"""

    setup_logger(verbosity, logfile)

    out_dir = _out_dir(out_dir, 'bias-study')
    start = time.perf_counter()

    try:
        cfg = BiasStudyConfig(gt_nu, gt_mu, gt_sigma2, sizes, reps,
                              (nu_min, nu_max), seed)
    except DomainError as err:
        raise click.UsageError(str(err))

    table = bias_study(cfg, jobs)

    filename = write_csv(out_dir / 'residuals.csv', table.header(),
                         table.rows())
    write_provenance(out_dir / 'bias-study.provenance.json', 'bias-study',
                     cfg.to_dict(), [seed],
                     wall_time_seconds=time.perf_counter() - start,
                     outputs=[filename.name])

    click.echo(f'Wrote {filename} ({table.total_failed} failed fits)')

    if table.total_failed > max_failures:
        raise click.ClickException(
            f'{table.total_failed} fits diverged (budget {max_failures})')


@click.command()
@click.pass_context
@get_cli_common_options
@click.option('--data', '-d', required=True,
              type=click.Path(exists=True, dir_okay=False),
              help='Circle dataset CSV')
@click.option('--models', type=click.IntRange(min=1), default=20,
              help='Number of models')
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
@click.option('--nu-lo', type=float, help='Lower ν bound, >= 3')
@click.option('--nu-hi', type=float, help='Upper ν bound (default 13)')
@click.option('--grid-points', type=click.IntRange(min=2), default=200,
              help='Uniform evaluation grid on [0, 2π]')
@click.option('--seed', type=click.IntRange(min=0), default=0,
              help='Random seed')
@click.option('--jobs', '-j', type=click.IntRange(min=1), default=1,
              help='Worker processes')
@click.option('--max-failures', type=click.IntRange(min=0), default=5,
              help='Failed models tolerated before failing')
@click.option('--out-dir', '-o', type=click.Path(file_okay=False),
              help='Output directory')
def ensemble(ctx, data, models, epochs, batch_size, lr, hidden, r, nu_lo,
             nu_hi, grid_points, seed, jobs, max_failures, out_dir, logfile,
             verbosity):
    """train a ν-gate ensemble on the circle dataset"""

    setup_logger(verbosity, logfile)

    out_dir = _out_dir(out_dir, 'ensemble')
    start = time.perf_counter()

    try:
        dataset = read_dataset(data)
        network_config = NetworkConfig(1, hidden, 'relu',
                                       HeadConfig(2, r, nu_lo, nu_hi))
        train_cfg = TrainConfig(epochs, batch_size, lr, seed=seed)
        grid = np.linspace(0, 2 * np.pi, grid_points)
        result = circle_ensemble(dataset, models, train_cfg, grid,
                                 network_config, jobs)
    except (EvidentialError, OSError) as err:
        raise click.ClickException(str(err))

    outputs = []
    if result.members:
        outputs.append(write_csv(out_dir / 'members.csv', MEMBER_HEADER,
                                 member_rows(result)))
        outputs.append(write_csv(out_dir / 'correlation.csv',
                                 *correlation_curve(result)))

        gate = nu_gate_comparison(result, seed=seed)
        outputs.append(write_csv(
            out_dir / 'nu_gate.csv',
            ['region', 't', 'median', 'lower', 'upper'],
            [[key, gate[key]['t'], gate[key]['median'],
              *gate[key]['interval']] for key in ['sparse', 'dense']]))
        click.echo(f"median nu: sparse {gate['sparse']['median']:.3f}, "
                   f"dense {gate['dense']['median']:.3f}")

    parameters = {
        'data': str(data),
        'models': models,
        'grid_points': grid_points,
        'network': network_config.to_dict(),
        'train': train_cfg.to_dict(),
        'failed': [list(f) for f in result.failed]
    }
    write_provenance(out_dir / 'ensemble.provenance.json', 'ensemble',
                     parameters, result.seeds,
                     wall_time_seconds=time.perf_counter() - start,
                     outputs=[o.name for o in outputs])

    if not result.members or len(result.failed) > max_failures:
        raise click.ClickException(
            f'{len(result.failed)} of {models} models failed '
            f'(budget {max_failures})')

    click.echo(f'Wrote {len(result.members)} models to {out_dir}')
