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

# oracle suite: closed forms against Monte Carlo, finite differences and
# conjugacy identities

import json
import logging
from pathlib import Path
import uuid
import zlib

import click
import numpy as np
from scipy.stats import binom, norm

import pyevidential
from pyevidential.datagen import Dataset
from pyevidential.distributions import (EvidentialParams, NigParams,
                                        RngStream, model_evidence_logpdf,
                                        model_evidence_mc, niw_moments,
                                        posterior_update, sample_niw_batch)
from pyevidential.errors import VerificationError
from pyevidential.experiments import degeneration_scan
from pyevidential.linalg import (CholeskyFactor, cholesky,
                                 sylvester_logdet_rank1)
from pyevidential.losses import (CoupledHeadParams, EvidenceKind,
                                 RegularizerConfig, coupled_niw_nll,
                                 gaussian_nll, nig_nll, niw_nll, tril_size)
from pyevidential.network import (HeadConfig, NetworkConfig, init,
                                  loss_and_grad)
from pyevidential.util import (get_cli_common_options,
                               get_current_datetime_rfc3339, setup_logger,
                               write_json)

LOGGER = logging.getLogger(__name__)

GRADIENT_RTOL = 1e-5
GRADIENT_ATOL = 1e-8
MC_STDERRS = 3.0
MOMENT_STDERRS = 4.0
MOMENT_DRAWS = 100_000


def finite_difference_gradient(function, x, step: float = 1e-6) -> np.ndarray:
    """
    Central finite-difference gradient of a scalar function

    :param function: callable of a flat parameter vector
    :param x: point
    :param step: relative step size

    :returns: `numpy.ndarray` of the gradient
    """

    x = np.array(x, dtype=float)
    gradient = np.zeros_like(x)

    for i in range(x.shape[0]):
        h = step * max(1.0, abs(x[i]))
        plus = x.copy()
        minus = x.copy()
        plus[i] += h
        minus[i] -= h
        gradient[i] = (function(plus) - function(minus)) / (2 * h)

    return gradient


def gradient_mismatch(analytic, numeric) -> list:
    """
    Indices where an analytic gradient disagrees with finite differences

    :param analytic: analytic gradient
    :param numeric: finite-difference gradient

    :returns: `list` of offending indices
    """

    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    bad = np.abs(analytic - numeric) > GRADIENT_RTOL * scale + GRADIENT_ATOL

    return [int(i) for i in np.flatnonzero(bad)]


def random_spd(rng: RngStream, n: int, scale: float = 1.0) -> np.ndarray:
    a = rng.generator.standard_normal((n, n))
    return scale * (a @ a.T / n + np.eye(n))


def random_niw(rng: RngStream, n: int) -> EvidentialParams:
    gen = rng.generator
    nu = n + 2 + 8 * gen.random()
    return EvidentialParams.from_psi(gen.standard_normal(n),
                                     random_spd(rng, n, nu / n),
                                     0.5 + 4.5 * gen.random(), nu)


class EvidentialOracleSuite:
    """Numerical oracles for the evidential densities and losses"""

    def __init__(self, mc_samples: int = 1_000_000, mc_cases: int = 50,
                 seed: int = 0, inject_fault: bool = False):
        """
        initializer

        :param mc_samples: NIW draws per Monte Carlo evidence case
        :param mc_cases: number of random evidence cases
        :param seed: root seed of all checks
        :param inject_fault: corrupt the closed-form evidence (negative
                             control)

        :returns: `pyevidential.verify.EvidentialOracleSuite`
        """

        self.mc_samples = mc_samples
        self.mc_cases = mc_cases
        self.seed = seed
        self.inject_fault = inject_fault

    def _rng(self, name: str) -> RngStream:
        # one stream per check, independent of check order
        key = zlib.crc32(name.encode())
        return RngStream(self.seed, np.random.SeedSequence([self.seed, key]))

    def run_tests(self) -> dict:
        """Convenience function to run all tests"""

        report = {
            'id': str(uuid.uuid4()),
            'report_type': 'verify',
            'summary': {},
            'generated_by': f'pyevidential {pyevidential.__version__}'
        }

        tests = sorted(f for f in dir(EvidentialOracleSuite)
                       if f.startswith('test_requirement') and
                       callable(getattr(EvidentialOracleSuite, f)))

        results = []
        for t in tests:
            LOGGER.info(f'Running {t}')
            try:
                results.append(getattr(self, t)())
            except Exception as err:
                LOGGER.error(f'{t} raised {err}')
                results.append({
                    'id': t.replace('test_requirement_', ''),
                    'code': 'FAILED',
                    'message': f'{type(err).__name__}: {err}'
                })

        for code in ['PASSED', 'FAILED']:
            report['summary'][code] = len(
                [r for r in results if r['code'] == code])

        report['tests'] = results
        report['datetime'] = get_current_datetime_rfc3339()

        return report

    def test_requirement_model_evidence_mc(self):
        """
        Closed-form model evidence agrees with Monte Carlo integration.

        Each case must lie within 3 reported standard errors; the check
        tolerates the number of 3σ exceedances a binomial count reaches
        with probability 0.999.
        """

        status = {
            'id': 'model-evidence-mc',
            'code': 'PASSED'
        }

        rng = self._rng(status['id'])
        outliers = []
        for case in range(self.mc_cases):
            n = 1 + case % 3
            m = random_niw(rng, n)
            y = m.mu0 + rng.generator.standard_normal(n) * np.sqrt(
                np.diag(m.psi) / m.nu)

            closed = np.exp(model_evidence_logpdf(y, m)
                            + (0.5 if self.inject_fault else 0.0))
            estimate, stderr = model_evidence_mc(y, m, self.mc_samples, rng)

            LOGGER.debug(f'case {case} (n={n}): {closed} vs '
                         f'{estimate} ± {stderr}')
            if abs(closed - estimate) > MC_STDERRS * stderr:
                outliers.append(case)

        allowed = int(binom.ppf(0.999, self.mc_cases,
                                2 * norm.sf(MC_STDERRS)))
        status['message'] = (f'{len(outliers)} of {self.mc_cases} cases '
                             f'beyond {MC_STDERRS} stderr (allowed {allowed})')
        if len(outliers) > allowed:
            status['code'] = 'FAILED'
            status['errors'] = [f'case {c}' for c in outliers]

        return status

    def test_requirement_conjugacy(self):
        """
        Sequential and batch posterior updates agree, and the evidence chain
        rule does not depend on the order of observations.
        """

        status = {
            'id': 'conjugacy',
            'code': 'PASSED'
        }

        rng = self._rng(status['id'])
        errors = []
        for n in [1, 2, 3]:
            prior = random_niw(rng, n)
            data = rng.generator.standard_normal((6, n)) + prior.mu0

            batch = posterior_update(prior, data)
            sequential = prior
            for y in data:
                sequential = posterior_update(sequential, [y])

            for name in ['mu0', 'psi', 'kappa', 'nu']:
                a = np.asarray(getattr(batch, name))
                b = np.asarray(getattr(sequential, name))
                if not np.allclose(a, b, rtol=1e-10, atol=1e-10):
                    errors.append(f'n={n}: {name} differs')

            forward = (model_evidence_logpdf(data[0], prior)
                       + model_evidence_logpdf(
                           data[1], posterior_update(prior, data[:1])))
            backward = (model_evidence_logpdf(data[1], prior)
                        + model_evidence_logpdf(
                            data[0], posterior_update(prior, data[1:2])))
            if abs(forward - backward) > 1e-10 * max(1.0, abs(forward)):
                errors.append(f'n={n}: evidence chain rule order dependent')

        if errors:
            status['code'] = 'FAILED'
            status['message'] = f'{len(errors)} error(s)'
            status['errors'] = errors

        return status

    def test_requirement_sylvester(self):
        """
        Rank-1 Sylvester log-determinant equals the dense log-determinant.
        """

        status = {
            'id': 'sylvester',
            'code': 'PASSED'
        }

        rng = self._rng(status['id'])
        errors = []
        for case in range(100):
            n = 1 + case % 5
            psi = random_spd(rng, n)
            c = rng.generator.exponential()
            v = rng.generator.standard_normal(n)

            fast = sylvester_logdet_rank1(cholesky(psi), c, v)
            _, dense = np.linalg.slogdet(psi + c * np.outer(v, v))
            if abs(fast - dense) > 1e-10 * max(1.0, abs(dense)):
                errors.append(f'case {case}: {fast} vs {dense}')

        if errors:
            status['code'] = 'FAILED'
            status['message'] = f'{len(errors)} error(s)'
            status['errors'] = errors

        return status

    def test_requirement_gradients(self):
        """
        Analytic and backpropagated gradients match central differences.
        """

        status = {
            'id': 'gradients',
            'code': 'PASSED'
        }

        rng = self._rng(status['id'])
        gen = rng.generator
        errors = []

        def check(name, analytic, function, x):
            bad = gradient_mismatch(
                analytic, finite_difference_gradient(function, x))
            if bad:
                errors.append(f'{name}: parameters {bad}')

        for case in range(20):
            y = gen.standard_normal()
            x = np.array([gen.standard_normal(),
                          np.exp(gen.standard_normal())])
            check('gaussian_nll', gaussian_nll(y, *x).gradients,
                  lambda p: gaussian_nll(y, *p).value, x)

            x = np.array([gen.standard_normal(), np.exp(gen.standard_normal()),
                          1 + np.exp(gen.standard_normal()),
                          np.exp(gen.standard_normal())])
            check('nig_nll', nig_nll(y, NigParams(*x)).gradients,
                  lambda p: nig_nll(y, NigParams(*p)).value, x)

            n = 1 + case % 3
            k = tril_size(n)
            m = random_niw(rng, n)
            yv = m.mu0 + gen.standard_normal(n)
            rows, cols = np.tril_indices(n)
            x = np.concatenate([m.mu0, m.psi_chol.L[rows, cols],
                                [m.kappa, m.nu]])

            def niw_value(p, n=n, k=k, yv=yv, rows=rows, cols=cols):
                L = np.zeros((n, n))
                L[rows, cols] = p[n:n + k]
                return niw_nll(yv, EvidentialParams(
                    p[:n], CholeskyFactor(L), p[-2], p[-1])).value

            check(f'niw_nll n={n}', niw_nll(yv, m).gradients, niw_value, x)

            h = CoupledHeadParams(gen.standard_normal(n),
                                  0.3 * gen.standard_normal(k),
                                  n + 2 + 8 * gen.random(),
                                  np.exp(gen.standard_normal()))
            x = np.concatenate([h.mu0, h.ell, [h.nu]])

            def coupled_value(p, n=n, k=k, yv=yv, r=h.r):
                return coupled_niw_nll(yv, CoupledHeadParams(
                    p[:n], p[n:n + k], p[-1], r)).value

            check(f'coupled_niw_nll n={n}', coupled_niw_nll(yv, h).gradients,
                  coupled_value, x)

        config = NetworkConfig(1, (3,), head=HeadConfig(n=2))
        for case in range(5):
            model = init(config, int(gen.integers(2 ** 31)))
            batch = Dataset(gen.uniform(0, 2 * np.pi, 4),
                            gen.standard_normal((4, 2)))
            _, grads = loss_and_grad(model, batch)
            check(f'network case {case}', grads,
                  lambda p, model=model, batch=batch: loss_and_grad(
                      model.with_parameters(p), batch)[0],
                  model.parameters())

        if errors:
            status['code'] = 'FAILED'
            status['message'] = f'{len(errors)} error(s)'
            status['errors'] = errors

        return status

    def test_requirement_degeneration(self):
        """
        The NIG loss is constant along β(1+κ)/κ = const while the legacy
        evidence regularizer keeps decreasing towards κ → 0.
        """

        status = {
            'id': 'degeneration',
            'code': 'PASSED'
        }

        kappa_grid = np.geomspace(1e-3, 1e3, 61)
        rows = degeneration_scan(2.0, 1.0, 2.0, kappa_grid,
                                 RegularizerConfig(1.0, EvidenceKind.LEGACY))

        nll = np.array([row['nll'] for row in rows])
        total = np.array([row['total'] for row in rows])
        spread = float(np.ptp(nll))

        status['message'] = f'NLL spread {spread:.3e}'
        if spread > 1e-12:
            status['code'] = 'FAILED'
        elif not np.all(np.diff(total) > 0):
            status['code'] = 'FAILED'
            status['message'] = 'regularized loss not increasing in κ'

        return status

    def test_requirement_univariate_reduction(self):
        """
        The NIW loss at n=1 equals the NIG loss under ν=2α, Ψ=2β.
        """

        status = {
            'id': 'univariate-reduction',
            'code': 'PASSED'
        }

        gen = self._rng(status['id']).generator
        worst = 0.0
        for _ in range(1000):
            p = NigParams(gen.standard_normal(), np.exp(gen.standard_normal()),
                          0.6 + np.exp(gen.standard_normal()),
                          np.exp(gen.standard_normal()))
            y = p.mu0 + 2 * gen.standard_normal()

            a = nig_nll(y, p).value
            b = niw_nll(y, EvidentialParams.from_nig(p)).value
            worst = max(worst, abs(a - b) / max(1.0, abs(a)))

        status['message'] = f'largest difference {worst:.3e}'
        if worst > 1e-12:
            status['code'] = 'FAILED'

        return status

    def test_requirement_moments(self):
        """
        Empirical NIW moments match the closed forms within 4 standard errors.
        """

        status = {
            'id': 'moments',
            'code': 'PASSED'
        }

        rng = self._rng(status['id'])
        m = EvidentialParams.from_psi([0.5, -1.0], [[12.0, 3.0], [3.0, 8.0]],
                                      2.0, 14.0)
        moments = niw_moments(m)
        mu, sigma = sample_niw_batch(m, rng, MOMENT_DRAWS)

        errors = []
        draws = {
            'mean': (mu, moments.mean),
            'aleatoric': (sigma.reshape(MOMENT_DRAWS, -1),
                          moments.aleatoric.ravel()),
            'epistemic': ((mu - m.mu0) ** 2, np.diag(moments.epistemic))
        }
        for name, (values, expected) in draws.items():
            stderr = values.std(axis=0, ddof=1) / np.sqrt(MOMENT_DRAWS)
            z = np.abs(values.mean(axis=0) - expected) / stderr
            if np.any(z > MOMENT_STDERRS):
                errors.append(f'{name}: {float(z.max()):.2f} stderr')

        if errors:
            status['code'] = 'FAILED'
            status['message'] = f'{len(errors)} error(s)'
            status['errors'] = errors

        return status


@click.command()
@click.pass_context
@get_cli_common_options
@click.option('--mc-samples', type=click.IntRange(min=10_000),
              default=1_000_000, help='NIW draws per evidence case')
@click.option('--mc-cases', type=click.IntRange(min=1), default=50,
              help='Random evidence cases')
@click.option('--seed', type=click.IntRange(min=0), default=0,
              help='Random seed')
@click.option('--out', '-o', type=click.Path(dir_okay=False),
              help='Write the JSON report to this file')
@click.option('--inject-fault', is_flag=True, hidden=True)
def verify(ctx, mc_samples, mc_cases, seed, out, inject_fault, logfile,
           verbosity):
    """run the numerical oracle suite"""

    setup_logger(verbosity, logfile)

    suite = EvidentialOracleSuite(mc_samples, mc_cases, seed, inject_fault)
    report = suite.run_tests()

    click.echo(json.dumps(report, indent=4))
    if out is not None:
        write_json(Path(out), report)

    failed = [t['id'] for t in report['tests'] if t['code'] == 'FAILED']
    if failed:
        err = VerificationError(f'Failed checks: {", ".join(failed)}',
                                failed)
        raise click.ClickException(str(err))
