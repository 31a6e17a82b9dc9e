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

import csv
from datetime import datetime, timezone
import json
import logging
import os
from pathlib import Path
import sys

import click
from jsonschema.validators import Draft202012Validator
import numpy as np

import pyevidential
from pyevidential.errors import DomainError

LOGGER = logging.getLogger(__name__)
THISDIR = Path(__file__).parent.resolve()
SCHEMAS = THISDIR / 'schemas'

PROVENANCE_FORMAT_VERSION = 1


def get_cli_common_options(function):
    """
    Define common CLI options
    """

    function = click.option('--verbosity', '-v',
                            type=click.Choice(
                                ['ERROR', 'WARNING', 'INFO', 'DEBUG']),
                            help='Verbosity')(function)
    function = click.option('--log', '-l', 'logfile',
                            type=click.Path(writable=True, dir_okay=False),
                            help='Log file')(function)
    return function


def parse_int_list(ctx, param, value) -> tuple:
    """click callback turning `32,32` into `(32, 32)`"""

    if value is None or isinstance(value, tuple):
        return value

    try:
        values = tuple(int(v) for v in value.split(',') if v.strip())
    except ValueError:
        raise click.BadParameter(f'not a comma-separated list: {value}')

    if not values or min(values) < 1:
        raise click.BadParameter(f'expected positive integers: {value}')

    return values


def get_output_dir() -> Path:
    """
    Helper function to get the default output directory

    Honours the ``PYEVIDENTIAL_OUTPUT_DIR`` environment variable.

    :returns: `pathlib.Path` of output directory
    """

    return Path(os.environ.get('PYEVIDENTIAL_OUTPUT_DIR',
                               'pyevidential-output'))


def setup_logger(loglevel: str = None, logfile: str = None) -> None:
    """
    Setup logging

    :param loglevel: logging level
    :param logfile: logfile location

    :returns: void (creates logging instance)
    """

    if loglevel is None and logfile is None:  # no logging
        return

    if loglevel is None and logfile is not None:
        loglevel = 'INFO'

    log_format = \
        '[%(asctime)s] %(levelname)s - %(message)s'
    date_format = '%Y-%m-%dT%H:%M:%SZ'

    loglevels = {
        'CRITICAL': logging.CRITICAL,
        'ERROR': logging.ERROR,
        'WARNING': logging.WARNING,
        'INFO': logging.INFO,
        'DEBUG': logging.DEBUG,
        'NOTSET': logging.NOTSET,
    }

    loglevel = loglevels[loglevel]

    if logfile is not None:  # log to file
        logging.basicConfig(level=loglevel, datefmt=date_format,
                            format=log_format, filename=logfile)
    elif loglevel is not None:  # log to stdout
        logging.basicConfig(level=loglevel, datefmt=date_format,
                            format=log_format, stream=sys.stdout)
        LOGGER.debug('Logging initialized')


def get_current_datetime_rfc3339() -> str:
    """
    Gets the current datetime in RFC3339 format

    :returns: `str` of RFC3339
    """

    return datetime.now(timezone.utc).strftime('%Y-%m-%dT%H:%M:%SZ')


def validate_document(document: dict, schema_name: str) -> None:
    """
    Validate a JSON document against a bundled schema

    :param document: `dict` of JSON
    :param schema_name: schema filename in `pyevidential/schemas`

    :returns: void (raises `DomainError` listing every violation)
    """

    schema = SCHEMAS / schema_name

    with schema.open() as fh:
        LOGGER.debug(f'Validating document against {schema}')
        validator = Draft202012Validator(json.load(fh))

    errors = [f'{error.json_path}: {error.message}'
              for error in validator.iter_errors(document)]

    if errors:
        msg = f'{len(errors)} error(s) against {schema_name}: {errors}'
        LOGGER.error(msg)
        raise DomainError(msg)


def read_json(filename: Path, schema_name: str = None) -> dict:
    """
    Read (and optionally validate) a JSON document

    :param filename: path to JSON file
    :param schema_name: optional bundled schema to validate against

    :returns: `dict` of JSON
    """

    filename = Path(filename)
    LOGGER.debug(f'Reading {filename}')

    with filename.open() as fh:
        try:
            document = json.load(fh)
        except json.decoder.JSONDecodeError as err:
            LOGGER.error(err)
            raise DomainError(f'Encoding error: {err}')

    if schema_name is not None:
        validate_document(document, schema_name)

    return document


def write_json(filename: Path, document: dict,
               schema_name: str = None) -> Path:
    """
    Write (and optionally validate) a JSON document

    :param filename: path to JSON file
    :param document: `dict` of JSON
    :param schema_name: optional bundled schema to validate against

    :returns: `pathlib.Path` of written file
    """

    if schema_name is not None:
        validate_document(document, schema_name)

    filename = Path(filename)
    filename.parent.mkdir(parents=True, exist_ok=True)

    LOGGER.debug(f'Writing {filename}')
    with filename.open('w') as fh:
        json.dump(document, fh, indent=4, sort_keys=True)
        fh.write('\n')

    return filename


def make_provenance(command: str, parameters: dict, seeds: list = None,
                    **kwargs) -> dict:
    """
    Build a provenance document

    :param command: name of the producing command/generator
    :param parameters: `dict` of run parameters
    :param seeds: `list` of RNG seeds used
    :param kwargs: extra keys (e.g. `outputs`, `wall_time_seconds`)

    :returns: `dict` of provenance
    """

    provenance = {
        'format_version': PROVENANCE_FORMAT_VERSION,
        'software': f'pyevidential {pyevidential.__version__}',
        'command': command,
        'parameters': parameters,
        'seeds': [int(s) for s in (seeds or [])],
        'created': get_current_datetime_rfc3339()
    }
    provenance.update(kwargs)

    return provenance


def write_provenance(filename: Path, command: str, parameters: dict,
                     seeds: list = None, **kwargs) -> Path:
    """
    Write a provenance sidecar file

    :param filename: path to JSON file
    :param command: name of the producing command/generator
    :param parameters: `dict` of run parameters
    :param seeds: `list` of RNG seeds used
    :param kwargs: extra keys (e.g. `outputs`, `wall_time_seconds`)

    :returns: `pathlib.Path` of written file
    """

    provenance = make_provenance(command, parameters, seeds, **kwargs)
    return write_json(filename, provenance, 'provenance.json')


def csv_value(value) -> str:
    """
    Render a table cell so that floats round trip bit-exactly

    :param value: cell value

    :returns: `str` of cell
    """

    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(filename: Path, header: list, rows: list) -> Path:
    """
    Write a result table as CSV

    :param filename: path to CSV file
    :param header: `list` of column names
    :param rows: iterable of row sequences

    :returns: `pathlib.Path` of written file
    """

    filename = Path(filename)
    filename.parent.mkdir(parents=True, exist_ok=True)

    LOGGER.debug(f'Writing {filename}')
    with filename.open('w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([csv_value(v) for v in row])

    return filename


def read_csv(filename: Path) -> tuple:
    """
    Read a CSV table

    :param filename: path to CSV file

    :returns: `tuple` of header `list` and `list` of row `list`s
    """

    filename = Path(filename)
    LOGGER.debug(f'Reading {filename}')

    with filename.open(newline='') as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]

    return header, rows
