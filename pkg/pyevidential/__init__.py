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

import click

from pyevidential.datagen import generate
from pyevidential.experiments import (bias_study_command, degeneration,
                                      ensemble)
from pyevidential.network import predict_command, train_command
from pyevidential.verify import verify

__version__ = '0.1.dev0'


@click.group()
@click.version_option(version=__version__)
def cli():
    pass


cli.add_command(generate)
cli.add_command(train_command)
cli.add_command(predict_command)
cli.add_command(verify)
cli.add_command(degeneration)
cli.add_command(bias_study_command)
cli.add_command(ensemble)
