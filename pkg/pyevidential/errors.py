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

class EvidentialError(Exception):
    """base exception for pyevidential"""
    pass


class DimensionMismatch(EvidentialError, ValueError):
    """operands of incompatible shape"""
    pass


class NotPositiveDefinite(EvidentialError, ValueError):
    """matrix is not (numerically) symmetric positive definite"""
    pass


class DomainError(EvidentialError, ValueError):
    """argument outside the domain of a density, moment or loss"""
    pass


class NonFiniteLoss(EvidentialError, RuntimeError):
    """training produced a NaN/inf loss"""
    def __init__(self, message, epoch):
        """set offending epoch index"""
        super(NonFiniteLoss, self).__init__(message)
        self.epoch = epoch


class FitDiverged(EvidentialError, RuntimeError):
    """no start of a multi-start fit converged"""
    def __init__(self, message, errors):
        """set error list/stack (one entry per start)"""
        super(FitDiverged, self).__init__(message)
        self.errors = errors


class VerificationError(EvidentialError):
    """oracle suite failure"""
    def __init__(self, message, errors):
        """set error list/stack"""
        super(VerificationError, self).__init__(message)
        self.errors = errors
