"""Logging utilities."""

# Copyright 2015 The TensorFlow Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
# ============================================================================
#
# Modified for the workflow recognition package: scoped logger, no
# interactive level override, verbosity mapping for the command line.

# pylint: disable=unused-import

import logging as _logging
from logging import DEBUG
from logging import ERROR
from logging import FATAL
from logging import INFO
from logging import WARN
import sys as _sys

# Determine whether we are in an interactive environment
_interactive = False
try:
    # This is only defined in interactive shells
    if _sys.ps1:
        _interactive = True
except AttributeError:
    _interactive = bool(_sys.flags.interactive)

# Scope the package logger to not conflict with users' loggers
_logger = _logging.getLogger('workflowrecognition')
_logger.setLevel(WARN)

# notebooks log to stdout, everything else to stderr
_logging_target = _sys.stdout if _interactive else _sys.stderr

if not _logger.handlers:
    _handler = _logging.StreamHandler(_logging_target)
    _handler.setFormatter(
        _logging.Formatter('%(levelname)s:%(name)s:%(message)s', None))
    _logger.addHandler(_handler)

log = _logger.log
debug = _logger.debug
error = _logger.error
fatal = _logger.fatal
info = _logger.info
warning = _logger.warning


def get_verbosity():
    """Return how much logging output will be produced."""
    return _logger.getEffectiveLevel()


def set_verbosity(verbosity):
    """Sets the threshold for what messages will be logged."""
    _logger.setLevel(verbosity)


def verbosity_from_flags(verbose=0):
    """Map a count of ``-v`` flags onto a logging level.

    Parameters
    ----------
    verbose : int
        Number of times the verbose flag was given.

    Returns
    -------
    int
        WARN for 0, INFO for 1 and DEBUG for 2 or more.
    """

    if verbose <= 0:
        return WARN
    elif verbose == 1:
        return INFO
    return DEBUG
