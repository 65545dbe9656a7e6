# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.


class PoissonFieldsException(Exception):
    """Base class for errors raised by poisson_fields.

    :cvar exit_code: process exit code used by the command line interface
    """

    exit_code = 2


class InvalidParams(PoissonFieldsException, ValueError):
    """A precondition on the arguments does not hold."""

    exit_code = 2


class NonConvergence(PoissonFieldsException):
    """A series could not reach the requested tolerance."""

    exit_code = 3


class ResourceLimit(PoissonFieldsException):
    """An enumeration or lattice would exceed its configured cap."""

    exit_code = 3


class QuadratureFailure(NonConvergence):
    """Adaptive quadrature could not reach the requested tolerance."""


class DegenerateBins(PoissonFieldsException):
    """Fewer than two bins remain after merging sparse cells."""

    exit_code = 2
