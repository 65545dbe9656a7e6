# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

"""Environment-driven settings.

Every value can be overridden by an explicit argument at the call site. The
environment is read once, when the module is imported.
"""
from os import environ

DEFAULT_SEED = 20250917

seed = int(environ.get("POISSON_FIELDS_SEED", DEFAULT_SEED))
tol = float(environ.get("POISSON_FIELDS_TOL", 1e-12))
max_terms = int(environ.get("POISSON_FIELDS_MAX_TERMS", 20000))
cardinality_cap = int(environ.get("POISSON_FIELDS_CARDINALITY_CAP", 10 ** 7))
lattice_cell_cap = int(environ.get("POISSON_FIELDS_LATTICE_CELL_CAP", 4 * 10 ** 6))
workers = int(environ.get("POISSON_FIELDS_WORKERS", 1))
batch_size = int(environ.get("POISSON_FIELDS_BATCH_SIZE", 100000))
