"""A runner script for batch jobs that drive poisson_fields.

Arguments may be passed as command line flags or through
`POISSON_FIELDS_`-prefixed environment variables, e.g.
`POISSON_FIELDS_SIMULATE_SAMPLES=1000000`. The resolved environment is
printed to stderr first so a job log records what it ran with.
"""

import sys
from os import environ
from pprint import pformat

from poisson_fields import cli

print(
    pformat({
        k: v for k, v in environ.items()
        if k.startswith("POISSON_FIELDS")
    }),
    file=sys.stderr,
)

cli.entry_point(auto_envvar_prefix="POISSON_FIELDS")
