# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

"""Command line interface.

Primary output goes to stdout or ``--output``; logs and diagnostics go to
stderr. Exit codes: 0 success, 1 failed verification, 2 invalid parameters,
3 numerical failure.
"""

import functools
import hashlib
import json
import logging
import sys
import time
from collections import namedtuple
from datetime import datetime

import click
import jsonschema
import numpy as np
import pandas as pd
import pytz
from scipy import special

from poisson_fields import __version__, config, model, schema, sim, suites, verify
from poisson_fields.exceptions import InvalidParams, PoissonFieldsException
from poisson_fields.model import FracOrders, RateVector, SkellamRates, Window

log = logging.getLogger(__name__)

PMF_PROCESSES = ["gprf", "fgprf", "skellam", "fgspp"]
SAMPLE_PROCESSES = PMF_PROCESSES + ["integral", "inverse-stable"]
P_THRESHOLD = 0.001


class Params(namedtuple("Params", ["process", "rates", "frac", "s", "t", "area"])):
    """Parsed process parameters shared by every command."""

    __slots__ = ()

    @property
    def two_sided(self):
        return self.process in ("skellam", "fgspp")

    def to_dict(self):
        values = {"s": self.s, "t": self.t, "area": self.area}
        if self.rates is not None:
            if self.two_sided:
                values.update(plus=list(self.rates.plus), minus=list(self.rates.minus))
            else:
                values["rates"] = list(self.rates)
        if not self.frac.classical or self.process in ("fgprf", "fgspp", "inverse-stable"):
            values.update(alpha=self.frac.alpha, beta=self.frac.beta)
        return values


def parse_range(text):
    """``"3"`` or ``"-2..5"`` as an inclusive integer range."""
    try:
        if ".." in text:
            low, high = text.split("..", 1)
            low, high = int(low), int(high)
        else:
            low = high = int(text)
    except ValueError:
        raise InvalidParams("--n expects an integer or a range a..b, got {!r}".format(text))
    if high < low:
        raise InvalidParams("empty range {}".format(text))
    return range(low, high + 1)


def build_params(process, rates, plus, minus, area, s, t, alpha, beta):
    frac = FracOrders(alpha, beta)
    if process in ("skellam", "fgspp"):
        if plus is None or minus is None:
            raise InvalidParams("{} needs --plus and --minus".format(process))
        parsed = SkellamRates(RateVector.parse(plus), RateVector.parse(minus))
    elif process == "inverse-stable":
        parsed = None
    else:
        if rates is None:
            raise InvalidParams("{} needs --rates".format(process))
        parsed = RateVector.parse(rates)
    if process in ("fgprf", "fgspp", "inverse-stable") or area is None:
        area = s * t
    if not (s > 0 and t > 0 and area > 0):
        raise InvalidParams("s, t and area must be positive")
    return Params(process, parsed, frac, s, t, area)


def pmf_value(params, n, tol=None):
    if params.process == "gprf":
        return model.gprf_pmf(params.rates, params.area, n)
    if params.process == "fgprf":
        return model.fgprf_pmf(params.rates, params.frac, params.s, params.t, n, tol)
    if params.process == "skellam":
        return model.skellam_pmf(params.rates, params.area, n, tol)
    return model.fgspp_pmf(params.rates, params.frac, params.s, params.t, n, tol)


def pmf_table(params, tol=None):
    if params.process == "gprf":
        return model.gprf_pmf_table(params.rates, params.area, tol)
    if params.process == "fgprf":
        return model.fgprf_pmf_table(params.rates, params.frac, params.s, params.t, tol)
    if params.process == "skellam":
        return model.skellam_pmf_table(params.rates, params.area, tol)
    if params.process == "fgspp":
        return model.fgspp_pmf_table(params.rates, params.frac, params.s, params.t, tol)
    raise InvalidParams("no pmf for process {}".format(params.process))


def sampler_for(params, method):
    """``sampler(rng, size)`` drawing the process count for ``sim.run_batches``."""
    p = params
    if p.process == "gprf":
        return lambda rng, size: sim.sample_gprf(p.rates, p.area, rng, method=method, size=size)
    if p.process == "fgprf":
        return lambda rng, size: sim.sample_fgprf(p.rates, p.frac, p.s, p.t, rng, size=size)
    if p.process == "skellam":
        return lambda rng, size: sim.sample_gspp(p.rates, p.area, rng, size=size)
    if p.process == "fgspp":
        return lambda rng, size: sim.sample_fgspp(p.rates, p.frac, p.s, p.t, rng, size=size)
    if p.process == "integral":
        return lambda rng, size: sim.sample_gprf_integral(p.rates, p.s, p.t, rng, size=size)
    return lambda rng, size: sim.sample_inverse_stable(p.frac.alpha, p.t, rng, size=size)


def moments_for(params, s_end=None, t_end=None):
    """``(mean, variance, covariance)``; covariance is with the window ending at ``(s_end, t_end)``."""
    p = params
    wants_cov = s_end is not None and t_end is not None
    covariance = None
    if p.process == "gprf":
        mean, variance = model.gprf_moments(p.rates, p.area)
        if wants_cov:
            covariance = model.gprf_cov(p.rates, Window.anchored(p.s, p.t), Window.anchored(s_end, t_end))
    elif p.process == "skellam":
        mean, variance = model.skellam_moments(p.rates, p.area)
        if wants_cov:
            overlap = Window.anchored(p.s, p.t).intersection_measure(Window.anchored(s_end, t_end))
            covariance = p.rates.second_moment * overlap
    elif p.process == "fgprf":
        mean, variance = model.fgprf_moments(p.rates, p.frac, p.s, p.t)
        if wants_cov:
            covariance = model.fgprf_cov(p.rates, p.frac, p.s, p.t, s_end, t_end)
    elif p.process == "fgspp":
        mean, variance = model.fgspp_moments(p.rates, p.frac, p.s, p.t)
        if wants_cov:
            covariance = model.fgspp_cov(p.rates, p.frac, p.s, p.t, s_end, t_end)
    elif p.process == "integral":
        mean, variance = model.integral_moments(p.rates, p.s, p.t)
    else:
        alpha = p.frac.alpha
        mean = p.t ** alpha / special.gamma(alpha + 1)
        variance = p.t ** (2 * alpha) * (2.0 / special.gamma(2 * alpha + 1) - 1.0 / special.gamma(alpha + 1) ** 2)
    return float(mean), float(variance), None if covariance is None else float(covariance)


def exit_on_error(func):
    """Turn library exceptions into a one-line diagnostic and their exit code."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except PoissonFieldsException as e:
            click.echo("error: {}".format(e), err=True)
            sys.exit(e.exit_code)

    return wrapper


def configure_logging(log_format, verbose):
    handler = logging.StreamHandler(sys.stderr)
    if log_format == "json":
        from mozlogging import MozLogFormatter

        handler.setFormatter(MozLogFormatter(logger="poisson_fields"))
    else:
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    root.handlers = [handler]
    root.setLevel([logging.WARNING, logging.INFO, logging.DEBUG][min(verbose, 2)])


def dump_json(document, document_schema):
    jsonschema.validate(document, document_schema)
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def write_output(text, output):
    with click.open_file(output, "w", encoding="utf-8") as f:
        f.write(text)


process_options = [
    click.option("--rates", help="Comma separated batch rates lambda_1,...,lambda_k"),
    click.option("--plus", help="Rates of the positive field (skellam, fgspp)"),
    click.option("--minus", help="Rates of the negative field (skellam, fgspp)"),
    click.option("--area", type=float, help="Window measure; defaults to s * t"),
    click.option("--s", "s", type=float, default=1.0, show_default=True),
    click.option("--t", "t", type=float, default=1.0, show_default=True),
    click.option("--alpha", type=float, default=1.0, show_default=True),
    click.option("--beta", type=float, default=1.0, show_default=True),
]


def with_process_options(func):
    for option in reversed(process_options):
        func = option(func)
    return func


seed_option = click.option(
    "--seed",
    type=int,
    envvar="POISSON_FIELDS_SEED",
    default=config.seed,
    show_default=True,
    help="Seed of the random streams",
)


@click.group()
@click.option("--log-format", type=click.Choice(["text", "json"]), default="text", show_default=True)
@click.option("-v", "--verbose", count=True, help="Repeat for debug logs")
@click.version_option(__version__)
def entry_point(log_format, verbose):
    configure_logging(log_format, verbose)


@entry_point.command()
@click.argument("process", type=click.Choice(PMF_PROCESSES))
@with_process_options
@click.option("--n", "n_range", help="Integer or inclusive range a..b; default is the adaptive support")
@click.option("--tol", type=float, help="Absolute tolerance")
@click.option("--format", "output_format", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--output", default="-", help="Output file, - for stdout")
@exit_on_error
def pmf(process, rates, plus, minus, area, s, t, alpha, beta, n_range, tol, output_format, output):
    """Probability mass function of PROCESS."""
    params = build_params(process, rates, plus, minus, area, s, t, alpha, beta)
    if n_range is None:
        table = pmf_table(params, tol)
        frame = table.to_frame()
    else:
        ns = list(parse_range(n_range))
        probs = [pmf_value(params, n, tol) for n in ns]
        # mass not listed in the rows
        tail = max(0.0, 1.0 - sum(probs))
        frame = pd.DataFrame(
            {"n": ns, "probability": probs, "tail_bound": [tail] * len(ns)},
            columns=["n", "probability", "tail_bound"],
        )
    log.info("pmf {} over {} rows".format(process, len(frame)))
    if output_format == "csv":
        text = frame.to_csv(index=False, float_format="%.17g")
    else:
        rows = [
            {"n": int(row.n), "probability": float(row.probability), "tail_bound": float(row.tail_bound)}
            for row in frame.itertuples(index=False)
        ]
        document = {"schema_version": schema.SCHEMA_VERSION, "process": process, "rows": rows}
        text = dump_json(document, schema.pmf_document)
    write_output(text, output)


def format_samples(draws, output_format):
    frame = pd.DataFrame({"sample": draws})
    if output_format == "json":
        return frame.to_json(orient="records", lines=True, double_precision=15)
    return frame.to_csv(index=False, float_format="%.17g")


@entry_point.command()
@click.argument("process", type=click.Choice(SAMPLE_PROCESSES))
@with_process_options
@click.option("--samples", type=int, default=100000, show_default=True)
@seed_option
@click.option("--method", type=click.Choice(["superposition", "compound"]), default="superposition")
@click.option("--workers", type=int, default=config.workers, show_default=True)
@click.option("--batch-size", type=int, default=config.batch_size, show_default=True)
@click.option("--format", "output_format", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--output", default="-", help="Sample file, - for stdout")
@click.option("--manifest", help="Manifest file; defaults to OUTPUT.manifest.json, or stderr for stdout")
@exit_on_error
def simulate(
    process, rates, plus, minus, area, s, t, alpha, beta, samples, seed, method, workers, batch_size,
    output_format, output, manifest,
):
    """Draw samples of PROCESS and write a run manifest."""
    params = build_params(process, rates, plus, minus, area, s, t, alpha, beta)
    if samples < 1:
        raise InvalidParams("--samples must be at least 1, got {}".format(samples))
    started_at = datetime.now(pytz.utc)
    clock = time.time()
    draws = sim.run_batches(
        sampler_for(params, method), samples, seed=seed, batch_size=batch_size, workers=workers
    )
    text = format_samples(draws, output_format)
    write_output(text, output)

    parameters = params.to_dict()
    if process == "gprf":
        parameters["method"] = method
    document = {
        "schema_version": schema.SCHEMA_VERSION,
        "command": "simulate",
        "process": process,
        "parameters": parameters,
        "seed": seed,
        "samples": samples,
        "version": __version__,
        "started_at": started_at.isoformat(),
        "elapsed_seconds": time.time() - clock,
        "output": None if output == "-" else output,
        "digest": "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest(),
    }
    manifest_text = dump_json(document, schema.manifest)
    if manifest is None and output != "-":
        manifest = output + ".manifest.json"
    if manifest is None:
        click.echo(manifest_text, err=True, nl=False)
    else:
        write_output(manifest_text, manifest)
    log.info("wrote {} samples, digest {}".format(samples, document["digest"]))


@entry_point.command(name="verify")
@click.argument("suite", type=click.Choice(list(suites.SUITES) + ["all"]))
@seed_option
@click.option("--format", "output_format", type=click.Choice(["json", "text"]), default="json", show_default=True)
@exit_on_error
def verify_command(suite, seed, output_format):
    """Run a named suite of identity checks; exit 1 if any fails."""
    checks = suites.run_suite(suite, seed)
    passed = all(check.passed for check in checks)
    if output_format == "json":
        document = {
            "schema_version": schema.SCHEMA_VERSION,
            "suite": suite,
            "seed": seed,
            "passed": passed,
            "checks": [check._asdict() for check in checks],
        }
        click.echo(dump_json(document, schema.verify_report), nl=False)
    else:
        for check in checks:
            click.echo(
                "{} {}: {:.6g} (tolerance {:.3g})".format(
                    "PASS" if check.passed else "FAIL", check.name, check.statistic, check.tolerance
                )
            )
    if not passed:
        sys.exit(1)


def read_samples(sample_file):
    frame = pd.read_csv(sample_file)
    column = "sample" if "sample" in frame.columns else frame.columns[0]
    values = frame[column].to_numpy()
    if not np.all(np.equal(np.mod(values, 1), 0)):
        raise InvalidParams("{} holds non-integer samples".format(sample_file))
    return values.astype(np.int64)


@entry_point.command()
@click.argument("sample_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("process", type=click.Choice(PMF_PROCESSES))
@with_process_options
@click.option("--tol", type=float, help="Absolute tolerance of the exact pmf")
@exit_on_error
def gof(sample_file, process, rates, plus, minus, area, s, t, alpha, beta, tol):
    """Chi-square test of a sample file against the exact pmf of PROCESS."""
    params = build_params(process, rates, plus, minus, area, s, t, alpha, beta)
    samples = read_samples(sample_file)
    report = verify.chi_square_gof(samples, pmf_table(params, tol))
    document = {
        "schema_version": schema.SCHEMA_VERSION,
        "process": process,
        "statistic": report.statistic,
        "dof": report.dof,
        "p_value": report.p_value,
        "samples": report.samples,
        "bins": list(report.bins),
    }
    click.echo(dump_json(document, schema.gof_report), nl=False)
    if report.p_value <= P_THRESHOLD:
        sys.exit(1)


@entry_point.command()
@click.argument("process", type=click.Choice(SAMPLE_PROCESSES))
@with_process_options
@click.option("--s-end", type=float, help="Corner s' of the second window for the covariance")
@click.option("--t-end", type=float, help="Corner t' of the second window for the covariance")
@exit_on_error
def moments(process, rates, plus, minus, area, s, t, alpha, beta, s_end, t_end):
    """Closed-form mean and variance of PROCESS, and the covariance with a second window."""
    params = build_params(process, rates, plus, minus, area, s, t, alpha, beta)
    mean, variance, covariance = moments_for(params, s_end, t_end)
    document = {
        "schema_version": schema.SCHEMA_VERSION,
        "process": process,
        "mean": mean,
        "variance": variance,
        "covariance": covariance,
    }
    click.echo(dump_json(document, schema.moments_report), nl=False)


if __name__ == "__main__":
    entry_point()
