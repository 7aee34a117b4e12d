"""``blochtomo`` command-line interface.

Exit codes: 0 success (an estimator failing on given data is a result and
is reported through the ``status`` field), 2 usage or invalid input, 3 I/O
error, 4 numerical error.
"""
from __future__ import annotations

import csv
import io
import json
import math
import sys
from typing import Optional

import click
import numpy as np

from . import estimators as E
from .axes import AxisSet, mle_variance_at_origin, uniformity_check
from .bme import QuadratureSpec, bme
from .core import DomainError, NumericalError
from .data import CountRecord
from .harness import (FAST_STATE_GRID, STATE_GRID, TABLE2_STATES, MethodSpec, averaged_accuracy,
                      bootstrap, histogram_csv, histogram_xy, reproduce)
from .priors import parse_prior

SCHEMA_VERSION = 1
METHOD_CHOICES = ["direct", "scaled", "mle", "fisher", "bme"]
COUNT_HELP = "Counts as nx_up,nx_down,ny_up,ny_down,nz_up,nz_down."


class IOFailure(Exception):
    """Reading input or writing output failed."""


# ---------------------------------------------------------------------------
# serialization


def _num(x):
    if x is None:
        return None
    x = float(x)
    if not math.isfinite(x):
        return None
    return float("%.12g" % x)


def _vec(v):
    return [_num(c) for c in v]


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _document(command: str, **payload) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "command": command}
    doc.update(payload)
    return doc


def _emit(doc: dict, fmt: str = "json", csv_rows=None) -> None:
    if fmt == "csv" and csv_rows is not None:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for row in csv_rows:
            writer.writerow(row)
        click.echo(buf.getvalue(), nl=False)
    else:
        click.echo(dump_json(doc), nl=False)


def _write_file(path: str, text: str) -> None:
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# option parsing


def _parse_counts(counts: Optional[str], counts_file: Optional[str]) -> CountRecord:
    if (counts is None) == (counts_file is None):
        raise click.UsageError("give exactly one of --counts or --counts-file")
    if counts is not None:
        return CountRecord.from_csv(counts)
    try:
        with open(counts_file) as fh:
            text = fh.read()
    except OSError as exc:
        raise IOFailure(f"cannot read {counts_file}: {exc}") from exc
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            return CountRecord.from_json(stripped)
        except json.JSONDecodeError as exc:
            raise DomainError(f"malformed JSON in {counts_file}: {exc}") from exc
    return CountRecord.from_csv(stripped.splitlines()[-1])


def _parse_vector(text: str):
    try:
        v = [float(p) for p in text.split(",")]
    except ValueError as exc:
        raise DomainError(f"bad vector {text!r}") from exc
    if len(v) != 3:
        raise DomainError(f"a Bloch vector has three components, got {text!r}")
    return v


def _method_spec(method: str, prior: Optional[str], quad: Optional[str]) -> MethodSpec:
    if method in ("mle", "bme"):
        pr = parse_prior(prior or "bures")
    elif prior is not None:
        raise click.UsageError(f"--prior does not apply to method {method}")
    else:
        pr = None
    q = None
    if quad is not None:
        if method != "bme":
            raise click.UsageError("--quad only applies to method bme")
        q = QuadratureSpec.parse(quad)
    return MethodSpec(method, pr, q)


def _estimate_payload(record: CountRecord, method: str, prior: Optional[str], eta: float, report: str,
                      quad: Optional[str], functionals, threads) -> dict:
    spec = _method_spec(method, prior, quad)
    if not 0.0 < eta <= 1.0:
        raise DomainError(f"--eta must lie in (0, 1], got {eta}")
    factor = eta if report == "positivist" else 1.0
    out = {"method": method, "prior": spec.prior.name if spec.prior else None, "eta": _num(eta),
           "report": report, "counts": record.to_json_obj()}
    if method == "bme":
        post = bme(record, spec.prior, spec.quad or QuadratureSpec(), eta, tuple(functionals), threads)
        cov = post.covariance * factor * factor
        out.update(status="ok", vector=_vec(post.mean.as_array() * factor),
                   covariance=[_num(c) for c in cov.ravel()], log_evidence=_num(post.log_evidence))
        if functionals:
            out["functionals"] = {k: {"mean": _num(m), "variance": _num(v)}
                                  for k, (m, v) in post.functional_means.items()}
        return out
    if functionals:
        raise click.UsageError("--functional only applies to method bme")
    if method == "direct":
        est = E.direct_inversion(record, eta)
    elif method == "scaled":
        est = E.scaled_direct_inversion(record, eta)
    elif method == "fisher":
        est = E.fisher_minimizer(record, eta)
    else:
        est = E.mle(record, spec.prior, eta)
    out.update(status=est.status.value,
               vector=_vec(est.vector.as_array() * factor) if est.ok else None,
               alpha=_num(est.alpha))
    if est.diagnostics.get("near_tie"):
        out["near_tie"] = True
    return out


# ---------------------------------------------------------------------------
# commands


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def cli():
    """Single-qubit state tomography from Cartesian Stern-Gerlach counts."""


_counts_opts = [
    click.option("--counts", help=COUNT_HELP),
    click.option("--counts-file", type=click.Path(), help="File holding one count record (JSON or CSV line)."),
]


def _apply(opts):
    def deco(fn):
        for opt in reversed(opts):
            fn = opt(fn)
        return fn
    return deco


_threads_opt = click.option("--threads", type=int, default=None,
                            help="Worker threads for BME grids (0 = all cores; default $BLOCHTOMO_THREADS or 1).")
_prior_opt = click.option("--prior", default=None,
                          help="Prior for mle/bme: hs, bures, pure, chernoff, ancilla:<k>, gaussian:<k>, "
                               "optionally with +entropy (default bures).")
_quad_opt = click.option("--quad", default=None, help="BME nodes as radial,polar,azimuthal (default 64,64,128).")
_format_opt = click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
                           show_default=True, help="Output format.")


@cli.command()
@_apply(_counts_opts)
@click.option("--method", type=click.Choice(METHOD_CHOICES), default="bme", show_default=True,
              help="Estimator.")
@_prior_opt
@click.option("--eta", type=float, default=1.0, show_default=True, help="Measurement fidelity in (0, 1].")
@click.option("--report", type=click.Choice(["platonic", "positivist"]), default="platonic", show_default=True,
              help="Report the noise-free state or eta times it.")
@_quad_opt
@click.option("--functional", "functionals", multiple=True, type=click.Choice(["entropy", "purity", "qfi"]),
              help="Posterior mean and variance of a state functional (bme only); repeatable.")
@_format_opt
@_threads_opt
def estimate(counts, counts_file, method, prior, eta, report, quad, functionals, fmt, threads):
    """Estimate the Bloch vector from one count record."""
    record = _parse_counts(counts, counts_file)
    payload = _estimate_payload(record, method, prior, eta, report, quad, functionals, threads)
    vec = payload.get("vector") or [None] * 3
    rows = [["method", "prior", "status", "x", "y", "z"],
            [method, payload["prior"] or "", payload["status"]] + ["" if v is None else repr(v) for v in vec]]
    _emit(_document("estimate", **payload), fmt, rows)


@cli.command()
@_apply(_counts_opts)
@click.option("--prior", "priors", multiple=True,
              help="Priors for mle and bme (repeatable; default hs and bures).")
@click.option("--eta", type=float, default=1.0, show_default=True, help="Measurement fidelity in (0, 1].")
@click.option("--report", type=click.Choice(["platonic", "positivist"]), default="platonic", show_default=True,
              help="Report the noise-free state or eta times it.")
@_quad_opt
@_format_opt
@_threads_opt
def compare(counts, counts_file, priors, eta, report, quad, fmt, threads):
    """Run every estimator on one count record."""
    record = _parse_counts(counts, counts_file)
    priors = priors or ("hs", "bures")
    results = []
    for method in ("direct", "scaled", "fisher"):
        results.append(_estimate_payload(record, method, None, eta, report, None, (), threads))
    for method in ("mle", "bme"):
        for pr in priors:
            results.append(_estimate_payload(record, method, pr, eta, report,
                                             quad if method == "bme" else None, (), threads))
    rows = [["method", "prior", "status", "x", "y", "z"]]
    for r in results:
        vec = r.get("vector") or [None] * 3
        rows.append([r["method"], r["prior"] or "", r["status"]] + ["" if v is None else repr(v) for v in vec])
    _emit(_document("compare", counts=record.to_json_obj(), results=results), fmt, rows)


def _sweep_doc(res, spec, n, eta):
    return {"method": spec.method, "prior": spec.prior.name if spec.prior else None, "n_per_axis": n,
            "eta": _num(eta), "mean": _vec(res.mean.as_array()),
            "covariance": [_num(c) for c in res.covariance.ravel()],
            "spreads": _vec(res.spreads), "failure_probability": _num(res.failure_probability),
            "accuracy": _num(res.accuracy)}


@click.command()
@click.option("--seed-state", default=None, help="Seed Bloch vector x,y,z (parametric mode).")
@_apply(_counts_opts)
@click.option("--mode", type=click.Choice(["parametric", "nonparametric"]), default="parametric",
              show_default=True, help="Seed with a physical state or with the sample means of --counts.")
@click.option("--method", type=click.Choice(METHOD_CHOICES), default="bme", show_default=True, help="Estimator.")
@_prior_opt
@click.option("--n", "n_per_axis", type=int, default=30, show_default=True, help="Shots per axis.")
@click.option("--eta", type=float, default=1.0, show_default=True, help="Measurement fidelity in (0, 1].")
@_quad_opt
@click.option("--plot-data", type=click.Path(), default=None,
              help="Write the 31x31 weighted (x, y) histogram of the estimates to this CSV file.")
@_format_opt
@_threads_opt
def bootstrap_cmd(seed_state, counts, counts_file, mode, method, prior, n_per_axis, eta, quad, plot_data, fmt,
                  threads):
    """Exact bootstrap mean, covariance and failure probability over all outcomes."""
    spec = _method_spec(method, prior, quad)
    if mode == "parametric":
        if seed_state is None:
            raise click.UsageError("parametric mode needs --seed-state")
        seed = _parse_vector(seed_state)
    else:
        if seed_state is not None:
            seed = _parse_vector(seed_state)
        else:
            seed = _parse_counts(counts, counts_file)
    res = bootstrap(seed, spec, n_per_axis, eta, mode, threads)
    if plot_data is not None:
        if mode != "parametric":
            raise click.UsageError("--plot-data needs parametric mode")
        _write_file(plot_data, histogram_csv(*histogram_xy(seed, spec, n_per_axis, 31, eta)))
    doc = _sweep_doc(res, spec, n_per_axis, eta)
    rows = [["method", "prior", "mean_x", "mean_y", "mean_z", "dx", "dy", "dz", "p_fail", "delta_tomo"],
            [spec.method, doc["prior"] or ""] + [repr(v) for v in doc["mean"] + doc["spreads"]]
            + [repr(doc["failure_probability"]), repr(doc["accuracy"])]]
    _emit(_document("bootstrap", mode=mode, **doc), fmt, rows)


@click.command()
@click.option("--state", default=None, help="True Bloch vector x,y,z.")
@click.option("--average", is_flag=True, help="Average over true states under the method's prior instead.")
@click.option("--averaging-prior", default=None, help="Override the averaging prior for --average.")
@click.option("--state-grid", default=None, help="State-average nodes radial,polar,azimuthal (default 24,24,48).")
@click.option("--method", type=click.Choice(METHOD_CHOICES), default="bme", show_default=True, help="Estimator.")
@_prior_opt
@click.option("--n", "n_per_axis", type=int, default=30, show_default=True, help="Shots per axis.")
@click.option("--eta", type=float, default=1.0, show_default=True, help="Measurement fidelity in (0, 1].")
@_quad_opt
@_format_opt
@_threads_opt
def accuracy_cmd(state, average, averaging_prior, state_grid, method, prior, n_per_axis, eta, quad, fmt, threads):
    """Rms trace distance between estimates and a true state, or its state average."""
    spec = _method_spec(method, prior, quad)
    if average == (state is not None):
        raise click.UsageError("give exactly one of --state or --average")
    if average:
        grid = QuadratureSpec.parse(state_grid) if state_grid else STATE_GRID
        avg_prior = parse_prior(averaging_prior) if averaging_prior else spec.natural_prior
        value = averaged_accuracy(spec, avg_prior, grid, n_per_axis, eta, threads)
        doc = {"method": method, "prior": spec.prior.name if spec.prior else None,
               "averaging_prior": avg_prior.name, "n_per_axis": n_per_axis, "eta": _num(eta),
               "averaged_accuracy": _num(value)}
        rows = [["method", "prior", "averaging_prior", "averaged_accuracy"],
                [method, doc["prior"] or "", avg_prior.name, repr(doc["averaged_accuracy"])]]
    else:
        res = bootstrap(_parse_vector(state), spec, n_per_axis, eta, threads=threads)
        doc = {"method": method, "prior": spec.prior.name if spec.prior else None,
               "state": _vec(_parse_vector(state)), "n_per_axis": n_per_axis, "eta": _num(eta),
               "accuracy": _num(res.accuracy), "failure_probability": _num(res.failure_probability)}
        rows = [["method", "prior", "accuracy", "p_fail"],
                [method, doc["prior"] or "", repr(doc["accuracy"]), repr(doc["failure_probability"])]]
    _emit(_document("accuracy", **doc), fmt, rows)


def _report_out(rep, command, fmt):
    doc = _document(command, **{k: v for k, v in rep.to_json_obj().items()})
    doc["cells"] = [{k: (_num(v) if isinstance(v, float) else v) for k, v in c.items()} for c in doc["cells"]]
    doc["seconds"] = _num(doc["seconds"])
    if fmt == "csv":
        click.echo(rep.to_csv(), nl=False)
    else:
        click.echo(dump_json(doc), nl=False)


@click.command()
@click.option("--rows", multiple=True, help="Restrict to these row labels (repeatable).")
@_format_opt
@_threads_opt
def table1(rows, fmt, threads):
    """Bootstrap statistics at (13/15, 0, 0) with 30 shots per axis, against the reference values."""
    rep = reproduce("table1", rows=rows or None, threads=threads)
    _report_out(rep, "table1", fmt)


@click.command()
@click.option("--rows", multiple=True, help="Restrict to these row labels (repeatable).")
@click.option("--states", default="default",
              help="'default' for the six reference states, or a JSON file of [[x, y, z], ...] "
                   "(reference values then do not apply and only the averages are checked).")
@click.option("--no-averages", is_flag=True, help="Skip the state-averaged column.")
@click.option("--fast", is_flag=True, help="Coarse 12x12x24 state grid for the averaged column.")
@_format_opt
@_threads_opt
def table2(rows, states, no_averages, fast, fmt, threads):
    """Accuracies for the reference states and the state-averaged accuracy of every method."""
    if states == "default":
        state_list = TABLE2_STATES
    else:
        try:
            with open(states) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise IOFailure(f"cannot read {states}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DomainError(f"malformed state file: {exc}") from exc
        state_list = tuple((f"s{i}", tuple(float(c) for c in s)) for i, s in enumerate(raw))
        if state_list:
            return _custom_states(state_list, rows, fmt, threads)
    rep = reproduce("table2", rows=rows or None, averages=not no_averages, states=state_list,
                    state_grid=FAST_STATE_GRID if fast else STATE_GRID, threads=threads)
    _report_out(rep, "table2", fmt)


def _custom_states(state_list, rows, fmt, threads):
    from .harness import TABLE2_ROWS, accuracy
    out = []
    csv_rows = [["row"] + [name for name, _ in state_list]]
    for label, spec, _, _ in TABLE2_ROWS:
        if rows and label not in rows:
            continue
        vals = [accuracy(s, spec, 30, threads=threads) for _, s in state_list]
        out.append({"row": label, "accuracies": _vec(vals)})
        csv_rows.append([label] + [repr(_num(v)) for v in vals])
    doc = _document("table2", states=[_vec(s) for _, s in state_list], rows=out)
    _emit(doc, fmt, csv_rows)


@cli.command("axes-check")
@click.option("--file", "path", required=True, type=click.Path(),
              help='JSON array of {"theta": .., "phi": .., "weight": ..} objects.')
@click.option("--spin", type=float, default=0.5, show_default=True, help="Spin j; checks even k up to 4j.")
@click.option("--tol", type=float, default=1e-10, show_default=True, help="Tolerance on |s_kq|.")
@click.option("--normalize", is_flag=True, help="Rescale weights to sum to 1.")
@click.option("--shots", type=int, default=None,
              help="Also report the flat-prior MLE <|r|^2> at r = 0 with this many shots per axis.")
@_format_opt
def axes_check(path, spin, tol, normalize, shots, fmt):
    """Check the spherical-harmonic uniformity condition for a weighted axis set."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DomainError(f"malformed axis file: {exc}") from exc
    axes = AxisSet.from_json_obj(raw, normalize)
    rep = uniformity_check(axes, spin, tol)
    body = rep.to_json_obj()
    body["spin"] = _num(body["spin"])
    body["tol"] = _num(body["tol"])
    for o in body["orders"]:
        o["max_abs_s"] = _num(o["max_abs_s"])
    if shots is not None:
        body["mle_variance_at_origin"] = _num(mle_variance_at_origin(axes, shots))
    rows = [["k", "max_abs_s", "passed"]] + [[o["k"], repr(o["max_abs_s"]), int(o["passed"])]
                                             for o in body["orders"]]
    _emit(_document("axes-check", axes=len(axes.weights), **body), fmt, rows)


bootstrap_cmd.name = "bootstrap"
accuracy_cmd.name = "accuracy"


@cli.group()
def harness():
    """Exhaustive-enumeration evaluation commands."""


for _cmd in (table1, table2, accuracy_cmd, bootstrap_cmd):
    cli.add_command(_cmd)
    harness.add_command(_cmd)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="blochtomo", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 2
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except IOFailure as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except DomainError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        click.echo(f"numerical error: {exc}", err=True)
        return 4
    return 0


def entry() -> None:
    sys.exit(main())
