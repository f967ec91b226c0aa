"""
File formats: panel CSV in/out, canonical result JSON, experiment CSV.

JSON output is canonical: keys in a fixed order, floats written with 17
significant digits so that parsing them back gives the identical double,
and a top-level envelope ``{schema_version, kind, payload, seed_info}``.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional, Union

import numpy as np

from pddid.errors import BadArmLabel, InconsistentArm, MissingColumn, NonNumeric
from pddid.experiments import ExperimentReport, ReportRow
from pddid.glm import FitSummary
from pddid.panel import DidEstimate, ModelSpec, PanelDataset
from pddid.permutation import EmpiricalNull, PdDidResult

SCHEMA_VERSION = "1"
PANEL_COLUMNS = ("unit_id", "group_id", "arm", "time", "outcome")
REPORT_COLUMNS = ("gamma", "l", "rho", "method", "mean_estimate", "bias",
                  "rejection_rate", "replications", "failures")

_ARM_LABELS = {"i": True, "1": True, "r": False, "0": False}

PathLike = Union[str, Path]


# ---------------------------------------------------------------------------
# number formatting


def format_float(x: float) -> str:
    """17 significant digits, always recognisable as a float."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x}")
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _csv_number(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# panel CSV


def load_panel_csv(path: PathLike, cutoff: float,
                   study_length: Optional[float] = None) -> PanelDataset:
    """Read a panel dataset.

    Required columns are ``unit_id, group_id, arm, time, outcome``; every
    ``z_<name>`` column becomes covariate ``<name>`` in column order.
    ``arm`` accepts I/R (any case) or 1/0. ``study_length`` defaults to
    the largest observed time.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MissingColumn(f"{path}: empty file, no header") from None
        missing = [c for c in PANEL_COLUMNS if c not in header]
        if missing:
            raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")
        pos = {c: header.index(c) for c in PANEL_COLUMNS}
        zcols = [(i, h[2:]) for i, h in enumerate(header) if h.startswith("z_")]

        units, groups, treated, times, outcomes, covs = [], [], [], [], [], []
        arm_of = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise NonNumeric(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            label = row[pos["arm"]].strip().lower()
            if label not in _ARM_LABELS:
                raise BadArmLabel(f"{path}:{lineno}: arm must be I/R or 1/0, got {row[pos['arm']]!r}")
            arm = _ARM_LABELS[label]
            group = row[pos["group_id"]].strip()
            if arm_of.setdefault(group, arm) != arm:
                raise InconsistentArm(f"{path}:{lineno}: group {group!r} appears in both arms")

            def num(col_index, name):
                try:
                    v = float(row[col_index])
                except ValueError:
                    raise NonNumeric(
                        f"{path}:{lineno}: column {name!r} is not numeric: {row[col_index]!r}"
                    ) from None
                if not math.isfinite(v):
                    raise NonNumeric(f"{path}:{lineno}: column {name!r} is not finite")
                return v

            units.append(row[pos["unit_id"]].strip())
            groups.append(group)
            treated.append(arm)
            times.append(num(pos["time"], "time"))
            outcomes.append(num(pos["outcome"], "outcome"))
            covs.append([num(i, "z_" + name) for i, name in zcols])

    if study_length is None:
        study_length = max(times) if times else 0.0
    return PanelDataset(
        units, groups, treated, times, outcomes,
        np.array(covs, dtype=float).reshape(len(outcomes), len(zcols)),
        study_length=study_length, cutoff=cutoff,
        covariate_names=[name for _, name in zcols],
    )


def panel_csv_text(dataset: PanelDataset) -> str:
    lines = [",".join(PANEL_COLUMNS + tuple("z_" + c for c in dataset.covariate_names))]
    for u, g, a, t, y, zs in zip(dataset.unit_id, dataset.group_id, dataset.treated,
                                 dataset.time, dataset.outcome, dataset.covariates):
        fields = [u, g, "I" if a else "R", _csv_number(t), _csv_number(y)]
        fields.extend(_csv_number(z) for z in zs)
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def write_panel_csv(dataset: PanelDataset, path: PathLike) -> None:
    for ident in list(dataset.unit_id) + list(dataset.group_id):
        if any(c in ident for c in ',"\n'):
            raise ValueError(f"identifier {ident!r} cannot be written unquoted")
    Path(path).write_text(panel_csv_text(dataset))


# ---------------------------------------------------------------------------
# canonical JSON


def _emit(obj, indent: int) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return "null" if math.isnan(obj) else format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        body = [f"{inner}{json.dumps(str(k))}: {_emit(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(body) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if not items:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in items):
            return "[" + ", ".join(_emit(v, indent + 1) for v in items) + "]"
        body = [inner + _emit(v, indent + 1) for v in items]
        return "[\n" + ",\n".join(body) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj) -> str:
    return _emit(obj, 0) + "\n"


def _spec_dict(spec: ModelSpec) -> dict:
    return {
        "method": spec.method,
        "family": spec.family,
        "trend_granularity": spec.trend_granularity,
        "trend_degree": spec.trend_degree,
        "include_covariates": spec.include_covariates,
    }


def _fit_dict(fit: FitSummary) -> dict:
    return {
        "family": fit.family,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "degrees_of_freedom": fit.degrees_of_freedom,
        "residual_variance": fit.residual_variance,
        "column_labels": list(fit.column_labels),
        "coefficients": fit.coefficients.tolist(),
        "standard_errors": fit.standard_errors.tolist(),
        "test_statistics": fit.test_statistics.tolist(),
        "p_values": fit.p_values.tolist(),
        "covariance": fit.covariance.tolist(),
    }


def _row_dict(row: ReportRow) -> dict:
    return {
        "gamma": row.gamma,
        "l": row.l,
        "rho": row.rho,
        "method": row.method,
        "mean_estimate": row.mean_estimate,
        "bias": row.bias,
        "rejection_count": row.rejection_count,
        "rejection_rate": row.rejection_rate,
        "replications": row.replications,
        "failures": row.failures,
    }


def result_document(result, seed_info: Optional[dict] = None) -> dict:
    """The JSON envelope for a DidEstimate, PdDidResult or ExperimentReport."""
    if isinstance(result, PdDidResult):
        kind = "pd_did_result"
        payload = {
            "gamma_hat": result.gamma_hat,
            "ci_low": result.ci_low,
            "ci_high": result.ci_high,
            "p_value": result.p_value,
            "alpha": result.alpha,
            "m": result.m,
            "seed": result.seed,
            "n_failed": result.n_failed,
            "null_mean": result.null.mean,
            "spec": _spec_dict(result.spec),
            "null_draws": result.null.draws.tolist(),
        }
        seed_info = {"seed": result.seed, **(seed_info or {})}
    elif isinstance(result, DidEstimate):
        kind = "did_estimate"
        payload = {
            "gamma_hat": result.gamma_hat,
            "se": result.se,
            "p_value": result.p_value,
            "spec": _spec_dict(result.spec),
            "fit": _fit_dict(result.fit),
        }
    elif isinstance(result, ExperimentReport):
        kind = "experiment_report"
        payload = {
            "alpha": result.alpha,
            "perm_m": result.perm_m,
            "grid": dict(result.meta),
            "rows": [_row_dict(r) for r in result.rows],
        }
        seed_info = {"master_seed": result.master_seed, **(seed_info or {})}
    else:
        raise TypeError(f"unsupported result type {type(result).__name__}")
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "payload": payload,
        "seed_info": seed_info,
    }


def write_results_json(result, path: PathLike, seed_info: Optional[dict] = None) -> None:
    Path(path).write_text(canonical_json(result_document(result, seed_info)))


def _nan(v):
    return math.nan if v is None else float(v)


def result_from_document(doc: dict):
    """Rebuild the result object written by :func:`result_document`."""
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {doc.get('schema_version')!r}")
    kind, p = doc["kind"], doc["payload"]
    if kind == "did_estimate":
        f = p["fit"]
        fit = FitSummary(
            coefficients=f["coefficients"], covariance=f["covariance"],
            standard_errors=f["standard_errors"], test_statistics=f["test_statistics"],
            p_values=f["p_values"], residual_variance=f["residual_variance"],
            degrees_of_freedom=f["degrees_of_freedom"], family=f["family"],
            converged=f["converged"], column_labels=tuple(f["column_labels"]),
            iterations=f["iterations"],
        )
        return DidEstimate(p["gamma_hat"], p["se"], p["p_value"], fit, ModelSpec(**p["spec"]))
    if kind == "pd_did_result":
        return PdDidResult(
            gamma_hat=p["gamma_hat"], null=EmpiricalNull.from_draws(p["null_draws"]),
            ci_low=p["ci_low"], ci_high=p["ci_high"], p_value=p["p_value"], m=p["m"],
            seed=p["seed"], alpha=p["alpha"], n_failed=p["n_failed"],
            spec=ModelSpec(**p["spec"]),
        )
    if kind == "experiment_report":
        rows = tuple(
            ReportRow(
                gamma=r["gamma"], l=r["l"], rho=r["rho"], method=r["method"],
                mean_estimate=_nan(r["mean_estimate"]), bias=_nan(r["bias"]),
                rejection_count=r["rejection_count"], rejection_rate=_nan(r["rejection_rate"]),
                replications=r["replications"], failures=r["failures"],
            )
            for r in p["rows"]
        )
        return ExperimentReport(rows=rows, master_seed=doc["seed_info"]["master_seed"],
                                perm_m=p["perm_m"], alpha=p["alpha"], meta=p["grid"])
    raise ValueError(f"unknown result kind {kind!r}")


def read_results_json(path: PathLike):
    return result_from_document(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# experiment CSV


def report_csv_text(report: ExperimentReport) -> str:
    lines = [",".join(REPORT_COLUMNS)]
    for r in report.rows:
        lines.append(",".join([
            _csv_number(r.gamma), _csv_number(r.l), _csv_number(r.rho), r.method,
            _csv_number(r.mean_estimate), _csv_number(r.bias), _csv_number(r.rejection_rate),
            str(r.replications), str(r.failures),
        ]))
    return "\n".join(lines) + "\n"


def write_report_csv(report: ExperimentReport, path: PathLike) -> None:
    Path(path).write_text(report_csv_text(report))
