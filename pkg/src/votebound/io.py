"""Dataset CSV, ensemble JSON and report serialisation.

Floats are written with ``repr``, the shortest string that round-trips to the
same double, so reloading or rerunning reproduces values bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile

import numpy as np

from . import __version__
from .bounds import BOUND_KEYS
from .core import (
    BINARY,
    MULTILABEL,
    Dataset,
    Ensemble,
    LabelSpace,
    Posterior,
    RealValuedTableVoter,
    StumpVoter,
    TableVoter,
)
from .errors import ConfigError

UNDEFINED = "undefined"
TOOL = "votebound"


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".votebound-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj):
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


# -- labels ---------------------------------------------------------------------


def parse_label(text, space, where=""):
    text = text.strip()
    try:
        if space.kind == MULTILABEL:
            if len(text) != space.n_classes or set(text) - {"0", "1"}:
                raise ValueError
            return tuple(int(ch) for ch in text)
        value = int(text)
    except ValueError:
        raise ConfigError(f"{where}invalid {space.kind} label {text!r}") from None
    try:
        return space.check_target(value)
    except ConfigError as exc:
        raise ConfigError(f"{where}{exc}") from None


def format_label(value, space):
    if space.kind == MULTILABEL:
        return "".join(str(int(b)) for b in value)
    if space.kind == BINARY:
        return "+1" if int(value) == 1 else "-1"
    return str(int(value))


# -- datasets -------------------------------------------------------------------


def read_dataset(text, space, source="<dataset>"):
    """Parse a dataset CSV: columns ``f0..f{d-1}``, ``label`` and optional ``weight``."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ConfigError(f"{source}: empty file")
    header = [h.strip() for h in rows[0]]
    if "label" not in header:
        raise ConfigError(f"{source}:1: missing 'label' column")
    features = sorted((h for h in header if h.startswith("f") and h[1:].isdigit()), key=lambda h: int(h[1:]))
    if features != [f"f{k}" for k in range(len(features))] or not features:
        raise ConfigError(f"{source}:1: feature columns must be f0..f{{d-1}}, got {features}")
    unknown = set(header) - set(features) - {"label", "weight"}
    if unknown:
        raise ConfigError(f"{source}:1: unexpected columns {sorted(unknown)}")
    index = {h: k for k, h in enumerate(header)}
    has_weight = "weight" in index

    x, y, w = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ConfigError(f"{source}:{lineno}: expected {len(header)} columns, got {len(row)}")
        values = []
        for name in features:
            col = index[name]
            try:
                values.append(float(row[col]))
            except ValueError:
                raise ConfigError(f"{source}:{lineno}:{col + 1}: invalid number {row[col]!r}") from None
        x.append(values)
        y.append(parse_label(row[index["label"]], space, f"{source}:{lineno}:{index['label'] + 1}: "))
        if has_weight:
            col = index["weight"]
            try:
                weight = float(row[col])
            except ValueError:
                raise ConfigError(f"{source}:{lineno}:{col + 1}: invalid weight {row[col]!r}") from None
            if not weight >= 0 or not math.isfinite(weight):
                raise ConfigError(f"{source}:{lineno}:{col + 1}: weight must be a nonnegative number")
            w.append(weight)
    if not x:
        raise ConfigError(f"{source}: no examples")

    weights = None
    if has_weight:
        weights = np.array(w)
        total = math.fsum(weights)
        if not total > 0:
            raise ConfigError(f"{source}: weights sum to {total!r}")
        if abs(total - 1.0) > 1e-12:
            weights = weights / total
    return Dataset(space, np.array(x), np.array(y), weights)


def load_dataset(path, space):
    with open(path, newline="") as fh:
        return read_dataset(fh.read(), space, source=str(path))


def format_dataset(dataset):
    """CSV text for ``dataset``; a weight column is written only if weights are not uniform."""
    space = dataset.label_space
    uniform = np.array_equal(dataset.weights, np.full(dataset.n_examples, 1.0 / dataset.n_examples))
    header = [f"f{k}" for k in range(dataset.n_features)]
    if not uniform:
        header.append("weight")
    header.append("label")
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for ex in dataset.examples:
        row = [repr(v) for v in ex.features]
        if not uniform:
            row.append(repr(ex.weight))
        row.append(format_label(ex.target, space))
        writer.writerow(row)
    return out.getvalue()


# -- ensembles ------------------------------------------------------------------


def _voter_from_dict(entry, space, where):
    kind = entry.get("kind")
    try:
        if kind == "stump":
            def side(v):
                return parse_label(v, space, where) if isinstance(v, str) else v

            return StumpVoter(
                int(entry["featureIndex"]),
                float(entry["threshold"]),
                side(entry["leftClass"]),
                side(entry["rightClass"]),
            )
        if kind == "table":
            preds = entry["predictions"]
            if space.kind == MULTILABEL:
                preds = [parse_label(p, space, where) if isinstance(p, str) else p for p in preds]
            return TableVoter(preds)
        if kind == "realvalued-table":
            return RealValuedTableVoter(entry["predictions"])
    except KeyError as exc:
        raise ConfigError(f"{where}missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}{exc}") from None
    raise ConfigError(f"{where}unknown voter kind {kind!r}")


def read_ensemble(text, dataset=None, source="<ensemble>"):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        ls = doc["labelSpace"]
        space = LabelSpace(ls["kind"], ls.get("Q", 2))
        entries = doc["voters"]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{source}: missing ensemble field {exc}") from None
    voters = []
    for k, entry in enumerate(entries):
        where = f"{source}: voter {k}: "
        voter = _voter_from_dict(entry, space, where)
        try:
            voter.validate(space, dataset)
        except ConfigError as exc:
            raise ConfigError(f"{where}{exc}") from None
        voters.append(voter)
    posterior = doc.get("posterior")
    if posterior is not None:
        if len(posterior) != len(voters):
            raise ConfigError(f"{source}: posterior has {len(posterior)} weights for {len(voters)} voters")
        try:
            posterior = Posterior(posterior)
        except ConfigError as exc:
            raise ConfigError(f"{source}: {exc}") from None
    if dataset is not None and dataset.label_space != space:
        raise ConfigError(f"{source}: label space {space} does not match the dataset's {dataset.label_space}")
    return Ensemble(space, voters, posterior)


def load_ensemble(path, dataset=None):
    with open(path) as fh:
        return read_ensemble(fh.read(), dataset, source=str(path))


def peek_label_space(path):
    """Label space declared by an ensemble file, needed to parse the dataset labels."""
    with open(path) as fh:
        text = fh.read()
    try:
        ls = json.loads(text)["labelSpace"]
        return LabelSpace(ls["kind"], ls.get("Q", 2))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: missing ensemble field {exc}") from None


def ensemble_to_dict(ensemble):
    space = ensemble.label_space
    voters = []
    for v in ensemble.voters:
        if isinstance(v, StumpVoter):
            voters.append({
                "kind": "stump",
                "featureIndex": v.feature_index,
                "threshold": float(v.threshold),
                "leftClass": format_label(v.left, space) if space.kind == MULTILABEL else v.left,
                "rightClass": format_label(v.right, space) if space.kind == MULTILABEL else v.right,
            })
        elif isinstance(v, TableVoter):
            if space.kind == MULTILABEL:
                preds = [format_label(p, space) for p in v.predictions]
            else:
                preds = [int(p) for p in v.predictions]
            voters.append({"kind": "table", "predictions": preds})
        else:
            voters.append({"kind": "realvalued-table", "predictions": [float(p) for p in v.values]})
    return {
        "labelSpace": {"kind": space.kind, "Q": space.n_classes},
        "voters": voters,
        "posterior": [float(p) for p in ensemble.posterior.weights],
    }


# -- reports --------------------------------------------------------------------


def _value(v):
    return UNDEFINED if v is None else float(v)


def report_to_dict(report):
    return {
        "tool": TOOL,
        "version": __version__,
        "labelSpace": {"kind": report.kind, "Q": report.n_classes},
        "settings": {"omega": float(report.settings.omega), "Q": report.n_classes, "seed": report.settings.seed},
        "risk": float(report.risk),
        "moments": {k: {"mu1": m.mu1, "mu2": m.mu2} for k, m in report.moments.items()},
        "marginProbabilities": {k: float(v) for k, v in report.margin_probabilities.items()},
        "bounds": {k: _value(report.bounds[k]) for k in BOUND_KEYS},
        "boundsClipped": {k: _value(report.clipped(k)) for k in BOUND_KEYS},
        "preconditions": {k: bool(report.preconditions[k]) for k in BOUND_KEYS},
        "notes": {k: report.notes[k] for k in BOUND_KEYS if k in report.notes},
    }


def report_to_csv(report):
    """Flat ``section,key,value`` rows of the same content as the JSON report."""
    doc = report_to_dict(report)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["section", "key", "value"])
    writer.writerow(["meta", "tool", doc["tool"]])
    writer.writerow(["meta", "version", doc["version"]])
    for key, value in doc["settings"].items():
        writer.writerow(["settings", key, "" if value is None else repr(value) if isinstance(value, float) else value])
    writer.writerow(["risk", "risk", repr(doc["risk"])])
    for family, m in doc["moments"].items():
        writer.writerow(["moments", f"{family}.mu1", repr(m["mu1"])])
        writer.writerow(["moments", f"{family}.mu2", repr(m["mu2"])])
    for key, value in doc["marginProbabilities"].items():
        writer.writerow(["marginProbabilities", key, repr(value)])
    for section in ("bounds", "boundsClipped"):
        for key, value in doc[section].items():
            writer.writerow([section, key, value if value == UNDEFINED else repr(value)])
    for key, value in doc["preconditions"].items():
        writer.writerow(["preconditions", key, str(value).lower()])
    return out.getvalue()


def minimize_result_to_dict(result, config):
    return {
        "tool": TOOL,
        "version": __version__,
        "settings": {
            "omega": float(config.omega),
            "seed": config.seed,
            "tolerance": config.tolerance,
            "maxIterations": config.max_iterations,
            "gridSize": config.grid_size,
            "refine": config.refine,
        },
        "posterior": [float(p) for p in result.posterior.weights],
        "mu": result.mu,
        "mu1": result.mu1,
        "mu2": result.mu2,
        "bound": result.bound,
        "iterations": result.iterations,
        "converged": result.converged,
        "skipped": result.skipped,
        "grid": [
            {
                "mu": p.mu,
                "feasible": p.feasible,
                "bound": _value(p.bound),
                "iterations": p.iterations,
                "converged": p.converged,
                "monotone": p.monotone,
            }
            for p in sorted(result.grid, key=lambda p: p.mu)
        ],
    }
