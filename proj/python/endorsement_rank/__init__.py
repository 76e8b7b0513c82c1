"""Activity-driven destination ranking with A/B evaluation."""

import json

from ._erank import (
    EndorsementIndex,
    IngestError,
    Snapshot,
    ValidationError,
    build_snapshot,
    g_test,
    load_snapshot,
    normal_critical_value,
    proportion_halfwidth,
)
from . import _erank


def _text(doc):
    return doc if isinstance(doc, str) else json.dumps(doc)


def assign_variant(user_id, experiment):
    return _erank.assign_variant(user_id, _text(experiment))


def evaluate(log_csv, experiment, level=0.90, sessions=False):
    """Report for a click log given as CSV text."""
    return json.loads(_erank.evaluate_log(log_csv, _text(experiment), level, sessions))


def simulate(world, experiment, users, seed=0):
    """Returns (click log CSV, report dict, rendered table)."""
    log, report, table = _erank.simulate(_text(world), _text(experiment), users, seed)
    return log, json.loads(report), table


__all__ = [
    "EndorsementIndex",
    "IngestError",
    "Snapshot",
    "ValidationError",
    "assign_variant",
    "build_snapshot",
    "evaluate",
    "g_test",
    "load_snapshot",
    "normal_critical_value",
    "proportion_halfwidth",
    "simulate",
]
