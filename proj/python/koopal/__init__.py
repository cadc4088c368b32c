"""Koopman eigenfunction toolkit.

Thin Python layer over the compiled core. Experiment configs and summaries are
plain dicts; arrays are numpy.
"""

import json

from . import _koopal
from ._koopal import (
    dense_eigenpairs,
    deflate_spectrum,
    experiment_ids,
    fit_edmd,
    num_threads,
    qr_eigenvalues,
    sample_snapshots,
    set_num_threads,
    transform_Ti,
    transform_Ti_inv,
    transform_To,
)

__all__ = [
    "KoopalError",
    "crossvalidation",
    "default_config",
    "dense_eigenpairs",
    "deflate_spectrum",
    "experiment_ids",
    "fit_edmd",
    "num_threads",
    "qr_eigenvalues",
    "run_experiment",
    "sample_snapshots",
    "set_num_threads",
    "transform_Ti",
    "transform_Ti_inv",
    "transform_To",
]


class KoopalError(RuntimeError):
    """Library failure; ``kind`` names the error category (config, convergence, ...)."""

    def __init__(self, kind, message):
        super().__init__(message)
        self.kind = kind


def _wrap(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except _koopal.KoopalError as e:
        kind, _, msg = str(e).partition("|")
        raise KoopalError(kind, msg) from None


def default_config(experiment_id):
    return json.loads(_wrap(_koopal.default_config_json, experiment_id))


def run_experiment(config=None, **overrides):
    """Run one experiment. ``config`` is a dict or an experiment id; keyword
    arguments override entries of ``params``."""
    if isinstance(config, str):
        config = default_config(config)
    config = dict(config)
    if overrides:
        config["params"] = {**config.get("params", {}), **overrides}
    return json.loads(_wrap(_koopal.run_experiment_json, json.dumps(config)))


def crossvalidation(matrices=50, dim_lo=4, dim_hi=20, tol=1e-6, seed=0):
    return json.loads(_wrap(_koopal.crossvalidation_json, matrices, dim_lo, dim_hi, tol, seed))
