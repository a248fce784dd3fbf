"""Python bindings for the hqm network simulator."""

import json

from ._core import (
    ConfigError,
    FitFailure,
    HqmError,
    LookupError,
    NoCrossingError,
    ParameterError,
    QuantizationError,
    SchedulingError,
    SlotCollision,
    SwitchConstraintViolation,
    UndefinedEstimate,
    UnphysicalInput,
    UnreachableOrdering,
    __version__,
    bandwidth_deconvolve,
    cauchy_schwarz,
    click_probs,
    config_hash,
    feedback_enhancement,
    g2_from_counts,
    loop_retrieval_efficiency,
    reproduce_targets,
)
from . import _core


def plan(op, t3, t4, t5=None, ratio=None, fine_tune=0.0):
    """Compile a chain operation; returns the plan as a dict."""
    return json.loads(_core._plan(op, t3, t4, t5, ratio, fine_tune))


def fit_decay(t, g2, err, form="rq", seed=0):
    return json.loads(_core._fit(list(t), list(g2), list(err), form, seed))


def reproduce(target, seed=1, trials=None, out_dir=""):
    return json.loads(_core._reproduce(target, seed, trials, str(out_dir)))


def simulate(config, out_dir="", format="json"):
    """Run a scenario given as a dict or JSON text; returns the estimates table."""
    text = config if isinstance(config, str) else json.dumps(config)
    return json.loads(_core._simulate(text, str(out_dir), format))
