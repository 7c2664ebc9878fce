"""Python access to the iidlab core: synthetic scenes, priors, metrics and the CLI."""

import json

from ._iidlab import (
    IidError,
    __version__,
    gradcheck,
    priors,
    run_cli,
    sample_scene,
    score_gray,
    score_rgb,
)
from ._iidlab import architecture_json as _architecture_json
from ._iidlab import whdr as _whdr


def architecture(base_width=8, input_size=64, seed=0):
    """Layer shapes and parameter counts of a freshly initialised network."""
    return json.loads(_architecture_json(base_width, input_size, seed))


def whdr(reflectance, judgments):
    """judgments is a dict in the judgment-file layout or its JSON text."""
    if not isinstance(judgments, str):
        judgments = json.dumps(judgments)
    return _whdr(reflectance, judgments)


__all__ = [
    "IidError",
    "__version__",
    "architecture",
    "gradcheck",
    "priors",
    "run_cli",
    "sample_scene",
    "score_gray",
    "score_rgb",
    "whdr",
]
