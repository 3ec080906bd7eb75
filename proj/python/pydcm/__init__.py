"""Python access to the dynamic causal model engine."""

from ._core import (  # noqa: F401
    DcmError,
    __version__,
    bootstrap,
    oracle_score,
    run,
    score,
    shapley,
    synth,
    train,
)

__all__ = ["DcmError", "bootstrap", "oracle_score", "run", "score", "shapley", "synth", "train"]
