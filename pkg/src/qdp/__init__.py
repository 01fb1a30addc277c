"""Exact, series and Monte Carlo computation of hard-core partition functions
on random subgraphs of the hypercube."""

import os

# the TBB layer shipped here is too old; the portable work queue is enough
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

from .exact import LogScalar, ModelParams  # noqa: E402
from .graph import Graph, build_hypercube  # noqa: E402

__all__ = ["Graph", "LogScalar", "ModelParams", "build_hypercube"]
