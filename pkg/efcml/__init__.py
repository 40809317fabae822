"""Evolving multi-label fuzzy classification on data streams."""
import logging

from .baselines import ChainModel, FrozenModel, OneVsRestModel, freeze, model_from_dict
from .classifier import EvolvingMultiLabelClassifier
from .config import LearnConfig, SearchGrid
from .const import VERSION
from .harness import (
    RunSpec,
    TrendPoint,
    grid_search,
    load_model,
    run_interleaved,
    time_updates,
)
from .ingest import Dataset, load_arff, load_csv, split_stream

_LOGGER = logging.getLogger(__name__)
_LOGGER.addHandler(logging.NullHandler())

__version__ = VERSION
