"""Configuration schemas for efcml."""
from dataclasses import asdict, dataclass, fields, replace
import itertools
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Tuple, Union

import voluptuous as vol

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .const import (
    AL_LABELS,
    AL_MODES,
    AL_OFF,
    AL_SAMPLES,
    CONF_ADAPT_MAX,
    CONF_ADAPT_MIN,
    CONF_ADAPT_RATE,
    CONF_AL,
    CONF_ALPHA,
    CONF_BETA,
    CONF_BUDGET,
    CONF_CHAIN_ORDER,
    CONF_CORRELATION_LEARNING,
    CONF_CRITERIA,
    CONF_CSV_HEADER,
    CONF_CSV_LABELS,
    CONF_DATA,
    CONF_DIAGNOSTICS,
    CONF_EPS_FRACTION,
    CONF_FAC,
    CONF_FOLDS,
    CONF_GRID_FILE,
    CONF_HESSIAN_MODE,
    CONF_LABELS_XML,
    CONF_M,
    CONF_MAX_HALVINGS,
    CONF_MAX_PROX_ITERS,
    CONF_MAX_PROX_ITERS_INCREMENTAL,
    CONF_MERGE_KAPPA,
    CONF_METHOD,
    CONF_OUT,
    CONF_P_INIT,
    CONF_PROX_TOL,
    CONF_RECORD_TIMING,
    CONF_SEED,
    CONF_SIGMA_FLOOR_FRACTION,
    CONF_SPLIT,
    CONF_THRESH2,
    CONF_THRESH3,
    CONF_VIGILANCE,
    CRITERIA,
    DEFAULT_ADAPT_MAX,
    DEFAULT_ADAPT_MIN,
    DEFAULT_ADAPT_RATE,
    DEFAULT_ALPHA,
    DEFAULT_ALPHA_GRID,
    DEFAULT_BETA,
    DEFAULT_BETA_GRID,
    DEFAULT_BUDGET,
    DEFAULT_EPS_FRACTION,
    DEFAULT_FAC,
    DEFAULT_FOLDS,
    DEFAULT_HESSIAN_MODE,
    DEFAULT_M,
    DEFAULT_MAX_HALVINGS,
    DEFAULT_MAX_PROX_ITERS,
    DEFAULT_MAX_PROX_ITERS_INCREMENTAL,
    DEFAULT_MERGE_KAPPA,
    DEFAULT_OUT,
    DEFAULT_P_INIT,
    DEFAULT_PROX_TOL,
    DEFAULT_SEED,
    DEFAULT_SIGMA_FLOOR_FRACTION,
    DEFAULT_SPLIT,
    DEFAULT_THRESH2,
    DEFAULT_THRESH3,
    DEFAULT_VIGILANCE_GRID,
    HESSIAN_INVERSE,
    HESSIAN_STATISTICS,
    METHOD_EFCML,
    METHODS,
)
from .exceptions import MalformedFileError

_LOGGER = logging.getLogger(__name__)

_NON_NEGATIVE = vol.All(vol.Coerce(float), vol.Range(min=0))
_POSITIVE = vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False))
_UNIT_OPEN = vol.All(
    vol.Coerce(float),
    vol.Range(min=0, max=1, min_included=False, max_included=False),
)


def _check_adapt_bounds(data: Dict[str, Any]) -> Dict[str, Any]:
    """Make sure the adaptation clamp is not inverted."""
    if data[CONF_ADAPT_MIN] > data[CONF_ADAPT_MAX]:
        raise vol.Invalid(
            f"{CONF_ADAPT_MIN} must not exceed {CONF_ADAPT_MAX}", path=[CONF_ADAPT_MIN]
        )
    return data


def _get_learn_schema(defaults: Optional[Dict[str, Any]] = None) -> vol.Schema:
    """Gets a learn config schema using the defaults as a backup."""
    defaults = defaults or {}

    def _get_default(key: str, fallback_default: Any = None) -> Any:
        """Gets default value for key."""
        return defaults.get(key, fallback_default)

    return vol.All(
        vol.Schema(
            {
                vol.Optional(
                    CONF_ALPHA, default=_get_default(CONF_ALPHA, DEFAULT_ALPHA)
                ): _NON_NEGATIVE,
                vol.Optional(
                    CONF_BETA, default=_get_default(CONF_BETA, DEFAULT_BETA)
                ): _NON_NEGATIVE,
                vol.Optional(
                    CONF_FAC, default=_get_default(CONF_FAC, DEFAULT_FAC)
                ): _POSITIVE,
                vol.Optional(CONF_M, default=_get_default(CONF_M, DEFAULT_M)): vol.All(
                    vol.Coerce(int), vol.Range(min=1)
                ),
                vol.Optional(
                    CONF_EPS_FRACTION,
                    default=_get_default(CONF_EPS_FRACTION, DEFAULT_EPS_FRACTION),
                ): _UNIT_OPEN,
                vol.Optional(
                    CONF_SIGMA_FLOOR_FRACTION,
                    default=_get_default(
                        CONF_SIGMA_FLOOR_FRACTION, DEFAULT_SIGMA_FLOOR_FRACTION
                    ),
                ): _POSITIVE,
                vol.Optional(
                    CONF_P_INIT, default=_get_default(CONF_P_INIT, DEFAULT_P_INIT)
                ): _POSITIVE,
                vol.Optional(
                    CONF_MERGE_KAPPA,
                    default=_get_default(CONF_MERGE_KAPPA, DEFAULT_MERGE_KAPPA),
                ): _POSITIVE,
                vol.Optional(
                    CONF_THRESH2, default=_get_default(CONF_THRESH2, DEFAULT_THRESH2)
                ): vol.All(
                    vol.Coerce(float),
                    vol.Range(min=0.5, max=1, min_included=False, max_included=False),
                ),
                vol.Optional(
                    CONF_THRESH3, default=_get_default(CONF_THRESH3, DEFAULT_THRESH3)
                ): _POSITIVE,
                vol.Optional(
                    CONF_BUDGET, default=_get_default(CONF_BUDGET, DEFAULT_BUDGET)
                ): vol.All(vol.Coerce(float), vol.Range(min=0, max=1, min_included=False)),
                vol.Optional(
                    CONF_MAX_PROX_ITERS,
                    default=_get_default(CONF_MAX_PROX_ITERS, DEFAULT_MAX_PROX_ITERS),
                ): vol.All(vol.Coerce(int), vol.Range(min=0)),
                vol.Optional(
                    CONF_MAX_PROX_ITERS_INCREMENTAL,
                    default=_get_default(
                        CONF_MAX_PROX_ITERS_INCREMENTAL,
                        DEFAULT_MAX_PROX_ITERS_INCREMENTAL,
                    ),
                ): vol.All(vol.Coerce(int), vol.Range(min=0)),
                vol.Optional(
                    CONF_PROX_TOL, default=_get_default(CONF_PROX_TOL, DEFAULT_PROX_TOL)
                ): _NON_NEGATIVE,
                vol.Optional(
                    CONF_MAX_HALVINGS,
                    default=_get_default(CONF_MAX_HALVINGS, DEFAULT_MAX_HALVINGS),
                ): vol.All(vol.Coerce(int), vol.Range(min=0)),
                vol.Optional(
                    CONF_HESSIAN_MODE,
                    default=_get_default(CONF_HESSIAN_MODE, DEFAULT_HESSIAN_MODE),
                ): vol.In([HESSIAN_INVERSE, HESSIAN_STATISTICS]),
                vol.Optional(
                    CONF_CORRELATION_LEARNING,
                    default=_get_default(CONF_CORRELATION_LEARNING, True),
                ): vol.Boolean(),
                vol.Optional(
                    CONF_ADAPT_RATE,
                    default=_get_default(CONF_ADAPT_RATE, DEFAULT_ADAPT_RATE),
                ): vol.All(
                    vol.Coerce(float), vol.Range(min=0, max=1, max_included=False)
                ),
                vol.Optional(
                    CONF_ADAPT_MIN, default=_get_default(CONF_ADAPT_MIN, DEFAULT_ADAPT_MIN)
                ): _POSITIVE,
                vol.Optional(
                    CONF_ADAPT_MAX, default=_get_default(CONF_ADAPT_MAX, DEFAULT_ADAPT_MAX)
                ): _POSITIVE,
                vol.Optional(
                    CONF_CRITERIA, default=_get_default(CONF_CRITERIA, list(CRITERIA))
                ): vol.All(vol.Unique(), [vol.In(CRITERIA)]),
                vol.Optional(
                    CONF_CHAIN_ORDER, default=_get_default(CONF_CHAIN_ORDER, None)
                ): vol.Any(None, vol.All(vol.Unique(), [vol.Coerce(int)])),
            }
        ),
        _check_adapt_bounds,
    )


LEARN_CONFIG_SCHEMA = _get_learn_schema()


@dataclass(frozen=True)
class LearnConfig:
    """Hyper-parameters shared by every learner of a run."""

    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    fac: float = DEFAULT_FAC
    m: int = DEFAULT_M
    eps_fraction: float = DEFAULT_EPS_FRACTION
    sigma_floor_fraction: float = DEFAULT_SIGMA_FLOOR_FRACTION
    p_init: float = DEFAULT_P_INIT
    merge_kappa: float = DEFAULT_MERGE_KAPPA
    thresh2: float = DEFAULT_THRESH2
    thresh3: float = DEFAULT_THRESH3
    budget: float = DEFAULT_BUDGET
    max_prox_iters: int = DEFAULT_MAX_PROX_ITERS
    max_prox_iters_incremental: int = DEFAULT_MAX_PROX_ITERS_INCREMENTAL
    prox_tol: float = DEFAULT_PROX_TOL
    max_halvings: int = DEFAULT_MAX_HALVINGS
    hessian_mode: str = DEFAULT_HESSIAN_MODE
    correlation_learning: bool = True
    adapt_rate: float = DEFAULT_ADAPT_RATE
    adapt_min: float = DEFAULT_ADAPT_MIN
    adapt_max: float = DEFAULT_ADAPT_MAX
    criteria: Tuple[str, ...] = tuple(CRITERIA)
    chain_order: Optional[Tuple[int, ...]] = None

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]] = None) -> "LearnConfig":
        """Validate a plain mapping and build a config from it."""
        validated = LEARN_CONFIG_SCHEMA(dict(data or {}))
        validated[CONF_CRITERIA] = tuple(validated[CONF_CRITERIA])
        if validated[CONF_CHAIN_ORDER] is not None:
            validated[CONF_CHAIN_ORDER] = tuple(validated[CONF_CHAIN_ORDER])
        return cls(**validated)

    def as_dict(self) -> Dict[str, Any]:
        """Return a JSON friendly mapping of the config."""
        data = asdict(self)
        data[CONF_CRITERIA] = list(self.criteria)
        if self.chain_order is not None:
            data[CONF_CHAIN_ORDER] = list(self.chain_order)
        return data

    def updated(self, **changes: Any) -> "LearnConfig":
        """Return a validated copy with some fields replaced."""
        unknown = set(changes) - {item.name for item in fields(self)}
        if unknown:
            raise vol.Invalid(f"Unknown config keys: {sorted(unknown)}")
        return LearnConfig.from_dict({**self.as_dict(), **changes})

    @property
    def plain_rfwls(self) -> bool:
        """Whether consequents are learned with RFWLS only."""
        return not self.correlation_learning

    @property
    def refits_consequents(self) -> bool:
        """Whether the initial batch ends with a penalized refit of the consequents."""
        return not self.plain_rfwls and (self.alpha > 0.0 or self.beta > 0.0)


def _float_list(minimum_included: bool = True) -> vol.All:
    item = vol.All(vol.Coerce(float), vol.Range(min=0, min_included=minimum_included))
    return vol.All(vol.Coerce(list), [item], vol.Length(min=1))


GRID_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_ALPHA, default=list(DEFAULT_ALPHA_GRID)): _float_list(),
        vol.Optional(CONF_BETA, default=list(DEFAULT_BETA_GRID)): _float_list(),
        vol.Optional(CONF_VIGILANCE, default=list(DEFAULT_VIGILANCE_GRID)): _float_list(
            minimum_included=False
        ),
        vol.Optional(CONF_FOLDS, default=DEFAULT_FOLDS): vol.All(
            vol.Coerce(int), vol.Range(min=2)
        ),
    }
)


@dataclass(frozen=True)
class SearchGrid:
    """Grid of hyper-parameters evaluated during the warm-up phase."""

    alpha: Tuple[float, ...] = tuple(DEFAULT_ALPHA_GRID)
    beta: Tuple[float, ...] = tuple(DEFAULT_BETA_GRID)
    vigilance: Tuple[float, ...] = tuple(DEFAULT_VIGILANCE_GRID)
    folds: int = DEFAULT_FOLDS

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]] = None) -> "SearchGrid":
        """Validate a plain mapping and build a grid from it."""
        validated = GRID_SCHEMA(dict(data or {}))
        return cls(
            alpha=tuple(validated[CONF_ALPHA]),
            beta=tuple(validated[CONF_BETA]),
            vigilance=tuple(validated[CONF_VIGILANCE]),
            folds=validated[CONF_FOLDS],
        )

    def as_dict(self) -> Dict[str, Any]:
        """Return a JSON friendly mapping of the grid."""
        return {
            CONF_ALPHA: list(self.alpha),
            CONF_BETA: list(self.beta),
            CONF_VIGILANCE: list(self.vigilance),
            CONF_FOLDS: self.folds,
        }

    def vigilance_only(self) -> "SearchGrid":
        """Grid used by learners without correlation learning."""
        return replace(self, alpha=(0.0,), beta=(0.0,))

    def points(self) -> Iterator[Tuple[float, float, float]]:
        """Iterate (alpha, beta, vigilance) in grid order."""
        return itertools.product(self.alpha, self.beta, self.vigilance)

    @property
    def size(self) -> int:
        """Number of grid points."""
        return len(self.alpha) * len(self.beta) * len(self.vigilance)


def load_grid_file(path: Union[str, Path]) -> SearchGrid:
    """Load a TOML or JSON grid file."""
    path = Path(path)
    suffix = path.suffix.lower()
    try:
        if suffix == ".toml":
            with open(path, "rb") as fptr:
                data = tomllib.load(fptr)
        elif suffix == ".json":
            with open(path, encoding="utf-8") as fptr:
                data = json.load(fptr)
        else:
            raise vol.Invalid(f"Unsupported grid file type: {path.name}")
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as err:
        raise MalformedFileError(f"Unable to parse grid file {path}: {err}") from err

    _LOGGER.debug("Loaded grid file %s", path)
    return SearchGrid.from_dict(data)


def _check_label_source(data: Dict[str, Any]) -> Dict[str, Any]:
    """Make sure the dataset has a way to find its label columns."""
    if data.get(CONF_LABELS_XML) is None and data.get(CONF_CSV_LABELS) is None:
        raise vol.Invalid(
            f"One of {CONF_LABELS_XML} or {CONF_CSV_LABELS} is required",
            path=[CONF_LABELS_XML],
        )
    return data


def _check_active_method(data: Dict[str, Any]) -> Dict[str, Any]:
    """Criterion-driven selection needs the rule base of an evolving EFC-ML model."""
    if data[CONF_AL] in (AL_LABELS, AL_SAMPLES) and data[CONF_METHOD] != METHOD_EFCML:
        raise vol.Invalid(
            f"{CONF_AL}={data[CONF_AL]} requires {CONF_METHOD}={METHOD_EFCML}",
            path=[CONF_AL],
        )
    return data


RUN_SPEC_SCHEMA = vol.All(
    vol.Schema(
        {
            vol.Required(CONF_DATA): vol.All(str, vol.Length(min=1)),
            vol.Exclusive(CONF_LABELS_XML, "labels"): vol.Any(None, str),
            vol.Exclusive(CONF_CSV_LABELS, "labels"): vol.Any(
                None, vol.All(vol.Coerce(int), vol.Range(min=1))
            ),
            vol.Optional(CONF_CSV_HEADER, default=False): vol.Boolean(),
            vol.Optional(CONF_METHOD, default=METHOD_EFCML): vol.In(METHODS),
            vol.Optional(CONF_SPLIT, default=DEFAULT_SPLIT): _UNIT_OPEN,
            vol.Optional(CONF_AL, default=AL_OFF): vol.In(AL_MODES),
            vol.Optional(CONF_BUDGET, default=DEFAULT_BUDGET): vol.All(
                vol.Coerce(float), vol.Range(min=0, max=1, min_included=False)
            ),
            vol.Optional(CONF_GRID_FILE, default=None): vol.Any(None, str),
            vol.Optional(CONF_SEED, default=DEFAULT_SEED): vol.Coerce(int),
            vol.Optional(CONF_OUT, default=DEFAULT_OUT): str,
            vol.Optional(CONF_RECORD_TIMING, default=True): vol.Boolean(),
            vol.Optional(CONF_DIAGNOSTICS, default=False): vol.Boolean(),
        }
    ),
    _check_label_source,
    _check_active_method,
)
