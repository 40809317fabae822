"""Constants for efcml."""

VERSION = "v0.0.0"  # this will be automatically updated as part of the release workflow
SCHEMA_VERSION = 1

# Methods
METHOD_EFCML = "efcml"
METHOD_OVR = "ovr"
METHOD_CHAIN = "chain"
STATIC_PREFIX = "static-"
METHODS = [
    METHOD_EFCML,
    METHOD_OVR,
    METHOD_CHAIN,
    STATIC_PREFIX + METHOD_EFCML,
    STATIC_PREFIX + METHOD_OVR,
    STATIC_PREFIX + METHOD_CHAIN,
]

# Active learning modes
AL_OFF = "off"
AL_LABELS = "labels"
AL_SAMPLES = "samples"
AL_RANDOM = "random"
AL_MODES = [AL_OFF, AL_LABELS, AL_SAMPLES, AL_RANDOM]

# Selection criteria
CRITERION_NOVELTY = "novelty"
CRITERION_UNCERTAINTY = "uncertainty"
CRITERION_INSTABILITY = "instability"
CRITERION_RANDOM = "random"
CRITERIA = [CRITERION_NOVELTY, CRITERION_UNCERTAINTY, CRITERION_INSTABILITY]

# Selection verdicts
VERDICT_FULL = "full"
VERDICT_PARTIAL = "partial"
VERDICT_NONE = "none"

# Hessian refresh modes
HESSIAN_INVERSE = "inverse"
HESSIAN_STATISTICS = "statistics"

# Configuration Properties
CONF_ALPHA = "alpha"
CONF_BETA = "beta"
CONF_FAC = "fac"
CONF_M = "m"
CONF_EPS_FRACTION = "eps_fraction"
CONF_SIGMA_FLOOR_FRACTION = "sigma_floor_fraction"
CONF_P_INIT = "p_init"
CONF_MERGE_KAPPA = "merge_kappa"
CONF_THRESH2 = "thresh2"
CONF_THRESH3 = "thresh3"
CONF_BUDGET = "budget"
CONF_MAX_PROX_ITERS = "max_prox_iters"
CONF_MAX_PROX_ITERS_INCREMENTAL = "max_prox_iters_incremental"
CONF_PROX_TOL = "prox_tol"
CONF_MAX_HALVINGS = "max_halvings"
CONF_HESSIAN_MODE = "hessian_mode"
CONF_CORRELATION_LEARNING = "correlation_learning"
CONF_ADAPT_RATE = "adapt_rate"
CONF_ADAPT_MIN = "adapt_min"
CONF_ADAPT_MAX = "adapt_max"
CONF_CRITERIA = "criteria"
CONF_CHAIN_ORDER = "chain_order"

# Run specification
CONF_DATA = "data"
CONF_LABELS_XML = "labels_xml"
CONF_CSV_LABELS = "csv_labels"
CONF_CSV_HEADER = "csv_header"
CONF_METHOD = "method"
CONF_SPLIT = "split"
CONF_AL = "al"
CONF_GRID_FILE = "grid_file"
CONF_FOLDS = "folds"
CONF_SEED = "seed"
CONF_OUT = "out"
CONF_RECORD_TIMING = "record_timing"
CONF_DIAGNOSTICS = "diagnostics"
CONF_VIGILANCE = "vigilance"

# Defaults
DEFAULT_ALPHA = 0.0
DEFAULT_BETA = 0.0
DEFAULT_FAC = 0.5
DEFAULT_M = 4
DEFAULT_EPS_FRACTION = 0.01
DEFAULT_SIGMA_FLOOR_FRACTION = 1e-3
DEFAULT_P_INIT = 1000.0
DEFAULT_MERGE_KAPPA = 1.0
DEFAULT_THRESH2 = 0.6
DEFAULT_THRESH3 = 0.075
DEFAULT_BUDGET = 1.0
DEFAULT_MAX_PROX_ITERS = 50
DEFAULT_MAX_PROX_ITERS_INCREMENTAL = 1
DEFAULT_PROX_TOL = 1e-8
DEFAULT_MAX_HALVINGS = 8
DEFAULT_HESSIAN_MODE = HESSIAN_INVERSE
DEFAULT_ADAPT_RATE = 0.01
DEFAULT_ADAPT_MIN = 0.2
DEFAULT_ADAPT_MAX = 2.0
DEFAULT_SPLIT = 0.25
DEFAULT_FOLDS = 5
DEFAULT_SEED = 42
DEFAULT_OUT = "out"

# Default grids
DEFAULT_ALPHA_GRID = [0.0, 0.01, 0.025, 0.05, 0.075, 0.1, 0.5, 1.0, 5.0, 10.0]
DEFAULT_BETA_GRID = [0.0, 0.1, 0.5, 1.0, 5.0, 10.0, 50.0, 100.0]
DEFAULT_VIGILANCE_GRID = [round(0.1 + 0.05 * step, 2) for step in range(17)]

# Numerics
ACTIVATION_FLOOR = 1e-300
CRISP_THRESHOLD = 0.5
DEGENERATE_VARIANCE = 1e-12
RIDGE_CONDITION_TARGET = 1e8
COV_FLOOR_TRIGGER = 1e8
COV_FLOOR_SCALE = 1e-8

# Output files
TREND_FILE = "trend.csv"
SELECTION_FILE = "selection.csv"
MODEL_FILE = "model.json"
CONFIG_FILE = "config.json"
DIAGNOSTICS_FILE = "diagnostics.csv"

TREND_COLUMNS = ["n", "pa", "ap", "rules", "selected_fraction", "cum_update_seconds"]
SELECTION_COLUMNS = ["id", "verdict", "trigger", "labels", "spend_fraction"]
DIAGNOSTICS_COLUMNS = ["rule", "iteration", "wls", "lasso", "corr", "total"]
FLOAT_FORMAT = "%.9g"
