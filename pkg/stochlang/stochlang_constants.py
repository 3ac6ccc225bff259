"""
Constants and configuration defaults for stochlang.
This file contains the numeric defaults, file-format keywords and exit codes used across the package.
"""

# Numeric defaults. Every value here can be overridden through StochlangSettings (STOCHLANG_* env vars).
NUMERIC_DEFAULTS = {
    "tolerance": 1e-9,
    "enumeration_budget": 2_000_000,
    "pivot_threshold": 1e-12,
    "cross_check_length": 14,
    "cross_check_divergence": 0.05,
    "residual_factor": 1e-8,
    "sample_c1": 4.0,
    "sample_c2": 4.0,
    "default_seed": 0,
}

# Weights of mixtures must sum to one within this.
MIXTURE_WEIGHT_TOLERANCE = 1e-12

# Margin added to alpha by dirac_approx so the distance lands strictly below epsilon.
DIRAC_SAFETY_MARGIN = 1e-12

# Headers and line keywords of the text formats
FORMAT_KEYWORDS = {
    "alphabet_header": "alphabet:",
    "cra_header": "cra",
    "dfa_header": "dfa",
    "init": "init",
    "trans": "trans",
    "final": "final",
    "component": "component",
    "word": "word",
}

# Columns of the acceptance-rate table written by cmd_bench
BENCH_COLUMNS = ["case", "mode", "epsilon", "accept_rate", "mean_N", "mean_ms"]

# Stable CLI exit codes
EXIT_CODES = {
    "accept": 0,
    "success": 0,
    "reject": 1,
    "input_error": 2,
    "runtime_error": 3,
}
