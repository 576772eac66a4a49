"""
constants.py

Shared constants used across the carnot-bounds package.
"""

VERSION_STRING = "carnot-bounds/1"

# Builtin algebra names
ABELIAN = "abelian"
HEISENBERG = "heisenberg"
QUATERNIONIC_HEISENBERG = "quaternionic_heisenberg"
ENGEL = "engel"
FREE_RANK2_STEP3 = "free_rank2_step3"

ALL_BUILTINS = [
    ABELIAN,
    HEISENBERG,
    QUATERNIONIC_HEISENBERG,
    ENGEL,
    FREE_RANK2_STEP3
]

# Builtins taking the size parameter m
PARAMETRIZED_BUILTINS = [ABELIAN, HEISENBERG, QUATERNIONIC_HEISENBERG]

# Pseudo-path prefix understood by load_spec and the CLI
BUILTIN_PREFIX = "builtin:"

# Exterior algebra is built densely; C(12, 6) = 924 is the largest block
MAX_DIMENSION = 12

# Hoelder bound rules
RULE_TRIVIAL_DIM = "trivial_dim"
RULE_ISOPERIMETRIC = "isoperimetric"
RULE_WEIGHT = "weight"
RULE_RICHNESS = "richness"

ALL_RULES = [
    RULE_TRIVIAL_DIM,
    RULE_ISOPERIMETRIC,
    RULE_WEIGHT,
    RULE_RICHNESS
]

# Random search over horizontal planes: integer coordinates in [-5, 5]
SAMPLE_RANGE = 5
MAX_REDRAWS = 8
DEFAULT_TRIALS = 100

# Retraction iteration cap for the Rumin projector
MAX_RETRACTION_ITERATIONS = 16

# Metric lab
MC_CHUNK_SIZE = 250_000
DEFAULT_SAMPLES = 1_000_000
DEFAULT_SEED = 0
DEFAULT_EPS = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
DEFAULT_TAU = 1.0
DEFAULT_SEGMENTS = 32
DEFAULT_RESTARTS = 4
MIN_SEGMENTS = 8
PENALTY_START = 1.0
PENALTY_GROWTH = 10.0
PENALTY_ROUNDS = 6
CONSTRAINT_TOLERANCE = 1e-6

# CLI exit codes
EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_UNSUPPORTED = 3

# Output modes
OUTPUT_TABLE = "table"
OUTPUT_JSON = "json"
OUTPUT_CSV = "csv"
