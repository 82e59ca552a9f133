"""Constants for treechain"""

from __future__ import annotations

from enum import Enum

try:
    from enum import StrEnum
except:

    class StrEnum(str, Enum):
        __str__ = str.__str__


class Outcome(StrEnum):
    """A classification outcome"""

    RECURRENT = "Recurrent"
    TRANSIENT = "Transient"
    POSITIVE_RECURRENT = "PositiveRecurrent"
    NOT_POSITIVE_RECURRENT = "NotPositiveRecurrent"
    INCONCLUSIVE = "Inconclusive"


class NumericMode(StrEnum):
    """Arithmetic used for kernel entries and results"""

    EXACT = "exact"
    FLOAT = "float"


class TailMode(StrEnum):
    """Value given to sub-fractions beyond the truncation frontier"""

    ZERO = "zero"
    ONE = "one"


class InvariantMethod(StrEnum):
    DET = "det"
    LEAF = "leaf"
    RW = "rw"


class KernelFamily(StrEnum):
    """Built-in kernel families"""

    EXPLICIT = "explicit"
    UNIFORM = "uniform"
    GEOMETRIC = "geometric"
    HEIGHT_DRIVEN = "height"
    LEAF_JUMP = "leafjump"
    RANDOM_WALK = "rw"
    BIRTH_DEATH = "bd"
    INTEGER_WALK = "zwalk"
    DEGREE_HOMOGENEOUS = "homogeneous"


class TreeFamily(StrEnum):
    """Built-in tree families"""

    FINITE = "finite"
    COMPLETE = "complete"
    LINE = "line"
    SPINE = "spine"
    RAYS = "rays"
    COMB = "comb"


class Origin(StrEnum):
    """Where a node of a Kesten sample comes from"""

    SPINE = "spine"
    GRAFT = "graft"


class ViolationKind(StrEnum):
    SUPPORT = "support"
    STOCHASTIC = "stochastic"
    NEGATIVE = "negative"
    CONSISTENCY = "consistency"


ROOT_LABEL = "∅"

DEFAULT_TOL = 1e-12
DEFAULT_EPS = 1e-9
DEFAULT_H_MAX = 64
DEFAULT_GROWTH_WINDOW = 8
DEFAULT_PR_DEPTH = 32
DEFAULT_DECAY_THRESHOLD = 0.99
DEFAULT_RATIO_MARGIN = 1e-6
DEFAULT_NODE_CAP = 1_000_000
DEFAULT_GRAFT_CAP = 1_000_000
DEFAULT_MAX_RESAMPLES = 100
DEFAULT_LEVEL_CAP = 1 << 16
DEFAULT_SERIES_DEGREE = 32
DEFAULT_PROBE_DEPTH = 10
DEFAULT_CF_MAX_DEPTH = 10_000

# Regions above this size leave exact determinants for float linear solves
EXACT_REGION_CAP = 80
FLOAT_REGION_CAP = 4096

MAX_ENUMERATION_LENGTH = 24
MAX_SPANNING_ENUMERATION = 10
SIMULATION_BLOCK = 1 << 16
