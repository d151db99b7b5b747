"""
Exception hierarchy and CLI exit codes for FlashSim
"""
from typing import Optional


EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG_ERROR = 2
EXIT_OPTIMIZER_FAILURE = 3
EXIT_MISSING_DEPENDENCY = 4


class FlashSimError(Exception):
    """Base class for all FlashSim errors"""
    exit_code = EXIT_UNEXPECTED


class ConfigError(FlashSimError):
    """Invalid configuration file, flag or value"""
    exit_code = EXIT_CONFIG_ERROR

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingArtifact(FlashSimError):
    """A file the requested operation depends on does not exist"""
    exit_code = EXIT_MISSING_DEPENDENCY


class OptimizerError(FlashSimError):
    """An optimizer or solver could not produce a result"""
    exit_code = EXIT_OPTIMIZER_FAILURE


class NoRootInInterval(OptimizerError):
    """Adjacent state densities do not intersect between their means"""


class ConstructionFailed(OptimizerError):
    """PEG could not place an edge without closing a 4-cycle"""


class DegenerateBracket(OptimizerError):
    """Grid minimum sits on an interval end, no interior bracket to refine"""


class ThetaOutOfRange(OptimizerError):
    """H(v) = theta has no root on a flank of a hard threshold"""


class OverlapError(OptimizerError):
    """Read windows of adjacent hard thresholds cross each other"""


class RankDeficient(OptimizerError):
    """Regression is underdetermined or its regressors are collinear"""
