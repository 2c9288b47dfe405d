"""Exception types raised across the package."""


class StratschedError(Exception):
    """Base class for all package errors."""


# configuration
class ConfigError(StratschedError):
    pass


class MissingKey(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class DuplicateKey(ConfigError):
    pass


class BadEnum(ConfigError):
    pass


class BadValue(ConfigError):
    pass


class EmptyValueList(ConfigError):
    pass


class NoStrategies(ConfigError):
    pass


class UnknownParameter(ConfigError):
    pass


class IllegalValue(ConfigError):
    pass


# strategies
class NoMutableParameter(StratschedError):
    pass


# solver execution
class SolverError(StratschedError):
    pass


class SpawnFailure(SolverError):
    pass


# features
class FeatureError(StratschedError):
    pass


class ExtractorFailure(FeatureError):
    pass


class DimensionMismatch(FeatureError, ValueError):
    pass


class EmptyTrainingSet(FeatureError, ValueError):
    pass


# learning
class LearnerError(StratschedError):
    pass


class NumericalFailure(LearnerError):
    pass


class EmptyModel(LearnerError):
    pass


class TooFewSamples(LearnerError, ValueError):
    pass


# scheduling
class NoCandidate(StratschedError):
    """Every strategy has already been run at least as long as its prediction."""


# persistence
class StoreError(StratschedError):
    pass


class DuplicateRecord(StoreError):
    pass


class IoFailure(StoreError):
    pass


class FingerprintMismatch(UserWarning):
    """Settings changed since the model store was written."""
