"""Exception hierarchy shared across the package."""


class HamlearnError(Exception):
    """Base class for all package-specific failures."""


class FrequencyDomainError(HamlearnError):
    """Flux/energy combination yields a non-positive mode frequency."""


class ResonanceError(HamlearnError):
    """A qubit-coupler detuning is (numerically) zero; perturbative quantities diverge."""


class DegenerateSelectionError(HamlearnError):
    """The 4th and 5th qubit-character weights tie; the qubit subspace is ill-defined."""


class RankDeficiencyError(HamlearnError):
    """Requested more greedy picks than the numerical rank of the signal matrix."""


class TrainingDivergedError(HamlearnError):
    """Training loss became non-finite."""


class AllRestartsFailedError(HamlearnError):
    """Every adaptation restart ended with a loss above its starting value."""


class SchemaVersionError(HamlearnError):
    """Persisted file carries an unsupported schema version."""


class MetadataMismatchError(HamlearnError):
    """Checkpoint metadata is inconsistent with the requested run configuration."""


class ConfigError(HamlearnError):
    """Run configuration is invalid or references missing inputs."""
