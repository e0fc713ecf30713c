"""Exception types shared across the toolkit."""


class ConfigError(ValueError):
    """Invalid configuration value or inconsistent model/feature setup."""


class DataError(ValueError):
    """Malformed or misaligned input data (corpus files, lexicons, embeddings)."""


class FormatError(ValueError):
    """Corrupt or truncated binary parameter file."""


class TrainingDiverged(RuntimeError):
    """Loss or gradients became non-finite during training."""
