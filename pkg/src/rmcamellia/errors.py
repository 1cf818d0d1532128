class BudgetError(RuntimeError):
    """An exhaustive enumeration would exceed its size budget."""


class ConfigError(ValueError):
    """Malformed experiment configuration or descriptor."""


class ContradictoryEvidenceError(ValueError):
    """Noiseless observations rule out every codeword."""
