"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input data violates a structural or value constraint."""


class UnknownAgentError(LookupError):
    """An agent id was referenced that is not part of the population."""


class ConfigurationError(ValueError):
    """A scenario component is internally inconsistent or incomplete."""


class OracleDomainError(ValueError):
    """Scenario falls outside the domain of the exact-enumeration oracle."""
