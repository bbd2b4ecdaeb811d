"""Exception hierarchy shared by the influence services."""


class InfluenceError(Exception):
    """Base class for every error raised by this package."""


class InstanceError(InfluenceError, ValueError):
    """An instance, game, or allocation input is malformed."""


class LengthMismatch(InfluenceError, ValueError):
    """Two vectors that must share a length do not."""


class SupportTooLarge(InfluenceError):
    """Scenario enumeration would exceed the configured limit."""

    def __init__(self, size: int, limit: int):
        super().__init__(f"scenario support {size} exceeds enumeration limit {limit}")
        self.size = size
        self.limit = limit


class SearchSpaceTooLarge(InfluenceError):
    """Exhaustive search over allocations would exceed the configured limit."""

    def __init__(self, size: int, limit: int):
        super().__init__(f"search space {size} exceeds limit {limit}")
        self.size = size
        self.limit = limit


class OracleAccessError(InfluenceError, AssertionError):
    """An online algorithm queried the oracle outside the revealed agents."""
