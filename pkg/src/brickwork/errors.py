class BrickworkError(Exception):
    pass


# geometry
class InsufficientPoints(BrickworkError, ValueError):
    pass


class DegenerateCloud(BrickworkError, ValueError):
    pass


# control
class ProgressOutOfRange(BrickworkError, ValueError):
    pass


class FeedbackStalled(BrickworkError):
    """Localization progress stopped changing while the base was commanded to move."""


# perception / world lookups
class UnknownBrick(BrickworkError, KeyError):
    pass


class NotVisible(BrickworkError):
    pass


# planner
class TiltedBrick(BrickworkError, ValueError):
    pass


class PatternExhausted(BrickworkError):
    pass


# world
class OutOfReach(BrickworkError):
    pass


class MaxDepthExceeded(BrickworkError):
    pass


class NoContact(BrickworkError):
    pass


class NotCarried(BrickworkError):
    pass


# mission
class SearchExhausted(BrickworkError):
    pass


class TrackLost(BrickworkError):
    pass


# configuration and input files
class ConfigError(BrickworkError):
    pass


class EmptyPattern(ConfigError):
    pass


class InvalidToken(ConfigError):
    def __init__(self, line: int, column: int, token: str):
        super().__init__(f"invalid token {token!r} at line {line}, column {column}")
        self.line = line
        self.column = column
        self.token = token


class UnknownKey(ConfigError):
    pass


class MalformedValue(ConfigError):
    pass


class UnsatisfiablePile(ConfigError):
    pass
