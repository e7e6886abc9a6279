"""Exception hierarchy shared by every tmkit module."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from tmkit.model import Trace


class TMError(Exception):
    """Base class for all tmkit errors."""


class ModelError(TMError):
    """A builder call would break a model invariant."""


class UnknownEvent(TMError):
    pass


class TooFewParts(TMError):
    pass


class NotDisjoint(TMError):
    pass


class Explosion(TMError):
    """Plan enumeration would exceed the configured cap."""


class ScenarioError(TMError):
    """Scenario references ids the chronology does not know."""


class ChoiceMissing(TMError):
    pass


class StepLimit(TMError):
    """Simulation hit ``max_steps``; ``trace`` holds the partial result."""

    def __init__(self, message: str, trace: Trace):
        super().__init__(message)
        self.trace = trace


class RegionOverlap(TMError):
    pass


class CausalConflict(TMError):
    pass


class UnknownLevel(TMError):
    pass


class MalformedJson(TMError):
    pass


class SchemaMismatch(TMError):
    pass
