"""Thinging machine modeling: static models, events and chronologies."""

from tmkit.diagnostics import Diagnostic, Severity, SourceSpan
from tmkit.dsl import ParseResult, parse_model, print_model
from tmkit.engine import PlanSet, enumerate_plans, event_sequence_of, expand_recurrence
from tmkit.export import from_json, to_dot, to_json
from tmkit.model import (
    Action,
    Bundle,
    Chronology,
    Event,
    Recurrence,
    Scenario,
    StaticModel,
    Trace,
    compose_events,
    decompose_event,
    new_static_model,
)
from tmkit.sim import conforms, simulate, simulate_concurrent
from tmkit.validator import validate_bundle, validate_chronology, validate_events, validate_static

__version__ = "0.1.0"
