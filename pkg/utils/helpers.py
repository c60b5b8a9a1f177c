"""
Utility helper functions
"""
import dataclasses
import hashlib
import json
from enum import Enum


def canonical(value):
    """
    Convert a protocol value into a JSON-ready canonical form

    Sets are sorted, dataclasses become tagged dicts and enums their names,
    so that equal protocol states always serialize to the same text.

    Args:
        value: Any protocol value (dataclass, enum, set, mapping, scalar)

    Returns:
        A structure made only of lists, dicts, strings and numbers
    """
    if isinstance(value, Enum):
        return value.name
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        body = {f.name: canonical(getattr(value, f.name)) for f in dataclasses.fields(value)}
        body['__type__'] = type(value).__name__
        return body
    if isinstance(value, (set, frozenset)):
        items = [canonical(v) for v in value]
        if all(type(item) is int for item in items):
            return sorted(items)
        return sorted(items, key=lambda item: json.dumps(item, sort_keys=True))
    if isinstance(value, dict):
        return [[canonical(k), canonical(v)]
                for k, v in sorted(value.items(), key=lambda kv: json.dumps(canonical(kv[0]), sort_keys=True))]
    if isinstance(value, (list, tuple)):
        return [canonical(v) for v in value]
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    return repr(value)


def stable_digest(value, length=16):
    """
    Digest a protocol value independently of set ordering and process hash seeds

    Args:
        value: Any value accepted by canonical()
        length (int): Number of hex characters kept

    Returns:
        str: Hex digest prefix
    """
    text = json.dumps(canonical(value), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(text.encode('utf-8')).hexdigest()[:length]


def majority(size):
    """Smallest number of members forming a majority of a set of the given size"""
    return size // 2 + 1


def validate_processor_ids(ids):
    """
    Validate a list of processor identifiers

    Args:
        ids (list): Identifiers taken from a scenario

    Returns:
        tuple: (is_valid, error_message)
    """
    if not isinstance(ids, (list, tuple)) or not ids:
        return False, "processors must be a non-empty list"
    for pid in ids:
        if isinstance(pid, bool) or not isinstance(pid, int) or pid <= 0:
            return False, f"processor id {pid!r} must be a positive integer"
    if len(set(ids)) != len(ids):
        return False, "processor ids must be unique"
    return True, None


def validate_probability(name, value):
    """
    Validate a probability knob

    Returns:
        tuple: (is_valid, error_message)
    """
    try:
        value = float(value)
    except (ValueError, TypeError):
        return False, f"{name} must be a number"
    if not 0.0 <= value <= 1.0:
        return False, f"{name} must lie in [0, 1]"
    return True, None


def validate_positive_int(name, value):
    """
    Validate a strictly positive integer knob

    Returns:
        tuple: (is_valid, error_message)
    """
    if isinstance(value, bool) or not isinstance(value, int):
        return False, f"{name} must be an integer"
    if value <= 0:
        return False, f"{name} must be positive"
    return True, None


class ScenarioError(Exception):
    """Scenario file could not be parsed or validated"""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class ConfigurationError(Exception):
    """Unknown configuration profile or malformed setting"""
    pass


class FaultSpecError(Exception):
    """Fault injection block is inconsistent with the simulation"""
    pass


class UnknownEndpointError(Exception):
    """Send addressed to a processor the simulation does not know"""
    pass


class SimulationHalted(Exception):
    """Step budget exhausted"""
    pass


class LabelDomainError(Exception):
    """Sting domain too small for the configured queue bounds"""
    pass
