"""
Validation utilities for the FairRec marketing-bias lab
Each validator returns (is_valid, message) so callers can collect problems
"""

import math
from datetime import datetime, timezone

from dateutil import parser as date_parser


def parse_timestamp(value):
    """Parse epoch seconds or a textual date into integer epoch seconds (UTC)"""
    text = str(value).strip()
    if not text:
        raise ValueError("Timestamp is required")
    try:
        return int(float(text))
    except ValueError:
        pass

    parsed = date_parser.parse(text)
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return int(parsed.timestamp())


def validate_kappa(kappa):
    """Validate a (user, product, market) switch triple"""
    try:
        values = tuple(int(k) for k in kappa)
    except (ValueError, TypeError):
        return False, "Kappa must be three integers"

    if len(values) != 3:
        return False, "Kappa must have exactly three entries"

    if any(k not in (0, 1) for k in values):
        return False, "Kappa entries must be 0 or 1"

    return True, "Valid kappa"


def validate_positive_int(value, field_name="Value"):
    """Validate a strictly positive integer"""
    try:
        number = int(value)
    except (ValueError, TypeError):
        return False, f"{field_name} must be an integer"

    if number != float(value) or number < 1:
        return False, f"{field_name} must be a positive integer"

    return True, f"Valid {field_name.lower()}"


def validate_nonnegative(value, field_name="Value"):
    """Validate a nonnegative finite real"""
    try:
        number = float(value)
    except (ValueError, TypeError):
        return False, f"{field_name} must be a number"

    if not math.isfinite(number) or number < 0:
        return False, f"{field_name} must be a nonnegative finite number"

    return True, f"Valid {field_name.lower()}"


def validate_positive(value, field_name="Value"):
    """Validate a strictly positive finite real"""
    is_valid, message = validate_nonnegative(value, field_name)
    if not is_valid:
        return is_valid, message
    if float(value) == 0:
        return False, f"{field_name} must be positive"
    return True, f"Valid {field_name.lower()}"


def validate_choice(value, choices, field_name="Value"):
    """Validate membership in a fixed set of options"""
    if value not in choices:
        return False, f"{field_name} must be one of: {', '.join(choices)}"
    return True, f"Valid {field_name.lower()}"


def validate_year_edges(edges):
    """Validate strictly increasing year bucket edges"""
    try:
        years = [int(e) for e in edges]
    except (ValueError, TypeError):
        return False, "Year edges must be integers"

    if len(years) < 1:
        return False, "At least one year edge is required"

    if any(b <= a for a, b in zip(years, years[1:])):
        return False, "Year edges must be strictly increasing"

    if years[0] < 1970 or years[-1] > datetime.now(timezone.utc).year + 100:
        return False, "Year edges out of range"

    return True, "Valid year edges"
