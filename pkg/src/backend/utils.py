import json
import math
from fractions import Fraction
from typing import Any

from src.typings import ModeIndex, ModeLabel, SpinComponent

EIGEN_ZERO_THRESHOLD = 1e-10
DEGENERACY_THRESHOLD = 1e-9
AMPLITUDE_FLOOR = 1e-15
APPROXIMATE_COEFFICIENT_FLOOR = 1e-14
SERIES_TOLERANCE = 1e-14
SERIES_MAX_TERMS = 500
NORM_DEFICIT_WARNING = 1e-6
NORMALIZATION_TOLERANCE = 1e-10
SCHMIDT_THRESHOLD = 1e-8
PROJECTION_RESIDUAL_THRESHOLD = 1e-9

DEFAULT_R = 0.1
DEFAULT_CUTOFF = 10
DEFAULT_R_GRID = (0.05, 0.1, 0.2)

# Pivot order of the labeled spin coordinates within one pair
SPIN_COMPONENT_ORDER: tuple[SpinComponent, ...] = ("zero", "z", "x", "y")
SPIN_COMPONENT_SYMBOLS: dict[SpinComponent, str] = {"zero": "J0", "z": "Jz", "x": "Jx", "y": "Jy"}


def to_index(label: ModeLabel) -> ModeIndex:
    return label - 1


def to_label(index: ModeIndex) -> ModeLabel:
    return index + 1


def pair_label(mode_a: ModeIndex, mode_b: ModeIndex) -> str:
    return f"{to_label(mode_a)}{to_label(mode_b)}" if max(mode_a, mode_b) < 9 else f"{to_label(mode_a)},{to_label(mode_b)}"


def spin_label(component: SpinComponent, mode_a: ModeIndex, mode_b: ModeIndex) -> str:
    return f"{SPIN_COMPONENT_SYMBOLS[component]}({to_label(mode_a)},{to_label(mode_b)})"


def parse_half_integer(value: Any) -> float:
    """Accepts 0.5, "1/2", "0.5", Fraction(1, 2) ... and returns the value as a float."""
    try:
        twice = Fraction(str(value)) * 2
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"Spin magnitude must be a half-integer, but got {value!r}")
    if twice.denominator != 1 or twice < 0:
        raise ValueError(f"Spin magnitude must be a non-negative half-integer, but got {value!r}")
    return twice.numerator / 2


def rational_string(value: Any) -> str:
    """Formats a sympy/gmpy rational as "p/q" (q >= 1)."""
    fraction = Fraction(int(value.numerator), int(value.denominator))
    return f"{fraction.numerator}/{fraction.denominator}"


def parse_rational_string(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"Expected a rational string 'p/q', but got {text!r}")


def float_text(value: float) -> str:
    """17 significant digits, always with a decimal point."""
    if not math.isfinite(value):
        raise ValueError(f"Cannot write non-finite float {value!r} as JSON")
    return format(value, "#.17g")


def _encode(value: Any, level: int) -> str:
    if isinstance(value, float):
        return float_text(value)
    if isinstance(value, dict):
        if not value:
            return "{}"
        inner = "\n" + "  " * (level + 1)
        items = [
            f"{json.dumps(key if isinstance(key, str) else json.dumps(key), ensure_ascii=False)}: {_encode(item, level + 1)}"
            for key, item in sorted(value.items())
        ]
        return "{" + inner + ("," + inner).join(items) + "\n" + "  " * level + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        inner = "\n" + "  " * (level + 1)
        return "[" + inner + ("," + inner).join(_encode(item, level + 1) for item in value) + "\n" + "  " * level + "]"
    return json.dumps(value, ensure_ascii=False)


def dump_json(document: Any) -> str:
    """Byte-stable JSON: sorted keys, two-space indentation, floats with 17 significant digits."""
    return _encode(document, 0) + "\n"


def complex_record(value: complex) -> dict[str, float]:
    return {"re": float(value.real), "im": float(value.imag)}
