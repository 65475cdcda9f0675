"""Unit constants for boundary conversion.

Everything inside the package is SI (m, s, K, W, N, Pa). Multiply a value
expressed in a named unit by the constant to get SI, divide to go back::

    >>> 8 * mm
    0.008
    >>> 0.5 * W_per_mm
    500.0
"""

mm = 1e-3
um = 1e-6
ms = 1e-3
us = 1e-6

W_per_mm = 1e3
mm_K_per_W = 1e-3
J_per_mm_K = 1e3
uJ_per_mm_K = 1e-6 * J_per_mm_K
mm_per_N = 1e-3
uL = 1e-9

ZERO_CELSIUS = 273.15


def celsius_to_kelvin(t_c):
    return t_c + ZERO_CELSIUS


def kelvin_to_celsius(t_k):
    return t_k - ZERO_CELSIUS


def parse_duration(text) -> float:
    """Parse ``"75ms"``, ``"0.5 s"``, ``"500us"`` or a bare number (seconds)."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip().lower().replace(" ", "")
    for suffix, scale in (("ms", ms), ("us", us), ("s", 1.0)):
        if s.endswith(suffix):
            return float(s[: -len(suffix)]) * scale
    return float(s)
