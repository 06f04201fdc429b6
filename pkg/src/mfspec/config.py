"""Run-wide knobs read from the environment."""

import os

DEFAULT_CYCLE_BUDGET = 10**6
DEFAULT_COVER_CAP = 5 * 10**7


def budget(default):
    """Enumeration cap, overridable through ``MFSPEC_BUDGET``."""
    raw = os.environ.get("MFSPEC_BUDGET")
    if raw is None or raw.strip() == "":
        return default
    return int(float(raw))
