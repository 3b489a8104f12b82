"""Run configuration: defaults, flat key=value config files, flag overrides."""

from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass
class RunConfig:
    integration_rtol: float = 1e-10
    integration_atol: float = 1e-12
    certificate_tol: float = 1e-8     # bracket width for located quantities
    locate_tol: float = 1e-11
    invert_tol: float = 1e-10
    slack: float = 1.10
    bracket_lo: float | None = None
    bracket_hi: float | None = None
    out_dir: str = "out"
    emit: str = "json"
    stage: str | None = None

    def __post_init__(self):
        for name in ("integration_rtol", "integration_atol",
                     "certificate_tol", "locate_tol", "invert_tol"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.slack < 1.0:
            raise ValueError("slack factor must be at least 1")

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


_FLOAT_KEYS = {"integration_rtol", "integration_atol", "certificate_tol",
               "locate_tol", "invert_tol", "slack", "bracket_lo", "bracket_hi"}


def load_config(path=None, **overrides) -> RunConfig:
    """Build a RunConfig from an optional flat key=value file plus overrides.

    Lines are ``key = value``; blank lines and '#' comments are ignored.
    Overrides with value None are skipped, so CLI flags only take effect
    when actually given.
    """
    values = {}
    if path is not None:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key = value")
                key, _, val = line.partition("=")
                key = key.strip()
                val = val.strip()
                values[key] = float(val) if key in _FLOAT_KEYS else val
    for key, val in overrides.items():
        if val is not None:
            values[key] = val
    known = {f.name for f in fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**values)
