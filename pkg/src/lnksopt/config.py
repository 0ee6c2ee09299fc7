"""Run configuration for the bump benchmark, serialized as ``key = value`` text."""

from __future__ import annotations

from dataclasses import dataclass, fields

METHODS = ("full-p4", "full-p2", "full-p4t", "full-p2t", "reduced-newton", "reduced-bfgs")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Benchmark run parameters.

    Text form: one ``key = value`` per line, ``#`` starts a comment, unknown
    keys are rejected. ``target_file`` (optional) names a cached wall trace.
    """

    method: str = "reduced-newton"
    p: int = 1
    nx: int = 32
    ny: int = 8
    n_design: int = 20
    h_init: float = 0.0625
    h_target: float = 0.03125
    target: str = "fitted"
    target_file: str = ""
    flow_tol: float = 1e-11
    linear_rtol: float = 1e-10
    krylov_rtol: float = 1e-6
    opt_rtol: float = 1e-6
    max_cycles: int = 0  # 0 selects the method default
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.p not in (1, 2, 3):
            raise ConfigError(f"p must be 1, 2 or 3, got {self.p}")
        if self.nx < 2 or self.ny < 1:
            raise ConfigError("grid needs nx >= 2 and ny >= 1")
        if self.n_design < 2 or self.n_design % 2:
            raise ConfigError(f"n_design must be even and >= 2, got {self.n_design}")
        if self.target not in ("fitted", "exact"):
            raise ConfigError(f"target must be 'fitted' or 'exact', got {self.target!r}")

    @property
    def state_size(self):
        return self.nx * self.ny * (self.p + 1) ** 2 * 4

    def to_text(self):
        lines = ["# lnks-bench run configuration"]
        for f in fields(self):
            lines.append(f"{f.name} = {getattr(self, f.name)!r}" if isinstance(getattr(self, f.name), float)
                         else f"{f.name} = {getattr(self, f.name)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, **overrides):
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for k, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {k}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ConfigError(f"line {k}: unknown key {key!r}")
            values[key] = val
        values.update({k: v for k, v in overrides.items() if v is not None})
        out = {}
        for key, val in values.items():
            t = types[key]
            try:
                out[key] = (int(val) if t in ("int", int) else float(val) if t in ("float", float) else str(val))
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
        return cls(**out)
