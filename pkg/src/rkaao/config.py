"""Experiment configuration: ``key=value`` text with ``#`` comments."""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .exceptions import ConfigError
from .tableaux import MAX_STAGES, Family

__all__ = ["ExperimentConfig", "parse_config", "PROBLEMS", "DEFAULTS_HELP"]

PROBLEMS = ("heat-seq", "heat-aao", "stokes-seq", "stokes-aao", "lid-cavity-aao")


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    family: str = "gauss"
    s: int = 2
    degree: int | None = None
    l: int = 3
    tf: float | None = None
    tolerance: float = 1e-8
    restart: int = 10
    inner: str = "mg"
    threads: int = 1
    output: str | None = None
    precond: str = "prk"
    max_iters: int = 2000
    nt: int | None = None
    gamma: float = 1e-4

    def __post_init__(self):
        self.validate()

    @property
    def kind(self):
        return "heat" if self.problem.startswith("heat") else "stokes"

    @property
    def fe_degree(self):
        if self.degree is not None:
            return self.degree
        return 1 if self.kind == "heat" else 2

    @property
    def all_at_once(self):
        return self.problem.endswith("aao")

    @property
    def final_time(self):
        if self.tf is not None:
            return self.tf
        return 2.0 if self.problem != "lid-cavity-aao" else 4.0

    def validate(self, line_of=None):
        def fail(key, msg):
            raise ConfigError(msg, None if line_of is None else line_of.get(key))

        if self.problem not in PROBLEMS:
            fail("problem", f"problem must be one of {', '.join(PROBLEMS)}, got {self.problem!r}")
        try:
            fam = Family.parse(self.family)
        except ValueError as exc:
            fail("family", str(exc))
        lo = 2 if fam is Family.LOBATTO_IIIC else 1
        if not (lo <= self.s <= MAX_STAGES):
            fail("s", f"s must be in [{lo}, {MAX_STAGES}] for {fam.label}, got {self.s}")
        if self.degree not in (None, 1, 2):
            fail("degree", f"degree must be 1 or 2, got {self.degree}")
        if self.kind == "stokes" and self.degree not in (None, 2):
            fail("degree", "Stokes problems use Q2-Q1 elements (degree=2)")
        if not (1 <= self.l <= 9):
            fail("l", f"l must be in [1, 9], got {self.l}")
        if self.kind == "stokes" and self.l < 2:
            fail("l", "Stokes problems need l >= 2")
        if self.tf is not None and self.tf <= 0:
            fail("tf", "tf must be positive")
        if not (0.0 < self.tolerance < 1.0):
            fail("tolerance", "tolerance must lie in (0, 1)")
        if self.restart < 1:
            fail("restart", "restart must be >= 1")
        if self.inner not in ("mg", "amg", "exact"):
            fail("inner", f"inner must be 'mg', 'amg' or 'exact', got {self.inner!r}")
        if self.threads < 1:
            fail("threads", "threads must be >= 1")
        if self.precond not in ("prk", "pmns"):
            fail("precond", f"precond must be 'prk' or 'pmns', got {self.precond!r}")
        if self.precond == "pmns" and (self.kind != "heat" or self.all_at_once):
            fail("precond", "pmns is only available for heat-seq")
        if self.nt is not None and self.nt < 1:
            fail("nt", "nt must be >= 1")
        if self.gamma < 0:
            fail("gamma", "gamma must be nonnegative")

    def with_(self, **kw):
        return replace(self, **kw)


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_CASTS = {"int": int, "float": float, "str": str, "int | None": int, "float | None": float, "str | None": str}

DEFAULTS_HELP = (
    "config keys: problem (required; " + "|".join(PROBLEMS) + "), family=gauss, s=2, degree (1 for heat, 2 for Stokes), l=3, "
    "tf (2, or 4 for lid-cavity), tolerance=1e-8, restart=10, inner=mg|amg|exact, "
    "threads=1, output, precond=prk|pmns, max_iters=2000, nt (default from the accuracy rule), gamma=1e-4"
)


def parse_config(text):
    """Parse and validate configuration text.

    >>> parse_config("problem=heat-aao\\nfamily=gauss\\ns=2").tolerance
    1e-08
    """
    values, line_of = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {raw.strip()!r}", lineno)
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        cast = _CASTS[_TYPES[key]]
        try:
            values[key] = cast(val)
        except ValueError:
            raise ConfigError(f"{key} expects {cast.__name__}, got {val!r}", lineno) from None
        line_of[key] = lineno
    if "problem" not in values:
        raise ConfigError("missing required key 'problem'")
    try:
        return ExperimentConfig(**values)
    except ConfigError as exc:
        if exc.line is None:
            # re-run validation to attach the offending line
            cfg = object.__new__(ExperimentConfig)
            for f in fields(ExperimentConfig):
                object.__setattr__(cfg, f.name, values.get(f.name, f.default))
            cfg.validate(line_of)
        raise
