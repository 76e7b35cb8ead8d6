"""
Experiment configuration files.

A config is flat `key = value` text, one key per line, `#` starting a comment.
Parsing only splits lines; validation and type conversion are done by
ExperimentConfigSerializer so every problem can be reported with its line.
"""
import hashlib
import logging
import math
import re
from dataclasses import dataclass

from nodalvar.errors import ConfigError

logger = logging.getLogger(__name__)

KERNEL_CURVE = "kernel-curve"
KACRICE_CURVE = "kacrice-curve"
VARIANCE = "variance"
MC_NODAL = "mc-nodal"
CHAOS2 = "chaos2"
SELFCHECK = "selfcheck"
COMMANDS = (KERNEL_CURVE, KACRICE_CURVE, VARIANCE, MC_NODAL, CHAOS2, SELFCHECK)

KEYS = (
    "command",
    "n_list",
    "g_rule",
    "psi_range",
    "samples",
    "mesh_level",
    "seed",
    "tol",
    "out_path",
    "format",
    "workers",
    "split_c",
    "k_method",
    "oracle",
    "oracle_samples",
    "points_per_wavelength",
    "raw_dump",
    "bootstrap",
    "timing",
)

_G_RULE = re.compile(r"^(const|power)\(\s*([^()]+?)\s*\)$|^(single)$")


@dataclass(frozen=True)
class GRule:
    """g(n) = value (const), n**value (power), or the single-frequency window."""

    kind: str
    value: float = 0.0

    @classmethod
    def parse(cls, text):
        match = _G_RULE.match(text.strip().replace(" ", ""))
        if match is None:
            raise ValueError("expected const(x), power(e) or single")
        if match.group(3):
            return cls("single")
        value = float(match.group(2))
        if not math.isfinite(value):
            raise ValueError("g_rule parameter must be finite")
        return cls(match.group(1), value)

    def g_for(self, n):
        if self.kind == "const":
            return self.value
        if self.kind == "power":
            return float(n) ** self.value
        return 0.0

    def __str__(self):
        if self.kind == "single":
            return "single"
        return f"{self.kind}({self.value:g})"


@dataclass(frozen=True)
class PsiRange:
    lower: float
    upper: float
    count: int

    def values(self):
        if self.count == 1:
            return [self.lower]
        step = (self.upper - self.lower) / (self.count - 1)
        return [self.lower + k * step for k in range(self.count)]


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    n_list: tuple = ()
    g_rule: GRule | None = None
    psi_range: PsiRange | None = None
    samples: int = 0
    mesh_level: int | None = None
    seed: int | None = None
    tol: float = 1e-6
    out_path: str | None = None
    format: str = "csv"
    workers: int | None = None
    split_c: float = 1.0
    k_method: str = "oracle"
    oracle: str = "quadrature"
    oracle_samples: int = 10_000_000
    points_per_wavelength: int = 8
    raw_dump: str | None = None
    bootstrap: int = 200
    timing: bool = False
    text: str = ""

    @property
    def digest(self):
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()

    def windows(self):
        """(n, g) pairs in config order."""
        return [(n, self.g_rule.g_for(n)) for n in self.n_list]


def parse_lines(text):
    """
    Split config text into {key: (raw value, line number)}.

    Raises ConfigError listing every malformed, unknown or duplicated line.
    """
    entries = {}
    problems = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lower()
        if not sep or not key:
            problems.append((number, "expected 'key = value'"))
            continue
        if key not in KEYS:
            problems.append((number, f"unknown key {key!r}"))
        elif key in entries:
            problems.append((number, f"duplicate key {key!r} (first set on line {entries[key][1]})"))
        else:
            entries[key] = (value.strip(), number)
    if problems:
        raise ConfigError(problems)
    return entries


def load_config(text, command):
    """Parse and validate config text for `command`; raises ConfigError."""
    from nodalvar.serializers import ExperimentConfigSerializer

    entries = parse_lines(text)
    data = {key: value for key, (value, _) in entries.items()}
    serializer = ExperimentConfigSerializer(data=data, context={"command": command})
    if not serializer.is_valid():
        problems = []
        for key, messages in serializer.errors.items():
            line = entries[key][1] if key in entries else None
            label = "" if key == "non_field_errors" else f"{key}: "
            problems.extend((line, f"{label}{message}") for message in messages)
        raise ConfigError(sorted(problems, key=lambda p: (p[0] is None, p[0] or 0)))
    values = {key: value for key, value in serializer.validated_data.items() if key != "command"}
    config = ExperimentConfig(command=command, text=text, **values)
    logger.debug("config for %s: %s", command, config)
    return config
