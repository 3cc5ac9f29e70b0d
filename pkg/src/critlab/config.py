"""Experiment configuration: TOML parsing, validation, and serialization.

Configs are strict: every key must be known, every experiment kind declares
which sections it accepts, and a parsed config serializes back to TOML that
parses to an equal config.  That round trip plus a content hash is what
makes runs reproducible and diffable.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .errors import ValidationError

EXPERIMENT_KINDS = (
    "auxiliary",
    "eigen",
    "bubble_sweep",
    "perturbed_bubble_sweep",
    "delta_sweep",
    "minimize",
    "multiplier_scan",
    "inequality_probe",
    "regime_table",
)

# sections each experiment kind is allowed to carry
_SECTIONS_BY_KIND = {
    "auxiliary": ("grid", "weight", "boundary"),
    "eigen": ("grid", "weight"),
    "bubble_sweep": ("grid", "sweep"),
    "perturbed_bubble_sweep": ("grid", "weight", "sweep"),
    "delta_sweep": ("grid", "sweep"),
    "minimize": ("grid", "weight", "boundary", "minimize"),
    "multiplier_scan": ("grid", "weight", "minimize", "scan"),
    "inequality_probe": ("probe",),
    "regime_table": ("regime",),
}

_TOP_LEVEL_KEYS = {"experiment", "seed", "out_dir", "lam"}


def _check_keys(section: str, data: dict, allowed) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ValidationError(
            f"unknown key(s) in [{section}]: {', '.join(unknown)}"
        )


def _section_from_dict(cls, name: str, data: dict):
    _check_keys(name, data, [f.name for f in fields(cls)])
    return cls(**data)


@dataclass(frozen=True)
class GridSection:
    kind: str = "radial"  # radial | tensor
    n: int = 3
    radius: float = 1.0
    nodes: int = 1025
    layout: str = "uniform"  # uniform | geometric | power
    rmin_frac: float = 1e-5
    strength: float = 2.0
    half_width: float = 1.0
    nodes_per_axis: int = 33

    def __post_init__(self):
        if self.kind not in ("radial", "tensor"):
            raise ValidationError(f"grid.kind={self.kind!r} is not supported")
        if self.layout not in ("uniform", "geometric", "power"):
            raise ValidationError(f"grid.layout={self.layout!r} is not supported")


@dataclass(frozen=True)
class WeightSection:
    kind: str = "constant"  # constant | power_bump
    p0: float = 1.0
    gamma: float = 0.0
    alpha: float = 1.0
    r_bump: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "power_bump"):
            raise ValidationError(f"weight.kind={self.kind!r} is not supported")


@dataclass(frozen=True)
class BoundarySection:
    kind: str = "constant"  # constant | named_trace
    value: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("constant", "named_trace"):
            raise ValidationError(f"boundary.kind={self.kind!r} is not supported")


@dataclass(frozen=True)
class SweepSection:
    eps_lo: float = 1e-3
    eps_hi: float = 1e-1
    count: int = 9
    model: str = "power"  # power | log_power
    target_norm: float = 0.8  # delta_sweep only

    def __post_init__(self):
        if not 0.0 < self.eps_lo < self.eps_hi:
            raise ValidationError("sweep needs 0 < eps_lo < eps_hi")
        if self.count < 2:
            raise ValidationError("sweep.count must be at least 2")
        if self.model not in ("power", "log_power"):
            raise ValidationError(f"sweep.model={self.model!r} is not supported")


@dataclass(frozen=True)
class MinimizeSection:
    lam: float = 0.0
    mode: str = "auto"
    max_iter: int = 2000
    grad_tol: float = 1e-7
    step0: float = 1.0
    seed_kind: str = "bubble"
    seed_eps: float = 0.05
    seed_scale: float = 1.0
    mass_fraction: float = 0.9
    amp_factor: float = 10.0
    conc_radius: float = 0.0  # 0 means the library default (10 mean spacings)


@dataclass(frozen=True)
class ProbeSection:
    q: float = 2.5
    samples: int = 100000


@dataclass(frozen=True)
class ScanSection:
    targets: tuple = (0.5, 1.0, 1.5)

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(float(t) for t in self.targets))
        if any(t <= 0 for t in self.targets):
            raise ValidationError("scan.targets must be positive")


@dataclass(frozen=True)
class RegimeSection:
    # rows of [n, alpha, lam_frac]; lam_frac scales the first eigenvalue,
    # so admissibility (lam < lambda_1) holds by construction when < 1
    entries: tuple = ()
    nodes: int = 1025
    gamma: float = 4.0
    r_bump: float = 0.5
    boundary_value: float = 0.25
    max_iter: int = 3000
    grad_tol: float = 1e-6

    def __post_init__(self):
        rows = []
        for row in self.entries:
            if len(row) != 3:
                raise ValidationError(
                    "regime.entries rows must be [n, alpha, lam_frac]"
                )
            n, alpha, frac = row
            rows.append((int(n), float(alpha), float(frac)))
            if int(n) < 3:
                raise ValidationError("regime entries need n >= 3")
            if abs(float(frac)) >= 1.0:
                raise ValidationError(
                    "regime lam_frac must satisfy |frac| < 1 so lam < lambda_1"
                )
        object.__setattr__(self, "entries", tuple(rows))


_SECTION_TYPES = {
    "grid": GridSection,
    "weight": WeightSection,
    "boundary": BoundarySection,
    "sweep": SweepSection,
    "minimize": MinimizeSection,
    "probe": ProbeSection,
    "scan": ScanSection,
    "regime": RegimeSection,
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int = 0
    out_dir: str = ""
    lam: float = 0.0  # perturbed_bubble_sweep only
    grid: GridSection = field(default_factory=GridSection)
    weight: WeightSection = field(default_factory=WeightSection)
    boundary: BoundarySection = field(default_factory=BoundarySection)
    sweep: SweepSection = field(default_factory=SweepSection)
    minimize: MinimizeSection = field(default_factory=MinimizeSection)
    probe: ProbeSection = field(default_factory=ProbeSection)
    scan: ScanSection = field(default_factory=ScanSection)
    regime: RegimeSection = field(default_factory=RegimeSection)

    def __post_init__(self):
        if self.experiment not in EXPERIMENT_KINDS:
            raise ValidationError(
                f"experiment={self.experiment!r}; expected one of "
                + ", ".join(EXPERIMENT_KINDS)
            )

    def sections(self) -> tuple:
        return _SECTIONS_BY_KIND[self.experiment]

    def to_dict(self) -> dict:
        """Plain-dict form holding only the sections this kind uses."""
        out = {"experiment": self.experiment, "seed": self.seed}
        if self.out_dir:
            out["out_dir"] = self.out_dir
        if self.experiment == "perturbed_bubble_sweep":
            out["lam"] = self.lam
        for name in self.sections():
            sec = asdict(getattr(self, name))
            if name == "regime":
                sec["entries"] = [list(row) for row in sec["entries"]]
            if name == "scan":
                sec["targets"] = list(sec["targets"])
            out[name] = sec
        return out

    def content_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ValidationError(f"config is not valid TOML: {exc}") from exc
    if "experiment" not in raw:
        raise ValidationError("config is missing the 'experiment' key")
    kind = raw["experiment"]
    if kind not in EXPERIMENT_KINDS:
        raise ValidationError(
            f"experiment={kind!r}; expected one of " + ", ".join(EXPERIMENT_KINDS)
        )
    allowed = set(_SECTIONS_BY_KIND[kind])
    top = {k: v for k, v in raw.items() if not isinstance(v, dict)}
    secs = {k: v for k, v in raw.items() if isinstance(v, dict)}
    _check_keys("<top level>", top,
                _TOP_LEVEL_KEYS if kind == "perturbed_bubble_sweep"
                else _TOP_LEVEL_KEYS - {"lam"})
    _check_keys("<top level>", secs, allowed)

    kwargs = {
        "experiment": kind,
        "seed": int(top.get("seed", 0)),
        "out_dir": str(top.get("out_dir", "")),
        "lam": float(top.get("lam", 0.0)),
    }
    for name, data in secs.items():
        kwargs[name] = _section_from_dict(_SECTION_TYPES[name], name, data)
    return ExperimentConfig(**kwargs)


def load_config(path: str) -> ExperimentConfig:
    with open(path, "rb") as fh:
        return parse_config(fh.read().decode("utf-8"))


# ---------------------------------------------------------------------------
# TOML emission (the mirror of parse_config; stdlib has no writer)


def _fmt_toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        s = repr(v)
        if s in ("inf", "-inf", "nan"):
            return s
        if "e" not in s and "E" not in s and "." not in s:
            s += ".0"
        return s
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt_toml_value(x) for x in v) + "]"
    raise ValidationError(f"cannot serialize {type(v).__name__} to TOML")


def dump_config(cfg: ExperimentConfig) -> str:
    data = cfg.to_dict()
    lines = []
    for key, val in data.items():
        if not isinstance(val, dict):
            lines.append(f"{key} = {_fmt_toml_value(val)}")
    for key, val in data.items():
        if isinstance(val, dict):
            lines.append("")
            lines.append(f"[{key}]")
            for k, v in val.items():
                lines.append(f"{k} = {_fmt_toml_value(v)}")
    return "\n".join(lines) + "\n"
