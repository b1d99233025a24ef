"""Run configuration: INI-style text with a fixed set of sections and keys.

Every key has a default, so an empty file is a valid configuration.  Parsing
never raises on bad input; it collects messages naming ``[section].key``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .fields import Grid, LateralMode, PhysParams
from .stepper import Scheme


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# section -> key -> (converter, default)
SCHEMA: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "domain": {
        "nx": (int, 16), "ny": (int, 16), "nz": (int, 8),
        "Lx": (float, 1.0), "Ly": (float, 1.0), "h": (float, 1.0),
        "lateral_mode": (str, "physical"),
    },
    "physics": {
        "epsilon": (float, 0.1), "f0": (float, 1.0), "beta": (float, 0.5),
        "K_v": (float, 1e-2), "K_h": (float, 1e-2), "lambda": (float, 1e-4),
        "mu": (float, 1e-3), "alpha": (float, 0.1),
    },
    "forcing": {"Tstar": (str, "gyre"), "Q": (str, "zero")},
    "init": {"T0": (str, "zero"), "seed": (int, None)},
    "time": {
        "dt": (float, 1e-3), "t_end": (float, 0.1), "scheme": (str, "backward_euler_AB2"),
        "solver_tol": (float, 1e-10), "enforce_cfl": (_bool, True),
    },
    "output": {
        "directory": (str, "pghd_out"), "snapshot_every": (int, 0),
        "diag_every": (int, 1), "bl_width": (int, 2),
    },
}


@dataclass
class RunConfig:
    grid: Grid
    params: PhysParams
    Tstar: str = "gyre"
    Q: str = "zero"
    T0: str = "zero"
    seed: int | None = None
    dt: float = 1e-3
    t_end: float = 0.1
    scheme: Scheme = Scheme.BACKWARD_EULER_AB2
    solver_tol: float = 1e-10
    enforce_cfl: bool = True
    directory: str = "pghd_out"
    snapshot_every: int = 0
    diag_every: int = 1
    bl_width: int = 2
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))

    def signature(self) -> tuple:
        """Everything except the initial condition, for pairing runs."""
        return (self.grid, self.params, self.Tstar, self.Q, self.dt, self.t_end, self.scheme)

    def with_physics(self, **kw) -> "RunConfig":
        from dataclasses import replace

        return replace(self, params=self.params.replace(**kw))


def _read_sections(text: str, errors: list[str]) -> dict[str, dict[str, str]]:
    cp = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#",), comment_prefixes=("#",),
        strict=True, default_section="\x00none",
    )
    cp.optionxform = str  # keys are case sensitive (K_v, Lx)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        errors.append(f"syntax: {exc.message if hasattr(exc, 'message') else exc}".splitlines()[0])
        return {}
    return {s: dict(cp.items(s)) for s in cp.sections()}


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raise :class:`ConfigError` listing every problem."""
    errors: list[str] = []
    raw = _read_sections(text, errors)
    if errors:
        raise ConfigError(errors)
    values: dict[str, dict[str, Any]] = {}
    for sec, keys in SCHEMA.items():
        values[sec] = {k: d for k, (_, d) in keys.items()}
    for sec, items in raw.items():
        if sec not in SCHEMA:
            errors.append(f"[{sec}]: unknown section")
            continue
        for key, val in items.items():
            if key not in SCHEMA[sec]:
                errors.append(f"[{sec}].{key}: unknown key")
                continue
            conv = SCHEMA[sec][key][0]
            try:
                values[sec][key] = conv(val.strip())
            except ValueError:
                errors.append(f"[{sec}].{key}: cannot parse {val.strip()!r} as {conv.__name__.lstrip('_')}")
    if errors:
        raise ConfigError(errors)

    d, ph, fo, ini, tm, out = (values[s] for s in ("domain", "physics", "forcing", "init", "time", "output"))
    for k in ("nx", "ny", "nz"):
        if d[k] < 4:
            errors.append(f"[domain].{k}: must be >= 4 (got {d[k]})")
    for k in ("Lx", "Ly", "h"):
        if not d[k] > 0:
            errors.append(f"[domain].{k}: must be > 0 (got {d[k]})")
    try:
        mode = LateralMode(d["lateral_mode"])
    except ValueError:
        errors.append(f"[domain].lateral_mode: expected 'physical' or 'periodic_test' (got {d['lateral_mode']!r})")
        mode = LateralMode.PHYSICAL
    for k in ("epsilon", "K_v", "K_h", "mu"):
        if not ph[k] > 0:
            errors.append(f"[physics].{k}: must be > 0 (got {ph[k]})")
    if not ph["lambda"] >= 0:
        errors.append(f"[physics].lambda: must be >= 0 (got {ph['lambda']})")
    if not ph["alpha"] >= 0:
        errors.append(f"[physics].alpha: must be >= 0 (got {ph['alpha']})")
    if mode is LateralMode.PERIODIC_TEST:
        if ph["alpha"] != 0:
            errors.append("[physics].alpha: periodic_test mode requires alpha = 0")
        if ph["beta"] != 0:
            errors.append("[physics].beta: periodic_test mode requires beta = 0")
    if not tm["dt"] > 0:
        errors.append(f"[time].dt: must be > 0 (got {tm['dt']})")
    if not tm["t_end"] > 0:
        errors.append(f"[time].t_end: must be > 0 (got {tm['t_end']})")
    if not tm["solver_tol"] > 0:
        errors.append(f"[time].solver_tol: must be > 0 (got {tm['solver_tol']})")
    try:
        scheme = Scheme(tm["scheme"])
    except ValueError:
        errors.append(f"[time].scheme: expected one of {[s.value for s in Scheme]} (got {tm['scheme']!r})")
        scheme = Scheme.BACKWARD_EULER_AB2
    for k in ("snapshot_every", "diag_every"):
        if out[k] < 0:
            errors.append(f"[output].{k}: must be >= 0 (got {out[k]})")
    if out["bl_width"] < 1:
        errors.append(f"[output].bl_width: must be >= 1 (got {out['bl_width']})")

    from .profiles import ProfileError, check_profile

    for sec, key, kind in (("forcing", "Tstar", "surface"), ("forcing", "Q", "volume"), ("init", "T0", "volume")):
        try:
            check_profile(values[sec][key], kind)
        except ProfileError as exc:
            errors.append(f"[{sec}].{key}: {exc}")
    if ini["T0"].strip() == "random" and ini["seed"] is None:
        errors.append("[init].seed: required when T0 = random")
    if errors:
        raise ConfigError(errors)

    grid = Grid(d["nx"], d["ny"], d["nz"], d["Lx"], d["Ly"], d["h"], mode)
    params = PhysParams(ph["epsilon"], ph["f0"], ph["beta"], ph["K_v"], ph["K_h"],
                        ph["lambda"], ph["mu"], ph["alpha"], d["h"])
    return RunConfig(
        grid, params, fo["Tstar"].strip(), fo["Q"].strip(), ini["T0"].strip(), ini["seed"],
        tm["dt"], tm["t_end"], scheme, tm["solver_tol"], tm["enforce_cfl"],
        out["directory"], out["snapshot_every"], out["diag_every"], out["bl_width"], raw,
    )


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    cfg = parse_config(text)
    cfg.raw["__base__"] = str(Path(path).resolve().parent)
    return cfg


def default_config_text() -> str:
    lines = []
    for sec, keys in SCHEMA.items():
        lines.append(f"[{sec}]")
        for k, (_, d) in keys.items():
            if d is not None:
                lines.append(f"{k} = {d}")
        lines.append("")
    return "\n".join(lines)
