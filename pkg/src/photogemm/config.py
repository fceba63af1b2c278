"""Machine description and the flat ``key = value`` configuration format.

A config file holds one ``key = value`` per line; ``#`` starts a comment.
Top-level :class:`SystemConfig` fields use their own names, noise parameters
use ``noise.<field>`` and slicing parameters ``slice.<field>``::

    num_ppus = 100
    mantissa_bits = 10
    noise.mode = gaussian
    noise.sigma = 6.4008
    noise.sigma_by_width = 4:1.5, 5:6.4008
    slice.slice_width = 5
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union, get_args, get_origin, get_type_hints

from .bfp import ROUNDING_MODES, exponent_range
from .errors import InvalidConfig
from .photonic import NoiseModel, PpuConfig
from .slicing import PADDING_MODES, SliceConfig

#: Per-job fixed cost of starting a PPU, fitted to end-to-end throughput.
CALIBRATED_LAUNCH_OVERHEAD_S = 36.5954e-9
#: Digital post-processing cycles per flattened element pair, fitted likewise.
CALIBRATED_DIGITAL_CYCLES = 0.01042927

DATAFLOWS = ("auto", "stream", "blocked")
NOISE_PATHS = ("auto", "explicit", "aggregated")
BANDWIDTH_SCALINGS = ("linear", "none")


@dataclass(frozen=True)
class SliceSettings:
    slice_width: int = 5
    num_slices: int = 0  # 0: ceil(mantissa_bits / slice_width)
    padding: str = "low"


@dataclass(frozen=True)
class SystemConfig:
    # machine
    num_ppus: int = 100
    system_clock_hz: float = 1e9
    converter_rate_sps: float = 97e9
    dram_bw_bytes_s: float = 1.5e12
    global_sram_bw_bytes_s: float = 6.0e12
    local_sram_bw_bytes_s: float = 8.0e12
    ppu_launch_overhead_s: float = CALIBRATED_LAUNCH_OVERHEAD_S
    digital_cycles_per_element: float = CALIBRATED_DIGITAL_CYCLES
    dac_sram_bytes: int = 32768
    bytes_per_element_in: int = 4
    bytes_per_element_out: int = 4
    overlap_load_compute: bool = True
    bandwidth_scaling: str = "linear"
    memory_logic_power_fraction: float = 0.5
    area_power_table: str = ""  # empty: the shipped table
    # numerics
    mantissa_bits: int = 10
    exponent_bits: int = 6
    rounding: str = "nearest-even"
    tile_size: int = 2
    combined_exponent_max: Optional[int] = None  # None: twice the field maximum
    combined_exponent_min: Optional[int] = None
    dataflow: str = "auto"
    noise_path: str = "auto"
    error_report: bool = True
    slice: SliceSettings = field(default_factory=SliceSettings)
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        positive = (
            "system_clock_hz", "converter_rate_sps", "dram_bw_bytes_s",
            "global_sram_bw_bytes_s", "local_sram_bw_bytes_s",
        )
        for name in positive:
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise InvalidConfig(f"{name} must be a positive finite number, got {v}")
        for name in ("num_ppus", "tile_size", "bytes_per_element_in", "bytes_per_element_out", "dac_sram_bytes"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.ppu_launch_overhead_s < 0 or self.digital_cycles_per_element < 0:
            raise InvalidConfig("calibration constants must be >= 0")
        if not 0 <= self.memory_logic_power_fraction <= 1:
            raise InvalidConfig("memory_logic_power_fraction must be in [0, 1]")
        if self.rounding not in ROUNDING_MODES:
            raise InvalidConfig(f"rounding must be one of {ROUNDING_MODES}")
        if self.dataflow not in DATAFLOWS:
            raise InvalidConfig(f"dataflow must be one of {DATAFLOWS}")
        if self.noise_path not in NOISE_PATHS:
            raise InvalidConfig(f"noise_path must be one of {NOISE_PATHS}")
        if self.bandwidth_scaling not in BANDWIDTH_SCALINGS:
            raise InvalidConfig(f"bandwidth_scaling must be one of {BANDWIDTH_SCALINGS}")
        if self.slice.padding not in PADDING_MODES:
            raise InvalidConfig(f"slice.padding must be one of {PADDING_MODES}")
        exponent_range(self.exponent_bits)
        self.slice_config()  # validates widths

    def slice_config(self) -> SliceConfig:
        d = self.slice.slice_width
        s = self.slice.num_slices or -(-self.mantissa_bits // d)
        return SliceConfig(d, s, self.mantissa_bits, self.slice.padding)

    def ppu_config(self) -> PpuConfig:
        return PpuConfig(dac_sram_bytes=self.dac_sram_bytes)

    def combined_exponent_range(self) -> tuple[int, int]:
        lo, hi = exponent_range(self.exponent_bits)
        e_min = 2 * lo if self.combined_exponent_min is None else self.combined_exponent_min
        e_max = 2 * hi if self.combined_exponent_max is None else self.combined_exponent_max
        return e_min, e_max

    def replace(self, **changes) -> "SystemConfig":
        """Copy with top-level or dotted-key changes (``noise.sigma=0``)."""
        return apply_overrides(self, changes)

    def to_flat(self) -> dict[str, Any]:
        return to_flat(self)


# --- flat key/value codec ---------------------------------------------------

_SECTIONS = {"noise": NoiseModel, "slice": SliceSettings}


def _coerce(text: str, tp, key: str):
    origin = get_origin(tp)
    if origin is Union:
        args = [a for a in get_args(tp) if a is not type(None)]
        if text.strip().lower() in ("", "none", "null"):
            return None
        return _coerce(text, args[0], key)
    t = text.strip()
    try:
        if tp is bool:
            low = t.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(t)
        if tp is int:
            return int(t, 0)
        if tp is float:
            return float(t)
        if tp is str:
            return t
        if tp is dict or origin is dict:
            out = {}
            for item in filter(None, (x.strip() for x in t.split(","))):
                k, v = item.split(":")
                out[int(k)] = float(v)
            return out
    except ValueError as exc:
        raise InvalidConfig(f"cannot parse {key} = {text!r}") from exc
    raise InvalidConfig(f"unsupported type for {key}")


def _field_types(cls) -> dict[str, Any]:
    hints = get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)}


def apply_overrides(cfg: SystemConfig, values: dict[str, Any]) -> SystemConfig:
    top: dict[str, Any] = {}
    sections: dict[str, dict[str, Any]] = {name: {} for name in _SECTIONS}
    top_types = _field_types(SystemConfig)
    for key, raw in values.items():
        if "." in key:
            sec, name = key.split(".", 1)
            if sec not in _SECTIONS:
                raise InvalidConfig(f"unknown config section {sec!r} in {key!r}")
            types = _field_types(_SECTIONS[sec])
            if name not in types:
                raise InvalidConfig(f"unknown config key {key!r}")
            sections[sec][name] = _coerce(raw, types[name], key) if isinstance(raw, str) else raw
        else:
            if key not in top_types or key in _SECTIONS:
                raise InvalidConfig(f"unknown config key {key!r}")
            top[key] = _coerce(raw, top_types[key], key) if isinstance(raw, str) else raw
    for sec, changes in sections.items():
        if changes:
            top[sec] = dataclasses.replace(getattr(cfg, sec), **changes)
    try:
        return dataclasses.replace(cfg, **top)
    except TypeError as exc:
        raise InvalidConfig(str(exc)) from exc


def parse_config_text(text: str, base: Optional[SystemConfig] = None) -> SystemConfig:
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (x.strip() for x in line.split("=", 1))
        values[key] = value
    return apply_overrides(base or SystemConfig(), values)


def load_config(path: Optional[Union[str, Path]]) -> SystemConfig:
    if path is None:
        return SystemConfig()
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def _plain(v):
    if isinstance(v, dict):
        return {str(k): v[k] for k in sorted(v)}
    return v


def to_flat(cfg: SystemConfig) -> dict[str, Any]:
    """All fields as a flat ``{dotted_key: value}`` dict, sections last."""
    out: dict[str, Any] = {}
    for f in dataclasses.fields(cfg):
        if f.name in _SECTIONS:
            continue
        out[f.name] = getattr(cfg, f.name)
    for sec in _SECTIONS:
        for f in dataclasses.fields(getattr(cfg, sec)):
            out[f"{sec}.{f.name}"] = _plain(getattr(getattr(cfg, sec), f.name))
    return out


def dump_config(cfg: SystemConfig) -> str:
    lines = []
    for key, value in to_flat(cfg).items():
        if value is None:
            text = "none"
        elif isinstance(value, dict):
            text = ", ".join(f"{k}:{v!r}" for k, v in value.items())
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
