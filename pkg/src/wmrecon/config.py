"""Run configuration: layout, allocator tuning, mode flags and output paths.

Configuration files are JSON objects whose keys mirror the command-line
flags; flags override the file.  Example::

    {
      "layout": {"heap_base": "0x00600000", "bypass_threshold": "16KiB",
                 "code": [["0x00401000", "0x000ff000", "image"],
                          ["0x10000000", "0x00100000", "jit"]]},
      "aware_custom_alloc": true,
      "timeout_events": 1000000
    }
"""

import json
import re
from dataclasses import dataclass, field, replace
from typing import Optional

from wmrecon.memory_model import AddressSpaceConfig, ConfigurationError, build_regions

DEFAULT_TIMEOUT_EVENTS = 5_000_000

_SUFFIX = {"": 1, "k": 1024, "kib": 1024, "m": 1024 ** 2, "mib": 1024 ** 2,
           "g": 1024 ** 3, "gib": 1024 ** 3}
_NUMBER = re.compile(r"\s*(0x[0-9a-fA-F]+|\d+)\s*([a-zA-Z]*)\s*\Z")

LAYOUT_KEYS = ("code_base", "code_size", "stack_base", "stack_size", "heap_base",
               "heap_size", "arena_chunk_size", "bypass_threshold", "aslr_seed",
               "extra_code", "extra_stack")


def parse_int(value):
    """Integer from a JSON number or text such as ``0x58``, ``16KiB``, ``1M``."""
    if isinstance(value, bool):
        raise ConfigurationError(f"expected an integer, got {value!r}")
    if isinstance(value, int):
        return value
    m = _NUMBER.match(str(value))
    if not m or m.group(2).lower() not in _SUFFIX:
        raise ConfigurationError(f"expected an integer, got {value!r}")
    return int(m.group(1), 0) * _SUFFIX[m.group(2).lower()]


def _window(item, default_label):
    if isinstance(item, str):
        parts = item.split(":")
    else:
        parts = list(item)
    if len(parts) not in (2, 3):
        raise ConfigurationError(f"window must be BASE:SIZE[:LABEL], got {item!r}")
    label = parts[2] if len(parts) == 3 else default_label
    return (parse_int(parts[0]), parse_int(parts[1]), str(label))


def layout_with(layout, key, value):
    """Return ``layout`` with one ``KEY=VAL`` style override applied."""
    if key == "aslr_seed":
        return replace(layout, aslr_seed=None if value in (None, "", "none") else parse_int(value))
    if key in ("heap_base", "heap_size", "arena_chunk_size", "bypass_threshold"):
        return replace(layout, **{key: parse_int(value)})
    if key in ("code_base", "code_size", "stack_base", "stack_size"):
        group, part = key.split("_")
        windows = list(getattr(layout, group))
        base, size, label = windows[0]
        if part == "base":
            base = parse_int(value)
        else:
            size = parse_int(value)
        windows[0] = (base, size, label)
        return replace(layout, **{group: tuple(windows)})
    if key in ("extra_code", "extra_stack"):
        group = key[len("extra_"):]
        windows = getattr(layout, group)
        label = f"{group}-{len(windows)}"
        return replace(layout, **{group: tuple(windows) + (_window(value, label),)})
    if key in ("code", "stack"):
        windows = tuple(_window(w, f"{key}-{i}") for i, w in enumerate(value))
        return replace(layout, **{key: windows})
    raise ConfigurationError(f"unknown layout key {key!r} (known: {', '.join(LAYOUT_KEYS)})")


@dataclass(frozen=True)
class RunConfig:
    layout: AddressSpaceConfig = field(default_factory=AddressSpaceConfig)
    aware_custom_alloc: bool = False
    auto_candidates: Optional[int] = None     # depth, or None for hand markers
    compress_labels: bool = False
    timeout_events: int = DEFAULT_TIMEOUT_EVENTS
    element_size: int = 0x58
    report_path: Optional[str] = None
    trace_path: Optional[str] = None
    annotate_path: Optional[str] = None

    def __post_init__(self):
        if self.timeout_events <= 0:
            raise ConfigurationError("timeout_events must be positive")
        if self.auto_candidates is not None and self.auto_candidates < 0:
            raise ConfigurationError("auto-candidate depth must be >= 0")
        if self.element_size <= 0:
            raise ConfigurationError("element_size must be positive")
        build_regions(self.layout)

    def echo(self):
        """Behaviour-relevant settings for the report (no paths)."""
        lay = self.layout

        def windows(ws):
            return [[f"0x{b:08x}", f"0x{s:08x}", l] for b, s, l in ws]

        return {
            "aware_custom_alloc": self.aware_custom_alloc,
            "auto_candidates": self.auto_candidates,
            "compress_labels": self.compress_labels,
            "timeout_events": self.timeout_events,
            "element_size": self.element_size,
            "layout": {
                "code": windows(lay.code),
                "stack": windows(lay.stack),
                "heap_base": f"0x{lay.heap_base:08x}",
                "heap_size": f"0x{lay.heap_size:08x}",
                "arena_chunk_size": lay.arena_chunk_size,
                "bypass_threshold": lay.bypass_threshold,
                "aslr_seed": lay.aslr_seed,
            },
        }


_TOP_KEYS = {"aware_custom_alloc", "auto_candidates", "compress_labels",
             "timeout_events", "element_size", "report", "trace", "annotate", "layout"}


def config_from_mapping(data, base=None):
    """Build a :class:`RunConfig` from a decoded configuration object."""
    if not isinstance(data, dict):
        raise ConfigurationError("configuration must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigurationError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
    cfg = base or RunConfig()
    layout = cfg.layout
    for key, value in (data.get("layout") or {}).items():
        layout = layout_with(layout, key, value)
    changes = {"layout": layout}
    for key in ("aware_custom_alloc", "compress_labels"):
        if key in data:
            if not isinstance(data[key], bool):
                raise ConfigurationError(f"{key} must be true or false")
            changes[key] = data[key]
    if "auto_candidates" in data:
        v = data["auto_candidates"]
        changes["auto_candidates"] = None if v is None or v is False else (1 if v is True else parse_int(v))
    for key in ("timeout_events", "element_size"):
        if key in data:
            changes[key] = parse_int(data[key])
    for key, attr in (("report", "report_path"), ("trace", "trace_path"), ("annotate", "annotate_path")):
        if key in data:
            changes[attr] = data[key]
    return replace(cfg, **changes)


def load_config(path, base=None):
    try:
        with open(path, encoding="utf-8") as fp:
            data = json.load(fp)
    except ValueError as exc:
        raise ConfigurationError(f"{path}: invalid JSON: {exc}") from None
    return config_from_mapping(data, base)
