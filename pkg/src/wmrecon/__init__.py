"""Weird-machine reconstruction from marked exploit scripts.

Typical use::

    from wmrecon import analyze, annotate, RunConfig
    report = analyze(open("spray.wms").read(), RunConfig())
    print(annotate(source, report))
"""

from wmrecon.config import RunConfig
from wmrecon.memory_model import AbstractState, AddressSpaceConfig, init_address_space
from wmrecon.primitives import stock_registry, transitions_identify
from wmrecon.recon import analyze, analyze_events, annotate, auto_candidates, strip_annotations
from wmrecon.report import WMReport

__version__ = "0.1.0"

__all__ = [
    "AbstractState", "AddressSpaceConfig", "RunConfig", "WMReport", "analyze",
    "analyze_events", "annotate", "auto_candidates", "init_address_space",
    "stock_registry", "strip_annotations", "transitions_identify",
]
