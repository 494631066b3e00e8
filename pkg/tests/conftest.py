import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wmrecon.memory_model import AddressSpaceConfig, init_address_space  # noqa: E402
from wmrecon.script_vm import load  # noqa: E402
from wmrecon.script_vm.interpreter import Interpreter  # noqa: E402
from wmrecon.trace import EventLog  # noqa: E402

CORPUS = Path(__file__).resolve().parents[1] / "src" / "wmrecon" / "corpus"

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, text = marker.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        prev = _CRITERIA.get(n, (text, True))[1]
        _CRITERIA[n] = (text, prev and rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_CRITERIA):
        text, ok = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}")


class Run:
    """A script execution with its full event list."""

    def __init__(self, source, layout=None, limit=None, hooks=None):
        self.script = load(source)
        self.log = EventLog(limit)
        self.events = []
        self.log.subscribe(self.events.append)
        self.model = init_address_space(layout or AddressSpaceConfig(), self.log)
        self.model.capture_baselines()
        self.interp = Interpreter(self.script.ast, self.model, hooks)
        self.outcome = self.interp.run()

    def kinds(self, *wanted):
        return [e for e in self.events if not wanted or e.kind in wanted]


def corpus_source(name):
    return (CORPUS / f"{name}.wms").read_text(encoding="utf-8")

