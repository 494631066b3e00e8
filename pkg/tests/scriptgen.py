"""Random ``.wms`` script generator for property tests."""

import random


class ScriptGen:
    """Nested-marker scripts mixing heap, DOM and control-flow activity.

    ``deferred`` enables setTimeout callbacks, which run at marker
    boundaries and so are excluded where marker transparency is tested.
    """

    def __init__(self, seed, deferred=True, markers=True, max_depth=3):
        self.rng = random.Random(seed)
        self.deferred = deferred
        self.markers = markers
        self.max_depth = max_depth
        self.loop_vars = 0

    def script(self):
        r = self.rng
        lines = ["var s0 = unescape('%u4141');", "var s1 = '';", "var keep = new Array();",
                 "var box = domCreate('div');", "domRoot().appendChild(box);"]
        lines += ["function helper(n) {"]
        lines += ["  " + x for x in self.block(2, in_function=True)]
        lines += ["  return s0 + n;", "}"]
        for _ in range(r.randint(1, 6)):
            lines += self.stmt(1)
        return "\n".join(lines) + "\n"

    def block(self, depth, in_function=False):
        out = []
        for _ in range(self.rng.randint(0, 3)):
            out += self.stmt(depth, in_function)
        return out

    def marker(self):
        r = self.rng
        name = r.choice(["a", "b", "c", "loop", "x#2"])
        if r.random() < 0.3:
            return [f"setMarker('{name}' + {r.randint(0, 3)});"]
        return [f"setMarker('{name}');"]

    def stmt(self, depth, in_function=False):
        r = self.rng
        choices = ["alloc", "alloc", "free", "dom", "keep"]
        if self.markers:
            choices += ["marker", "marker", "marker", "reset"]
        if depth < self.max_depth:
            choices += ["if", "for", "block"]
        if not in_function:
            choices.append("call")
        if self.deferred and not in_function:
            choices.append("defer")
        if r.random() < 0.05:
            choices.append("control")
        kind = r.choice(choices)
        if kind == "marker":
            return self.marker()
        if kind == "reset":
            return ["resetMarker();"]
        if kind == "alloc":
            return [r.choice(["s0 = s0 + unescape('%u4242');", "s1 = s0.substring(0, 1) + s1;",
                              "s1 += 'xy';", "var t = s0 + s1;"])]
        if kind == "free":
            return [r.choice(["s1 = '';", "s0 = unescape('%u4141');", "keep = new Array();"])]
        if kind == "keep":
            return ["keep.push(s0 + 'k');"]
        if kind == "dom":
            return [r.choice(["box.appendChild(domCreate('p'));", "domClear(box);",
                              "box.title = s0;", "domCreate('span');", "collectGarbage();"])]
        if kind == "control":
            return [r.choice(["pivotGadget(0x0c0c0c0c);", "triggerVirtualCall(box);",
                              "pivotGadget(0x0012f100);"])]
        if kind == "call":
            return [f"s1 = helper({r.randint(0, 9)});"]
        if kind == "defer":
            return ["setTimeout(helper, 0, 1);"]
        inner = ["  " + x for x in self.block(depth + 1, in_function)]
        if kind == "if":
            out = [f"if ({r.choice(['1', '0', 's0.length > 2'])}) {{"] + inner + ["}"]
            if r.random() < 0.5:
                out += ["else {"] + ["  " + x for x in self.block(depth + 1, in_function)] + ["}"]
            return out
        if kind == "for":
            self.loop_vars += 1
            v = f"i{self.loop_vars}"
            return [f"for (var {v} = 0; {v} < {r.randint(0, 3)}; {v}++) {{"] + inner + ["}"]
        return ["{"] + inner + ["}"]


def random_script(seed, **kw):
    return ScriptGen(seed, **kw).script()
