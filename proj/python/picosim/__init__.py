"""Python front end for the picosim core.

The extension hands JSON back as text; this layer decodes it.
"""

import json

from . import _picosim
from ._picosim import (
    Artifact,
    BadSpec,
    CapacityError,
    ElaborationError,
    Error,
    FileFormatError,
    FormatError,
    MissingFile,
    NoReserveError,
    ParseError,
    SchedulingConflict,
    ScriptError,
    TapRouteError,
    TypeMismatch,
    UnknownInstance,
    UnknownScope,
    UnknownSignal,
)

__all__ = [
    "Artifact",
    "Session",
    "Simulation",
    "aggregate_bandwidth",
    "ber",
    "build",
    "flat",
    "hierarchy",
    "scc",
    "scc_dot",
    "Error",
    "BadSpec",
    "CapacityError",
    "ElaborationError",
    "FileFormatError",
    "FormatError",
    "MissingFile",
    "NoReserveError",
    "ParseError",
    "SchedulingConflict",
    "ScriptError",
    "TapRouteError",
    "TypeMismatch",
    "UnknownInstance",
    "UnknownScope",
    "UnknownSignal",
]


def build(source, grid=None):
    """Compile design source; `grid` is a dict of grid settings."""
    return Artifact.from_source(source, json.dumps(grid) if grid else "")


class Simulation:
    def __init__(self, artifact):
        self._sim = _picosim.Simulation(artifact)

    @property
    def cycle(self):
        return self._sim.cycle

    def run(self, cycles):
        return json.loads(self._sim.run(cycles))

    def step(self, n=1):
        self._sim.step(n)

    def take_trace(self):
        """Trace lines since the last call, each decoded."""
        return [json.loads(line) for line in self._sim.take_trace()]

    def utilization(self, signal, start, end):
        return json.loads(self._sim.utilization(signal, start, end))

    def snapshot(self):
        return json.loads(self._sim.snapshot())

    def restore(self, dump):
        self._sim.restore(json.dumps(dump))

    def status(self):
        return json.loads(self._sim.status())

    def probes(self):
        return json.loads(self._sim.probes())

    def deadlock(self):
        return json.loads(self._sim.deadlock())


class Session:
    """Debug shell session. Replies are {id, ok, data} or {id, ok, error}."""

    def __init__(self, path=None):
        self._s = _picosim.Session(path) if path else _picosim.Session()

    def execute(self, line):
        return json.loads(self._s.execute(line))

    def request(self, req):
        return json.loads(self._s.execute_json(json.dumps(req)))

    def run_script(self, text):
        return json.loads(self._s.run_script(text))

    @property
    def journal(self):
        return list(self._s.journal)

    def snapshot(self):
        return json.loads(self._s.snapshot())


def scc(artifact):
    return json.loads(_picosim.scc(artifact))


def scc_dot(artifact):
    return _picosim.scc_dot(artifact)


def hierarchy(artifact, scope="top"):
    return json.loads(_picosim.hierarchy(artifact, scope))


def flat(artifact, scope="top"):
    return json.loads(_picosim.flat(artifact, scope))


def ber(test, reference, width=32):
    """(errors, total_bits, rate) over the common prefix."""
    return _picosim.ber(list(test), list(reference), width)


def aggregate_bandwidth(ae_count, buses_per_track=2, bus_width=32, clock_hz=160e6):
    return _picosim.aggregate_bandwidth(ae_count, buses_per_track, bus_width, clock_hz)
