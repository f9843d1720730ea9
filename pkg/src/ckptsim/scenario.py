"""Scenario definition and the key/value scenario file format.

A scenario bundles the system characterization (frequency table, node power
profile), the fault-tolerance configuration, one communication script per
node, optional failure specification, and tuning knobs.  The file format is
line-oriented: ``[section]`` headers, ``key = value`` pairs, indented
continuation lines for multi-line values, ``#`` comments.  Sections:

    [system]        nodes, wait_mode, p_base, p_idle_wait, sleep/wake timings
    [frequencies]   levels = one "ghz p_comp beta p_ckpt gamma" row per line
    [ft]            t_ckpt, ckpt_interval, t_down, t_restart,
                    ckpt_phase_offsets, move_ahead
    [failure]       node, time          (section optional)
    [thresholds]    mu1, mu2            (section optional)
    [script.<n>]    ops = one "compute <s>" | "ssend <peer>" | "recv <peer>"
                    row per line
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

from .model import (
    FrequencyLevel,
    FrequencyTable,
    FTConfig,
    NodePowerProfile,
    SleepThresholds,
    WaitMode,
)


class ScenarioError(Exception):
    """Raised for malformed scenario files or invariant violations."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}:" if line is None else f"{path}:{line}: "
        super().__init__(f"{loc}{message}")
        self.path = path
        self.line = line


@dataclass(frozen=True)
class ComputeFor:
    duration: float     # seconds at maximum frequency


@dataclass(frozen=True)
class SsendTo:
    peer: int


@dataclass(frozen=True)
class RecvFrom:
    peer: int


Op = ComputeFor | SsendTo | RecvFrom


@dataclass(frozen=True)
class FailureSpec:
    """Single fail-stop: which node dies and when (absolute simulated time)."""

    failed_node: int
    failure_time: float

    def __post_init__(self):
        if self.failure_time < 0.0:
            raise ValueError("failure_time must be >= 0")


@dataclass(frozen=True)
class Scenario:
    name: str
    nodes: int
    freq_table: FrequencyTable
    node_profile: NodePowerProfile
    ft: FTConfig
    wait_mode: WaitMode
    thresholds: SleepThresholds
    comm_script: dict[int, tuple[Op, ...]]
    ckpt_phase_offsets: tuple[float, ...] = ()
    failure: FailureSpec | None = None
    move_ahead_policy: float | None = 0.5   # fraction of ckpt_interval; None disables

    def __post_init__(self):
        if self.nodes < 2:
            raise ScenarioError("a scenario needs at least 2 nodes")
        offsets = self.ckpt_phase_offsets or tuple(0.0 for _ in range(self.nodes))
        object.__setattr__(self, "ckpt_phase_offsets", offsets)
        if len(offsets) != self.nodes:
            raise ScenarioError(f"need {self.nodes} ckpt_phase_offsets, got {len(offsets)}")
        for o in offsets:
            if not 0.0 <= o < self.ft.ckpt_interval:
                raise ScenarioError(f"checkpoint phase offset {o} outside [0, interval)")
        if self.failure is not None and not 0 <= self.failure.failed_node < self.nodes:
            raise ScenarioError(f"failed node {self.failure.failed_node} out of range")
        if self.move_ahead_policy is not None and self.move_ahead_policy < 0.0:
            raise ScenarioError("move_ahead_policy must be >= 0 or None")
        validate_script(self.comm_script, self.nodes)

    def offset(self, node: int) -> float:
        return self.ckpt_phase_offsets[node]


def validate_script(script: dict[int, tuple[Op, ...]], nodes: int) -> None:
    """Check node indices, self-communication, and send/recv pairing.

    Pairing is per directed channel: the k-th SsendTo(j) of node i matches the
    k-th RecvFrom(i) of node j, so the counts must agree exactly.
    """
    sends: dict[tuple[int, int], int] = {}
    recvs: dict[tuple[int, int], int] = {}
    for node, ops in script.items():
        if not 0 <= node < nodes:
            raise ScenarioError(f"script references node {node}, but scenario has {nodes} nodes")
        for op in ops:
            if isinstance(op, ComputeFor):
                if op.duration < 0.0:
                    raise ScenarioError(f"node {node}: negative compute duration {op.duration}")
                continue
            if not 0 <= op.peer < nodes:
                raise ScenarioError(f"node {node}: peer {op.peer} out of range")
            if op.peer == node:
                raise ScenarioError(f"node {node}: cannot communicate with itself")
            if isinstance(op, SsendTo):
                sends[(node, op.peer)] = sends.get((node, op.peer), 0) + 1
            else:
                recvs[(op.peer, node)] = recvs.get((op.peer, node), 0) + 1
    for chan in sends.keys() | recvs.keys():
        ns, nr = sends.get(chan, 0), recvs.get(chan, 0)
        if ns != nr:
            raise ScenarioError(
                f"unmatched channel {chan[0]}->{chan[1]}: {ns} send(s) vs {nr} recv(s)")


def _parse_sections(path: str) -> dict[str, dict[str, tuple[str, int, list[tuple[str, int]]]]]:
    """Parse the file into sections -> key -> (value, line, continuation lines)."""
    sections: dict[str, dict] = {}
    current: dict | None = None
    last_key: str | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            stripped = raw.split("#", 1)[0].rstrip()
            if not stripped.strip():
                continue
            if stripped.lstrip().startswith("[") :
                header = stripped.strip()
                if not header.endswith("]"):
                    raise ScenarioError("malformed section header", path, lineno)
                name = header[1:-1].strip()
                if name in sections:
                    raise ScenarioError(f"duplicate section [{name}]", path, lineno)
                sections[name] = {}
                current = sections[name]
                last_key = None
                continue
            if stripped[0] in " \t":
                # continuation line of the previous key
                if current is None or last_key is None:
                    raise ScenarioError("continuation line without a key", path, lineno)
                current[last_key][2].append((stripped.strip(), lineno))
                continue
            if current is None:
                raise ScenarioError("key/value pair before any section", path, lineno)
            if "=" not in stripped:
                raise ScenarioError("expected 'key = value'", path, lineno)
            key, _, value = stripped.partition("=")
            key = key.strip()
            if key in current:
                raise ScenarioError(f"duplicate key '{key}'", path, lineno)
            current[key] = (value.strip(), lineno, [])
            last_key = key
    return sections


class _Section:
    """Typed access to one parsed section, with line-number diagnostics."""

    def __init__(self, path, name, data):
        self.path = path
        self.name = name
        self.data = data or {}

    def _raw(self, key):
        if key not in self.data:
            raise ScenarioError(f"missing key '{key}' in section [{self.name}]", self.path)
        return self.data[key]

    def get_float(self, key, default=None):
        if key not in self.data and default is not None:
            return default
        value, lineno, _ = self._raw(key)
        try:
            return float(value)
        except ValueError:
            raise ScenarioError(f"key '{key}': expected a number, got '{value}'",
                                self.path, lineno) from None

    def get_int(self, key, default=None):
        if key not in self.data and default is not None:
            return default
        value, lineno, _ = self._raw(key)
        try:
            return int(value)
        except ValueError:
            raise ScenarioError(f"key '{key}': expected an integer, got '{value}'",
                                self.path, lineno) from None

    def get_str(self, key, default=None):
        if key not in self.data and default is not None:
            return default
        return self._raw(key)[0]

    def get_rows(self, key):
        """Multi-line value: list of (text, lineno), inline part included."""
        value, lineno, cont = self._raw(key)
        rows = []
        if value:
            rows.append((value, lineno))
        rows.extend(cont)
        return rows

    def has(self, key):
        return key in self.data


def load_scenario(path: str) -> Scenario:
    """Parse and validate a scenario file; diagnostics carry file:line."""
    if not os.path.exists(path):
        raise ScenarioError("file not found", path)
    sections = _parse_sections(path)

    def section(name, required=True):
        if name not in sections:
            if required:
                raise ScenarioError(f"missing section [{name}]", path)
            return None
        return _Section(path, name, sections[name])

    system = section("system")
    nodes = system.get_int("nodes")
    mode_text = system.get_str("wait_mode", "active").lower()
    try:
        wait_mode = WaitMode(mode_text)
    except ValueError:
        raise ScenarioError(f"wait_mode must be 'active' or 'idle', got '{mode_text}'",
                            path) from None
    p_base = system.get_float("p_base")

    freq_sec = section("frequencies")
    levels = []
    for text, lineno in freq_sec.get_rows("levels"):
        parts = text.split()
        if len(parts) != 5:
            raise ScenarioError("frequency row needs: ghz p_comp beta p_ckpt gamma",
                                path, lineno)
        try:
            ghz, p_comp, beta, p_ckpt, gamma = (float(x) for x in parts)
            levels.append(FrequencyLevel(ghz, p_comp, beta, p_ckpt, gamma))
        except ValueError as exc:
            raise ScenarioError(str(exc), path, lineno) from None
    try:
        table = FrequencyTable(tuple(levels))
    except ValueError as exc:
        raise ScenarioError(str(exc), path)

    try:
        profile = NodePowerProfile(
            p_base=p_base,
            # baseline context by default; the engine swaps in the
            # frequency-appropriate application power when billing waits
            p_active_wait=table.max_level.p_comp,
            p_idle_wait=system.get_float("p_idle_wait", p_base),
            t_go_sleep=system.get_float("t_go_sleep"),
            t_wakeup=system.get_float("t_wakeup"),
            p_go_sleep=system.get_float("p_go_sleep"),
            p_wakeup=system.get_float("p_wakeup"),
            p_sleep=system.get_float("p_sleep"),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc), path)

    ft_sec = section("ft")
    try:
        ft = FTConfig(
            t_ckpt=ft_sec.get_float("t_ckpt"),
            ckpt_interval=ft_sec.get_float("ckpt_interval"),
            t_down=ft_sec.get_float("t_down"),
            t_restart=ft_sec.get_float("t_restart"),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc), path)

    offsets: tuple[float, ...] = ()
    if ft_sec.has("ckpt_phase_offsets"):
        value, lineno, _ = ft_sec._raw("ckpt_phase_offsets")
        try:
            offsets = tuple(float(x) for x in value.split())
        except ValueError:
            raise ScenarioError("ckpt_phase_offsets must be numbers", path, lineno) from None

    move_ahead: float | None = 0.5
    if ft_sec.has("move_ahead"):
        value, lineno, _ = ft_sec._raw("move_ahead")
        if value.lower() in ("off", "none", "disabled"):
            move_ahead = None
        else:
            try:
                move_ahead = float(value)
            except ValueError:
                raise ScenarioError("move_ahead must be a fraction or 'off'",
                                    path, lineno) from None

    th_sec = section("thresholds", required=False)
    if th_sec is None:
        thresholds = SleepThresholds()
    else:
        try:
            thresholds = SleepThresholds(mu1=th_sec.get_float("mu1", 1.0),
                                         mu2=th_sec.get_float("mu2", 1.0))
        except ValueError as exc:
            raise ScenarioError(str(exc), path)

    failure = None
    fail_sec = section("failure", required=False)
    if fail_sec is not None:
        try:
            failure = FailureSpec(failed_node=fail_sec.get_int("node"),
                                  failure_time=fail_sec.get_float("time"))
        except ValueError as exc:
            raise ScenarioError(str(exc), path)

    script: dict[int, tuple[Op, ...]] = {}
    for name in sections:
        if not name.startswith("script."):
            continue
        try:
            node = int(name.split(".", 1)[1])
        except ValueError:
            raise ScenarioError(f"bad script section name [{name}]", path) from None
        sec = _Section(path, name, sections[name])
        ops: list[Op] = []
        for text, lineno in sec.get_rows("ops"):
            parts = text.split()
            kind = parts[0].lower()
            if kind == "compute" and len(parts) == 2:
                try:
                    ops.append(ComputeFor(float(parts[1])))
                except ValueError:
                    raise ScenarioError(f"bad compute duration '{parts[1]}'",
                                        path, lineno) from None
            elif kind == "ssend" and len(parts) == 2:
                ops.append(SsendTo(int(parts[1])))
            elif kind == "recv" and len(parts) == 2:
                ops.append(RecvFrom(int(parts[1])))
            else:
                raise ScenarioError(f"unknown script op '{text}'", path, lineno)
        script[node] = tuple(ops)
    if not script:
        raise ScenarioError("no [script.<node>] sections found", path)
    for n in range(nodes):
        script.setdefault(n, ())

    name = os.path.splitext(os.path.basename(path))[0]
    try:
        return Scenario(
            name=name,
            nodes=nodes,
            freq_table=table,
            node_profile=profile,
            ft=ft,
            wait_mode=wait_mode,
            thresholds=thresholds,
            comm_script=script,
            ckpt_phase_offsets=offsets,
            failure=failure,
            move_ahead_policy=move_ahead,
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(str(exc), path)


def without_failure(scenario: Scenario) -> Scenario:
    return replace(scenario, failure=None)


def bundled_path(name: str) -> str:
    """Absolute path of a bundled scenario file, e.g. 'scenario2'."""
    here = os.path.join(os.path.dirname(__file__), "scenarios")
    fname = name if name.endswith(".cfg") else f"{name}.cfg"
    full = os.path.join(here, fname)
    if not os.path.exists(full):
        available = ", ".join(sorted(os.path.splitext(f)[0] for f in os.listdir(here)
                                     if f.endswith(".cfg")))
        raise ScenarioError(f"no bundled scenario '{name}' (available: {available})")
    return full
