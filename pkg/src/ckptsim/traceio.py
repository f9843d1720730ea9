"""Trace emission: canonical CSV timelines and best-effort Paraver traces.

The CSV is the bit-exact artifact format; the .prv/.pcf pair exists so runs
can be eyeballed in Paraver and carries state records only.
"""

from __future__ import annotations

from .engine import LedgerInterval, Phase, RunResult

CSV_HEADER = "node,state,freq,start_s,end_s,power_w,energy_j"

# Paraver state encoding; this artifact's contract
PRV_STATE_CODES = {
    Phase.COMPUTING: 1,
    Phase.BLOCKED_SEND: 2,
    Phase.BLOCKED_RECV: 2,
    Phase.CHECKPOINTING: 3,
    Phase.DOWN: 4,
    Phase.RESTARTING: 5,
    Phase.REEXECUTING: 6,
    Phase.GOING_TO_SLEEP: 7,
    Phase.SLEEPING: 8,
    Phase.WAKING: 9,
}

PRV_STATE_LABELS = {
    1: "Computing",
    2: "BlockedWait",
    3: "Checkpointing",
    4: "Down",
    5: "Restarting",
    6: "Reexecuting",
    7: "GoingToSleep",
    8: "Sleeping",
    9: "Waking",
}


def _sorted_intervals(run: RunResult) -> list[LedgerInterval]:
    out = []
    for node in sorted(run.ledgers):
        out.extend(run.ledgers[node])  # already time-ordered per node
    return out


def emit_csv(run: RunResult, sink) -> None:
    """Write the ledger as CSV; deterministic row order, 6-decimal fields."""
    lines = [CSV_HEADER]
    for iv in _sorted_intervals(run):
        lines.append(f"{iv.node},{iv.phase.value},{iv.freq_label},"
                     f"{iv.start:.6f},{iv.end:.6f},{iv.power:.6f},{iv.energy:.6f}")
    sink.write(("\n".join(lines) + "\n").encode("utf-8"))


def parse_csv(stream) -> list[LedgerInterval]:
    """Read back an emitted CSV into ledger intervals."""
    data = stream.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    lines = data.strip().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("not a ckptsim trace CSV")
    phases = {p.value: p for p in Phase}
    out = []
    for line in lines[1:]:
        node, state, freq, start, end, power, _energy = line.split(",")
        out.append(LedgerInterval(node=int(node), phase=phases[state],
                                  freq_label=freq, power=float(power),
                                  start=float(start), end=float(end)))
    return out


def _ns(t: float) -> int:
    return int(t * 1e9 + 0.5)  # round half-up


def emit_prv(run: RunResult, sink) -> None:
    """Write Paraver state records: one application, one task per node."""
    intervals = _sorted_intervals(run)
    nodes = sorted(run.ledgers)
    horizon = max((iv.end for iv in intervals), default=0.0)
    n = len(nodes)
    cpus = ",".join("1" for _ in nodes)
    tasks = ",".join(f"1:{i + 1}" for i in range(n))
    lines = [f"#Paraver (01/01/2000 at 00:00):{_ns(horizon)}:{n}({cpus}):1:{n}({tasks})"]
    for iv in intervals:
        code = PRV_STATE_CODES.get(iv.phase)
        if code is None:
            continue
        tid = iv.node + 1
        lines.append(f"1:{tid}:1:{tid}:1:{_ns(iv.start)}:{_ns(iv.end)}:{code}")
    sink.write(("\n".join(lines) + "\n").encode("utf-8"))


def emit_pcf(sink) -> None:
    """Companion label file mapping state codes to names."""
    lines = [
        "DEFAULT_OPTIONS", "", "LEVEL               THREAD",
        "UNITS               NANOSEC", "", "STATES",
    ]
    lines.extend(f"{code}    {label}" for code, label in sorted(PRV_STATE_LABELS.items()))
    sink.write(("\n".join(lines) + "\n").encode("utf-8"))
