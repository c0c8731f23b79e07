"""Writes the network and flow files for the two laboratory topologies.

Pipe geometry follows the laboratory pipe tables. Flow rates are synthetic
but balanced at every junction.
"""

import json
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "data"


def write_network(path, nodes, pipes, sensors):
    doc = {
        "segment_volume_cap_l": 1.5,
        "time_step_s": 1.0,
        "nodes": nodes,
        "pipes": [
            {"id": pid, "from": a, "to": b, "length_m": length, "diameter_mm": diameter}
            for pid, a, b, length, diameter in pipes
        ],
        "sensors": sensors,
    }
    path.write_text(json.dumps(doc, indent=2) + "\n")


def write_flows(path, pipes, steps, rate):
    lines = ["time,pipe_id,flow_lps"]
    for t in range(steps):
        for pid, *_ in pipes:
            lines.append(f"{t},{pid},{rate(t, pid)}")
    path.write_text("\n".join(lines) + "\n")


def tank_scenario():
    nodes = [
        {"id": "P1", "kind": "source", "tank_volume_l": 20.0},
        {"id": "P2", "kind": "source", "tank_volume_l": 20.0},
        {"id": "J1", "kind": "junction"},
        {"id": "J2", "kind": "junction"},
        {"id": "J3", "kind": "junction"},
        {"id": "J4", "kind": "junction"},
        {"id": "C1", "kind": "consumer"},
        {"id": "C2", "kind": "consumer"},
    ]
    pipes = [
        ("J1J2", "J1", "J2", 20, 13),
        ("J1J3", "J1", "J3", 20, 25),
        ("J1J4", "J1", "J4", 20, 25),
        ("J2C1", "J2", "C1", 5, 25),
        ("J2J3", "J2", "J3", 20, 25),
        ("J3C2", "J3", "C2", 5, 25),
        ("J4J2", "J4", "J2", 20, 20),
        ("J4J3", "J4", "J3", 20, 20),
        ("P1J1", "P1", "J1", 20, 25),
        ("P2J4", "P2", "J4", 3, 25),
    ]
    flows = {
        "P1J1": 0.3, "J1J2": 0.05, "J1J3": 0.15, "J1J4": 0.1, "P2J4": 0.2,
        "J4J2": 0.15, "J4J3": 0.15, "J2C1": 0.12, "J2J3": 0.08, "J3C2": 0.38,
    }
    out = ROOT / "table1a"
    out.mkdir(parents=True, exist_ok=True)
    write_network(out / "network.json", nodes, pipes, ["J2C1#0", "J3C2#0"])
    write_flows(out / "flows.csv", pipes, 196, lambda t, pid: flows[pid])


def pipe_scenario():
    nodes = [
        {"id": "P1", "kind": "source", "tank_volume_l": 20.0},
        {"id": "J1", "kind": "junction"},
        {"id": "J2", "kind": "junction"},
        {"id": "J3", "kind": "junction"},
        {"id": "J4", "kind": "junction"},
        {"id": "J5", "kind": "junction"},
        {"id": "C1", "kind": "consumer"},
        {"id": "C2", "kind": "consumer"},
    ]
    pipes = [
        ("J1J2a", "J1", "J2", 20, 25),
        ("J1J2b", "J1", "J2", 20, 25),
        ("J1J4", "J1", "J4", 20, 13),
        ("J2J3", "J2", "J3", 20, 20),
        ("J2J4", "J2", "J4", 20, 20),
        ("J3C2", "J3", "C2", 5, 25),
        ("J4J3", "J4", "J3", 20, 25),
        ("J4J5", "J4", "J5", 5, 13),
        ("J5C1", "J5", "C1", 5, 25),
        ("P1J1", "P1", "J1", 20, 25),
    ]
    base = {
        "P1J1": 0.3, "J1J4": 0.1, "J2J3": 0.12, "J2J4": 0.08, "J4J3": 0.1,
        "J4J5": 0.08, "J5C1": 0.08, "J3C2": 0.22,
    }

    def rate(t, pid):
        if pid == "J1J2a":
            return 0.2 if t < 30 else 0.0
        if pid == "J1J2b":
            return 0.0 if t < 30 else 0.2
        return base[pid]

    out = ROOT / "table1b"
    out.mkdir(parents=True, exist_ok=True)
    write_network(out / "network.json", nodes, pipes, ["J2J3#0", "J4J5#0"])
    write_flows(out / "flows.csv", pipes, 300, rate)


if __name__ == "__main__":
    tank_scenario()
    pipe_scenario()
