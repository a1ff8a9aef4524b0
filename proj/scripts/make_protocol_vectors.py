#!/usr/bin/env python3
"""Writes tests/protocol_vectors.jsonl, the agent protocol conformance vectors.

Request vectors carry the inputs and the exact line the simulator must emit.
Reply vectors carry a line an agent might send and whether the simulator must
accept it. Lines use sorted keys and no whitespace.
"""
import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "protocol_vectors.jsonl"


def canon(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def split(values, dof):
    """Observation values -> (state without goal, goal)."""
    return values[: 2 * dof] + values[3 * dof:], values[2 * dof: 3 * dof]


def observation(dof, base):
    return [float(base + 0.125 * k) for k in range(3 * dof + 12)]


vectors = []


def request(name, rtype, id_, inputs, body):
    msg = {"v": 1, "id": id_, "type": rtype}
    msg.update(body)
    vectors.append({"name": name, "kind": "request", "type": rtype, "id": id_,
                    "input": inputs, "line": canon(msg)})


def reply(name, request_type, id_, line, valid, dof=None, action=None):
    v = {"name": name, "kind": "reply", "request_type": request_type,
         "expected_id": id_, "line": line, "valid": valid}
    if dof is not None:
        v["dof"] = dof
    if action is not None:
        v["action"] = action
    vectors.append(v)


request("ping", "ping", 1, {}, {})

for dof, explore, id_ in [(1, True, 2), (6, False, 3)]:
    values = observation(dof, -1.0)
    obs, goal = split(values, dof)
    request(f"act_dof{dof}", "act", id_, {"dof": dof, "observation": values, "explore": explore},
            {"obs": obs, "goal": goal, "explore": explore})

transitions = []
for k in range(2):
    s = observation(2, 0.5 * k)
    s_next = observation(2, 0.5 * k + 0.25)
    transitions.append({"s": s, "a": [0.5, -0.25], "r": -1.0 if k == 0 else 0.0,
                        "s_next": s_next, "done": k == 1})
batch = {"obs": [], "goal": [], "action": [], "reward": [], "next_obs": [], "done": []}
for t in transitions:
    o, g = split(t["s"], 2)
    on, _ = split(t["s_next"], 2)
    batch["obs"].append(o)
    batch["goal"].append(g)
    batch["action"].append(t["a"])
    batch["reward"].append(t["r"])
    batch["next_obs"].append(on)
    batch["done"].append(t["done"])
request("update_two", "update", 4, {"dof": 2, "transitions": transitions}, {"batch": batch})

request("reset_notice", "reset_notice", 5, {"seed": 42}, {"seed": 42})
request("reset_notice_max_seed", "reset_notice", 6, {"seed": 2**64 - 1}, {"seed": 2**64 - 1})
request("save", "save", 7, {"path": "/tmp/agent_ckpt"}, {"path": "/tmp/agent_ckpt"})

# Replies the simulator accepts.
reply("pong", "ping", 1, canon({"v": 1, "id": 1, "type": "pong"}), True)
reply("pong_unsorted_spaced", "ping", 1, '{ "type": "pong", "id": 1, "v": 1 }', True)
reply("action_1", "act", 2, canon({"v": 1, "id": 2, "type": "action", "action": [0.5]}), True,
      dof=1, action=[0.5])
reply("action_bounds", "act", 3,
      canon({"v": 1, "id": 3, "type": "action", "action": [-1.0, 1.0, 0, 1, -1, 0.25]}), True,
      dof=6, action=[-1.0, 1.0, 0.0, 1.0, -1.0, 0.25])
reply("diagnostics", "update", 4,
      canon({"v": 1, "id": 4, "type": "diagnostics", "diagnostics": {"loss_q": 0.5, "loss_pi": -1.25}}), True)
reply("diagnostics_empty", "update", 4, canon({"v": 1, "id": 4, "type": "diagnostics", "diagnostics": {}}), True)
reply("ack_reset", "reset_notice", 5, canon({"v": 1, "id": 5, "type": "ack"}), True)
reply("ack_save", "save", 7, canon({"v": 1, "id": 7, "type": "ack"}), True)

# Replies the simulator must reject.
bad = [
    ("empty", "ping", 1, ""),
    ("not_json", "ping", 1, "pong"),
    ("truncated", "ping", 1, '{"v":1,"id":1,"type":"po'),
    ("array", "ping", 1, "[1,2]"),
    ("missing_version", "ping", 1, canon({"id": 1, "type": "pong"})),
    ("version_2", "ping", 1, canon({"v": 2, "id": 1, "type": "pong"})),
    ("version_float", "ping", 1, '{"id":1,"type":"pong","v":1.0}'),
    ("version_string", "ping", 1, canon({"v": "1", "id": 1, "type": "pong"})),
    ("wrong_id", "ping", 1, canon({"v": 1, "id": 2, "type": "pong"})),
    ("id_string", "ping", 1, canon({"v": 1, "id": "1", "type": "pong"})),
    ("missing_type", "ping", 1, canon({"v": 1, "id": 1})),
    ("wrong_type", "ping", 1, canon({"v": 1, "id": 1, "type": "ack"})),
    ("extra_key", "ping", 1, canon({"v": 1, "id": 1, "type": "pong", "x": 0})),
    ("agent_error", "ping", 1, canon({"v": 1, "id": 1, "type": "error", "message": "boom"})),
    ("action_missing", "act", 2, canon({"v": 1, "id": 2, "type": "action"})),
    ("action_not_array", "act", 2, canon({"v": 1, "id": 2, "type": "action", "action": 0.5})),
    ("action_short", "act", 3, canon({"v": 1, "id": 3, "type": "action", "action": [0.1] * 5})),
    ("action_long", "act", 2, canon({"v": 1, "id": 2, "type": "action", "action": [0.1, 0.2]})),
    ("action_above", "act", 2, canon({"v": 1, "id": 2, "type": "action", "action": [1.0000001]})),
    ("action_below", "act", 2, canon({"v": 1, "id": 2, "type": "action", "action": [-1.5]})),
    ("action_string", "act", 2, canon({"v": 1, "id": 2, "type": "action", "action": ["0.5"]})),
    ("action_null", "act", 2, canon({"v": 1, "id": 2, "type": "action", "action": [None]})),
    ("action_overflow", "act", 2, '{"action":[1e400],"id":2,"type":"action","v":1}'),
    ("action_for_ping", "ping", 1, canon({"v": 1, "id": 1, "type": "action", "action": []})),
    ("diagnostics_array", "update", 4, canon({"v": 1, "id": 4, "type": "diagnostics", "diagnostics": []})),
    ("diagnostics_missing", "update", 4, canon({"v": 1, "id": 4, "type": "diagnostics"})),
    ("ack_for_update", "update", 4, canon({"v": 1, "id": 4, "type": "ack"})),
    ("pong_for_reset", "reset_notice", 5, canon({"v": 1, "id": 5, "type": "pong"})),
]
for name, rtype, id_, line in bad:
    dof = {2: 1, 3: 6}.get(id_) if rtype == "act" else None
    reply(name, rtype, id_, line, False, dof=dof)

OUT.write_text("".join(json.dumps(v, sort_keys=True) + "\n" for v in vectors))
print(f"wrote {len(vectors)} vectors to {OUT}")
