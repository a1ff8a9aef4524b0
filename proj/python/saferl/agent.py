"""Agent side of the wire protocol.

The simulator listens on an endpoint; an agent connects and answers every
request line with exactly one reply line. Messages are JSON objects with
sorted keys and no whitespace, each carrying the protocol version "v".
"""
import json
import socket

VERSION = 1
REPLY_TYPE = {"ping": "pong", "act": "action", "update": "diagnostics",
              "reset_notice": "ack", "save": "ack"}


def encode(message):
    return json.dumps(message, sort_keys=True, separators=(",", ":"))


def reply_for(request, **body):
    msg = {"v": VERSION, "id": request["id"], "type": REPLY_TYPE[request["type"]]}
    msg.update(body)
    return encode(msg)


def error_for(request, message):
    return encode({"v": VERSION, "id": request.get("id", 0), "type": "error", "message": message})


class Agent:
    """Override act/update/reset_notice/save. Defaults do nothing useful."""

    def act(self, obs, goal, explore):
        return [0.0] * len(goal)

    def update(self, batch):
        return {}

    def reset_notice(self, seed):
        pass

    def save(self, path):
        pass

    def handle(self, request):
        t = request.get("type")
        if request.get("v") != VERSION or t not in REPLY_TYPE:
            return error_for(request, "unsupported request")
        if t == "ping":
            return reply_for(request)
        if t == "act":
            action = [max(-1.0, min(1.0, float(a)))
                      for a in self.act(request["obs"], request["goal"], request["explore"])]
            return reply_for(request, action=action)
        if t == "update":
            return reply_for(request, diagnostics=self.update(request["batch"]))
        if t == "reset_notice":
            self.reset_notice(request["seed"])
        else:
            self.save(request["path"])
        return reply_for(request)


def connect(endpoint, timeout=30.0):
    if endpoint.startswith("unix://"):
        s = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        s.settimeout(timeout)
        s.connect(endpoint[len("unix://"):])
        return s
    hostport = endpoint[len("tcp://"):] if endpoint.startswith("tcp://") else endpoint
    host, port = hostport.rsplit(":", 1)
    return socket.create_connection((host or "127.0.0.1", int(port)), timeout=timeout)


def serve(agent, endpoint, timeout=30.0):
    """Answer requests until the simulator closes the connection.

    Returns the number of requests handled.
    """
    handled = 0
    with connect(endpoint, timeout) as sock:
        stream = sock.makefile("rwb")
        for raw in stream:
            request = json.loads(raw)
            stream.write((agent.handle(request) + "\n").encode())
            stream.flush()
            handled += 1
    return handled
