"""Newline-delimited JSON bridge to out-of-process agents.

One connection serves one episode.  The harness speaks first:

    -> {"type": "hello", "version": 1, "observation_names": [...],
        "action_names": [...], "ranges": {name: [lo, hi], ...}}
    <- {"type": "hello_ack", "agent_name": "..."}
    -> {"type": "obs", "step": 0, "values": [...], "reward": null,
        "done": false}
    <- {"type": "act", "values": [...]}
    ...
    -> {"type": "end", "kpis": {...}, "reward": <last reward>}

Unknown fields are ignored on both sides.  Out-of-range action values are
clamped and counted; a wrong-arity act, malformed JSON, a timeout, or a
disconnect aborts the episode with a diagnostic naming the step.
"""
from __future__ import annotations

import json
import selectors
import socket
import subprocess
import sys
from typing import Mapping, Sequence

PROTOCOL_VERSION = 1
MAX_LINE_BYTES = 1 << 20
DEFAULT_TIMEOUT_S = 30.0


class ProtocolError(RuntimeError):
    """The peer violated the message contract."""


class EpisodeAborted(RuntimeError):
    """An episode could not complete; carries the failing step index."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


class _SocketTransport:
    def __init__(self, conn: socket.socket, timeout: float):
        self._conn = conn
        self._conn.settimeout(timeout)
        self._buffer = b""

    def send_line(self, line: bytes) -> None:
        self._conn.sendall(line)

    def recv_line(self) -> bytes | None:
        while b"\n" not in self._buffer:
            if len(self._buffer) > MAX_LINE_BYTES:
                raise ProtocolError("message exceeds the line limit")
            try:
                chunk = self._conn.recv(65536)
            except socket.timeout:
                raise ProtocolError("timed out waiting for the peer") from None
            if not chunk:
                return None
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line

    def close(self) -> None:
        try:
            self._conn.close()
        except OSError:
            pass


class _PipeTransport:
    def __init__(self, process: subprocess.Popen, timeout: float):
        self._process = process
        self._timeout = timeout
        self._buffer = b""
        self._selector = selectors.DefaultSelector()
        self._selector.register(process.stdout, selectors.EVENT_READ)

    def send_line(self, line: bytes) -> None:
        try:
            self._process.stdin.write(line)
            self._process.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"peer pipe closed ({exc})") from exc

    def recv_line(self) -> bytes | None:
        while b"\n" not in self._buffer:
            if len(self._buffer) > MAX_LINE_BYTES:
                raise ProtocolError("message exceeds the line limit")
            if not self._selector.select(self._timeout):
                raise ProtocolError("timed out waiting for the peer")
            chunk = self._process.stdout.read1(65536)
            if not chunk:
                return None
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line

    def close(self) -> None:
        self._selector.close()
        for stream in (self._process.stdin, self._process.stdout):
            try:
                stream.close()
            except OSError:
                pass
        self._process.wait(timeout=5)


class ExternalAgentBridge:
    """Harness side of the protocol over an already-open transport."""

    def __init__(self, transport):
        self._transport = transport
        self.agent_name: str | None = None
        self.clamped_steps = 0

    # -------------------------------------------------------------- factory

    @classmethod
    def listen_tcp(
        cls, host: str, port: int, *, timeout: float = DEFAULT_TIMEOUT_S
    ) -> "ExternalAgentBridge":
        """Bind, accept exactly one peer, and wrap the connection."""
        server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        server.bind((host, port))
        server.listen(1)
        server.settimeout(timeout)
        bound = server.getsockname()
        print(f"waiting for an agent on {bound[0]}:{bound[1]}", file=sys.stderr)
        try:
            conn, _ = server.accept()
        except socket.timeout:
            raise EpisodeAborted("no agent connected before the timeout") from None
        finally:
            server.close()
        return cls(_SocketTransport(conn, timeout))

    @classmethod
    def spawn_stdio(
        cls, command: Sequence[str], *, timeout: float = DEFAULT_TIMEOUT_S
    ) -> "ExternalAgentBridge":
        process = subprocess.Popen(
            list(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )
        return cls(_PipeTransport(process, timeout))

    # ------------------------------------------------------------- messages

    def _send(self, message: dict) -> None:
        self._transport.send_line(json.dumps(message).encode() + b"\n")

    def _recv(self, expected_type: str, step: int | None = None) -> dict:
        # every failure path closes the transport so a dead episode never
        # leaves the peer waiting on an open socket
        try:
            line = self._transport.recv_line()
        except ProtocolError as exc:
            self.abort(str(exc))
            raise EpisodeAborted(str(exc), step) from exc
        if line is None:
            self._transport.close()
            raise EpisodeAborted("peer disconnected", step)
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            self.abort("malformed message")
            raise EpisodeAborted(f"malformed message ({exc})", step) from None
        if not isinstance(message, dict) or message.get("type") != expected_type:
            got = message.get("type") if isinstance(message, dict) else type(message).__name__
            self.abort(f"expected {expected_type!r}, got {got!r}")
            raise EpisodeAborted(f"expected {expected_type!r}, got {got!r}", step)
        return message

    def handshake(
        self,
        observation_names: Sequence[str],
        action_names: Sequence[str],
        ranges: Mapping[str, tuple[float, float]],
    ) -> str:
        self._action_names = list(action_names)
        self._ranges = {name: tuple(ranges[name]) for name in action_names}
        self._send(
            {
                "type": "hello",
                "version": PROTOCOL_VERSION,
                "observation_names": list(observation_names),
                "action_names": self._action_names,
                "ranges": {k: list(v) for k, v in self._ranges.items()},
            }
        )
        ack = self._recv("hello_ack")
        name = ack.get("agent_name")
        if not isinstance(name, str) or not name:
            raise EpisodeAborted("hello_ack lacks an agent_name")
        self.agent_name = name
        return name

    def request_action(
        self, step: int, values: Sequence[float], reward: float | None, done: bool
    ) -> list[float]:
        """One obs/act exchange; returns clamped action values."""
        self._send(
            {
                "type": "obs",
                "step": step,
                "values": [float(v) for v in values],
                "reward": reward,
                "done": done,
            }
        )
        message = self._recv("act", step)
        raw = message.get("values")
        if not isinstance(raw, list) or len(raw) != len(self._action_names):
            self.abort(
                f"act must carry {len(self._action_names)} values, "
                f"got {len(raw) if isinstance(raw, list) else type(raw).__name__}"
            )
            raise EpisodeAborted(
                f"act arity mismatch: expected {len(self._action_names)}, "
                f"got {len(raw) if isinstance(raw, list) else 'non-list'}",
                step,
            )
        out = []
        clamped = False
        for name, value in zip(self._action_names, raw):
            try:
                value = float(value)
            except (TypeError, ValueError):
                self.abort(f"act value for {name} is not a number")
                raise EpisodeAborted(f"act value for {name} is not a number", step) from None
            lo, hi = self._ranges[name]
            bounded = min(max(value, lo), hi)
            if bounded != value:
                clamped = True
            out.append(bounded)
        if clamped:
            self.clamped_steps += 1
        return out

    def finish(self, kpis: Mapping, reward: float | None = None) -> None:
        self._send({"type": "end", "kpis": dict(kpis), "reward": reward})
        self._transport.close()

    def abort(self, message: str) -> None:
        """Best-effort error notification; always closes the transport."""
        try:
            self._send({"type": "error", "message": message})
        except Exception:
            pass
        self._transport.close()


class ExternalAgent:
    """Agent-interface adapter over a bridge for the run loop."""

    def __init__(self, env, bridge: ExternalAgentBridge):
        self.env = env
        self.bridge = bridge
        self._names = env.observation_names_flat()
        self._slots = [f"{b}.{d}" for b, d in env.action_slots()]
        self._step = 0
        self._pending_reward: float | None = None
        bridge.handshake(self._names, self._slots, env.action_ranges())

    def act(self, observations, explore: bool = False):
        values = [observations[name] for name in self._names]
        acted = self.bridge.request_action(self._step, values, self._pending_reward, False)
        self._step += 1
        actions: dict[str, dict[str, float]] = {}
        for slot, value in zip(self._slots, acted):
            building, device = slot.split(".", 1)
            actions.setdefault(building, {})[device] = value
        return actions

    def update(self, reward_value: float, next_observations, done: bool) -> None:
        self._pending_reward = reward_value

    def finish(self, kpis: Mapping) -> None:
        self.bridge.finish(kpis, self._pending_reward)


def external_act(bridge: ExternalAgentBridge, step: int, values, reward, done) -> list[float]:
    """Single exchange against an already-handshaken bridge."""
    return bridge.request_action(step, values, reward, done)
