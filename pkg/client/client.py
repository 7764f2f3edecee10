#!/usr/bin/env python3
"""Out-of-process control agent speaking the newline-delimited JSON protocol.

Connects to a listening benchmark harness, answers every observation with an
action, and exits once the episode ends.  Two policies ship with it: ``random``
draws uniformly inside the advertised action ranges, ``rbc-cost`` replays the
tariff-driven storage schedule (charge through the nine off-peak hours on
weekdays, discharge half the budget over the three on-peak hours, trickle
charge on weekends).

Only the standard library is used; the harness is a black box behind the
socket.
"""
from __future__ import annotations

import argparse
import json
import random
import socket
import sys
import time

PROTOCOL_VERSION = 1
CONNECT_WINDOW_S = 15.0


class ClientError(RuntimeError):
    """The episode cannot continue; the message is the diagnostic."""


def rbc_cost_value(hour: int, day_of_week: int) -> float:
    """Storage action fraction for one hour of the tariff schedule."""
    if day_of_week in (6, 7):
        return 1.0 / 24.0
    if hour >= 22 or hour < 7:
        return 1.0 / 9.0
    if 15 <= hour < 18:
        return -0.5 / 3.0
    return -0.5 / 12.0


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise ValueError(f"address {text!r} is not HOST:PORT")
    return host, int(port)


def connect_with_retry(host: str, port: int, window_s: float) -> socket.socket:
    """Dial until the harness starts listening or the window closes."""
    deadline = time.monotonic() + window_s
    while True:
        try:
            return socket.create_connection((host, port), timeout=5.0)
        except OSError as exc:
            if time.monotonic() >= deadline:
                raise ClientError(f"could not connect to {host}:{port} ({exc})") from exc
            time.sleep(0.05)


def read_message(stream) -> dict:
    line = stream.readline()
    if not line:
        raise ClientError("connection closed by the harness")
    try:
        message = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ClientError(f"malformed message from the harness ({exc})") from None
    if not isinstance(message, dict):
        raise ClientError(f"expected an object, got {type(message).__name__}")
    return message


def send_message(stream, message: dict) -> None:
    stream.write((json.dumps(message) + "\n").encode())
    stream.flush()


class Policy:
    """Maps one observation vector to one action vector."""

    def __init__(self, name: str, hello: dict, seed: int):
        self.name = name
        self.action_names = hello.get("action_names")
        ranges = hello.get("ranges")
        if not isinstance(self.action_names, list) or not isinstance(ranges, dict):
            raise ClientError("hello lacks action_names/ranges")
        try:
            self.ranges = [tuple(ranges[n]) for n in self.action_names]
        except KeyError as exc:
            raise ClientError(f"hello ranges missing {exc.args[0]!r}") from None
        observations = hello.get("observation_names", [])
        if name == "rbc-cost":
            try:
                self.hour_index = observations.index("hour")
                self.dow_index = observations.index("day_of_week")
            except ValueError:
                raise ClientError(
                    "rbc-cost needs hour and day_of_week observations"
                ) from None
        self.rng = random.Random(seed)

    def act(self, values: list[float]) -> list[float]:
        if self.name == "random":
            return [self.rng.uniform(lo, hi) for lo, hi in self.ranges]
        hour = int(values[self.hour_index])
        dow = int(values[self.dow_index])
        return [rbc_cost_value(hour, dow)] * len(self.action_names)


def run_episode(stream, policy_name: str, seed: int) -> dict:
    """Handshake, play until the end message, return the final KPI payload."""
    hello = read_message(stream)
    if hello.get("type") != "hello":
        raise ClientError(f"expected hello, got {hello.get('type')!r}")
    version = hello.get("version")
    if version != PROTOCOL_VERSION:
        raise ClientError(f"unsupported protocol version {version!r}")
    policy = Policy(policy_name, hello, seed)
    send_message(stream, {"type": "hello_ack", "agent_name": f"{policy_name}-client"})
    while True:
        message = read_message(stream)
        kind = message.get("type")
        if kind == "obs":
            values = message.get("values")
            if not isinstance(values, list):
                raise ClientError("obs without a values list")
            send_message(stream, {"type": "act", "values": policy.act(values)})
        elif kind == "end":
            return message.get("kpis", {})
        elif kind == "error":
            raise ClientError(f"harness aborted: {message.get('message')}")
        # anything else is a message from a newer harness; skip it


def run_client(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="client",
        description="external agent for the episode control protocol",
    )
    parser.add_argument("--connect", required=True, metavar="HOST:PORT",
                        help="address the harness is listening on")
    parser.add_argument("--policy", choices=("random", "rbc-cost"),
                        default="rbc-cost")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for the random policy")
    parser.add_argument("--timeout", type=float, default=60.0,
                        help="per-message receive timeout in seconds")
    args = parser.parse_args(argv)
    try:
        host, port = parse_address(args.connect)
    except ValueError as exc:
        parser.error(str(exc))
    try:
        conn = connect_with_retry(host, port, CONNECT_WINDOW_S)
        conn.settimeout(args.timeout)
        try:
            stream = conn.makefile("rwb")
            kpis = run_episode(stream, args.policy, args.seed)
        finally:
            conn.close()
    except ClientError as exc:
        print(f"client: {exc}", file=sys.stderr)
        return 1
    except socket.timeout:
        print("client: timed out waiting for the harness", file=sys.stderr)
        return 1
    json.dump(kpis, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


if __name__ == "__main__":
    sys.exit(run_client())
