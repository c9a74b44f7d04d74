"""Networked shared Q-table: a TCP server owning the table and its clocks.

Agent processes talk a line-oriented text protocol, one request per line
and exactly one response per request, in order, on the same connection.
Fields are space-separated; reals are decimal with up to 12 significant
digits. Verbs:

    HELLO                      -> OK AGENT <id>
    GETQ <state>               -> OK QROW <q_left> <q_right> <q_up> <q_down>
    DIRECT <state>             -> OK ACT <LEFT|RIGHT|UP|DOWN>
    UPDATE <s> <a> <r> <s'>    -> OK Q <new_value>       (a is an action name)
    RESET                      -> OK     (period boundary: zero table + clocks)
    BYE                        -> OK     (close the session)

Errors come back as ``ERR <code> <message>`` with the connection left
open: code 1 for unparseable requests, 2 for out-of-range values, 3 for
state errors (anything but HELLO before registering, or a second HELLO).

The server serializes all table mutation and clock advancement behind one
lock, applying updates in arrival order, so reads never observe a partial
update. Its step clock is ``updates_applied // registered_agents``; the
learning rate and the DIRECT sampling temperature both follow it through
the configured decay schedules. Every HELLO, UPDATE, and RESET is appended
to an in-memory write-ahead log (optionally streamed to a file), and
:func:`replay_log` folds that log into a fresh table with the exact same
arithmetic, which is the equivalence oracle for concurrent runs.

The DIRECT sampler draws from the same generator stream an in-process
engine would give its first agent, so a single networked agent reproduces
a single-agent in-process run bit for bit.
"""

from __future__ import annotations

import math
import socket
import socketserver
import threading
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .learning import LearnParams, QTable, decay_value, q_update, sample_action, softmax_list
from .mdp import Action, GridSpec
from .seeds import STREAM_AGENT, STREAM_RUN, derive_seed

__all__ = [
    "LogEntry",
    "StoreClient",
    "StoreError",
    "StoreConnectionError",
    "StoreProtocolError",
    "StoreRequestError",
    "StoreTimeout",
    "StoreServer",
    "parse_log_line",
    "replay_log",
    "server_seed",
]

ERR_PARSE = 1
ERR_RANGE = 2
ERR_STATE = 3

_MAX_LINE = 4096

_ACTION_NAMES = {a.name: a for a in Action}


def _fmt_real(x: float) -> str:
    return format(x, ".12g")


def server_seed(master_seed: int) -> int:
    """The DIRECT sampling stream: agent 0's stream of replication 0."""
    return derive_seed(derive_seed(master_seed, STREAM_RUN, 0), STREAM_AGENT, 0)


@dataclass(frozen=True)
class LogEntry:
    """One mutating request, in arrival order."""

    kind: str  # "hello" | "update" | "reset"
    s: int = 0
    a: Action = Action.LEFT
    r: float = 0.0
    s_next: int = 0

    def line(self) -> str:
        if self.kind == "update":
            return f"UPDATE {self.s} {self.a.name} {self.r!r} {self.s_next}"
        return self.kind.upper()


def parse_log_line(line: str) -> LogEntry:
    parts = line.split()
    if parts[0] == "HELLO":
        return LogEntry("hello")
    if parts[0] == "RESET":
        return LogEntry("reset")
    if parts[0] == "UPDATE" and len(parts) == 5:
        return LogEntry("update", int(parts[1]), _ACTION_NAMES[parts[2]], float(parts[3]), int(parts[4]))
    raise ValueError(f"bad log line: {line!r}")


def replay_log(entries: Iterable[LogEntry], num_states: int, params: LearnParams) -> QTable:
    """Fold a write-ahead log into a fresh table, serially.

    Mirrors the server's apply rule exactly: the clock is
    ``updates // agents`` at each update's arrival, updates use the decayed
    alpha at that clock, RESET zeroes the table and the update counter.
    """
    q = QTable(num_states)
    agents = 0
    updates = 0
    for e in entries:
        if e.kind == "hello":
            agents += 1
        elif e.kind == "reset":
            q.reset()
            updates = 0
        elif e.kind == "update":
            t = updates // max(1, agents)
            alpha = decay_value(params.alpha_schedule, t)
            q_update(q, e.s, e.a, e.r, e.s_next, alpha, params.gamma)
            updates += 1
        else:
            raise ValueError(f"unknown log entry kind {e.kind!r}")
    return q


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        store: StoreServer = self.server.store  # type: ignore[attr-defined]
        agent_id: int | None = None
        while True:
            try:
                raw = self.rfile.readline(_MAX_LINE + 1)
            except OSError:
                return
            if not raw:
                return
            if len(raw) > _MAX_LINE:
                self._reply(f"ERR {ERR_PARSE} line too long")
                continue
            try:
                line = raw.decode("ascii").strip()
            except UnicodeDecodeError:
                self._reply(f"ERR {ERR_PARSE} not ascii")
                continue
            if not line:
                continue
            response, agent_id, close = store.handle_request(line, agent_id)
            self._reply(response)
            if close:
                return

    def _reply(self, text: str) -> None:
        try:
            self.wfile.write((text + "\n").encode("ascii"))
        except OSError:
            pass


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class StoreServer:
    """Owns the shared table, the decay clocks, the DIRECT rng, and the log."""

    def __init__(
        self,
        grid: GridSpec,
        params: LearnParams,
        seed: int,
        host: str = "127.0.0.1",
        port: int = 0,
        wal_file: IO[str] | None = None,
    ):
        self.grid = grid
        self.params = params
        self.qtable = QTable(grid.num_states)
        self.log: list[LogEntry] = []
        self._lock = threading.Lock()
        self._agents = 0
        self._updates = 0
        self._rng = np.random.Generator(np.random.PCG64(seed))
        self._wal_file = wal_file
        self._server = _Server((host, port), _Handler)
        self._server.store = self  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    def start(self) -> None:
        """Serve on a background thread (tests and the demo use this)."""
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def shutdown(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def snapshot(self) -> QTable:
        with self._lock:
            return self.qtable.copy()

    def log_entries(self) -> list[LogEntry]:
        with self._lock:
            return list(self.log)

    def _append_log(self, entry: LogEntry) -> None:
        self.log.append(entry)
        if self._wal_file is not None:
            self._wal_file.write(entry.line() + "\n")
            self._wal_file.flush()

    # Request handling. Everything that touches the table, the clocks, the
    # rng, or the log runs under the one lock: arrival order is lock order.
    def handle_request(self, line: str, agent_id: int | None) -> tuple[str, int | None, bool]:
        parts = line.split()
        verb = parts[0].upper()

        if verb == "HELLO":
            if len(parts) != 1:
                return f"ERR {ERR_PARSE} HELLO takes no arguments", agent_id, False
            if agent_id is not None:
                return f"ERR {ERR_STATE} already registered as agent {agent_id}", agent_id, False
            with self._lock:
                new_id = self._agents
                self._agents += 1
                self._append_log(LogEntry("hello"))
            return f"OK AGENT {new_id}", new_id, False

        if verb == "BYE":
            return "OK", agent_id, True

        if verb not in ("GETQ", "DIRECT", "UPDATE", "RESET"):
            return f"ERR {ERR_PARSE} unknown verb {verb}", agent_id, False
        if agent_id is None:
            return f"ERR {ERR_STATE} say HELLO first", agent_id, False

        if verb == "RESET":
            if len(parts) != 1:
                return f"ERR {ERR_PARSE} RESET takes no arguments", agent_id, False
            with self._lock:
                self.qtable.reset()
                self._updates = 0
                self._append_log(LogEntry("reset"))
            return "OK", agent_id, False

        if verb == "GETQ":
            state = self._parse_state(parts, 2)
            if isinstance(state, str):
                return state, agent_id, False
            with self._lock:
                row = self.qtable.values[state].tolist()
            return "OK QROW " + " ".join(_fmt_real(v) for v in row), agent_id, False

        if verb == "DIRECT":
            state = self._parse_state(parts, 2)
            if isinstance(state, str):
                return state, agent_id, False
            with self._lock:
                t = self._updates // max(1, self._agents)
                temperature = decay_value(self.params.temp_schedule, t)
                probs = softmax_list(self.qtable.values[state].tolist(), temperature)
                action = sample_action(probs, self._rng)
            return f"OK ACT {action.name}", agent_id, False

        # UPDATE <s> <a> <r> <s_next>
        if len(parts) != 5:
            return f"ERR {ERR_PARSE} UPDATE takes 4 arguments", agent_id, False
        try:
            s = int(parts[1])
            s_next = int(parts[4])
        except ValueError:
            return f"ERR {ERR_PARSE} state indices must be integers", agent_id, False
        action = _ACTION_NAMES.get(parts[2].upper())
        if action is None:
            return f"ERR {ERR_PARSE} unknown action {parts[2]}", agent_id, False
        try:
            r = float(parts[3])
        except ValueError:
            return f"ERR {ERR_PARSE} reward must be a number", agent_id, False
        n = self.grid.num_states
        if not (0 <= s < n and 0 <= s_next < n):
            return f"ERR {ERR_RANGE} state index out of range", agent_id, False
        if not (math.isfinite(r) and r >= 0):
            return f"ERR {ERR_RANGE} reward must be finite and nonnegative", agent_id, False
        with self._lock:
            t = self._updates // max(1, self._agents)
            alpha = decay_value(self.params.alpha_schedule, t)
            new_q = q_update(self.qtable, s, action, r, s_next, alpha, self.params.gamma)
            self._updates += 1
            self._append_log(LogEntry("update", s, action, r, s_next))
        return f"OK Q {_fmt_real(new_q)}", agent_id, False

    def _parse_state(self, parts: list[str], expected: int) -> int | str:
        if len(parts) != expected:
            return f"ERR {ERR_PARSE} {parts[0]} takes {expected - 1} argument"
        try:
            state = int(parts[1])
        except ValueError:
            return f"ERR {ERR_PARSE} state index must be an integer"
        if not 0 <= state < self.grid.num_states:
            return f"ERR {ERR_RANGE} state index out of range"
        return state


class StoreError(Exception):
    """Base class for client-side failures."""


class StoreTimeout(StoreError):
    """The server did not answer within the timeout."""


class StoreConnectionError(StoreError):
    """Could not connect, or the connection dropped mid-session."""


class StoreProtocolError(StoreError):
    """The server answered with something outside the protocol."""


class StoreRequestError(StoreError):
    """The server answered ERR; carries the numeric code."""

    def __init__(self, code: int, reason: str):
        super().__init__(f"ERR {code}: {reason}")
        self.code = code
        self.reason = reason


class StoreClient:
    """Blocking request/response handle; one per agent process."""

    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self.agent_id: int | None = None
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except socket.timeout as e:
            raise StoreTimeout(f"connect to {host}:{port} timed out") from e
        except OSError as e:
            raise StoreConnectionError(f"cannot connect to {host}:{port}: {e}") from e
        self._file = self._sock.makefile("rwb")

    def __enter__(self) -> "StoreClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        try:
            self._file.close()
            self._sock.close()
        except OSError:
            pass

    def _request(self, line: str) -> list[str]:
        try:
            self._file.write((line + "\n").encode("ascii"))
            self._file.flush()
            raw = self._file.readline()
        except socket.timeout as e:
            raise StoreTimeout(f"no response to {line.split()[0]}") from e
        except OSError as e:
            raise StoreConnectionError(f"connection lost: {e}") from e
        if not raw:
            raise StoreConnectionError("server closed the connection")
        parts = raw.decode("ascii", "replace").split()
        if not parts:
            raise StoreProtocolError("empty response")
        if parts[0] == "ERR":
            try:
                code = int(parts[1])
            except (IndexError, ValueError):
                raise StoreProtocolError(f"malformed error: {raw!r}") from None
            raise StoreRequestError(code, " ".join(parts[2:]))
        if parts[0] != "OK":
            raise StoreProtocolError(f"unexpected response: {raw!r}")
        return parts[1:]

    def hello(self) -> int:
        parts = self._request("HELLO")
        if len(parts) != 2 or parts[0] != "AGENT":
            raise StoreProtocolError(f"bad HELLO response: {parts}")
        self.agent_id = int(parts[1])
        return self.agent_id

    def get_q(self, state: int) -> list[float]:
        parts = self._request(f"GETQ {state}")
        if len(parts) != 5 or parts[0] != "QROW":
            raise StoreProtocolError(f"bad GETQ response: {parts}")
        return [float(v) for v in parts[1:]]

    def direct(self, state: int) -> Action:
        parts = self._request(f"DIRECT {state}")
        if len(parts) != 2 or parts[0] != "ACT" or parts[1] not in _ACTION_NAMES:
            raise StoreProtocolError(f"bad DIRECT response: {parts}")
        return _ACTION_NAMES[parts[1]]

    def update(self, s: int, a: Action, r: float, s_next: int) -> float:
        parts = self._request(f"UPDATE {s} {Action(a).name} {_fmt_real(r)} {s_next}")
        if len(parts) != 2 or parts[0] != "Q":
            raise StoreProtocolError(f"bad UPDATE response: {parts}")
        return float(parts[1])

    def reset(self) -> None:
        if self._request("RESET"):
            raise StoreProtocolError("bad RESET response")

    def bye(self) -> None:
        if self._request("BYE"):
            raise StoreProtocolError("bad BYE response")
        self.close()


def open_session(host: str, port: int, timeout: float = 10.0) -> StoreClient:
    """Connect and register: the usual way an agent process starts."""
    client = StoreClient(host, port, timeout)
    client.hello()
    return client
