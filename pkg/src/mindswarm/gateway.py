"""Command gateway: bridges decoder output and operator consoles to the
swarm simulator.

One asyncio loop owns everything: per-connection readers validate and
enqueue commands, a single tick task applies them between simulator steps
(so state has exactly one writer), and snapshot broadcasts fan immutable
dicts out to WebSocket subscribers. ``run_session`` hosts that loop in a
daemon thread and returns a thread-safe handle, which keeps the CLI and the
test suite synchronous.

Transport rules: TCP connections are decoder-side (mode_set refused there);
WebSocket connections are operator-side and auto-subscribe to snapshots.
Every outbound message carries a per-connection monotone seq.
"""

from __future__ import annotations

import asyncio
import http
import json
import mimetypes
import threading
from pathlib import Path

from websockets.asyncio.server import serve as ws_serve
from websockets.datastructures import Headers
from websockets.exceptions import ConnectionClosed
from websockets.http11 import Response

from . import protocol
from .protocol import Command, ProtocolError, SessionConfig, validate_command
from .swarm import (
    IllegalCommand,
    SwarmParams,
    SwarmState,
    apply_command,
    snapshot_dict,
    step,
)


class GatewayStartupError(RuntimeError):
    pass


class _Session:
    def __init__(self, cfg: SessionConfig, state: SwarmState, params: SwarmParams,
                 static_dir: str | None = None):
        self.cfg = cfg
        self.state = state
        self.params = params
        self.static_dir = Path(static_dir) if static_dir else None
        self.queue: asyncio.Queue = asyncio.Queue()
        self.subscribers: set = set()
        self.stop_event = asyncio.Event()
        self.t0 = 0.0
        self.loop: asyncio.AbstractEventLoop | None = None
        self.tcp_port = None
        self.ws_port = None
        self.latest_snapshot: dict | None = None
        self.log_lines: list = []
        self._log_fh = open(cfg.log_path, "w", encoding="utf-8") if cfg.log_path else None

    # -- time and logging ---------------------------------------------------

    def now_ms(self) -> int:
        if self.loop is None:
            return 0
        return int((self.loop.time() - self.t0) * 1000.0)

    def log(self, entry: dict) -> None:
        line = json.dumps(entry, sort_keys=True, separators=(",", ":"))
        self.log_lines.append(line)
        if self._log_fh:
            # append-only and durable line by line; command rate is low
            self._log_fh.write(line + "\n")
            self._log_fh.flush()

    def close_log(self) -> None:
        if self._log_fh:
            self._log_fh.flush()
            self._log_fh.close()
            self._log_fh = None

    # -- tick loop ------------------------------------------------------------

    async def tick_loop(self):
        loop = asyncio.get_running_loop()
        tick_dt = 1.0 / self.cfg.tick_rate
        snap_every = max(1, int(round(self.cfg.tick_rate / self.cfg.snapshot_rate)))
        next_t = loop.time() + tick_dt
        while not self.stop_event.is_set():
            delay = next_t - loop.time()
            if delay > 0:
                try:
                    await asyncio.wait_for(self.stop_event.wait(), timeout=delay)
                    break
                except asyncio.TimeoutError:
                    pass
            self.drain_commands()
            self.state = step(self.state, self.params)
            if self.state.tick % snap_every == 0:
                self.broadcast_snapshot()
            next_t += tick_dt

    def drain_commands(self):
        while True:
            try:
                cmd, reply = self.queue.get_nowait()
            except asyncio.QueueEmpty:
                return
            try:
                self.state = apply_command(self.state, cmd.paradigm, cmd.label, self.params)
            except IllegalCommand as exc:
                self.log({
                    "kind": "rejected", "reason": "illegal_command",
                    "ts": self.now_ms(), "seq": cmd.seq,
                    "paradigm": cmd.paradigm, "label": cmd.label,
                })
                reply("error", reason="illegal_command", detail=str(exc), echo_seq=cmd.seq)
                continue
            self.log({
                "kind": "applied", "tick": self.state.tick, "ts": self.now_ms(),
                "seq": cmd.seq, "paradigm": cmd.paradigm, "label": cmd.label,
                "confidence": cmd.confidence, "origin": cmd.origin,
            })
            reply("ack", ack_seq=cmd.seq, applied_tick=self.state.tick)

    def broadcast_snapshot(self):
        snap = snapshot_dict(self.state, self.params)
        snap["active_paradigm"] = self.cfg.active_paradigm
        self.latest_snapshot = snap
        for outbox in self.subscribers:
            if outbox.qsize() > 4:  # slow consumer: shed the oldest snapshot
                try:
                    outbox.get_nowait()
                except asyncio.QueueEmpty:
                    pass
            outbox.put_nowait(("state", snap))

    # -- shared message handling ----------------------------------------------

    def handle_line(self, raw, conn_state: dict, reply, operator: bool):
        """Process one inbound line; ``reply(type, **fields)`` answers it."""
        try:
            msg = protocol.decode(raw)
        except ProtocolError as exc:
            reply("error", reason=exc.reason, detail=str(exc), echo_seq=exc.seq)
            return
        last_seq = conn_state.get("last_seq")
        if last_seq is not None and msg.seq <= last_seq:
            reply("error", reason="seq_not_monotonic",
                  detail=f"seq {msg.seq} after {last_seq}", echo_seq=msg.seq)
            return
        conn_state["last_seq"] = msg.seq

        if msg.type == "command":
            cmd = msg.command
            if operator and "origin" not in msg.fields:
                cmd = Command(cmd.paradigm, cmd.label, cmd.confidence,
                              cmd.ts, cmd.seq, origin="operator")
            accepted, reason = validate_command(cmd, self.cfg)
            if not accepted:
                self.log({
                    "kind": "rejected", "reason": reason, "ts": self.now_ms(),
                    "seq": cmd.seq, "paradigm": cmd.paradigm, "label": cmd.label,
                })
                reply("error", reason=reason, echo_seq=cmd.seq)
                return
            self.queue.put_nowait((cmd, reply))
        elif msg.type == "mode_set":
            if not operator:
                reply("error", reason="mode_set_not_allowed",
                      detail="mode_set only accepted from operator connections",
                      echo_seq=msg.seq)
                return
            self.cfg.active_paradigm = msg.fields["paradigm"]
            self.log({"kind": "mode_set", "ts": self.now_ms(), "seq": msg.seq,
                      "paradigm": self.cfg.active_paradigm})
            reply("ack", ack_seq=msg.seq, active_paradigm=self.cfg.active_paradigm)
        else:
            reply("error", reason="unexpected_type",
                  detail=f"gateway does not accept {msg.type!r}", echo_seq=msg.seq)

    # -- TCP ---------------------------------------------------------------------

    async def tcp_handler(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        conn_state: dict = {"out_seq": 0}

        def reply(msg_type: str, **fields):
            if writer.is_closing():
                return
            seq = conn_state["out_seq"]
            conn_state["out_seq"] = seq + 1
            writer.write(protocol.encode(msg_type, seq, self.now_ms(), **fields))

        try:
            while not self.stop_event.is_set():
                try:
                    raw = await reader.readline()
                except (ConnectionResetError, ValueError):
                    reply("error", reason="line_too_long", echo_seq=None)
                    break
                if not raw:
                    break
                line = raw.rstrip(b"\r\n")
                if not line:
                    continue
                self.handle_line(line, conn_state, reply, operator=False)
                try:
                    await writer.drain()
                except ConnectionResetError:
                    break
        finally:
            try:
                writer.close()
            except Exception:
                pass

    # -- WebSocket ------------------------------------------------------------------

    async def ws_handler(self, websocket):
        path = websocket.request.path if websocket.request else "/ws"
        if path.split("?")[0] != "/ws":
            await websocket.close(code=1008, reason="connect to /ws")
            return
        conn_state: dict = {}
        outbox: asyncio.Queue = asyncio.Queue()
        self.subscribers.add(outbox)

        def reply(msg_type: str, **fields):
            outbox.put_nowait((msg_type, fields))

        async def pump():
            out_seq = 0
            while True:
                msg_type, fields = await outbox.get()
                doc = {"v": 1, "type": msg_type, "seq": out_seq, "ts": self.now_ms()}
                doc.update(fields)
                out_seq += 1
                await websocket.send(json.dumps(doc, sort_keys=True, separators=(",", ":")))

        pump_task = asyncio.create_task(pump())
        try:
            async for raw in websocket:
                if isinstance(raw, str):
                    raw = raw.encode("utf-8")
                self.handle_line(raw, conn_state, reply, operator=True)
        except ConnectionClosed:
            pass
        finally:
            pump_task.cancel()
            self.subscribers.discard(outbox)

    def process_request(self, connection, request):
        """Serve console assets over the WS port for non-/ws paths."""
        path = request.path.split("?")[0]
        if path == "/ws":
            return None
        if self.static_dir is None:
            return connection.respond(http.HTTPStatus.NOT_FOUND, "no static assets\n")
        rel = "index.html" if path in ("", "/") else path.lstrip("/")
        target = (self.static_dir / rel).resolve()
        if not str(target).startswith(str(self.static_dir.resolve())) or not target.is_file():
            return connection.respond(http.HTTPStatus.NOT_FOUND, "not found\n")
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        body = target.read_bytes()
        return Response(
            http.HTTPStatus.OK, "OK",
            Headers([("Content-Type", ctype), ("Content-Length", str(len(body)))]),
            body,
        )

    # -- lifecycle ---------------------------------------------------------------------

    async def main(self, started: threading.Event, failure: list):
        self.loop = asyncio.get_running_loop()
        self.t0 = self.loop.time()
        try:
            tcp_server = await asyncio.start_server(
                self.tcp_handler, self.cfg.tcp_host, self.cfg.tcp_port
            )
            ws_server = await ws_serve(
                self.ws_handler, self.cfg.ws_host, self.cfg.ws_port,
                process_request=self.process_request,
            )
        except OSError as exc:
            failure.append(GatewayStartupError(f"endpoint bind failed: {exc}"))
            started.set()
            return
        self.tcp_port = tcp_server.sockets[0].getsockname()[1]
        self.ws_port = next(iter(ws_server.sockets)).getsockname()[1]
        started.set()

        tick_task = asyncio.create_task(self.tick_loop())
        await self.stop_event.wait()
        if not tick_task.done():
            tick_task.cancel()
        tcp_server.close()
        ws_server.close()
        await tcp_server.wait_closed()
        self.drain_commands()  # apply anything accepted before shutdown
        self.close_log()


class SessionHandle:
    """Thread-safe view of a running gateway session."""

    def __init__(self, session: _Session, thread: threading.Thread):
        self._session = session
        self._thread = thread

    @property
    def tcp_port(self) -> int:
        return self._session.tcp_port

    @property
    def ws_port(self) -> int:
        return self._session.ws_port

    @property
    def log_lines(self) -> list:
        return list(self._session.log_lines)

    def latest_snapshot(self):
        return self._session.latest_snapshot

    def current_tick(self) -> int:
        return self._session.state.tick

    def active_paradigm(self) -> str:
        return self._session.cfg.active_paradigm

    def final_state(self) -> SwarmState:
        return self._session.state

    def stop(self, timeout: float = 5.0):
        loop = self._session.loop
        if loop is not None and not loop.is_closed():
            try:
                loop.call_soon_threadsafe(self._session.stop_event.set)
            except RuntimeError:
                pass
        self._thread.join(timeout)


def run_session(cfg: SessionConfig, state: SwarmState, params: SwarmParams,
                static_dir: str | None = None) -> SessionHandle:
    """Start the gateway in a background thread; returns once both endpoints
    are bound (raising GatewayStartupError if either bind fails)."""
    session = _Session(cfg, state, params, static_dir=static_dir)
    started = threading.Event()
    failure: list = []

    def runner():
        asyncio.run(session.main(started, failure))

    thread = threading.Thread(target=runner, name="mindswarm-gateway", daemon=True)
    thread.start()
    if not started.wait(timeout=10.0):
        raise GatewayStartupError("gateway did not start within 10 s")
    if failure:
        thread.join(timeout=1.0)
        raise failure[0]
    return SessionHandle(session, thread)
