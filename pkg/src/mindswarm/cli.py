"""Operator command line: synth, train, eval, decode-replay, sim, serve.

Exit codes are a stable contract: 0 ok, 2 bad input, 3 insufficient data,
4 connectivity failure, 5 simulation fault. Option values resolve through
flag > environment variable > config file > built-in default; pass
--verbose to print the resolved configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import socket
import sys
import time

import numpy as np

from . import analysis, swarm
from .crossval import CvError
from .epochs import DEFAULT_WINDOWS
from .filtering import FilterDesignError, FilterLengthError
from .gateway import GatewayStartupError, run_session
from .ica import IcaError
from .pipeline import (
    DEFAULT_SEED,
    PipelineError,
    PipelineFormatError,
    load_pipeline,
    save_pipeline,
)
from .protocol import Command, SessionConfig, encode_command, decode
from .recording import RecordingFormatError, read_recording, write_recording
from .synth import SynthSpecError, compact_spec, generate, spec_from_dict, spec_from_json

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_INSUFFICIENT_DATA = 3
EXIT_CONNECTIVITY = 4
EXIT_SIMULATION_FAULT = 5

ENV_TCP = "MINDSWARM_TCP"
ENV_WS = "MINDSWARM_WS"
ENV_SEED = "MINDSWARM_SEED"


class CliInputError(Exception):
    def __init__(self, message, exit_code=EXIT_BAD_INPUT):
        super().__init__(message)
        self.exit_code = exit_code


def _load_config_file(path):
    if not path:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliInputError(f"cannot read config file {path}: {exc}")
    if not isinstance(doc, dict):
        raise CliInputError("config file must hold a JSON object")
    return doc


def _resolve(name, flag_value, env_var, file_cfg, default, cast=str):
    """flag > env var > config file > built-in."""
    if flag_value is not None:
        return flag_value, "flag"
    if env_var and os.environ.get(env_var):
        return cast(os.environ[env_var]), f"env {env_var}"
    if name in file_cfg:
        return cast(file_cfg[name]), "config file"
    return default, "default"


def _parse_endpoint(text):
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise CliInputError(f"endpoint must be host:port, got {text!r}")
    return host, int(port)


def _print_resolved(args, resolved):
    if getattr(args, "verbose", False):
        for key, (value, source) in sorted(resolved.items()):
            print(f"# {key} = {value!r}  ({source})")


def _seed_for(args, file_cfg):
    return _resolve("seed", getattr(args, "seed", None), ENV_SEED, file_cfg,
                    DEFAULT_SEED, cast=int)


# --- synth -----------------------------------------------------------------


def cmd_synth(args) -> int:
    file_cfg = _load_config_file(args.config)
    seed, seed_src = _seed_for(args, file_cfg)
    if args.spec:
        try:
            spec = spec_from_json(args.spec)
        except FileNotFoundError:
            raise CliInputError(f"spec file {args.spec} not found")
        except (json.JSONDecodeError, SynthSpecError, KeyError, TypeError, ValueError) as exc:
            raise CliInputError(f"bad spec: {exc}")
        if args.seed is not None:
            spec.seed = seed
    else:
        if not args.paradigm:
            raise CliInputError("either --spec or --paradigm is required")
        if args.compact:
            spec = compact_spec(args.paradigm, seed=seed)
        else:
            spec = spec_from_dict({"paradigm": args.paradigm, "seed": seed})
    if args.trials is not None:
        spec.trials_per_class = args.trials
    _print_resolved(args, {"seed": (spec.seed, seed_src), "out": (args.out, "flag")})

    rec = generate(spec)
    write_recording(rec, args.out)
    counts = {}
    for ev in rec.events:
        counts[ev.label] = counts.get(ev.label, 0) + 1
    for label in spec.classes:
        print(f"{label}: {counts.get(label, 0)} trials")
    print(f"total: {len(rec.events)} trials -> {args.out}")
    return EXIT_OK


# --- train / eval ------------------------------------------------------------


def _preprocess_opts(args) -> analysis.PreprocessOptions:
    opts = analysis.PreprocessOptions()
    if args.band:
        opts.band = (args.band[0], args.band[1])
    if getattr(args, "no_ica", False):
        opts.run_ica = False
    if getattr(args, "ica_components", None):
        opts.ica_components = args.ica_components
    if getattr(args, "target_fs", None):
        opts.target_fs = args.target_fs
    return opts


def _read_rec(path):
    try:
        return read_recording(path)
    except FileNotFoundError:
        raise CliInputError(f"recording {path} not found")
    except RecordingFormatError as exc:
        raise CliInputError(f"bad recording container ({exc.code}): {exc}")


def cmd_train(args) -> int:
    file_cfg = _load_config_file(args.config)
    seed, seed_src = _seed_for(args, file_cfg)
    rec = _read_rec(args.rec)
    opts = _preprocess_opts(args)
    opts.ica_seed = seed
    paradigm = args.paradigm or analysis.infer_paradigm(rec)
    window = tuple(args.window) if args.window else DEFAULT_WINDOWS[paradigm]
    from .pipeline import PipelineConfig

    config = PipelineConfig(
        paradigm=paradigm, band=opts.band, window=window,
        sample_rate=opts.target_fs, n_pairs=args.n_pairs,
        shrinkage=args.shrinkage, seed=seed,
    )
    _print_resolved(args, {"seed": (seed, seed_src), "window": (window, "flag" if args.window else "default")})
    try:
        pipeline = analysis.train_pipeline_on_recording(
            rec, paradigm=paradigm, window=window,
            preprocess_opts=opts, config=config,
        )
    except (PipelineError, IcaError, FilterLengthError) as exc:
        raise CliInputError(str(exc), exit_code=EXIT_INSUFFICIENT_DATA)
    save_pipeline(pipeline, args.out)
    print(f"trained {paradigm} pipeline on {args.rec} -> {args.out}")
    print(f"classes: {', '.join(pipeline.class_list)}")
    return EXIT_OK


def cmd_eval(args) -> int:
    file_cfg = _load_config_file(args.config)
    seed, seed_src = _seed_for(args, file_cfg)
    rec = _read_rec(args.rec)
    opts = _preprocess_opts(args)
    opts.ica_seed = seed
    paradigm = args.paradigm or analysis.infer_paradigm(rec)
    window = tuple(args.window) if args.window else DEFAULT_WINDOWS[paradigm]
    _print_resolved(args, {"seed": (seed, seed_src), "k": (args.k, "flag"),
                           "repeats": (args.repeats, "flag")})
    try:
        report = analysis.evaluate_recording(
            rec, paradigm=paradigm, window=window, preprocess_opts=opts,
            k=args.k, repeats=args.repeats, seed=seed,
            shuffle_labels=args.shuffle_labels,
        )
    except (CvError, PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT_DATA
    except (IcaError, FilterLengthError, FilterDesignError) as exc:
        raise CliInputError(str(exc))
    doc = report.to_dict()
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
            fh.write("\n")
    print(f"paradigm: {report.paradigm}  classes: {', '.join(report.classes)}")
    print(f"mean accuracy: {report.mean:.4f} (+/- {report.std:.4f}) "
          f"over {report.k}x{report.repeats} folds")
    print(f"chance level: {report.chance_level:.4f}")
    return EXIT_OK


# --- decode-replay --------------------------------------------------------------


def cmd_decode_replay(args) -> int:
    file_cfg = _load_config_file(args.config)
    if args.speed is None or args.speed <= 0:
        raise CliInputError("--speed must be > 0")
    endpoint, ep_src = _resolve("tcp", args.endpoint, ENV_TCP, file_cfg, "127.0.0.1:7070")
    host, port = _parse_endpoint(endpoint)
    rec = _read_rec(args.rec)
    try:
        pipeline = load_pipeline(args.pipeline)
    except FileNotFoundError:
        raise CliInputError(f"pipeline {args.pipeline} not found")
    except PipelineFormatError as exc:
        raise CliInputError(f"bad pipeline bundle ({exc.code}): {exc}")

    opts = _preprocess_opts(args)
    opts.band = pipeline.config.band
    opts.target_fs = pipeline.config.sample_rate
    cleaned, _ = analysis.preprocess(rec, opts)
    epochs, excluded = analysis.epoch_for_paradigm(
        cleaned, pipeline.paradigm, pipeline.config.window
    )
    if excluded:
        print(f"warning: {len(excluded)} trials excluded at recording edges")
    markers = [e for e in cleaned.events_of(pipeline.paradigm)
               if e not in excluded]
    _print_resolved(args, {"endpoint": (endpoint, ep_src), "speed": (args.speed, "flag")})

    from .pipeline import predict

    try:
        sock = socket.create_connection((host, port), timeout=5.0)
    except OSError as exc:
        print(f"error: gateway unreachable at {host}:{port}: {exc}", file=sys.stderr)
        return EXIT_CONNECTIVITY

    accepted = rejected = 0
    reject_reasons: dict = {}
    t_session0 = markers[0].sample_index / cleaned.sample_rate if markers else 0.0
    wall0 = time.monotonic()
    fh = sock.makefile("rb")
    try:
        for i, (trial, marker) in enumerate(zip(epochs.data, markers)):
            due = (marker.sample_index / cleaned.sample_rate - t_session0) / args.speed
            lag = due - (time.monotonic() - wall0)
            if lag > 0:
                time.sleep(lag)
            label, confidence, _ = predict(pipeline, trial)
            cmd = Command(
                paradigm=pipeline.paradigm, label=label,
                confidence=round(confidence, 6),
                ts=int(due * 1000), seq=i + 1,
            )
            sock.sendall(encode_command(cmd))
            line = fh.readline()
            if not line:
                print("error: gateway closed connection", file=sys.stderr)
                return EXIT_CONNECTIVITY
            msg = decode(line.rstrip(b"\n"))
            if msg.type == "ack":
                accepted += 1
            else:
                rejected += 1
                reason = msg.fields.get("reason", "unknown")
                reject_reasons[reason] = reject_reasons.get(reason, 0) + 1
    finally:
        sock.close()

    print(f"sent {accepted + rejected} commands: {accepted} accepted, {rejected} rejected")
    for reason, count in sorted(reject_reasons.items()):
        print(f"  rejected {reason}: {count}")
    return EXIT_OK


# --- sim -------------------------------------------------------------------------


def cmd_sim(args) -> int:
    try:
        doc = swarm.load_scenario(args.scenario)
    except FileNotFoundError:
        raise CliInputError(f"scenario {args.scenario} not found")
    except swarm.ScenarioError as exc:
        raise CliInputError(str(exc))
    try:
        _, csv_text = swarm.run_scenario(doc, metrics_every=args.metrics_every)
    except swarm.ScenarioError as exc:
        raise CliInputError(str(exc))
    except swarm.SimulationDiverged as exc:
        print(f"error: simulation diverged at tick {exc.tick}", file=sys.stderr)
        return EXIT_SIMULATION_FAULT
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(csv_text)
        print(f"wrote metrics -> {args.csv}")
    else:
        sys.stdout.write(csv_text)
    return EXIT_OK


# --- serve ------------------------------------------------------------------------


def cmd_serve(args) -> int:
    file_cfg = _load_config_file(args.config)
    seed, _ = _seed_for(args, file_cfg)
    tcp, tcp_src = _resolve("tcp", args.tcp, ENV_TCP, file_cfg, "127.0.0.1:7070")
    ws, ws_src = _resolve("ws", args.ws, ENV_WS, file_cfg, "127.0.0.1:7071")
    tcp_host, tcp_port = _parse_endpoint(tcp)
    ws_host, ws_port = _parse_endpoint(ws)
    cfg = SessionConfig(
        active_paradigm=args.paradigm,
        confidence_threshold=args.threshold,
        tick_rate=args.tick_rate,
        snapshot_rate=args.snapshot_rate,
        tcp_host=tcp_host, tcp_port=tcp_port,
        ws_host=ws_host, ws_port=ws_port,
        log_path=args.log,
    )
    params = swarm.SwarmParams(n_agents=args.agents)
    state = swarm.initial_state(params, seed=seed, box=args.box)
    _print_resolved(args, {"tcp": (tcp, tcp_src), "ws": (ws, ws_src),
                           "seed": (seed, "resolved")})
    try:
        handle = run_session(cfg, state, params, static_dir=args.static)
    except GatewayStartupError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONNECTIVITY
    print(f"gateway up: tcp {tcp_host}:{handle.tcp_port}  "
          f"ws {ws_host}:{handle.ws_port}/ws  paradigm {args.paradigm}")
    if args.log:
        print(f"session log -> {args.log}")

    if args.duration is not None:
        time.sleep(args.duration)
        handle.stop()
        print(f"stopped after {args.duration} s at tick {handle.current_tick()}")
        return EXIT_OK

    stop = {"flag": False}

    def on_sigint(signum, frame):
        stop["flag"] = True

    signal.signal(signal.SIGINT, on_sigint)
    signal.signal(signal.SIGTERM, on_sigint)
    while not stop["flag"]:
        time.sleep(0.2)
    handle.stop()
    print(f"stopped at tick {handle.current_tick()}")
    return EXIT_OK


# --- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mindswarm",
        description="imagery decoding pipeline + swarm simulator toolkit",
    )
    parser.add_argument("--config", help="JSON config file for defaults")
    parser.add_argument("--verbose", action="store_true", help="print resolved options")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic session recording")
    p.add_argument("--paradigm", choices=("MI", "VI", "SI"))
    p.add_argument("--spec", help="synth spec JSON (overrides --paradigm defaults)")
    p.add_argument("--out", required=True, help="output .eegr path")
    p.add_argument("--trials", type=int, help="trials per class override")
    p.add_argument("--seed", type=int)
    p.add_argument("--compact", action="store_true",
                   help="small fast preset (16 ch, 200 Hz, 1 s imagery)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="fit a decoder pipeline on a recording")
    p.add_argument("--rec", required=True)
    p.add_argument("--out", required=True, help="output .bcip bundle path")
    p.add_argument("--paradigm", choices=("MI", "VI", "SI"))
    p.add_argument("--band", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--window", nargs=2, type=float, metavar=("START", "END"))
    p.add_argument("--n-pairs", type=int, default=3)
    p.add_argument("--shrinkage", type=float, default=0.05)
    p.add_argument("--target-fs", type=float, default=100.0)
    p.add_argument("--no-ica", action="store_true")
    p.add_argument("--ica-components", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="repeated cross-validation report")
    p.add_argument("--rec", required=True)
    p.add_argument("--report", help="write CvReport JSON here")
    p.add_argument("--paradigm", choices=("MI", "VI", "SI"))
    p.add_argument("--band", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--window", nargs=2, type=float, metavar=("START", "END"))
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--target-fs", type=float, default=100.0)
    p.add_argument("--no-ica", action="store_true")
    p.add_argument("--ica-components", type=int)
    p.add_argument("--shuffle-labels", action="store_true",
                   help="permute labels first (chance-level check)")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("decode-replay", help="replay a recording through a pipeline into the gateway")
    p.add_argument("--rec", required=True)
    p.add_argument("--pipeline", required=True)
    p.add_argument("--endpoint", help="gateway TCP endpoint host:port")
    p.add_argument("--speed", type=float, default=1.0, help="pacing multiplier (>0)")
    p.add_argument("--no-ica", action="store_true")
    p.add_argument("--ica-components", type=int)
    p.add_argument("--band", nargs=2, type=float, help=argparse.SUPPRESS)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_decode_replay)

    p = sub.add_parser("sim", help="headless scripted swarm run, metrics to CSV")
    p.add_argument("--scenario", required=True)
    p.add_argument("--csv", help="metrics CSV output path (default stdout)")
    p.add_argument("--metrics-every", type=int, default=1)
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("serve", help="run the command gateway + simulator")
    p.add_argument("--tcp", help="decoder TCP endpoint (default 127.0.0.1:7070)")
    p.add_argument("--ws", help="console WebSocket endpoint (default 127.0.0.1:7071)")
    p.add_argument("--paradigm", choices=("MI", "VI", "SI"), default="SI")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--tick-rate", type=float, default=20.0)
    p.add_argument("--snapshot-rate", type=float, default=10.0)
    p.add_argument("--agents", type=int, default=8)
    p.add_argument("--box", type=float, default=20.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--log", help="session log JSON-lines path")
    p.add_argument("--static", help="serve console assets from this directory")
    p.add_argument("--duration", type=float, help="stop after this many seconds")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except swarm.SimulationDiverged as exc:
        print(f"error: simulation diverged at tick {exc.tick}", file=sys.stderr)
        return EXIT_SIMULATION_FAULT


if __name__ == "__main__":
    sys.exit(main())
