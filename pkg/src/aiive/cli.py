"""Headless entry point: dataset generation, training runs, trace replay.

Exit codes: 0 success, 1 runtime failure, 2 usage. AIIVE_LOG=error|info|debug
controls logging verbosity.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import data, nn, protocol, sonify
from .server import ProtocolServer
from .session import EpochCompleted, Error, Session, SessionConfig

log = logging.getLogger("aiive.cli")

TRACE_HEADER = ["epoch", "val_accuracy", "val_loss", "learning_rate", "momentum"]
REPLAY_TOLERANCE = 1e-12
WAV_SECONDS_PER_EPOCH = 0.5


def _setup_logging() -> None:
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("AIIVE_LOG", "error").lower(), logging.ERROR
    )
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _parse_counts(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("counts must be train,val,test")
    try:
        counts = tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad counts {text!r}") from None
    return counts  # type: ignore[return-value]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aiive", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="write a synthetic AIIVE-DS/1 dataset pair")
    gen.add_argument("--out", required=True, help="output path prefix (<out>.meta, <out>.bin)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--counts", type=_parse_counts, default=data.DEFAULT_COUNTS,
                     help="train,val,test sizes (default 3374,419,385)")

    train = sub.add_parser("train", help="train, optionally serving the wire protocol")
    train.add_argument("--data", required=True, help="dataset path prefix")
    train.add_argument("--h1", type=int, default=32)
    train.add_argument("--h2", type=int, default=16)
    train.add_argument("--lr", type=float, default=0.1)
    train.add_argument("--momentum", type=float, default=0.9)
    train.add_argument("--batch", type=int, default=64)
    train.add_argument("--epochs", type=int, default=10)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--paper-literal-momentum", action="store_true",
                       help="apply the update rule with the raw previous gradient")
    train.add_argument("--serve", metavar="ADDR", help="host:port to expose the protocol on")
    train.add_argument("--script", help="command script (one {at_step, cmd} JSON per line)")
    train.add_argument("--trace", metavar="OUT.csv", help="write per-epoch metrics")
    train.add_argument("--wav", metavar="OUT.wav", help="render the run's sonification")
    train.add_argument("--sonify", choices=["accuracy", "loss", "split"], default="accuracy")
    train.add_argument("--weights-out", metavar="OUT.npz", help="dump final weights")

    replay = sub.add_parser("replay", help="compare two trace files")
    replay.add_argument("--trace", action="append", required=True, metavar="FILE",
                        help="give twice: the two traces to compare")
    return parser


def _fmt(x: float) -> str:
    return repr(float(x))


def cmd_gen_data(args: argparse.Namespace) -> int:
    ds = data.generate_dataset(seed=args.seed, counts=args.counts)
    data.save_dataset(ds, args.out)
    log.info("wrote %s.meta and %s.bin (%d examples)", args.out, args.out, len(ds.labels))
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    try:
        dataset = data.load_dataset(args.data)
    except (OSError, ValueError) as exc:
        print(f"aiive: cannot load dataset {args.data!r}: {exc}", file=sys.stderr)
        return 1

    script = None
    if args.script:
        try:
            script = protocol.load_script(args.script)
        except (OSError, ValueError) as exc:
            print(f"aiive: cannot load script: {exc}", file=sys.stderr)
            return 1

    try:
        config = SessionConfig(
            h1=args.h1,
            h2=args.h2,
            seed=args.seed,
            hyperparams=nn.Hyperparams(
                learning_rate=args.lr, momentum=args.momentum, batch_size=args.batch
            ),
            epochs=args.epochs,
            paper_literal_momentum=args.paper_literal_momentum,
            sonification_mode=sonify.SonificationMode(args.sonify),
            realtime=bool(args.serve),
            exit_on_completion=not args.serve,
        )
        session = Session(dataset, config)
    except ValueError as exc:
        print(f"aiive: {exc}", file=sys.stderr)
        return 1

    server: ProtocolServer | None = None
    if args.serve:
        host, _, port = args.serve.rpartition(":")
        server = ProtocolServer(session, host or "127.0.0.1", int(port or 0))
        host, port = server.start()
        print(f"serving on {host}:{port} (websocket on port {server.ws_port})", flush=True)

    trace_fh = open(args.trace, "w", newline="", encoding="ascii") if args.trace else None
    writer = None
    if trace_fh is not None:
        writer = csv.writer(trace_fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)

    epochs: list[nn.EpochMetrics] = []
    exit_code = 0
    try:
        for event in session.run(script):
            if server is not None:
                server.broadcast(event)
            if isinstance(event, EpochCompleted):
                m = event.metrics
                epochs.append(m)
                log.info("epoch %d: accuracy %.4f loss %.4f", m.epoch, m.val_accuracy, m.val_loss)
                if writer is not None:
                    writer.writerow(
                        [m.epoch, _fmt(m.val_accuracy), _fmt(m.val_loss),
                         _fmt(session.hp.learning_rate), _fmt(session.hp.momentum)]
                    )
            elif isinstance(event, Error):
                log.error("session error [%s]: %s", event.code, event.text)
                if event.code == "numeric":
                    exit_code = 1
    except KeyboardInterrupt:
        log.info("interrupted")
    finally:
        if trace_fh is not None:
            trace_fh.close()
        if server is not None:
            server.stop()

    if args.wav:
        _write_run_wav(args.wav, epochs, session)
    if args.weights_out:
        np.savez(
            args.weights_out,
            **{name: arr for name, arr in zip(("W1", "b1", "W2", "b2", "W3", "b3"), session.net.arrays())},
        )
    return exit_code


def _write_run_wav(path: str, epochs: list[nn.EpochMetrics], session: Session) -> None:
    """Piecewise-constant per-epoch tones, WAV_SECONDS_PER_EPOCH each."""
    left: sonify.Timeline = []
    right: sonify.Timeline = []
    for i, m in enumerate(epochs):
        fa = sonify.map_to_freq(session.mappings["accuracy"], m.val_accuracy)
        fl = sonify.map_to_freq(session.mappings["loss"], m.val_loss)
        l_freq, r_freq = sonify.route(session.mode, fa, fl)
        t = i * WAV_SECONDS_PER_EPOCH
        left.append((t, l_freq))
        right.append((t, r_freq))
    frame = sonify.render(left, right, duration=len(epochs) * WAV_SECONDS_PER_EPOCH)
    sonify.write_wav(frame, path)
    log.info("wrote %s (%.1f s)", path, frame.duration)


def _load_trace(path: str) -> list[list[str]]:
    with open(path, "r", newline="", encoding="ascii") as fh:
        return list(csv.reader(fh))


def cmd_replay(args: argparse.Namespace) -> int:
    if len(args.trace) != 2:
        print("aiive replay: give --trace exactly twice", file=sys.stderr)
        return 2
    try:
        a, b = (_load_trace(p) for p in args.trace)
    except OSError as exc:
        print(f"aiive: {exc}", file=sys.stderr)
        return 1
    if not a or not b or a[0] != TRACE_HEADER or b[0] != TRACE_HEADER:
        print("aiive replay: bad or missing trace header", file=sys.stderr)
        return 1
    if len(a) != len(b):
        print(f"aiive replay: row count differs ({len(a) - 1} vs {len(b) - 1})", file=sys.stderr)
        return 1
    for row_i, (ra, rb) in enumerate(zip(a[1:], b[1:]), start=1):
        for col, (va, vb) in zip(TRACE_HEADER, zip(ra, rb)):
            try:
                fa, fb = float(va), float(vb)
            except ValueError:
                print(f"aiive replay: row {row_i}: non-numeric cell in {col}", file=sys.stderr)
                return 1
            if not abs(fa - fb) <= REPLAY_TOLERANCE:
                print(
                    f"aiive replay: row {row_i} column {col}: {va} vs {vb} "
                    f"(|diff| > {REPLAY_TOLERANCE})",
                    file=sys.stderr,
                )
                return 1
    print(f"traces match within {REPLAY_TOLERANCE}")
    return 0


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "gen-data":
            return cmd_gen_data(args)
        if args.command == "train":
            return cmd_train(args)
        return cmd_replay(args)
    except Exception as exc:  # runtime failures map to exit 1
        log.debug("unhandled error", exc_info=True)
        print(f"aiive: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
