"""Command-line entry points.

Subcommands: gen-synthetic, train, optimize, evaluate, serve, replay.
All randomness sits behind --seed.  Exit codes: 0 success, 1 runtime
error, 2 validation or usage error.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import data, report
from .classifier import TrainConfig, predict_batch, train_classifier
from .errors import ModelFormatError, ParseError, ValidationError
from .intent import (DEFAULT_REQUIRED_RUN, DEFAULT_WINDOW_SIZE, ConsensusState,
                     command_map, consensus_update, window_mode)
from .modelfile import dataset_fingerprint, load_model, save_model
from .rs import make_shuffle_map
from .server import StreamServer, replay_stream
from .zonesearch import FocalZone, ZoneSearchConfig, initial_zone, optimize_focal_zone

DEFAULT_PORT_ENV = "MINDPIPE_PORT"


def _add_seed(parser):
    parser.add_argument("--seed", type=int, default=0, help="master random seed")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="mindpipe",
        description="Brain-signal-to-command pipeline: train, evaluate, and serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="write a synthetic sample CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--n-per-class", type=int, default=200)
    p.add_argument("--channels", type=int, default=data.DEFAULT_CHANNELS)
    p.add_argument("--noise", type=float, default=0.1)
    _add_seed(p)

    p = sub.add_parser("train", help="shuffle map + zone search + classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="model file path")
    p.add_argument("--kprime", type=int, default=224, help="shuffled dimension count")
    p.add_argument("--kbar", type=int, default=128, help="initial focal length")
    p.add_argument("--train-fraction", type=float, default=0.9)
    p.add_argument("--skip-sam", action="store_true",
                   help="skip the zone search and keep the initial zone")
    p.add_argument("--episodes", type=int, default=50)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--batch", type=int, default=9)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--l2", type=float, default=0.001)
    p.add_argument("--report-dir", default=None,
                   help="directory for history/metrics CSVs and figures "
                        "(default: alongside the model)")
    _add_seed(p)

    p = sub.add_parser("optimize", help="zone search only")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="zone JSON path")
    p.add_argument("--kprime", type=int, default=224)
    p.add_argument("--kbar", type=int, default=128)
    p.add_argument("--episodes", type=int, default=50)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--report-dir", default=None)
    _add_seed(p)

    p = sub.add_parser("evaluate", help="metrics and confusion for a model on a CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--latency", action="store_true",
                   help="also report mean per-window decision latency")
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW_SIZE)
    p.add_argument("--report-dir", default=None)

    p = sub.add_parser("serve", help="run the stream service")
    p.add_argument("--model", required=True)
    p.add_argument("--port", type=int,
                   default=int(os.environ.get(DEFAULT_PORT_ENV, "7600")))
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--mode", choices=("typing", "robot"), default="typing")
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW_SIZE)
    p.add_argument("--sim-data", default=None,
                   help="held-out CSV backing intent simulation requests")

    p = sub.add_parser("replay", help="stream windows from a CSV to a server")
    p.add_argument("--data", required=True)
    p.add_argument("--class-filter", type=int, required=True)
    p.add_argument("--rate", type=float, default=2.0, help="windows per second")
    p.add_argument("--connect", default=None, help="host:port (default env port)")
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW_SIZE)
    p.add_argument("--max-windows", type=int, default=None)
    return parser


def _report_dir(args, fallback):
    directory = Path(args.report_dir) if args.report_dir else Path(fallback)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def _cmd_gen_synthetic(args):
    dataset = data.generate_synthetic(
        n_per_class=args.n_per_class,
        channel_count=args.channels,
        noise_sigma=args.noise,
        seed=args.seed,
    )
    data.save_dataset(dataset, args.out)
    print(f"wrote {len(dataset)} samples ({args.channels} channels) to {args.out}")
    return 0


def _evaluate_model(model, dataset, out_dir, latency=False, window_size=DEFAULT_WINDOW_SIZE):
    predicted, _ = predict_batch(model, dataset.features)
    metrics = data.compute_metrics(predicted, dataset.labels, dataset.class_count)
    report.save_metrics_csv(metrics, out_dir / "metrics.csv")
    report.save_confusion_csv(metrics, out_dir / "confusion.csv")
    report.plot_confusion(metrics, out_dir / "confusion.png")
    print(f"accuracy        {metrics.accuracy:.4f}")
    print(f"macro precision {metrics.macro_precision:.4f}")
    print(f"macro recall    {metrics.macro_recall:.4f}")
    print(f"macro f1        {metrics.macro_f1:.4f}")
    if latency:
        cmap = command_map("typing")
        state = ConsensusState()
        times = []
        for begin in range(0, len(dataset) - window_size + 1, window_size):
            window = dataset.features[begin:begin + window_size]
            started = time.perf_counter()
            labels, _ = predict_batch(model, window)
            decision = window_mode(labels, dataset.class_count)
            state, _ = consensus_update(state, decision, cmap)
            times.append(time.perf_counter() - started)
        mean_ms = 1000.0 * float(np.mean(times)) if times else float("nan")
        print(f"mean per-window latency {mean_ms:.1f} ms over {len(times)} window(s)")
    return metrics


def _cmd_train(args):
    dataset = data.load_dataset(args.data)
    train_set, test_set = data.split(dataset, args.train_fraction, seed=args.seed)
    shuffle_map = make_shuffle_map(dataset.channel_count, args.kprime, seed=args.seed)
    out_dir = _report_dir(args, Path(args.out).resolve().parent)

    search_config = ZoneSearchConfig(
        episodes=args.episodes, steps_per_episode=args.steps,
        initial_length=args.kbar, seed=args.seed,
    )
    if args.skip_sam:
        zone = initial_zone(args.kprime, args.kbar)
        history = []
    else:
        zone, best_reward, history = optimize_focal_zone(
            train_set, shuffle_map, search_config
        )
        print(f"zone search: best zone [{zone.start}, {zone.end}) "
              f"reward {best_reward:.5f} over {len(history)} steps")
        report.save_history_csv(history, out_dir / "history.csv")
        report.plot_history(history, out_dir / "history.png")

    train_config = TrainConfig(
        learning_rate=args.lr, l2_lambda=args.l2, batch_size=args.batch,
        iterations=args.iterations, seed=args.seed,
    )
    model = train_classifier(train_set, shuffle_map, zone, train_config)
    hyper = {
        "train": vars(train_config) | {"dense_sizes": list(train_config.dense_sizes)},
        "zone_search": None if args.skip_sam else vars(search_config),
        "train_fraction": args.train_fraction,
    }
    meta = {
        "seed": args.seed,
        "dataset_fingerprint": dataset_fingerprint(dataset),
        "channel_count": dataset.channel_count,
        "sample_rate_hz": dataset.sample_rate_hz,
    }
    save_model(model, args.out, hyperparameters=hyper, metadata=meta)
    print(f"model written to {args.out}")
    _evaluate_model(model, test_set, out_dir)
    return 0


def _cmd_optimize(args):
    dataset = data.load_dataset(args.data)
    shuffle_map = make_shuffle_map(dataset.channel_count, args.kprime, seed=args.seed)
    config = ZoneSearchConfig(
        episodes=args.episodes, steps_per_episode=args.steps,
        initial_length=args.kbar, seed=args.seed,
    )
    zone, best_reward, history = optimize_focal_zone(dataset, shuffle_map, config)
    out_dir = _report_dir(args, Path(args.out).resolve().parent)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump({"start": zone.start, "end": zone.end, "reward": best_reward}, fh)
        fh.write("\n")
    report.save_history_csv(history, out_dir / "history.csv")
    report.plot_history(history, out_dir / "history.png")
    print(f"best zone [{zone.start}, {zone.end}) reward {best_reward:.5f}; "
          f"history in {out_dir}")
    return 0


def _cmd_evaluate(args):
    model, _ = load_model(args.model)
    dataset = data.load_dataset(
        args.data,
        data.CsvSchema(channel_count=model.shuffle_map.source_dim,
                       class_count=model.class_count),
    )
    out_dir = _report_dir(args, Path(args.data).resolve().parent)
    _evaluate_model(model, dataset, out_dir, latency=args.latency,
                    window_size=args.window)
    return 0


def _cmd_serve(args):
    model, _ = load_model(args.model)
    sim_dataset = None
    if args.sim_data:
        sim_dataset = data.load_dataset(
            args.sim_data,
            data.CsvSchema(channel_count=model.shuffle_map.source_dim,
                           class_count=model.class_count),
        )
    server = StreamServer(
        model, port=args.port, host=args.host, mode=args.mode,
        window_size=args.window, sim_dataset=sim_dataset,
    )
    print(f"serving on {server.host}:{server.port} (mode={args.mode})", flush=True)
    server.serve_forever()
    return 0


def _cmd_replay(args):
    dataset = data.load_dataset(args.data)
    destination = args.connect or f"127.0.0.1:{os.environ.get(DEFAULT_PORT_ENV, '7600')}"
    replies = replay_stream(
        dataset, args.class_filter, destination, rate=args.rate,
        window_size=args.window, max_windows=args.max_windows,
        on_event=lambda record: print(json.dumps(record), flush=True),
    )
    commands = sum(1 for r in replies if r.get("type") == "command")
    print(f"received {len(replies)} replies, {commands} command(s)")
    return 0


_COMMANDS = {
    "gen-synthetic": _cmd_gen_synthetic,
    "train": _cmd_train,
    "optimize": _cmd_optimize,
    "evaluate": _cmd_evaluate,
    "serve": _cmd_serve,
    "replay": _cmd_replay,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValidationError, ParseError, ModelFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
