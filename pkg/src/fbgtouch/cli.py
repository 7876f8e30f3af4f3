"""Command-line entry point: ``fbgtouch <command> [--config PATH] [--seed N] [--out DIR]``.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import calib, config as cfgmod, formats, grasp, nn, pipeline
from .evaluation import (cross_sensor_consistency, evaluate_localization, measure_degradation,
                         measure_sensitivity, step_response_times)
from .fbgsim import SimConfig
from .geometry import NormalizedPoint

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
BENCHMARKS = ("sensitivity", "response", "degradation", "consistency", "localization", "grasp")

log = logging.getLogger("fbgtouch")


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class Run:
    """Resolved configuration plus output bookkeeping for one command."""

    def __init__(self, command: str, cfg: cfgmod.RunConfig):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg.out)
        # the output location is not part of the experiment
        self.config_dict = {k: v for k, v in cfg.to_dict().items() if k != "out"}
        self.config_hash = formats.config_hash(self.config_dict)

    def dir(self, *parts) -> Path:
        return formats.ensure_dir(self.out.joinpath(*parts))

    def _rel(self, p) -> str:
        p = Path(p)
        try:
            return p.resolve().relative_to(self.out.resolve()).as_posix()
        except ValueError:
            return p.name

    def manifest(self, directory: Path, inputs=(), outputs=(), extra=None, name="manifest.json"):
        rec = {
            "command": self.command,
            "config_hash": self.config_hash,
            "config": self.config_dict,
            "seed": self.cfg.seed,
            "inputs": {self._rel(p): formats.file_digest(p) for p in inputs},
            "outputs": {Path(p).name: formats.file_digest(p) for p in outputs},
        }
        if extra:
            rec.update(extra)
        formats.write_json(directory / name, rec)
        return rec


def _read_json(path: Path):
    try:
        return json.loads(_require(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc


def _write_records(path: Path, records):
    path.write_text("")
    formats.append_records(path, records)


def _require(path: Path) -> Path:
    if not path.exists():
        raise DataError(f"required file not found: {path}")
    return path


def _load_calibration(run: Run, data_dir: Path):
    stream_path = _require(data_dir / "stream_fiber0.tcap")
    events_path = _require(data_dir / "events.jsonl")
    stream = formats.read_stream(stream_path)
    events = formats.read_events(events_path)
    layout = run.cfg.layout.build()
    if stream.channels != layout.count:
        raise DataError(f"{stream_path} has {stream.channels} channels, config layout has {layout.count}")
    if events and events[-1].idx_mid >= len(stream):
        raise DataError(f"{events_path} refers past the end of {stream_path}")
    return stream, events, layout, [stream_path, events_path]


# ---------------------------------------------------------------- commands

def cmd_gen_calib(run: Run, args):
    cfg = run.cfg
    layout = cfg.layout.build()
    stream, events = calib.run_scan(cfg.geometry, layout, cfg.sim, cfg.scan, cfg.seed)
    d = run.dir("calib")
    formats.write_stream(d / "stream_fiber0.tcap", stream)
    formats.write_events(d / "events.jsonl", events)
    run.manifest(d, outputs=[d / "stream_fiber0.tcap", d / "events.jsonl"],
                 extra={"events": len(events), "frames": len(stream),
                        "nominal_nm": layout.nominal.tolist()})
    print(f"gen-calib: {len(events)} contact events, {len(stream)} frames x {stream.channels} gratings -> {d}")


def cmd_train(run: Run, args):
    data_dir = Path(args.data) if args.data else run.out / "calib"
    stream, events, layout, inputs = _load_calibration(run, data_dir)
    data = pipeline.prepare(stream, events, run.cfg.prep, run.cfg.seed, layout.nominal)
    mcfg = run.cfg.model_config()
    d = run.dir("model")
    metrics = d / "metrics.jsonl"
    metrics.write_text("")

    def on_epoch(epoch, loss):
        formats.append_records(metrics, [{"epoch": epoch, "train_loss": loss}])

    params, history = nn.train(data.train, mcfg, callback=on_epoch)
    formats.write_checkpoint(d / "checkpoint.tckp", params, mcfg, data.baseline, data.scale)
    formats.write_json(d / "split.json", {"test_events": data.test_events.tolist(),
                                          "train_windows": len(data.train),
                                          "test_windows": len(data.test)})
    run.manifest(d, inputs=inputs, outputs=[d / "checkpoint.tckp", d / "metrics.jsonl", d / "split.json"])
    print(f"train: {len(data.train)} windows, {mcfg.epochs} epochs, final loss {history[-1]:.6f} -> {d}")


def _localization_report(run: Run, args):
    data_dir = Path(args.data) if args.data else run.out / "calib"
    model_dir = Path(args.model) if args.model else run.out / "model"
    stream, events, layout, inputs = _load_calibration(run, data_dir)
    ckpt = _require(model_dir / "checkpoint.tckp")
    params, mcfg, baseline, scale = formats.read_checkpoint(ckpt)
    split = _read_json(model_dir / "split.json")
    data = pipeline.prepare(stream, events, run.cfg.prep, run.cfg.seed, baseline,
                            test_events=np.asarray(split["test_events"]))
    if scale is not None and not np.array_equal(scale, data.scale):
        raise DataError(f"{ckpt} was trained on a different calibration scan")
    report = evaluate_localization(params, data.test, run.cfg.geometry)
    return report, inputs + [ckpt]


def _print_localization(report):
    print(f"localization: mean error {report.mean_error_mm:.3f} mm, "
          f"median {report.median_error_mm:.3f} mm, contact accuracy {report.contact_accuracy:.4f} "
          f"({len(report.errors_mm)} contact windows)")


def cmd_eval_loc(run: Run, args):
    report, inputs = _localization_report(run, args)
    d = run.dir("eval")
    _write_records(d / "localization.jsonl", [report.to_record()])
    run.manifest(d, inputs=inputs, outputs=[d / "localization.jsonl"])
    _print_localization(report)


def _bench_sensitivity(run):
    cfg = run.cfg
    layout = cfg.layout.build()
    g = layout.positions[0]
    offset = NormalizedPoint(g.u, g.v + cfg.sim.kernel_sigma_mm / cfg.geometry.height_mm)
    records = []
    for name, point in (("at_grating", g), ("one_kernel_sigma_away", offset)):
        f = measure_sensitivity(layout, cfg.sim, cfg.geometry, point)
        records.append({"benchmark": "sensitivity", "probe": name, "u": point.u, "v": point.v,
                        "threshold_N": f})
    lines = [f"sensitivity {r['probe']}: {r['threshold_N']:.4f} N" for r in records]
    return records, lines


def _bench_response(run):
    cfg = run.cfg
    rise, fall = step_response_times(cfg.layout.build(), cfg.sim, cfg.geometry)
    rec = {"benchmark": "response", "rise_time_ms": rise, "fall_time_ms": fall}
    return [rec], [f"response: rise {rise:.1f} ms, fall {fall:.1f} ms"]


def _bench_degradation(run):
    cfg = run.cfg
    layout = cfg.layout.build()
    point = layout.positions[0]
    records = []
    for name, sim, cycles in (("default", cfg.sim, 1760),
                              ("digit", replace(cfg.sim, degradation_gain_per_cycle=SimConfig.digit_profile()
                                                .degradation_gain_per_cycle), 100)):
        d = measure_degradation(layout, sim, cfg.geometry, point, cycles, seed=cfg.seed)
        records.append({"benchmark": "degradation", "profile": name, "cycles": cycles,
                        "degradation_fraction": d})
    lines = [f"degradation {r['profile']}: {100 * r['degradation_fraction']:.2f}% after "
             f"{r['cycles']} cycles" for r in records]
    return records, lines


def _bench_consistency(run):
    cfg = run.cfg
    runner = pipeline.consistency_runner(cfg.geometry, cfg.layout.build(), cfg.sim, cfg.scan, cfg.prep,
                                         cfg.model_config(), cfg.seed, cfg.layout.placement_sigma_mm,
                                         cfg.layout.wavelength_sigma_nm)
    rep = cross_sensor_consistency(cfg.layout.build(), cfg.layout.consistency_seeds, runner)
    rec = {"benchmark": "consistency", **rep.to_record()}
    return [rec], rep.table().splitlines()


def _bench_grasp(run):
    cfg = run.cfg
    g = cfg.grasp
    episodes = grasp.generate_episodes(g.episode, g.count, cfg.seed, sim=cfg.sim, geom=cfg.geometry)
    res = grasp.run_ablation(g.episode, g.count, cfg.seed,
                             {"feature_dim": g.feature_dim, "epochs": g.epochs}, g.test_fraction,
                             episodes=episodes)
    rec = {"benchmark": "grasp", **res.to_record()}
    lines = [f"grasp w/ touch: {res.with_tactile.accuracy:.3f}",
             f"grasp w/o touch: {res.without_tactile.accuracy:.3f}",
             f"gap: {100 * res.gap:.1f} pp"]
    return [rec], lines


def cmd_bench(run: Run, args):
    which = args.which
    inputs = []
    if which == "localization":
        report, inputs = _localization_report(run, args)
        records = [{"benchmark": "localization", **report.to_record()}]
        lines = [f"localization: mean {report.mean_error_mm:.3f} mm, accuracy {report.contact_accuracy:.4f}"]
    else:
        records, lines = {"sensitivity": _bench_sensitivity, "response": _bench_response,
                          "degradation": _bench_degradation, "consistency": _bench_consistency,
                          "grasp": _bench_grasp}[which](run)
    d = run.dir("bench")
    _write_records(d / f"{which}.jsonl", records)
    (d / f"{which}.txt").write_text("\n".join(lines) + "\n")
    run.manifest(d, inputs=inputs, outputs=[d / f"{which}.jsonl", d / f"{which}.txt"],
                 extra={"benchmark": which}, name=f"{which}.manifest.json")
    print("\n".join(lines))


def cmd_grasp_gen(run: Run, args):
    g = run.cfg.grasp
    episodes = grasp.generate_episodes(g.episode, g.count, run.cfg.seed, sim=run.cfg.sim,
                                       geom=run.cfg.geometry)
    d = run.dir("grasp", "episodes")
    formats.write_episode_archive(d, episodes, {"episode_config": asdict(g.episode), "seed": run.cfg.seed,
                                                "config_hash": run.config_hash})
    n_stable = sum(ep.stable for ep in episodes)
    print(f"grasp-gen: {len(episodes)} episodes ({n_stable} stable) -> {d}")


def _grasp_data(run: Run, args):
    d = Path(args.data) if args.data else run.out / "grasp" / "episodes"
    _require(d / "manifest.json")
    episodes, manifest = formats.read_episode_archive(d)
    return episodes, [d / "manifest.json"]


def cmd_grasp_train(run: Run, args):
    episodes, inputs = _grasp_data(run, args)
    g = run.cfg.grasp
    train_idx, test_idx = grasp.split_episodes(episodes, g.test_fraction, run.cfg.seed)
    norm = grasp.GraspNormalizer.fit([episodes[i] for i in train_idx])
    windows = grasp.preprocess_episodes([episodes[i] for i in train_idx], norm)
    mcfg = grasp.stability_model_config(windows, feature_dim=g.feature_dim, epochs=g.epochs,
                                        seed=run.cfg.seed)
    d = run.dir("grasp", "model")
    outputs = []
    for arm, use_tactile in (("tactile", True), ("no_tactile", False)):
        params = grasp.train_stability(windows, mcfg, use_tactile)
        formats.write_checkpoint(d / f"{arm}.tckp", params, mcfg)
        outputs.append(d / f"{arm}.tckp")
    formats.write_json(d / "normalizer.json", norm.to_record())
    formats.write_json(d / "split.json", {"train_episodes": train_idx.tolist(),
                                          "test_episodes": test_idx.tolist()})
    outputs += [d / "normalizer.json", d / "split.json"]
    run.manifest(d, inputs=inputs, outputs=outputs)
    print(f"grasp-train: {len(windows)} windows from {len(train_idx)} episodes -> {d}")


def cmd_grasp_eval(run: Run, args):
    episodes, inputs = _grasp_data(run, args)
    m = Path(args.model) if args.model else run.out / "grasp" / "model"
    split = _read_json(m / "split.json")
    norm = grasp.GraspNormalizer.from_record(_read_json(m / "normalizer.json"))
    test = grasp.preprocess_episodes([episodes[i] for i in split["test_episodes"]], norm)
    records, lines = [], []
    for arm, use_tactile in (("tactile", True), ("no_tactile", False)):
        params, _, _, _ = formats.read_checkpoint(_require(m / f"{arm}.tckp"))
        inputs.append(m / f"{arm}.tckp")
        rep = grasp.evaluate_stability(params, test, use_tactile)
        records.append({"arm": arm, **rep.to_record()})
        lines.append(f"grasp {arm}: episode accuracy {rep.accuracy:.3f} over {rep.episodes} episodes")
    d = run.dir("grasp", "eval")
    _write_records(d / "results.jsonl", records)
    run.manifest(d, inputs=inputs, outputs=[d / "results.jsonl"])
    print("\n".join(lines))


COMMANDS = {
    "gen-calib": cmd_gen_calib, "train": cmd_train, "eval-loc": cmd_eval_loc, "bench": cmd_bench,
    "grasp-gen": cmd_grasp_gen, "grasp-train": cmd_grasp_train, "grasp-eval": cmd_grasp_eval,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML run configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", metavar="DIR", help="override the output directory")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = _Parser(prog="fbgtouch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("gen-calib", "grasp-gen"):
        sub.add_parser(name, parents=[common])
    for name in ("train", "grasp-train"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--data", metavar="DIR", help="input data directory")
    for name in ("eval-loc", "grasp-eval"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--data", metavar="DIR", help="input data directory")
        p.add_argument("--model", metavar="DIR", help="model directory")
    p = sub.add_parser("bench", parents=[common])
    p.add_argument("which", choices=BENCHMARKS)
    p.add_argument("--data", metavar="DIR", help="calibration data (localization)")
    p.add_argument("--model", metavar="DIR", help="model directory (localization)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = cfgmod.load(args.config) if args.config else cfgmod.RunConfig()
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.out is not None:
            cfg = replace(cfg, out=args.out)
        run = Run(args.command, cfg)
        COMMANDS[args.command](run, args)
    except cfgmod.ConfigError as exc:
        print(f"fbgtouch: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except nn.TrainingError as exc:
        print(f"fbgtouch: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, formats.CorruptFileError, FileNotFoundError) as exc:
        print(f"fbgtouch: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"fbgtouch: cannot write output: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
