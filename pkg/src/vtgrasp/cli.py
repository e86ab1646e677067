"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 missing artifact,
4 an acceptance threshold failed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .annotate import GraspMap
from .harness.config import ConfigError, MissingArtifact, load_config
from .harness.experiments import (ExperimentReport, detection_camera, detection_sets,
                                  run_experiment, train_detector)
from .harness.io import (FormatError, load_checkpoint, read_json, save_checkpoint, write_csv,
                         write_gmap, write_json, write_loss_curve, write_manifest, write_ppm)

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_THRESHOLD = 0, 2, 3, 4

log = logging.getLogger("vtgrasp")


def _checkpoint_arg(args, cfg) -> None:
    if getattr(args, "checkpoint", None):
        cfg["harness"]["checkpoint"] = str(args.checkpoint)
    ck = cfg["harness"]["checkpoint"]
    if ck and not Path(ck).with_suffix(".json").exists():
        raise MissingArtifact(f"checkpoint {ck} not found")


def _finish(report: ExperimentReport, out: Path) -> int:
    paths = report.write(out)
    for name, ok in report.checks.items():
        print(f"{report.experiment} {name}: {'pass' if ok else 'FAIL'}")
    log.info("wrote %s", ", ".join(str(p) for p in paths))
    return EXIT_OK if report.passed else EXIT_THRESHOLD


def cmd_gen_dataset(args, cfg) -> int:
    out = _mk(Path(args.out_dir) / "dataset")
    write_json(out / "camera.json", detection_camera(cfg).to_dict())
    files = [out / "camera.json"]
    for split, ds in detection_sets(cfg).items():
        d = _mk(out / split)
        for i, scene in enumerate(ds.scenes):
            stem = d / f"{i:05d}"
            write_ppm(stem.with_suffix(".ppm"), ds.data.images[i].transpose(1, 2, 0))
            write_gmap(stem.with_suffix(".gmap"), GraspMap(ds.data.q[i], ds.data.r[i]))
            write_json(stem.with_suffix(".json"), scene.to_dict())
            files += [stem.with_suffix(e) for e in (".ppm", ".gmap", ".json")]
    man = write_manifest(out, files, {"seed": cfg["harness"]["seed"], "config": cfg})
    print(f"{len(files)} files, manifest {man}")
    return EXIT_OK


def _mk(p: Path) -> Path:
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_train(args, cfg) -> int:
    out = _mk(Path(args.out_dir))
    model, res = train_detector(cfg, seed=args.seed)
    bin_path, man_path = save_checkpoint(model, out / "tgcnn", {"config": cfg, "final_loss": res.final_loss})
    write_loss_curve(out / "loss.csv", res.step_losses)
    print(f"trained in {res.seconds:.1f}s, loss {res.initial_loss:.5f} -> {res.final_loss:.5f}; {man_path}")
    return EXIT_OK


def cmd_eval_detect(args, cfg) -> int:
    _checkpoint_arg(args, cfg)
    model = load_checkpoint(cfg["harness"]["checkpoint"])[0] if cfg["harness"]["checkpoint"] else None
    out = _mk(Path(args.out_dir))
    status = EXIT_OK
    for eid in args.experiments:
        dump = _mk(out / f"heatmaps_{eid}") if args.dump_heatmaps and eid in ("E1", "E1b") else None
        report = run_experiment(eid, cfg, model, dump)
        status = max(status, _finish(report, out))
    return status


def cmd_run_episodes(args, cfg) -> int:
    _checkpoint_arg(args, cfg)
    return _finish(run_experiment(args.experiment, cfg), Path(args.out_dir))


def cmd_ablate_labels(args, cfg) -> int:
    return _finish(run_experiment("E1c", cfg), Path(args.out_dir))


def cmd_explore_tpe(args, cfg) -> int:
    if args.steps:
        cfg["harness"]["tpe_steps"] = args.steps
    return _finish(run_experiment("E7", cfg), Path(args.out_dir))


def cmd_report(args, cfg) -> int:
    out = Path(args.out_dir)
    reports = sorted(out.glob("*_report.json"))
    if not reports:
        raise MissingArtifact(f"no reports in {out}")
    rows, failed = [], False
    for p in reports:
        r = read_json(p)
        for cond, m in r["metrics"].items():
            rows.append({"experiment": r["experiment"], "condition": cond,
                         **{k: v for k, v in m.items() if not isinstance(v, (list, dict))}})
        for name, ok in r["checks"].items():
            print(f"{r['experiment']} {name}: {'pass' if ok else 'FAIL'}")
            failed |= not ok
    write_csv(out / "summary.csv", rows)
    print(f"{len(reports)} reports summarized in {out / 'summary.csv'}")
    return EXIT_THRESHOLD if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config with per-module sections")
    common.add_argument("--seed", type=int, help="overrides harness.seed")
    common.add_argument("--out-dir", default="runs", help="where reports and artifacts go")
    common.add_argument("--threads", type=int, help="parallel episode workers")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="vtgrasp", description="Visual-tactile grasping simulator and experiments")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-dataset", parents=[common], help="render detection datasets with labels and a manifest")
    sub.add_parser("train", parents=[common], help="train the grasp detector and save a checkpoint")
    ev = sub.add_parser("eval-detect", parents=[common], help="detection experiments on a checkpoint")
    ev.add_argument("--checkpoint", help="checkpoint stem (…/tgcnn)")
    ev.add_argument("--experiments", nargs="+", default=["E1", "E1b"], choices=["E1", "E1b", "E2", "E3"])
    ev.add_argument("--dump-heatmaps", action="store_true", help="write predicted quality maps as PGM")
    ep = sub.add_parser("run-episodes", parents=[common], help="grasping experiments E4-E6")
    ep.add_argument("--experiment", default="E5", choices=["E4", "E5", "E6"])
    ep.add_argument("--checkpoint", help="checkpoint stem, for harness.detector=trained")
    sub.add_parser("ablate-labels", parents=[common], help="Gaussian-mask vs binary labels (E1c)")
    tp = sub.add_parser("explore-tpe", parents=[common], help="touch exploration step sweep (E7)")
    tp.add_argument("--steps", type=float, nargs="+", help="lattice pitches in mm")
    sub.add_parser("report", parents=[common], help="summarize reports in --out-dir")
    return p


COMMANDS = {
    "gen-dataset": cmd_gen_dataset, "train": cmd_train, "eval-detect": cmd_eval_detect,
    "run-episodes": cmd_run_episodes, "ablate-labels": cmd_ablate_labels,
    "explore-tpe": cmd_explore_tpe, "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["harness"]["seed"] = args.seed
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            cfg["harness"]["threads"] = args.threads
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MissingArtifact, FormatError) as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING


if __name__ == "__main__":
    sys.exit(main())
