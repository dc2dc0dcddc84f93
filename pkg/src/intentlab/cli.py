"""Command-line experiment driver.

Subcommands: ``generate-data``, ``pretrain``, ``evaluate``, ``ablate`` and
``report``. Settings come from the defaults, then an optional ``--config``
JSON file, then flags (flags win).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .nncore import checkpoint as checkpoint_io
from .config import RunConfig, digest_of
from .datamodel import read_videos, write_videos
from .errors import DatasetNotFound, IntentLabError, OutputDirError
from .evaluation import evaluate_representation, run_ablation_matrix
from .losses import LossMode
from .sampling import NegativeScope
from .synthgen import Dataset, generate_dataset
from .training import init_model, pretrain

log = logging.getLogger("intentlab")

OUT_ENV = "INTENTLAB_OUT"
SPLIT_FILES = {"pretrain": "pretrain.jsonl", "train": "labeled_train.jsonl", "test": "labeled_test.jsonl"}
MANIFEST = "manifest.json"


# ---------------------------------------------------------------------------
# configuration plumbing


def _add_common(p):
    p.add_argument("--config", help="JSON run config; flags override it")
    p.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./runs)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1, help="worker cap; results do not depend on it")


def _add_model_flags(p):
    p.add_argument("--steps", type=int, dest="pretrain_steps")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--optimizer", choices=["sgd", "adam"])
    p.add_argument("--scope", choices=[s.value for s in NegativeScope])
    p.add_argument("--loss-mode", choices=[m.value for m in LossMode])
    p.add_argument("--tau", type=float)


def _add_probe_flags(p):
    p.add_argument("--probe-steps", type=int)
    p.add_argument("--probe-lr", type=float)
    p.add_argument("--finetune-lr", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--thresholds", type=lambda s: tuple(float(x) for x in s.split(",")))
    p.add_argument("--labeled-fraction", type=float, help="fraction for the small linear setting")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="intentlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-data", help="write a synthetic dataset")
    _add_common(g)
    g.add_argument("--videos", type=int, help="total videos, split 3:1:1 into pretrain/train/test")
    g.add_argument("--counts", type=int, nargs=3, metavar=("PRETRAIN", "TRAIN", "TEST"))
    g.add_argument("--d-in", type=int)
    g.add_argument("--n-min", type=int)
    g.add_argument("--n-max", type=int)
    g.add_argument("--transition-lo", type=float)
    g.add_argument("--transition-hi", type=float)
    g.add_argument("--noise-sigma", type=float)
    g.add_argument("--regime-shift", type=float)
    g.add_argument("--step-size", type=float)
    g.add_argument("--motion-gain", type=float)
    g.add_argument("--speed-jitter", type=float)
    g.add_argument("--clip-stride", type=float)

    p = sub.add_parser("pretrain", help="self-supervised pretraining on the unlabeled split")
    _add_common(p)
    p.add_argument("--data", required=True)
    _add_model_flags(p)

    e = sub.add_parser("evaluate", help="downstream classification, localization, anticipation")
    _add_common(e)
    e.add_argument("--data", required=True)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--with-scratch-baseline", action="store_true")
    _add_probe_flags(e)

    a = sub.add_parser("ablate", help="pretrain and evaluate over a scope x loss-mode grid")
    _add_common(a)
    a.add_argument("--data", required=True)
    a.add_argument("--scopes", default="Global,Local")
    a.add_argument("--modes", default="TempOnly,OrdOnly,Combined,CombinedPermutation")
    a.add_argument("--seeds", default="0,1,2")
    _add_model_flags(a)
    _add_probe_flags(a)

    r = sub.add_parser("report", help="tables and charts from existing logs")
    r.add_argument("--logs", required=True, help="directory holding metric logs")
    r.add_argument("--out", default=None)
    return parser


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = RunConfig.from_json(Path(args.config).read_text())
    gen, pre, probe, ev = cfg.gen, cfg.pretrain, cfg.probe, cfg.eval
    a = vars(args)

    def pick(name, current):
        v = a.get(name)
        return current if v is None else v

    if args.command == "generate-data":
        n_lo, n_hi = gen.n_range
        t_lo, t_hi = gen.transition_quantile_range
        gen = replace(
            gen,
            d_in=pick("d_in", gen.d_in),
            n_range=(pick("n_min", n_lo), pick("n_max", n_hi)),
            transition_quantile_range=(pick("transition_lo", t_lo), pick("transition_hi", t_hi)),
            noise_sigma=pick("noise_sigma", gen.noise_sigma),
            regime_shift=pick("regime_shift", gen.regime_shift),
            step_size=pick("step_size", gen.step_size),
            motion_gain=pick("motion_gain", gen.motion_gain),
            speed_jitter=pick("speed_jitter", gen.speed_jitter),
            clip_stride=pick("clip_stride", gen.clip_stride),
            seed=pick("seed", gen.seed),
        )
        counts = cfg.counts
        if a.get("counts"):
            counts = tuple(a["counts"])
        elif a.get("videos"):
            total = a["videos"]
            counts = (total - 2 * (total // 5), total // 5, total // 5)
        cfg = replace(cfg, gen=gen, counts=counts)
    else:
        if "pretrain_steps" in a:
            pre = replace(
                pre,
                steps=pick("pretrain_steps", pre.steps),
                batch_size=pick("batch_size", pre.batch_size),
                lr=pick("lr", pre.lr),
                optimizer=pick("optimizer", pre.optimizer),
                scope=pick("scope", pre.scope),
                mode=pick("loss_mode", pre.mode),
                tau=pick("tau", pre.tau),
            )
        if "probe_steps" in a:
            probe = replace(
                probe,
                steps=pick("probe_steps", probe.steps),
                lr=pick("probe_lr", probe.lr),
                encoder_lr=pick("finetune_lr", probe.encoder_lr),
                horizon=pick("horizon", probe.horizon),
                thresholds=pick("thresholds", probe.thresholds),
            )
            ev = replace(ev, small_fraction=pick("labeled_fraction", ev.small_fraction))
        cfg = replace(cfg, pretrain=pre, probe=probe, eval=ev, seed=pick("seed", cfg.seed))
    out = a.get("out") or os.environ.get(OUT_ENV) or cfg.output_dir
    return replace(cfg, output_dir=str(out))


def _out_dir(path) -> Path:
    path = Path(path)
    if not path.is_dir():
        raise OutputDirError(f"output directory does not exist: {path}")
    return path


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _append_jsonl(path: Path, rows) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# dataset loading


def load_manifest(data_dir) -> dict:
    path = Path(data_dir) / MANIFEST
    if not path.is_file():
        raise DatasetNotFound(f"no dataset manifest at {path}")
    return json.loads(path.read_text())


def load_pretrain_split(data_dir):
    """Pretraining videos, read with their transition field dropped."""
    load_manifest(data_dir)
    return read_videos(Path(data_dir) / SPLIT_FILES["pretrain"], drop_annotation=True)


def load_labeled_splits(data_dir):
    load_manifest(data_dir)
    d = Path(data_dir)
    return read_videos(d / SPLIT_FILES["train"]), read_videos(d / SPLIT_FILES["test"])


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate_data(cfg: RunConfig) -> Path:
    out = _out_dir(cfg.output_dir)
    ds = generate_dataset(cfg.gen, cfg.counts)
    write_videos(out / SPLIT_FILES["pretrain"], ds.pretrain)
    write_videos(out / SPLIT_FILES["train"], ds.train)
    write_videos(out / SPLIT_FILES["test"], ds.test)
    manifest = {
        "config": cfg.gen.to_dict(),
        "config_digest": cfg.gen.digest(),
        "seed": cfg.gen.seed,
        "counts": list(cfg.counts),
        "no_signal": cfg.gen.regime_shift == 0,
        "files": {k: {"name": f, "sha256": _sha256(out / f)} for k, f in SPLIT_FILES.items()},
    }
    _write_json(out / MANIFEST, manifest)
    log.info("wrote %d videos to %s (digest %s)", len(ds), out, manifest["config_digest"])
    return out / MANIFEST


def _train_digest(cfg: RunConfig, data_manifest: dict) -> str:
    return digest_of({"data": data_manifest["config_digest"], "dims": cfg.to_dict()["dims"],
                      "pretrain": cfg.pretrain.to_dict(), "seed": cfg.seed})


def cmd_pretrain(cfg: RunConfig, data_dir) -> Path:
    out = _out_dir(cfg.output_dir)
    manifest = load_manifest(data_dir)
    videos = load_pretrain_split(data_dir)
    dims = replace(cfg.dims, d_in=videos[0].features.shape[1])
    digest = _train_digest(cfg, manifest)
    params, rows = pretrain(videos, dims, cfg.pretrain, cfg.seed)
    meta = {"config_digest": digest, "seed": cfg.seed, "data_digest": manifest["config_digest"],
            "pretrain": cfg.pretrain.to_dict()}
    ckpt = out / "checkpoint.bin"
    checkpoint_io.save(ckpt, params, meta)
    log_path = out / "pretrain_log.jsonl"
    log_path.write_text("")
    _append_jsonl(log_path, [{**r, "config_digest": digest, "seed": cfg.seed} for r in rows])
    log.info("pretrained %d steps, final l_total %.4f", len(rows), rows[-1]["l_total"] if rows else float("nan"))
    return ckpt


def cmd_evaluate(cfg: RunConfig, data_dir, checkpoint, with_scratch: bool = False) -> list:
    out = _out_dir(cfg.output_dir)
    manifest = load_manifest(data_dir)
    train, test = load_labeled_splits(data_dir)
    params, meta = checkpoint_io.load(checkpoint)
    seed = int(meta.get("seed", cfg.seed))
    digest = digest_of({"checkpoint": meta.get("config_digest"), "data": manifest["config_digest"],
                        "probe": cfg.to_dict()["probe"], "eval": cfg.to_dict()["eval"]})
    reps = [("pretrained", params)]
    if with_scratch:
        reps.append(("scratch", init_model(params.dims, seed, params.tau)))
    rows = []
    for name, enc in reps:
        metrics = evaluate_representation(enc, train, test, seed, digest, cfg.probe,
                                          cfg.eval.small_fraction, name)
        rows.extend(m.row() for m in metrics)
    _append_jsonl(out / "metrics.jsonl", rows)
    (out / "summary.md").write_text(render_eval_summary(rows))
    return rows


def cmd_ablate(cfg: RunConfig, data_dir, scopes, modes, seeds, threads: int = 1):
    out = _out_dir(cfg.output_dir)
    manifest = load_manifest(data_dir)
    pre = read_videos(Path(data_dir) / SPLIT_FILES["pretrain"], drop_annotation=True)
    train, test = load_labeled_splits(data_dir)
    ds = Dataset(config=None, pretrain=tuple(pre), train=tuple(train), test=tuple(test))
    grid = [(s, m) for s in scopes for m in modes]
    digest = digest_of({"data": manifest["config_digest"], "run": cfg.digest()})
    dims = replace(cfg.dims, d_in=pre[0].features.shape[1])
    table = run_ablation_matrix(ds, grid, seeds, dims, cfg.pretrain, cfg.probe, digest, threads)
    (out / "ablation.csv").write_text(table.csv_text())
    (out / "ablation_metrics.jsonl").write_text("")
    _append_jsonl(out / "ablation_metrics.jsonl", table.rows)
    _write_json(out / "ablation_summary.json", {"summary": table.summary, "direction_check": table.direction,
                                                 "config_digest": digest})
    return table


def render_eval_summary(rows) -> str:
    from .report import eval_tables
    return eval_tables(rows)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            from .report import cmd_report
            cmd_report(args.logs, args.out or args.logs)
            return 0
        cfg = resolve_config(args)
        if args.command == "generate-data":
            print(cmd_generate_data(cfg))
        elif args.command == "pretrain":
            print(cmd_pretrain(cfg, args.data))
        elif args.command == "evaluate":
            rows = cmd_evaluate(cfg, args.data, args.checkpoint, args.with_scratch_baseline)
            print(render_eval_summary(rows))
        elif args.command == "ablate":
            table = cmd_ablate(cfg, args.data, args.scopes.split(","), args.modes.split(","),
                               [int(s) for s in args.seeds.split(",")], args.threads)
            for scope, res in table.direction.items():
                flag = "ok" if res["ok"] else "FLAGGED"
                print(f"direction check {scope}: combined {res['combined']:.3f} "
                      f"vs best single {res['best_single']:.3f} -> {flag}")
    except IntentLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
