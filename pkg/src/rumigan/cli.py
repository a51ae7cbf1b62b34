"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure (including failed oracle trials or
a diverged run), 2 rejected configuration.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import mnist, oracles
from .config import ConfigError, ExperimentConfig, load_config
from .distributions import DATASET_SCENARIOS, SplitSpec, make_split
from .evaluation import METRIC_COLUMNS, evaluate, frechet_distance, pr_curve
from .training import Checkpoint, TrainingDiverged, build_networks, eval_samples, reference_samples, train

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
ORACLE_FAMILIES = ("sgan", "lsgan", "fgan:kl", "fgan:reverse-kl", "fgan:pearson",
                   "fgan:hellinger", "fgan:sgan")
CKPT_DIR = "checkpoints"
MANIFEST = "manifest.json"


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


# -- run directories ----------------------------------------------------------------

def build_split(cfg: ExperimentConfig) -> SplitSpec:
    dataset = None
    if cfg.scenario in DATASET_SCENARIOS:
        if not (cfg.mnist_images and cfg.mnist_labels):
            raise ConfigError("mnist: scenario needs mnist.images and mnist.labels (or --mnist-images/--mnist-labels)")
        dataset = mnist.load_idx(cfg.mnist_images, cfg.mnist_labels)
    split = make_split(cfg.scenario, cfg.train.seed, cfg.minority_fraction, dataset)
    return split.swapped() if cfg.swap_roles else split


def _ckpt_name(step: int) -> str:
    return f"step_{step:08d}.rumi"


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue())


def write_manifest(run_dir: Path) -> None:
    """List every file in the run with its size and sha256 (no timestamps)."""
    files = []
    for p in sorted(run_dir.rglob("*")):
        if p.is_file() and p.name != MANIFEST:
            data = p.read_bytes()
            files.append({"path": p.relative_to(run_dir).as_posix(), "bytes": len(data),
                          "sha256": hashlib.sha256(data).hexdigest()})
    (run_dir / MANIFEST).write_text(json.dumps({"files": files}, indent=1, sort_keys=True) + "\n")


def read_metrics(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run_training(cfg: ExperimentConfig, out: Path, resume: str | None = None, overwrite: bool = False) -> int:
    split = build_split(cfg)
    ckpt = None
    rows: list[list] = []
    if resume is not None:
        path = Path(resume)
        if resume == "latest":
            found = sorted((out / CKPT_DIR).glob("step_*.rumi"))
            if not found:
                _err(f"no checkpoints under {out / CKPT_DIR}")
                return EXIT_RUNTIME
            path = found[-1]
        ckpt = Checkpoint.load(path)
        if (out / "metrics.csv").exists():
            rows = [[r[c] for c in METRIC_COLUMNS] for r in read_metrics(out / "metrics.csv")
                    if int(r["step"]) <= ckpt.step]
    elif (out / "metrics.csv").exists() and not overwrite:
        _err(f"{out} already holds a run; pass --resume or --overwrite")
        return EXIT_RUNTIME
    out.mkdir(parents=True, exist_ok=True)
    (out / CKPT_DIR).mkdir(exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=1, sort_keys=True) + "\n")

    def on_checkpoint(ck, report, gen):
        ck.save(out / CKPT_DIR / _ckpt_name(ck.step))
        row = report.row()
        rows.append([row[c] for c in METRIC_COLUMNS])
        _write_csv(out / "metrics.csv", METRIC_COLUMNS, rows)
        header = ["step"] + [f"x{i}" for i in range(gen.shape[1])]
        _write_csv(out / f"samples_{ck.step:08d}.csv", header, [[ck.step, *map(float, g)] for g in gen])

    try:
        train(cfg.train, split, resume=ckpt, on_checkpoint=on_checkpoint)
    except TrainingDiverged as err:
        err.snapshot.save(out / "diverged.rumi")
        _err(f"training diverged ({err}); last good state saved to {out / 'diverged.rumi'}")
        write_manifest(out)
        return EXIT_RUNTIME
    write_manifest(out)
    return EXIT_OK


# -- subcommands ----------------------------------------------------------------------

def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "mnist_images", None) or getattr(args, "mnist_labels", None):
        from dataclasses import replace
        cfg = replace(cfg, mnist_images=args.mnist_images or cfg.mnist_images,
                      mnist_labels=args.mnist_labels or cfg.mnist_labels)
    return cfg


def cmd_train(args) -> int:
    try:
        cfg = _load(args)
        out = args.output or cfg.output_dir
        if out is None:
            raise ConfigError("output_dir: not set (config field or --output)")
        return run_training(cfg, Path(out), args.resume, args.overwrite)
    except ConfigError as err:
        _err(str(err))
        return EXIT_CONFIG


def cmd_oracle_check(args) -> int:
    families = args.families.split(",") if args.families else list(ORACLE_FAMILIES)
    for f in families:
        if f not in ORACLE_FAMILIES:
            _err(f"families: unknown {f!r}; known: {','.join(ORACLE_FAMILIES)}")
            return EXIT_CONFIG
    rows = []
    for f in families:
        rows += oracles.run_trials(f, args.trials, args.seed)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=oracles.TRIAL_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (int(v) if isinstance(v, (bool, np.bool_)) else v) for k, v in r.items()})
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    if args.report:
        report = {
            "lsgan_special_case": oracles.lsgan_special_case_report(seed=args.seed),
            "lsgan_label_configurations": oracles.lsgan_label_report(seed=args.seed),
            "fgan_table": oracles.fgan_table_report(seed=args.seed),
        }
        Path(args.report).write_text(json.dumps(report, indent=1, default=float) + "\n")
    failed = [r for r in rows if not r["passed"]]
    if failed:
        _err(f"{len(failed)} of {len(rows)} trials exceeded tolerance")
        return EXIT_RUNTIME
    return EXIT_OK


def _read_samples(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        cols = [i for i, h in enumerate(header) if h != "step"]
        return np.array([[float(row[i]) for i in cols] for row in rd])


def cmd_eval(args) -> int:
    if args.run:
        run = Path(args.run)
        try:
            cfg = load_config(run / "config.json", env={})  # the saved config already has its seed
        except ConfigError as err:
            _err(str(err))
            return EXIT_CONFIG
        found = sorted((run / CKPT_DIR).glob("step_*.rumi"))
        if args.step is not None:
            found = [p for p in found if p.name == _ckpt_name(args.step)]
        if not found:
            _err("no matching checkpoint")
            return EXIT_RUNTIME
        ck = Checkpoint.load(found[-1])
        split = build_split(cfg)
        gen_net, _ = build_networks(cfg.train, split.dim, np.random.default_rng(0))
        gen_net.set_params(ck.g_params)
        gen = eval_samples(gen_net, cfg.train, ck.step)
        row = evaluate(gen, reference_samples(cfg.train, split), split, ck.step,
                       cfg.train.num_clusters, cfg.train.num_angles, cfg.train.seed).row()
    elif args.real and args.gen:
        real, gen = _read_samples(args.real), _read_samples(args.gen)
        pr = pr_curve(real, gen, args.clusters, args.angles, args.seed)
        row = {"frechet": frechet_distance(real, gen), "max_f1": pr.max_f1,
               "precision_at_r10": pr.precision_at_recall(0.1), "recall_at_p90": pr.recall_at_precision(0.9)}
    else:
        _err("eval needs --run DIR or both --real and --gen")
        return EXIT_CONFIG
    print(json.dumps(row, sort_keys=True))
    return EXIT_OK


def cmd_compare(args) -> int:
    runs = [Path(r) for r in args.runs]
    tables = {}
    for r in runs:
        path = r / "metrics.csv"
        if not path.exists():
            _err(f"{path} not found")
            return EXIT_RUNTIME
        tables[r] = {int(row["step"]): row for row in read_metrics(path)}
    names = [r.name or str(r) for r in runs]
    steps = sorted(set().union(*(t.keys() for t in tables.values())))
    rows = [[s] + [tables[r].get(s, {}).get(args.metric, "") for r in runs] for s in steps]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step"] + names)
    w.writerows(rows)
    if args.summary:
        w.writerow([])
        w.writerow(["run", "final_step"] + [c for c in METRIC_COLUMNS if c != "step"])
        for name, r in zip(names, runs):
            last = tables[r][max(tables[r])] if tables[r] else {}
            w.writerow([name, last.get("step", "")] + [last.get(c, "") for c in METRIC_COLUMNS if c != "step"])
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def _sweep_one(path: str) -> int:
    try:
        cfg = load_config(path)
        if cfg.output_dir is None:
            raise ConfigError("output_dir: every sweep config needs one")
        return run_training(cfg, Path(cfg.output_dir))
    except ConfigError as err:
        _err(f"{path}: {err}")
        return EXIT_CONFIG


def cmd_sweep(args) -> int:
    try:
        outs = [load_config(p).output_dir for p in args.configs]
    except ConfigError as err:
        _err(str(err))
        return EXIT_CONFIG
    resolved = [str(Path(o).resolve()) if o else None for o in outs]
    if None in resolved or len(set(resolved)) != len(resolved):
        _err("output_dir: sweep configs need distinct output directories")
        return EXIT_CONFIG
    if args.workers <= 1:
        codes = [_sweep_one(p) for p in args.configs]
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            codes = list(pool.map(_sweep_one, args.configs))
    return max(codes, default=EXIT_OK)


def cmd_make_fixtures(args) -> int:
    img, lab = mnist.write_fixtures(args.out, args.count, args.seed)
    print(img)
    print(lab)
    return EXIT_OK


def cmd_plot_data(args) -> int:
    """Whitespace-separated data for gnuplot: histogram (1-D) or raw points."""
    found = sorted(Path(args.run).glob("samples_*.csv"))
    if args.step is not None:
        found = [p for p in found if p.name == f"samples_{args.step:08d}.csv"]
    if not found:
        _err(f"no matching samples under {args.run}")
        return EXIT_RUNTIME
    path = found[-1]
    x = _read_samples(path)
    lines = []
    if x.shape[1] == 1:
        dens, edges = np.histogram(x[:, 0], bins=args.bins, density=True)
        centers = 0.5 * (edges[1:] + edges[:-1])
        lines = [f"{float(c)!r} {float(d)!r}" for c, d in zip(centers, dens)]
    else:
        lines = [" ".join(repr(float(v)) for v in row) for row in x]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rumigan", description="Positive/negative-class GAN experiments")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run one training experiment from a JSON config")
    t.add_argument("config")
    t.add_argument("--output", help="override output_dir")
    t.add_argument("--resume", help="checkpoint path, or 'latest' in the output dir")
    t.add_argument("--overwrite", action="store_true")
    t.add_argument("--mnist-images")
    t.add_argument("--mnist-labels")
    t.set_defaults(fn=cmd_train)

    o = sub.add_parser("oracle-check", help="closed-form vs brute-force optimality trials")
    o.add_argument("--families", help=f"comma list from {','.join(ORACLE_FAMILIES)} (default all)")
    o.add_argument("--trials", type=int, default=50)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out", help="CSV path (default stdout)")
    o.add_argument("--report", help="write the label/table diagnostics as JSON")
    o.set_defaults(fn=cmd_oracle_check)

    e = sub.add_parser("eval", help="metrics for a run checkpoint or two sample files")
    e.add_argument("--run")
    e.add_argument("--step", type=int)
    e.add_argument("--real")
    e.add_argument("--gen")
    e.add_argument("--clusters", type=int, default=20)
    e.add_argument("--angles", type=int, default=1001)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(fn=cmd_eval)

    c = sub.add_parser("compare", help="align one metric across runs by step")
    c.add_argument("runs", nargs="+")
    c.add_argument("--metric", default="frechet", choices=[m for m in METRIC_COLUMNS if m != "step"])
    c.add_argument("--summary", action="store_true", help="append final values per run")
    c.add_argument("--out")
    c.set_defaults(fn=cmd_compare)

    s = sub.add_parser("sweep", help="train several configs, one per worker")
    s.add_argument("configs", nargs="+")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(fn=cmd_sweep)

    f = sub.add_parser("make-fixtures", help="write small synthetic IDX files")
    f.add_argument("--out", required=True)
    f.add_argument("--count", type=int, default=2400)
    f.add_argument("--seed", type=int, default=0)
    f.set_defaults(fn=cmd_make_fixtures)

    d = sub.add_parser("plot-data", help="gnuplot-ready data from a run's samples")
    d.add_argument("run")
    d.add_argument("--step", type=int)
    d.add_argument("--bins", type=int, default=100)
    d.add_argument("--out")
    d.set_defaults(fn=cmd_plot_data)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (OSError, RuntimeError, ValueError) as err:
        _err(str(err))
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
