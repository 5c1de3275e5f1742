"""Command line interface: ``hofnet <command> [flags]``.

Exit status is 0 on success, 1 on a usage error and 2 on a runtime error.
Each command first prints ``config: {...}`` with every resolved setting;
re-running with those settings reproduces the outputs.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import plots
from .composition import CompositionPlan, KMapping, compose_interpolate, param_interpolate, power_eval
from .estimator import HOFReconstructor
from .exceptions import FormatError, HofError, UsageError
from .funcnets import HOF1, HOF3, LvcSpec, complexity_lvc, count_params, init_params, lvc_forward, lvc_to_hof, mapping_forward
from .geometry.io import atomic_write, format_points, read_points
from .geometry.kdtree import KDTree, brute_force_nn
from .geometry.metrics import chamfer_asym, default_f1_threshold, f1_score
from .geometry.sampling import sample_canonical
from .geometry.voxel import voxelize
from .planning import evaluate_paths, format_report, sample_episodes
from .shapes import format_raster, gen_dataset, parse_raster
from .training import TrainConfig, format_metrics, load_checkpoint, load_config, save_checkpoint

MANIFEST = "manifest.csv"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n\n{self.format_help()}")


def _threads():
    try:
        return max(1, int(os.environ.get("HOFNET_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    threads = _threads()
    if threads == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _print_config(command, args, **extra):
    cfg = {k: v for k, v in vars(args).items() if k != "func" and v is not None}
    cfg.update(extra)
    cfg["command"] = command
    print("config: " + json.dumps(cfg, sort_keys=True, default=str))


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _seeds(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


# ---------------------------------------------------------------- dataset dirs


def _load_dataset(directory):
    directory = Path(directory)
    manifest = directory / MANIFEST
    if not manifest.exists():
        raise FormatError(f"{manifest} not found; create the directory with gen-data")
    with open(manifest) as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        raster = parse_raster((directory / row["raster"]).read_text())
        cloud = read_points(directory / row["cloud"]).points
        out.append((row["shape_id"], raster, cloud))
    if not out:
        raise FormatError(f"{manifest} lists no shapes")
    return out


def cmd_gen_data(args):
    _print_config("gen-data", args)
    data = gen_dataset(args.count, args.seed, n_points=args.n_points, raster_size=args.raster_size)
    out = Path(args.out)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["shape_id", "kind", "raster", "cloud"])
    for i, s in enumerate(data):
        sid = f"shape_{i:03d}"
        atomic_write(out / f"{sid}.raster", format_raster(s.observation))
        atomic_write(out / f"{sid}.xyz", format_points(s.gt, header=f"{sid} {s.shape.kind}"))
        writer.writerow([sid, s.shape.kind, f"{sid}.raster", f"{sid}.xyz"])
    atomic_write(out / MANIFEST, buf.getvalue())
    print(f"wrote {len(data)} shapes to {out}")
    return 0


# ---------------------------------------------------------------- training


_DECODERS = {"hof1": HOF1.layer_sizes, "hof3": HOF3.layer_sizes}


def _train_config(args):
    cfg = load_config(args.config) if args.config else TrainConfig()
    overrides = {}
    for f in fields(TrainConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            overrides[f.name] = v
    if args.decoder:
        overrides["decoder_layers"] = _DECODERS.get(args.decoder.lower()) or tuple(_int_list(args.decoder))
    return TrainConfig(**{**asdict(cfg), **overrides})


def cmd_train(args):
    cfg = _train_config(args)
    _print_config("train", args, train_config=asdict(cfg))
    data = _load_dataset(args.data)
    X = np.stack([r for _, r, _ in data])
    y = [c for _, _, c in data]
    est = HOFReconstructor.from_config(cfg, verbose=args.verbose)
    t0 = time.perf_counter()
    est.fit(X, y)
    elapsed = time.perf_counter() - t0
    save_checkpoint(args.out, est.encoder_, cfg)
    metrics = format_metrics(est.history_)
    if args.metrics:
        atomic_write(args.metrics, metrics)
    if args.plot:
        atomic_write(args.plot, plots.loss_curve(metrics))
    w = max(1, min(50, cfg.steps // 2))
    first = np.mean([r["loss"] for r in est.history_[:w]])
    last = np.mean([r["loss"] for r in est.history_[-w:]])
    print(f"trained {cfg.steps} steps in {elapsed:.1f}s; mean loss first/last {w} steps "
          f"{first:.6f} -> {last:.6f}; checkpoint {args.out}")
    return 0


def _load_model(path):
    ckpt = load_checkpoint(path)
    if ckpt.encoder is None:
        raise FormatError(f"{path} holds no encoder")
    return HOFReconstructor.from_encoder(ckpt.encoder, ckpt.config), ckpt.config


def _read_observation(path):
    return parse_raster(Path(path).read_text())


def cmd_reconstruct(args):
    est, cfg = _load_model(args.ckpt)
    k = cfg.k if args.k is None else args.k
    _print_config("reconstruct", args, k=k)
    pts = est.predict(_read_observation(args.raster)[None], n_points=args.n_points, k=k,
                      random_state=args.seed)[0]
    atomic_write(args.out, format_points(pts, header=f"reconstruction of {args.raster} k={k}"))
    print(f"wrote {len(pts)} points to {args.out}")
    return 0


def cmd_interpolate(args):
    est, cfg = _load_model(args.ckpt)
    if (args.plan is None) == (not args.param_average):
        raise UsageError("interpolate needs exactly one of --plan or --param-average")
    _print_config("interpolate", args)
    a, b = est.decoders(np.stack([_read_observation(args.a), _read_observation(args.b)]))
    x = sample_canonical(cfg.sampler, args.n_points, np.random.default_rng(args.seed))
    if args.param_average:
        pts = power_eval(KMapping(param_interpolate(a, b), cfg.k), x)
        label = f"parameter average, k={cfg.k}"
    else:
        plan = CompositionPlan.parse(args.plan)
        pts = compose_interpolate(a, b, plan, x)
        label = f"composition plan {plan}"
    atomic_write(args.out, format_points(pts, header=label))
    print(f"wrote {len(pts)} points ({label}) to {args.out}")
    return 0


# ---------------------------------------------------------------- evaluation


def cmd_eval(args):
    est, cfg = _load_model(args.ckpt)
    _print_config("eval", args)
    data = _load_dataset(args.data)

    def one(item):
        idx, (sid, raster, gt) = item
        rows = []
        for n in args.n_points:
            pred = est.predict(raster[None], n_points=n, random_state=args.seed + idx)[0]
            fwd, bwd = chamfer_asym(pred, gt), chamfer_asym(gt, pred)
            tau = default_f1_threshold(gt, args.tau_frac)
            rows.append([sid, n, repr(fwd), repr(bwd), repr(fwd + bwd), repr(f1_score(pred, gt, tau))])
        return rows

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["shape_id", "n_points", "chamfer_fwd", "chamfer_bwd", "chamfer_sym", "f1"])
    for rows in _map(one, list(enumerate(data))):
        writer.writerows(rows)
    text = buf.getvalue()
    atomic_write(args.out, text)
    if args.plot:
        atomic_write(args.plot, plots.resolution_curve(text))
    print(text, end="")
    return 0


def _in_cube(points):
    return points[np.all(np.abs(points) <= 1.0, axis=1)]


def cmd_plan(args):
    est, cfg = _load_model(args.ckpt)
    _print_config("plan", args)
    data = _load_dataset(args.data)
    rngs = _seeds(args.seed, len(data))

    def one(item):
        (sid, raster, gt), rng = item
        pred = est.predict(raster[None], n_points=args.n_points, random_state=rng)[0]
        gt_grid = voxelize(_in_cube(gt), args.n)
        pred_grid = voxelize(_in_cube(pred), args.n)
        episodes = sample_episodes(args.n, args.episodes, rng)
        return [
            evaluate_paths(pred_grid, gt_grid, episodes, "astar", f"{sid}/hof"),
            evaluate_paths(gt_grid, gt_grid, episodes, "astar", f"{sid}/gt"),
            evaluate_paths(None, gt_grid, episodes, "shortest_l1", f"{sid}/shortest_l1"),
            evaluate_paths(None, gt_grid, episodes, "sabb", f"{sid}/sabb"),
        ]

    reports = [r for group in _map(one, list(zip(data, rngs))) for r in group]
    text = format_report(reports)
    atomic_write(args.out, text)
    print(text, end="")
    return 0


# ---------------------------------------------------------------- benchmark


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _bench_chamfer(backend, n, rng):
    x = sample_canonical("ball3_interior", n, rng)
    y = sample_canonical("sphere3_surface", n, rng)
    if backend == "kdtree":
        return lambda: (KDTree(y).query(x)[0].mean(), KDTree(x).query(y)[0].mean())
    return lambda: (brute_force_nn(x, y)[0].mean(), brute_force_nn(y, x)[0].mean())


def _bench_mapping(backend, n, rng):
    spec = {"hof1": HOF1, "hof3": HOF3}[backend]
    params = init_params(spec, rng)
    x = sample_canonical("ball3_interior", n, rng)
    return lambda: mapping_forward(params, x)


_BENCH = {
    "chamfer": (_bench_chamfer, ("kdtree", "brute")),
    "mapping": (_bench_mapping, ("hof1", "hof3")),
}


def cmd_bench(args):
    make, allowed = _BENCH[args.metric]
    backends = [b.strip() for b in args.backend.split(",") if b.strip()] if args.backend else list(allowed)
    bad = [b for b in backends if b not in allowed]
    if bad:
        raise UsageError(f"backend(s) {bad} not valid for metric {args.metric}; choose from {allowed}")
    _print_config("bench", args, backends=backends)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric", "backend", "n", "seconds"])
    for n in args.n:
        for backend in backends:
            fn = make(backend, n, np.random.default_rng(args.seed))
            writer.writerow([args.metric, backend, n, f"{_time(fn, args.repeats):.6f}"])
    text = buf.getvalue()
    atomic_write(args.out, text)
    if args.plot:
        atomic_write(args.plot, plots.bench_chart(text))
    print(text, end="")
    return 0


# ---------------------------------------------------------------- LVC conversion


_LVC_KEYS = {"layer_sizes", "codeword_len", "injection_layers", "activation", "seed"}


def load_lvc_spec(path):
    """LVC decoder from a key=value file; weights are drawn from ``seed``."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        if not sep or key not in _LVC_KEYS:
            raise FormatError(f"{path}:{lineno}: expected one of {sorted(_LVC_KEYS)} as key=value")
        values[key] = value
    missing = {"layer_sizes", "codeword_len"} - values.keys()
    if missing:
        raise FormatError(f"{path}: missing keys {sorted(missing)}")
    try:
        return LvcSpec.random(
            _int_list(values["layer_sizes"]),
            int(values["codeword_len"]),
            _int_list(values.get("injection_layers", "0")),
            values.get("activation", "relu"),
            rng=int(values.get("seed", "0")),
        )
    except (ValueError, argparse.ArgumentTypeError) as err:
        raise FormatError(f"{path}: {err}") from None


def cmd_convert_lvc(args):
    spec = load_lvc_spec(args.spec)
    z = np.asarray(_float_list(args.codeword) if args.codeword else [], dtype=np.float64)
    _print_config("convert-lvc", args)
    hof = lvc_to_hof(spec, z)
    print(f"lvc complexity {complexity_lvc(spec)}; converted decoder parameters {count_params(hof.spec)}")
    status = 0
    if args.check:
        probes = np.random.default_rng(args.seed).uniform(-1, 1, (args.probes, spec.layer_sizes[0]))
        dev = float(np.max(np.abs(lvc_forward(spec, z, probes) - mapping_forward(hof, probes))))
        ok = dev < 1e-10
        print(f"max deviation {dev:.3e} over {args.probes} probes: {'ok' if ok else 'FAILED'}")
        status = 0 if ok else 2
    if args.out:
        # a bare decoder file: no encoder, the config block is unused
        save_checkpoint(args.out, None, TrainConfig(), cached=[hof], decoder_spec=hof.spec)
        print(f"wrote converted decoder to {args.out}")
    return status


# ---------------------------------------------------------------- parser


def build_parser():
    p = _Parser(prog="hofnet", description="Higher-order function networks for point clouds.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gen-data", help="write a synthetic (silhouette, cloud) dataset")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--n-points", type=int, default=2000)
    g.add_argument("--raster-size", type=int, default=32)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train an encoder on a gen-data directory")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--config", help="key=value file with TrainConfig fields")
    t.add_argument("--decoder", help="hof1, hof3 or comma-separated layer sizes")
    t.add_argument("--lr", type=float)
    t.add_argument("--steps", type=int)
    t.add_argument("--k", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--n-samples", dest="n_samples", type=int)
    t.add_argument("--sampler")
    t.add_argument("--regularize", action="store_const", const=True)
    t.add_argument("--reg-lambda", dest="reg_lambda", type=float)
    t.add_argument("--metrics", help="CSV log path")
    t.add_argument("--plot", help="SVG loss curve path")
    t.add_argument("--verbose", action="store_true")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("reconstruct", help="decode one raster into a point cloud")
    r.add_argument("--ckpt", required=True)
    r.add_argument("--raster", required=True)
    r.add_argument("--n-points", type=int, default=10000)
    r.add_argument("--k", type=int)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_reconstruct)

    i = sub.add_parser("interpolate", help="mix two objects by composition or parameter averaging")
    i.add_argument("--ckpt", required=True)
    i.add_argument("--a", required=True)
    i.add_argument("--b", required=True)
    i.add_argument("--plan", help="stages in application order, e.g. ABBA")
    i.add_argument("--param-average", action="store_true")
    i.add_argument("--n-points", type=int, default=10000)
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_interpolate)

    e = sub.add_parser("eval", help="Chamfer and F1 of reconstructions at several resolutions")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--n-points", type=_int_list, default=[1000, 10000])
    e.add_argument("--tau-frac", type=float, default=0.01)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.add_argument("--plot")
    e.set_defaults(func=cmd_eval)

    pl = sub.add_parser("plan", help="path-planning benchmark around reconstructed objects")
    pl.add_argument("--ckpt", required=True)
    pl.add_argument("--data", required=True)
    pl.add_argument("--n", type=int, default=32)
    pl.add_argument("--episodes", type=int, default=100)
    pl.add_argument("--n-points", type=int, default=10000)
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plan)

    b = sub.add_parser("bench", help="time nearest-neighbour Chamfer or mapping evaluation")
    b.add_argument("--metric", choices=sorted(_BENCH), default="chamfer")
    b.add_argument("--n", type=_int_list, default=[10000])
    b.add_argument("--backend", help="comma-separated backends")
    b.add_argument("--repeats", type=int, default=1)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default="bench.csv")
    b.add_argument("--plot")
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("convert-lvc", help="fold an LVC decoder's codeword into mapping-network biases")
    c.add_argument("--spec", required=True)
    c.add_argument("--codeword", default="")
    c.add_argument("--check", action="store_true")
    c.add_argument("--probes", type=int, default=64)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(func=cmd_convert_lvc)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as err:
        print(str(err), file=sys.stderr)
        return 1
    except (HofError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
