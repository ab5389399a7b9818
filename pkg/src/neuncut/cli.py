"""Command-line interface: ``neuncut <command> [flags]``.

Commands: generate, affinity-stats, train, infer, eval, baseline-ncut,
gamma-search. Exit status is 0 on success, 1 for bad input or
configuration, 2 when training diverges.
"""
from __future__ import annotations

import argparse
import io
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import MAX_N, ncut_baseline
from .data import (DataMatrix, atomic_write_text, fmt_float, gen_double_c, gen_double_rings,
                   load_csv, load_labels, save_csv, save_labels)
from .errors import InvalidConfig, InvalidInput, NeuncutError, NumericalError, SearchFailed
from .gamma_search import DEFAULT_ABS_TOL, DEFAULT_PROBE_FRACTION, DEFAULT_TAU, default_grid, search
from .graph import heat_kernel_affinity, sparsify_knn
from .metrics import evaluate
from .model import MlpModel
from .trainer import TrainConfig, infer, train

log = logging.getLogger("neuncut")

PLOT_COLUMNS = ("x", "y", "predicted_label")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------- helpers

def _write_json(obj, path=None):
    text = json.dumps(obj, indent=None, sort_keys=False) + "\n"
    if path:
        atomic_write_text(path, text)
    else:
        sys.stdout.write(text)


def _round6(d):
    return {k: round(float(v), 6) for k, v in d.items()}


def read_config_file(path) -> dict:
    """``key=value`` lines; ``#`` starts a comment. Keys use flag spelling without dashes."""
    path = Path(path)
    if not path.is_file():
        raise InvalidInput(f"no such config file: {path}")
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def emit_plotdata(obj, path, labels=None) -> None:
    """Write plot-ready CSV.

    For a TrainLog: columns iter, lap, orth, total, lr (+ acc, nmi, ari).
    For 2-D points with ``labels``: columns x, y, predicted_label.
    """
    if hasattr(obj, "save_csv") and hasattr(obj, "records"):
        obj.save_csv(path)
        return
    points = getattr(obj, "points", obj)
    points = np.asarray(points, dtype=np.float64)
    if labels is None:
        raise InvalidInput("point dumps need predicted labels")
    labels = np.asarray(labels)
    if points.ndim != 2 or points.shape[1] != 2:
        raise InvalidInput(f"point dumps need 2-D data, got shape {points.shape}")
    if len(labels) != len(points):
        raise InvalidInput("labels and points differ in length")
    if len(points) == 0:
        raise InvalidInput("nothing to write")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLOT_COLUMNS)
    for (x, y), lab in zip(points, labels):
        w.writerow([fmt_float(x), fmt_float(y), int(lab)])
    atomic_write_text(path, buf.getvalue())


def _hidden(text):
    try:
        dims = tuple(int(t) for t in str(text).replace("x", ",").split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad hidden dims {text!r}; use e.g. 512,512") from None
    if not dims:
        raise argparse.ArgumentTypeError("need at least one hidden layer")
    return dims


def _opt_int(text):
    if str(text).lower() in ("", "none", "0"):
        return None
    return int(text)


def _floats(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _add_seed(p):
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")


def _add_train_flags(p):
    d = TrainConfig()
    p.add_argument("--data", required=True, help="training data CSV")
    p.add_argument("--clusters", "-k", type=int, default=d.k, help="number of clusters k (default %(default)s)")
    p.add_argument("--gamma", type=float, default=d.gamma, help="orthogonality penalty weight (default %(default)s)")
    p.add_argument("--lr", type=float, default=d.lr0, help="initial learning rate (default %(default)s)")
    p.add_argument("--weight-decay", type=float, default=d.weight_decay,
                   help="decoupled weight decay (default %(default)s)")
    p.add_argument("--batch-size", "-m", type=int, default=d.batch_size, help="mini-batch size (default %(default)s)")
    p.add_argument("--epochs", type=int, default=d.epochs, help="training epochs (default %(default)s)")
    p.add_argument("--sigma", type=float, default=d.sigma, help="heat-kernel bandwidth (default %(default)s)")
    p.add_argument("--knn-s", type=_opt_int, default=d.knn_s,
                   help="keep the s largest affinities per row (default: keep all)")
    p.add_argument("--objective", choices=("ncut", "rcut"), default=d.objective,
                   help="normalized cut or ratio cut (default %(default)s)")
    p.add_argument("--hidden", type=_hidden, default=d.hidden_dims,
                   help="hidden layer widths, comma separated (default 512,512)")
    p.add_argument("--self-loops", type=_bool, default=d.self_loops,
                   help="keep a_ii = 1 on the affinity diagonal (default false)")
    p.add_argument("--restarts", type=int, default=d.restarts,
                   help="independent initializations; keep the lowest final-epoch loss (default %(default)s)")
    p.add_argument("--train-size", type=int, default=None,
                   help="train on a random subset of this many points (default: all)")
    _add_seed(p)
    p.add_argument("--config", help="file of key=value defaults; explicit flags win")


def _config_from_args(a) -> TrainConfig:
    return TrainConfig(k=a.clusters, gamma=a.gamma, lr0=a.lr, weight_decay=a.weight_decay,
                       batch_size=a.batch_size, epochs=a.epochs, sigma=a.sigma, knn_s=a.knn_s,
                       seed=a.seed, objective=a.objective, hidden_dims=a.hidden,
                       self_loops=a.self_loops, restarts=a.restarts)


def _training_data(a) -> DataMatrix:
    data = load_csv(a.data)
    if a.train_size is not None:
        if not 2 <= a.train_size <= data.n:
            raise InvalidConfig(f"--train-size must be in [2, {data.n}], got {a.train_size}")
        idx = np.sort(np.random.default_rng(a.seed).choice(data.n, a.train_size, replace=False))
        data = data.subset(idx)
    return data


# ---------------------------------------------------------------- commands

def cmd_generate(a):
    if a.shape == "rings":
        radii = tuple(a.radii) if a.radii else (6.0, 18.0)
        if len(radii) != 2:
            raise InvalidConfig("--radii needs two values, e.g. 6,18")
        data = gen_double_rings(a.n, radii=radii, noise=a.noise, seed=a.seed)
    else:
        data = gen_double_c(a.n, scale=a.scale, noise=a.noise, seed=a.seed)
    save_csv(data, a.out)
    if a.labels_out:
        save_labels(data.labels, a.labels_out)
    return 0


def cmd_affinity_stats(a):
    data = load_csv(a.data)
    X = data.points
    if X.shape[0] > a.max_n:
        idx = np.sort(np.random.default_rng(a.seed).choice(X.shape[0], a.max_n, replace=False))
        X = X[idx]
    G = heat_kernel_affinity(X, a.sigma, self_loops=a.self_loops)
    if a.knn_s is not None and a.knn_s < G.size - 1:
        G = sparsify_knn(G, a.knn_s)
    A, deg = G.affinity, G.degrees
    off = A[~np.eye(G.size, dtype=bool)]
    stats = {
        "n": int(G.size),
        "sigma": a.sigma,
        "s": a.knn_s,
        "symmetric": bool(np.array_equal(A, A.T)),
        "degree_min": float(deg.min()),
        "degree_mean": float(deg.mean()),
        "degree_max": float(deg.max()),
        "zero_degree_rows": int((deg == 0).sum()),
        "nonzero_per_row_mean": float((A > 0).sum(1).mean()),
        "affinity_mean": float(off.mean()),
        "fraction_below_1e-6": float((off < 1e-6).mean()),
    }
    _write_json(stats, a.out)
    return 0


def cmd_train(a):
    cfg = _config_from_args(a)
    data = _training_data(a)
    try:
        model, trainlog = train(data, cfg, checkpoint_path=a.checkpoint,
                                track_metrics=data.labels is not None and a.track_metrics)
    except NumericalError as exc:
        if a.checkpoint and exc.checkpoint is not None:
            atomic_write_text(a.checkpoint, MlpModel.from_dict(exc.checkpoint).to_json())
            log.error("last good parameters saved to %s", a.checkpoint)
        raise
    atomic_write_text(a.model_out, model.to_json())
    if a.log_out:
        emit_plotdata(trainlog, a.log_out)
    last = trainlog.records[-1] if trainlog.records else {}
    log.info("trained %d steps; final lap=%.4g orth=%.4g", len(trainlog), last.get("lap", np.nan),
             last.get("orth", np.nan))
    return 0


def _load_model(path) -> MlpModel:
    path = Path(path)
    if not path.is_file():
        raise InvalidInput(f"no such model file: {path}")
    return MlpModel.from_json(path.read_text())


def cmd_infer(a):
    model = _load_model(a.model)
    data = load_csv(a.data)
    labels, Y = infer(model, data)
    save_labels(labels, a.out)
    if a.memberships_out:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"y{j}" for j in range(Y.shape[1])])
        for row in Y:
            w.writerow([fmt_float(v) for v in row])
        atomic_write_text(a.memberships_out, buf.getvalue())
    if a.plot_out:
        emit_plotdata(data, a.plot_out, labels)
    return 0


def cmd_eval(a):
    pred = load_labels(a.pred)
    truth = load_labels(a.truth)
    _write_json(_round6(evaluate(pred, truth)), a.out)
    return 0


def cmd_baseline(a):
    data = load_csv(a.data)
    labels = ncut_baseline(data.points, a.clusters, sigma=a.sigma, s=a.knn_s, seed=a.seed,
                           restarts=a.restarts, max_n=a.max_n, self_loops=a.self_loops)
    save_labels(labels, a.out)
    if a.plot_out:
        emit_plotdata(data, a.plot_out, labels)
    return 0


def cmd_gamma_search(a):
    cfg = _config_from_args(a)
    data = _training_data(a)
    grid = a.grid if a.grid else default_grid(a.grid_high, a.grid_low, a.grid_ratio)

    def progress(p):
        log.info("gamma=%g optimal_lap=%.4g optimal_orth=%.4g", p.gamma, p.optimal_lap, p.optimal_orth)

    try:
        report = search(data.points, cfg, grid=grid, tau=a.tau, abs_tol=a.abs_tol,
                        epoch_fraction=a.probe_fraction, progress=progress)
    except SearchFailed as exc:
        if a.report_out and exc.report is not None:
            exc.report.save_csv(a.report_out)
        raise
    if a.report_out:
        report.save_csv(a.report_out)
    _write_json({"gamma": report.selected, "bound": report.bound, "threshold": report.threshold})
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="neuncut", description="Neural normalized cut clustering.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("generate", help="write a synthetic 2-D dataset")
    g.add_argument("--shape", choices=("rings", "c"), default="rings", help="double rings or double C")
    g.add_argument("--n", type=int, default=10000, help="number of points (default %(default)s)")
    g.add_argument("--noise", type=float, default=0.6, help="Gaussian noise std (default %(default)s)")
    g.add_argument("--radii", type=_floats, default=None, help="ring radii, e.g. 6,18 (rings only)")
    g.add_argument("--scale", type=float, default=15.0, help="arc radius (double C only, default %(default)s)")
    g.add_argument("--out", required=True, help="output CSV (x0,x1,label)")
    g.add_argument("--labels-out", help="also write labels, one per line")
    _add_seed(g)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("affinity-stats", help="summarize the heat-kernel graph of a dataset")
    s.add_argument("--data", required=True, help="data CSV")
    s.add_argument("--sigma", type=float, default=3.0, help="heat-kernel bandwidth (default %(default)s)")
    s.add_argument("--knn-s", type=_opt_int, default=None, help="row sparsification s (default: none)")
    s.add_argument("--self-loops", type=_bool, default=False, help="keep a_ii = 1 (default false)")
    s.add_argument("--max-n", type=int, default=MAX_N, help="subsample to at most this many points")
    s.add_argument("--out", help="write JSON here instead of stdout")
    _add_seed(s)
    s.set_defaults(func=cmd_affinity_stats)

    t = sub.add_parser("train", help="train the membership network")
    _add_train_flags(t)
    t.add_argument("--model-out", required=True, help="model JSON path")
    t.add_argument("--log-out", help="training log CSV (iter,lap,orth,total,lr[,acc,nmi,ari])")
    t.add_argument("--checkpoint", help="rewrite the model JSON here after every epoch")
    t.add_argument("--track-metrics", type=_bool, default=True,
                   help="per-epoch ACC/NMI/ARI when the data has labels (default true)")
    t.set_defaults(func=cmd_train)

    i = sub.add_parser("infer", help="assign clusters with a trained model")
    i.add_argument("--model", required=True, help="model JSON")
    i.add_argument("--data", required=True, help="data CSV")
    i.add_argument("--out", required=True, help="predicted labels, one per line")
    i.add_argument("--memberships-out", help="soft memberships CSV")
    i.add_argument("--plot-out", help="x,y,predicted_label CSV (2-D data only)")
    _add_seed(i)
    i.set_defaults(func=cmd_infer)

    e = sub.add_parser("eval", help="ACC / NMI / ARI of predicted labels")
    e.add_argument("--pred", required=True, help="predicted labels file")
    e.add_argument("--truth", required=True, help="true labels file (or a CSV with a label column)")
    e.add_argument("--out", help="write JSON here instead of stdout")
    _add_seed(e)
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("baseline-ncut", help="classical spectral clustering (dense eigensolver)")
    b.add_argument("--data", required=True, help="data CSV")
    b.add_argument("--clusters", "-k", type=int, default=2, help="number of clusters (default %(default)s)")
    b.add_argument("--sigma", type=float, default=3.0, help="heat-kernel bandwidth (default %(default)s)")
    b.add_argument("--knn-s", type=_opt_int, default=None, help="row sparsification s (default: none)")
    b.add_argument("--self-loops", type=_bool, default=False, help="keep a_ii = 1 (default false)")
    b.add_argument("--restarts", type=int, default=10, help="k-means restarts (default %(default)s)")
    b.add_argument("--max-n", type=int, default=MAX_N, help="refuse inputs larger than this")
    b.add_argument("--out", required=True, help="predicted labels, one per line")
    b.add_argument("--plot-out", help="x,y,predicted_label CSV (2-D data only)")
    _add_seed(b)
    b.set_defaults(func=cmd_baseline)

    s = sub.add_parser("gamma-search", help="label-free choice of gamma")
    _add_train_flags(s)
    s.add_argument("--grid", type=_floats, default=None, help="explicit descending grid, comma separated")
    s.add_argument("--grid-high", type=float, default=1e6, help="largest grid value (default %(default)g)")
    s.add_argument("--grid-low", type=float, default=1e-3, help="smallest grid value (default %(default)g)")
    s.add_argument("--grid-ratio", type=float, default=10**0.5, help="grid ratio (default sqrt(10))")
    s.add_argument("--tau", type=float, default=DEFAULT_TAU, help="relative tolerance (default %(default)s)")
    s.add_argument("--abs-tol", type=float, default=DEFAULT_ABS_TOL,
                   help="absolute tolerance on L_orth (default %(default)s)")
    s.add_argument("--probe-fraction", type=float, default=DEFAULT_PROBE_FRACTION,
                   help="fraction of --epochs used by each probe (default %(default)s)")
    s.add_argument("--report-out", help="CSV: gamma,optimal_lap,optimal_orth,selected_flag")
    s.set_defaults(func=cmd_gamma_search)
    return p


def _apply_config(parser, argv):
    """Re-parse with values from --config as defaults for the chosen subcommand."""
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    if "--config" not in argv and not any(t.startswith("--config=") for t in argv):
        return parser.parse_args(argv)
    # first pass only locates the config file; required flags may come from it
    required = [a for sp in sub.choices.values() for a in sp._actions if a.required]
    for a in required:
        a.required = False
    try:
        args = parser.parse_args(argv)
    finally:
        for a in required:
            a.required = True
    path = getattr(args, "config", None)
    if not path:
        return parser.parse_args(argv)
    values = read_config_file(path)
    subparser = sub.choices[args.command]
    known = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, raw in values.items():
        dest = {"k": "clusters", "lr0": "lr", "hidden_dims": "hidden", "m": "batch_size"}.get(key, key)
        if dest not in known or dest in ("config", "help"):
            raise InvalidConfig(f"{path}: unknown key {key!r}")
        action = known[dest]
        conv = action.type or str
        try:
            defaults[dest] = conv(raw)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise InvalidConfig(f"{path}: bad value for {key}: {exc}") from None
    # required flags satisfied by the config file
    for dest in defaults:
        known[dest].required = False
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s", stream=sys.stderr)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"neuncut: numerical error: {exc}", file=sys.stderr)
        return 2
    except (NeuncutError, ValueError, OSError) as exc:
        print(f"neuncut: error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
