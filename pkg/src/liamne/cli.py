"""Command-line entry point: ``liamne <subcommand> ...``.

Exit codes: 0 success, 1 validation error (bad flags, config or input
files), 2 runtime failure (for example training divergence).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .evaluation import (
    classify_nodes,
    predict_links,
    run_link_prediction,
    split_edges,
)
from .graph import (
    GraphFormatError,
    MultiplexNetwork,
    compute_stats,
    imbalance_ratio,
    layer_density,
    load_multiplex,
    save_multiplex,
    sibling_path,
)
from .model import ModelConfig, Propagator, forward, load_checkpoint, save_checkpoint
from .sampler import VERDICTS, SamplerConfig, undersample
from .synth import SynthConfig, generate, sparsify_target
from .trainer import TrainConfig, TrainingDiverged, stream, train

log = logging.getLogger("liamne")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2
SWEEP_AXES = ("keep_fraction", "alpha", "beta", "dimension")
STREAM_SPARSIFY = 101


class ValidationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# run configuration


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    if text is None or str(text).strip().lower() in ("", "none"):
        return None
    return float(text)


def _opt_int(text):
    if text is None or str(text).strip().lower() in ("", "none"):
        return None
    return int(text)


# key -> (parser, help)
RUN_FIELDS = {
    "d": (int, "embedding dimension"),
    "d_a": (_opt_int, "attention hidden size (default: d)"),
    "hops": (int, "neighbour aggregation depth"),
    "epochs": (int, "training epochs"),
    "learning_rate": (float, "SGD step size"),
    "dense_learning_rate": (_opt_float, "step for shared weights on batch-mean gradients (default: learning_rate on sums)"),
    "neighbor_learning_rate": (_opt_float, "step for base neighbour embeddings (default: learning_rate)"),
    "neg_ratio": (int, "target-layer negatives per positive edge"),
    "batch_size": (int, "positive edges per step, 0 = full batch"),
    "seed": (int, "master seed"),
    "sampling_start_epoch": (int, "first epoch that under-samples"),
    "resample_each_epoch": (_bool, "resample from the original network every epoch"),
    "variant": (str, "full | random-sampling | no-sampling"),
    "similarity_source": (str, "final | layer: embeddings fed to the sampler"),
    "fixed_negatives": (_bool, "draw training negatives once and reuse them"),
    "alpha": (float, "lower similarity threshold"),
    "beta": (float, "upper similarity threshold"),
    "target_layer": (int, "index of the target layer"),
}


@dataclass
class RunConfig:
    """Flat union of model, training and sampler settings."""

    d: int = 64
    d_a: int | None = None
    hops: int = 2
    epochs: int = 10
    learning_rate: float = 0.025
    dense_learning_rate: float | None = None
    neighbor_learning_rate: float | None = None
    neg_ratio: int = 5
    batch_size: int = 512
    seed: int = 0
    sampling_start_epoch: int = 2
    resample_each_epoch: bool = True
    variant: str = "full"
    similarity_source: str = "final"
    fixed_negatives: bool = False
    alpha: float = 0.2
    beta: float = 0.6
    target_layer: int = 0

    def model_config(self) -> ModelConfig:
        return ModelConfig(d=self.d, d_a=self.d_a, hops=self.hops)

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig(alpha=self.alpha, beta=self.beta, target_layer=self.target_layer, seed=self.seed)

    def train_config(self) -> TrainConfig:
        names = {f.name for f in fields(TrainConfig)} - {"sampler"}
        kw = {k: getattr(self, k) for k in names}
        return TrainConfig(sampler=self.sampler_config(), **kw)

    def validate(self) -> "RunConfig":
        """Build every sub-config once so errors surface before any work."""
        try:
            self.model_config()
            self.train_config()
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
        if self.target_layer < 0:
            raise ValidationError("target_layer must be >= 0")
        return self


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}: line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in RUN_FIELDS:
            raise ValidationError(f"{path}: line {lineno}: unknown key {key!r}")
        out[key] = _convert(key, value, f"{path}: line {lineno}")
    return out


def _convert(key, value, where):
    conv = RUN_FIELDS[key][0]
    try:
        return conv(value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{where}: bad value for {key}: {value!r}") from exc


def build_run_config(args) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    values = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for key in RUN_FIELDS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = _convert(key, v, "--" + key.replace("_", "-"))
    return RunConfig(**values).validate()


def add_run_flags(p: argparse.ArgumentParser, keys=None):
    p.add_argument("--config", help="key = value file with run settings (flags win)")
    for key in keys or RUN_FIELDS:
        p.add_argument("--" + key.replace("_", "-"), dest=key, default=None, help=RUN_FIELDS[key][1])


# ---------------------------------------------------------------------------
# helpers


def load_data(args) -> MultiplexNetwork:
    try:
        return load_multiplex(
            args.data,
            attr_file=getattr(args, "attributes", None),
            label_file=getattr(args, "labels", None),
            string_ids=getattr(args, "string_ids", False),
        )
    except OSError as exc:
        raise ValidationError(f"cannot read {args.data}: {exc}") from exc


def add_data_flags(p, labels=False):
    p.add_argument("--data", required=True, help="edge file: 'layer i j' per line")
    p.add_argument("--attributes", help="node attribute file")
    p.add_argument("--labels", required=labels, help="node label file: 'node label' per line")
    p.add_argument("--string-ids", action="store_true", help="node ids are arbitrary strings")


def check_target(net: MultiplexNetwork, t: int):
    if not 0 <= t < net.num_layers:
        raise ValidationError(f"target layer {t} out of range (network has {net.num_layers} layers)")


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    if path is None or path == "-":
        sys.stdout.write(buf.getvalue())
    else:
        Path(path).write_text(buf.getvalue(), encoding="utf-8")


def repeat_seed(seed: int, r: int) -> int:
    return seed if r == 0 else int(stream(seed, 0, r).integers(2**31))


def mean_std(values):
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std(ddof=1)) if len(arr) > 1 else 0.0


# ---------------------------------------------------------------------------
# subcommands


def cmd_stats(args) -> int:
    if args.data is None and args.edge_counts is None:
        raise ValidationError("give --data or --edge-counts with --num-nodes")
    if args.data is not None:
        net = load_data(args)
        t = args.target_layer
        check_target(net, t)
        s = compute_stats(net, t)
        counts, n = s.edges_per_layer, net.num_nodes
        mu, dens = s.imbalance_ratio, s.target_density
    else:
        try:
            counts = tuple(int(x) for x in args.edge_counts.split(","))
        except ValueError as exc:
            raise ValidationError("--edge-counts must be comma-separated integers") from exc
        if args.num_nodes is None:
            raise ValidationError("--edge-counts needs --num-nodes")
        t = args.target_layer
        if not 0 <= t < len(counts) or len(counts) < 2:
            raise ValidationError("need >= 2 layer counts and a valid --target-layer")
        n = args.num_nodes
        mu = imbalance_ratio(max(counts), min(counts))
        dens = layer_density(counts[t], n)
    print(f"nodes            {n}")
    for k, c in enumerate(counts):
        tag = "  (target)" if k == t else ""
        print(f"layer {k:<3d} edges {c}{tag}")
    print(f"imbalance ratio  {mu:.2f}")
    print(f"target density   {dens:.3e}")
    if args.csv:
        write_csv(
            args.csv,
            ["num_nodes", "target_layer", "edges_per_layer", "imbalance_ratio", "target_density"],
            [[n, t, ";".join(map(str, counts)), float(mu), float(dens)]],
        )
    return EXIT_OK


def cmd_synth(args) -> int:
    aux = []
    for spec in args.aux_layer or ["20000:0.5"]:
        try:
            count, rho = spec.split(":")
            aux.append((int(count), float(rho)))
        except ValueError as exc:
            raise ValidationError(f"--aux-layer expects COUNT:RHO, got {spec!r}") from exc
    try:
        cfg = SynthConfig(
            num_nodes=args.num_nodes,
            num_communities=args.num_communities,
            target_edges=args.target_edges,
            aux_layers=tuple(aux),
            p_in=args.p_in,
            p_out=args.p_out,
            seed=args.seed,
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    net = generate(cfg)
    labels = args.labels or sibling_path(args.out, "labels")
    save_multiplex(net, args.out, label_file=labels)
    s = compute_stats(net, 0)
    print(f"wrote {args.out} and {labels}: {net.num_nodes} nodes, edges {s.edges_per_layer}, mu {s.imbalance_ratio:.2f}")
    return EXIT_OK


def cmd_sample(args) -> int:
    net = load_data(args)
    check_target(net, args.target_layer)
    try:
        cfg = SamplerConfig(args.alpha, args.beta, args.target_layer, args.seed)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    if (args.checkpoint is None) == (args.embeddings is None):
        raise ValidationError("give exactly one of --checkpoint or --embeddings")
    if args.embeddings is not None:
        emb = np.load(args.embeddings)
        if emb.ndim == 3:
            emb = emb[:, args.target_layer]
    else:
        params, mcfg = load_checkpoint(args.checkpoint)
        if params.num_nodes != net.num_nodes or params.num_layers != net.num_layers:
            raise ValidationError("checkpoint shape does not match the network")
        if args.similarity_source == "layer":
            emb = params.layer_embed[:, args.target_layer]
        else:
            emb = forward(params, Propagator(net, mcfg.hops)).z[:, args.target_layer]
    if emb.shape != (net.num_nodes, emb.shape[-1]):
        raise ValidationError(f"embeddings must have {net.num_nodes} rows")
    res = undersample(net, emb, cfg, emit_decisions=args.emit_decisions is not None)
    save_multiplex(res.sampled_network, args.out)
    for k, c in sorted(res.per_layer_kept.items()):
        print(f"layer {k}: kept {c} of {net.edge_count(k)}")
    if args.emit_decisions is not None:
        rows = []
        for k in sorted(res.decisions):
            for i, j, s, v in res.decisions[k]:
                rows.append([k, int(i), int(j), float(s), VERDICTS[v]])
        write_csv(args.emit_decisions, ["layer", "i", "j", "sim", "verdict"], rows)
    return EXIT_OK


def _train_on(net, rc: RunConfig, split_seed):
    mcfg, tcfg = rc.model_config(), rc.train_config()
    check_target(net, rc.target_layer)
    if split_seed is None:
        params, tlog = train(net, mcfg, tcfg)
        return params, tlog, None
    manifest = split_edges(net, rc.target_layer, seed=split_seed)
    params, tlog = train(manifest.train_network, mcfg, tcfg, exclude_negatives=manifest.heldout_pairs())
    return params, tlog, manifest


def cmd_train(args) -> int:
    rc = build_run_config(args)
    net = load_data(args)
    params, tlog, _ = _train_on(net, rc, args.split_seed)
    if args.log:
        tlog.write_csv(args.log)
    if args.out_checkpoint:
        save_checkpoint(args.out_checkpoint, params, rc.model_config(), active=tlog.active_network, split_seed=args.split_seed)
    last = tlog.records[-1]
    print(f"trained {rc.epochs} epochs ({rc.variant}); final l_total {last.l_total:.6g}")
    return EXIT_OK


def _active_from_checkpoint(extras, net):
    if extras["active_layers"] is None:
        return None
    return MultiplexNetwork(net.num_nodes, tuple(extras["active_layers"]))


def cmd_eval_lp(args) -> int:
    rc = build_run_config(args)
    net = load_data(args)
    t = rc.target_layer
    check_target(net, t)
    rows = []
    if args.checkpoint:
        params, mcfg, extras = load_checkpoint(args.checkpoint, with_extras=True)
        split_seed = args.split_seed if args.split_seed is not None else extras["split_seed"]
        if split_seed is None:
            raise ValidationError("checkpoint has no split seed; pass --split-seed")
        if extras["split_seed"] is not None and split_seed != extras["split_seed"]:
            raise ValidationError(f"checkpoint was trained against split seed {extras['split_seed']}")
        manifest = split_edges(net, t, seed=split_seed)
        rep = predict_links(params, manifest, t, mcfg, net=_active_from_checkpoint(extras, net))
        rows.append([0, params.seed, split_seed, rep.valid_auc, rep.auc])
    else:
        split_seed = args.split_seed if args.split_seed is not None else rc.seed
        for r in range(args.repeats):
            seed_r = repeat_seed(rc.seed, r)
            tcfg = replace(rc.train_config(), seed=seed_r)
            rep, *_ = run_link_prediction(net, rc.model_config(), tcfg, split_seed=split_seed)
            rows.append([r, seed_r, split_seed, rep.valid_auc, rep.auc])
    m, s = mean_std([row[4] for row in rows])
    print(f"link prediction on layer {t}: test AUC {m:.4f} +/- {s:.4f} over {len(rows)} run(s)")
    write_csv(args.csv, ["repeat", "seed", "split_seed", "valid_auc", "test_auc"], rows)
    return EXIT_OK


def cmd_eval_nc(args) -> int:
    rc = build_run_config(args)
    net = load_data(args)
    if net.labels is None:
        raise ValidationError("node classification needs --labels")
    split_seed = args.split_seed if args.split_seed is not None else rc.seed
    rows = []
    if args.checkpoint:
        params, mcfg, extras = load_checkpoint(args.checkpoint, with_extras=True)
        active = _active_from_checkpoint(extras, net) or net
        rep = classify_nodes(params, net.labels, split_seed, active, mcfg)
        rows.append([0, params.seed, split_seed, rep.macro_f1, rep.micro_f1])
    else:
        for r in range(args.repeats):
            seed_r = repeat_seed(rc.seed, r)
            tcfg = replace(rc.train_config(), seed=seed_r)
            check_target(net, rc.target_layer)
            params, tlog = train(net, rc.model_config(), tcfg)
            rep = classify_nodes(params, net.labels, split_seed, tlog.active_network, rc.model_config())
            rows.append([r, seed_r, split_seed, rep.macro_f1, rep.micro_f1])
    ma, ms = mean_std([row[3] for row in rows])
    mi, mis = mean_std([row[4] for row in rows])
    print(f"node classification: macro-F1 {ma:.4f} +/- {ms:.4f}, micro-F1 {mi:.4f} +/- {mis:.4f} over {len(rows)} run(s)")
    write_csv(args.csv, ["repeat", "seed", "split_seed", "macro_f1", "micro_f1"], rows)
    return EXIT_OK


def sweep_point(net, rc: RunConfig, axis, value, repeats, split_seed):
    """One sweep row: ``(mu, auc_mean, auc_std)``."""
    if axis == "keep_fraction":
        seed = int(stream(rc.seed, STREAM_SPARSIFY).integers(2**31))
        net = sparsify_target(net, rc.target_layer, float(value), seed)
    elif axis == "dimension":
        rc = replace(rc, d=int(value), d_a=None if rc.d_a is None else rc.d_a)
    else:
        rc = replace(rc, **{axis: float(value)})
    rc.validate()
    mu = compute_stats(net, rc.target_layer).imbalance_ratio
    aucs = []
    for r in range(repeats):
        tcfg = replace(rc.train_config(), seed=repeat_seed(rc.seed, r))
        rep, *_ = run_link_prediction(net, rc.model_config(), tcfg, split_seed=split_seed)
        aucs.append(rep.auc)
    m, s = mean_std(aucs)
    return mu, m, s


def cmd_sweep(args) -> int:
    rc = build_run_config(args)
    net = load_data(args)
    check_target(net, rc.target_layer)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ValidationError("--values is empty")
    split_seed = args.split_seed if args.split_seed is not None else rc.seed
    rows, failures = [], 0
    for v in values:
        try:
            mu, m, s = sweep_point(net, rc, args.axis, v, args.repeats, split_seed)
            rows.append([v, float(mu), m, s, ""])
            print(f"{args.axis}={v}: mu {mu:.3f}, AUC {m:.4f} +/- {s:.4f}")
        except (ValueError, TrainingDiverged) as exc:
            failures += 1
            rows.append([v, "", "", "", str(exc)])
            print(f"{args.axis}={v}: error: {exc}", file=sys.stderr)
    write_csv(args.csv, ["value", "mu", "auc_mean", "auc_std", "error"], rows)
    return EXIT_OK if failures < len(values) else EXIT_RUNTIME


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="liamne", description="Multiplex network embedding with layer under-sampling.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("stats", help="layer edge counts, imbalance ratio and target density")
    s.add_argument("--data", help="edge file")
    s.add_argument("--string-ids", action="store_true", help="node ids are arbitrary strings")
    s.add_argument("--edge-counts", help="comma-separated per-layer edge counts instead of --data")
    s.add_argument("--num-nodes", type=int, help="node count, with --edge-counts")
    s.add_argument("--target-layer", type=int, default=0, help="target layer index")
    s.add_argument("--csv", help="write a CSV row here ('-' for stdout)")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("synth", help="generate a planted-partition multiplex network")
    s.add_argument("--out", required=True, help="edge file to write")
    s.add_argument("--labels", help="label file to write (default: <out>.labels)")
    s.add_argument("--num-nodes", type=int, default=1000, help="node count")
    s.add_argument("--num-communities", type=int, default=4, help="community count")
    s.add_argument("--target-edges", type=int, default=400, help="edges in the target layer (layer 0)")
    s.add_argument("--aux-layer", action="append", metavar="COUNT:RHO", help="auxiliary layer, repeatable (default 20000:0.5)")
    s.add_argument("--p-in", type=float, default=0.9, help="within-community propensity")
    s.add_argument("--p-out", type=float, default=0.02, help="between-community propensity")
    s.add_argument("--seed", type=int, default=0, help="random seed")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("sample", help="under-sample auxiliary layers with target-layer embeddings")
    add_data_flags(s)
    s.add_argument("--checkpoint", help="model checkpoint supplying embeddings")
    s.add_argument("--embeddings", help=".npy array (V, d) or (V, L, d) of embeddings")
    s.add_argument("--similarity-source", choices=("final", "layer"), default="final", help="embeddings taken from a checkpoint")
    s.add_argument("--alpha", type=float, default=0.2, help="lower threshold")
    s.add_argument("--beta", type=float, default=0.6, help="upper threshold")
    s.add_argument("--target-layer", type=int, default=0, help="target layer index")
    s.add_argument("--seed", type=int, default=0, help="random seed")
    s.add_argument("--emit-decisions", metavar="CSV", help="write per-edge verdicts here ('-' for stdout)")
    s.add_argument("--out", required=True, help="edge file for the sampled network")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("train", help="train a model and write a checkpoint and loss log")
    add_data_flags(s)
    add_run_flags(s)
    s.add_argument("--split-seed", type=int, help="hold out a link-prediction split before training")
    s.add_argument("--out-checkpoint", help="checkpoint path (.npz)")
    s.add_argument("--log", help="per-epoch loss CSV")
    s.set_defaults(func=cmd_train)

    for name, func, labels, what in (
        ("eval-lp", cmd_eval_lp, False, "link prediction AUC on the target layer"),
        ("eval-nc", cmd_eval_nc, True, "node classification macro/micro F1"),
    ):
        s = sub.add_parser(name, help=what)
        add_data_flags(s, labels=labels)
        add_run_flags(s)
        s.add_argument("--checkpoint", help="evaluate this checkpoint instead of training")
        s.add_argument("--split-seed", type=int, help="evaluation split seed (default: --seed)")
        s.add_argument("--repeats", type=int, default=1, help="independent training runs to average")
        s.add_argument("--csv", help="per-run CSV rows ('-' for stdout)")
        s.set_defaults(func=func)

    s = sub.add_parser("sweep", help="vary one setting and report AUC per value")
    add_data_flags(s)
    add_run_flags(s)
    s.add_argument("--axis", required=True, choices=SWEEP_AXES, help="setting to vary")
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--repeats", type=int, default=3, help="training runs per value")
    s.add_argument("--split-seed", type=int, help="evaluation split seed (default: --seed)")
    s.add_argument("--csv", help="CSV report ('-' for stdout)")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "repeats", 1) is not None and getattr(args, "repeats", 1) < 1:
        print("liamne: error: --repeats must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except (ValidationError, GraphFormatError) as exc:
        print(f"liamne: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TrainingDiverged as exc:
        print(f"liamne: training diverged: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"liamne: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (RuntimeError, OSError, FloatingPointError) as exc:
        print(f"liamne: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
