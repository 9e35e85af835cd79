"""Experiment command line.

Subcommands: train (split + stacked training + classifier + artifacts),
eval (score a saved model, optionally on perturbed data), compare
(McNemar test between two prediction files), gradcheck (finite-difference
audit of every analytic gradient), synth (materialize a synthetic
dataset), perturb (materialize a perturbed dataset).

Exit codes: 0 success, 1 unexpected failure or failed gradcheck,
2 I/O, 3 file format, 4 shape mismatch, 5 training divergence,
6 bad parameter or usage, 7 other data errors.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .autoencoder import (
    TrainConfig,
    ae_gradients,
    ae_loss,
    csma_gradients,
    csma_loss,
    extract_features,
    init_layer,
    train_stacked,
)
from .classifier import (
    ClassifierModel,
    classifier_gradients,
    classifier_loss,
    predict_labels,
    predict_score,
    train_classifier,
)
from .config import (
    ExperimentConfig,
    build_manifest,
    config_from_sources,
    manifest_config_dict,
    read_config_file,
    resolved_classifier_dims,
    resolved_layer_dims,
    resolved_lams,
    write_manifest,
)
from .data import (
    LabeledDataset,
    PerturbationSpec,
    class_matrices,
    dataset_fingerprint,
    load_csv,
    load_idx,
    perturb,
    save_csv,
    synth_two_class,
    with_image_shape,
)
from .errors import (
    ConsistencyError,
    CsmaError,
    DivergenceError,
    FormatError,
    ParameterError,
    ShapeError,
)
from .linalg import make_rng, rand_matrix
from .metrics import (
    evaluate,
    format_pct,
    mcnemar_test,
    report_lines,
    report_metrics_dict,
    write_report,
    write_roc_csv,
)
from .persist import load_model, save_model
from .plots import save_confusion_matrix, save_loss_curves, save_roc_curve

EXIT_CODES = {
    "success": 0,
    "unexpected": 1,
    "io": 2,
    "format": 3,
    "shape": 4,
    "divergence": 5,
    "parameter": 6,
    "data": 7,
}

GRADCHECK_TOL = 1e-5

_SEED_SPACE = 2**64


class _Parser(argparse.ArgumentParser):
    # usage mistakes land in the same exit path as other parameter errors
    def error(self, message):
        raise ParameterError(message)


def load_dataset(cfg: ExperimentConfig) -> LabeledDataset:
    if cfg.format == "synth":
        ds = synth_two_class(cfg.synth_n_per_class, cfg.synth_dim,
                             cfg.synth_separation, cfg.synth_noise_std, cfg.seed)
    elif cfg.format == "idx":
        if not cfg.images or not cfg.labels:
            raise ParameterError("idx format needs --images and --labels paths")
        positive = frozenset(cfg.positive_digits)
        ds = load_idx(cfg.images, cfg.labels, lambda d: 1 if d in positive else 0)
    else:
        if not cfg.data:
            raise ParameterError("csv format needs a --data path")
        ds = load_csv(cfg.data, cfg.label_column)
    if cfg.image_shape is not None:
        ds = with_image_shape(ds, cfg.image_shape)
    return ds


def split_balanced_by(cfg: ExperimentConfig, ds: LabeledDataset):
    from .data import split_balanced

    return split_balanced(ds, cfg.train_fraction, cfg.seed)


def cmd_train(cfg: ExperimentConfig) -> dict:
    """Full pipeline: load, split, stack, classify, persist, report."""
    t0 = time.perf_counter()
    ds = load_dataset(cfg)
    train_ds, test_ds = split_balanced_by(cfg, ds)
    x_minor, x_adult = class_matrices(train_ds)

    dims = resolved_layer_dims(cfg, ds.dim)
    lams = resolved_lams(cfg, len(dims))
    base = TrainConfig(epochs=cfg.epochs, learning_rate=cfg.learning_rate,
                       lam=lams[0], seed=cfg.seed)
    layer_cfgs = [
        replace(base, lam=lams[i], seed=(cfg.seed + i) % _SEED_SPACE)
        for i in range(len(dims))
    ]
    model = train_stacked(x_minor, x_adult, dims, layer_cfgs)

    feats = extract_features(model, train_ds.samples)
    # The split emits class-blocked rows; without reshuffling, every epoch
    # would end on the adult block and bias the head's calibration upward.
    head_cfg = replace(base, seed=(cfg.seed + len(dims)) % _SEED_SPACE, shuffle=True)
    head = train_classifier(feats, train_ds.labels, head_cfg,
                            dims=resolved_classifier_dims(cfg, feats.shape[1]))

    test_feats = extract_features(model, test_ds.samples)
    report = evaluate(predict_labels(head, test_feats),
                      predict_score(head, test_feats), test_ds.labels)

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_model(out / "model.csma", model, head)
    write_report(report, out / "report.txt")
    write_roc_csv(report, out / "roc.csv")
    save_loss_curves(model.training_log + [head.training_log], out / "loss_curves.png")
    save_roc_curve(report.roc, report.auc, out / "roc.png")
    save_confusion_matrix(report.confusion, out / "confusion.png")

    manifest = build_manifest(
        cfg,
        dataset_fingerprint(ds),
        losses={"autoencoder_layers": model.training_log,
                "classifier": head.training_log},
        metrics=report_metrics_dict(report),
        wall_clock_seconds=time.perf_counter() - t0,
        split={"train": train_ds.n_samples, "test": test_ds.n_samples},
    )
    write_manifest(manifest, out / "manifest.json")
    return manifest


def cmd_eval(model_path, ds: LabeledDataset, spec: PerturbationSpec | None,
             out_dir, dataset_desc: dict | None = None):
    t0 = time.perf_counter()
    model, head = load_model(model_path)
    if head is None:
        raise ParameterError(f"{model_path} holds no classifier, cannot evaluate")
    if model.input_dim != ds.dim:
        raise ShapeError(
            f"model expects {model.input_dim} input features but dataset rows "
            f"have {ds.dim}"
        )
    manifest = {
        "model": str(model_path),
        "dataset": dataset_desc or {},
        "dataset_fingerprint": dataset_fingerprint(ds),
    }
    if spec is not None:
        ds = perturb(ds, spec)
        manifest["perturbation"] = {k: v for k, v in vars(spec).items() if v is not None}
        manifest["perturbed_fingerprint"] = dataset_fingerprint(ds)

    feats = extract_features(model, ds.samples)
    report = evaluate(predict_labels(head, feats), predict_score(head, feats),
                      ds.labels)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report(report, out / "report.txt")
    write_roc_csv(report, out / "roc.csv")
    save_roc_curve(report.roc, report.auc, out / "roc.png")
    save_confusion_matrix(report.confusion, out / "confusion.png")
    manifest["metrics"] = report_metrics_dict(report)
    manifest["wall_clock_seconds"] = time.perf_counter() - t0
    write_manifest(manifest, out / "manifest.json")
    return report


def _ensure_parent(path) -> None:
    parent = Path(path).parent
    if parent and not parent.exists():
        parent.mkdir(parents=True, exist_ok=True)


def _read_flag_file(path) -> np.ndarray:
    values = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line not in ("0", "1"):
                raise FormatError(f"{path}:{lineno}: expected 0 or 1, got {line!r}")
            values.append(int(line))
    return np.asarray(values, dtype=np.int64)


def cmd_compare(predictions_a, predictions_b, labels_path):
    preds_a = _read_flag_file(predictions_a)
    preds_b = _read_flag_file(predictions_b)
    labels = _read_flag_file(labels_path)
    if not len(preds_a) == len(preds_b) == len(labels):
        raise ConsistencyError(
            f"line counts disagree: {len(preds_a)} vs {len(preds_b)} "
            f"predictions, {len(labels)} labels"
        )
    result = mcnemar_test(preds_a == labels, preds_b == labels)
    lines = [
        f"b_first_only_correct: {result.b}",
        f"c_second_only_correct: {result.c}",
        f"p_value: {result.p_value!r}",
        f"significant_at_95: {str(result.significant_at_95).lower()}",
    ]
    return result, lines


def _max_scaled_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    # Near-zero entries are compared absolutely: the denominator floor of 1
    # keeps roundoff in a ~1e-12 gradient from reading as a huge ratio.
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))


def _fd_grad(loss_fn, w: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences, one matrix entry at a time."""
    g = np.zeros_like(w)
    for idx in np.ndindex(*w.shape):
        orig = w[idx]
        w[idx] = orig + h
        up = loss_fn()
        w[idx] = orig - h
        down = loss_fn()
        w[idx] = orig
        g[idx] = (up - down) / (2.0 * h)
    return g


def cmd_gradcheck(seed: int, dims, corrupt: bool = False,
                  tol: float = GRADCHECK_TOL, stream=None) -> bool:
    """Compare every analytic gradient against central differences.

    Covers the plain reconstruction loss, the mean-pull loss at several
    strengths, and the classifier loss. corrupt injects a known error
    into the first check as a negative control.
    """
    stream = stream if stream is not None else sys.stdout
    dims = [int(d) for d in dims]
    if len(dims) != 2:
        raise ParameterError(f"gradcheck dims must be input,hidden - got {dims}")
    if any(not 1 <= d <= 16 for d in dims):
        raise ParameterError(f"gradcheck dims must lie in 1..16, got {dims}")
    input_dim, hidden_dim = dims
    rng = make_rng(seed)
    x = rng.random((5, input_dim))
    checks = []

    w = init_layer(rng, input_dim, hidden_dim, None)
    g_enc, g_dec = ae_gradients(w, x)
    if corrupt:
        g_enc = g_enc.copy()
        g_enc[0, 0] += 1e-3
    err = max(
        _max_scaled_error(g_enc, _fd_grad(lambda: ae_loss(w, x), w.w_enc)),
        _max_scaled_error(g_dec, _fd_grad(lambda: ae_loss(w, x), w.w_dec)),
    )
    checks.append(("reconstruction", err))

    for lam in (0.0, 0.1, 1.0):
        w = init_layer(rng, input_dim, hidden_dim, None)
        mean = rng.random((1, hidden_dim))
        g_enc, g_dec = csma_gradients(w, x, mean, lam)
        err = max(
            _max_scaled_error(g_enc, _fd_grad(lambda: csma_loss(w, x, mean, lam), w.w_enc)),
            _max_scaled_error(g_dec, _fd_grad(lambda: csma_loss(w, x, mean, lam), w.w_dec)),
        )
        checks.append((f"mean_pull lambda={lam}", err))

    feats = rng.random((6, hidden_dim))
    labels = np.array([0, 1, 0, 1, 0, 1])
    h1 = max(1, hidden_dim // 2)
    scale = 0.5
    head = ClassifierModel(
        rand_matrix(rng, h1, hidden_dim, scale),
        rand_matrix(rng, h1, h1, scale),
        rand_matrix(rng, 1, h1, scale),
    )
    g1, g2, g3 = classifier_gradients(head, feats, labels)
    loss_fn = lambda: classifier_loss(head, feats, labels)
    err = max(
        _max_scaled_error(g1, _fd_grad(loss_fn, head.hidden1)),
        _max_scaled_error(g2, _fd_grad(loss_fn, head.hidden2)),
        _max_scaled_error(g3, _fd_grad(loss_fn, head.output)),
    )
    checks.append(("classifier", err))

    worst = max(err for _name, err in checks)
    for name, err in checks:
        verdict = "PASS" if err <= tol else "FAIL"
        print(f"{name}: max scaled error {err:.3e} {verdict}", file=stream)
    ok = worst <= tol
    print(f"overall: {'PASS' if ok else 'FAIL'} "
          f"(worst {worst:.3e}, tolerance {tol:.0e})", file=stream)
    return ok


_DATASET_FLAGS = (
    ("--format", "format", "dataset kind: synth, idx, or csv"),
    ("--images", "images", "idx image file"),
    ("--labels", "labels", "idx label file"),
    ("--data", "data", "csv dataset file"),
    ("--label-column", "label_column", "csv label column name"),
    ("--positive-digits", "positive_digits",
     "comma list of raw idx labels mapped to class 1 (default 5,6,7,8,9)"),
    ("--image-shape", "image_shape", "HxW override, e.g. 8x8"),
    ("--seed", "seed", "rng seed (also selects the synthetic draw)"),
    ("--synth-n-per-class", "synth_n_per_class", "synthetic samples per class"),
    ("--synth-dim", "synth_dim", "synthetic pixel count"),
    ("--synth-separation", "synth_separation", "synthetic class-mean separation"),
    ("--synth-noise-std", "synth_noise_std", "synthetic pixel noise"),
)

_TRAIN_FLAGS = (
    ("--layer-dims", "layer_dims", "comma list of stacked widths (default m,m)"),
    ("--lam", "lam", "mean-pull strength, single value or per-layer list"),
    ("--classifier-dims", "classifier_dims", "two hidden sizes (default m/4,m/8)"),
    ("--epochs", "epochs", "training epochs (default 100)"),
    ("--learning-rate", "learning_rate", "SGD step size (default 0.01)"),
    ("--train-fraction", "train_fraction", "balanced-split fraction (default 0.70)"),
    ("--out-dir", "out_dir", "artifact directory"),
)


def _add_config_flags(sub, flags):
    for flag, dest, help_text in flags:
        sub.add_argument(flag, dest=dest, default=None, help=help_text)


def _flag_config(args, keys=None) -> ExperimentConfig:
    known = {dest for _f, dest, _h in _DATASET_FLAGS + _TRAIN_FLAGS}
    values = {k: v for k, v in vars(args).items() if k in known and v is not None}
    if keys is not None:
        values = {k: v for k, v in values.items() if k in keys}
    file_values = None
    if getattr(args, "config", None):
        file_values = read_config_file(args.config)
    return config_from_sources(file_values, values)


def _add_perturb_flags(sub, seed_flag: bool):
    sub.add_argument("--sigma", type=float, default=None, help="blur width")
    sub.add_argument("--noise-mean", type=float, default=0.0, help="noise offset")
    sub.add_argument("--noise-std", type=float, default=None, help="noise spread")
    sub.add_argument("--hole-count", type=int, default=None, help="squares per image")
    sub.add_argument("--hole-size", type=int, default=None, help="square side length")
    if seed_flag:
        sub.add_argument("--perturb-seed", type=int, default=0,
                         help="seed for noise or hole placement")


def _build_spec(kind: str, args, seed: int) -> PerturbationSpec:
    if kind == "blur":
        return PerturbationSpec(kind="blur", sigma=args.sigma)
    if kind == "gaussian_noise":
        return PerturbationSpec(kind="gaussian_noise", mean=args.noise_mean,
                                std_dev=args.noise_std, seed=seed)
    return PerturbationSpec(kind="holes", hole_count=args.hole_count,
                            hole_size=args.hole_size, seed=seed)


def _run_train(args) -> int:
    cfg = _flag_config(args)
    manifest = cmd_train(cfg)
    metrics = manifest["metrics"]
    print(f"model: {Path(cfg.out_dir) / 'model.csma'}")
    print(f"manifest: {Path(cfg.out_dir) / 'manifest.json'}")
    print(f"mean_accuracy_pct: {format_pct(metrics['mean_accuracy'])}")
    return 0


def _run_eval(args) -> int:
    cfg = _flag_config(args)
    ds = load_dataset(cfg)
    spec = None
    if args.perturb is not None:
        spec = _build_spec(args.perturb, args, args.perturb_seed)
    desc = {
        "format": cfg.format,
        "images": cfg.images,
        "labels": cfg.labels,
        "data": cfg.data,
        "seed": cfg.seed,
    }
    out_dir = args.out_dir if args.out_dir is not None else "csma-eval"
    report = cmd_eval(args.model, ds, spec, out_dir, desc)
    for line in report_lines(report):
        print(line)
    return 0


def _run_compare(args) -> int:
    _result, lines = cmd_compare(args.predictions_a, args.predictions_b, args.labels)
    text = "\n".join(lines)
    print(text)
    if args.out:
        from .fileio import atomic_write_text

        _ensure_parent(args.out)
        atomic_write_text(args.out, text + "\n")
    return 0


def _run_gradcheck(args) -> int:
    from .config import _parse_int_list

    dims = _parse_int_list("dims", args.dims)
    ok = cmd_gradcheck(args.seed, dims, corrupt=args.corrupt)
    return 0 if ok else 1


def _run_synth(args) -> int:
    ds = synth_two_class(args.n_per_class, args.dim, args.separation,
                         args.noise_std, args.seed)
    _ensure_parent(args.out)
    save_csv(ds, args.out)
    print(f"wrote {args.out}: {ds.n_samples} samples, dim {ds.dim}, "
          f"image shape {ds.image_shape}")
    print(f"fingerprint: {dataset_fingerprint(ds)}")
    return 0


def _run_perturb(args) -> int:
    cfg = _flag_config(args)
    if cfg.format == "synth":
        raise ParameterError(
            "perturb reads a materialized dataset; run synth first, then "
            "perturb its csv"
        )
    ds = load_dataset(cfg)
    spec = _build_spec(args.kind, args, args.seed)
    out_ds = perturb(ds, spec)
    _ensure_parent(args.out)
    save_csv(out_ds, args.out)
    print(f"input fingerprint: {dataset_fingerprint(ds)}")
    print(f"wrote {args.out}: {dataset_fingerprint(out_ds)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="csma",
                     description="class-specific mean autoencoder experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="split, train, evaluate, persist")
    p_train.add_argument("--config", default=None, help="key=value config file")
    _add_config_flags(p_train, _DATASET_FLAGS + _TRAIN_FLAGS)
    p_train.set_defaults(handler=_run_train)

    p_eval = sub.add_parser("eval", help="score a saved model on a dataset")
    p_eval.add_argument("--model", required=True, help="model file from train")
    p_eval.add_argument("--config", default=None, help="key=value config file")
    p_eval.add_argument("--out-dir", dest="out_dir", default=None,
                        help="artifact directory (default csma-eval)")
    _add_config_flags(p_eval, _DATASET_FLAGS)
    p_eval.add_argument("--perturb", choices=("blur", "gaussian_noise", "holes"),
                        default=None, help="perturb the data before scoring")
    _add_perturb_flags(p_eval, seed_flag=True)
    p_eval.set_defaults(handler=_run_eval)

    p_cmp = sub.add_parser("compare", help="McNemar test on two prediction files")
    p_cmp.add_argument("predictions_a", help="file of 0/1 lines, first model")
    p_cmp.add_argument("predictions_b", help="file of 0/1 lines, second model")
    p_cmp.add_argument("labels", help="file of 0/1 true labels")
    p_cmp.add_argument("--out", default=None, help="also write the report here")
    p_cmp.set_defaults(handler=_run_compare)

    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.add_argument("--dims", default="8,5", help="input,hidden (each <= 16)")
    p_grad.add_argument("--corrupt", action="store_true",
                        help="negative control: inject a gradient error")
    p_grad.set_defaults(handler=_run_gradcheck)

    p_synth = sub.add_parser("synth", help="write a synthetic dataset csv")
    p_synth.add_argument("--n-per-class", type=int, default=200)
    p_synth.add_argument("--dim", type=int, default=64)
    p_synth.add_argument("--separation", type=float, default=0.3)
    p_synth.add_argument("--noise-std", type=float, default=0.15)
    p_synth.add_argument("--seed", type=int, required=True)
    p_synth.add_argument("--out", required=True, help="csv output path")
    p_synth.set_defaults(handler=_run_synth)

    p_pert = sub.add_parser("perturb", help="write a perturbed copy of a dataset")
    # the required perturbation --seed below replaces the dataset seed flag
    _add_config_flags(p_pert, tuple(r for r in _DATASET_FLAGS if r[1] != "seed"))
    p_pert.add_argument("--kind", choices=("blur", "gaussian_noise", "holes"),
                        required=True)
    _add_perturb_flags(p_pert, seed_flag=False)
    p_pert.add_argument("--seed", type=int, required=True,
                        help="perturbation seed (unused by blur)")
    p_pert.add_argument("--out", required=True, help="csv output path")
    p_pert.set_defaults(handler=_run_perturb)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except DivergenceError as exc:
        return _fail("divergence", exc)
    except ShapeError as exc:
        return _fail("shape", exc)
    except FormatError as exc:
        return _fail("format", exc)
    except ParameterError as exc:
        return _fail("parameter", exc)
    except OSError as exc:
        return _fail("io", exc)
    except CsmaError as exc:
        return _fail("data", exc)


def _fail(kind: str, exc: BaseException) -> int:
    print(f"error: {exc}", file=sys.stderr)
    return EXIT_CODES[kind]


if __name__ == "__main__":
    sys.exit(main())
