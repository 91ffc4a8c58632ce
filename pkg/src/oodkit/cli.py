"""Command-line entry point: pool, fit, score, ensemble-fit, eval,
simulate, and pipeline subcommands.

Every subcommand accepts --config FILE holding 'key = value' lines
('#' comments allowed, optional 'config_version = 1'); keys are the long
flag names without dashes, and explicit flags always beat file values.
All randomness funnels through --seed.  Outputs are deterministic:
repeating an invocation with the same inputs and seed yields byte-identical
files.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numeric failure.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import model_io
from .data import (
    FeatureMatrix,
    LabeledDataset,
    ScoreSet,
    SpatialDataset,
    read_feature_file,
    write_feature_file,
)
from .ensemble import LayerScores, combine, fit_weights, single_layer_weights
from .errors import FileFormatError, NumericError, ValidationError
from .lof import LofConfig, fit_lof, score_lof_batch
from .mahalanobis import fit_mahalanobis, score_mahalanobis_batch
from .metrics import evaluate, format_table
from .pooling import PoolingSpec, pool_dataset
from .simulation import DEFAULT_OFFSET_R, SimConfig, run_sweep, sweep_csv

SCORE_HEADER = "# confidence scores; larger = more in-distribution"

DETECTOR_CHOICES = ("lof", "lof_d", "mahalanobis")

# Default fraction of the test scores held out for ensemble-weight fitting
# when no explicit validation files are given.
VAL_FRACTION = 0.2


# ---------------------------------------------------------------- helpers


def write_scores_csv(scores: np.ndarray, path) -> None:
    lines = [SCORE_HEADER]
    lines += [f"{float(v):.17g}" for v in scores]
    Path(path).write_text("\n".join(lines) + "\n")


def read_scores_csv(path) -> np.ndarray:
    values = []
    for i, line in enumerate(Path(path).read_text().splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            values.append(float(s))
        except ValueError:
            raise FileFormatError(f"{path}:{i}: not a score value: {s!r}") from None
    if not values:
        raise FileFormatError(f"{path}: no scores found")
    return np.array(values, dtype=np.float64)


def parse_config_file(path) -> dict:
    out = {}
    for i, line in enumerate(Path(path).read_text().splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise ValidationError(f"{path}:{i}: expected 'key = value', got {s!r}")
        key, value = s.split("=", 1)
        out[key.strip()] = value.strip()
    version = out.pop("config_version", "1")
    if version != "1":
        raise ValidationError(f"{path}: unsupported config_version {version!r}")
    return out


def _merge_config(args: argparse.Namespace, conversions: dict) -> dict:
    """Fill argparse None values from --config; return leftover dotted keys."""
    if not getattr(args, "config", None):
        return {}
    raw = parse_config_file(args.config)
    leftover = {}
    for key, text in raw.items():
        attr = key.replace("-", "_")
        if attr in conversions:
            if getattr(args, attr, None) is None:
                setattr(args, attr, conversions[attr](text))
        else:
            leftover[key] = text
    return leftover


def _apply_defaults(args: argparse.Namespace, defaults: dict) -> None:
    for attr, value in defaults.items():
        if getattr(args, attr) is None:
            setattr(args, attr, value)


def _parse_int_list(text: str) -> tuple:
    """'1,100,200' or '0..4' (inclusive range) -> tuple of ints."""
    text = text.strip()
    if ".." in text and "," not in text:
        lo, hi = text.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"{what} file not found: {p}")
    return p


def _read_flat(path, what: str) -> LabeledDataset | FeatureMatrix:
    data = read_feature_file(_require_file(path, what))
    if isinstance(data, SpatialDataset):
        raise ValidationError(f"{what} file {path} holds spatial maps; pool them first")
    return data


def _features_of(data) -> FeatureMatrix:
    return data.features if isinstance(data, LabeledDataset) else data


def _fit_detector(args, train):
    if args.detector == "mahalanobis":
        if not isinstance(train, LabeledDataset):
            raise ValidationError("mahalanobis fitting needs a labeled training file")
        eps = None if args.epsilon in (None, "auto") else float(args.epsilon)
        return fit_mahalanobis(train, epsilon=eps, shared_covariance=not args.per_class_cov)
    mode = "per_class" if args.detector == "lof_d" else "global"
    metric = args.metric or ("cosine" if args.detector == "lof_d" else "euclidean")
    config = LofConfig(k=args.k, metric=metric, mode=mode)
    return fit_lof(train, config)


def _score_with_model(model, data) -> np.ndarray:
    x = _features_of(data).as_float64()
    if hasattr(model, "blocks"):  # LofModel
        preds = None
        if isinstance(data, LabeledDataset) and data.predicted_labels is not None:
            preds = data.predicted_labels
        return score_lof_batch(model, x, preds)
    return score_mahalanobis_batch(model, x)


# ------------------------------------------------------------ subcommands


def cmd_pool(args) -> int:
    _apply_defaults(args, {"method": "gap", "gem_p": 3.0})
    spec = PoolingSpec.parse(args.method, gem_power=args.gem_p)
    data = read_feature_file(_require_file(args.in_path, "input"))
    if not isinstance(data, SpatialDataset):
        raise ValidationError(f"{args.in_path} holds flat features; nothing to pool")
    write_feature_file(pool_dataset(data, spec), args.out)
    return 0


def cmd_fit(args) -> int:
    _apply_defaults(args, {"detector": "lof", "k": 20, "per_class_cov": False})
    if args.detector not in DETECTOR_CHOICES:
        raise ValidationError(f"unknown detector {args.detector!r}")
    train = _read_flat(args.train, "training")
    model = _fit_detector(args, train)
    model_io.save_model(model, args.out)
    return 0


def cmd_score(args) -> int:
    model = model_io.load_model(_require_file(args.model, "model"))
    data = _read_flat(args.in_path, "input")
    write_scores_csv(_score_with_model(model, data), args.out)
    return 0


def _layer_scores(paths, layers) -> LayerScores:
    arrays = [read_scores_csv(_require_file(p, "scores")) for p in paths]
    if layers is None:
        names = [Path(p).stem for p in paths]
    else:
        names = [s.strip() for s in layers.split(",")]
    return LayerScores(tuple(names), np.stack(arrays))


def cmd_ensemble_fit(args) -> int:
    val_in = _layer_scores(args.in_scores, args.layers)
    val_out = _layer_scores(args.out_scores, args.layers)
    weights = fit_weights(val_in, val_out)
    Path(args.out).write_text(weights.to_json() + "\n")
    return 0


def cmd_eval(args) -> int:
    _apply_defaults(args, {"detector": "", "benchmark": ""})
    scores = ScoreSet(
        read_scores_csv(_require_file(args.in_scores, "in-scores")),
        read_scores_csv(_require_file(args.out_scores, "out-scores")),
    )
    report = evaluate(scores, detector=args.detector, benchmark=args.benchmark)
    Path(args.report).write_text(report.to_json() + "\n")
    print(format_table([report]))
    return 0


def cmd_simulate(args) -> int:
    _apply_defaults(
        args,
        {
            "dims": ",".join(str(d) for d in SimConfig().dims),
            "r": DEFAULT_OFFSET_R,
            "seeds": "0..4",
            "n_train": 1000,
            "n_test_in": 1000,
            "n_test_out": 1000,
            "k": 20,
        },
    )
    config = SimConfig(
        dims=_parse_int_list(args.dims),
        n_train_per_class=args.n_train,
        n_test_in=args.n_test_in,
        n_test_out=args.n_test_out,
        offset=args.r,
        seeds=_parse_int_list(args.seeds),
        k=args.k,
    )
    cells = run_sweep(config)
    Path(args.out).write_text(sweep_csv(cells))
    return 0


# --------------------------------------------------------------- pipeline


class PipelineConfig:
    """Validated multi-layer pipeline description (see README for keys)."""

    def __init__(self, args, extra: dict):
        self.detector = args.detector or "lof"
        if self.detector not in DETECTOR_CHOICES:
            raise ValidationError(f"unknown detector {self.detector!r}")
        self.metric = args.metric
        self.k = args.k if args.k is not None else 20
        self.epsilon = args.epsilon
        self.per_class_cov = bool(args.per_class_cov)
        self.pooling = args.pooling or "none"
        self.gem_p = args.gem_p if args.gem_p is not None else 3.0
        self.seed = args.seed if args.seed is not None else 0
        self.benchmark = args.benchmark or ""
        self.out_dir = args.out_dir
        if self.out_dir is None:
            raise ValidationError("pipeline needs out_dir (flag --out-dir or config key)")

        roles = ("train", "test_in", "test_out", "val_in", "val_out")
        flat = {r: getattr(args, r) for r in roles}
        dotted = {}
        for key, value in extra.items():
            role, dot, layer = key.partition(".")
            if not dot or role not in roles:
                raise ValidationError(f"unknown pipeline config key {key!r}")
            dotted.setdefault(role, {})[layer] = value
        if dotted and any(flat[r] for r in roles):
            raise ValidationError("mix of plain and dotted file keys; use one style")
        if dotted:
            self.layers = sorted(dotted.get("train", {}))
            if not self.layers:
                raise ValidationError("pipeline config has no train.<layer> entries")
            self.files = {
                role: {layer: Path(p) for layer, p in dotted.get(role, {}).items()}
                for role in roles
            }
            for role in ("train", "test_in", "test_out"):
                missing = set(self.layers) - set(self.files[role])
                if missing:
                    raise ValidationError(f"missing {role}.<layer> entries for {sorted(missing)}")
        else:
            for role in ("train", "test_in", "test_out"):
                if not flat[role]:
                    raise ValidationError(f"pipeline needs a {role} file")
            self.layers = ["layer_0"]
            self.files = {
                role: ({"layer_0": Path(flat[role])} if flat[role] else {}) for role in roles
            }
        has_val = bool(self.files["val_in"]) or bool(self.files["val_out"])
        if has_val:
            for role in ("val_in", "val_out"):
                missing = set(self.layers) - set(self.files[role])
                if missing:
                    raise ValidationError(f"missing {role} entries for {sorted(missing)}")
        self.explicit_val = has_val


def cmd_pipeline(args) -> int:
    conversions = {
        "detector": str,
        "metric": str,
        "k": int,
        "epsilon": str,
        "per_class_cov": lambda s: s.lower() in ("1", "true", "yes"),
        "pooling": str,
        "gem_p": float,
        "seed": int,
        "benchmark": str,
        "out_dir": str,
        "train": str,
        "test_in": str,
        "test_out": str,
        "val_in": str,
        "val_out": str,
    }
    extra = _merge_config(args, conversions)
    config = PipelineConfig(args, extra)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def _stage(name, fn, *a, **kw):
        try:
            return fn(*a, **kw)
        except (ValidationError, FileFormatError, NumericError, OSError) as exc:
            partial = f" (partial artifacts: {', '.join(written)})" if written else ""
            raise type(exc)(f"pipeline stage '{name}': {exc}{partial}") from exc

    pooling_spec = None
    if config.pooling != "none":
        pooling_spec = PoolingSpec.parse(config.pooling, gem_power=config.gem_p)

    def _load(role, layer):
        path = config.files[role].get(layer)
        if path is None:
            return None
        data = read_feature_file(_require_file(path, f"{role}.{layer}"))
        if isinstance(data, SpatialDataset):
            if pooling_spec is None:
                raise ValidationError(f"{path} holds spatial maps but pooling = none")
            data = pool_dataset(data, pooling_spec)
        return data

    fit_args = argparse.Namespace(
        detector=config.detector,
        metric=config.metric,
        k=config.k,
        epsilon=config.epsilon,
        per_class_cov=config.per_class_cov,
    )

    layer_arrays = {}
    for layer in config.layers:
        train = _stage("pool", _load, "train", layer)
        model = _stage("fit", _fit_detector, fit_args, train)
        arrays = {}
        for role in ("test_in", "test_out", "val_in", "val_out"):
            data = _stage("pool", _load, role, layer)
            if data is None:
                continue
            arrays[role] = _stage("score", _score_with_model, model, data)
        for role in ("test_in", "test_out"):
            path = out_dir / f"scores_{role}_{layer}.csv"
            write_scores_csv(arrays[role], path)
            written.append(path.name)
        layer_arrays[layer] = arrays

    names = tuple(config.layers)
    test_in = np.stack([layer_arrays[l]["test_in"] for l in names])
    test_out = np.stack([layer_arrays[l]["test_out"] for l in names])

    if len(names) == 1:
        weights = single_layer_weights(names[0])
        eval_in, eval_out = test_in, test_out
        split_note = {"mode": "single-layer (simplified); no weight fitting"}
    elif config.explicit_val:
        val_in = np.stack([layer_arrays[l]["val_in"] for l in names])
        val_out = np.stack([layer_arrays[l]["val_out"] for l in names])
        weights = _stage(
            "ensemble-fit", fit_weights, LayerScores(names, val_in), LayerScores(names, val_out)
        )
        eval_in, eval_out = test_in, test_out
        split_note = {"mode": "explicit validation files"}
    else:
        rng = np.random.default_rng([config.seed, 20, 80])
        perm_in = rng.permutation(test_in.shape[1])
        perm_out = rng.permutation(test_out.shape[1])
        n_val_in = max(1, int(VAL_FRACTION * len(perm_in)))
        n_val_out = max(1, int(VAL_FRACTION * len(perm_out)))
        if len(perm_in) - n_val_in < 1 or len(perm_out) - n_val_out < 1:
            raise ValidationError("test sets too small to carve a validation split")
        weights = _stage(
            "ensemble-fit",
            fit_weights,
            LayerScores(names, test_in[:, perm_in[:n_val_in]]),
            LayerScores(names, test_out[:, perm_out[:n_val_out]]),
        )
        eval_in = test_in[:, perm_in[n_val_in:]]
        eval_out = test_out[:, perm_out[n_val_out:]]
        split_note = {
            "mode": "held-out from test scores",
            "fraction": VAL_FRACTION,
            "seed": config.seed,
            "n_val_in": n_val_in,
            "n_val_out": n_val_out,
        }

    weights_path = out_dir / "weights.json"
    weights_path.write_text(weights.to_json() + "\n")
    written.append(weights_path.name)

    combined_in = _stage("combine", combine, LayerScores(names, eval_in), weights)
    combined_out = _stage("combine", combine, LayerScores(names, eval_out), weights)
    for tag, arr in (("in", combined_in), ("out", combined_out)):
        path = out_dir / f"combined_{tag}.csv"
        write_scores_csv(arr, path)
        written.append(path.name)

    report = _stage(
        "eval",
        evaluate,
        ScoreSet(combined_in, combined_out),
        detector=config.detector,
        benchmark=config.benchmark,
    )
    payload = report.as_dict()
    payload["layers"] = list(names)
    payload["validation_split"] = split_note
    payload["seed"] = config.seed
    (out_dir / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    (out_dir / "report.txt").write_text(format_table([report]) + "\n")
    print(format_table([report]))
    return 0


# ------------------------------------------------------------------ main


def _add_config_flag(p):
    p.add_argument("--config", help="key = value config file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oodkit",
        description="Out-of-distribution scoring from deep-feature embeddings",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pool", help="reduce spatial feature maps to flat vectors")
    _add_config_flag(p)
    p.add_argument("--method", help="gap | gmp | gem | crow | concat:a+b (default gap)")
    p.add_argument("--gem-p", type=float, dest="gem_p", help="GeM exponent (default 3)")
    p.add_argument("--in", dest="in_path", required=True, help="spatial OODF file")
    p.add_argument("--out", required=True, help="output flat OODF file")
    p.set_defaults(fn=cmd_pool)

    p = sub.add_parser("fit", help="fit a detector on training features")
    _add_config_flag(p)
    p.add_argument("--detector", choices=DETECTOR_CHOICES, help="default lof")
    p.add_argument("--k", type=int, help="LOF neighbor count (default 20)")
    p.add_argument("--metric", choices=("euclidean", "cosine"))
    p.add_argument("--epsilon", help="Mahalanobis ridge, number or 'auto'")
    p.add_argument(
        "--per-class-cov",
        action="store_const",
        const=True,
        dest="per_class_cov",
        help="per-class covariances instead of tied",
    )
    p.add_argument("--train", required=True, help="training OODF/CSV file")
    p.add_argument("--out", required=True, help="output OODM model file")
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("score", help="score features with a fitted model")
    _add_config_flag(p)
    p.add_argument("--model", required=True, help="OODM model file")
    p.add_argument("--in", dest="in_path", required=True, help="features to score")
    p.add_argument("--out", required=True, help="output scores CSV")
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("ensemble-fit", help="fit per-layer ensemble weights")
    _add_config_flag(p)
    p.add_argument("--in-scores", nargs="+", required=True, help="per-layer in-dist score CSVs")
    p.add_argument("--out-scores", nargs="+", required=True, help="per-layer OoD score CSVs")
    p.add_argument("--layers", help="comma-separated layer names (default: file stems)")
    p.add_argument("--out", required=True, help="output weights JSON")
    p.set_defaults(fn=cmd_ensemble_fit)

    p = sub.add_parser("eval", help="compute the four OoD metrics")
    _add_config_flag(p)
    p.add_argument("--in-scores", required=True, help="in-distribution score CSV")
    p.add_argument("--out-scores", required=True, help="OoD score CSV")
    p.add_argument("--report", required=True, help="output report JSON")
    p.add_argument("--detector", help="name recorded in the report")
    p.add_argument("--benchmark", help="name recorded in the report")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("simulate", help="run the dimensionality sweep benchmark")
    _add_config_flag(p)
    p.add_argument("--dims", help="comma list, e.g. 1,100,200 (default full sweep)")
    p.add_argument("--r", type=float, help=f"OoD mean offset (default {DEFAULT_OFFSET_R})")
    p.add_argument("--seeds", help="comma list or a..b range (default 0..4)")
    p.add_argument("--n-train", type=int, dest="n_train", help="train points per class")
    p.add_argument("--n-test-in", type=int, dest="n_test_in")
    p.add_argument("--n-test-out", type=int, dest="n_test_out")
    p.add_argument("--k", type=int, help="LOF neighbor count")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("pipeline", help="pool -> fit -> score -> ensemble -> eval")
    _add_config_flag(p)
    p.add_argument("--detector", choices=DETECTOR_CHOICES)
    p.add_argument("--metric", choices=("euclidean", "cosine"))
    p.add_argument("--k", type=int)
    p.add_argument("--epsilon")
    p.add_argument(
        "--per-class-cov", action="store_const", const=True, dest="per_class_cov"
    )
    p.add_argument("--pooling", help="none | gap | gmp | gem | crow | concat:a+b")
    p.add_argument("--gem-p", type=float, dest="gem_p")
    p.add_argument("--seed", type=int)
    p.add_argument("--benchmark")
    p.add_argument("--train", help="training features (single-layer form)")
    p.add_argument("--test-in", dest="test_in")
    p.add_argument("--test-out", dest="test_out")
    p.add_argument("--val-in", dest="val_in")
    p.add_argument("--val-out", dest="val_out")
    p.add_argument("--out-dir", dest="out_dir")
    p.set_defaults(fn=cmd_pipeline)

    return parser


_SIMPLE_CONVERSIONS = {
    "method": str,
    "gem_p": float,
    "detector": str,
    "k": int,
    "metric": str,
    "epsilon": str,
    "per_class_cov": lambda s: s.lower() in ("1", "true", "yes"),
    "layers": str,
    "dims": str,
    "r": float,
    "seeds": str,
    "n_train": int,
    "n_test_in": int,
    "n_test_out": int,
    "benchmark": str,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.fn is not cmd_pipeline:
            extra = _merge_config(args, _SIMPLE_CONVERSIONS)
            if extra:
                raise ValidationError(f"unknown config key(s): {sorted(extra)}")
        return args.fn(args)
    except ValidationError as exc:
        print(f"oodkit: validation error: {exc}", file=sys.stderr)
        return 1
    except (FileFormatError, OSError) as exc:
        print(f"oodkit: i/o error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"oodkit: numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
