"""Experiment orchestration and the ``msnsim`` command line.

Every CSV written here gets a ``<name>.manifest.json`` next to it holding the
resolved config, seeds, input hashes and tool versions.  Passing that manifest
back with ``--manifest`` re-runs the experiment; the primary CSV comes out
byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import platform
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, energymodel
from ._backend import BACKEND
from .config import ExperimentConfig, config_from_dict, load_config
from .datasets import LabeledImageSet, load_split
from .errors import ConfigError, FormatError, MissingCheckpoint, MsnError
from .network import DEFAULT_TRAIN, TrainConfig, architecture, load_checkpoint, save_checkpoint, train
from .network.noisy import evaluate, evaluate_noisy, quantize_model
from .noisemodel import NoiseSpec, integrate_rectangular, noise_for_current_sweep, rectangular_terms

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("dataset", "network", "bits", "noise_power_v2", "weight_sigma", "trials",
                 "mean_error", "ci95_halfwidth", "seed")
CALIBRATE_COLUMNS = ("bias_current_a", "thermal_power_v2", "flicker_power_v2",
                     "integrated_power_v2", "weight_sigma")
MANIFEST_FORMAT = "msnsim-manifest"
MANIFEST_VERSION = 1


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def dataset_digest(data: LabeledImageSet) -> str:
    h = hashlib.sha256()
    src = data.codes if data.codes is not None else data.images
    h.update(np.ascontiguousarray(src).tobytes())
    h.update(np.ascontiguousarray(data.labels, dtype=np.int64).tobytes())
    return h.hexdigest()


def _versions() -> dict:
    out = {"msnsim": __version__, "python": platform.python_version(), "numpy": np.__version__,
           "backend": BACKEND}
    try:
        import numba

        out["numba"] = numba.__version__
    except ImportError:  # pragma: no cover
        out["numba"] = None
    return out


def write_outputs(out_dir: Path, name: str, text: str, manifest: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{name}.csv"
    csv_path.write_bytes(text.encode("utf-8"))
    manifest = dict(manifest)
    manifest["output"] = {"csv": csv_path.name,
                          "sha256": hashlib.sha256(text.encode("utf-8")).hexdigest()}
    (out_dir / f"{name}.manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return csv_path


def _manifest(command: str, cfg: ExperimentConfig, config_text: str | None, **extra) -> dict:
    m = {"format": MANIFEST_FORMAT, "version": MANIFEST_VERSION, "command": command,
         "config": cfg.to_dict(), "config_text": config_text,
         "seeds": {"master_seed": cfg.seed, "train_seed": cfg.train_seed},
         "tool": _versions()}
    m.update(extra)
    return m


def load_manifest(path) -> tuple[dict, ExperimentConfig]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"manifest not found: {path}")
    try:
        m = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not JSON ({exc})") from exc
    if m.get("format") != MANIFEST_FORMAT or m.get("version") != MANIFEST_VERSION:
        raise FormatError(f"{path}: not a version {MANIFEST_VERSION} msnsim manifest")
    return m, config_from_dict(m["config"])


# ------------------------------------------------------------------- data


def _limit(data: LabeledImageSet, n: int) -> LabeledImageSet:
    return data.subset(slice(0, n)) if 0 < n < len(data) else data


def load_data(cfg: ExperimentConfig, split: str) -> LabeledImageSet:
    try:
        data = load_split(cfg.dataset, split, cfg.data_dir)
    except FileNotFoundError as exc:
        raise FileNotFoundError(f"{cfg.dataset} {split} data not found: {exc}") from None
    return _limit(data, cfg.train_limit if split == "train" else cfg.test_limit)


# --------------------------------------------------------------- training


def train_config(cfg: ExperimentConfig) -> TrainConfig:
    base = DEFAULT_TRAIN[cfg.network]
    return TrainConfig(
        learning_rate=cfg.learning_rate if cfg.learning_rate is not None else base.learning_rate,
        momentum=cfg.momentum,
        epochs=cfg.epochs if cfg.epochs is not None else base.epochs,
        batch_size=cfg.batch_size,
        seed=cfg.train_seed,
    )


def run_train(cfg: ExperimentConfig, config_text: str | None = None) -> dict:
    """Train a baseline and save its checkpoint; returns a summary dict."""
    spec = architecture(cfg.dataset, cfg.network, cfg.activation_alpha)
    data = load_data(cfg, "train")
    test = load_data(cfg, "test")
    model = train(spec, data, train_config(cfg), test=test)
    path = cfg.checkpoint_path()
    cfg = cfg.with_(checkpoint=str(path))
    path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(path, spec, model)
    summary = {"checkpoint": str(path), "sha256": sha256_file(path),
               "test_error": 1.0 - model.meta["test_accuracy"],
               "train_error": 1.0 - model.meta["train_accuracy"],
               "epochs": len(model.meta["epoch_loss"])}
    row = (cfg.dataset, cfg.network, summary["epochs"], summary["train_error"], summary["test_error"])
    text = csv_text(("dataset", "network", "epochs", "train_error", "test_error"), [row])
    write_outputs(Path(cfg.out), f"train-{cfg.dataset}-{cfg.network}", text,
                  _manifest("train", cfg, config_text,
                            checkpoint={"path": str(path), "sha256": summary["sha256"]},
                            data={"train_sha256": dataset_digest(data),
                                  "test_sha256": dataset_digest(test)}))
    return summary


def ensure_checkpoint(cfg: ExperimentConfig):
    """Load the configured checkpoint, training it first if the config allows."""
    path = cfg.checkpoint_path()
    if not path.is_file():
        if not cfg.train_if_missing:
            raise MissingCheckpoint(f"checkpoint not found: {path} (run `msnsim train` first)")
        run_train(cfg)
    spec, model = load_checkpoint(path)
    if spec.to_dict()["layers"] != architecture(cfg.dataset, cfg.network,
                                                cfg.activation_alpha).to_dict()["layers"]:
        raise FormatError(f"{path} does not hold a {cfg.dataset}-{cfg.network} network")
    return spec, model, path


# ------------------------------------------------------------ noise sweep


@dataclass(frozen=True)
class SweepResult:
    rows: list  # tuples ordered as SWEEP_COLUMNS
    float_error: float

    def __post_init__(self):
        i = SWEEP_COLUMNS.index("mean_error")
        if any(not 0.0 <= r[i] <= 1.0 for r in self.rows):
            raise ValueError("mean_error outside [0, 1]")

    def column(self, name: str) -> np.ndarray:
        i = SWEEP_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows])

    def for_bits(self, bits: int) -> list:
        return [r for r in self.rows if r[2] == bits]

    def to_csv(self) -> str:
        return csv_text(SWEEP_COLUMNS, self.rows)


def noise_points(cfg: ExperimentConfig) -> list[NoiseSpec]:
    fs = cfg.circuit.full_scale_v
    if cfg.bias_currents_a is not None:
        return noise_for_current_sweep(cfg.bias_currents_a, cfg.circuit)
    return [NoiseSpec.from_power(p, fs) for p in cfg.noise_grid]


def run_noise_sweep(cfg: ExperimentConfig, config_text: str | None = None,
                    expect: dict | None = None) -> SweepResult:
    """Error rate for every (bits, noise point) cell; writes CSV and manifest.

    All cells share ``cfg.seed`` so they see the same underlying normal
    draws.  ``expect`` holds input hashes from a manifest being replayed.
    """
    spec, model, ckpt = ensure_checkpoint(cfg)
    cfg = cfg.with_(checkpoint=str(ckpt))
    ckpt_hash = sha256_file(ckpt)
    test = load_data(cfg, "test")
    data_hash = dataset_digest(test)
    if expect:
        if expect.get("checkpoint") and expect["checkpoint"] != ckpt_hash:
            raise FormatError(f"checkpoint {ckpt} differs from the one in the manifest")
        if expect.get("test_data") and expect["test_data"] != data_hash:
            raise FormatError("test data differs from the data recorded in the manifest")
    float_error = evaluate(model, spec, test, cfg.chunk).error_rate
    rows = []
    for bits in sorted(set(cfg.bits)):
        for noise in sorted(noise_points(cfg), key=lambda s: s.integrated_power_v2):
            rep = evaluate_noisy(model, spec, test, bits, noise, cfg.n_trials, cfg.seed,
                                 cfg.noise_resample_mode, cfg.dense_noise_mode, cfg.chunk)
            rows.append((cfg.dataset, cfg.network, int(bits), noise.integrated_power_v2,
                         noise.weight_sigma, rep.trials, rep.error_rate, rep.ci95_halfwidth,
                         cfg.seed))
            log.info("bits=%d power=%.3g error=%.4f +- %.4f", bits, noise.integrated_power_v2,
                     rep.error_rate, rep.ci95_halfwidth)
    result = SweepResult(rows, float_error)
    write_outputs(Path(cfg.out), f"noise-{cfg.dataset}-{cfg.network}", result.to_csv(),
                  _manifest("sweep-noise", cfg, config_text,
                            checkpoint={"path": str(ckpt), "sha256": ckpt_hash},
                            data={"test_sha256": data_hash, "test_count": len(test)},
                            float_error=float_error))
    return result


def run_eval(cfg: ExperimentConfig, config_text: str | None = None) -> list:
    """Noise-free test error of the float model and each quantized width."""
    spec, model, ckpt = ensure_checkpoint(cfg)
    cfg = cfg.with_(checkpoint=str(ckpt))
    test = load_data(cfg, "test")
    rows = [(cfg.dataset, cfg.network, "float", evaluate(model, spec, test, cfg.chunk).error_rate)]
    for bits in sorted(set(cfg.bits)):
        qparams = quantize_model(model, spec, bits).params
        rows.append((cfg.dataset, cfg.network, str(bits),
                     evaluate(qparams, spec, test, cfg.chunk).error_rate))
    text = csv_text(("dataset", "network", "bits", "error"), rows)
    write_outputs(Path(cfg.out), f"eval-{cfg.dataset}-{cfg.network}", text,
                  _manifest("eval", cfg, config_text,
                            checkpoint={"path": str(ckpt), "sha256": sha256_file(ckpt)},
                            data={"test_sha256": dataset_digest(test)}))
    return rows


# ----------------------------------------------------------- energy sweep


def run_energy_sweep(cfg: ExperimentConfig, config_text: str | None = None) -> energymodel.PowerCurve:
    e = cfg.energy
    params = energymodel.calibrate(e.anchors())
    curve = energymodel.power_curve(e.f_lo_hz, e.f_hi_hz, e.points_per_decade, params, e.bits)
    write_outputs(Path(cfg.out), f"energy-{e.bits}b", curve.to_csv(),
                  _manifest("sweep-energy", cfg, config_text, energy_params=params.to_dict()))
    return curve


def calibrate_text(cfg: ExperimentConfig) -> str:
    currents = cfg.bias_currents_a or (cfg.circuit.bias_current,)
    rows = []
    for i in currents:
        p = cfg.circuit.with_(bias_current=float(i))
        thermal, flicker = rectangular_terms(p)
        spec = integrate_rectangular(p)
        rows.append((float(i), thermal, flicker, spec.integrated_power_v2, spec.weight_sigma))
    return csv_text(CALIBRATE_COLUMNS, rows)


# -------------------------------------------------------------------- CLI


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 2 with a single line
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="msnsim", description="Mixed-signal neuron noise and energy simulator.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, manifest=False):
        sp.add_argument("--config", help="TOML config file")
        sp.add_argument("--seed", type=int, help="override the seed (train: training seed)")
        sp.add_argument("--out", help="override the output directory")
        if manifest:
            sp.add_argument("--manifest", help="re-run from a manifest written by an earlier run")
        sp.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("train", help="train a baseline and save its checkpoint"))
    common(sub.add_parser("eval", help="noise-free error of the float and quantized model"))
    common(sub.add_parser("sweep-noise", help="error rate over bit widths and noise powers"),
           manifest=True)
    se = sub.add_parser("sweep-energy", help="analog vs digital MAC power over frequency")
    common(se, manifest=True)
    se.add_argument("--bits", type=int, choices=(3, 8))
    se.add_argument("--flo", type=float, help="lowest frequency in Hz")
    se.add_argument("--fhi", type=float, help="highest frequency in Hz")
    se.add_argument("--ppd", type=int, help="points per decade")
    cal = sub.add_parser("calibrate", help="print the noise spec for the circuit parameters")
    common(cal)
    cal.add_argument("--bias-current", type=float, action="append",
                     help="bias current in A (repeatable)")
    return p


def _resolve(args) -> tuple[ExperimentConfig, str | None, dict | None]:
    expect = None
    text = None
    if getattr(args, "manifest", None):
        if args.config:
            raise ConfigError("give --config or --manifest, not both")
        m, cfg = load_manifest(args.manifest)
        text = m.get("config_text")
        expect = {"checkpoint": m.get("checkpoint", {}).get("sha256"),
                  "test_data": m.get("data", {}).get("test_sha256")}
    elif args.config:
        cfg, text = load_config(args.config)
    else:
        cfg = ExperimentConfig()
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be >= 0")
        cfg = cfg.with_(train_seed=args.seed) if args.command == "train" else cfg.with_(seed=args.seed)
    if args.out is not None:
        cfg = cfg.with_(out=args.out)
    if args.command == "sweep-energy":
        kw = {k: v for k, v in (("bits", args.bits), ("f_lo_hz", args.flo), ("f_hi_hz", args.fhi),
                                ("points_per_decade", args.ppd)) if v is not None}
        if kw:
            from dataclasses import replace

            cfg = cfg.with_(energy=replace(cfg.energy, **kw))
    if args.command == "calibrate" and args.bias_current:
        cfg = cfg.with_(bias_currents_a=tuple(args.bias_current), noise_powers_v2=None)
    return cfg, text, expect


def cli_main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, text, expect = _resolve(args)
        if args.command == "train":
            s = run_train(cfg, text)
            print(f"saved {s['checkpoint']} test_error={s['test_error']:.4f}")
        elif args.command == "eval":
            sys.stdout.write(csv_text(("dataset", "network", "bits", "error"), run_eval(cfg, text)))
        elif args.command == "sweep-noise":
            sys.stdout.write(run_noise_sweep(cfg, text, expect).to_csv())
        elif args.command == "sweep-energy":
            sys.stdout.write(run_energy_sweep(cfg, text).to_csv())
        elif args.command == "calibrate":
            sys.stdout.write(calibrate_text(cfg))
    except (MsnError, OSError, ValueError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"msnsim: error: {msg}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(cli_main())
