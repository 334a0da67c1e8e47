"""Command-line front end.

Subcommands: ``convert``, ``train``, ``evaluate``, ``forecast``,
``gradcheck``.  Every command is a thin wrapper over the library; settings
resolve as flag > config file > default, and ``--print-config`` dumps the
resolved values as reusable ``key = value`` lines.

Exit codes: 0 success, 1 usage or pipeline error, 2 gradient-check failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .conversion import StationMeta
from .errors import ConfigError, PwvcastError
from .evaluation import lead_time_sweep, write_report
from .forecast import apply_bias_correction, predict_iterative
from .lstm import init_model
from .modelio import load_model, save_model
from .series import chrono_split, export_csv, ingest_csv, make_windows
from .training import TrainConfig, gradient_check, train

WINDOW_WIDTH = 48
TRAIN_FRACTION = 0.8
GRADCHECK_THRESHOLD = 1e-4

_DEFAULTS = {
    "kind": "pwv",
    "seed": 0,
    "epochs": 150,
    "batch": 32,
    "arch": "64",
    "delta": 1.0,
    "leads": 12,
    "steps": 1,
    "normalize": False,
    "corrupt": False,
}

_OPTIONAL_KEYS = ("input", "lat", "height", "out", "bias", "model")

_CASTS = {
    "input": str, "kind": str, "lat": float, "height": float, "seed": int,
    "out": str, "epochs": int, "batch": int, "arch": str, "delta": float,
    "bias": float, "model": str, "leads": int, "steps": int,
}


@dataclass
class RunConfig:
    """Fully resolved settings for one command invocation."""

    command: str
    input: str | None = None
    kind: str = "pwv"
    lat: float | None = None
    height: float | None = None
    seed: int = 0
    out: str | None = None
    epochs: int = 150
    batch: int = 32
    arch: str = "64"
    delta: float = 1.0
    normalize: bool = False
    bias: float | None = None
    model: str | None = None
    leads: int = 12
    steps: int = 1
    corrupt: bool = False

    def arch_sizes(self) -> tuple[int, ...]:
        try:
            sizes = tuple(int(part) for part in self.arch.split(","))
        except ValueError:
            raise ConfigError(f"--arch {self.arch!r} must be comma-separated integers")
        return sizes

    def dump(self) -> str:
        pairs = [("command", self.command)]
        for key in ("input", "kind", "lat", "height", "seed", "out", "epochs",
                    "batch", "arch", "delta", "normalize", "bias", "model",
                    "leads", "steps", "corrupt"):
            value = getattr(self, key)
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif value is None:
                value = "none"
            pairs.append((key, value))
        return "\n".join(f"{key} = {value}" for key, value in pairs)


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def build_parser() -> _Parser:
    parser = _Parser(prog="pwvcast",
                     description="GPS wet-delay conversion and water-vapor forecasting")
    sub = parser.add_subparsers(dest="command")

    def shared(p):
        p.add_argument("--input", help="input CSV (timestamp,value)")
        p.add_argument("--kind", choices=["zwd", "pwv"], help="input value kind")
        p.add_argument("--lat", type=float, help="station latitude, degrees")
        p.add_argument("--height", type=float, help="station height, meters")
        p.add_argument("--config", help="key = value settings file")
        p.add_argument("--seed", type=int, help="seed for all randomness")
        p.add_argument("--out", help="output path")
        p.add_argument("--print-config", action="store_true", default=None,
                       help="print the resolved settings before running")

    p_convert = sub.add_parser("convert", parents=[], help="ZWD CSV to PWV CSV")
    shared(p_convert)

    p_train = sub.add_parser("train", help="train a forecasting model")
    shared(p_train)
    p_train.add_argument("--epochs", type=int, help="training epochs (default 150)")
    p_train.add_argument("--batch", type=int, help="batch size (default 32)")
    p_train.add_argument("--arch", help="hidden sizes, e.g. 64 or 64,32")
    p_train.add_argument("--delta", type=float, help="huber loss threshold (default 1.0)")
    p_train.add_argument("--normalize", action="store_true", default=None,
                         help="normalize inputs with train-split statistics")
    p_train.add_argument("--bias", type=float,
                         help="constant output correction (mm) folded into the model")

    p_eval = sub.add_parser("evaluate", help="lead-time RMSE report on the test split")
    shared(p_eval)
    p_eval.add_argument("--model", help="trained model file")
    p_eval.add_argument("--leads", type=int, help="number of 5-minute leads (default 12)")

    p_fc = sub.add_parser("forecast", help="forecast ahead from the end of a series")
    shared(p_fc)
    p_fc.add_argument("--model", help="trained model file")
    p_fc.add_argument("--steps", type=int, help="steps to forecast (default 1)")

    p_gc = sub.add_parser("gradcheck", help="finite-difference check of the gradients")
    shared(p_gc)
    p_gc.add_argument("--corrupt", action="store_true", default=None,
                      help="corrupt one analytic gradient (check must then fail)")

    return parser


def _parse_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path) as handle:
            for lineno, raw in enumerate(handle, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, _, value = line.partition("=")
                key = key.strip().replace("-", "_")
                values[key] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    return values


def _cast(key: str, raw: str):
    if key in ("normalize", "corrupt"):
        lowered = raw.lower()
        if lowered in ("true", "yes", "1"):
            return True
        if lowered in ("false", "no", "0"):
            return False
        raise ConfigError(f"config key {key!r}: {raw!r} is not a boolean")
    caster = _CASTS.get(key)
    if caster is None:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        return caster(raw)
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from exc


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    file_values = _parse_config_file(ns.config) if getattr(ns, "config", None) else {}
    cfg = RunConfig(command=ns.command)
    for key in list(_DEFAULTS) + list(_OPTIONAL_KEYS):
        flag = getattr(ns, key, None)
        if flag is not None:
            value = flag
        elif key in file_values:
            value = _cast(key, file_values[key])
        elif key in _DEFAULTS:
            value = _DEFAULTS[key]
        else:
            value = None
        setattr(cfg, key, value)
    unknown = set(file_values) - set(_DEFAULTS) - set(_OPTIONAL_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _require(cfg: RunConfig, key: str, why: str):
    if getattr(cfg, key) is None:
        raise ConfigError(f"--{key} is required {why}")


def _station(cfg: RunConfig) -> StationMeta:
    _require(cfg, "lat", "for wet-delay input")
    _require(cfg, "height", "for wet-delay input (station height in meters)")
    return StationMeta(latitude_deg=cfg.lat, height_m=cfg.height)


def _load_series(cfg: RunConfig):
    _require(cfg, "input", "to read a series")
    station = _station(cfg) if cfg.kind == "zwd" else None
    return ingest_csv(cfg.input, kind=cfg.kind, station=station)


def _iso(epoch_s: int) -> str:
    return datetime.fromtimestamp(epoch_s, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def cmd_convert(cfg: RunConfig) -> int:
    _require(cfg, "input", "to read a wet-delay series")
    _require(cfg, "out", "to write the converted series")
    station = _station(cfg)
    series = ingest_csv(cfg.input, kind="zwd", station=station)
    export_csv(series, cfg.out)
    print(f"wrote {int(np.count_nonzero(series.present))} rows to {cfg.out}")
    return 0


def _windows_and_split(cfg: RunConfig):
    series = _load_series(cfg)
    windows = make_windows(series, WINDOW_WIDTH)
    if len(windows) == 0:
        raise ConfigError("input series yields no gap-free training windows")
    return series, chrono_split(windows, TRAIN_FRACTION)


def cmd_train(cfg: RunConfig) -> int:
    _require(cfg, "out", "to save the trained model")
    _, split = _windows_and_split(cfg)
    train_config = TrainConfig(epochs=cfg.epochs, batch_size=cfg.batch,
                               huber_delta=cfg.delta, seed=cfg.seed,
                               normalize=cfg.normalize)
    model, history = train(split, train_config, arch=cfg.arch_sizes())
    if cfg.bias is not None:
        model = apply_bias_correction(model, cfg.bias)

    losses_path = cfg.out + ".losses.csv"
    written = []
    try:
        save_model(model, cfg.out)
        written.append(cfg.out)
        with open(losses_path, "w") as handle:
            handle.write("epoch,loss\n")
            for epoch, loss in enumerate(history):
                handle.write(f"{epoch},{loss:.17g}\n")
        written.append(losses_path)
    except BaseException:
        for path in written:
            try:
                os.remove(path)
            except OSError:
                pass
        raise
    print(f"trained {len(history)} epochs; model -> {cfg.out}; losses -> {losses_path}")
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    _require(cfg, "model", "to evaluate")
    _require(cfg, "out", "to write the report CSV")
    series, split = _windows_and_split(cfg)
    model = load_model(cfg.model)
    report = lead_time_sweep(model, split.test, series, leads=cfg.leads)
    write_report(report, cfg.out)

    print("lead_min        model        naive      average")
    for row in report.rows:
        if row.lead_steps > 3:
            break
        print(f"{row.lead_minutes:8.0f} {row.rmse_model_mm:12.4f} "
              f"{row.rmse_naive_mm:12.4f} {row.rmse_average_mm:12.4f}")
    print(f"report -> {cfg.out}")
    return 0


def cmd_forecast(cfg: RunConfig) -> int:
    _require(cfg, "model", "to forecast")
    if cfg.steps < 1:
        raise ConfigError(f"--steps {cfg.steps!r} must be >= 1")
    series = _load_series(cfg)
    model = load_model(cfg.model)

    present = series.present
    run = 0
    for i in range(len(series) - 1, -1, -1):
        if not present[i]:
            break
        run += 1
    if run < model.window_width:
        raise ConfigError(f"need {model.window_width} trailing gap-free samples, "
                          f"found {run}")
    window = series.values[len(series) - model.window_width:]
    preds = predict_iterative(model, window, cfg.steps)

    last_epoch = series.epoch_at(len(series) - 1)
    lines = [f"{_iso(last_epoch + (k + 1) * series.cadence_s)},{preds[k]:.17g}"
             for k in range(cfg.steps)]
    for line in lines:
        print(line)
    if cfg.out:
        with open(cfg.out, "w") as handle:
            handle.write("timestamp,value\n")
            handle.write("\n".join(lines) + "\n")
    return 0


def cmd_gradcheck(cfg: RunConfig) -> int:
    rng = np.random.default_rng(cfg.seed)
    model = init_model([8], cfg.seed, window_width=WINDOW_WIDTH)
    window = rng.normal(0.0, 1.0, WINDOW_WIDTH)
    target = float(rng.normal())
    corruption = 1.0 if cfg.corrupt else 0.0
    error = gradient_check(model, window, target, delta=1.0, corruption=corruption)
    print(f"max relative gradient error: {error:.6e}")
    if error < GRADCHECK_THRESHOLD:
        print("gradcheck PASS")
        return 0
    print("gradcheck FAIL")
    return 2


_COMMANDS = {
    "convert": cmd_convert,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "forecast": cmd_forecast,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if ns.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        cfg = resolve_config(ns)
        if getattr(ns, "print_config", None):
            print(cfg.dump())
        return _COMMANDS[ns.command](cfg)
    except PwvcastError as exc:
        sys.stderr.write(f"pwvcast: error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"pwvcast: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
