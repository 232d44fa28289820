"""Command-line front end.

Every command writes its outputs plus ``manifest.json`` into ``--out-dir``.
The manifest holds the fully resolved configuration, so ``vgfx replay
manifest.json`` regenerates the same output bytes (for any ``--workers``).

Exit codes: 0 success, 2 configuration/usage error, 3 I/O or data error,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, analytics, config, io, marketdata
from .engine import backend, convergence_study, simulate
from .errors import ConfigError, DataError, NumericalError, VgfxError
from .pricing import LsmConfig, OptionContract, price

MANIFEST = "manifest.json"
RANDOMIZED = {"simulate", "price", "converge"}


# ---------------------------------------------------------------------------
# argument parsing

def _float_list(text: str) -> list[float]:
    items = [t for t in text.replace(";", ",").split(",") if t.strip()]
    try:
        return [float(t) for t in items]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from exc


def _int_list(text: str) -> list[int]:
    vals = _float_list(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}")
    return [int(v) for v in vals]


# (flag, section, key, argparse kwargs)
COMMON_FLAGS = [
    ("--seed", "simulation", "seed", {"type": int}),
    ("--paths", "simulation", "paths", {"type": int}),
    ("--steps", "simulation", "steps", {"type": int}),
    ("--t0", "simulation", "t0", {"type": float}),
    ("--horizon", "simulation", "horizon", {"type": float}),
    ("--beta", "subordinator", "beta", {"type": float}),
    ("--alpha", "subordinator", "alpha", {"type": float}),
    ("--beta-convention", "subordinator", "convention", {"choices": ["rate", "scale"]}),
    ("--drift-clock", "simulation", "drift_clock", {"choices": ["subordinated", "calendar"]}),
    ("--truncation", "simulation", "truncation", {"choices": ["full", "absorb"]}),
    ("--clock", "simulation", "clock", {"choices": ["gamma", "deterministic"]}),
    ("--localize", "simulation", "localize", {"type": int, "metavar": "N"}),
    ("--workers", "simulation", "workers", {"type": int}),
    ("--out-dir", "output", "dir", {}),
    ("--format", "output", "format", {"choices": ["csv", "bin", "json"]}),
]

COMMAND_FLAGS = {
    "price": [
        ("--style", "price", "style", {"choices": ["american", "european", "both"]}),
        ("--right", "price", "right", {"choices": ["put", "call"]}),
        ("--strike-ladder", "price", "strikes", {"type": _float_list}),
        ("--lsm-degree", "price", "lsm_degree", {"type": int}),
    ],
    "converge": [
        ("--m-values", "converge", "m_values", {"type": _int_list}),
        ("--delta-t", "converge", "delta_t", {"type": float}),
    ],
    "gof": [
        ("--bins", "gof", "bins", {"type": int}),
        ("--reference", "gof", "reference", {"choices": ["normal", "vg", "both"]}),
        ("--vg-fit", "gof", "vg_fit", {"choices": ["mle", "moments"]}),
        ("--sample", "gof", "sample", {"help": "rate/price CSV; log-returns of its values are tested"}),
        ("--synthetic", "gof", "synthetic", {"type": int, "metavar": "DRAWS",
                                             "help": "test DRAWS standard normal draws"}),
    ],
    "compare": [
        ("--chain", "compare", "chain", {}),
        ("--results", "compare", "results", {}),
        ("--results-style", "compare", "results_style", {"choices": ["american", "european"]}),
        ("--normalizer", "compare", "normalizer", {"choices": ["range", "max"]}),
    ],
}


def _dest(section, key):
    return f"cfg__{section}__{key}"


def _add_flags(parser, flags):
    for flag, section, key, kw in flags:
        parser.add_argument(flag, dest=_dest(section, key), default=None, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vgfx", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"vgfx {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "simulate state paths",
        "price": "price a strike ladder on one set of paths",
        "converge": "pathwise convergence study on shared noise",
        "gof": "chi-square goodness of fit of log-returns",
        "compare": "NRMSE of model prices against a market chain",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--no-noise", dest="cfg__simulation__noise", action="store_const",
                       const=False, default=None, help="zero the Gaussian draws")
        _add_flags(p, COMMON_FLAGS + COMMAND_FLAGS.get(name, []))
    r = sub.add_parser("replay", help="re-run a command from its manifest")
    r.add_argument("manifest")
    r.add_argument("--out-dir")
    r.add_argument("--workers", type=int)
    r.add_argument("--verify", action="store_true",
                   help="compare output hashes with the manifest (exit 1 on mismatch)")
    return parser


def overrides_from_args(args) -> dict:
    out: dict = {}
    for name, value in vars(args).items():
        if name.startswith("cfg__") and value is not None:
            _, section, key = name.split("__", 2)
            out.setdefault(section, {})[key] = value
    return out


# ---------------------------------------------------------------------------
# output helpers

class Outputs:
    def __init__(self, out_dir: Path):
        self.dir = out_dir
        self.files: list[Path] = []

    def write_text(self, name: str, text: str) -> Path:
        path = self.dir / name
        path.write_text(text)
        self.files.append(path)
        return path

    def add(self, path: Path) -> Path:
        self.files.append(path)
        return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _table(outputs: Outputs, stem: str, fmt: str, columns, rows) -> None:
    if fmt == "json":
        outputs.write_text(f"{stem}.json", json.dumps(
            {"columns": list(columns), "rows": [dict(zip(columns, r)) if not isinstance(r, dict)
                                                else r for r in rows]}, sort_keys=True) + "\n")
    else:
        outputs.write_text(f"{stem}.csv", io.rows_to_csv(columns, rows))


def _table_format(cfg) -> str:
    fmt = cfg["output"]["format"]
    if fmt == "bin":
        raise ConfigError("--format bin only applies to 'simulate'; use csv or json")
    return fmt


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(cfg: dict, out: Outputs) -> None:
    p, corr, sub = config.build_model(cfg)
    grid, sim = config.build_simulation(cfg)
    paths = simulate(p, corr, sub, grid, sim)
    fmt = cfg["output"]["format"]
    if fmt == "csv":
        out.add(io.write_paths_csv(paths, out.dir / "paths.csv"))
    elif fmt == "bin":
        out.add(io.write_paths_bin(paths, out.dir / "paths.vgp"))
    else:
        out.write_text("paths.json", io.paths_to_json(paths) + "\n")


def cmd_price(cfg: dict, out: Outputs) -> None:
    fmt = _table_format(cfg)
    pc = cfg["price"]
    strikes = [float(k) for k in pc["strikes"]]
    if not strikes:
        raise ConfigError("the strike ladder is empty")
    styles = ["american", "european"] if pc["style"] == "both" else [pc["style"]]
    p, corr, sub = config.build_model(cfg)
    grid, sim = config.build_simulation(cfg)
    lsm = LsmConfig(degree=int(pc["lsm_degree"]))
    paths = simulate(p, corr, sub, grid, sim)
    maturity = grid.T - grid.t0
    _, _, skew, kurt = analytics.moment_report(paths.terminal())
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for k in strikes:
            for style in styles:
                r = price(paths, OptionContract(style, pc["right"], k, maturity), lsm)
                rows.append((k, style, r.right, r.price, r.std_error, r.n_paths, skew, kurt))
    cols = ("strike", "style", "right", "price", "std_error", "n_paths", "skewness", "kurtosis")
    _table(out, "prices", fmt, cols, rows)


def cmd_converge(cfg: dict, out: Outputs) -> None:
    fmt = _table_format(cfg)
    p, corr, sub = config.build_model(cfg)
    grid, sim = config.build_simulation(cfg)
    cc = cfg["converge"]
    res = convergence_study(p, corr, sub, grid.T, sim, cc["m_values"],
                            delta_t=float(cc["delta_t"]), t0=grid.t0)
    rows = [(r["m"], r["n_steps"], r["error"]) for r in res.rows()]
    _table(out, "convergence", fmt, ("m", "n_steps", "error"), rows)
    summary = {"slope": res.slope, "n_kept": res.n_kept, "n_censored": res.n_censored,
               "censor_level": res.censor_level, "reference_m": res.m_values[-1]}
    out.write_text("convergence_summary.json", json.dumps(summary, sort_keys=True) + "\n")


def _gof_sample(cfg: dict) -> tuple[np.ndarray, str, int]:
    """Sample under test, its source label and how many draws were excluded."""
    g = cfg["gof"]
    if g["sample"]:
        series = marketdata.load_rate_csv(g["sample"])
        return analytics.log_returns(np.asarray(series.values)), f"file:{g['sample']}", 0
    if g["synthetic"]:
        n = config.as_int(g["synthetic"], "synthetic")
        if n < 2:
            raise ConfigError("--synthetic needs at least 2 draws")
        seed = config.require_seed(cfg)
        gen = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
        return gen.standard_normal(n), "synthetic-normal", 0
    p, corr, sub = config.build_model(cfg)
    grid, sim = config.build_simulation(cfg)
    paths = simulate(p, corr, sub, grid, sim)
    s_t = paths.terminal()
    # an Euler step can overshoot below zero; such paths have no log-return
    keep = s_t > 0
    if keep.sum() < 2:
        raise NumericalError("fewer than two positive terminal prices; log-returns undefined")
    return np.log(s_t[keep] / p.s0), "simulated-log-return", int(s_t.size - keep.sum())


def cmd_gof(cfg: dict, out: Outputs) -> None:
    fmt = _table_format(cfg)
    g = cfg["gof"]
    sample, source, excluded = _gof_sample(cfg)
    bins = config.as_int(g["bins"], "bins")
    refs = ["normal", "vg"] if g["reference"] == "both" else [g["reference"]]
    fits = {"normal": analytics.NormalFit.fit,
            "vg": lambda x: analytics.VarianceGammaFit.fit(x, g["vg_fit"])}
    rows, bin_rows = [], []
    for name in refs:
        ref = fits[name](sample)
        res = analytics.goodness_of_fit(sample, ref, bins)
        rows.append((name, source, sample.size, excluded, res["statistic"], res["dof"],
                     res["critical_95"], res["statistic"] > res["critical_95"]))
        b = res["bins"]
        for i in range(bins):
            bin_rows.append((name, i, float(b.edges[i]), float(b.edges[i + 1]),
                             float(b.observed[i]), float(b.expected[i])))
    _table(out, "gof", fmt, ("reference", "source", "n", "excluded", "statistic", "dof",
                             "critical_95", "reject_95"), rows)
    _table(out, "gof_bins", fmt, ("reference", "bin", "lo", "hi", "observed", "expected"),
           bin_rows)


def cmd_compare(cfg: dict, out: Outputs) -> None:
    fmt = _table_format(cfg)
    c = cfg["compare"]
    if not c["chain"] or not c["results"]:
        raise ConfigError("compare needs --chain and --results")
    chain = marketdata.load_chain_csv(c["chain"])
    results = marketdata.load_results_csv(c["results"], style=c["results_style"])
    q = marketdata.build_comparison(chain, results)
    value = analytics.nrmse(q, c["normalizer"])
    rows = [(float(k), float(s), float(m), float(s - m))
            for k, s, m in zip(q.strikes, q.simulated, q.market)]
    _table(out, "comparison", fmt, ("strike", "simulated", "market", "diff"), rows)
    out.write_text("nrmse.json", json.dumps(
        {"nrmse": value, "normalizer": c["normalizer"], "n_quotes": len(rows)},
        sort_keys=True) + "\n")


COMMANDS = {
    "simulate": cmd_simulate,
    "price": cmd_price,
    "converge": cmd_converge,
    "gof": cmd_gof,
    "compare": cmd_compare,
}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run(command: str, cfg: dict, argv=None) -> dict:
    """Execute ``command`` with a resolved config; returns the manifest written."""
    out_dir = Path(cfg["output"]["dir"])
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out_dir}: {exc}") from exc
    started = _now()
    outputs = Outputs(out_dir)
    try:
        COMMANDS[command](cfg, outputs)
    except OSError as exc:
        raise DataError(str(exc)) from exc
    # workers and the output directory do not influence the data
    recorded = copy.deepcopy(cfg)
    manifest = {
        "tool": "vgfx",
        "version": __version__,
        "backend": backend.BACKEND,
        "command": command,
        "argv": list(argv) if argv is not None else None,
        "config": recorded,
        "started": started,
        "finished": _now(),
        "outputs": [{"file": f.name, "bytes": f.stat().st_size, "sha256": _sha256(f)}
                    for f in outputs.files],
    }
    (out_dir / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def replay(manifest_path, out_dir=None, workers=None, verify=False) -> dict:
    path = Path(manifest_path)
    try:
        old = json.loads(path.read_text())
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not a JSON manifest ({exc})") from exc
    if old.get("tool") != "vgfx" or old.get("command") not in COMMANDS:
        raise ConfigError(f"{path}: not a vgfx manifest")
    cfg = config.merge(config.DEFAULTS, old["config"])
    cfg["output"]["dir"] = str(out_dir) if out_dir is not None else str(path.parent)
    if workers is not None:
        cfg["simulation"]["workers"] = workers
    new = run(old["command"], cfg, argv=["replay", str(path)])
    if verify:
        before = {o["file"]: o["sha256"] for o in old["outputs"]}
        after = {o["file"]: o["sha256"] for o in new["outputs"]}
        if before != after:
            raise ReplayMismatch(f"replayed outputs differ from {path}")
    return new


class ReplayMismatch(VgfxError):
    exit_code = 1


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            replay(args.manifest, args.out_dir, args.workers, args.verify)
        else:
            cfg = config.resolve(args.config, overrides_from_args(args))
            if args.command in RANDOMIZED or (args.command == "gof" and not cfg["gof"]["sample"]):
                config.require_seed(cfg)
            run(args.command, cfg, argv)
    except VgfxError as exc:
        print(f"vgfx: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
