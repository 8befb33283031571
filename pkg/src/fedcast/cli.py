"""Config-driven experiment runner.

Subcommands:
  generate  write synthetic client CSVs and print per-client load statistics
  train     run one (server_opt, client_opt, scheme) cell
  grid      run a grid of cells and collate a result table
  report    collate result directories into plain CSV tables

A single YAML config drives everything; every key has a default, so a minimal
config only names what deviates. --seed and --out override the config.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import csv
import json
import sys
import traceback
from pathlib import Path

import numpy as np
import yaml

from . import data as da
from . import federation as fe
from . import model as mo
from .client_opt import CLIENT_KINDS, ClientHyper
from .kernels import BACKEND
from .numerics import make_rng
from .serialize import save_params
from .server_opt import SERVER_KINDS, ServerHyper

# stream tags keeping data generation and parameter init independent
DATA_STREAM = 101
INIT_STREAM = 202

DEFAULT_CONFIG = {
    "seed": 0,
    "out": "results",
    "data": {
        "source": "synthetic",
        "csv_dir": None,
        "n_clients": 6,
        "weeks": 4,
        "scale_spread": 0.6,
        "offset_spread": 0.5,
        "phase_spread": 1.0,
    },
    "model": {"hidden": 25, "lookback": 12, "lookahead": 4, "mlp_hidden": [150, 75]},
    "split": [0.8, 0.1, 0.1],
    "federation": {
        "rounds": 20,
        "scheme": "full-shared",
        "client_opt": "adam",
        "server_opt": "fedavg",
        "wire_bytes": 4,
        "weighting": "uniform",
    },
    "client": {
        "lr": 0.005,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
        "prox_weight": 0.01,
        "local_steps": 20,
        "batch_size": 16,
    },
    "server": {"lr": 1.0, "beta1": 0.9, "beta2": 0.999, "eps": 1e-3, "paper_literal": False},
    "grid": {
        "client_opts": list(CLIENT_KINDS),
        "server_opts": list(SERVER_KINDS),
        "schemes": list(mo.SCHEME_PRESETS),
    },
}


class ConfigError(ValueError):
    pass


def _deep_update(base: dict, extra: dict) -> dict:
    for key, value in extra.items():
        if key not in base:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {key!r} must be a mapping")
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


def load_config(path: str | None, seed: int | None = None, out: str | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh) or {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        _deep_update(cfg, loaded)
    if seed is not None:
        cfg["seed"] = int(seed)
    if out is not None:
        cfg["out"] = out
    return cfg


def _dims(cfg: dict) -> mo.ModelDims:
    m = cfg["model"]
    return mo.ModelDims(
        hidden=int(m["hidden"]),
        lookback=int(m["lookback"]),
        lookahead=int(m["lookahead"]),
        n_features=da.N_FEATURES,
        mlp_hidden=tuple(int(v) for v in m["mlp_hidden"]),
    )


def _synthetic_spec(cfg: dict) -> da.SyntheticSpec:
    d = cfg["data"]
    return da.SyntheticSpec(
        n_clients=int(d["n_clients"]),
        length=int(d["weeks"]) * da.STEPS_PER_WEEK,
        scale_spread=float(d["scale_spread"]),
        offset_spread=float(d["offset_spread"]),
        phase_spread=float(d["phase_spread"]),
    )


def load_client_series(cfg: dict) -> list[da.ClientSeries]:
    source = cfg["data"]["source"]
    if source == "synthetic":
        return da.generate_synthetic(_synthetic_spec(cfg), make_rng(cfg["seed"], DATA_STREAM))
    if source == "csv":
        csv_dir = cfg["data"]["csv_dir"]
        if not csv_dir:
            raise ConfigError("data.source is csv but data.csv_dir is unset")
        paths = sorted(Path(csv_dir).glob("*.csv"))
        if not paths:
            raise ConfigError(f"no CSV files in {csv_dir}")
        return [da.load_csv(p) for p in paths]
    raise ConfigError(f"data.source must be synthetic|csv, got {source!r}")


def build_datasets(cfg: dict) -> list[da.ClientDataset]:
    dims = _dims(cfg)
    return [
        da.split_and_window(s, tuple(cfg["split"]), dims.lookback, dims.lookahead)
        for s in load_client_series(cfg)
    ]


def _federation_config(cfg: dict, n_clients: int) -> fe.FederationConfig:
    f = cfg["federation"]
    return fe.FederationConfig(
        n_clients=n_clients,
        rounds=int(f["rounds"]),
        scheme=mo.make_scheme(_dims(cfg), f["scheme"]),
        client_kind=f["client_opt"],
        server_kind=f["server_opt"],
        client_hyper=ClientHyper(**cfg["client"]),
        server_hyper=ServerHyper(**cfg["server"]),
        dims=_dims(cfg),
        seed=int(cfg["seed"]),
        wire_bytes=int(f["wire_bytes"]),
        weighting=f["weighting"],
    )


# -- subcommands --------------------------------------------------------------

def cmd_generate(cfg: dict) -> int:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    fleet = da.generate_synthetic(_synthetic_spec(cfg), make_rng(cfg["seed"], DATA_STREAM))
    print(f"{'client':<10} {'mean kW':>10} {'std kW':>10}")
    for series in fleet:
        da.write_csv(series, out / f"{series.name}.csv")
        print(f"{series.name:<10} {series.load.mean():>10.3f} {series.load.std():>10.3f}")
    means = np.array([s.load.mean() for s in fleet])
    print(f"coefficient of variation of client means: {means.std() / means.mean():.4f}")
    print(f"wrote {len(fleet)} files to {out}")
    return 0


def run_cell(cfg: dict) -> dict:
    """Run one federation cell; returns the summary row (also written to disk)."""
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    datasets = build_datasets(cfg)
    fed_cfg = _federation_config(cfg, len(datasets))
    init = mo.init_params(make_rng(cfg["seed"], INIT_STREAM), fed_cfg.dims)
    runner = fe.run_classical_fl if fed_cfg.scheme.name == "full-shared" else fe.run_pl_fl
    result = runner(fed_cfg, init, datasets)

    with open(out / "rounds.jsonl", "w") as fh:
        for rec in result.records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
    for c, params in enumerate(result.client_models):
        save_params(params, out / f"client{c:02d}.fcpv")
    if result.server_params is not None and len(result.server_params.names()):
        save_params(result.server_params, out / "server.fcpv")

    test_mase = [
        fe.evaluate_params(result.client_models[c], fed_cfg.dims, datasets[c].test)
        for c in range(len(datasets))
    ]
    per_round_client = result.ledger.round_client_elements(1, 0)
    summary = {
        "server_opt": fed_cfg.server_kind,
        "client_opt": fed_cfg.client_kind,
        "scheme": fed_cfg.scheme.name,
        "seed": cfg["seed"],
        "backend": BACKEND,
        "rounds": fed_cfg.rounds,
        "n_clients": len(datasets),
        "mean_test_mase": float(np.mean(test_mase)),
        "per_client_test_mase": test_mase,
        "mean_final_val_mase": float(np.mean(result.records[-1].val_mase)),
        "elements_per_round_per_client": per_round_client,
        "bytes_per_round_per_client": {k: v * fed_cfg.wire_bytes for k, v in per_round_client.items()},
        "total_bytes": result.ledger.total_bytes(),
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(out / "config.yaml", "w") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=True)
    return summary


def cmd_train(cfg: dict) -> int:
    summary = run_cell(cfg)
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0


def _grid_cells(cfg: dict) -> list[dict]:
    grid = cfg["grid"]
    cells = []
    for server in grid["server_opts"]:
        for client in grid["client_opts"]:
            for scheme in grid["schemes"]:
                cell = copy.deepcopy(cfg)
                cell["federation"]["server_opt"] = server
                cell["federation"]["client_opt"] = client
                cell["federation"]["scheme"] = scheme
                cell["out"] = str(Path(cfg["out"]) / f"{server}__{client}__{scheme}")
                cells.append(cell)
    return cells


def _run_cell_safe(cell: dict) -> dict:
    key = {
        "server_opt": cell["federation"]["server_opt"],
        "client_opt": cell["federation"]["client_opt"],
        "scheme": cell["federation"]["scheme"],
    }
    try:
        return run_cell(cell)
    except Exception as exc:  # cell failures are recorded, never fatal
        return {**key, "error": f"{type(exc).__name__}: {exc}"}


def cmd_grid(cfg: dict, parallel: int = 1) -> int:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    cells = _grid_cells(cfg)
    if parallel > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=parallel) as pool:
            rows = list(pool.map(_run_cell_safe, cells))
    else:
        rows = [_run_cell_safe(cell) for cell in cells]

    fields = ["server_opt", "client_opt", "scheme", "mean_test_mase",
              "mean_final_val_mase", "total_bytes", "error"]
    rows = sorted(rows, key=lambda r: (r["server_opt"], r["client_opt"], r["scheme"]))
    with open(out / "grid_results.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fields})

    print(f"{'server':<16} {'client':<10} {'scheme':<12} {'test MASE':>10} {'bytes':>14}")
    for row in rows:
        mase = f"{row['mean_test_mase']:.4f}" if "mean_test_mase" in row else "FAILED"
        bytes_ = str(row.get("total_bytes", "-"))
        print(f"{row['server_opt']:<16} {row['client_opt']:<10} {row['scheme']:<12} {mase:>10} {bytes_:>14}")
    failures = [r for r in rows if "error" in r]
    for row in failures:
        print(f"FAILED {row['server_opt']}/{row['client_opt']}/{row['scheme']}: {row['error']}")
    print(f"wrote {out / 'grid_results.csv'} ({len(rows)} rows, {len(failures)} failed)")
    return 0


def cmd_report(results_dir: str, out: str) -> int:
    root = Path(results_dir)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summaries = sorted(root.rglob("summary.json"))
    if not summaries:
        print(f"warning: no summary.json files under {root}", file=sys.stderr)
    rows, curves = [], []
    for path in summaries:
        try:
            with open(path) as fh:
                summary = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: malformed summary ({exc})") from exc
        rows.append(summary)
        rounds_path = path.parent / "rounds.jsonl"
        if rounds_path.exists():
            with open(rounds_path) as fh:
                for lineno, line in enumerate(fh, start=1):
                    try:
                        rec = json.loads(line)
                    except json.JSONDecodeError as exc:
                        raise ValueError(f"{rounds_path}:{lineno}: malformed record ({exc})") from exc
                    curves.append({
                        "server_opt": summary["server_opt"],
                        "client_opt": summary["client_opt"],
                        "scheme": summary["scheme"],
                        "round": rec["round"],
                        "mean_train_loss": float(np.mean(rec["train_loss"])),
                        "mean_val_mase": float(np.mean(rec["val_mase"])),
                    })

    def _write(name: str, fields: list[str], table: list[dict]) -> None:
        with open(out_dir / name, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
            writer.writeheader()
            for row in table:
                writer.writerow({k: row.get(k, "") for k in fields})

    rows = sorted(rows, key=lambda r: (r["server_opt"], r["client_opt"], r["scheme"]))
    _write("mase_table.csv",
           ["server_opt", "client_opt", "scheme", "mean_test_mase", "mean_final_val_mase"], rows)
    _write("comm_table.csv",
           ["server_opt", "client_opt", "scheme", "total_bytes"], rows)
    curves = sorted(curves, key=lambda r: (r["server_opt"], r["client_opt"], r["scheme"], r["round"]))
    _write("loss_curves.csv",
           ["server_opt", "client_opt", "scheme", "round", "mean_train_loss", "mean_val_mase"], curves)
    print(f"wrote {len(rows)} result rows to {out_dir}")
    return 0


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedcast", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("generate", "train", "grid"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="YAML config path")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="override output directory")
        if name == "grid":
            p.add_argument("--parallel", type=int, default=1, help="concurrent grid cells")
    p = sub.add_parser("report")
    p.add_argument("results_dir", help="directory tree containing run outputs")
    p.add_argument("--out", default="report", help="directory for the collated tables")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            return cmd_report(args.results_dir, args.out)
        cfg = load_config(args.config, args.seed, args.out)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        return cmd_grid(cfg, args.parallel)
    except Exception as exc:
        traceback.print_exc()
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
