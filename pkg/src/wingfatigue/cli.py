"""Command-line entry point: generate, train, evaluate, audit.

Exit codes: 0 success, 2 usage or config error, 3 data error,
4 numeric failure.
"""
from __future__ import annotations

import functools
import sys
from pathlib import Path

import click
import numpy as np

from . import dataset as ds
from .config import ConfigError, load_config
from .evaluation import SplitMismatch, audit, evaluate
from .oracle import generate_fleet, label_world
from .pipeline import fit_pipeline
from .stats import split_assign

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
CURVES_CSV = "curves.csv"
REPORT_JSON = "report.json"
AUDIT_JSON = "audit.json"


def _fail(code: int, msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def guarded(fn):
    """Map library exceptions onto the documented exit codes."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            with np.errstate(over="raise", invalid="raise", divide="raise"):
                return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(EXIT_USAGE, str(exc))
        except (ds.DataError, SplitMismatch, KeyError) as exc:
            _fail(EXIT_DATA, str(exc))
        except OSError as exc:
            _fail(EXIT_DATA, f"{exc.filename or ''}: {exc.strerror or exc}")
        except (ArithmeticError, ValueError) as exc:
            _fail(EXIT_NUMERIC, f"numeric failure: {exc}")
    return wrapper


config_opt = click.option("--config", "config_path", type=click.Path(dir_okay=False),
                          help="JSON config file.")
seed_opt = click.option("--seed", type=int, help="Global seed; overrides config and FATIGUE_SEED.")
dataset_opt = click.option("--dataset", type=click.Path(file_okay=False), required=True,
                           help="Dataset directory written by 'generate'.")
model_opt = click.option("--model", type=click.Path(dir_okay=False), required=True,
                         help="Model JSON written by 'train'.")


@click.group()
def main():
    """Fatigue-life pipeline: synthetic data, training, evaluation and split audit."""


@main.command()
@config_opt
@seed_opt
@click.option("--out", type=click.Path(file_okay=False), default="data", show_default=True)
@guarded
def generate(config_path, seed, out):
    """Generate the synthetic fleet and write the labelled dataset."""
    cfg = load_config(config_path, seed)
    world = generate_fleet(cfg.world_config)
    records = label_world(world)
    ds.write_dataset(out, world, records)
    click.echo(f"wrote {len(records)} labels to {out}")


@main.command()
@config_opt
@seed_opt
@dataset_opt
@click.option("--model", type=click.Path(dir_okay=False), default="model.json", show_default=True,
              help="Output model JSON; curves.csv is written alongside.")
@guarded
def train(config_path, seed, dataset, model):
    """Fit all three phases on the training split."""
    cfg = load_config(config_path, seed)
    data = ds.read_dataset(dataset)
    split = split_assign(data.world.pses, data.world.mission_ids, cfg.seed)
    fit = fit_pipeline(data.world, data.records, split, cfg.pipeline)
    path = Path(model)
    path.parent.mkdir(parents=True, exist_ok=True)
    ds.write_model(path, fit.model)
    ds.write_curves(path.parent / CURVES_CSV, fit.curves)
    click.echo(f"wrote {path} and {path.parent / CURVES_CSV}")


@main.command("evaluate")
@config_opt
@seed_opt
@dataset_opt
@model_opt
@click.option("--out", type=click.Path(file_okay=False), default="report", show_default=True)
@guarded
def evaluate_cmd(config_path, seed, dataset, model, out):
    """Predict the test split and write report.json plus plot-ready CSVs."""
    cfg = load_config(config_path, seed)
    data = ds.read_dataset(dataset)
    report, tables = evaluate(ds.read_model(model), data, cfg)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ds.write_json(out_dir / REPORT_JSON, report)
    for name, (header, rows) in tables.items():
        ds.write_csv(out_dir / name, header, rows)
    roi = report["summaries"]["roi"]["life"]
    median = "n/a" if roi is None else f"{roi['median']:.3f}%"
    click.echo(f"test samples {report['n_test']}, life median error in usage region {median}")


@main.command("audit")
@config_opt
@seed_opt
@dataset_opt
@model_opt
@click.option("--out", type=click.Path(file_okay=False), default="report", show_default=True)
@guarded
def audit_cmd(config_path, seed, dataset, model, out):
    """Train-vs-test distribution tests, proximity flags and interval coverage."""
    cfg = load_config(config_path, seed)
    data = ds.read_dataset(dataset)
    rep = audit(ds.read_model(model), data, cfg)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ds.write_json(out_dir / AUDIT_JSON, rep)
    click.echo(f"wrote {out_dir / AUDIT_JSON}")


if __name__ == "__main__":
    main()
