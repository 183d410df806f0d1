"""Command-line interface for entityflow."""

import sys
from pathlib import Path
from typing import Any, Dict, Optional

import click
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from entityflow import __version__
from entityflow.checkpoint import load_checkpoint, read_checkpoint_header, save_checkpoint
from entityflow.config import PRESETS, EntityFlowConfig, LoggingConfig, SynthConfig, read_flat_file
from entityflow.core.data_model import AnomalyReport
from entityflow.core.exceptions import (
    ConfigurationError,
    DivergenceError,
    EntityFlowError,
    ParseError,
    UsageError,
)
from entityflow.dataio import list_injectors, load_series, synth_generate, write_series
from entityflow.pipeline import SPLIT_NAMES, export_adjacency, save_training_outputs, score_table, train_model
from entityflow.sweep import STUDIES, SweepRunner, parse_grid, summarize_sweep
from entityflow.utils.file_validator import FileValidator
from entityflow.utils.logger import get_logger, setup_logger

console = Console()
error_console = Console(stderr=True)
logger = get_logger(__name__)

EXIT_USAGE = 1


class EntityFlowGroup(click.Group):
    """Click group that maps failures to exit codes: 1 usage/config, 2 data, 3 numeric."""

    def main(self, *args: Any, standalone_mode: bool = True, **kwargs: Any) -> Any:
        try:
            rv = super().main(*args, standalone_mode=False, **kwargs)
            code = rv if isinstance(rv, int) else 0
        except click.ClickException as e:
            e.show()
            code = EXIT_USAGE
        except click.exceptions.Abort:
            error_console.print("[bold red]Aborted![/bold red]")
            code = EXIT_USAGE
        except EntityFlowError as e:
            error_console.print(f"[bold red]✗ Error: {e}[/bold red]")
            logger.debug("Command failed", exc_info=True)
            code = e.exit_code
        except Exception as e:
            error_console.print(f"[bold red]✗ Unexpected Error: {e}[/bold red]")
            logger.exception("Unexpected error")
            code = EXIT_USAGE
        if not standalone_mode:
            return code
        sys.exit(code)


def _seed(ctx: click.Context, seed: Optional[int]) -> Optional[int]:
    """Command-level seed, falling back to the global --seed."""
    return seed if seed is not None else ctx.obj.get("seed")


def _build_config(
    preset: Optional[str], config_file: Optional[str], overrides: Dict[str, Any]
) -> EntityFlowConfig:
    """Defaults, then preset, then config file, then flags."""
    config = EntityFlowConfig()
    if preset:
        config = config.with_preset(preset)
    if config_file:
        config = config.with_overrides(read_flat_file(Path(config_file)))
    return config.with_overrides({k: v for k, v in overrides.items() if v is not None})


@click.group(cls=EntityFlowGroup)
@click.version_option(version=__version__)
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging")
@click.option("--quiet", "-q", is_flag=True, help="Suppress all output except errors")
@click.option("--log-file", type=click.Path(), help="Write logs to file")
@click.option("--seed", type=int, default=None, help="Seed used by commands that do not set their own")
@click.pass_context
def main(ctx, verbose, quiet, log_file, seed):
    """entityflow - unsupervised anomaly detection for multivariate time series.

    \b
    Examples:
      entityflow synth --k 3 --len 2000 --rate 0.05 --out plant.csv
      entityflow train plant.csv --out model.ckpt --preset small
      entityflow eval model.ckpt plant.csv --split test
      entityflow inspect-graph model.ckpt plant.csv --window 0 --window 5
      entityflow sweep plant.csv --study train_ratio --runs 5
    """
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose
    ctx.obj["quiet"] = quiet
    ctx.obj["seed"] = seed

    setup_logger(LoggingConfig.from_flags(verbose=verbose, quiet=quiet, log_file=log_file))


@main.command()
@click.option(
    "--k", "n_entities", type=click.IntRange(min=1), default=3, show_default=True, help="Number of entities"
)
@click.option(
    "--len", "length", type=click.IntRange(min=2), default=2000, show_default=True, help="Series length"
)
@click.option(
    "--rate",
    type=click.FloatRange(0.0, 0.3),
    default=0.05,
    show_default=True,
    help="Fraction of anomalous steps",
)
@click.option("--seed", type=int, default=None, help="Generator seed (default 7)")
@click.option(
    "--kinds",
    default="spike,level_shift,decorrelate",
    show_default=True,
    help=f"Comma-separated anomaly kinds ({', '.join(list_injectors())})",
)
@click.option("--noise", type=click.FloatRange(min=0.0, min_open=True), default=0.1, show_default=True)
@click.option("--out", "-o", type=click.Path(dir_okay=False), default="synthetic.csv", show_default=True)
@click.pass_context
def synth(ctx, n_entities, length, rate, seed, kinds, noise, out):
    """Generate a labeled synthetic dataset."""
    seed = _seed(ctx, seed)
    try:
        config = SynthConfig(
            n_entities=n_entities,
            length=length,
            anomaly_rate=rate,
            kinds=[k.strip() for k in kinds.split(",") if k.strip()],
            noise=noise,
            **({"seed": seed} if seed is not None else {}),
        )
    except ValidationError as e:
        raise ConfigurationError(f"invalid synthetic settings: {e}")

    with console.status(f"[bold green]Generating {n_entities} x {length} series..."):
        table = synth_generate(config)
        write_series(table, out)

    if not ctx.obj.get("quiet"):
        console.print(f"✓ [bold green]Wrote {out}[/bold green]")
        console.print(f"  Entities: [cyan]{', '.join(table.entities)}[/cyan]")
        console.print(f"  Anomalous steps: [yellow]{int(table.labels.sum())}[/yellow] of {table.length}")


@main.command()
@click.argument("input_file", metavar="INPUT", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "-o", type=click.Path(dir_okay=False), default="model.ckpt", show_default=True)
@click.option(
    "--config", "config_file", type=click.Path(exists=True, dir_okay=False), help="key=value config file"
)
@click.option("--preset", type=click.Choice(sorted(PRESETS), case_sensitive=False), help="Dataset preset")
@click.option("--window", type=int, help="Window length T")
@click.option("--stride", type=int, help="Window stride S")
@click.option("--batch-size", type=int)
@click.option("--learning-rate", type=float)
@click.option("--epochs", type=int)
@click.option("--n-blocks", type=int, help="Flow blocks")
@click.option("--hidden-size", type=int, help="LSTM hidden size")
@click.option("--condition-size", type=int, help="Condition size per timestep")
@click.option("--made-hidden", type=int, help="MADE hidden width")
@click.option("--dropout", type=float, help="Attention dropout")
@click.option("--train-ratio", type=float)
@click.option("--val-ratio", type=float)
@click.option("--normalize-on", type=click.Choice(["train", "full"]))
@click.option("--no-graph", is_flag=True, help="Ablation: identity adjacency")
@click.option("--single-target", is_flag=True, help="Ablation: every entity targets N(0, I)")
@click.option("--seed", type=int, default=None)
@click.pass_context
def train(ctx, input_file, out, config_file, preset, no_graph, single_target, seed, **sizes):
    """Train a model on the training split of INPUT."""
    overrides = dict(sizes)
    overrides["seed"] = _seed(ctx, seed)
    if no_graph:
        overrides["no_graph"] = True
    if single_target:
        overrides["single_target"] = True
    config = _build_config(preset, config_file, overrides)

    table = load_series(input_file)
    try:
        result, prepared = train_model(table, config, progress=not ctx.obj.get("quiet"))
    except DivergenceError as e:
        if e.last_good is not None:
            rescue = Path(out).with_name(f"{Path(out).stem}.last_good{Path(out).suffix}")
            save_checkpoint(str(rescue), e.last_good, config, train_scores=e.train_scores)
            error_console.print(f"[yellow]Last finite state (epoch {e.epoch}) saved to {rescue}[/yellow]")
        raise

    paths = save_training_outputs(result, config, prepared.windows["train"], Path(out))

    if not ctx.obj.get("quiet"):
        table_view = Table(title="Training", show_header=True, header_style="bold magenta")
        table_view.add_column("Item", style="cyan")
        table_view.add_column("Value", style="green")
        table_view.add_row("Model", repr(result.model))
        table_view.add_row("Epochs", str(config.train.epochs))
        table_view.add_row("Selected epoch", str(result.best_epoch))
        if result.log.records:
            last = result.log.records[-1]
            table_view.add_row("Final train loss", f"{last.train_loss:.6f}")
            if last.val_loss is not None:
                table_view.add_row("Final val loss", f"{last.val_loss:.6f}")
        for name, path in paths.items():
            table_view.add_row(f"{name.capitalize()} output", str(path))
        console.print(table_view)


def _detector_config(checkpoint, global_lambda, entity_lambda, entity_lambdas):
    overrides = {
        "global_lambda": global_lambda,
        "entity_lambda": entity_lambda,
        "entity_lambdas": entity_lambdas,
    }
    return checkpoint.config.with_overrides({k: v for k, v in overrides.items() if v is not None}).detector


def _scoring_options(default_split: str):
    def decorate(f):
        options = [
            click.argument(
                "checkpoint_file", metavar="CHECKPOINT", type=click.Path(exists=True, dir_okay=False)
            ),
            click.argument("input_file", metavar="INPUT", type=click.Path(exists=True, dir_okay=False)),
            click.option(
                "--split", type=click.Choice(SPLIT_NAMES), default=default_split, show_default=True
            ),
            click.option("--global-lambda", type=float, help="Global threshold multiplier"),
            click.option("--entity-lambda", type=float, help="Entity threshold multiplier"),
            click.option("--entity-lambdas", help="Comma-separated per-entity multipliers"),
            click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True),
        ]
        for option in reversed(options):
            f = option(f)
        return f

    return decorate


def _run_scoring(checkpoint_file, input_file, split, global_lambda, entity_lambda, entity_lambdas, workers):
    checkpoint = load_checkpoint(checkpoint_file)
    detector_config = _detector_config(checkpoint, global_lambda, entity_lambda, entity_lambdas)
    table = load_series(input_file)
    return score_table(checkpoint, table, split=split, detector_config=detector_config, max_workers=workers)


@main.command()
@_scoring_options(default_split="all")
@click.option("--out", "-o", type=click.Path(dir_okay=False), default="report.csv", show_default=True)
@click.pass_context
def score(
    ctx, checkpoint_file, input_file, split, global_lambda, entity_lambda, entity_lambdas, workers, out
):
    """Score INPUT with CHECKPOINT and write the per-window report."""
    report = _run_scoring(
        checkpoint_file, input_file, split, global_lambda, entity_lambda, entity_lambdas, workers
    )
    report.to_csv(out)
    logger.info(f"Report written: {out}")
    if not ctx.obj.get("quiet"):
        console.print(f"✓ [bold green]Report written to {out}[/bold green]")
        console.print(
            f"  Windows: [cyan]{report.scores.n_windows}[/cyan]  "
            f"flagged: [yellow]{int(report.window_flags.sum())}[/yellow]"
        )


@main.command(name="eval")
@_scoring_options(default_split="test")
@click.option("--out", "-o", type=click.Path(dir_okay=False), help="Also write the report CSV")
@click.pass_context
def evaluate(
    ctx, checkpoint_file, input_file, split, global_lambda, entity_lambda, entity_lambdas, workers, out
):
    """Score one split of INPUT and print AUROC when it is labeled."""
    report = _run_scoring(
        checkpoint_file, input_file, split, global_lambda, entity_lambda, entity_lambdas, workers
    )
    if out:
        report.to_csv(out)
        logger.info(f"Report written: {out}")
    _print_summary(report, split)


def _print_summary(report: AnomalyReport, split: str) -> None:
    table = Table(title=f"Evaluation ({split} split)", show_header=True, header_style="bold cyan")
    table.add_column("Field", style="yellow")
    table.add_column("Value", style="green")
    for line in report.summary().splitlines():
        field, _, value = line.partition(": ")
        table.add_row(field, value)
    console.print(table)


@main.command()
@click.argument("input_file", metavar="INPUT", type=click.Path(exists=True, dir_okay=False))
@click.option("--study", type=click.Choice(sorted(STUDIES)), help="Predefined grid")
@click.option("--grid", "grid_items", multiple=True, help="key=v1,v2 (repeatable, overrides --study keys)")
@click.option("--runs", type=click.IntRange(min=1), default=5, show_default=True, help="Seeds per setting")
@click.option("--split", type=click.Choice(["val", "test"]), default="test", show_default=True)
@click.option(
    "--config", "config_file", type=click.Path(exists=True, dir_okay=False), help="key=value config file"
)
@click.option("--preset", type=click.Choice(sorted(PRESETS), case_sensitive=False), help="Dataset preset")
@click.option("--epochs", type=int)
@click.option("--seed", type=int, default=None, help="Seed of run 0; run r uses seed + r")
@click.option("--fail-fast", is_flag=True, help="Stop at the first failed run")
@click.option("--out", "-o", type=click.Path(dir_okay=False), default="sweep.csv", show_default=True)
@click.pass_context
def sweep(ctx, input_file, study, grid_items, runs, split, config_file, preset, epochs, seed, fail_fast, out):
    """Train over a grid of settings and report AUROC per setting."""
    if not study and not grid_items:
        raise UsageError("give --study or at least one --grid key=v1,v2")
    grid = dict(STUDIES[study]) if study else {}
    grid.update(parse_grid(grid_items))
    config = _build_config(preset, config_file, {"epochs": epochs, "seed": _seed(ctx, seed)})

    table = load_series(input_file)
    runner = SweepRunner(config, runs=runs, split=split, fail_fast=fail_fast)
    frame = runner.run(table, grid, progress=not ctx.obj.get("quiet"))
    summary = summarize_sweep(frame)

    out = Path(out)
    summary_path = out.with_name(f"{out.stem}.summary{out.suffix}")
    frame.to_csv(out, index=False)
    summary.to_csv(summary_path, index=False)
    logger.info(f"Sweep written: {out}, {summary_path}")

    if not ctx.obj.get("quiet"):
        table_view = Table(title=f"Sweep ({split} split)", show_header=True, header_style="bold magenta")
        for column in summary.columns:
            table_view.add_column(str(column), style="green" if column.startswith("auroc") else "cyan")
        for row in summary.itertuples(index=False):
            table_view.add_row(*(f"{v:.4f}" if isinstance(v, float) else str(v) for v in row))
        console.print(table_view)
        console.print(f"✓ [bold green]Runs written to {out}, summary to {summary_path}[/bold green]")


@main.command(name="inspect-graph")
@click.argument("checkpoint_file", metavar="CHECKPOINT", type=click.Path(exists=True, dir_okay=False))
@click.argument("input_file", metavar="INPUT", type=click.Path(exists=True, dir_okay=False))
@click.option("--window", "-w", "windows", type=int, multiple=True, default=(0,), show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), default="graphs", show_default=True)
@click.option("--split", type=click.Choice(SPLIT_NAMES), default="all", show_default=True)
@click.option("--edge-threshold", type=float, help="Also write edges with weight >= this value")
@click.pass_context
def inspect_graph(ctx, checkpoint_file, input_file, windows, out_dir, split, edge_threshold):
    """Export eval-mode adjacency matrices for the listed windows."""
    checkpoint = load_checkpoint(checkpoint_file)
    table = load_series(input_file)
    written = export_adjacency(
        checkpoint, table, list(windows), Path(out_dir), split=split, edge_threshold=edge_threshold
    )
    if not ctx.obj.get("quiet"):
        for path in written:
            console.print(f"  ✓ [green]{path}[/green]")


@main.command()
@click.argument("checkpoint_file", metavar="CHECKPOINT", type=click.Path(exists=True, dir_okay=False))
def info(checkpoint_file):
    """Show the header of a checkpoint file."""
    details = FileValidator(Path(checkpoint_file)).get_file_info()
    if details.get("format") != "checkpoint":
        raise ParseError(f"{checkpoint_file} is not an entityflow checkpoint")
    header = read_checkpoint_header(checkpoint_file)

    console.print(f"[bold]Checkpoint:[/bold] {details['name']} ({details['size_bytes'] / 1024:.2f} KB)\n")
    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Key", style="cyan")
    table.add_column("Value", style="green")
    for key, value in header.items():
        table.add_row(key, value)
    console.print(table)


if __name__ == "__main__":
    main(obj={})
