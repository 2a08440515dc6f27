"""CLI interface for SMC² experiments."""

from __future__ import annotations

import logging
from contextlib import contextmanager
from pathlib import Path
from typing import List, Optional

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

from src.config import LOG_LEVEL
from src.errors import Smc2Error, exit_code

app = typer.Typer(help="SMC² sequential inference CLI")
console = Console()

CONFIG_HELP = "Experiment config (YAML)"


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else LOG_LEVEL,
        format="%(message)s",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


@contextmanager
def _handled():
    """Turn package errors into a red message and a categorised exit code."""
    try:
        yield
    except Smc2Error as exc:
        code, label = exit_code(exc)
        console.print(f"[bold red]{label}:[/bold red] {exc}")
        raise typer.Exit(code)


def _load(config: Path, simulate: bool = False, **overrides):
    from src.models.schema import ExperimentConfig

    return ExperimentConfig.load(config, simulate=simulate, **overrides)


@app.command()
def simulate(
    config: Path = typer.Option(..., "--config", help=CONFIG_HELP),
    seed: Optional[int] = typer.Option(None, help="Override the config seed"),
    output: Optional[Path] = typer.Option(None, help="Output CSV (default: simulate.output or data.path)"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
):
    """Simulate a synthetic data set from the configured model and true θ."""
    from src.pipeline import simulate as run_simulation

    _setup_logging(verbose)
    with _handled():
        cfg = _load(config, simulate=True, seed=seed)
        if output is not None:
            cfg = cfg.model_copy(update={"simulate": cfg.simulate.model_copy(update={"output": str(output)})})
        path = run_simulation(cfg)
    console.print(f"[bold green]Simulated {cfg.simulate.T} observations[/bold green] -> {path}")


@app.command()
def run(
    config: Path = typer.Option(..., "--config", help=CONFIG_HELP),
    seed: Optional[int] = typer.Option(None, help="Override the config seed"),
    threads: Optional[int] = typer.Option(None, help="Worker threads for per-particle work"),
    output_dir: Optional[Path] = typer.Option(None, "--output-dir", help="Run directory (default: config output_dir)"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
):
    """Run the configured sampler and write diagnostics, checkpoints and a summary."""
    from src.pipeline import run as run_experiment

    _setup_logging(verbose)
    with _handled():
        cfg = _load(config, seed=seed, threads=threads, output_dir=str(output_dir) if output_dir else None)
        with Progress(
            TextColumn("[cyan]{task.description}"),
            BarColumn(),
            MofNCompleteColumn(),
            TimeElapsedColumn(),
            console=console,
            transient=True,
        ) as progress:
            task = progress.add_task(f"{cfg.algorithm} / {cfg.model.name}", total=None)

            def hook(done: int, total: int) -> None:
                progress.update(task, completed=done, total=total)

            summary = run_experiment(cfg, progress=hook)

    console.print(f"\n[bold green]Run complete![/bold green] ({summary.runtime_s:.1f}s) -> {cfg.output_dir}")
    if summary.log_evidence is not None:
        console.print(f"  log evidence: {summary.log_evidence:.4f}")
    if summary.final_n_x is not None:
        console.print(f"  final N_x: {summary.final_n_x}")
    if summary.acceptance_rate is not None:
        console.print(f"  acceptance: {summary.acceptance_rate:.3f}")
    if summary.posterior:
        _posterior_table(summary.posterior, "Posterior")


def _posterior_table(posterior, title: str) -> None:
    table = Table(title=title)
    table.add_column("Parameter", style="cyan")
    for col in ("mean", "sd", "5%", "95%"):
        table.add_column(col, justify="right", style="green")
    for name, s in posterior.items():
        table.add_row(name, f"{s.mean:.4g}", f"{s.var ** 0.5:.4g}", f"{s.q05:.4g}", f"{s.q95:.4g}")
    console.print(table)


@app.command()
def summary(run_dir: Path = typer.Argument(..., help="Run directory")):
    """Show the summary of a finished run."""
    from src.pipeline import load_summary

    with _handled():
        s = load_summary(run_dir)

    table = Table(title=f"Run {run_dir}")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", justify="right", style="green")
    rows = [
        ("Algorithm", s.algorithm),
        ("Model", s.model),
        ("Seed", str(s.seed)),
        ("T", str(s.T)),
        ("Log evidence", "N/A" if s.log_evidence is None else f"{s.log_evidence:.4f}"),
        ("Final N_x", "N/A" if s.final_n_x is None else str(s.final_n_x)),
        ("Rejuvenations", "N/A" if s.n_rejuvenations is None else str(s.n_rejuvenations)),
        ("Acceptance", "N/A" if s.acceptance_rate is None else f"{s.acceptance_rate:.3f}"),
        ("Runtime (s)", f"{s.runtime_s:.1f}"),
    ]
    for label, value in rows:
        table.add_row(label, value)
    console.print(table)
    if s.posterior:
        _posterior_table(s.posterior, "Posterior")


@app.command()
def compare(run_dirs: List[Path] = typer.Argument(..., help="Run directories; the first is the reference")):
    """Compare final log evidences across runs (log Bayes factors against the first)."""
    from src.pipeline import load_summary

    with _handled():
        summaries = [load_summary(d) for d in run_dirs]
    if any(s.log_evidence is None for s in summaries):
        console.print("[bold red]Every run must report a log evidence (smc2, ibis, pf or kalman).[/bold red]")
        raise typer.Exit(1)

    reference = summaries[0].log_evidence
    table = Table(title="Model evidence")
    table.add_column("Run", style="cyan")
    table.add_column("Model")
    table.add_column("log evidence", justify="right", style="green")
    table.add_column("Δ vs first", justify="right", style="green")
    for d, s in zip(run_dirs, summaries):
        table.add_row(str(d), s.model, f"{s.log_evidence:.4f}", f"{s.log_evidence - reference:+.4f}")
    console.print(table)


if __name__ == "__main__":
    app()
