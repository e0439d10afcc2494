"""camix command line: generate, decompose, select-k, evaluate, benchmark."""

import functools
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Optional

import click
import numpy as np
from pydantic import ValidationError

from camix import __version__
from camix.benchmark import run_benchmark
from camix.config import RunConfig, Settings
from camix.datagen import (
    calibrate_noise_for_snr,
    gen_random_mixing,
    gen_toy,
    mix,
    snr_db,
)
from camix.errors import CamError, InputError
from camix.metrics import evaluate as evaluate_estimate
from camix.model_select import stability_select
from camix.models import NoiseSpec, ToySpec
from camix.pipeline import decompose as run_decompose
from camix.preprocess import preprocess
from camix.storage import RunStorage, load_manifest, read_matrix

logger = logging.getLogger("camix.cli")

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def handle_errors(func: Callable[..., Any]) -> Callable[..., Any]:
    """Report library errors on stderr and exit with their code."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except CamError as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(e.exit_code)
        except ValidationError as e:
            click.echo(f"Invalid parameters: {e}", err=True)
            sys.exit(1)
        except OSError as e:
            click.echo(f"I/O error: {e}", err=True)
            sys.exit(3)

    return wrapper


def _settings(ctx: click.Context) -> Settings:
    return ctx.obj["settings"]


def _n_jobs(ctx: click.Context) -> int:
    return ctx.obj["n_jobs"]


def _run_config(ctx: click.Context, config_path: Optional[Path], **overrides: Any) -> RunConfig:
    return RunConfig.resolve(config_path, _settings(ctx), **overrides)


def config_options(func: Callable[..., Any]) -> Callable[..., Any]:
    """CAM parameters shared by decompose, select-k and benchmark."""
    options = [
        click.option(
            "--config",
            "config_path",
            type=click.Path(path_type=Path),
            help="YAML or JSON run config",
        ),
        click.option("--sectors", "-J", type=int, help="Number of sectors J"),
        click.option("--restarts", type=int, help="Clustering restarts"),
        click.option("--tau", type=float, help="Edge test threshold (radians)"),
        click.option("--remove-fraction", type=float, help="Fraction of small-norm points removed"),
        click.option("--k-max", type=int, help="Largest K for stability analysis"),
        click.option("--trials", type=int, help="Cross-validation trials"),
        click.option("--seed", type=int, help="Master seed"),
        click.option("--bb-threshold", type=int, help="Subset count switching to branch and bound"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group()
@click.version_option(__version__, prog_name="camix")
@click.option("--debug", is_flag=True, default=None, help="Debug logging")
@click.option("--n-jobs", type=int, default=None, help="Worker processes")
@click.pass_context
def cli(ctx: click.Context, debug: Optional[bool], n_jobs: Optional[int]) -> None:
    """Convex analysis of mixtures: blind separation of non-negative sources."""
    settings = Settings()
    debug = settings.debug if debug is None else debug
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.INFO,
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler(sys.stderr)],
    )
    ctx.ensure_object(dict)
    ctx.obj["settings"] = settings
    ctx.obj["n_jobs"] = n_jobs if n_jobs is not None else settings.n_jobs


# ---------------------------------------------------------------- generate


def _generate_toy(params: dict[str, Any], storage: RunStorage) -> None:
    spec = ToySpec(n_points=params["n"])
    if params.get("noise_var") is not None:
        spec.noise = NoiseSpec.isotropic(3, params["noise_var"])
    data = gen_toy(spec, seed=params["seed"])
    storage.save_matrix("X.txt", data.X)
    storage.save_matrix("A_true.txt", data.A_true)
    storage.save_matrix("S_true.txt", data.S_true)


def _generate_mix(params: dict[str, Any], storage: RunStorage) -> None:
    S = read_matrix(Path(params["sources"]))
    A = read_matrix(Path(params["mixing"]))
    if np.any(S < 0):
        raise InputError("sources must be non-negative")
    if S.shape[0] != A.shape[1]:
        raise InputError(f"mixing matrix {A.shape} does not match sources {S.shape}")
    noise = None
    if params.get("snr_db") is not None:
        noise = calibrate_noise_for_snr(A @ S, params["snr_db"], seed=params["seed"])
    elif params.get("noise_var"):
        noise = NoiseSpec.isotropic(A.shape[0], params["noise_var"], seed=params["seed"])
    X = mix(S, A, noise)
    if noise is not None:
        logger.info(f"Mixture SNR: {snr_db(A @ S, noise):.2f} dB")
    storage.save_matrix("X.txt", X)
    storage.save_matrix("A_true.txt", A)
    storage.save_matrix("S_true.txt", S)


def _generate_random_mixing(params: dict[str, Any], storage: RunStorage) -> None:
    A = gen_random_mixing(
        params["m"],
        params["k"],
        params["scenario"],
        seed=params["seed"],
        mixed_sign=bool(params.get("mixed_sign")),
    )
    storage.save_matrix("A_true.txt", A)


GENERATORS = {
    "toy": _generate_toy,
    "mix": _generate_mix,
    "random-mixing": _generate_random_mixing,
}


def _run_generator(name: str, params: dict[str, Any], out: Path) -> None:
    storage = RunStorage(out)
    GENERATORS[name](params, storage)
    manifest = storage.save_manifest("generate", name, seed=params["seed"], parameters=params)
    click.echo(f"Wrote {', '.join(manifest.files)} to {out}")


@cli.group()
def generate() -> None:
    """Generate synthetic datasets and mixing matrices."""


@generate.command("toy")
@click.option("--n", "n", type=int, default=1600, show_default=True, help="Data points (even)")
@click.option("--noise-var", type=float, help="Isotropic noise variance (default 0.07)")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@handle_errors
def generate_toy(n: int, noise_var: Optional[float], seed: int, out: Path) -> None:
    """Three-source toy mixture with exponential and half-Gaussian sources."""
    _run_generator("toy", {"n": n, "noise_var": noise_var, "seed": seed}, out)


@generate.command("mix")
@click.option("--sources", type=click.Path(path_type=Path), required=True)
@click.option("--mixing", type=click.Path(path_type=Path), required=True)
@click.option("--snr-db", type=float, help="Calibrate isotropic noise to this SNR")
@click.option("--noise-var", type=float, help="Isotropic noise variance")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@handle_errors
def generate_mix(
    sources: Path,
    mixing: Path,
    snr_db: Optional[float],
    noise_var: Optional[float],
    seed: int,
    out: Path,
) -> None:
    """Mix a source matrix with a mixing matrix plus Gaussian noise."""
    if snr_db is not None and noise_var is not None:
        raise InputError("give either --snr-db or --noise-var, not both")
    params = {
        "sources": str(sources.resolve()),
        "mixing": str(mixing.resolve()),
        "snr_db": snr_db,
        "noise_var": noise_var,
        "seed": seed,
    }
    _run_generator("mix", params, out)


@generate.command("random-mixing")
@click.option("--m", "m", type=int, required=True, help="Mixtures")
@click.option("--k", "k", type=int, required=True, help="Sources")
@click.option("--scenario", type=click.Choice(["exact", "over", "under"]), required=True)
@click.option(
    "--mixed-sign/--non-negative",
    default=False,
    show_default=True,
    help="Allow negative entries in the mixing matrix",
)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@handle_errors
def generate_random_mixing(
    m: int, k: int, scenario: str, mixed_sign: bool, seed: int, out: Path
) -> None:
    """Random mixing matrix meeting the scenario's conditioning constraint."""
    params = {"m": m, "k": k, "scenario": scenario, "mixed_sign": mixed_sign, "seed": seed}
    _run_generator("random-mixing", params, out)


@generate.command("replay")
@click.argument("manifest", type=click.Path(path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), required=True)
@handle_errors
def generate_replay(manifest: Path, out: Path) -> None:
    """Regenerate the files described by a generate manifest."""
    recorded = load_manifest(manifest)
    if recorded.command != "generate" or recorded.subcommand not in GENERATORS:
        raise InputError(f"{manifest} is not a generate manifest")
    _run_generator(recorded.subcommand, recorded.parameters, out)


# --------------------------------------------------------------- decompose


@cli.command()
@click.argument("data", type=click.Path(path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--k", "k", type=int, help="Fixed source count (stability analysis otherwise)")
@config_options
@click.pass_context
@handle_errors
def decompose(
    ctx: click.Context,
    data: Path,
    out: Path,
    k: Optional[int],
    config_path: Optional[Path],
    **overrides: Any,
) -> None:
    """Estimate the mixing matrix and sources of an observation matrix."""
    config = _run_config(ctx, config_path, k=k, **overrides)
    X = read_matrix(data)
    result = run_decompose(X, config, n_jobs=_n_jobs(ctx))

    storage = RunStorage(out)
    storage.save_result(result)
    storage.save_summary(result)
    storage.save_manifest(
        "decompose",
        seed=config.seed,
        parameters={"data": str(data.resolve()), **config.model_dump()},
    )
    click.echo(
        f"K={result.chosen_K}, fit error {np.degrees(result.fit_error):.4f} deg, "
        f"{result.diagnostics.edges_detected} edges; results in {out}"
    )


@cli.command("select-k")
@click.argument("data", type=click.Path(path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), required=True)
@config_options
@click.pass_context
@handle_errors
def select_k(
    ctx: click.Context, data: Path, out: Path, config_path: Optional[Path], **overrides: Any
) -> None:
    """Stability analysis only: NMI profile and recommended source count."""
    config = _run_config(ctx, config_path, **overrides)
    Xp, _ = preprocess(read_matrix(data), config.remove_fraction)
    profile = stability_select(
        Xp, config.k_max, config.trials, config=config, seed=config.seed, n_jobs=_n_jobs(ctx)
    )

    storage = RunStorage(out)
    storage.save_table("nmi.tsv", ["K", "NMI"], list(zip(profile.k_range, profile.nmi)))
    storage.save_json("stability.json", profile)
    storage.save_manifest(
        "select-k",
        seed=config.seed,
        parameters={"data": str(data.resolve()), **config.model_dump()},
    )
    for k_value, nmi in zip(profile.k_range, profile.nmi):
        click.echo(f"K={k_value}\tNMI={nmi:.4f}")
    click.echo(f"Recommended K={profile.recommended_k}")


# ---------------------------------------------------------------- evaluate


@cli.command()
@click.option("--a-true", type=click.Path(path_type=Path), required=True)
@click.option("--a-hat", type=click.Path(path_type=Path), required=True)
@click.option("--s-true", type=click.Path(path_type=Path))
@click.option("--s-hat", type=click.Path(path_type=Path))
@click.option("--markers", type=int, help="Marker points per source for E_S markers")
@click.option("--out", type=click.Path(path_type=Path), help="Directory for metrics.json")
@handle_errors
def evaluate(
    a_true: Path,
    a_hat: Path,
    s_true: Optional[Path],
    s_hat: Optional[Path],
    markers: Optional[int],
    out: Optional[Path],
) -> None:
    """Compare estimates with ground truth (E_A, E_S, marker E_S)."""
    if (s_true is None) != (s_hat is None):
        raise InputError("--s-true and --s-hat must be given together")
    result = evaluate_estimate(
        read_matrix(a_true),
        read_matrix(a_hat),
        read_matrix(s_true) if s_true else None,
        read_matrix(s_hat) if s_hat else None,
        per_source=markers,
    )
    if out is not None:
        storage = RunStorage(out)
        storage.save_evaluation(result)
        storage.save_manifest(
            "evaluate",
            parameters={
                "a_true": str(a_true.resolve()),
                "a_hat": str(a_hat.resolve()),
                "s_true": str(s_true.resolve()) if s_true else None,
                "s_hat": str(s_hat.resolve()) if s_hat else None,
                "markers": markers,
            },
        )
    click.echo(result.model_dump_json(indent=2))


# --------------------------------------------------------------- benchmark


@cli.command()
@click.option("--scenario", type=click.Choice(["exact", "over", "under"]), required=True)
@click.option(
    "--snr",
    "snr_levels",
    type=float,
    multiple=True,
    required=True,
    help="SNR level in dB (repeatable)",
)
@click.option("--replicates", type=int, default=10, show_default=True)
@click.option("--m", "m", type=int, help="Mixtures (scenario default)")
@click.option("--k", "k", type=int, help="Sources (scenario default)")
@click.option("--n-points", type=int, default=1000, show_default=True)
@click.option("--no-order", is_flag=True, help="Skip model-order selection")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@config_options
@click.pass_context
@handle_errors
def benchmark(
    ctx: click.Context,
    scenario: str,
    snr_levels: tuple[float, ...],
    replicates: int,
    m: Optional[int],
    k: Optional[int],
    n_points: int,
    no_order: bool,
    out: Path,
    config_path: Optional[Path],
    **overrides: Any,
) -> None:
    """Monte Carlo sweep over random mixing matrices and SNR levels."""
    config = _run_config(ctx, config_path, **overrides)
    records, cells = run_benchmark(
        scenario,
        list(snr_levels),
        replicates,
        m=m,
        k=k,
        n_points=n_points,
        config=config,
        seed=config.seed,
        select_order=not no_order,
        n_jobs=_n_jobs(ctx),
    )

    storage = RunStorage(out)
    storage.save_benchmark(scenario, records, cells)
    storage.save_manifest(
        "benchmark",
        subcommand=scenario,
        seed=config.seed,
        parameters={
            "snr_levels": list(snr_levels),
            "replicates": replicates,
            "mixtures": m,
            "sources": k,
            "n_points": n_points,
            "select_order": not no_order,
            **config.model_dump(),
        },
    )
    for cell in cells:
        click.echo(
            f"{cell.snr_db:g} dB\tE_A={cell.mean_E_A}\tE_S={cell.mean_E_S}\t"
            f"order={cell.order_accuracy}\tfailures={cell.failures}"
        )


def main(args: Optional[list[str]] = None) -> None:
    """Console entry point; usage errors exit with code 1."""
    try:
        cli.main(args=args, prog_name="camix", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        sys.exit(1)
    except click.ClickException as e:
        e.show()
        sys.exit(1)
    sys.exit(0)


if __name__ == "__main__":
    main()
