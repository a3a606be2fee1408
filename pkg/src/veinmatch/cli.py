"""Palm-vein matching CLI.

Batch commands for feature extraction, pairwise matching with overlays,
template enrollment, closed-set evaluation, synthetic sweeps and plots.
"""

import asyncio
import json
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator, Optional

import structlog
import typer
from pydantic import ValidationError

from veinmatch.bench.images import SyntheticPalmDataset
from veinmatch.bench.sweeps import (
    RATIOS,
    SweepRunner,
    ratio_sweep,
    read_sweep_csv,
    restore_failures,
    rotation_violations,
    threshold_violations,
    write_ratio_csv,
    write_sweep_csv,
)
from veinmatch.errors import EnrollmentError, VeinMatchError
from veinmatch.models.config import PipelineConfig
from veinmatch.models.enums import FilterKind, MatcherKind, SweepKind
from veinmatch.models.evaluation import Identity, Template
from veinmatch.models.features import FeatureSet
from veinmatch.models.filtering import FilterOutcome
from veinmatch.models.matches import MatchSet
from veinmatch.models.report import EvaluationReport
from veinmatch.services.enrollment import EnrollmentSummary
from veinmatch.services.evaluation import EvaluationOutcome
from veinmatch.services.extractor import write_debug_images
from veinmatch.services.factory import (
    create_enrollment_service,
    create_evaluation_service,
    create_feature_extractor,
    create_template_store,
    load_config,
)
from veinmatch.services.feature_io import read_features, write_features
from veinmatch.services.manifest import ManifestLoader
from veinmatch.services.scoring import MatchPipeline, score_probe, write_scores_csv
from veinmatch.services.visualize import (
    plot_error_curves,
    plot_ratio_sweep,
    plot_sweep,
    render_match_overlay,
    write_overlay,
)
from veinmatch.vision.geomfilter import filter_matches
from veinmatch.vision.image_io import read_image
from veinmatch.vision.matchers import match_features

structlog.configure(
    processors=[
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.dev.ConsoleRenderer(),
    ],
    logger_factory=lambda name: structlog.PrintLogger(file=sys.stderr),
    wrapper_class=structlog.BoundLogger,
    context_class=dict,
    cache_logger_on_first_use=True,
)

logger = structlog.get_logger(__name__)

app = typer.Typer(
    name="veinmatch",
    help="""Extract SIFT features from palm-vein images, match them with geometric filtering and measure EER.

Examples:

  # Render a synthetic 16-identity dataset
  uv run veinmatch synthesize --out ./synthetic --subjects 8

  # Extract features from one image
  uv run veinmatch extract --in palm.png --out palm.vmfs

  # Match two feature files with the MMD filter and draw the matches
  uv run veinmatch match --probe a.vmfs --gallery b.vmfs --filter mmd --viz overlay.png

  # Rank enrolled identities for one probe
  uv run veinmatch identify --probe a.vmfs --db templates.db --filter mmd

  # Evaluate a dataset over template sizes 1-5, with and without MMD
  uv run veinmatch evaluate --manifest ./synthetic/manifest.csv --report report.json \\
      --template-sizes 1,2,3,4,5 --compare-filters none,mmd""",
    rich_markup_mode="markdown",
)

viz_app = typer.Typer(name="viz", help="Render match overlays, sweep plots and FAR/FRR curves to files.")
app.add_typer(viz_app, name="viz")

CONFIG_OPTION_HELP = "Flat JSON config file keyed by section.field"
SET_OPTION_HELP = "Override one config value, e.g. --set filter.mmd.t_mu=20 (repeatable)"
THREADS_OPTION = typer.Option(
    None,
    "--threads",
    envvar="VEINMATCH_THREADS",
    min=1,
    help="Worker threads (default: number of CPUs)",
)


@contextmanager
def _domain_errors(command: str) -> Iterator[None]:
    try:
        yield
    except VeinMatchError as exc:
        logger.error("command_failed", command=command, error=str(exc), error_type=type(exc).__name__)
        raise typer.Exit(1) from exc


def parse_setting(setting: str) -> tuple[str, Any]:
    """``key=value`` with the value read as JSON when possible, else as a string."""
    key, sep, raw = setting.partition("=")
    if not sep or not key.strip():
        raise typer.BadParameter(f"expected key=value, got '{setting}'")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def parse_int_list(value: str) -> list[int]:
    try:
        items = [int(item) for item in value.split(",") if item.strip()]
    except ValueError as exc:
        raise typer.BadParameter(f"expected comma-separated integers, got '{value}'") from exc
    if not items:
        raise typer.BadParameter("expected at least one integer")
    return items


def parse_float_list(value: str) -> list[float]:
    try:
        items = [float(item) for item in value.split(",") if item.strip()]
    except ValueError as exc:
        raise typer.BadParameter(f"expected comma-separated numbers, got '{value}'") from exc
    if not items:
        raise typer.BadParameter("expected at least one number")
    return items


def parse_filter_list(value: str) -> list[FilterKind]:
    try:
        return [FilterKind(item.strip()) for item in value.split(",") if item.strip()]
    except ValueError as exc:
        choices = ", ".join(kind.value for kind in FilterKind)
        raise typer.BadParameter(f"filters must be among {choices}, got '{value}'") from exc


def resolve_config(config_path: Optional[Path], settings: Optional[list[str]], **flags: Any) -> PipelineConfig:
    """Defaults, then the config file, then ``--set`` values, then dedicated flags."""
    overrides = dict(parse_setting(setting) for setting in settings or [])
    overrides.update({key: value for key, value in flags.items() if value is not None})
    return load_config(config_path, overrides)


def _write_json(path: Path, payload: dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


@app.command()
def extract(
    image: Path = typer.Option(..., "--in", "-i", help="Palm image to extract features from"),
    out: Optional[Path] = typer.Option(
        None,
        "--out",
        "-o",
        help="Feature file to write; .json writes the JSON form (default: image path with .vmfs)",
    ),
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help=CONFIG_OPTION_HELP),
    settings: Optional[list[str]] = typer.Option(None, "--set", help=SET_OPTION_HELP),
    debug_dir: Optional[Path] = typer.Option(
        None,
        "--debug-dir",
        help="Directory for the palm mask, ROI, ROI mask and enhanced ROI images",
    ),
) -> None:
    """Extract SIFT features from the palm ROI of one image."""
    with _domain_errors("extract"):
        config = resolve_config(config_path, settings)
        result = create_feature_extractor(config).extract_path(image)
        target = out or image.with_suffix(".vmfs")
        write_features(target, result.features)
        if debug_dir is not None:
            written = write_debug_images(result, debug_dir)
            logger.info("debug_images_written", directory=str(debug_dir), files=len(written))

    typer.echo(f"Extracted {len(result.features)} keypoints from {image} -> {target}")


def _filter_details(outcome: FilterOutcome) -> dict[str, Any]:
    """MMD summary statistics or the RANSAC model behind a filter outcome, when one ran."""
    if outcome.mmd is not None and outcome.mmd.stats is not None:
        stats = outcome.mmd.stats
        return {
            "mmd": {
                "mu_x": stats.mu_x,
                "mu_y": stats.mu_y,
                "med_x": stats.med_x,
                "med_y": stats.med_y,
                "n_low": stats.n_low,
                "n_high": stats.n_high,
                "n_pairs": outcome.mmd.n_pairs,
            }
        }
    if outcome.ransac is not None:
        return {"ransac": outcome.ransac.model_dump(mode="json", include={"degenerate", "model"})}
    return {}


def _match_decision(
    probe: Path,
    gallery: Path,
    config: PipelineConfig,
) -> tuple[dict[str, Any], FeatureSet, FeatureSet, MatchSet, FilterOutcome]:
    query_features = read_features(probe)
    gallery_features = read_features(gallery)
    matches = match_features(query_features, gallery_features, config.matcher)
    outcome = filter_matches(matches, query_features, gallery_features, config.filter)
    decision = {
        "probe": query_features.source_id,
        "gallery": gallery_features.source_id,
        "matcher": config.matcher.kind.value,
        "filter": config.filter.kind.value,
        "probe_keypoints": len(query_features),
        "gallery_keypoints": len(gallery_features),
        "matches": len(matches),
        "survivors": len(outcome.survivors),
        "image_accepted": outcome.image_accepted,
        "score": outcome.score,
        **_filter_details(outcome),
        "survivor_pairs": [[pair.query_idx, pair.gallery_idx] for pair in outcome.survivors.pairs],
        "config": config.to_flat(),
    }
    return decision, query_features, gallery_features, matches, outcome


@app.command()
def match(
    probe: Path = typer.Option(..., "--probe", "-p", help="Probe feature file"),
    gallery: Path = typer.Option(..., "--gallery", "-g", help="Gallery feature file"),
    filter_kind: Optional[FilterKind] = typer.Option(None, "--filter", "-f", help="Geometric post-filter"),
    matcher: Optional[MatcherKind] = typer.Option(None, "--matcher", "-m", help="Descriptor matcher"),
    ratio: Optional[float] = typer.Option(None, "--ratio", help="Distance ratio of the knn_rt matcher"),
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help=CONFIG_OPTION_HELP),
    settings: Optional[list[str]] = typer.Option(None, "--set", help=SET_OPTION_HELP),
    viz: Optional[Path] = typer.Option(None, "--viz", help="Write a match overlay image here"),
    probe_image: Optional[Path] = typer.Option(None, "--probe-image", help="Enhanced ROI image behind the probe"),
    gallery_image: Optional[Path] = typer.Option(
        None, "--gallery-image", help="Enhanced ROI image behind the gallery"
    ),
) -> None:
    """Match two feature files and print the decision as JSON."""
    with _domain_errors("match"):
        config = resolve_config(
            config_path,
            settings,
            **{
                "filter.kind": filter_kind.value if filter_kind else None,
                "matcher.kind": matcher.value if matcher else None,
                "matcher.ratio": ratio,
            },
        )
        decision, query_features, gallery_features, matches, outcome = _match_decision(probe, gallery, config)
        if viz is not None:
            canvas = render_match_overlay(
                query_features,
                gallery_features,
                matches,
                outcome.survivors,
                query_image=read_image(probe_image) if probe_image else None,
                gallery_image=read_image(gallery_image) if gallery_image else None,
            )
            write_overlay(viz, canvas)
            logger.info("overlay_written", path=str(viz), matches=len(matches), survivors=len(outcome.survivors))

    typer.echo(json.dumps(decision, indent=2))


def parse_identity(value: Optional[str]) -> Optional[Identity]:
    if value is None:
        return None
    try:
        return Identity.from_key(value)
    except ValueError as exc:
        raise typer.BadParameter(f"expected <subject>_<hand> such as 001_left, got '{value}'") from exc


async def load_stored_templates(db: Path, identity: Optional[Identity] = None) -> list[Template]:
    """One stored template, or every template in ``db`` ordered by identity."""
    async with create_template_store(db) as store:
        identities = [identity] if identity is not None else await store.list_identities()
        templates = [await store.get_template(stored) for stored in identities]
    missing = [stored.key for stored, template in zip(identities, templates) if template is None]
    if missing:
        raise EnrollmentError(f"no template stored for {', '.join(missing)} in {db}")
    if not templates:
        raise EnrollmentError(f"no templates stored in {db}")
    return [template for template in templates if template is not None]


@app.command()
def identify(
    probe: Path = typer.Option(..., "--probe", "-p", help="Probe feature file"),
    db: Path = typer.Option(..., "--db", help="SQLite template database written by enroll"),
    identity: Optional[str] = typer.Option(
        None, "--identity", help="Score only this enrolled identity, e.g. 001_left (default: all)"
    ),
    filter_kind: Optional[FilterKind] = typer.Option(None, "--filter", "-f", help="Geometric post-filter"),
    matcher: Optional[MatcherKind] = typer.Option(None, "--matcher", "-m", help="Descriptor matcher"),
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help=CONFIG_OPTION_HELP),
    settings: Optional[list[str]] = typer.Option(None, "--set", help=SET_OPTION_HELP),
) -> None:
    """Score a feature file against enrolled templates and print the ranking as JSON."""
    wanted = parse_identity(identity)
    with _domain_errors("identify"):
        config = resolve_config(
            config_path,
            settings,
            **{
                "filter.kind": filter_kind.value if filter_kind else None,
                "matcher.kind": matcher.value if matcher else None,
            },
        )
        probe_features = read_features(probe)
        templates = asyncio.run(load_stored_templates(db, wanted))
        pipeline = MatchPipeline.from_config(config)
        ranking = sorted(
            (
                {
                    "identity": template.identity.key,
                    "template_size": template.size,
                    "score": score_probe(probe_features, template, pipeline),
                }
                for template in templates
            ),
            key=lambda entry: (-entry["score"], entry["identity"]),
        )
        logger.info("identification_completed", probe=probe_features.source_id, templates=len(templates))

    result = {
        "probe": probe_features.source_id,
        "matcher": config.matcher.kind.value,
        "filter": config.filter.kind.value,
        "score_rule": f"filtered_match_count/{config.protocol.aggregation.value}",
        "ranking": ranking,
        "config": config.to_flat(),
    }
    typer.echo(json.dumps(result, indent=2))


@app.command()
def enroll(
    manifest_path: Path = typer.Option(..., "--manifest", help="Manifest CSV or image directory"),
    db: Path = typer.Option(..., "--db", help="SQLite template database to write"),
    template_size: Optional[int] = typer.Option(
        None, "--template-size", "-t", min=1, help="Samples per template (default: protocol.template_size)"
    ),
    pattern: Optional[str] = typer.Option(
        None, "--pattern", help="File-name regex with subject, hand and sample groups (directory input)"
    ),
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help=CONFIG_OPTION_HELP),
    settings: Optional[list[str]] = typer.Option(None, "--set", help=SET_OPTION_HELP),
    threads: Optional[int] = THREADS_OPTION,
) -> None:
    """Extract every identity's first samples and store them as templates."""
    with _domain_errors("enroll"):
        config = resolve_config(config_path, settings, **{"protocol.template_size": template_size})
        manifest = ManifestLoader(logger=logger).load(manifest_path, pattern)

        async def run_enrollment() -> EnrollmentSummary:
            async with create_enrollment_service(db, config, threads) as service:
                return await service.enroll_manifest(manifest, config.protocol.template_size)

        summary = asyncio.run(run_enrollment())

    typer.echo(f"Enrolled {summary.templates} templates ({summary.samples} samples) into {db}")


@app.command()
def evaluate(
    manifest_path: Path = typer.Option(..., "--manifest", help="Manifest CSV or image directory"),
    report_path: Path = typer.Option(..., "--report", "-r", help="JSON report to write"),
    template_sizes: Optional[str] = typer.Option(
        None, "--template-sizes", help="Comma-separated template sizes (default: protocol.template_size)"
    ),
    compare_filters: Optional[str] = typer.Option(
        None, "--compare-filters", help="Comma-separated filters scored over the same matches (default: filter.kind)"
    ),
    seed: Optional[int] = typer.Option(None, "--seed", help="Seed of the development/evaluation split"),
    scores_dir: Optional[Path] = typer.Option(
        None, "--scores-dir", help="Write one score CSV per filter and template size here"
    ),
    pattern: Optional[str] = typer.Option(
        None, "--pattern", help="File-name regex with subject, hand and sample groups (directory input)"
    ),
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help=CONFIG_OPTION_HELP),
    settings: Optional[list[str]] = typer.Option(None, "--set", help=SET_OPTION_HELP),
    threads: Optional[int] = THREADS_OPTION,
) -> None:
    """Run the closed-set protocol over a dataset and report EER per filter and template size."""
    sizes = parse_int_list(template_sizes) if template_sizes else None
    filters = parse_filter_list(compare_filters) if compare_filters else None

    with _domain_errors("evaluate"):
        config = resolve_config(config_path, settings, **{"protocol.seed": seed})
        manifest = ManifestLoader(logger=logger).load(manifest_path, pattern)

        async def run_evaluation() -> EvaluationOutcome:
            service = create_evaluation_service(config, threads)
            return await service.evaluate(manifest, sizes, filters)

        outcome = asyncio.run(run_evaluation())
        _write_json(report_path, outcome.report.to_record())
        if scores_dir is not None:
            for (kind, size), records in outcome.records.items():
                write_scores_csv(records, scores_dir / f"scores_{kind.value}_t{size}.csv")

    for row in outcome.report.rows:
        eer = row.eer.eer * 100
        typer.echo(f"{row.filter.value:>7} t={row.template_size}  EER {eer:.2f}%  ({row.n_records} scores)")
    if outcome.report.extraction_failures:
        typer.echo(f"Skipped {len(outcome.report.extraction_failures)} images that failed extraction")
    typer.echo(f"Report written to {report_path}")


@app.command()
def sweep(
    kind: SweepKind = typer.Option(SweepKind.ROTATION, "--kind", "-k", help="Sweep to run"),
    out: Path = typer.Option(..., "--out", "-o", help="CSV file to write"),
    seeds: int = typer.Option(50, "--seeds", "-n", min=1, help="Number of seeded scenes"),
    seed_start: int = typer.Option(0, "--seed-start", help="First scene seed"),
    probe: Optional[Path] = typer.Option(None, "--probe", help="Probe feature file (ratio sweep)"),
    gallery: Optional[Path] = typer.Option(None, "--gallery", help="Gallery feature file (ratio sweep)"),
    ratios: Optional[str] = typer.Option(None, "--ratios", help="Comma-separated distance ratios (ratio sweep)"),
    plot: Optional[Path] = typer.Option(None, "--plot", help="Also write a plot of the sweep"),
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help=CONFIG_OPTION_HELP),
    settings: Optional[list[str]] = typer.Option(None, "--set", help=SET_OPTION_HELP),
    threads: Optional[int] = THREADS_OPTION,
) -> None:
    """Sweep MMD thresholds and rotations on synthetic scenes, or ratio-test ratios on a feature pair."""
    if kind is SweepKind.RATIO and (probe is None or gallery is None):
        raise typer.BadParameter("--probe and --gallery are required for the ratio sweep")
    ratio_values = tuple(parse_float_list(ratios)) if ratios else RATIOS

    with _domain_errors("sweep"):
        config = resolve_config(config_path, settings)
        if kind is SweepKind.RATIO:
            ratio_rows = ratio_sweep(read_features(probe), read_features(gallery), ratio_values, config.filter.mmd)
            write_ratio_csv(ratio_rows, out)
            if plot is not None:
                plot_ratio_sweep(ratio_rows, plot)
            for row in ratio_rows:
                typer.echo(f"ratio {row.ratio:.2f}: {row.matches} matches, {row.survivors} after MMD")
            typer.echo(f"Sweep written to {out}")
            return

        runner = SweepRunner(max_workers=threads, logger=logger)
        seed_list = list(range(seed_start, seed_start + seeds))
        rows = asyncio.run(runner.run(seed_list, kind, mmd=config.filter.mmd))
        write_sweep_csv(rows, out)
        if plot is not None:
            plot_sweep(rows, plot)

    typer.echo(f"{len(rows)} rows over {seeds} scenes; threshold violations: {threshold_violations(rows)}")
    if kind is SweepKind.ROTATION:
        typer.echo(
            f"rotation violations: {rotation_violations(rows)}; restore failures: {restore_failures(rows)}"
        )
    typer.echo(f"Sweep written to {out}")


@app.command()
def synthesize(
    out: Path = typer.Option(..., "--out", "-o", help="Directory for the images and manifest.csv"),
    subjects: int = typer.Option(8, "--subjects", "-s", min=1, help="Subjects; each contributes two hands"),
    samples: int = typer.Option(3, "--samples", min=1, help="Samples per hand"),
    noise: float = typer.Option(0.01, "--noise", min=0.0, help="Gaussian pixel noise sigma"),
    seed: int = typer.Option(0, "--seed", help="Dataset seed"),
) -> None:
    """Render a synthetic NIR-like palm dataset with CASIA-style file names."""
    with _domain_errors("synthesize"):
        dataset = SyntheticPalmDataset(
            n_subjects=subjects,
            samples_per_hand=samples,
            noise_sigma=noise,
            seed=seed,
            logger=logger,
        )
        manifest = dataset.write(out)

    typer.echo(f"Wrote {len(manifest)} images for {len(manifest.identities())} identities to {out}")


@viz_app.command("overlay")
def viz_overlay(
    probe: Path = typer.Option(..., "--probe", "-p", help="Probe feature file"),
    gallery: Path = typer.Option(..., "--gallery", "-g", help="Gallery feature file"),
    out: Path = typer.Option(..., "--out", "-o", help="Overlay image to write"),
    filter_kind: FilterKind = typer.Option(FilterKind.MMD, "--filter", "-f", help="Filter deciding green or red"),
    probe_image: Optional[Path] = typer.Option(None, "--probe-image", help="Enhanced ROI image behind the probe"),
    gallery_image: Optional[Path] = typer.Option(
        None, "--gallery-image", help="Enhanced ROI image behind the gallery"
    ),
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help=CONFIG_OPTION_HELP),
    settings: Optional[list[str]] = typer.Option(None, "--set", help=SET_OPTION_HELP),
) -> None:
    """Draw accepted matches green and rejected matches red."""
    with _domain_errors("viz overlay"):
        config = resolve_config(config_path, settings, **{"filter.kind": filter_kind.value})
        _, query_features, gallery_features, matches, outcome = _match_decision(probe, gallery, config)
        canvas = render_match_overlay(
            query_features,
            gallery_features,
            matches,
            outcome.survivors,
            query_image=read_image(probe_image) if probe_image else None,
            gallery_image=read_image(gallery_image) if gallery_image else None,
        )
        write_overlay(out, canvas)

    typer.echo(f"{len(outcome.survivors)} of {len(matches)} matches accepted; overlay written to {out}")


@viz_app.command("sweep")
def viz_sweep(
    csv_path: Path = typer.Option(..., "--csv", help="Sweep CSV written by 'veinmatch sweep'"),
    out: Path = typer.Option(..., "--out", "-o", help="Plot image to write"),
) -> None:
    """Plot recall and precision against the threshold, one line per rotation."""
    if not csv_path.is_file():
        logger.error("sweep_csv_not_found", path=str(csv_path))
        raise typer.Exit(1)
    plot_sweep(read_sweep_csv(csv_path), out)
    typer.echo(f"Plot written to {out}")


@viz_app.command("curves")
def viz_curves(
    report_path: Path = typer.Option(..., "--report", "-r", help="Report written by 'veinmatch evaluate'"),
    out: Path = typer.Option(..., "--out", "-o", help="Plot image to write"),
) -> None:
    """Plot FAR and FRR against the score threshold for every report row."""
    if not report_path.is_file():
        logger.error("report_not_found", path=str(report_path))
        raise typer.Exit(1)
    try:
        report = EvaluationReport.from_record(json.loads(report_path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, ValidationError) as exc:
        logger.error("report_invalid", path=str(report_path), error=str(exc))
        raise typer.Exit(1) from exc
    plot_error_curves(report, out)
    typer.echo(f"Plot written to {out}")


@app.command()
def version() -> None:
    """Show version information."""
    from veinmatch import __version__

    typer.echo(f"veinmatch {__version__}")
