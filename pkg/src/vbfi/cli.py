"""Command-line entry point chaining the pipeline end to end.

Subcommands: synth, expand-concepts, train, evaluate, sweep, design, score,
serve. Exit codes: 0 success, 1 usage error, 2 data/processing error.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

from ._util import atomic_write_bytes, atomic_write_text
from .boosting import BoostingConfig, load_model, model_to_dict, train_vgbdt
from .clustering import ApConfig
from .concepts import (ConceptHierarchy, build_index, build_views,
                       co_favored_concepts, expand_concepts, load_concept_list)
from .dataset import TRAITS, DataError, load_dataset, save_dataset
from .evaluation import (cross_validate, plot_sweep, sweep as run_sweep,
                         write_sweep_csv)
from .questionnaire import (design_questionnaire, load_questionnaire,
                            read_responses, render_manifest, score_response)
from .synth import SynthSpec, generate_synthetic

logger = logging.getLogger("vbfi")


def _setup_logging(level: str) -> None:
    env = os.environ.get("VBFI_LOG")
    if env:
        level = env
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")


def _data_paths(data_dir: str) -> tuple[Path, Path, Path]:
    base = Path(data_dir)
    return base / "images.jsonl", base / "favorites.csv", base / "traits.csv"


def _load(data_dir: str):
    images, favorites, traits = _data_paths(data_dir)
    for p in (images, favorites, traits):
        if not p.exists():
            raise DataError(f"missing dataset file {p}")
    return load_dataset(images, favorites, traits)


def _select_concepts(ds, concepts_file: str | None, min_common_users: int):
    idx = build_index(ds)
    if concepts_file:
        concepts = load_concept_list(concepts_file)
        missing = [c for c in concepts if c not in idx.user_sets]
        if missing:
            raise DataError(f"concepts not present in data: {missing}")
        common = frozenset.intersection(*[idx.user_sets[c] for c in concepts])
        if not common:
            raise DataError("listed concepts share no common user")
    else:
        concepts, common = co_favored_concepts(idx, min_common_users)
    logger.info("using %d concepts over %d common users", len(concepts),
                len(common))
    return idx, concepts, common


def _boost_config(m: int, j: int, shrinkage: float, min_leaf: int,
                  distinct_views: bool) -> BoostingConfig:
    return BoostingConfig(n_rounds=m, n_leaves=j, shrinkage=shrinkage,
                          min_leaf=min_leaf, distinct_views=distinct_views)


def _traits_arg(trait: str | None, all_traits: bool) -> list[str]:
    if all_traits or trait is None:
        return list(TRAITS)
    if trait not in TRAITS:
        raise click.UsageError(
            f"unknown trait {trait!r}; expected one of {', '.join(TRAITS)}")
    return [trait]


@click.group(name="vbfi")
@click.option("--log-level", default="INFO", show_default=True,
              help="Logging level (env VBFI_LOG takes precedence).")
def cli(log_level: str):
    """Image-preference personality test pipeline."""
    _setup_logging(log_level)


@cli.command()
@click.option("--seed", default=42, show_default=True)
@click.option("--users", default=104, show_default=True)
@click.option("--views", default=36, show_default=True,
              help="Number of planted concepts (views).")
@click.option("--d", "feature_dim", default=8, show_default=True,
              help="Feature dimension per image.")
@click.option("--informative", default=5, show_default=True,
              help="How many leading views carry label signal.")
@click.option("--noise-std", default=0.5, show_default=True)
@click.option("--images-per-concept", default=2, show_default=True)
@click.option("--levels", default=5, show_default=True,
              help="Distinct planted levels per informative view (match "
                   "the tree leaf budget to get full questions).")
@click.option("--noise-concepts", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False))
def synth(seed, users, views, feature_dim, informative, noise_std,
          images_per_concept, levels, noise_concepts, out):
    """Write a synthetic dataset (images.jsonl, favorites.csv, traits.csv)."""
    base = (1.0, 0.9, 0.8, 0.7, 0.5, 0.45, 0.4, 0.35, 0.3, 0.25)
    if informative > len(base):
        raise click.UsageError(f"--informative must be <= {len(base)}")
    amplitudes = base[:informative]
    reach = sum(amplitudes)
    if reach > 3.9:  # keep the planted signal clear of the trait-range clamp
        amplitudes = tuple(a * 3.9 / reach for a in amplitudes)
    spec = SynthSpec(seed=seed, num_users=users, num_views=views,
                     feature_dim=feature_dim,
                     informative_views=tuple(range(informative)),
                     step_amplitudes=amplitudes,
                     levels=levels, noise_std=noise_std,
                     images_per_concept=images_per_concept,
                     noise_concepts=noise_concepts)
    ds, _, _ = generate_synthetic(spec)
    _write_dataset_dir(ds, out)
    click.echo(f"wrote {len(ds.images)} images, {len(ds.users)} users to {out}")


def _write_dataset_dir(ds, out: str) -> None:
    # save_dataset is deterministic; route through temp files for atomicity
    Path(out).mkdir(parents=True, exist_ok=True)
    paths = _data_paths(out)
    tmp = [p.with_suffix(p.suffix + ".tmp") for p in paths]
    save_dataset(ds, *tmp)
    for t, p in zip(tmp, paths):
        os.replace(t, p)


@cli.command("expand-concepts")
@click.option("--data", required=True, type=click.Path(exists=True,
                                                       file_okay=False))
@click.option("--hierarchy", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--levels", default=3, show_default=True,
              help="Ancestor hops to add per detected concept.")
@click.option("--out", required=True, type=click.Path(file_okay=False))
def expand_concepts_cmd(data, hierarchy, levels, out):
    """Augment image concepts with hierarchy ancestors."""
    ds = _load(data)
    h = ConceptHierarchy.load(hierarchy)
    expanded = expand_concepts(ds, h, levels)
    _write_dataset_dir(expanded, out)
    before = sum(len(i.detected_concepts) for i in ds.images.values())
    after = sum(len(i.detected_concepts) for i in expanded.images.values())
    click.echo(f"expanded concept mentions {before} -> {after}")


@cli.command()
@click.option("--data", required=True, type=click.Path(exists=True,
                                                       file_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--trait", default=None, help="Train a single trait.")
@click.option("--all-traits", is_flag=True, default=False)
@click.option("--m", "--M", "m", default=5, show_default=True,
              help="Boosting rounds (questions per trait).")
@click.option("--j", "--J", "j", default=5, show_default=True,
              help="Leaves per tree (options per question).")
@click.option("--shrinkage", default=0.5, show_default=True)
@click.option("--min-leaf", default=2, show_default=True)
@click.option("--distinct-views", is_flag=True, default=False)
@click.option("--min-common-users", default=104, show_default=True)
@click.option("--concepts-file", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Pin the concept list (one per line) instead of the "
                   "co-favored selection.")
def train(data, out, trait, all_traits, m, j, shrinkage, min_leaf,
          distinct_views, min_common_users, concepts_file):
    """Train per-trait ensembles and write model_<trait>.json files."""
    ds = _load(data)
    _, concepts, common = _select_concepts(ds, concepts_file, min_common_users)
    vm = build_views(ds, concepts, common)
    X, order = vm.matrix()
    config = _boost_config(m, j, shrinkage, min_leaf, distinct_views)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for t in _traits_arg(trait, all_traits):
        y = np.array([ds.users[u].traits[t] for u in order])
        model = train_vgbdt(X, y, vm.num_views, config,
                            view_names=list(vm.concept_order), trait=t)
        payload = json.dumps(model_to_dict(model), indent=2) + "\n"
        atomic_write_text(out_dir / f"model_{t}.json", payload)
        click.echo(f"trait {t}: F0={model.f0:.4f}, views "
                   f"{[r.view for r in model.rounds]} -> model_{t}.json")


@cli.command()
@click.option("--data", required=True, type=click.Path(exists=True,
                                                       file_okay=False))
@click.option("--trait", default=None)
@click.option("--all-traits", is_flag=True, default=False)
@click.option("--m", "--M", "m", default=5, show_default=True)
@click.option("--j", "--J", "j", default=5, show_default=True)
@click.option("--shrinkage", default=0.5, show_default=True)
@click.option("--min-leaf", default=2, show_default=True)
@click.option("--folds", default=10, show_default=True)
@click.option("--repeats", default=10, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--min-common-users", default=104, show_default=True)
@click.option("--concepts-file", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=None, type=click.Path(dir_okay=False),
              help="Write per-fold RMSE rows as CSV.")
def evaluate(data, trait, all_traits, m, j, shrinkage, min_leaf, folds,
             repeats, seed, min_common_users, concepts_file, out):
    """Repeated k-fold cross-validation; prints mean±std RMSE per trait."""
    ds = _load(data)
    _, concepts, common = _select_concepts(ds, concepts_file, min_common_users)
    vm = build_views(ds, concepts, common)
    X, order = vm.matrix()
    config = _boost_config(m, j, shrinkage, min_leaf, False)
    rows = [["trait", "repeat", "fold", "rmse"]]
    for t in _traits_arg(trait, all_traits):
        y = np.array([ds.users[u].traits[t] for u in order])
        report = cross_validate(X, y, vm.num_views, config, folds=folds,
                                repeats=repeats, seed=seed, trait=t)
        for i, value in enumerate(report.fold_rmse):
            rows.append([t, i // folds, i % folds, f"{value:.6f}"])
        click.echo(f"trait {t}: RMSE {report.mean_rmse:.4f} "
                   f"± {report.std_rmse:.4f} over {len(report.fold_rmse)} folds")
    if out:
        atomic_write_text(out, "\n".join(",".join(map(str, r))
                                         for r in rows) + "\n")
        click.echo(f"wrote {out}")


@cli.command("sweep")
@click.option("--data", required=True, type=click.Path(exists=True,
                                                       file_okay=False))
@click.option("--param", type=click.Choice(["M", "J"]), required=True)
@click.option("--values", required=True,
              help="Comma-separated parameter values, e.g. 1,3,5,7,10.")
@click.option("--trait", default=None)
@click.option("--all-traits", is_flag=True, default=False)
@click.option("--m", "--M", "m", default=5, show_default=True)
@click.option("--j", "--J", "j", default=5, show_default=True)
@click.option("--shrinkage", default=0.5, show_default=True)
@click.option("--min-leaf", default=2, show_default=True)
@click.option("--folds", default=10, show_default=True)
@click.option("--repeats", default=10, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--min-common-users", default=104, show_default=True)
@click.option("--concepts-file", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--plot", default=None, type=click.Path(dir_okay=False),
              help="Optional SVG/PNG plot of the sweep.")
def sweep_cmd(data, param, values, trait, all_traits, m, j, shrinkage,
              min_leaf, folds, repeats, seed, min_common_users, concepts_file,
              out, plot):
    """Cross-validate over a parameter grid and write the sweep CSV."""
    try:
        grid = [int(v) for v in values.split(",") if v.strip()]
    except ValueError as exc:
        raise click.UsageError(f"bad --values: {exc}")
    if not grid:
        raise click.UsageError("--values is empty")
    ds = _load(data)
    _, concepts, common = _select_concepts(ds, concepts_file, min_common_users)
    vm = build_views(ds, concepts, common)
    X, order = vm.matrix()
    base = _boost_config(m, j, shrinkage, min_leaf, False)
    entries = []
    for t in _traits_arg(trait, all_traits):
        y = np.array([ds.users[u].traits[t] for u in order])
        for value, report in run_sweep(X, y, vm.num_views, param, grid, base,
                                       folds=folds, repeats=repeats,
                                       seed=seed, trait=t):
            entries.append((param, value, report))
            click.echo(f"trait {t} {param}={value}: RMSE "
                       f"{report.mean_rmse:.4f} ± {report.std_rmse:.4f}")
    write_sweep_csv(entries, out)
    click.echo(f"wrote {out}")
    if plot:
        plot_sweep(entries, plot)
        click.echo(f"wrote {plot}")


@cli.command()
@click.option("--models", "models_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--data", required=True, type=click.Path(exists=True,
                                                       file_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--cluster-choice", default=1, show_default=True,
              help="1 = pick options from the largest image cluster, "
                   "2 = second largest, ...")
@click.option("--seed", default=42, show_default=True)
@click.option("--version-id", default=None)
@click.option("--damping", default=0.9, show_default=True)
@click.option("--ap-max-iter", default=500, show_default=True)
@click.option("--emit-images", default=None, type=click.Path(file_okay=False),
              help="Write placeholder PNGs for every referenced image.")
def design(models_dir, data, out, cluster_choice, seed, version_id, damping,
           ap_max_iter, emit_images):
    """Compile trained models into a questionnaire manifest."""
    ds = _load(data)
    idx = build_index(ds)
    models = {}
    for t in TRAITS:
        path = Path(models_dir) / f"model_{t}.json"
        if not path.exists():
            raise DataError(f"missing model file {path}")
        models[t] = load_model(path)
    ap_cfg = ApConfig(damping=damping, max_iter=ap_max_iter)
    q = design_questionnaire(models, ds, idx, cluster_choice=cluster_choice,
                             ap_cfg=ap_cfg, seed=seed, version_id=version_id)
    atomic_write_bytes(out, render_manifest(q))
    click.echo(f"wrote {out}: version {q.version_id}, "
               f"{q.num_questions()} questions")
    if emit_images:
        count = _emit_placeholder_images(q, emit_images)
        click.echo(f"wrote {count} placeholder images to {emit_images}")


def _emit_placeholder_images(q, out_dir: str) -> int:
    from PIL import Image, ImageDraw

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for section in q.traits.values():
        for question in section.questions:
            for opt in question.options:
                digest = hashlib.sha256(opt.image_id.encode()).digest()
                color = tuple(digest[:3])
                accent = tuple(digest[3:6])
                img = Image.new("RGB", (96, 96), color)
                draw = ImageDraw.Draw(img)
                draw.ellipse([24, 24, 72, 72], fill=accent)
                draw.text((4, 2), opt.image_id[:14], fill=(255, 255, 255))
                img.save(out / f"{opt.image_id}.png")
                count += 1
    return count


@cli.command()
@click.option("--questionnaire", "questionnaire_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--responses", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=None, type=click.Path(dir_okay=False),
              help="Scores CSV (stdout when omitted).")
def score(questionnaire_path, responses, out):
    """Score a responses journal against a questionnaire."""
    q = load_questionnaire(questionnaire_path)
    sheets = read_responses(responses)
    lines = ["subject_id," + ",".join(TRAITS)]
    for sheet in sheets:
        if sheet.version_id and sheet.version_id != q.version_id:
            raise DataError(
                f"response {sheet.subject_id!r} targets version "
                f"{sheet.version_id!r}, questionnaire is {q.version_id!r}")
        scores = score_response(q, sheet)
        lines.append(sheet.subject_id + ","
                     + ",".join(repr(scores[t]) for t in TRAITS))
    payload = "\n".join(lines) + "\n"
    if out:
        atomic_write_text(out, payload)
        click.echo(f"scored {len(sheets)} responses -> {out}")
    else:
        click.echo(payload, nl=False)


@cli.command()
@click.option("--questionnaire", "questionnaire_paths", required=True,
              multiple=True, type=click.Path(exists=True, dir_okay=False),
              help="Questionnaire manifest(s); repeat for multiple versions.")
@click.option("--images-dir", default=None, type=click.Path(file_okay=False))
@click.option("--journal", default="responses.jsonl",
              type=click.Path(dir_okay=False), show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--allow-origin", default="*", show_default=True)
@click.option("--ui-dir", default=None, type=click.Path(file_okay=False),
              help="Static web app directory served at /.")
def serve(questionnaire_paths, images_dir, journal, host, port, allow_origin,
          ui_dir):
    """Run the HTTP questionnaire service."""
    import uvicorn

    from .service import create_app

    app = create_app([Path(p) for p in questionnaire_paths],
                     images_dir=images_dir, journal_path=journal,
                     allow_origin=allow_origin, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


def main(argv: list[str] | None = None) -> int:
    """Entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except (DataError, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
