"""Stage functions driving full runs over a case manifest.

Every stage has batch semantics: per-case failures are recorded, the run
continues, and the caller distinguishes total failure from partial
success. Report files embed the config hash and registry version and
contain no timestamps, so identical configs yield byte-identical
reports.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .dimred import ReducerSpec
from .errors import RadstabError
from .models import (
    ClassifierSpec,
    LabeledSet,
    METRIC_KEYS,
    PipelineResult,
    label_os,
    run_sl,
    run_ssl,
)
from .phantom import PerturbationSpec, PhantomSpec, generate_case, perturb_mask
from .preprocess import preprocess_case
from .radiomics import DiscretizationConfig, default_registry, extract_all
from .radiomics.extract import FeatureMatrix, FeatureVector
from .seg_metrics import METRIC_NAMES, score_pair
from .stats import STABILITY_CSV_COLUMNS, friedman, stability_report
from .volume_io import CaseManifest, load_manifest, load_volume_any, write_raw

TOOL_VERSION = "1.0"


# ---------------------------------------------------------------- phantom

def stage_phantom(cfg: PipelineConfig) -> dict:
    """Generate a phantom cohort plus perturbed masks and a manifest."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pdict = dict(cfg.phantom)
    unlabeled = int(pdict.pop("n_unlabeled", 0))
    external = int(pdict.pop("n_external", 0))
    for key in ("dims", "spacing", "radius_range"):
        if key in pdict:
            pdict[key] = tuple(pdict[key])
    spec = PhantomSpec(**pdict)
    perturbs = [PerturbationSpec(**p) for p in cfg.perturbations]
    total = spec.n_cases + unlabeled + external
    records = []
    for i in range(total):
        vol, mask, survival = generate_case(spec, i)
        if i < spec.n_cases:
            cid, tag, labeled = f"case{i:04d}", "labeled", True
        elif i < spec.n_cases + unlabeled:
            cid, tag, labeled = f"pool{i:04d}", "pool", False
        else:
            cid, tag, labeled = f"ext{i:04d}", "external", True
        img_path = out / f"{cid}_image.vol"
        gt_path = out / f"{cid}_mask_gt.vol"
        write_raw(vol, img_path)
        write_raw(mask, gt_path)
        model_masks = {}
        for j, p in enumerate(perturbs):
            per_case = PerturbationSpec(kind=p.kind, magnitude=p.magnitude,
                                        seed=p.seed + 1000 * i + j,
                                        flip_probability=p.flip_probability,
                                        offset=p.offset)
            pm = perturb_mask(mask, per_case)
            name = f"{p.kind}{int(p.magnitude)}"
            mpath = out / f"{cid}_mask_{name}.vol"
            write_raw(pm, mpath)
            model_masks[name] = mpath.name
        records.append({
            "case_id": cid, "image_path": img_path.name,
            "gt_mask_path": gt_path.name, "model_masks": model_masks,
            "survival_years": survival if labeled else None,
            "dataset_tag": tag, "labeled": labeled,
        })
    manifest_path = out / "manifest.json"
    with open(manifest_path, "w") as f:
        json.dump(records, f, indent=2)
    return {"manifest": str(manifest_path), "n_cases": total}


# ------------------------------------------------------------- preprocess

def stage_preprocess(cfg: PipelineConfig, cases: list[CaseManifest]) -> dict:
    """Preprocess each (case, mask source) pair into a cropped store."""
    out = Path(cfg.out_dir) / "preprocessed"
    out.mkdir(parents=True, exist_ok=True)
    provenance, errors = {}, {}
    for case in cases:
        try:
            vol = load_volume_any(case.image_path)
            sources = {"gt": case.gt_mask_path, **case.model_masks}
            for source, mpath in sources.items():
                mask = load_volume_any(mpath)
                cvol, cmask, region = preprocess_case(
                    vol, mask, target_dims=cfg.target_dims,
                    margin=cfg.margin, connectivity=cfg.connectivity,
                    zscore_stage=cfg.zscore_stage)
                write_raw(cvol, out / f"{case.case_id}_{source}_image.vol")
                write_raw(cmask, out / f"{case.case_id}_{source}_mask.vol")
                provenance.setdefault(case.case_id, {})[source] = {
                    "lo": list(region.lo), "hi": list(region.hi),
                    "source_dims": list(region.source_dims)}
        except (RadstabError, OSError, ValueError) as exc:
            errors[case.case_id] = f"{type(exc).__name__}: {exc}"
    with open(out / "crop_provenance.json", "w") as f:
        json.dump({"crops": provenance, "errors": errors}, f, indent=2,
                  sort_keys=True)
    return {"store": str(out), "n_ok": len(provenance), "errors": errors}


# ------------------------------------------------------------- segmetrics

def stage_segmetrics(cfg: PipelineConfig, cases: list[CaseManifest]) -> dict:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, errors = [], {}
    for case in cases:
        try:
            gt = load_volume_any(case.gt_mask_path)
            for model, mpath in case.model_masks.items():
                cand = load_volume_any(mpath)
                scores = score_pair(gt, cand)
                rows.append({"case_id": case.case_id, "model": model,
                             **{k: getattr(scores, k)
                                for k in METRIC_NAMES}})
        except (RadstabError, OSError, ValueError) as exc:
            errors[case.case_id] = f"{type(exc).__name__}: {exc}"
            rows.append({"case_id": case.case_id, "model": "",
                         **{k: "" for k in METRIC_NAMES},
                         "error": str(exc)})
    path = out / "seg_metrics.csv"
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(
            f, fieldnames=["case_id", "model", *METRIC_NAMES, "error"])
        writer.writeheader()
        for row in rows:
            writer.writerow({"error": "", **row})
    return {"report": str(path), "n_rows": len(rows), "errors": errors}


# -------------------------------------------------------------- radiomics

def stage_radiomics(cfg: PipelineConfig, cases: list[CaseManifest]) -> dict:
    """Extract the full registry per (case, mask source) from the
    preprocessed store; one feature CSV per source."""
    store = Path(cfg.out_dir) / "preprocessed"
    out = Path(cfg.out_dir)
    disc = DiscretizationConfig(bin_count=cfg.bin_count)
    sources: dict[str, list[FeatureVector]] = {}
    errors = {}
    for case in cases:
        names = ["gt", *case.model_masks]
        for source in names:
            ipath = store / f"{case.case_id}_{source}_image.vol"
            mpath = store / f"{case.case_id}_{source}_mask.vol"
            if not ipath.exists():
                continue
            try:
                vec = extract_all(load_volume_any(ipath),
                                  load_volume_any(mpath), disc)
                vec.case_id = case.case_id
                sources.setdefault(source, []).append(vec)
            except (RadstabError, ValueError) as exc:
                errors[f"{case.case_id}/{source}"] = str(exc)
    reports = {}
    for source, vecs in sources.items():
        matrix = FeatureMatrix.from_vectors(vecs)
        path = out / f"features_{source}.csv"
        matrix.to_csv(path)
        reports[source] = str(path)
    return {"features": reports, "errors": errors}


# -------------------------------------------------------------- stability

def stage_stability(cfg: PipelineConfig, mask_sources: list[str]) -> dict:
    out = Path(cfg.out_dir)
    gt = FeatureMatrix.from_csv(out / "features_gt.csv")
    chash = cfg.hash()
    version = default_registry().version
    rows, reports, errors = [], {}, {}
    for source in mask_sources:
        path = out / f"features_{source}.csv"
        if not path.exists():
            errors[source] = "missing feature matrix"
            continue
        model = FeatureMatrix.from_csv(path)
        try:
            rep = stability_report(gt, model, model_name=source)
        except (RadstabError, ValueError) as exc:
            errors[source] = f"{type(exc).__name__}: {exc}"
            continue
        rows.append(rep.to_row(config_hash=chash, registry_version=version))
        reports[source] = {
            "model": source, "n_cases": rep.n_cases,
            "total_features": rep.total_features,
            "shapiro": {"model_normal": rep.shapiro_normal_count,
                        "model_not_normal": rep.shapiro_not_normal_count,
                        "gt_normal": rep.gt_shapiro_normal_count,
                        "gt_not_normal": rep.gt_shapiro_not_normal_count},
            "mean_spearman": rep.mean_spearman, "mean_icc": rep.mean_icc,
            "wilcoxon": rep.wilcoxon_summary, "manova": rep.manova,
            "significant": rep.ttest_significant_count,
            "config_hash": chash, "registry_version": version,
        }
    csv_path = out / "stability.csv"
    with open(csv_path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(STABILITY_CSV_COLUMNS))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    json_path = out / "stability.json"
    with open(json_path, "w") as f:
        json.dump({"config_hash": chash, "registry_version": version,
                   "models": reports, "errors": errors}, f, indent=2,
                  sort_keys=True)
    return {"csv": str(csv_path), "json": str(json_path), "errors": errors}


# ---------------------------------------------------------------- predict

def _labeled_sets(cfg: PipelineConfig, cases: list[CaseManifest],
                  features: FeatureMatrix):
    by_id = {c.case_id: c for c in cases}
    ids = [c for c in features.case_ids if c in by_id]
    labeled_ids = [c for c in ids
                   if by_id[c].labeled and by_id[c].dataset_tag
                   not in cfg.external_tags]
    labeled = LabeledSet(
        features=features.subset_cases(labeled_ids),
        labels=np.array([label_os(by_id[c].survival_years)
                         for c in labeled_ids]))
    externals = {}
    for tag in cfg.external_tags:
        eids = [c for c in ids if by_id[c].dataset_tag == tag
                and by_id[c].labeled]
        if eids:
            externals[tag] = LabeledSet(
                features=features.subset_cases(eids),
                labels=np.array([label_os(by_id[c].survival_years)
                                 for c in eids]))
    pool_ids = [c for c in ids if by_id[c].dataset_tag in cfg.unlabeled_tags]
    pool = features.subset_cases(pool_ids) if pool_ids else None
    return labeled, externals, pool


def _flatten_result(res: PipelineResult) -> dict:
    flat = {}
    for key in METRIC_KEYS:
        flat[f"val_{key}_mean"] = res.validation[key]["mean"]
        flat[f"val_{key}_std"] = res.validation[key]["std"]
    for tag, metrics in res.externals.items():
        for key in METRIC_KEYS:
            flat[f"ext_{tag}_{key}_mean"] = metrics[key]["mean"]
            flat[f"ext_{tag}_{key}_std"] = metrics[key]["std"]
    return flat


def stage_predict(cfg: PipelineConfig, cases: list[CaseManifest],
                  mask_sources: list[str] | None = None) -> dict:
    out = Path(cfg.out_dir)
    chash = cfg.hash()
    version = default_registry().version
    mask_sources = mask_sources or cfg.mask_sources
    rows, errors = [], {}
    for source in mask_sources:
        fpath = out / f"features_{source}.csv"
        if not fpath.exists():
            errors[source] = "missing feature matrix"
            continue
        features = FeatureMatrix.from_csv(fpath)
        labeled, externals, pool = _labeled_sets(cfg, cases, features)
        for rdict in cfg.reducers:
            rspec = ReducerSpec(**{"seed": cfg.seed, **rdict})
            for cdict in cfg.classifiers:
                cspec = ClassifierSpec(**{"seed": cfg.seed, **cdict})
                for paradigm in cfg.paradigms:
                    key = f"{source}/{rspec.method}/{cspec.method}/{paradigm}"
                    try:
                        if paradigm == "SL":
                            res = run_sl(rspec, cspec, labeled, externals,
                                         k=cfg.folds, seed=cfg.seed)
                        else:
                            if pool is None or not pool.case_ids:
                                errors[key] = "no unlabeled pool"
                                continue
                            res = run_ssl(rspec, cspec, labeled, pool,
                                          externals, k=cfg.folds,
                                          seed=cfg.seed,
                                          confidence_tau=cfg.confidence_tau)
                    except (RadstabError, ValueError) as exc:
                        errors[key] = f"{type(exc).__name__}: {exc}"
                        continue
                    rows.append({"mask_source": source,
                                 "reducer": rspec.method,
                                 "classifier": cspec.method,
                                 "paradigm": paradigm,
                                 **_flatten_result(res),
                                 "config_hash": chash,
                                 "registry_version": version})
    fieldnames = ["mask_source", "reducer", "classifier", "paradigm"]
    metric_cols: list[str] = []
    for row in rows:
        for col in row:
            if col not in fieldnames and col not in metric_cols:
                metric_cols.append(col)
    csv_path = out / "prediction.csv"
    with open(csv_path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames + metric_cols)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    json_path = out / "prediction.json"
    with open(json_path, "w") as f:
        json.dump({"config_hash": chash, "registry_version": version,
                   "rows": rows, "errors": errors}, f, indent=2,
                  sort_keys=True)
    return {"csv": str(csv_path), "json": str(json_path),
            "n_rows": len(rows), "errors": errors}


# ---------------------------------------------------------------- ratings

def load_ratings_csv(path) -> dict[str, np.ndarray]:
    """Parse `rater,model,question,score` into per-question rater x model
    matrices."""
    from .errors import MalformedRatings
    table: dict[str, dict[str, dict[str, float]]] = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        expected = {"rater", "model", "question", "score"}
        if reader.fieldnames is None or set(reader.fieldnames) != expected:
            raise MalformedRatings(
                f"header must be rater,model,question,score, "
                f"got {reader.fieldnames}")
        for rec in reader:
            try:
                score = float(rec["score"])
            except ValueError as exc:
                raise MalformedRatings(f"bad score {rec['score']!r}") from exc
            table.setdefault(rec["question"], {}).setdefault(
                rec["rater"], {})[rec["model"]] = score
    out = {}
    for question, raters in table.items():
        models = sorted({m for r in raters.values() for m in r})
        names = sorted(raters)
        if len(names) < 2 or len(models) < 2:
            raise MalformedRatings(
                f"question {question!r} needs >= 2 raters and >= 2 models")
        mat = np.empty((len(names), len(models)))
        for i, rater in enumerate(names):
            for j, model in enumerate(models):
                if model not in raters[rater]:
                    raise MalformedRatings(
                        f"missing rating: {rater}/{model}/{question}")
                mat[i, j] = raters[rater][model]
        out[question] = mat
    return out


def stage_ratings(cfg: PipelineConfig, ratings_path) -> dict:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    per_question = load_ratings_csv(ratings_path)
    report = {"questions": {}, "config_hash": cfg.hash()}
    pooled = []
    for question in sorted(per_question):
        mat = per_question[question]
        chi2, p = friedman(mat)
        report["questions"][question] = {
            "chi2": chi2, "p": p, "n_raters": mat.shape[0],
            "n_models": mat.shape[1]}
        pooled.append(mat)
    overall = np.vstack(pooled)
    chi2, p = friedman(overall)
    report["overall"] = {"chi2": chi2, "p": p, "n_rows": overall.shape[0]}
    path = out / "ratings_report.json"
    with open(path, "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
    return {"report": str(path), **report}


# ----------------------------------------------------------------- verify

def stage_verify(cfg: PipelineConfig) -> dict:
    """Confirm every report in out_dir embeds this config's hash."""
    out = Path(cfg.out_dir)
    chash = cfg.hash()
    checked, mismatched = [], []
    for path in sorted(out.glob("*.json")):
        try:
            with open(path) as f:
                payload = json.load(f)
        except (json.JSONDecodeError, OSError):
            continue
        embedded = payload.get("config_hash") if isinstance(payload, dict) \
            else None
        if embedded is None:
            continue
        checked.append(path.name)
        if embedded != chash:
            mismatched.append(path.name)
    csv_hashes = []
    for path in sorted(out.glob("*.csv")):
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames and "config_hash" in reader.fieldnames:
                checked.append(path.name)
                for row in reader:
                    if row["config_hash"] != chash:
                        mismatched.append(path.name)
                        break
        csv_hashes.append(path.name)
    return {"config_hash": chash, "checked": checked,
            "mismatched": mismatched, "ok": not mismatched}


def manifest_for(cfg: PipelineConfig) -> list[CaseManifest]:
    return load_manifest(cfg.manifest)
