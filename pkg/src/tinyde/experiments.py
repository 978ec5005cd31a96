"""Experiment drivers: benchmark regression, OoD study, cost and CiM sweeps.

Each driver is deterministic under a fixed seed, writes machine-readable
CSVs plus a JSON manifest (config, seeds, package version) into its
output directory, and returns its summary rows for programmatic use.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from . import cim as cim_mod
from . import costmodel
from .data import (Dataset, corrupt_gaussian, corrupt_permute_features,
                   destandardize_target, load_csv, make_folds,
                   standardize, synth_classification, synth_regression)
from .ensemble import TinyDEModel
from .errors import ConfigError, DataError
from .training import TrainConfig, train_full, train_two_phase
from .uncertainty import (histogram, histogram_to_csv, max_disagreement,
                          predictive_entropy, regression_nll)

DATA_DIR_ENV = "TINYDE_DATA_DIR"


@dataclass
class UCIDatasetInfo:
    name: str
    filename: str
    N: int
    Q: int
    n_folds: int
    hidden_width: int
    paper_rmse: float
    paper_rmse_std: float


# Benchmark registry; each file is a plain CSV of features followed by the
# regression target as the last column (scripts/fetch_uci.py prepares them).
UCI_DATASETS = {
    "boston": UCIDatasetInfo("Boston Housing", "boston.csv", 506, 13, 20, 50, 2.97, 0.46),
    "concrete": UCIDatasetInfo("Concrete Strength", "concrete.csv", 1030, 8, 20, 50, 5.51, 0.41),
    "energy": UCIDatasetInfo("Energy Efficiency", "energy.csv", 768, 8, 20, 50, 1.53, 0.38),
    "kin8nm": UCIDatasetInfo("Kin8nm", "kin8nm.csv", 8192, 8, 20, 50, 0.07, 0.00),
    "naval": UCIDatasetInfo("Naval Propulsion", "naval.csv", 11934, 16, 20, 50, 0.00, 0.00),
    "power": UCIDatasetInfo("Power Plant", "power.csv", 9568, 4, 20, 50, 4.48, 0.18),
    "protein": UCIDatasetInfo("Protein Structure", "protein.csv", 45730, 9, 5, 100, 3.92, 0.03),
    "wine": UCIDatasetInfo("Wine Quality Red", "wine.csv", 1599, 11, 20, 50, 0.64, 0.05),
    "yacht": UCIDatasetInfo("Yacht Hydrodynamics", "yacht.csv", 308, 6, 20, 50, 3.22, 1.59),
    "year": UCIDatasetInfo("Year Prediction MSD", "year.csv", 515345, 90, 1, 100, 8.53, float("nan")),
}


@dataclass
class ExperimentConfig:
    task: str = "uci-regression"
    datasets: list[str] = field(default_factory=list)
    data_dir: str = ""
    M: int = 5
    hidden_width: int = 0        # 0: per-dataset default
    epochs: int = 40
    batch_size: int = 32
    learning_rate: float = 1e-3
    bootstrap: bool = False
    mode: str = "sequential"
    seed: int = 0
    jobs: int = 1
    out_dir: str = "results"
    # ood task knobs
    sigma_scale: float = 2.0
    ensemble_sizes: list[int] = field(default_factory=lambda: [1, 5, 10])
    ood_epochs: int = 80
    # cost/cim knobs
    layer_spec: str = ""         # path; empty: shipped resnet32 spec
    M_range: list[int] = field(default_factory=lambda: list(range(1, 11)))
    bit_widths: list[int] = field(default_factory=lambda: [4, 6, 8, 10, 12])

    _KNOWN_TASKS = ("uci-regression", "ood-classification", "cost-census", "cim-study")

    def validate(self) -> None:
        if self.task not in self._KNOWN_TASKS:
            raise ConfigError(f"unknown task {self.task!r}; expected one of {self._KNOWN_TASKS}")
        if self.M < 1:
            raise ConfigError("M must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**doc)
        cfg.validate()
        return cfg


def resolve_data_dir(source) -> str:
    """Data directory from a config, a path, or the environment, in that order."""
    explicit = source.data_dir if isinstance(source, ExperimentConfig) else source
    if explicit:
        return str(explicit)
    return os.environ.get(DATA_DIR_ENV, "data")


def write_run_manifest(out_dir, cfg: ExperimentConfig) -> None:
    os.makedirs(out_dir, exist_ok=True)
    manifest = {"config": asdict(cfg), "version": __version__}
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


# ---------------------------------------------------------------------------
# UCI-style regression reproduction


def _train_config(cfg: ExperimentConfig, seed: int, M: int) -> TrainConfig:
    return TrainConfig(
        epochs=cfg.epochs, batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate, seed=seed, loss="mse",
        bootstrap=cfg.bootstrap,
        member_seeds=[seed * 1000 + m for m in range(M)],
    )


def run_regression_fold(dataset: Dataset, train_idx: np.ndarray,
                        test_idx: np.ndarray, cfg: ExperimentConfig,
                        hidden_width: int, fold_seed: int) -> dict:
    """One train/test split: two-phase ensemble plus an M=1 ablation."""
    train = Dataset(dataset.X[train_idx], dataset.y[train_idx], dataset.name)
    test = Dataset(dataset.X[test_idx], dataset.y[test_idx], dataset.name)
    train_s, test_s, params = standardize(train, test)
    sigma_y = float(params.y_std[0])

    hidden = [hidden_width, hidden_width]
    model = TinyDEModel.build(train_s.Q, hidden, 1, cfg.M,
                              task="regression", seed=fold_seed)
    train_two_phase(model, train_s.X, train_s.y,
                    _train_config(cfg, fold_seed, cfg.M))
    mean_s, samples_s = model.predict(test_s.X)
    pred = destandardize_target(mean_s, params)
    rmse = float(np.sqrt(np.mean((pred - test.y) ** 2)))
    if cfg.M >= 2:
        _, nll = regression_nll(samples_s, test_s.y, target_scale=sigma_y)
    else:
        nll = float("nan")

    single = TinyDEModel.build(train_s.Q, hidden, 1, 1,
                               task="regression", seed=fold_seed)
    train_full(single, train_s.X, train_s.y, _train_config(cfg, fold_seed, 1))
    mean1, _ = single.predict(test_s.X)
    pred1 = destandardize_target(mean1, params)
    rmse1 = float(np.sqrt(np.mean((pred1 - test.y) ** 2)))
    return {"rmse": rmse, "nll": nll, "rmse_single": rmse1}


def _fold_job(args):
    dataset, tr, te, cfg, width, fold_seed = args
    return run_regression_fold(dataset, tr, te, cfg, width, fold_seed)


def run_uci_dataset(key: str, cfg: ExperimentConfig, dataset: Dataset | None = None):
    """All folds of one benchmark dataset; returns per-fold rows + summary."""
    info = UCI_DATASETS[key]
    if dataset is None:
        path = os.path.join(resolve_data_dir(cfg), info.filename)
        if not os.path.exists(path):
            raise DataError(
                f"dataset file not found: {path} (expected {info.name} as CSV; "
                f"set --data-dir or ${DATA_DIR_ENV}, see scripts/fetch_uci.py)"
            )
        dataset = load_csv(path, target_cols=-1, name=info.name)
    width = cfg.hidden_width or info.hidden_width
    folds = make_folds(dataset, info.n_folds, cfg.seed)
    jobs_args = [
        (dataset, tr, te, cfg, width, cfg.seed * 100_003 + fold)
        for fold, (tr, te) in enumerate(folds)
    ]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_fold_job, jobs_args))
    else:
        results = [_fold_job(a) for a in jobs_args]
    rows = [{"fold": i, **r} for i, r in enumerate(results)]
    rmses = np.array([r["rmse"] for r in results])
    nlls = np.array([r["nll"] for r in results])
    singles = np.array([r["rmse_single"] for r in results])
    n = len(results)
    summary = {
        "dataset": info.name,
        "key": key,
        "N": dataset.N,
        "Q": dataset.Q,
        "folds": n,
        "M": cfg.M,
        "rmse_mean": float(rmses.mean()),
        "rmse_stderr": float(rmses.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
        "nll_mean": float(np.nanmean(nlls)),
        "nll_stderr": float(np.nanstd(nlls, ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
        "rmse_single_mean": float(singles.mean()),
        "paper_rmse": info.paper_rmse,
        "paper_rmse_std": info.paper_rmse_std,
    }
    return rows, summary


def cmd_reproduce_uci(cfg: ExperimentConfig):
    cfg.validate()
    write_run_manifest(cfg.out_dir, cfg)
    keys = cfg.datasets or ["boston", "energy", "concrete", "yacht"]
    summaries = []
    for key in keys:
        if key not in UCI_DATASETS:
            raise ConfigError(f"unknown dataset key {key!r}")
        rows, summary = run_uci_dataset(key, cfg)
        _write_dict_csv(os.path.join(cfg.out_dir, f"uci_{key}_folds.csv"), rows)
        summaries.append(summary)
    _write_dict_csv(os.path.join(cfg.out_dir, "uci_summary.csv"), summaries)
    return summaries


# ---------------------------------------------------------------------------
# OoD classification study


# Blob layout for the OoD study.  Four classes: isotropic noise then lands
# between class regions, which raises entropy; with only two blobs it mostly
# pushes points deeper into confidently-classified half-spaces.
OOD_CLASSES = 4
OOD_FEATURES = 8


def train_blob_classifier(M: int, seed: int, epochs: int = 80,
                          n_train: int = 1024, hidden=(16, 16),
                          bootstrap: bool = True):
    """Two-phase-trained blobs classifier used by the OoD study."""
    train = synth_classification(n_train, seed, n_classes=OOD_CLASSES,
                                 n_features=OOD_FEATURES)
    labels = train.y[:, 0].astype(np.int64)
    model = TinyDEModel.build(train.Q, list(hidden), OOD_CLASSES, M,
                              task="classification", seed=seed)
    tcfg = TrainConfig(epochs=epochs, batch_size=32, learning_rate=3e-3,
                       seed=seed, loss="cross_entropy", bootstrap=bootstrap,
                       member_seeds=[seed * 1000 + m for m in range(M)])
    train_two_phase(model, train.X, labels, tcfg)
    return model, train


def ood_study(seed: int, ensemble_sizes, sigma_scale: float = 2.0,
              n_eval: int = 512, epochs: int = 80):
    """Mean entropy / disagreement on ID, noise-corrupted, and
    feature-permuted evaluation data for each ensemble size."""
    results = []
    eval_ds = synth_classification(n_eval, seed, n_classes=OOD_CLASSES,
                                   n_features=OOD_FEATURES,
                                   sample_seed=seed + 7919)
    eval_sets = {
        "id": eval_ds.X,
        "gaussian": corrupt_gaussian(eval_ds.X, sigma_scale, seed + 13),
        "permuted": corrupt_permute_features(eval_ds.X, seed + 17),
    }
    for M in ensemble_sizes:
        model, _ = train_blob_classifier(M, seed, epochs=epochs)
        per_m = {"M": M, "seed": seed}
        hists = {}
        for split, X in eval_sets.items():
            _, probs = model.predict(X)
            ent = predictive_entropy(probs)
            _, md = max_disagreement(probs)
            per_m[f"{split}_entropy_mean"] = float(ent.mean())
            per_m[f"{split}_disagreement_mean"] = float(md.mean())
            hists[split] = (ent, md)
        base = per_m["id_entropy_mean"]
        for split in ("gaussian", "permuted"):
            per_m[f"{split}_entropy_rel_change"] = \
                (per_m[f"{split}_entropy_mean"] - base) / base if base > 0 else float("inf")
        results.append((per_m, hists))
    return results


def cmd_ood(cfg: ExperimentConfig):
    cfg.validate()
    write_run_manifest(cfg.out_dir, cfg)
    results = ood_study(cfg.seed, cfg.ensemble_sizes, cfg.sigma_scale,
                        epochs=cfg.ood_epochs)
    rows = []
    for per_m, hists in results:
        rows.append(per_m)
        for split, (ent, md) in hists.items():
            ent_max = float(np.log(OOD_CLASSES)) * 1.01
            edges, counts = histogram(ent, bins=30, value_range=(0.0, ent_max))
            histogram_to_csv(
                os.path.join(cfg.out_dir, f"entropy_M{per_m['M']}_{split}.csv"),
                edges, counts)
            edges, counts = histogram(md, bins=30, value_range=(0.0, 1.0))
            histogram_to_csv(
                os.path.join(cfg.out_dir, f"disagreement_M{per_m['M']}_{split}.csv"),
                edges, counts)
    _write_dict_csv(os.path.join(cfg.out_dir, "ood_summary.csv"), rows)
    return rows


# ---------------------------------------------------------------------------
# Cost census and CiM fidelity sweeps


def cmd_cost(cfg: ExperimentConfig):
    cfg.validate()
    write_run_manifest(cfg.out_dir, cfg)
    spec = (costmodel.load_layer_spec(cfg.layer_spec) if cfg.layer_spec
            else costmodel.resnet32_spec())
    rows = costmodel.emit_cost_curves(spec, cfg.M_range)
    costmodel.write_cost_csv(os.path.join(cfg.out_dir, "cost_curves.csv"), rows)
    return rows


def cim_fidelity_sweep(model: TinyDEModel, X: np.ndarray, bit_widths):
    """Mean-absolute-error and RMSE of the quantized pipeline vs the exact
    path, per symmetric ADC/DAC bit width (plus the ideal row)."""
    exact = model.forward_all_sequential(X, train=False)
    quant_base = cim_mod.calibrate(model, X)
    rows = []
    for bits in list(bit_widths) + ["ideal"]:
        if bits == "ideal":
            spec = cim_mod.QuantSpec.ideal()
        else:
            spec = cim_mod.QuantSpec(dac_bits=bits, adc_bits=bits,
                                     dac_range=quant_base.dac_range,
                                     adc_range=quant_base.adc_range)
        out = cim_mod.run_sequential_inference(model, X, spec)
        err = out - exact
        rows.append({
            "bits": bits,
            "mean_abs_error": float(np.abs(err).mean()),
            "rmse_vs_exact": float(np.sqrt(np.mean(err ** 2))),
        })
    return rows


def cmd_cim(cfg: ExperimentConfig):
    cfg.validate()
    write_run_manifest(cfg.out_dir, cfg)
    ds = synth_regression(512, cfg.seed)
    train, test, _ = standardize(
        Dataset(ds.X[:384], ds.y[:384]), Dataset(ds.X[384:], ds.y[384:]))
    width = cfg.hidden_width or 50
    model = TinyDEModel.build(train.Q, [width, width], 1, cfg.M, seed=cfg.seed)
    train_two_phase(model, train.X, train.y, _train_config(cfg, cfg.seed, cfg.M))
    rows = cim_fidelity_sweep(model, test.X, cfg.bit_widths)
    # task-level error: RMSE against targets through the quantized path
    exact_pred = model.forward_all_sequential(test.X).mean(axis=0)
    exact_rmse = float(np.sqrt(np.mean((exact_pred - test.y) ** 2)))
    quant_base = cim_mod.calibrate(model, test.X)
    for row in rows:
        bits = row["bits"]
        if bits == "ideal":
            spec = cim_mod.QuantSpec.ideal()
        else:
            spec = cim_mod.QuantSpec(dac_bits=bits, adc_bits=bits,
                                     dac_range=quant_base.dac_range,
                                     adc_range=quant_base.adc_range)
        pred = cim_mod.run_sequential_inference(model, test.X, spec).mean(axis=0)
        row["task_rmse"] = float(np.sqrt(np.mean((pred - test.y) ** 2)))
        row["exact_task_rmse"] = exact_rmse
    _write_dict_csv(os.path.join(cfg.out_dir, "cim_fidelity.csv"), rows)
    return rows


# ---------------------------------------------------------------------------
# Output helpers


def _fmt(v):
    if isinstance(v, float):
        return repr(float(v))
    return v


def _write_dict_csv(path, rows: list[dict]) -> None:
    if not rows:
        return
    keys = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(keys)
        for row in rows:
            writer.writerow([_fmt(row.get(k, "")) for k in keys])


def format_summary_table(rows: list[dict]) -> str:
    """Fixed-width text rendering of a summary row list."""
    if not rows:
        return "(no results)\n"
    keys = list(rows[0].keys())
    cells = [[str(k) for k in keys]]
    for row in rows:
        cells.append([
            f"{row.get(k):.4f}" if isinstance(row.get(k), float) else str(row.get(k, ""))
            for k in keys
        ])
    widths = [max(len(r[i]) for r in cells) for i in range(len(keys))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
             for row in cells]
    return "\n".join(lines) + "\n"
