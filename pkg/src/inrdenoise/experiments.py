"""Experiment orchestration: denoising runs, the N-sweep, and paired comparison.

This layer owns seeding, artifact files, and sweep parallelism; the service
endpoints and the CLI are thin wrappers around it. A run seed s determines
the model init (seed s) and the noise field (a sub-stream derived from s and
the cell index), so two variants trained at the same seed share both and
differ only in their training configuration.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .imaging import (Image, add_gaussian_noise, derive_seed, load_pnm,
                      save_pnm, synth_phantom, PHANTOM_KINDS)
from .metrics import MetricsRecord, error_map, mad_sigma, paired_t_test, psnr, ssim
from .models import ModelConfig
from .reports import (svg_line_chart, write_metrics_csv, write_rows_csv, write_svg)
from .training import TrainConfig, train

SUMMARY_HEADER = ["model", "its_period", "sigma255", "seed",
                  "last_psnr", "last_ssim", "best_psnr", "best_ssim", "wall_seconds"]
ABLATION_HEADER = ["n", "seed", "iteration", "loss", "psnr_clean", "ssim_clean",
                   "psnr_noisy", "sigma_hat"]
COMPARE_HEADER = ["input", "sigma255", "seed", "a_psnr", "a_ssim",
                  "b_psnr", "b_ssim", "psnr_delta", "ssim_delta"]


@dataclass
class ExperimentConfig:
    input: str = "phantom:composite"
    sigma255: float = 25.0
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    output_dir: str = "out"
    runs_per_cell: int = 1
    base_seed: int = 0
    phantom_size: tuple[int, int] = (96, 96)

    def __post_init__(self):
        if self.runs_per_cell < 1:
            raise ValueError("runs_per_cell must be >= 1")
        if self.base_seed < 0:
            raise ValueError("base_seed must be >= 0")
        if self.sigma255 < 0:
            raise ValueError("sigma255 must be >= 0")


@dataclass
class RunSummary:
    model_kind: str
    its_period: int
    sigma255: float
    seed: int
    last_psnr: float
    last_ssim: float | None
    best_psnr: float
    best_ssim: float | None
    wall_seconds: float

    def row(self) -> list:
        return [self.model_kind, self.its_period, self.sigma255, self.seed,
                self.last_psnr, self.last_ssim, self.best_psnr, self.best_ssim,
                round(self.wall_seconds, 3)]


def resolve_inputs(spec: str, phantom_size: tuple[int, int]) -> list[tuple[str, Image]]:
    """Expand a comma-separated input spec into named clean images.

    Each entry is either ``phantom:<kind>`` or a path to a PGM/PPM file.
    """
    out = []
    for part in str(spec).split(","):
        part = part.strip()
        if not part:
            continue
        if part.startswith("phantom:"):
            kind = part.split(":", 1)[1]
            h, w = phantom_size
            out.append((kind, synth_phantom(h, w, kind)))
        else:
            if not os.path.isfile(part):
                raise FileNotFoundError(f"input path not found: {part}")
            name = os.path.splitext(os.path.basename(part))[0]
            out.append((name, load_pnm(part)))
    if not out:
        raise ValueError(f"input spec resolved to nothing: {spec!r}")
    return out


def _noise_seed(run_seed: int, cell_id: int) -> int:
    return derive_seed(run_seed, cell_id + 1)


def _seeds(cfg: "ExperimentConfig") -> range:
    return range(cfg.base_seed, cfg.base_seed + cfg.runs_per_cell)


def _summarize(kind: str, its_period: int, sigma: float, seed: int,
               records: list[MetricsRecord], wall: float) -> RunSummary:
    psnrs = [r.psnr_clean for r in records if r.psnr_clean is not None]
    ssims = [r.ssim_clean for r in records if r.ssim_clean is not None]
    return RunSummary(model_kind=kind, its_period=its_period, sigma255=sigma,
                      seed=seed,
                      last_psnr=psnrs[-1] if psnrs else float("nan"),
                      last_ssim=ssims[-1] if ssims else None,
                      best_psnr=max(psnrs) if psnrs else float("nan"),
                      best_ssim=max(ssims) if ssims else None,
                      wall_seconds=wall)


def _train_cell(model_cfg: ModelConfig, train_cfg: TrainConfig, clean: Image,
                sigma: float, seed: int, cell_id: int):
    """One seeded training run; returns (result, noisy sample, summary)."""
    sample = add_gaussian_noise(clean, sigma, _noise_seed(seed, cell_id))
    cfg = replace(model_cfg, seed=seed, out_channels=clean.channels)
    t0 = time.perf_counter()
    result = train(cfg, train_cfg, sample.noisy, clean)
    wall = time.perf_counter() - t0
    summary = _summarize(cfg.kind, train_cfg.its_period, sigma, seed,
                         result.records, wall)
    return result, sample, summary


def _error_map_image(pred: Image, clean: Image) -> Image:
    e = error_map(pred, clean)
    if e.shape[2] > 1:
        e = e.mean(axis=2, keepdims=True)
    return Image(np.clip(0.5 + e, 0.0, 1.0))


@dataclass
class DenoiseOutput:
    summaries: list[RunSummary]
    artifacts: list[str]
    records: list[list[MetricsRecord]]


def run_denoise(cfg: ExperimentConfig) -> DenoiseOutput:
    """Train on a single input and write the artifact set per seed."""
    inputs = resolve_inputs(cfg.input, cfg.phantom_size)
    if len(inputs) != 1:
        raise ValueError(f"denoise expects exactly one input, got {len(inputs)}")
    name, clean = inputs[0]
    os.makedirs(cfg.output_dir, exist_ok=True)
    ext = ".pgm" if clean.channels == 1 else ".ppm"

    summaries, artifacts, all_records = [], [], []
    for seed in _seeds(cfg):
        result, sample, summary = _train_cell(cfg.model, cfg.train, clean,
                                              cfg.sigma255, seed, cell_id=0)
        tag = f"_seed{seed}" if cfg.runs_per_cell > 1 else ""

        def out(fname: str) -> str:
            path = os.path.join(cfg.output_dir, fname)
            artifacts.append(path)
            return path

        save_pnm(result.image, out(f"denoised{tag}{ext}"))
        save_pnm(sample.noisy, out(f"noisy{tag}{ext}"))
        save_pnm(_error_map_image(result.image, clean), out(f"error_map{tag}.pgm"))
        write_metrics_csv(result.records, out(f"metrics{tag}.csv"))
        summaries.append(summary)
        all_records.append(result.records)
    summary_path = os.path.join(cfg.output_dir, "summary.csv")
    write_rows_csv(SUMMARY_HEADER, [s.row() for s in summaries], summary_path)
    artifacts.append(summary_path)
    return DenoiseOutput(summaries=summaries, artifacts=artifacts, records=all_records)


def _ablation_cell(args):
    cfg, n, seed = args
    train_cfg = replace(cfg.train, its_period=n)
    name, clean = resolve_inputs(cfg.input, cfg.phantom_size)[0]
    result, _, summary = _train_cell(cfg.model, train_cfg, clean,
                                     cfg.sigma255, seed, cell_id=0)
    return n, seed, result.records, summary


@dataclass
class AblationOutput:
    csv_path: str
    svg_path: str
    rows: list[list]
    summaries: list[RunSummary]


def run_ablation(cfg: ExperimentConfig, n_values: list[int],
                 workers: int = 1) -> AblationOutput:
    """One run per (substitution period, seed); emits a long CSV and a chart."""
    if not n_values:
        raise ValueError("n_values must be non-empty")
    if any(n < 0 for n in n_values):
        raise ValueError("n_values must be >= 0")
    inputs = resolve_inputs(cfg.input, cfg.phantom_size)
    if len(inputs) != 1:
        raise ValueError(f"ablate expects exactly one input, got {len(inputs)}")
    os.makedirs(cfg.output_dir, exist_ok=True)

    cells = [(cfg, n, seed) for n in n_values for seed in _seeds(cfg)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_ablation_cell, cells))
    else:
        results = [_ablation_cell(c) for c in cells]
    results.sort(key=lambda r: (r[0], r[1]))

    rows = []
    for n, seed, records, _ in results:
        for r in records:
            rows.append([n, seed, r.iteration, r.loss, r.psnr_clean, r.ssim_clean,
                         r.psnr_noisy, r.sigma_hat])
    csv_path = os.path.join(cfg.output_dir, "ablation.csv")
    write_rows_csv(ABLATION_HEADER, rows, csv_path)

    # Chart: clean-reference PSNR vs iteration, seed-averaged, one line per N.
    series: dict[str, list[tuple[float, float]]] = {}
    for n in sorted(set(n for n, _, _, _ in results)):
        acc: dict[int, list[float]] = {}
        for cn, _, records, _ in results:
            if cn != n:
                continue
            for r in records:
                if r.psnr_clean is not None:
                    acc.setdefault(r.iteration, []).append(r.psnr_clean)
        line = [(float(i), float(np.mean(v))) for i, v in sorted(acc.items())]
        series[f"N={n}" if n > 0 else "N=0 (off)"] = line
    svg = svg_line_chart(series, title="Substitution period sweep",
                         x_label="iteration", y_label="PSNR (dB)")
    svg_path = os.path.join(cfg.output_dir, "ablation.svg")
    write_svg(svg, svg_path)
    summaries = [s for _, _, _, s in results]
    return AblationOutput(csv_path=csv_path, svg_path=svg_path, rows=rows,
                          summaries=summaries)


def _compare_cell(args):
    cfg_a, cfg_b, name, clean, sigma, seed, cell_id = args
    res_a, _, _ = _train_cell(cfg_a.model, cfg_a.train, clean, sigma, seed, cell_id)
    res_b, _, _ = _train_cell(cfg_b.model, cfg_b.train, clean, sigma, seed, cell_id)
    small = min(clean.height, clean.width) < 11
    return [name, sigma, seed,
            psnr(res_a.image, clean), None if small else ssim(res_a.image, clean),
            psnr(res_b.image, clean), None if small else ssim(res_b.image, clean)]


@dataclass
class CompareOutput:
    rows: list[list]
    mean_psnr_delta: float
    mean_ssim_delta: float | None
    psnr_t: float
    psnr_p: float
    ssim_t: float | None
    ssim_p: float | None
    significance: str
    csv_path: str


def significance_marker(p: float) -> str:
    if p <= 0.001:
        return "**"
    if p <= 0.05:
        return "*"
    return ""


def run_compare(cfg_a: ExperimentConfig, cfg_b: ExperimentConfig,
                sigmas: list[float] | None = None,
                workers: int = 1) -> CompareOutput:
    """Paired evaluation of two training variants over a shared input set."""
    inputs_a = resolve_inputs(cfg_a.input, cfg_a.phantom_size)
    inputs_b = resolve_inputs(cfg_b.input, cfg_b.phantom_size)
    if [n for n, _ in inputs_a] != [n for n, _ in inputs_b] or \
            cfg_a.phantom_size != cfg_b.phantom_size:
        raise ValueError("compare variants must resolve to the same input set")
    sigmas = list(sigmas) if sigmas else [cfg_a.sigma255]
    cells = []
    for ii, (name, clean) in enumerate(inputs_a):
        for si, sigma in enumerate(sigmas):
            for seed in _seeds(cfg_a):
                cells.append((cfg_a, cfg_b, name, clean, sigma, seed,
                              ii * len(sigmas) + si))
    if len(cells) < 2:
        raise ValueError(f"compare needs >= 2 paired cells, got {len(cells)}")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_compare_cell, cells))
    else:
        rows = [_compare_cell(c) for c in cells]
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    for r in rows:
        r.append(r[5] - r[3])
        r.append(None if r[4] is None else r[6] - r[4])

    a_psnr = np.array([r[3] for r in rows])
    b_psnr = np.array([r[5] for r in rows])
    psnr_t, psnr_p = paired_t_test(b_psnr, a_psnr)
    have_ssim = all(r[4] is not None for r in rows)
    if have_ssim:
        a_ssim = np.array([r[4] for r in rows])
        b_ssim = np.array([r[6] for r in rows])
        ssim_t, ssim_p = paired_t_test(b_ssim, a_ssim)
        mean_ssim_delta = float(np.mean(b_ssim - a_ssim))
    else:
        ssim_t = ssim_p = mean_ssim_delta = None

    os.makedirs(cfg_a.output_dir, exist_ok=True)
    csv_path = os.path.join(cfg_a.output_dir, "compare.csv")
    write_rows_csv(COMPARE_HEADER, rows, csv_path)
    return CompareOutput(rows=rows,
                         mean_psnr_delta=float(np.mean(b_psnr - a_psnr)),
                         mean_ssim_delta=mean_ssim_delta,
                         psnr_t=psnr_t, psnr_p=psnr_p,
                         ssim_t=ssim_t, ssim_p=ssim_p,
                         significance=significance_marker(psnr_p),
                         csv_path=csv_path)


def run_metrics_files(path_a: str, path_b: str) -> dict:
    """Standalone PSNR / SSIM / residual-noise estimate for two image files."""
    a = load_pnm(path_a)
    b = load_pnm(path_b)
    small = min(a.height, a.width) < 11
    return {
        "psnr": psnr(a, b),
        "ssim": None if small else ssim(a, b),
        "sigma_hat": mad_sigma(a.data - b.data),
    }
