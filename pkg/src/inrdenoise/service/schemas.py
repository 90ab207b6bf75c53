"""Pydantic request/response models for the denoising service."""

from __future__ import annotations

import math

from pydantic import BaseModel, Field

from ..experiments import ExperimentConfig
from ..models import ModelConfig, default_model_config
from ..training import TrainConfig, default_train_config

# PSNR of identical images is infinite; JSON gets the "inf" sentinel string.
Metric = float | str | None


def sanitize_metric(x: float | None) -> Metric:
    if x is None:
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


class ModelSpec(BaseModel):
    kind: str = "siren"
    width: int | None = Field(default=None, ge=1)
    depth: int | None = Field(default=None, ge=1)
    omega0: float | None = Field(default=None, gt=0)
    wire_omega: float | None = Field(default=None, gt=0)
    wire_s: float | None = Field(default=None, gt=0)
    ff_count: int | None = Field(default=None, ge=1)
    ff_scale: float | None = Field(default=None, gt=0)

    def to_config(self) -> ModelConfig:
        overrides = {k: v for k, v in self.model_dump().items()
                     if k != "kind" and v is not None}
        return default_model_config(self.kind, **overrides)


class TrainSpec(BaseModel):
    iterations: int = Field(default=2000, ge=1)
    lr: float | None = Field(default=None, gt=0)
    reg_lambda: float = Field(default=0.0, ge=0)
    reg: str = "none"
    its_n: int = Field(default=200, ge=0)
    log_every: int = Field(default=50, ge=1)

    def to_config(self, model_kind: str) -> TrainConfig:
        overrides = dict(iterations=self.iterations, lam=self.reg_lambda,
                         reg_kind=self.reg, its_period=self.its_n,
                         log_every=self.log_every)
        if self.lr is not None:
            overrides["lr"] = self.lr
        return default_train_config(model_kind, **overrides)


class ExperimentRequest(BaseModel):
    input: str = "phantom:composite"
    sigma: float = Field(default=25.0, ge=0)
    model: ModelSpec = Field(default_factory=ModelSpec)
    train: TrainSpec = Field(default_factory=TrainSpec)
    out: str = "out"
    runs: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0)
    phantom_size: tuple[int, int] = (96, 96)

    def to_config(self) -> ExperimentConfig:
        model = self.model.to_config()
        return ExperimentConfig(input=self.input, sigma255=self.sigma,
                                model=model,
                                train=self.train.to_config(model.kind),
                                output_dir=self.out, runs_per_cell=self.runs,
                                base_seed=self.seed,
                                phantom_size=self.phantom_size)


class RunSummaryModel(BaseModel):
    model: str
    its_period: int
    sigma255: float
    seed: int
    last_psnr: Metric
    last_ssim: Metric
    best_psnr: Metric
    best_ssim: Metric
    wall_seconds: float


class DenoiseResponse(BaseModel):
    summaries: list[RunSummaryModel]
    artifacts: list[str]


class AblateRequest(BaseModel):
    base: ExperimentRequest = Field(default_factory=ExperimentRequest)
    n_values: list[int] = Field(default=[0, 100, 200, 300, 400])
    workers: int = Field(default=1, ge=1)


class AblateResponse(BaseModel):
    csv_path: str
    svg_path: str
    summaries: list[RunSummaryModel]


class CompareRequest(BaseModel):
    base: ExperimentRequest = Field(default_factory=ExperimentRequest)
    train_a: TrainSpec = Field(default_factory=lambda: TrainSpec(its_n=0))
    train_b: TrainSpec = Field(default_factory=lambda: TrainSpec(its_n=200))
    sigmas: list[float] | None = None
    workers: int = Field(default=1, ge=1)


class CompareCell(BaseModel):
    input: str
    sigma255: float
    seed: int
    a_psnr: Metric
    a_ssim: Metric
    b_psnr: Metric
    b_ssim: Metric
    psnr_delta: Metric
    ssim_delta: Metric


class CompareResponse(BaseModel):
    cells: list[CompareCell]
    mean_psnr_delta: float
    mean_ssim_delta: float | None
    psnr_t: Metric
    psnr_p: float
    ssim_t: Metric = None
    ssim_p: float | None = None
    significance: str
    csv_path: str


class TheoremRequest(BaseModel):
    delta: float
    dim: int = Field(default=64, ge=2)
    trials: int = Field(default=10000, ge=1)
    seed: int = Field(default=0, ge=0)


class TheoremResponse(BaseModel):
    delta: float
    dim: int
    trials: int
    seed: int
    all_hold: bool
    min_ratio: float
    min_bound_margin: float
    bound_violations: int
    improvement_violations: int
    elapsed_seconds: float


class MetricsRequest(BaseModel):
    path_a: str
    path_b: str


class MetricsResponse(BaseModel):
    psnr: Metric
    ssim: Metric
    sigma_hat: float


class HealthResponse(BaseModel):
    status: str
    version: str
