"""FastAPI application exposing the experiment toolkit.

Endpoints run synchronously (FastAPI executes them in a worker threadpool)
and write artifacts on the server-side filesystem; responses carry the
resulting paths and summary numbers. Precondition violations surface as 400.
"""

from __future__ import annotations

import time

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..experiments import (RunSummary, run_ablation, run_compare, run_denoise,
                           run_metrics_files)
from ..snrlab import run_theorem1
from .schemas import (AblateRequest, AblateResponse, CompareCell,
                      CompareRequest, CompareResponse, DenoiseResponse,
                      ExperimentRequest, HealthResponse, MetricsRequest,
                      MetricsResponse, RunSummaryModel, TheoremRequest,
                      TheoremResponse, sanitize_metric)


def _summary_model(s: RunSummary) -> RunSummaryModel:
    return RunSummaryModel(model=s.model_kind, its_period=s.its_period,
                           sigma255=s.sigma255, seed=s.seed,
                           last_psnr=sanitize_metric(s.last_psnr),
                           last_ssim=sanitize_metric(s.last_ssim),
                           best_psnr=sanitize_metric(s.best_psnr),
                           best_ssim=sanitize_metric(s.best_ssim),
                           wall_seconds=s.wall_seconds)


def create_app() -> FastAPI:
    app = FastAPI(title="inrdenoise", version=__version__)

    @app.exception_handler(ValueError)
    async def value_error_handler(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(FileNotFoundError)
    async def not_found_handler(request: Request, exc: FileNotFoundError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/v1/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/v1/denoise", response_model=DenoiseResponse)
    def denoise(req: ExperimentRequest) -> DenoiseResponse:
        out = run_denoise(req.to_config())
        return DenoiseResponse(summaries=[_summary_model(s) for s in out.summaries],
                               artifacts=out.artifacts)

    @app.post("/v1/ablate-n", response_model=AblateResponse)
    def ablate(req: AblateRequest) -> AblateResponse:
        out = run_ablation(req.base.to_config(), req.n_values, workers=req.workers)
        return AblateResponse(csv_path=out.csv_path, svg_path=out.svg_path,
                              summaries=[_summary_model(s) for s in out.summaries])

    @app.post("/v1/compare", response_model=CompareResponse)
    def compare(req: CompareRequest) -> CompareResponse:
        cfg_a = req.base.to_config()
        cfg_b = req.base.to_config()
        cfg_a.train = req.train_a.to_config(cfg_a.model.kind)
        cfg_b.train = req.train_b.to_config(cfg_b.model.kind)
        out = run_compare(cfg_a, cfg_b, sigmas=req.sigmas, workers=req.workers)
        cells = [CompareCell(input=r[0], sigma255=r[1], seed=r[2],
                             a_psnr=sanitize_metric(r[3]), a_ssim=sanitize_metric(r[4]),
                             b_psnr=sanitize_metric(r[5]), b_ssim=sanitize_metric(r[6]),
                             psnr_delta=sanitize_metric(r[7]),
                             ssim_delta=sanitize_metric(r[8]))
                 for r in out.rows]
        return CompareResponse(cells=cells, mean_psnr_delta=out.mean_psnr_delta,
                               mean_ssim_delta=out.mean_ssim_delta,
                               psnr_t=sanitize_metric(out.psnr_t), psnr_p=out.psnr_p,
                               ssim_t=sanitize_metric(out.ssim_t), ssim_p=out.ssim_p,
                               significance=out.significance, csv_path=out.csv_path)

    @app.post("/v1/theorem", response_model=TheoremResponse)
    def theorem(req: TheoremRequest) -> TheoremResponse:
        t0 = time.perf_counter()
        rep = run_theorem1(dim=req.dim, delta=req.delta, trials=req.trials,
                           seed=req.seed)
        return TheoremResponse(delta=rep.delta, dim=rep.dim, trials=rep.trials,
                               seed=rep.seed, all_hold=rep.all_hold,
                               min_ratio=rep.min_ratio,
                               min_bound_margin=rep.min_bound_margin,
                               bound_violations=rep.bound_violations,
                               improvement_violations=rep.improvement_violations,
                               elapsed_seconds=time.perf_counter() - t0)

    @app.post("/v1/metrics", response_model=MetricsResponse)
    def metrics(req: MetricsRequest) -> MetricsResponse:
        vals = run_metrics_files(req.path_a, req.path_b)
        return MetricsResponse(psnr=sanitize_metric(vals["psnr"]),
                               ssim=sanitize_metric(vals["ssim"]),
                               sigma_hat=vals["sigma_hat"])

    return app


app = create_app()
