"""
darkpath API
Λ 系の解析的な最適化量と主方程式シミュレーションを HTTP で提供する
"""

import logging
import time
import traceback
from typing import Any, Dict, List, Optional

import numpy as np
import scipy
import pandas as pd
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from cli import analytic_summary
from errors import DarkPathError, DivergentTransferError, InvalidInputError
from lambda_model import LambdaParams, optimal_loss, transfer_time
from master_equation_sim import FourierPulse, transfer_report
from settings import TOOL_NAME, VERSION, configure_logging, settings

configure_logging()
logger = logging.getLogger(__name__)

app = FastAPI(
    title="darkpath API",
    description="暗状態経由の量子状態転送の最適化API",
    version=VERSION,
)
app.router.redirect_slashes = False

app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.allowed_origins,
    allow_credentials=False,
    allow_methods=["GET", "POST", "OPTIONS"],
    allow_headers=["*"],
)


class TransferTimeRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    params: LambdaParams
    energy: float = 0.0


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    params: LambdaParams
    t_f: float = Field(..., gt=0)
    coefficients: List[float] = Field(default_factory=list)
    rtol: Optional[float] = Field(None, gt=0)
    atol: Optional[float] = Field(None, gt=0)


@app.get("/")
async def root():
    """ルートエンドポイント"""
    return {
        "message": f"🚀 {TOOL_NAME} API v{VERSION} 稼働中",
        "status": "healthy",
        "timestamp": time.time(),
        "version": VERSION,
        "endpoints": {
            "/health": "ヘルスチェック",
            "/api/analytic": "ΔF_min・最適転送時間・前因子",
            "/api/transfer-time": "エネルギー ℰ での t_f と ΔF_opt",
            "/api/simulate": "Fourier パルスでの主方程式シミュレーション",
        },
    }


@app.get("/health")
async def health_check():
    """設定とライブラリ版を含むヘルスチェック"""
    return {
        "status": "healthy",
        "timestamp": time.time(),
        "settings": settings.get_status(),
        "versions": {"numpy": np.__version__, "scipy": scipy.__version__, "pandas": pd.__version__},
    }


@app.post("/api/analytic")
def analytic(params: LambdaParams) -> Dict[str, Any]:
    """解析的な最小損失と最適転送時間"""
    summary = analytic_summary(params)
    logger.info(f"📊 analytic: ΔF_min={summary['delta_F_min']:.6e}")
    return summary


@app.post("/api/transfer-time")
def transfer_time_endpoint(request: TransferTimeRequest) -> Dict[str, Any]:
    """エネルギー ℰ の軌道の転送時間と損失"""
    p = request.params
    return {
        "energy": request.energy,
        "t_f": transfer_time(request.energy, p),
        "delta_F_opt": optimal_loss(request.energy, p),
    }


@app.post("/api/simulate")
def simulate(request: SimulateRequest) -> Dict[str, Any]:
    """Fourier パルスでの転送忠実度と数値診断"""
    p = request.params
    pulse = FourierPulse(request.t_f, tuple(request.coefficients))
    report = transfer_report(p, pulse, rtol=request.rtol, atol=request.atol)
    logger.info(f"📊 simulate: F={report.fidelity:.10f} (t_f={request.t_f})")
    return {
        "t_f": request.t_f,
        "fidelity": report.fidelity,
        "delta_F": 1.0 - report.fidelity,
        "diagnostics": {
            "trace_drift": report.trace_drift,
            "hermiticity_drift": report.hermiticity_drift,
            "min_eigenvalue": report.min_eigenvalue,
            "n_steps": report.n_steps,
        },
    }


# エラーハンドラー
@app.exception_handler(DivergentTransferError)
async def divergent_handler(request, exc: DivergentTransferError):
    logger.warning(f"⚠️ 発散: {exc.message}")
    return JSONResponse(status_code=422, content=exc.to_dict())


@app.exception_handler(InvalidInputError)
async def invalid_input_handler(request, exc: InvalidInputError):
    logger.warning(f"⚠️ 入力エラー: {exc.message}")
    return JSONResponse(status_code=422, content=exc.to_dict())


@app.exception_handler(DarkPathError)
async def darkpath_error_handler(request, exc: DarkPathError):
    logger.error(f"❌ 数値計算エラー: {exc.message}")
    return JSONResponse(status_code=500, content=exc.to_dict())


@app.exception_handler(Exception)
async def general_exception_handler(request, exc):
    logger.error(f"予期しないエラー: {exc}")
    logger.error(traceback.format_exc())
    return JSONResponse(status_code=500, content={"detail": f"内部サーバーエラー: {str(exc)}"})


if __name__ == "__main__":
    import uvicorn

    logger.info(f"🚀 Starting {TOOL_NAME} API v{VERSION} on port {settings.port}")
    uvicorn.run("main:app", host="0.0.0.0", port=settings.port, reload=False, log_level="info")
