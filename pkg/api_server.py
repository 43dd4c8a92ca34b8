#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
FastAPI Backend for the Smith Predictor simulation
REST endpoints to run single experiments and read stored reports
"""
import io
import logging
import sys
from datetime import datetime
from typing import Literal, Optional

# Set UTF-8 encoding for Windows console
if sys.platform == 'win32':
    sys.stdout = io.TextIOWrapper(sys.stdout.buffer, encoding='utf-8')
    sys.stderr = io.TextIOWrapper(sys.stderr.buffer, encoding='utf-8')

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, Field
import uvicorn

from config import RESULTS_DIR, config_hash, load_config
from errors import SmithPredictorError
from experiment import run_experiment
from metrics import RunSummary, summarize_run
from report import regenerate_report

# Configure logger
logger = logging.getLogger(__name__)

# Initialize FastAPI app
app = FastAPI(
    title="Smith Predictor Simulation API",
    description="Delayed soft-arm tracking with a learning-based Smith predictor",
    version="1.0.0"
)

# Enable CORS for browser clients
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


# Pydantic models
class RunRequest(BaseModel):
    variant: Literal["ldn3", "hist3", "hist7", "nopred"] = "ldn3"
    gain: Literal["low", "med", "high"] = "med"
    seed: int = Field(default=1, ge=0)
    config_path: Optional[str] = None
    out_dir: Optional[str] = None


class HealthResponse(BaseModel):
    status: str
    timestamp: str
    config_hash: str


@app.get("/health", response_model=HealthResponse)
async def health_check():
    """Health check: the default config loads and validates"""
    try:
        config = load_config()
        return HealthResponse(
            status="healthy",
            timestamp=datetime.now().isoformat(),
            config_hash=config_hash(config)
        )
    except SmithPredictorError as e:
        return HealthResponse(
            status=f"unhealthy: {e}",
            timestamp=datetime.now().isoformat(),
            config_hash=""
        )


@app.post("/api/run", response_model=RunSummary)
def run(request: RunRequest):
    """
    Run one experiment and return its summary

    Args:
        request: Variant, gain, seed and optional config / output paths

    Returns:
        RunSummary JSON
    """
    try:
        config = load_config(request.config_path)
        log = run_experiment(config, request.seed, request.variant, request.gain,
                             out_dir=request.out_dir)
        logger.info(f"[API] Run complete | Variant: {request.variant} | Gain: {request.gain} | "
                    f"Seed: {request.seed}")
        return summarize_run(log, config.protocol)
    except SmithPredictorError as e:
        logger.error(f"[API] Run failed: {e}")
        raise HTTPException(status_code=400, detail=f"{type(e).__name__}: {e}")
    except Exception as e:
        logger.exception(f"[API] Unexpected error: {e}")
        raise HTTPException(status_code=500, detail=str(e))


@app.get("/api/report", response_class=PlainTextResponse)
def report(results_dir: str = RESULTS_DIR):
    """Render the report of a stored batch"""
    try:
        return regenerate_report(results_dir)
    except FileNotFoundError as e:
        raise HTTPException(status_code=404, detail=str(e))
    except SmithPredictorError as e:
        raise HTTPException(status_code=400, detail=str(e))


if __name__ == "__main__":
    print("="*70)
    print("SMITH PREDICTOR SIMULATION API SERVER")
    print("="*70)
    print("\n🚀 Starting server on http://0.0.0.0:8000")
    print("📖 API docs available at http://0.0.0.0:8000/docs")
    print("🏥 Health check at http://0.0.0.0:8000/health")
    print("\n" + "="*70 + "\n")

    uvicorn.run(
        app,
        host="0.0.0.0",
        port=8000,
        log_level="info"
    )
