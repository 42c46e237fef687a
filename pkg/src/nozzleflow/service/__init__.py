"""FastAPI service wrapping the solver package.

Errors map to HTTP status codes the same way the CLI maps them to exit
codes: config problems -> 400, typed solver failures -> 422.
"""

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import parse_config_text
from ..errors import ConfigError, SolverError
from ..runs import (
    run_background, run_solve, run_solve_linear, run_sweep, run_verify,
)
from .models import (
    BackgroundResponse, ConfigRequest, HealthResponse, SolveLinearRequest,
    SolveLinearResponse, SolveResponse, SweepRequest, SweepResponse,
    VerifyResponse,
)


def _config_from_mapping(mapping):
    text = "\n".join(f"{k} = {v}" for k, v in mapping.items())
    return parse_config_text(text)


def create_app():
    app = FastAPI(title="nozzleflow", version=__version__)

    @app.exception_handler(ConfigError)
    async def _config_error(request, exc):
        return JSONResponse(
            status_code=400,
            content={"error_type": type(exc).__name__, "message": str(exc)},
        )

    @app.exception_handler(SolverError)
    async def _solver_error(request, exc):
        return JSONResponse(
            status_code=422,
            content={"error_type": type(exc).__name__, "message": str(exc)},
        )

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/background", response_model=BackgroundResponse)
    def background(req: ConfigRequest):
        cfg = _config_from_mapping(req.config)
        res = run_background(cfg)
        return BackgroundResponse(csv=res.csv, report=res.report)

    @app.post("/verify", response_model=VerifyResponse)
    def verify(req: ConfigRequest):
        cfg = _config_from_mapping(req.config)
        res = run_verify(cfg)
        return VerifyResponse(
            passed=bool(res.report["pass"]),
            table=res.table,
            coefficients_csv=res.coefficients_csv,
            report=res.report,
        )

    @app.post("/solve-linear", response_model=SolveLinearResponse)
    def solve_linear(req: SolveLinearRequest):
        cfg = _config_from_mapping(req.config)
        res = run_solve_linear(cfg, rhs_mode=req.rhs_mode,
                               coefficients_csv=req.coefficients_csv)
        return SolveLinearResponse(field_csv=res.field_csv, report=res.report)

    @app.post("/solve", response_model=SolveResponse)
    def solve(req: ConfigRequest):
        cfg = _config_from_mapping(req.config)
        res = run_solve(cfg)
        return SolveResponse(
            solution_csv=res.solution_csv,
            mach_csv=res.mach_csv,
            sonic_csv=res.sonic_csv,
            report=res.report,
        )

    @app.post("/sweep", response_model=SweepResponse)
    def sweep(req: SweepRequest):
        cfg = _config_from_mapping(req.config)
        res = run_sweep(cfg, req.eps_list)
        return SweepResponse(table_csv=res.table_csv, rows=res.rows,
                             report=res.report)

    return app


app = create_app()
