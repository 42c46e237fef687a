"""Pydantic request/response models for the HTTP service.

Requests carry the flat config mapping (same keys as the config file); the
service applies defaults and strict validation exactly like the CLI parser.
"""

from typing import Optional

from pydantic import BaseModel, Field


class ConfigRequest(BaseModel):
    config: dict[str, float | int | str] = Field(
        default_factory=dict,
        description="flat config keys, e.g. {'gas.gamma': 1.4, 'g.mode.1': 1e-3}",
    )


class SweepRequest(ConfigRequest):
    eps_list: list[float] = Field(
        default=[1e-3, 3e-4, 1e-4],
        description="entry-perturbation amplitudes to sweep",
    )


class SolveLinearRequest(ConfigRequest):
    rhs_mode: str = Field(default="h", pattern="^(h|g)$",
                          description="'h': rhs = h(x1); 'g': lift source -h g''")
    coefficients_csv: Optional[str] = Field(
        default=None,
        description="coefficient dump from /verify; assembled fresh if absent")


class BackgroundResponse(BaseModel):
    csv: str
    report: dict[str, float | int | str]


class VerifyResponse(BaseModel):
    passed: bool
    table: str
    coefficients_csv: str
    report: dict[str, float | int | str]


class SolveLinearResponse(BaseModel):
    field_csv: str
    report: dict[str, float | int | str]


class SolveResponse(BaseModel):
    solution_csv: str
    mach_csv: str
    sonic_csv: str
    report: dict[str, float | int | str]


class SweepRow(BaseModel):
    eps: float
    g_norm5: float
    phi_hat_norm4: float
    stability_ratio: float
    iterations: int
    max_contraction_ratio: float
    sonic_displacement_max: float


class SweepResponse(BaseModel):
    table_csv: str
    rows: list[SweepRow]
    report: dict[str, float | int | str]


class ErrorBody(BaseModel):
    error_type: str
    message: str


class HealthResponse(BaseModel):
    status: str
    version: Optional[str] = None
