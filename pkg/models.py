import hashlib
import json
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class RunStatus(str, Enum):
    """Run status enumeration."""
    CREATED = "created"
    RUNNING = "running"
    COMPLETED = "completed"
    ERROR = "error"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"
    SVG = "svg"


class SamplerMethod(str, Enum):
    KRYLOV = "krylov"
    EXACT = "exact"


class LeakStrategy(str, Enum):
    RANDOM = "random"
    BISECTION = "bisection"


class ExperimentConfig(BaseModel):
    """Fully resolved configuration of one experiment run."""
    experiment: str
    params: Dict[str, Any] = Field(default_factory=dict)
    seed: int
    output: Optional[str] = None
    format: OutputFormat = OutputFormat.CSV

    def config_hash(self) -> str:
        """Stable short hash of the resolved config."""
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


class RunRecord(BaseModel):
    """Run metadata persisted as run.json next to the artifacts."""
    run_id: str
    experiment: str
    created_at: datetime
    status: RunStatus = RunStatus.CREATED
    seed: int
    config_hash: str
    build_id: str
    files: Dict[str, str] = Field(default_factory=dict)
    error: Optional[str] = None


class KrylovSamplerPlan(BaseModel):
    """Query plan for sampling N(0, Λ^{-1}) with a spectrum in [1, κ]."""
    kappa: float
    dim: int
    eps: float
    method: SamplerMethod
    degree: Optional[int] = None
    delta: float
    c_delta: float
    query_budget: int
    coeffs: List[float] = Field(default_factory=list)


class LeakageReport(BaseModel):
    """Revealed-bit proxy for the information gained per query."""
    N: int
    strategy: LeakStrategy
    trials: int
    queries: int
    avg_bits_per_query: float
    histogram: List[int]
    per_query_mean: List[float] = Field(default_factory=list)
    cap_events: int = 0
    floor_events: int = 0
    no_information: int = 0
    identified_fraction: float = 0.0
    queries_to_identify_mean: Optional[float] = None


class TwoSampleResult(BaseModel):
    statistic: float
    p_value: float
    permutations: int
    n_a: int
    n_b: int


class IdentityResiduals(BaseModel):
    P2_max: float = 0.0
    P3_max: float = 0.0
    P4_max: float = 0.0
    orthogonality_max: float = 0.0
    audit_passed: bool = True


class ReductionReport(BaseModel):
    algorithm: str
    dim: int
    K: int
    trials: int
    identity_residuals: IdentityResiduals
    two_sample: TwoSampleResult
    negative_control: Optional[TwoSampleResult] = None


class ErrorResponse(BaseModel):
    """Diagnostic payload written when a run fails."""
    error: str
    detail: Optional[str] = None
    exit_code: int = 1
    context: Dict[str, Any] = Field(default_factory=dict)


class WishartNormalization(str, Enum):
    UNIT = "unit-over-d"
    STANDARD = "standard"


class HardPairRecord(BaseModel):
    """Serializable moment-matched diagonal pair (the rotation is re-drawn from seed)."""
    K: int
    kappa: float
    d: int
    c1: float
    seed: int
    nodes: List[float]
    x: List[float]
    x_prime: List[float]
    N: List[int]
    N_prime: List[int]
    lp_value: float
    minimax_error: float
    trace_gap: float
