"""
設定管理

環境變數只負責擷取服務 (LLM) 與日誌；引擎參數來自 TOML 設定檔，
CLI 旗標最後覆寫。
"""
import hashlib
import json
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from roomcraft.utils.constants import DistanceMetric, MIN_GRID_STEP, OVERLAP_TOLERANCE

load_dotenv()


class Settings(BaseModel):
    # 擷取服務設定 (未設定 URL 時使用內建模擬服務)
    LLM_URL: Optional[str] = os.getenv("ROOMCRAFT_LLM_URL")
    LLM_KEY: Optional[str] = os.getenv("ROOMCRAFT_LLM_KEY")
    LLM_MODEL: str = os.getenv("ROOMCRAFT_LLM_MODEL", "gpt-4o")
    LLM_TIMEOUT: float = float(os.getenv("ROOMCRAFT_LLM_TIMEOUT", "30"))

    # 應用程式設定
    DEBUG: bool = os.getenv("ROOMCRAFT_DEBUG", "false").lower() == "true"
    LOG_LEVEL: str = os.getenv("ROOMCRAFT_LOG_LEVEL", "INFO")

    @property
    def LLM_ENABLED(self) -> bool:
        return bool(self.LLM_URL)


settings = Settings()


class CapsConfig(BaseModel):
    """衝突感知擺放策略參數"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha0: float = Field(0.5, ge=0.0, le=1.0, description="牆距項初始權重")
    beta0: float = Field(0.5, ge=0.0, le=1.0, description="物件密度項初始權重")
    k: float = Field(1.0, gt=0.0, description="權重調整速率")
    delta_alpha: float = Field(0.05, gt=0.0, description="權重基本增量")
    mu: float = Field(3.0, gt=0.0, description="鄰近物件半徑 (公尺)")
    grid_step: float = Field(0.1, gt=0.0, description="候選格點間距 (公尺)")
    max_retries: int = Field(25, ge=0, description="最大重試次數")
    seed: int = Field(0, ge=0, lt=2**64, description="隨機種子")
    overlap_tolerance: float = Field(OVERLAP_TOLERANCE, ge=0.0, description="重疊容許面積 (m²)")
    min_grid_step: float = Field(MIN_GRID_STEP, gt=0.0, description="格點細化下限 (公尺)")
    refine_every: int = Field(5, ge=1, description="每幾次重試將格點減半")
    relax_anchor_after: int = Field(10, ge=0, description="幾次重試後放寬靠牆限制")
    wall_mount_height: float = Field(1.2, ge=0.0, description="壁掛物件離地高度 (公尺)")
    near_wall_band: float = Field(0.5, gt=0.0, description="near_wall 候選帶寬 (公尺)")
    adaptive: bool = Field(True, description="關閉時為無 CAPS 的消融設定")

    @model_validator(mode="after")
    def check_weight_sum(self):
        if abs(self.alpha0 + self.beta0 - 1.0) > 1e-9:
            raise ValueError("alpha0 + beta0 必須等於 1")
        return self

    @classmethod
    def from_ratio(cls, ratio: float, **kwargs: Any) -> "CapsConfig":
        """由 α/β 比值建立設定: α = r/(1+r), β = 1/(1+r)"""
        if ratio <= 0:
            raise ValueError("比值必須為正數")
        alpha = ratio / (1.0 + ratio)
        return cls(alpha0=alpha, beta0=1.0 - alpha, **kwargs)


class ConstraintConfig(BaseModel):
    """約束評估參數"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    orientation_tolerance_deg: float = Field(15.0, ge=0.0, lt=180.0)
    alignment_tolerance: float = Field(0.05, ge=0.0)
    wall_gap_tolerance: float = Field(0.05, ge=0.0)
    size_tolerance: float = Field(0.01, ge=0.0)
    distance_metric: DistanceMetric = DistanceMetric.CENTER


class MetricsConfig(BaseModel):
    """評估指標門檻"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    oob_margin: float = Field(0.01, ge=0.0, description="超出牆面的容許距離 (公尺)")
    oob_overlap_ratio: float = Field(0.01, ge=0.0, le=1.0, description="交疊面積佔較小物件比例門檻")
    clearance_depth: float = Field(0.6, gt=0.0, description="正面淨空區深度 (公尺)")


class OptimizerConfig(BaseModel):
    """修正迴圈參數"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    budget: int = Field(20, ge=1, description="最大修正回合數")
    overlap_margin: float = Field(0.01, ge=0.0, description="解除重疊時額外推開的距離")


class BenchConfig(BaseModel):
    """基準測試參數"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(50, ge=1)
    densities: Tuple[float, ...] = (0.15, 0.25, 0.35)
    seed: int = Field(1, ge=0)
    max_items: int = Field(12, ge=1)
    workers: int = Field(1, ge=1)

    @field_validator("densities")
    @classmethod
    def check_densities(cls, v):
        if not v or any(d <= 0 or d >= 1 for d in v):
            raise ValueError("密度必須介於 0 與 1 之間")
        return tuple(v)


class EngineConfig(BaseModel):
    """引擎整體設定"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    caps: CapsConfig = Field(default_factory=CapsConfig)
    constraints: ConstraintConfig = Field(default_factory=ConstraintConfig)
    metrics: MetricsConfig = Field(default_factory=MetricsConfig)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    bench: BenchConfig = Field(default_factory=BenchConfig)


def load_engine_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Dict[str, Any]]] = None
) -> EngineConfig:
    """
    讀取引擎設定

    Args:
        path: TOML 設定檔路徑，None 時使用預設值
        overrides: 依區段分組的覆寫值 (例如 {"caps": {"seed": 7}})，優先於設定檔

    Returns:
        EngineConfig
    """
    data: Dict[str, Dict[str, Any]] = {}
    if path is not None:
        with open(path, "rb") as f:
            data = tomllib.load(f)

    for section, values in (overrides or {}).items():
        merged = dict(data.get(section, {}))
        merged.update({k: v for k, v in values.items() if v is not None})
        data[section] = merged

    return EngineConfig.model_validate(data)


def config_hash(config: BaseModel) -> str:
    """設定內容的穩定雜湊值，寫入輸出檔以追溯來源"""
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
