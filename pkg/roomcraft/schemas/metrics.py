"""
評估指標的 Pydantic 模型
"""
from typing import Tuple

from pydantic import BaseModel, ConfigDict, Field


class OobReport(BaseModel):
    """OOB 判定結果"""
    model_config = ConfigDict(frozen=True)

    flagged: bool
    outside: Tuple[str, ...] = Field(default_factory=tuple, description="超出房間的家具")
    intersecting: Tuple[Tuple[str, str], ...] = Field(
        default_factory=tuple, description="交疊超過門檻的家具對"
    )
    max_outside: float = Field(0.0, ge=0, description="最大超出距離 (公尺)")

    def __bool__(self) -> bool:
        return self.flagged


class LayoutMetrics(BaseModel):
    """單一佈局的指標列"""
    model_config = ConfigDict(frozen=True)

    name: str
    oob_flag: bool
    ori: float
    coherence: float
    completeness: float
