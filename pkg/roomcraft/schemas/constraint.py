"""
約束、違規報告與修正動作的 Pydantic 模型
"""
import math
from typing import Any, Dict, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from roomcraft.utils.constants import (
    ActionKind,
    Comparator,
    ConstraintKind,
    ViolationCategory,
)

ParamValue = Union[float, str]


class ConstraintTuple(BaseModel):
    """統一約束表示 C = (T, O, P, R, W)"""
    model_config = ConfigDict(frozen=True)

    ctype: ConstraintKind = Field(..., description="約束類型 (T)")
    objects: Tuple[str, ...] = Field(default_factory=tuple, description="涉及物件 (O)")
    params: Dict[str, ParamValue] = Field(default_factory=dict, description="參數 (P)")
    relation: Comparator = Field(Comparator.PREDICATE, description="比較方式 (R)")
    weight: float = Field(1.0, ge=0, description="權重 (W)")
    essential: bool = Field(False, description="是否為必要約束")

    @model_validator(mode="after")
    def check_shape(self):
        n = len(self.objects)
        if self.ctype == ConstraintKind.OVERLAP_FREE:
            # 空清單代表所有物件兩兩之間
            if n not in (0, 2):
                raise ValueError("overlap_free 需要 0 或 2 個物件")
        elif self.ctype == ConstraintKind.DISTANCE:
            if n != 2:
                raise ValueError("distance 約束需要 2 個物件")
            lo = self.number("min", 0.0)
            hi = self.number("max", math.inf)
            if lo < 0 or lo > hi:
                raise ValueError("distance 約束需要 0 <= min <= max")
        elif self.ctype == ConstraintKind.COUNT:
            if n != 1:
                raise ValueError("count 約束需要 1 個類別")
            if self.relation == Comparator.RANGE:
                lo = self.number("min", 0.0)
                if lo < 0 or lo > self.number("max", math.inf):
                    raise ValueError("count 範圍需要 0 <= min <= max")
            elif self.number("n", -1.0) < 0:
                raise ValueError("count 約束需要 n >= 0")
        elif n not in (1, 2):
            raise ValueError(f"{self.ctype.value} 約束需要 1 或 2 個物件")
        return self

    def number(self, key: str, default: float) -> float:
        value = self.params.get(key)
        if value is None or isinstance(value, str):
            return default
        return float(value)

    def text(self, key: str, default: Optional[str] = None) -> Optional[str]:
        value = self.params.get(key)
        return value if isinstance(value, str) else default

    @property
    def predicate(self) -> Optional[str]:
        return self.text("predicate")


class ViolationReport(BaseModel):
    """單一約束的評估結果"""
    model_config = ConfigDict(frozen=True)

    constraint: ConstraintTuple
    index: int = Field(0, ge=0, description="約束在清單中的位置")
    magnitude: float = Field(..., ge=0, description="違規量 (0 表示滿足)")
    category: ViolationCategory
    detail: str = ""

    @property
    def satisfied(self) -> bool:
        return self.magnitude == 0.0

    @property
    def weighted(self) -> float:
        return self.constraint.weight * self.magnitude


class Action(BaseModel):
    """修正動作"""
    model_config = ConfigDict(frozen=True)

    kind: ActionKind
    targets: Tuple[str, ...] = Field(default_factory=tuple, description="目標物件或類別")
    params: Dict[str, ParamValue] = Field(default_factory=dict)
    priority: float = 0.0

    @model_validator(mode="after")
    def check_params(self):
        numeric = {k: v for k, v in self.params.items() if not isinstance(v, str)}
        if self.kind in (ActionKind.TRANSLATE, ActionKind.ROTATE):
            if any(not math.isfinite(float(v)) for v in numeric.values()):
                raise ValueError("位移與旋轉參數必須為有限值")
        if self.kind == ActionKind.RESIZE:
            for key in ("sx", "sy", "sz"):
                if float(numeric.get(key, 1.0)) <= 0:
                    raise ValueError("縮放倍率必須大於 0")
        if self.kind == ActionKind.SWAP_POSITIONS and len(self.targets) != 2:
            raise ValueError("swap_positions 需要 2 個目標")
        if self.kind != ActionKind.ADD_ITEM and not self.targets:
            raise ValueError("動作需要目標")
        return self

    def number(self, key: str, default: float = 0.0) -> float:
        value = self.params.get(key)
        if value is None or isinstance(value, str):
            return default
        return float(value)


class CorrectionRound(BaseModel):
    """修正迴圈的一個回合"""
    model_config = ConfigDict(frozen=True)

    round: int
    violations: Tuple[Dict[str, Any], ...]
    action: Optional[Action] = None
    total_before: float
    total_after: float
    essential_before: float
    essential_after: float


class CorrectionTrace(BaseModel):
    """修正迴圈紀錄"""
    model_config = ConfigDict(frozen=True)

    rounds: Tuple[CorrectionRound, ...] = Field(default_factory=tuple)
    initial_total: float = 0.0
    final_total: float = 0.0
    residual: Tuple[Dict[str, Any], ...] = Field(default_factory=tuple)
    stop_reason: str = ""
