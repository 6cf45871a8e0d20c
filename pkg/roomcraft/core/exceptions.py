"""
自定義例外類別
"""
from typing import Any, Dict, List, Optional


class RoomCraftException(Exception):
    """基礎例外類別"""
    def __init__(
        self,
        message: str,
        error_code: str = "GENERAL_ERROR",
        details: Optional[Dict[str, Any]] = None
    ):
        self.message = message
        self.error_code = error_code
        self.details = details or {}
        super().__init__(self.message)


class MalformedDocument(RoomCraftException):
    """文件語法錯誤"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=f"文件格式錯誤: {message}",
            error_code="MALFORMED_DOCUMENT",
            details=details
        )


class SchemaViolation(RoomCraftException):
    """文件結構不符"""
    def __init__(self, field: str, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=f"結構錯誤: {field} - {message}",
            error_code="SCHEMA_VIOLATION",
            details={"field": field, **(details or {})}
        )


class DanglingReference(RoomCraftException):
    """關係參照了不存在的物件"""
    def __init__(self, reference: str):
        super().__init__(
            message=f"參照的物件不存在: {reference}",
            error_code="DANGLING_REFERENCE",
            details={"reference": reference}
        )


class InvalidDimensions(RoomCraftException):
    """房間或開口尺寸不合法"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=f"尺寸不合法: {message}",
            error_code="INVALID_DIMENSIONS",
            details=details
        )


class PreconditionViolation(RoomCraftException):
    """呼叫前置條件不成立"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            error_code="PRECONDITION_VIOLATION",
            details=details
        )


class ExtractionFailed(RoomCraftException):
    """場景資訊擷取失敗"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=f"場景擷取失敗: {message}",
            error_code="EXTRACTION_FAILED",
            details=details
        )


class ProviderUnavailable(RoomCraftException):
    """擷取服務無法連線"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=f"擷取服務無法使用: {message}",
            error_code="PROVIDER_UNAVAILABLE",
            details=details
        )


class CyclicSupport(RoomCraftException):
    """on_top_of 支撐關係形成循環"""
    def __init__(self, cycle: List[str]):
        super().__init__(
            message=f"支撐關係形成循環: {' -> '.join(cycle)}",
            error_code="CYCLIC_SUPPORT",
            details={"cycle": cycle}
        )


class UnknownItem(RoomCraftException):
    """圖中不存在的物件"""
    def __init__(self, item_id: str):
        super().__init__(
            message=f"物件不存在: {item_id}",
            error_code="UNKNOWN_ITEM",
            details={"item_id": item_id}
        )


class NoCandidateSurface(RoomCraftException):
    """置頂物件的支撐物尚未擺放"""
    def __init__(self, item_id: str, support_id: str):
        super().__init__(
            message=f"{item_id} 的支撐物 {support_id} 尚未擺放",
            error_code="NO_CANDIDATE_SURFACE",
            details={"item_id": item_id, "support_id": support_id}
        )


class ItemUnplaceable(RoomCraftException):
    """重試後仍無法擺放的家具"""
    def __init__(self, item_id: str, trace: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=f"無法擺放家具: {item_id}",
            error_code="ITEM_UNPLACEABLE",
            details={"item_id": item_id, "trace": trace or {}}
        )


class UnmappableRelation(RoomCraftException):
    """無法轉換為約束的關係"""
    def __init__(self, relation: str):
        super().__init__(
            message=f"無法轉換的關係類型: {relation}",
            error_code="UNMAPPABLE_RELATION",
            details={"relation": relation}
        )


class UnplacedReference(RoomCraftException):
    """約束參照了未擺放的物件"""
    def __init__(self, item_id: str):
        super().__init__(
            message=f"約束參照的物件尚未擺放: {item_id}",
            error_code="UNPLACED_REFERENCE",
            details={"item_id": item_id}
        )


class NoRepairFound(RoomCraftException):
    """所有候選動作都無法降低違規量"""
    def __init__(self, message: str = "找不到可降低違規量的修正動作"):
        super().__init__(
            message=message,
            error_code="NO_REPAIR_FOUND"
        )


class ActionInfeasible(RoomCraftException):
    """動作無法執行"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=f"動作無法執行: {message}",
            error_code="ACTION_INFEASIBLE",
            details=details
        )


class UnknownTarget(RoomCraftException):
    """動作目標不存在"""
    def __init__(self, target: str):
        super().__init__(
            message=f"動作目標不存在: {target}",
            error_code="UNKNOWN_TARGET",
            details={"target": target}
        )


class BudgetExhausted(RoomCraftException):
    """修正迴圈用盡預算仍有違規"""
    def __init__(self, residual: List[Dict[str, Any]], layout: Any = None, trace: Any = None):
        super().__init__(
            message=f"修正迴圈結束時仍有 {len(residual)} 項違規",
            error_code="BUDGET_EXHAUSTED",
            details={"residual": residual}
        )
        self.layout = layout
        self.trace = trace


class EmptySet(RoomCraftException):
    """空的佈局集合"""
    def __init__(self, message: str = "佈局集合不可為空"):
        super().__init__(
            message=message,
            error_code="EMPTY_SET"
        )
