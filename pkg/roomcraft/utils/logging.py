"""
日誌工具
"""
import json
import logging
import sys
from typing import Any, Dict, Optional

from roomcraft.core.config import settings

# LogRecord 內建欄位，不列入 JSON 輸出的額外資訊
_RESERVED_ATTRS = set(vars(logging.makeLogRecord({}))) | {"message", "asctime"}


class JsonLineFormatter(logging.Formatter):
    """每筆紀錄輸出一行 JSON，供 CLI 的 stderr 診斷訊息使用"""

    def format(self, record: logging.LogRecord) -> str:
        payload: Dict[str, Any] = {
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        for key, value in record.__dict__.items():
            if key not in _RESERVED_ATTRS and not key.startswith("_"):
                payload[key] = value
        if record.exc_info:
            payload["exception"] = self.formatException(record.exc_info)
        return json.dumps(payload, ensure_ascii=False, sort_keys=True, default=str)


def setup_logging(json_format: bool = False, level: Optional[str] = None):
    """設定應用程式日誌"""
    # 設定日誌等級
    if level is None:
        level = "DEBUG" if settings.DEBUG else settings.LOG_LEVEL
    log_level = getattr(logging, level.upper(), logging.INFO)

    # CLI 模式輸出至 stderr，stdout 保留給資料
    handler = logging.StreamHandler(sys.stderr)
    if json_format:
        handler.setFormatter(JsonLineFormatter())
    else:
        handler.setFormatter(
            logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
        )

    root = logging.getLogger()
    root.handlers = [handler]
    root.setLevel(log_level)

    # 第三方套件的日誌等級
    logging.getLogger("httpx").setLevel(logging.WARNING)
    logging.getLogger("httpcore").setLevel(logging.WARNING)


def get_logger(name: str) -> logging.Logger:
    """取得指定名稱的日誌記錄器"""
    return logging.getLogger(name)


def log_system_event(
    logger: logging.Logger,
    event_type: str,
    message: str,
    details: Optional[Dict[str, Any]] = None
):
    """記錄系統事件日誌"""
    log_data = {
        "event_type": event_type,
        "details": details or {}
    }
    logger.info(f"System event: {event_type} - {message}", extra=log_data)


def log_error_event(logger: logging.Logger, exc: Exception):
    """記錄錯誤事件，自定義例外附帶錯誤代碼與細節"""
    error_code = getattr(exc, "error_code", "INTERNAL_ERROR")
    details = getattr(exc, "details", {})
    logger.error(
        str(exc),
        extra={"error_code": error_code, "error_type": type(exc).__name__, "details": details}
    )
