"""
內建資料檔讀取
"""
import json
from functools import lru_cache
from pathlib import Path
from typing import Any

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@lru_cache(maxsize=None)
def load_data(name: str) -> Any:
    """讀取 roomcraft/data 下的 JSON 檔 (結果會被快取，呼叫端不可修改)"""
    with open(DATA_DIR / name, "r", encoding="utf-8") as f:
        return json.load(f)


def furniture_catalog() -> dict:
    return load_data("furniture_catalog.json")


def room_defaults() -> dict:
    return load_data("room_defaults.json")


def relation_taxonomy() -> dict:
    return load_data("relation_taxonomy.json")


def prompt_templates() -> list:
    return load_data("prompt_templates.json")


def bench_templates() -> dict:
    return load_data("bench_templates.json")
