"""
擷取服務的 Pydantic 模型
"""
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

TemplateName = Literal[
    "room_type_classification",
    "furniture_enumeration",
    "spatial_relationship_analysis",
    "constraint_formalization",
]

PLACEHOLDER = "{input}"


class PromptTemplate(BaseModel):
    """提示詞範本 (P_I)"""
    model_config = ConfigDict(frozen=True)

    name: TemplateName = Field(..., description="範本名稱")
    body: str = Field(..., description="範本內容，含一個 {input} 佔位符")

    @field_validator("body")
    @classmethod
    def check_placeholder(cls, v: str) -> str:
        if v.count(PLACEHOLDER) != 1:
            raise ValueError("範本必須恰好包含一個 {input} 佔位符")
        return v

    def render(self, text: str) -> str:
        return self.body.replace(PLACEHOLDER, text)
