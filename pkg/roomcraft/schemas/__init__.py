# Pydantic 資料模型
