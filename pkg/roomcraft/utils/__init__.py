# 工具函數模組
