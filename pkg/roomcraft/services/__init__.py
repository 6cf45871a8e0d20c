# 佈局引擎服務模組
