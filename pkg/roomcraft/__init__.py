# 室內佈局約束引擎
__version__ = "0.1.0"
