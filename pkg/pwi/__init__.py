"""
分段线性插值滤波器 - 信号估计包
"""

__version__ = "1.0.0"
