"""
ノイズ付き投票者モデルの混合時間解析ツール
"""

__version__ = "0.1.0"
