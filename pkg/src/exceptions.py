#!/usr/bin/env python3
"""
例外定義

ライブラリ全体で使う例外クラス。
CLIでは各例外の exit_code をそのまま終了コードとして返す。
"""


class NoisyVoterError(Exception):
    """全例外の基底クラス"""
    exit_code = 1


# ---------------------------------------------------------------------------
# 入力・設定エラー（終了コード 2）
# ---------------------------------------------------------------------------

class ConfigError(NoisyVoterError):
    """設定・引数が事前条件を満たさない"""
    exit_code = 2


class ParamMismatch(ConfigError):
    """モデルパラメータと初期配置の q や n が食い違う"""


class SizeMismatch(ConfigError):
    """スペクトルと配置の頂点数が食い違う"""


class ShapeMismatch(ConfigError):
    """分布・周辺確率の形状が食い違う"""


class VertexOutOfRange(ConfigError):
    """頂点番号が範囲外"""


class SelfLoop(ConfigError):
    """自己ループ辺"""


class SideTooSmall(ConfigError):
    """トーラスの一辺が3未満"""


class ColorOutOfRange(ConfigError):
    """色が [0, q) の範囲外"""


class ComponentOutOfRange(ConfigError):
    """格子パターンのベクトル成分が範囲外、または次元が合わない"""


class NotMultiple(ConfigError):
    """n が q の倍数でない"""


class NotBipartite(ConfigError):
    """グラフが二部グラフでない"""


class Disconnected(ConfigError):
    """グラフが連結でない"""


class EmptySet(ConfigError):
    """空の頂点集合"""


class SameVertex(ConfigError):
    """2つのウォーカーの出発点が同じ"""


class KOutOfRange(ConfigError):
    """べき k が [1, q) の範囲外"""


class NegativeTime(ConfigError):
    """負の時刻"""


class BadHG(ConfigError):
    """合流確率の推定値が [0, 1] から誤差を超えてはみ出している"""


# ---------------------------------------------------------------------------
# 資源上限（終了コード 3）
# ---------------------------------------------------------------------------

class ResourceCapError(NoisyVoterError):
    """計算資源の上限を超えた"""
    exit_code = 3


class TooLarge(ResourceCapError):
    """密な固有値分解には大きすぎるグラフ"""


class StateSpaceTooLarge(ResourceCapError):
    """q^n が厳密計算の上限を超える"""


class EventCapExceeded(ResourceCapError):
    """1回の実行のイベント数が上限を超えた"""


class EpochCap(ResourceCapError):
    """CFTP が時間上限までに全クラスタの死滅に到達しなかった"""


# ---------------------------------------------------------------------------
# 計算の失敗（終了コード 1）
# ---------------------------------------------------------------------------

class ComputationError(NoisyVoterError):
    """計算が結果を返せなかった"""
    exit_code = 1


class NotFound(ComputationError):
    """条件を満たす半径が見つからない"""


class GridExhausted(ComputationError):
    """時刻グリッド上で閾値を下回らなかった"""


class NoConvergence(ComputationError):
    """反復が収束しなかった"""


# ---------------------------------------------------------------------------
# 警告
# ---------------------------------------------------------------------------

class DuplicateEdgeWarning(UserWarning):
    """重複辺を取り除いた"""
