#!/usr/bin/env python3
"""
ダイナミクスモジュール

ノイズ付き投票者モデルの前向きシミュレーション（連続時間、各頂点レート1）と、
離散時間鎖の1ステップ期待値の厳密計算。

連続時間は重ね合わせで実現する: 全体でレート n のポアソン時計が鳴るたびに
一様に選んだ頂点を更新する。各頂点レート1の独立時計と同分布。
"""

from dataclasses import dataclass
from functools import partial
from typing import Optional

import numpy as np

from .exceptions import ConfigError, EventCapExceeded, KOutOfRange, NegativeTime, ParamMismatch
from .graph import Graph
from .patterns import ColorConfig, root_embedding
from .utils.batch import map_replicates, replicate_rng
from .utils.logger import get_logger


logger = get_logger("dynamics")

# 1回の実行で許すイベント数の上限
EVENT_CAP = 10 ** 9

# 一度に生成するイベント数
_EVENT_BLOCK = 1 << 18


@dataclass(frozen=True)
class ModelParams:
    """
    モデルパラメータ

    Attributes:
        theta: ノイズ確率 (0, 1]
        q: 色数（2以上）
    """
    theta: float
    q: int

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ConfigError(f"theta は (0, 1] の範囲である必要があります: {self.theta}")
        if self.q < 2:
            raise ConfigError(f"q は2以上である必要があります: {self.q}")

    def gamma(self, lam):
        """減衰率 γ = 1 - (1 - θ) λ"""
        return 1.0 - (1.0 - self.theta) * lam


@dataclass(frozen=True)
class ForwardEvents:
    """
    前向きの更新イベント列（時刻順）

    Attributes:
        vertices: 更新される頂点
        noise: True ならノイズ更新、False なら隣接頂点のコピー
        colors: ノイズ更新で選ばれる色
        picks: コピー元を選ぶ [0, 1) の一様乱数
    """
    vertices: np.ndarray
    noise: np.ndarray
    colors: np.ndarray
    picks: np.ndarray

    def __len__(self) -> int:
        return int(self.vertices.size)

    def with_colors(self, perm) -> 'ForwardEvents':
        """ノイズの色を perm で付け替えたイベント列"""
        perm = np.asarray(perm, dtype=np.int64)
        return ForwardEvents(self.vertices, self.noise, perm[self.colors], self.picks)


def check_compatible(g: Graph, p: ModelParams, x: ColorConfig) -> None:
    """グラフ・パラメータ・配置の整合性チェック"""
    if x.q != p.q:
        raise ParamMismatch(f"配置の q={x.q} がモデルの q={p.q} と一致しません")
    if x.n != g.n:
        raise ParamMismatch(f"配置の頂点数 {x.n} がグラフの n={g.n} と一致しません")


def sample_events(g: Graph, p: ModelParams, t: float, rng: np.random.Generator) -> ForwardEvents:
    """時間 [0, t] の更新イベントを生成"""
    if t < 0:
        raise NegativeTime(f"時刻は0以上である必要があります: {t}")
    count = int(rng.poisson(g.n * t)) if t > 0 else 0
    if count > EVENT_CAP:
        raise EventCapExceeded(f"イベント数 {count} が上限 {EVENT_CAP} を超えました")
    return ForwardEvents(
        vertices=rng.integers(0, g.n, size=count),
        noise=rng.random(count) < p.theta,
        colors=rng.integers(0, p.q, size=count),
        picks=rng.random(count),
    )


def apply_events(g: Graph, x0: ColorConfig, events: ForwardEvents) -> ColorConfig:
    """イベント列を初期配置に順に適用"""
    state = x0.colors.tolist()
    adjacency = g.adjacency
    for start in range(0, len(events), _EVENT_BLOCK):
        stop = start + _EVENT_BLOCK
        block = zip(
            events.vertices[start:stop].tolist(),
            events.noise[start:stop].tolist(),
            events.colors[start:stop].tolist(),
            events.picks[start:stop].tolist(),
        )
        for v, is_noise, color, pick in block:
            if is_noise:
                state[v] = color
            else:
                nbrs = adjacency[v]
                if nbrs:
                    state[v] = state[nbrs[int(pick * len(nbrs))]]
    return ColorConfig(x0.q, state)


def run_forward(
    g: Graph,
    p: ModelParams,
    x0: ColorConfig,
    t: float,
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None
) -> ColorConfig:
    """
    時刻 t での状態をシミュレーション

    各頂点はレート1で更新され、確率 1-θ で一様な隣接頂点の色をコピー、
    確率 θ で色を一様に引き直す。

    Args:
        g: グラフ
        p: モデルパラメータ
        x0: 初期配置
        t: 時刻（0以上）
        seed: 乱数シード（rng が与えられなければ使う）
        rng: 乱数生成器

    Returns:
        時刻 t の配置
    """
    check_compatible(g, p, x0)
    if rng is None:
        rng = np.random.default_rng(seed)
    events = sample_events(g, p, t, rng)
    return apply_events(g, x0, events)


def _forward_chunk(start: int, stop: int, seed: int, g: Graph, p: ModelParams,
                   x0: ColorConfig, t: float) -> list:
    return [run_forward(g, p, x0, t, rng=replicate_rng(seed, k)).colors for k in range(start, stop)]


def run_forward_batch(
    g: Graph,
    p: ModelParams,
    x0: ColorConfig,
    t: float,
    reps: int,
    seed: int,
    threads: int = 1
) -> np.ndarray:
    """
    独立なレプリケートをまとめて実行

    Returns:
        (reps, n) の色配列。レプリケート k は replicate_rng(seed, k) を使う
    """
    check_compatible(g, p, x0)
    worker = partial(_forward_chunk, g=g, p=p, x0=x0, t=t)
    rows = map_replicates(worker, reps, seed, threads)
    logger.debug(f"前向きシミュレーション {reps} 回 (t={t})")
    return np.array(rows, dtype=np.int64).reshape(reps, g.n)


def discrete_step(g: Graph, p: ModelParams, state: np.ndarray, rng: np.random.Generator) -> None:
    """離散時間鎖の1ステップ（一様に選んだ1頂点を更新、state をその場で書き換え）"""
    v = int(rng.integers(0, g.n))
    if rng.random() < p.theta:
        state[v] = rng.integers(0, p.q)
    else:
        nbrs = g.adjacency[v]
        if nbrs:
            state[v] = state[nbrs[int(rng.integers(0, len(nbrs)))]]


def one_step_expectation(
    g: Graph,
    p: ModelParams,
    x: ColorConfig,
    k: int,
    w: np.ndarray
) -> complex:
    """
    離散時間鎖1ステップ後の E_x[Σ_v w(v) ω^{k X_1(v)}] の厳密値

    更新されない質量 (1-1/n)、ノイズ質量 θ/n（Σ_ω ω^k = 0 なので寄与0）、
    コピー質量 (1-θ)/n（隣接頂点で平均）を頂点ごとに足し合わせる。
    """
    check_compatible(g, p, x)
    if not 1 <= k < p.q:
        raise KOutOfRange(f"k は [1, {p.q}) の範囲である必要があります: {k}")
    w = np.asarray(w)
    if w.shape != (g.n,):
        raise ParamMismatch(f"重みの長さ {w.shape} が n={g.n} と一致しません")

    z = root_embedding(x.colors, p.q, k)
    n = g.n
    stay = (1.0 - 1.0 / n) * z
    copy = (1.0 - p.theta) / n * g.walk_apply(z)
    return complex(np.sum(w * (stay + copy)))
