#!/usr/bin/env python3
"""
初期配置モジュール

単色・交互（チェッカーボード）・格子パターン（レインボー、ナイト）・
一様ランダムの初期配置を作る。色は内部では 0..q-1 の整数で持ち、
1の q 乗根への埋め込み ω^{k x(v)} は必要なときだけ計算する。
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .exceptions import ColorOutOfRange, ComponentOutOfRange, ConfigError, NotBipartite, NotMultiple
from .graph import Graph, bipartition


class Initial(Enum):
    """決定的でない初期条件"""
    UNIFORM = "uniform"


# 一様初期分布 𝒰
UNIFORM = Initial.UNIFORM


@dataclass(frozen=True, eq=False)
class ColorConfig:
    """
    色配置（各頂点に [0, q) の色）

    Attributes:
        q: 色数（2以上）
        colors: 頂点ごとの色
    """
    q: int
    colors: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.q < 2:
            raise ConfigError(f"色数 q は2以上である必要があります: {self.q}")
        colors = np.array(self.colors, dtype=np.int64).reshape(-1)
        if colors.size and (colors.min() < 0 or colors.max() >= self.q):
            raise ColorOutOfRange(f"色は [0, {self.q}) の範囲である必要があります")
        colors.setflags(write=False)
        object.__setattr__(self, 'colors', colors)

    @property
    def n(self) -> int:
        return int(self.colors.size)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, ColorConfig):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.colors, other.colors)

    def __hash__(self) -> int:
        return hash((self.q, self.colors.tobytes()))

    def as_tuple(self) -> tuple:
        return tuple(int(c) for c in self.colors)

    def embedding(self, k: int = 1) -> np.ndarray:
        """1の q 乗根への埋め込みの k 乗 ω^{k x(v)}"""
        return root_embedding(self.colors, self.q, k)

    def encode(self) -> int:
        """q 進表記の状態番号（頂点0が最下位桁）"""
        return int(np.dot(self.colors, self.q ** np.arange(self.n, dtype=np.int64)))

    @classmethod
    def decode(cls, code: int, n: int, q: int) -> 'ColorConfig':
        """状態番号から配置を復元"""
        digits = (code // q ** np.arange(n, dtype=np.int64)) % q
        return cls(q, digits)


def root_embedding(colors: np.ndarray, q: int, k: int = 1) -> np.ndarray:
    """色配列（任意形状）を ω^{k x} に写す"""
    return np.exp(2j * np.pi * k * (np.asarray(colors) % q) / q)


def monochromatic(n: int, q: int, color: int = 0) -> ColorConfig:
    """単色配置"""
    if not 0 <= color < q:
        raise ColorOutOfRange(f"色 {color} は [0, {q}) の範囲外です")
    return ColorConfig(q, np.full(n, color, dtype=np.int64))


def alternating(g: Graph, q: int = 2) -> ColorConfig:
    """
    二部グラフの交互配置

    頂点0を含む側 V1 に色1、もう一方に色0を置く。
    """
    parts = bipartition(g)
    if parts is None:
        raise NotBipartite("奇閉路があるため交互配置は作れません")
    colors = np.zeros(g.n, dtype=np.int64)
    colors[list(parts[0])] = 1
    return ColorConfig(q, colors)


def lattice_pattern(n: int, d: int, q: int, v: Sequence[int]) -> ColorConfig:
    """
    トーラス (Z/nZ)^d 上の格子パターン x_v(j) = Σ j_i v_i mod q

    Args:
        n: 一辺の長さ（q の倍数）
        d: 次元
        q: 色数
        v: 各成分が [0, q) の d 次元ベクトル
    """
    v = [int(c) for c in v]
    if len(v) != d:
        raise ComponentOutOfRange(f"ベクトルの次元 {len(v)} が d={d} と一致しません")
    if any(not 0 <= c < q for c in v):
        raise ComponentOutOfRange(f"ベクトル成分は [0, {q}) の範囲である必要があります: {v}")
    if n % q != 0:
        raise NotMultiple(f"n={n} は q={q} の倍数である必要があります")
    coords = np.indices((n,) * d).reshape(d, -1)
    colors = (np.asarray(v, dtype=np.int64) @ coords) % q
    return ColorConfig(q, colors)


def rainbow(n: int, d: int, q: int) -> ColorConfig:
    """レインボー配置（v = (1, ..., 1)）"""
    return lattice_pattern(n, d, q, [1] * d)


def knight(n: int, q: int, d: int = 2) -> ColorConfig:
    """ナイト配置（v = (1, ..., 1, 2)）"""
    return lattice_pattern(n, d, q, [1] * (d - 1) + [2])


def uniform_random(n: int, q: int, seed: int) -> ColorConfig:
    """各頂点独立に一様な色"""
    rng = np.random.default_rng(seed)
    return ColorConfig(q, rng.integers(0, q, size=n))


def permute_colors(x: ColorConfig, perm: Sequence[int]) -> ColorConfig:
    """色の付け替え c -> perm[c]"""
    perm = np.asarray(perm, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(x.q)):
        raise ConfigError(f"perm は [0, {x.q}) の置換である必要があります")
    return ColorConfig(x.q, perm[x.colors])


# ---------------------------------------------------------------------------
# 入出力
# ---------------------------------------------------------------------------

def read_color_config(path) -> ColorConfig:
    """
    色配置ファイルを読み込む

    1行目 "q <q>"、以降1行1頂点の色。
    """
    with open(path, 'r', encoding='utf-8') as f:
        lines = [line.strip() for line in f if line.strip()]
    if not lines or not lines[0].startswith('q '):
        raise ConfigError(f"{path}: 1行目は 'q <q>' である必要があります")
    try:
        q = int(lines[0].split()[1])
        colors = [int(line) for line in lines[1:]]
    except ValueError as e:
        raise ConfigError(f"{path}: 整数として読めない行があります") from e
    return ColorConfig(q, colors)


def write_color_config(x: ColorConfig, path) -> None:
    """色配置ファイルを書き出す"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(f"q {x.q}\n")
        for c in x.colors:
            f.write(f"{int(c)}\n")


def color_config_from_json(data: Union[str, Iterable[int]], q: int) -> ColorConfig:
    """JSON 文字列または整数配列から色配置を作る"""
    if isinstance(data, str):
        data = json.loads(data)
    return ColorConfig(q, list(data))
