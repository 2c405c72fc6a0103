#!/usr/bin/env python3
"""
双対モジュール

時間を遡る双対過程（死滅付き合流ランダムウォーク）を扱う。
同じ事象列から時刻 t の状態 X_t、過去からの結合による定常分布の厳密サンプル Y、
両者の結合 (X_t, Y) を作る。2体ウォーカーによる合流確率と T_corr の推定、
および2体の積状態空間での厳密計算も提供する。

時間の向き: 事象の「年齢」は時刻0（現在）から過去に向かって測る。
年齢 s の事象は前向き時刻 t - s の更新に対応する。
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import expm_multiply, spsolve

from .dynamics import ModelParams, check_compatible
from .exceptions import (
    ConfigError,
    EmptySet,
    EpochCap,
    EventCapExceeded,
    GridExhausted,
    NegativeTime,
    SameVertex,
    StateSpaceTooLarge,
)
from .graph import Graph
from .patterns import ColorConfig, Initial
from .utils.batch import Estimate, map_replicates, replicate_rng, seed_sequence
from .utils.logger import get_logger


logger = get_logger("dual")

# CFTP で遡る時間の上限
MAX_HORIZON = 2.0 ** 40

# 1セグメントで許すイベント数の上限
SEGMENT_EVENT_CAP = 10 ** 8

# 2体の積状態空間の上限（順序対の数）
PAIR_STATE_CAP = 4_000_000

# 辺の総当たりで T_corr を推定する辺数の上限
EXHAUSTIVE_EDGE_LIMIT = 10_000

# 一様初期配置を引く乱数ストリームの派生キー
_INITIAL_KEY = 1 << 30

# 辺サンプリング用の派生キー
_EDGE_SAMPLE_KEY = (1 << 30) + 1

SeedLike = Union[int, np.random.SeedSequence, None]


class EventKind(Enum):
    """更新事象の種類"""
    NOISE = "noise"
    COPY = "copy"


class HistoryEvent(NamedTuple):
    """1つの更新事象（value はノイズなら色、コピーなら隣接リストの添字）"""
    age: float
    vertex: int
    kind: EventKind
    value: int


@dataclass(frozen=True)
class EventHistory:
    """
    年齢区間 [start, start + horizon) の事象列（年齢昇順 = 前向き時刻の降順）

    Attributes:
        start: 区間の始点
        horizon: 区間の長さ
        ages: 事象の年齢
        vertices: 更新される頂点
        noise: True ならノイズ事象
        values: ノイズなら色、コピーなら隣接頂点の添字（孤立頂点は -1）
    """
    start: float
    horizon: float
    ages: np.ndarray = field(repr=False)
    vertices: np.ndarray = field(repr=False)
    noise: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    @property
    def stop(self) -> float:
        return self.start + self.horizon

    def __len__(self) -> int:
        return int(self.ages.size)

    def __iter__(self) -> Iterator[HistoryEvent]:
        for age, v, is_noise, value in zip(self.ages.tolist(), self.vertices.tolist(),
                                           self.noise.tolist(), self.values.tolist()):
            yield HistoryEvent(age, v, EventKind.NOISE if is_noise else EventKind.COPY, value)


def generate_history(
    g: Graph,
    p: ModelParams,
    t_from: float,
    t_to: float,
    rng: np.random.Generator
) -> EventHistory:
    """年齢区間 [t_from, t_to) の事象列を生成"""
    start, horizon = float(t_from), float(t_to) - float(t_from)
    if start < 0 or horizon < 0:
        raise NegativeTime(f"年齢区間が不正です: [{t_from}, {t_to})")
    count = int(rng.poisson(g.n * horizon)) if horizon > 0 else 0
    if count > SEGMENT_EVENT_CAP:
        raise EventCapExceeded(f"イベント数 {count} が上限 {SEGMENT_EVENT_CAP} を超えました")
    ages = start + np.sort(rng.random(count)) * horizon
    vertices = rng.integers(0, g.n, size=count)
    noise = rng.random(count) < p.theta
    colors = rng.integers(0, p.q, size=count)
    deg = g.degrees[vertices]
    picks = np.minimum((rng.random(count) * deg).astype(np.int64), np.maximum(deg - 1, 0))
    values = np.where(noise, colors, np.where(deg > 0, picks, -1))
    return EventHistory(float(start), float(horizon), ages, vertices, noise, values)


def segment_span(j: int) -> Tuple[float, float]:
    """j 番目のセグメントの年齢区間: [0,1), [1,2), [2,4), [4,8), ..."""
    if j == 0:
        return 0.0, 1.0
    return 2.0 ** (j - 1), 2.0 ** j


def _as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed is None:
        return np.random.SeedSequence()
    return seed_sequence(seed)


def _child_rng(ss: np.random.SeedSequence, key: int) -> np.random.Generator:
    child = np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (key,))
    return np.random.Generator(np.random.PCG64(child))


class HistoryStream:
    """
    セグメント単位で遅延生成される事象列

    セグメント j の乱数はシードと j だけで決まるので、
    どこまで遡っても既に生成した過去は変わらない。
    """

    def __init__(self, g: Graph, p: ModelParams, seed: SeedLike):
        self.g = g
        self.p = p
        self.seed_seq = _as_seed_sequence(seed)
        self._segments: List[EventHistory] = []

    def segment(self, j: int) -> EventHistory:
        while len(self._segments) <= j:
            k = len(self._segments)
            start, stop = segment_span(k)
            self._segments.append(
                generate_history(self.g, self.p, start, stop, _child_rng(self.seed_seq, k))
            )
        return self._segments[j]

    def events(self, horizon: float, skip: float = 0.0) -> Iterator[Tuple[int, bool, int]]:
        """年齢 [skip, horizon) の事象を (頂点, ノイズか, 値) で年齢順に返す"""
        j = 0
        while True:
            start, stop = segment_span(j)
            if start >= horizon:
                return
            if stop > skip:
                seg = self.segment(j)
                lo = int(np.searchsorted(seg.ages, skip, side='left'))
                hi = int(np.searchsorted(seg.ages, horizon, side='left'))
                yield from zip(seg.vertices[lo:hi].tolist(), seg.noise[lo:hi].tolist(),
                               seg.values[lo:hi].tolist())
            j += 1

    def initial_rng(self) -> np.random.Generator:
        """一様初期配置用の乱数生成器"""
        return _child_rng(self.seed_seq, _INITIAL_KEY)


# ---------------------------------------------------------------------------
# 合流ウォーカー系
# ---------------------------------------------------------------------------

class UnionFind:
    """経路圧縮付き Union-Find（代表元は常に最小の番号）"""

    def __init__(self, size: int):
        self.parent = list(range(size))

    def find(self, x: int) -> int:
        root = x
        parent = self.parent
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, x: int, y: int) -> int:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return rx
        if ry < rx:
            rx, ry = ry, rx
        self.parent[ry] = rx
        return rx

    def __len__(self) -> int:
        return len(self.parent)


class WalkerSystem:
    """
    死滅付き合流ランダムウォーク

    各ウォーカーは origin から出発する。クラスタ（合流したウォーカーの集合）は
    代表元の位置だけを持ち、ノイズ事象に当たると死滅してその色を持つ。
    死滅したクラスタは以後動かず合流もしない。

    Attributes:
        origin: ウォーカーごとの出発頂点
        clusters: ウォーカー番号上の Union-Find
        live: 生存クラスタ数
    """

    def __init__(self, g: Graph, origins: Sequence[int]):
        self.adjacency = g.adjacency
        self.origin = np.asarray(origins, dtype=np.int64)
        self.clusters = UnionFind(len(self.origin))
        self.position: List[int] = self.origin.tolist()
        self.occupant: Dict[int, int] = {}
        self.death_color: Dict[int, int] = {}
        self.live = 0
        for w, v in enumerate(self.position):
            other = self.occupant.get(v)
            if other is None:
                self.occupant[v] = w
                self.live += 1
            else:
                self.occupant[v] = self.clusters.union(other, w)

    @property
    def all_dead(self) -> bool:
        return self.live == 0

    def apply(self, v: int, is_noise: bool, value: int) -> None:
        """事象1つを処理（v に生存クラスタがいなければ何もしない）"""
        root = self.occupant.get(v)
        if root is None:
            return
        if is_noise:
            del self.occupant[v]
            self.death_color[root] = value
            self.live -= 1
            return
        if value < 0:
            return
        w = self.adjacency[v][value]
        del self.occupant[v]
        other = self.occupant.get(w)
        if other is None:
            self.occupant[w] = root
            self.position[root] = w
        else:
            merged = self.clusters.union(root, other)
            self.occupant[w] = merged
            self.position[merged] = w
            self.live -= 1

    def run(self, events) -> bool:
        """全クラスタが死滅するか事象が尽きるまで処理し、全滅したかを返す"""
        if self.live == 0:
            return True
        apply = self.apply
        for v, is_noise, value in events:
            apply(v, is_noise, value)
            if self.live == 0:
                return True
        return False

    def roots(self) -> List[int]:
        return [self.clusters.find(w) for w in range(len(self.origin))]

    def positions(self) -> np.ndarray:
        """ウォーカーごとの現在位置"""
        return np.array([self.position[r] for r in self.roots()], dtype=np.int64)

    def alive(self) -> np.ndarray:
        """ウォーカーごとの生存フラグ"""
        return np.array([r not in self.death_color for r in self.roots()], dtype=bool)

    def read(self, x0: Optional[np.ndarray]) -> np.ndarray:
        """
        ウォーカーごとの色

        死滅したクラスタは死滅時の色、生存クラスタは現在位置の x0 の色。
        """
        out = np.empty(len(self.origin), dtype=np.int64)
        for w, r in enumerate(self.roots()):
            color = self.death_color.get(r)
            if color is None:
                if x0 is None:
                    raise ValueError("生存クラスタがあるため初期配置が必要です")
                color = int(x0[self.position[r]])
            out[w] = color
        return out


def _initial_colors(x0, p: ModelParams, n: int, stream: HistoryStream) -> np.ndarray:
    if isinstance(x0, Initial):
        return stream.initial_rng().integers(0, p.q, size=n)
    return x0.colors


def _check_initial(g: Graph, p: ModelParams, x0) -> None:
    if not isinstance(x0, Initial):
        check_compatible(g, p, x0)


def backward_sample(
    g: Graph,
    p: ModelParams,
    x0: Union[ColorConfig, Initial],
    t: float,
    seed: SeedLike = None
) -> ColorConfig:
    """
    双対過程による時刻 t の状態のサンプル

    年齢 [0, t) の事象を処理し、死滅したクラスタは死滅時の色、
    生き残ったクラスタは最終位置の x0 の色を読む。
    run_forward(g, p, x0, t) と同分布。
    """
    _check_initial(g, p, x0)
    if t < 0:
        raise NegativeTime(f"時刻は0以上である必要があります: {t}")
    stream = HistoryStream(g, p, seed)
    system = WalkerSystem(g, range(g.n))
    system.run(stream.events(t))
    colors = system.read(None if system.all_dead else _initial_colors(x0, p, g.n, stream))
    return ColorConfig(p.q, colors)


def cftp_sample(
    g: Graph,
    p: ModelParams,
    seed: SeedLike = None,
    initial_horizon: float = 1.0
) -> ColorConfig:
    """
    過去からの結合（CFTP）による定常分布 μ_G の厳密サンプル

    遡る区間を initial_horizon から倍々に伸ばし、各回とも同じ事象列で
    ウォーカー系を作り直す。全クラスタが死滅した時点で各クラスタの色が決まる。

    Raises:
        EpochCap: 2^40 まで遡っても全滅しない場合
    """
    if initial_horizon <= 0:
        raise ConfigError(f"initial_horizon は正である必要があります: {initial_horizon}")
    stream = HistoryStream(g, p, seed)
    horizon = float(initial_horizon)
    while horizon <= MAX_HORIZON:
        system = WalkerSystem(g, range(g.n))
        if system.run(stream.events(horizon)):
            logger.debug(f"CFTP 完了: 遡った時間 {horizon}")
            return ColorConfig(p.q, system.read(None))
        horizon *= 2.0
    raise EpochCap(f"時間 {MAX_HORIZON} まで遡っても全クラスタが死滅しませんでした")


class CoupledSample(NamedTuple):
    """同じ事象列から作った (X_t, Y) と、年齢 t で生存していたウォーカー"""
    x_t: ColorConfig
    y: ColorConfig
    survived: np.ndarray


def coupled_sample(
    g: Graph,
    p: ModelParams,
    x0: Union[ColorConfig, Initial],
    t: float,
    seed: SeedLike = None
) -> CoupledSample:
    """
    (X_t, Y) の結合サンプル

    年齢 t までの処理で X_t を読み、同じ系をさらに過去へ進めて Y を読む。
    年齢 t より前に死滅したクラスタの頂点では X_t(v) = Y(v)。
    x0 に UNIFORM を渡すと一様初期配置を平均化した結合になる。
    """
    _check_initial(g, p, x0)
    if t < 0:
        raise NegativeTime(f"時刻は0以上である必要があります: {t}")
    stream = HistoryStream(g, p, seed)
    system = WalkerSystem(g, range(g.n))
    system.run(stream.events(t))
    survived = system.alive()
    x_t = system.read(None if system.all_dead else _initial_colors(x0, p, g.n, stream))

    horizon = max(1.0, 2.0 ** math.ceil(math.log2(t))) if t > 0 else 1.0
    done = system.run(stream.events(horizon, skip=t))
    while not done:
        if horizon >= MAX_HORIZON:
            raise EpochCap(f"時間 {MAX_HORIZON} まで遡っても全クラスタが死滅しませんでした")
        done = system.run(stream.events(2.0 * horizon, skip=horizon))
        horizon *= 2.0
    return CoupledSample(ColorConfig(p.q, x_t), ColorConfig(p.q, system.read(None)), survived)


# ---------------------------------------------------------------------------
# バッチ実行
# ---------------------------------------------------------------------------

def _backward_chunk(start: int, stop: int, seed: int, g, p, x0, t) -> list:
    return [backward_sample(g, p, x0, t, seed_sequence(seed, k)).colors for k in range(start, stop)]


def _cftp_chunk(start: int, stop: int, seed: int, g, p) -> list:
    return [cftp_sample(g, p, seed_sequence(seed, k)).colors for k in range(start, stop)]


def _coupled_chunk(start: int, stop: int, seed: int, g, p, x0, t) -> list:
    out = []
    for k in range(start, stop):
        sample = coupled_sample(g, p, x0, t, seed_sequence(seed, k))
        out.append((sample.x_t.colors, sample.y.colors, sample.survived))
    return out


def backward_sample_batch(g: Graph, p: ModelParams, x0, t: float, reps: int, seed: int,
                          threads: int = 1) -> np.ndarray:
    """backward_sample を reps 回実行して (reps, n) 配列で返す"""
    _check_initial(g, p, x0)
    rows = map_replicates(partial(_backward_chunk, g=g, p=p, x0=x0, t=t), reps, seed, threads)
    return np.array(rows, dtype=np.int64).reshape(reps, g.n)


def cftp_sample_batch(g: Graph, p: ModelParams, reps: int, seed: int,
                      threads: int = 1) -> np.ndarray:
    """cftp_sample を reps 回実行して (reps, n) 配列で返す"""
    rows = map_replicates(partial(_cftp_chunk, g=g, p=p), reps, seed, threads)
    logger.debug(f"CFTP サンプル {reps} 個")
    return np.array(rows, dtype=np.int64).reshape(reps, g.n)


def coupled_sample_batch(g: Graph, p: ModelParams, x0, t: float, reps: int, seed: int,
                         threads: int = 1) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """coupled_sample を reps 回実行して (X_t, Y, survived) の配列を返す"""
    _check_initial(g, p, x0)
    rows = map_replicates(partial(_coupled_chunk, g=g, p=p, x0=x0, t=t), reps, seed, threads)
    shape = (reps, g.n)
    xs = np.array([r[0] for r in rows], dtype=np.int64).reshape(shape)
    ys = np.array([r[1] for r in rows], dtype=np.int64).reshape(shape)
    alive = np.array([r[2] for r in rows], dtype=bool).reshape(shape)
    return xs, ys, alive


def _all_dead_chunk(start: int, stop: int, seed: int, g, p, t) -> list:
    out = []
    for k in range(start, stop):
        stream = HistoryStream(g, p, seed_sequence(seed, k))
        out.append(WalkerSystem(g, range(g.n)).run(stream.events(t)))
    return out


def all_dead_prob(g: Graph, p: ModelParams, t: float, reps: int, seed: int,
                  threads: int = 1) -> Estimate:
    """年齢 t までに全クラスタが死滅する確率の推定"""
    if t < 0:
        raise NegativeTime(f"時刻は0以上である必要があります: {t}")
    flags = map_replicates(partial(_all_dead_chunk, g=g, p=p, t=t), reps, seed, threads)
    return Estimate.from_bernoulli(int(sum(flags)), reps)


# ---------------------------------------------------------------------------
# 2体ウォーカー
# ---------------------------------------------------------------------------

def _step_walkers(pos: np.ndarray, g: Graph, u: np.ndarray) -> np.ndarray:
    """各ウォーカーを一様な隣接頂点へ動かす（孤立頂点ではその場に留まる）"""
    indptr, indices = g.csr
    deg = g.degrees[pos]
    if indices.size == 0:
        return pos
    offset = np.minimum((u * deg).astype(np.int64), np.maximum(deg - 1, 0))
    idx = np.minimum(indptr[pos] + offset, indices.size - 1)
    return np.where(deg > 0, indices[idx], pos)


def _meeting_chunk(start: int, stop: int, seed: int, g: Graph, theta: float,
                   u: int, v: int, key: Tuple[int, ...]) -> list:
    rng = replicate_rng(seed, *key, start)
    size = stop - start
    a = np.full(size, u, dtype=np.int64)
    b = np.full(size, v, dtype=np.int64)
    clock = np.zeros(size)
    out = np.full(size, np.inf)
    active = np.arange(size)
    while active.size:
        m = active.size
        clock[active] += rng.exponential(0.5, m)
        first = rng.random(m) < 0.5
        dies = rng.random(m) < theta
        moved = _step_walkers(np.where(first, a[active], b[active]), g, rng.random(m))
        a[active] = np.where(first & ~dies, moved, a[active])
        b[active] = np.where(~first & ~dies, moved, b[active])
        met = ~dies & (a[active] == b[active])
        out[active[met]] = clock[active[met]]
        active = active[~dies & ~met]
    return out.tolist()


def coalescence_times(
    g: Graph,
    p: ModelParams,
    u: int,
    v: int,
    reps: int,
    seed: int,
    threads: int = 1,
    key: Tuple[int, ...] = ()
) -> np.ndarray:
    """
    u, v から出る2体ウォーカーの合流時刻の標本（死滅したら inf）

    各ウォーカーはレート1で事象を受け、確率 θ で死滅、確率 1-θ で隣接頂点へ動く。
    乱数はチャンク先頭のレプリケート番号と key から派生する。
    """
    g.check_vertex(u)
    g.check_vertex(v)
    if u == v:
        raise SameVertex(f"異なる2頂点が必要です: {u}")
    worker = partial(_meeting_chunk, g=g, theta=p.theta, u=u, v=v, key=tuple(key))
    return np.asarray(map_replicates(worker, reps, seed, threads), dtype=float)


class CoalescenceEstimate(NamedTuple):
    """P(u↔v) と P(u↔_{>t} v) の推定"""
    p_meet: Estimate
    p_after: Estimate


def _after(times: np.ndarray, t: float) -> Estimate:
    hits = int(np.count_nonzero((times > t) & np.isfinite(times)))
    return Estimate.from_bernoulli(hits, times.size)


def coalescence_probs(g: Graph, p: ModelParams, u: int, v: int, t: float, reps: int,
                      seed: int, threads: int = 1) -> CoalescenceEstimate:
    """
    2体ウォーカーの合流確率

    p_meet は死滅前に合流する確率、p_after は時刻 t より後に死滅前に合流する確率。
    """
    if t < 0:
        raise NegativeTime(f"時刻は0以上である必要があります: {t}")
    times = coalescence_times(g, p, u, v, reps, seed, threads)
    meet = Estimate.from_bernoulli(int(np.count_nonzero(np.isfinite(times))), reps)
    return CoalescenceEstimate(meet, _after(times, t))


def coalescence_curve(g: Graph, p: ModelParams, u: int, v: int, t_grid: Sequence[float],
                      reps: int, seed: int, threads: int = 1) -> List[Estimate]:
    """t_grid の各時刻での p_after（全時刻で同じ標本を使う）"""
    times = coalescence_times(g, p, u, v, reps, seed, threads)
    return [_after(times, t) for t in t_grid]


@dataclass(frozen=True)
class TCorrEstimate:
    """
    T_corr の推定結果

    Attributes:
        time: Σ_{uv∈E} P(u↔_{>t}v) が √n を下回った最初の格子点
        totals: 各格子点での和の推定
        threshold: √n
        sampled_edges: 辺を標本抽出した場合はその数（総当たりなら None）
        grid: 時刻格子
    """
    time: float
    totals: Tuple[Estimate, ...]
    threshold: float
    sampled_edges: Optional[int] = None
    grid: Tuple[float, ...] = ()

    @property
    def crossing(self) -> Estimate:
        """time での和の推定"""
        return self.totals[self.grid.index(self.time)]


def _check_grid(t_grid: Sequence[float]) -> List[float]:
    grid = [float(t) for t in t_grid]
    if not grid:
        raise ConfigError("時刻格子が空です")
    if grid[0] < 0:
        raise NegativeTime(f"時刻は0以上である必要があります: {grid[0]}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("時刻格子は狭義単調増加である必要があります")
    return grid


def estimate_t_corr(
    g: Graph,
    p: ModelParams,
    t_grid: Sequence[float],
    reps: int,
    seed: int,
    threads: int = 1,
    edge_samples: int = EXHAUSTIVE_EDGE_LIMIT
) -> TCorrEstimate:
    """
    T_corr = inf{t : Σ_{uv∈E} P(u↔_{>t}v) < √n} を格子上で推定

    辺数が EXHAUSTIVE_EDGE_LIMIT 以下なら全辺、それを超えると edge_samples 本を
    一様に抽出して m / edge_samples 倍する。各辺の標本は全時刻で共通。

    Raises:
        GridExhausted: 格子の最後まで √n を下回らない場合
    """
    g.require_connected()
    grid = _check_grid(t_grid)
    edges = g.edges()
    scale = 1.0
    sampled = None
    if len(edges) > EXHAUSTIVE_EDGE_LIMIT:
        pick = replicate_rng(seed, _EDGE_SAMPLE_KEY).integers(0, len(edges), size=edge_samples)
        edges = [edges[i] for i in pick]
        scale = g.m / edge_samples
        sampled = edge_samples

    hits = np.zeros(len(grid))
    variance = np.zeros(len(grid))
    for i, (u, v) in enumerate(edges):
        times = coalescence_times(g, p, u, v, reps, seed, threads, key=(i,))
        finite = np.isfinite(times)
        for j, t in enumerate(grid):
            frac = np.count_nonzero(finite & (times > t)) / reps
            hits[j] += frac
            variance[j] += frac * (1.0 - frac) / reps

    totals = tuple(
        Estimate(scale * hits[j], scale * math.sqrt(variance[j]), reps) for j in range(len(grid))
    )
    threshold = math.sqrt(g.n)
    logger.info(f"T_corr 推定: 辺 {len(edges)} 本 × {reps} 回, 閾値 √n = {threshold:.6g}")
    for t, total in zip(grid, totals):
        if total.value < threshold:
            return TCorrEstimate(t, totals, threshold, sampled, tuple(grid))
    raise GridExhausted(f"格子の最大時刻 {grid[-1]} でも和が √n を下回りません")


def _stay_chunk(start: int, stop: int, seed: int, g: Graph, rate: float, t: float,
                inside: np.ndarray, start_probs: np.ndarray) -> list:
    rng = replicate_rng(seed, start)
    size = stop - start
    pos = rng.choice(g.n, size=size, p=start_probs)
    steps = rng.poisson(rate * t, size=size)
    ok = np.ones(size, dtype=bool)
    for i in range(int(steps.max()) if size else 0):
        active = np.flatnonzero(ok & (steps > i))
        if not active.size:
            break
        pos[active] = _step_walkers(pos[active], g, rng.random(active.size))
        ok[active] = inside[pos[active]]
    return ok.tolist()


def stay_prob(
    g: Graph,
    p: ModelParams,
    S: Sequence[int],
    t: float,
    start: Optional[Sequence[float]] = None,
    reps: int = 10_000,
    seed: int = 0,
    threads: int = 1
) -> Estimate:
    """
    レート 1-θ の（死滅しない）ランダムウォークが時刻 t まで S に留まる確率

    Args:
        S: 頂点集合
        start: 出発分布（長さ n、S 上に台を持つ）。None なら π_G を S に制限して正規化
    """
    members = sorted(set(int(v) for v in S))
    if not members:
        raise EmptySet("S が空です")
    for v in members:
        g.check_vertex(v)
    if t < 0:
        raise NegativeTime(f"時刻は0以上である必要があります: {t}")
    inside = np.zeros(g.n, dtype=bool)
    inside[members] = True

    if start is None:
        probs = np.where(inside, g.pi, 0.0)
    else:
        probs = np.asarray(start, dtype=float)
        if probs.shape != (g.n,) or np.any(probs < 0):
            raise ConfigError("出発分布は長さ n の非負ベクトルである必要があります")
        if np.any(probs[~inside] > 0):
            raise ConfigError("出発分布は S 上に台を持つ必要があります")
    if probs.sum() <= 0:
        raise ConfigError("出発分布の総和が0です")
    probs = probs / probs.sum()

    if inside.all():
        return Estimate(1.0, 0.0, reps)
    worker = partial(_stay_chunk, g=g, rate=1.0 - p.theta, t=t, inside=inside, start_probs=probs)
    flags = map_replicates(worker, reps, seed, threads)
    return Estimate.from_bernoulli(int(sum(flags)), reps)


def coalescence_matrix(g: Graph, p: ModelParams, reps: int, seed: int,
                       threads: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """
    全頂点対の P(u↔v) の推定

    Returns:
        (確率行列, 標準誤差行列)。対角は 1 と 0
    """
    probs = np.eye(g.n)
    errors = np.zeros((g.n, g.n))
    index = 0
    for u in range(g.n):
        for v in range(u + 1, g.n):
            times = coalescence_times(g, p, u, v, reps, seed, threads, key=(index,))
            est = Estimate.from_bernoulli(int(np.count_nonzero(np.isfinite(times))), reps)
            probs[u, v] = probs[v, u] = est.value
            errors[u, v] = errors[v, u] = est.stderr
            index += 1
    return probs, errors


class NeighborCoalescence(NamedTuple):
    """h_G(v) = 隣接頂点 w についての P(v↔w) の平均と標準誤差"""
    values: np.ndarray
    stderr: np.ndarray


def neighbor_coalescence(g: Graph, p: ModelParams, reps: int, seed: int,
                         threads: int = 1) -> NeighborCoalescence:
    """h_G の推定（辺ごとに独立な2体シミュレーション）"""
    total = np.zeros(g.n)
    var = np.zeros(g.n)
    for i, (u, v) in enumerate(g.edges()):
        times = coalescence_times(g, p, u, v, reps, seed, threads, key=(i,))
        est = Estimate.from_bernoulli(int(np.count_nonzero(np.isfinite(times))), reps)
        for w in (u, v):
            total[w] += est.value
            var[w] += est.stderr ** 2
    deg = np.maximum(g.degrees, 1)
    return NeighborCoalescence(total / deg, np.sqrt(var) / deg)


# ---------------------------------------------------------------------------
# 2体の積状態空間での厳密計算
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairChain:
    """
    u ≠ v の順序対 (a, b) 上の吸収連鎖

    Attributes:
        generator: 一時状態間の生成行列（CSR）
        meet_rate: 各状態から合流へ吸収されるレート
        n: 頂点数
    """
    generator: sparse.csr_matrix
    meet_rate: np.ndarray
    n: int

    def index(self, a: int, b: int) -> int:
        return _pair_index(self.n, a, b)


def _pair_index(n: int, a: int, b: int) -> int:
    if a == b:
        raise SameVertex(f"異なる2頂点が必要です: {a}")
    return a * (n - 1) + (b if b < a else b - 1)


def pair_chain(g: Graph, p: ModelParams) -> PairChain:
    """2体ウォーカーの吸収連鎖を組み立てる"""
    n = g.n
    states = n * (n - 1)
    if states > PAIR_STATE_CAP:
        raise StateSpaceTooLarge(f"2体状態数 {states} が上限 {PAIR_STATE_CAP} を超えます")
    move = 1.0 - p.theta
    rows: List[int] = []
    cols: List[int] = []
    vals: List[float] = []
    meet = np.zeros(states)
    diag = np.zeros(states)
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            s = _pair_index(n, a, b)
            diag[s] = -2.0 * p.theta
            for mover, other, first in ((a, b, True), (b, a, False)):
                nbrs = g.adjacency[mover]
                if not nbrs:
                    continue
                diag[s] -= move
                rate = move / len(nbrs)
                for w in nbrs:
                    if w == other:
                        meet[s] += rate
                    else:
                        rows.append(s)
                        cols.append(_pair_index(n, w, b) if first else _pair_index(n, a, w))
                        vals.append(rate)
    rows.extend(range(states))
    cols.extend(range(states))
    vals.extend(diag.tolist())
    generator = sparse.csr_matrix((vals, (rows, cols)), shape=(states, states))
    return PairChain(generator, meet, n)


def _meet_vector(chain: PairChain) -> np.ndarray:
    if chain.meet_rate.size == 0:
        return chain.meet_rate
    return np.atleast_1d(spsolve((-chain.generator).tocsc(), chain.meet_rate))


def exact_coalescence_probs(g: Graph, p: ModelParams, u: int, v: int,
                            t: float = 0.0) -> Tuple[float, float]:
    """
    2体の (P(u↔v), P(u↔_{>t}v)) の厳密値

    合流確率 h は -Q h = 合流レート を解き、t 以降の合流確率は e^{tQ} h で求める。
    """
    g.check_vertex(u)
    g.check_vertex(v)
    if t < 0:
        raise NegativeTime(f"時刻は0以上である必要があります: {t}")
    chain = pair_chain(g, p)
    h = _meet_vector(chain)
    s = chain.index(u, v)
    after = h if t == 0 else expm_multiply(chain.generator * t, h)
    return float(h[s]), float(after[s])


@dataclass(frozen=True)
class ExactTCorr:
    """厳密計算による T_corr（格子上）と各格子点での辺和"""
    time: float
    totals: Tuple[float, ...]
    threshold: float


def exact_t_corr(g: Graph, p: ModelParams, t_grid: Sequence[float]) -> ExactTCorr:
    """2体吸収連鎖による Σ_{uv∈E} P(u↔_{>t}v) と T_corr の厳密値"""
    g.require_connected()
    grid = _check_grid(t_grid)
    chain = pair_chain(g, p)
    h = _meet_vector(chain)
    idx = np.array([chain.index(u, v) for u, v in g.edges()], dtype=np.int64)
    totals = []
    for t in grid:
        after = h if t == 0 else expm_multiply(chain.generator * t, h)
        totals.append(float(after[idx].sum()))
    threshold = math.sqrt(g.n)
    for t, total in zip(grid, totals):
        if total < threshold:
            return ExactTCorr(t, tuple(totals), threshold)
    raise GridExhausted(f"格子の最大時刻 {grid[-1]} でも和が √n を下回りません")


def exact_neighbor_coalescence(g: Graph, p: ModelParams) -> np.ndarray:
    """h_G の厳密値"""
    chain = pair_chain(g, p)
    h = _meet_vector(chain)
    out = np.zeros(g.n)
    for v in range(g.n):
        nbrs = g.adjacency[v]
        if nbrs:
            out[v] = float(np.mean([h[chain.index(v, w)] for w in nbrs]))
    return out
