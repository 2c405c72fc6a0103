#!/usr/bin/env python3
"""
グラフモジュール

単純無向グラフの構築・読み込みと、球・増大条件・コンダクタンス・
二部分割などの幾何的な問い合わせを提供する。

頂点は 0 始まりの整数。トーラスの頂点 (i_1, ..., i_d) は行優先で
i_1 * n^(d-1) + ... + i_d に対応する。
"""

import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Set, Tuple, FrozenSet

import numpy as np

from .exceptions import (
    ConfigError,
    Disconnected,
    DuplicateEdgeWarning,
    EmptySet,
    NotFound,
    SelfLoop,
    SideTooSmall,
    VertexOutOfRange,
)
from .utils.logger import get_logger


logger = get_logger("graph")


@dataclass(frozen=True)
class GrowthParams:
    """部分指数的な球の増大条件 |B_v(r)| <= c0 * exp(r^(1-alpha)) のパラメータ"""
    c0: float
    alpha: float

    def __post_init__(self):
        if not self.c0 > 0:
            raise ConfigError(f"c0 は正である必要があります: {self.c0}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha は (0, 1) の範囲である必要があります: {self.alpha}")

    def bound(self, r: int) -> float:
        """半径 r の球の大きさの上限"""
        return self.c0 * math.exp(r ** (1.0 - self.alpha))


@dataclass(frozen=True)
class GrowthViolation:
    """増大条件の違反 (v, r)"""
    vertex: int
    radius: int
    ball_size: int
    bound: float


@dataclass(frozen=True, eq=False)
class Graph:
    """
    単純無向グラフ（構築後は不変）

    Attributes:
        n: 頂点数
        adjacency: 頂点ごとのソート済み隣接リスト
        m: 辺数 |E|
        degrees: 次数 d_G(v)
        pi: ランダムウォークの定常分布 d_G(v) / (2|E|)
        connected: 連結かどうか（構築時に一度だけ判定）
        duplicate_edges: 構築時に取り除いた重複辺の数
    """
    n: int
    adjacency: Tuple[Tuple[int, ...], ...]
    m: int
    degrees: np.ndarray = field(repr=False)
    pi: np.ndarray = field(repr=False)
    connected: bool = True
    duplicate_edges: int = 0

    def neighbors(self, v: int) -> Tuple[int, ...]:
        """v の隣接頂点"""
        return self.adjacency[v]

    def edges(self) -> List[Tuple[int, int]]:
        """u < v となる辺 (u, v) のリスト（辞書順）"""
        return [(u, v) for u in range(self.n) for v in self.adjacency[u] if u < v]

    def pi_fraction(self, v: int) -> Fraction:
        """π_G(v) の有理数表現"""
        if self.m == 0:
            return Fraction(1, self.n)
        return Fraction(int(self.degrees[v]), 2 * self.m)

    def require_connected(self) -> None:
        """連結でなければ Disconnected を送出"""
        if not self.connected:
            raise Disconnected("連結グラフが必要です")

    def check_vertex(self, v: int) -> None:
        """頂点番号の範囲チェック"""
        if not 0 <= v < self.n:
            raise VertexOutOfRange(f"頂点 {v} は [0, {self.n}) の範囲外です")

    def walk_apply(self, f: np.ndarray) -> np.ndarray:
        """
        ランダムウォーク作用素 P を関数に作用させる

        (Pf)(v) は隣接頂点上の f の平均。孤立頂点では (Pf)(v) = f(v)。
        """
        f = np.asarray(f)
        rows, cols = self._edge_arrays
        deg = self.degrees
        if np.iscomplexobj(f):
            total = (np.bincount(rows, weights=f[cols].real, minlength=self.n)
                     + 1j * np.bincount(rows, weights=f[cols].imag, minlength=self.n))
        else:
            total = np.bincount(rows, weights=f[cols].astype(float), minlength=self.n)
        out = np.where(deg > 0, total / np.maximum(deg, 1), f)
        return out

    def walk_matrix(self) -> np.ndarray:
        """遷移行列 P（密行列）"""
        mat = np.zeros((self.n, self.n))
        for v, nbrs in enumerate(self.adjacency):
            if nbrs:
                mat[v, list(nbrs)] = 1.0 / len(nbrs)
            else:
                mat[v, v] = 1.0
        return mat

    @cached_property
    def csr(self) -> Tuple[np.ndarray, np.ndarray]:
        """隣接リストの CSR 表現 (indptr, indices)"""
        indptr = np.concatenate(([0], np.cumsum(self.degrees))).astype(np.int64)
        indices = np.fromiter(
            (w for nbrs in self.adjacency for w in nbrs), dtype=np.int64, count=int(self.degrees.sum())
        )
        return indptr, indices

    @cached_property
    def _edge_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        rows = np.repeat(np.arange(self.n), self.degrees)
        return rows, self.csr[1]


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _is_connected(n: int, adjacency: Sequence[Sequence[int]]) -> bool:
    if n == 0:
        return False
    seen = [False] * n
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        u = queue.popleft()
        for w in adjacency[u]:
            if not seen[w]:
                seen[w] = True
                count += 1
                queue.append(w)
    return count == n


def build_graph(n: int, edges: Iterable[Tuple[int, int]]) -> Graph:
    """
    頂点数と辺リストから単純グラフを構築

    重複辺は取り除き、DuplicateEdgeWarning で件数を通知する。

    Args:
        n: 頂点数
        edges: 頂点対のリスト

    Returns:
        次数と π_G を計算済みの Graph
    """
    if n < 1:
        raise ConfigError(f"頂点数は1以上である必要があります: {n}")

    edge_set: Set[Tuple[int, int]] = set()
    duplicates = 0
    for u, v in edges:
        u, v = int(u), int(v)
        for w in (u, v):
            if not 0 <= w < n:
                raise VertexOutOfRange(f"頂点 {w} は [0, {n}) の範囲外です")
        if u == v:
            raise SelfLoop(f"自己ループ ({u}, {v}) は使えません")
        key = (u, v) if u < v else (v, u)
        if key in edge_set:
            duplicates += 1
            continue
        edge_set.add(key)

    if duplicates:
        warnings.warn(f"重複辺を {duplicates} 本取り除きました", DuplicateEdgeWarning, stacklevel=2)
        logger.warning(f"重複辺を {duplicates} 本取り除きました")

    neighbor_lists: List[List[int]] = [[] for _ in range(n)]
    for u, v in edge_set:
        neighbor_lists[u].append(v)
        neighbor_lists[v].append(u)
    adjacency = tuple(tuple(sorted(nbrs)) for nbrs in neighbor_lists)

    m = len(edge_set)
    degrees = np.array([len(nbrs) for nbrs in adjacency], dtype=np.int64)
    if m > 0:
        pi = degrees / (2.0 * m)
    else:
        pi = np.full(n, 1.0 / n)

    return Graph(
        n=n,
        adjacency=adjacency,
        m=m,
        degrees=_readonly(degrees),
        pi=_readonly(pi),
        connected=_is_connected(n, adjacency),
        duplicate_edges=duplicates,
    )


# ---------------------------------------------------------------------------
# 組み込みグラフ
# ---------------------------------------------------------------------------

def torus(side: int, dim: int) -> Graph:
    """
    d次元離散トーラス (Z/nZ)^d

    Args:
        side: 一辺の長さ n（3以上）
        dim: 次元 d（1以上）
    """
    if side < 3:
        raise SideTooSmall(f"トーラスの一辺は3以上である必要があります: {side}")
    if dim < 1:
        raise ConfigError(f"次元は1以上である必要があります: {dim}")

    count = side ** dim
    strides = [side ** (dim - 1 - k) for k in range(dim)]
    edges = []
    for index, coords in enumerate(np.ndindex(*([side] * dim))):
        for k in range(dim):
            step = ((coords[k] + 1) % side - coords[k]) * strides[k]
            edges.append((index, index + step))
    return build_graph(count, edges)


def cycle(n: int) -> Graph:
    """長さ n の閉路"""
    return torus(n, 1)


def path_graph(n: int) -> Graph:
    """長さ n のパス"""
    return build_graph(n, [(i, i + 1) for i in range(n - 1)])


def complete_graph(n: int) -> Graph:
    """完全グラフ K_n"""
    return build_graph(n, combinations(range(n), 2))


def star(leaves: int) -> Graph:
    """星グラフ K_{1,k}（中心は頂点0）"""
    return build_graph(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def random_connected_graph(n: int, p: float, seed: int) -> Graph:
    """
    ランダムな連結グラフ

    ランダムな全域木に、各頂点対を確率 p で独立に追加した辺を重ねる。
    """
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    edges = set()
    for i in range(1, n):
        parent = order[rng.integers(0, i)]
        u, v = int(order[i]), int(parent)
        edges.add((min(u, v), max(u, v)))
    for u, v in combinations(range(n), 2):
        if rng.random() < p:
            edges.add((u, v))
    return build_graph(n, sorted(edges))


# ---------------------------------------------------------------------------
# 辺リストの入出力
# ---------------------------------------------------------------------------

def read_edge_list(path) -> Graph:
    """
    辺リストファイルを読み込む

    1行1辺 "u v"。'#' 以降はコメント、空行は無視。
    最初の有効行が "n <count>" なら頂点数として使い、なければ最大番号 + 1。
    """
    n: Optional[int] = None
    edges: List[Tuple[int, int]] = []
    first = True
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if first and parts[0] == 'n':
                first = False
                if len(parts) != 2:
                    raise ConfigError(f"{path}:{lineno}: 'n <count>' の形式が不正です")
                n = int(parts[1])
                continue
            first = False
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: 'u v' の形式が不正です: {raw.rstrip()}")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError as e:
                raise ConfigError(f"{path}:{lineno}: 頂点番号が整数ではありません") from e

    if n is None:
        if not edges:
            raise ConfigError(f"{path}: 辺がありません")
        n = max(max(u, v) for u, v in edges) + 1
    logger.debug(f"辺リストを読み込みました: {path} (n={n}, 辺={len(edges)})")
    return build_graph(n, edges)


def write_edge_list(g: Graph, path) -> None:
    """辺リストファイルを書き出す"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(f"n {g.n}\n")
        for u, v in g.edges():
            f.write(f"{u} {v}\n")


# ---------------------------------------------------------------------------
# 幾何的な問い合わせ
# ---------------------------------------------------------------------------

def distances(g: Graph, v: int, max_radius: Optional[int] = None) -> np.ndarray:
    """
    v からの幅優先探索による距離（到達不能・打ち切りは -1）
    """
    g.check_vertex(v)
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[v] = 0
    queue = deque([v])
    while queue:
        u = queue.popleft()
        du = dist[u]
        if max_radius is not None and du >= max_radius:
            continue
        for w in g.adjacency[u]:
            if dist[w] < 0:
                dist[w] = du + 1
                queue.append(w)
    return dist


def ball(g: Graph, v: int, r: int) -> FrozenSet[int]:
    """半径 r の球 {u : dist_G(v, u) <= r}"""
    if r < 0:
        raise ConfigError(f"半径は0以上である必要があります: {r}")
    dist = distances(g, v, max_radius=r)
    return frozenset(int(u) for u in np.flatnonzero(dist >= 0))


def outer_boundary(g: Graph, v: int, r: int) -> FrozenSet[int]:
    """外側境界 ∂⁺B_v(r) = B_v(r+1) \\ B_v(r)"""
    dist = distances(g, v, max_radius=r + 1)
    return frozenset(int(u) for u in np.flatnonzero(dist == r + 1))


def diameter(g: Graph) -> int:
    """直径"""
    g.require_connected()
    return int(max(distances(g, v).max() for v in range(g.n)))


def degree_ratio(g: Graph) -> float:
    """最大次数と最小次数の比 M"""
    return float(g.degrees.max() / g.degrees.min())


def growth_check(
    g: Graph,
    params: GrowthParams,
    radii: Sequence[int],
    exhaustive: bool = False,
    samples: int = 64,
    seed: int = 0
) -> List[GrowthViolation]:
    """
    増大条件 |B_v(r)| <= c0 * exp(r^(1-alpha)) の違反を列挙

    Args:
        g: グラフ
        params: 増大条件のパラメータ
        radii: 調べる半径（1以上）
        exhaustive: True なら全頂点を調べる
        samples: 抽出する頂点数（exhaustive=False のとき）
        seed: 頂点抽出の乱数シード

    Returns:
        違反 (v, r) のリスト（空なら調べた範囲で条件成立）
    """
    radii = sorted(set(int(r) for r in radii))
    if radii and radii[0] < 1:
        raise ConfigError("半径は1以上である必要があります")

    if exhaustive or g.n <= samples:
        vertices = range(g.n)
    else:
        rng = np.random.default_rng(seed)
        vertices = sorted(int(v) for v in rng.choice(g.n, size=samples, replace=False))

    violations: List[GrowthViolation] = []
    max_r = radii[-1] if radii else 0
    for v in vertices:
        dist = distances(g, v, max_radius=max_r)
        reached = dist[dist >= 0]
        for r in radii:
            size = int(np.count_nonzero(reached <= r))
            bound = params.bound(r)
            if size > bound:
                violations.append(GrowthViolation(int(v), r, size, bound))
    logger.debug(f"増大条件: 頂点 {len(vertices)} 個, 違反 {len(violations)} 件")
    return violations


def _as_mask(g: Graph, vertices: Iterable[int]) -> np.ndarray:
    mask = np.zeros(g.n, dtype=bool)
    for v in vertices:
        g.check_vertex(int(v))
        mask[int(v)] = True
    return mask


def volume(g: Graph, vertices: Iterable[int]) -> int:
    """Vol(S) = Σ_{v∈S} d_G(v)"""
    return int(g.degrees[_as_mask(g, vertices)].sum())


def edge_boundary(g: Graph, vertices: Iterable[int]) -> int:
    """|E(S, Sᶜ)|"""
    mask = _as_mask(g, vertices)
    return sum(1 for u, v in g.edges() if mask[u] != mask[v])


def conductance(g: Graph, vertices: Iterable[int]) -> float:
    """コンダクタンス Φ(S) = |E(S, Sᶜ)| / Vol(S)"""
    mask = _as_mask(g, vertices)
    if not mask.any():
        raise EmptySet("空集合のコンダクタンスは定義されません")
    vol = int(g.degrees[mask].sum())
    if vol == 0:
        return 0.0
    crossing = sum(1 for u, v in g.edges() if mask[u] != mask[v])
    return crossing / vol


def low_conductance_ball(g: Graph, v: int, r_n: int, alpha: float) -> int:
    """
    |∂⁺B_v(r)| / |B_v(r)| <= 8 / r^alpha を満たす最小の r ∈ [r_n, 2 r_n]

    見つからなければ NotFound（増大条件が成り立たない場合に起こりうる）。
    """
    if r_n < 1:
        raise ConfigError(f"r_n は1以上である必要があります: {r_n}")
    dist = distances(g, v, max_radius=2 * r_n + 1)
    reached = dist[dist >= 0]
    for r in range(r_n, 2 * r_n + 1):
        inside = int(np.count_nonzero(reached <= r))
        shell = int(np.count_nonzero(reached == r + 1))
        if shell / inside <= 8.0 / r ** alpha:
            return r
    raise NotFound(f"頂点 {v} の周りに [{r_n}, {2 * r_n}] で条件を満たす球がありません")


def bipartition(g: Graph) -> Optional[Tuple[FrozenSet[int], FrozenSet[int]]]:
    """
    幅優先探索による2彩色

    Returns:
        (V1, V2)。V1 は頂点0を含む側。奇閉路があれば None
    """
    g.require_connected()
    side = np.full(g.n, -1, dtype=np.int64)
    side[0] = 0
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for w in g.adjacency[u]:
            if side[w] < 0:
                side[w] = 1 - side[u]
                queue.append(w)
            elif side[w] == side[u]:
                return None
    part1 = frozenset(int(v) for v in np.flatnonzero(side == 0))
    part2 = frozenset(int(v) for v in np.flatnonzero(side == 1))
    return part1, part2
