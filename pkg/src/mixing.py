#!/usr/bin/env python3
"""
混合モジュール

小さな鎖の全状態空間 [q]^V 上での厳密計算（時刻 t の分布、定常分布、
全変動距離）と、混合時間の下界に使う判別統計量とその平均差の推定。

状態は q 進表記で符号化する（頂点0が最下位桁）。
"""

import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import poisson

from .dynamics import ModelParams, check_compatible, run_forward_batch
from .exceptions import (
    ConfigError,
    GridExhausted,
    NegativeTime,
    NoConvergence,
    ShapeMismatch,
    StateSpaceTooLarge,
)
from .graph import Graph
from .patterns import ColorConfig, Initial, root_embedding
from .utils.batch import Estimate
from .utils.logger import get_logger


logger = get_logger("mixing")

# 状態数 q^n の上限
STATE_CAP = 2 ** 22

# べき乗法の反復回数の上限
MAX_POWER_ITERATIONS = 10 ** 7

# 頂点ごとの遷移係数を前計算する要素数の上限
_FACTOR_CACHE_LIMIT = 2 ** 24


@dataclass(frozen=True, eq=False)
class ExactDistribution:
    """
    全状態空間上の確率ベクトル

    Attributes:
        q: 色数
        n: 頂点数
        probs: 長さ q^n の確率（q 進表記、頂点0が最下位桁）
    """
    q: int
    n: int
    probs: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return int(self.probs.size)

    def marginals(self) -> np.ndarray:
        """頂点ごとの周辺分布 (n, q)"""
        out = np.empty((self.n, self.q))
        for v in range(self.n):
            shaped = self.probs.reshape(self.q ** (self.n - 1 - v), self.q, self.q ** v)
            out[v] = shaped.sum(axis=(0, 2))
        return out

    def prob(self, x: ColorConfig) -> float:
        return float(self.probs[x.encode()])


def _check_state_space(n: int, q: int) -> int:
    size = q ** n
    if size > STATE_CAP:
        raise StateSpaceTooLarge(f"状態数 {q}^{n} = {size} が上限 {STATE_CAP} を超えます")
    return size


class UpdateKernel:
    """
    離散時間鎖の1ステップ核 𝒫 = (1/n) Σ_v P_v を作用素として持つ

    頂点 v の更新後の状態 y について
    (μ P_v)(y) = s_v(y) · (θ/q + (1-θ)·#{w∼v : y(w)=y(v)}/d(v))、
    s_v(y) は y の v 成分だけを動かした μ の和。
    """

    def __init__(self, g: Graph, p: ModelParams):
        self.g = g
        self.p = p
        self.size = _check_state_space(g.n, p.q)
        codes = np.arange(self.size, dtype=np.int64)
        powers = p.q ** np.arange(g.n, dtype=np.int64)
        self._digits = ((codes[:, None] // powers[None, :]) % p.q).astype(np.int8)
        self._factors: Optional[List[np.ndarray]] = None
        if self.size * g.n <= _FACTOR_CACHE_LIMIT:
            self._factors = [self._factor(v) for v in range(g.n)]

    def _factor(self, v: int) -> np.ndarray:
        nbrs = self.g.adjacency[v]
        if not nbrs:
            return np.full(self.size, self.p.theta / self.p.q)
        own = self._digits[:, v]
        agree = np.zeros(self.size)
        for w in nbrs:
            agree += self._digits[:, w] == own
        return self.p.theta / self.p.q + (1.0 - self.p.theta) * agree / len(nbrs)

    def apply(self, mu: np.ndarray) -> np.ndarray:
        """μ𝒫 を返す"""
        n, q = self.g.n, self.p.q
        out = np.zeros_like(mu)
        for v in range(n):
            shape = (q ** (n - 1 - v), q, q ** v)
            summed = np.broadcast_to(mu.reshape(shape).sum(axis=1, keepdims=True), shape).reshape(-1)
            factor = self._factors[v] if self._factors is not None else self._factor(v)
            out += summed * factor
            if not self.g.adjacency[v]:
                # 孤立頂点ではコピーしても色が変わらない
                out += (1.0 - self.p.theta) * mu
        return out / n


def _initial_vector(g: Graph, p: ModelParams, init: Union[ColorConfig, Initial], size: int) -> np.ndarray:
    if isinstance(init, Initial):
        return np.full(size, 1.0 / size)
    check_compatible(g, p, init)
    mu = np.zeros(size)
    mu[init.encode()] = 1.0
    return mu


def _poisson_weights(mean: float, tail_tol: float) -> np.ndarray:
    cutoff = int(poisson.isf(tail_tol, mean)) + 1
    log_w = poisson.logpmf(np.arange(cutoff + 1), mean)
    weights = np.exp(log_w - log_w.max())
    return weights / weights.sum()


def _advance(kernel: UpdateKernel, mu: np.ndarray, t: float, tail_tol: float) -> np.ndarray:
    """e^{tQ}、Q = n(𝒫 - I) を一様化で作用させる"""
    if t == 0:
        return mu.copy()
    weights = _poisson_weights(kernel.g.n * t, tail_tol)
    acc = weights[0] * mu
    current = mu
    for w in weights[1:]:
        current = kernel.apply(current)
        acc += w * current
    return acc / acc.sum()


def exact_distribution(
    g: Graph,
    p: ModelParams,
    init: Union[ColorConfig, Initial],
    t: float,
    tail_tol: float = 1e-12
) -> ExactDistribution:
    """
    時刻 t の分布 P_init(X_t ∈ ·) の厳密計算

    Poisson(nt) で重み付けた 𝒫 のべきの和。裾の確率が tail_tol を下回るところで打ち切る。
    """
    if t < 0:
        raise NegativeTime(f"時刻は0以上である必要があります: {t}")
    kernel = UpdateKernel(g, p)
    mu = _initial_vector(g, p, init, kernel.size)
    return ExactDistribution(p.q, g.n, _advance(kernel, mu, t, tail_tol))


def exact_stationary(g: Graph, p: ModelParams, tol: float = 1e-10) -> ExactDistribution:
    """
    定常分布 μ_G をべき乗法で求める

    一様分布から 𝒫 を繰り返し作用させ、連続する反復の全変動距離が tol/10 以下になったら止め、
    残差 ‖μ𝒫 - μ‖₁ ≤ tol を確認する。
    """
    kernel = UpdateKernel(g, p)
    mu = np.full(kernel.size, 1.0 / kernel.size)
    for iteration in range(1, MAX_POWER_ITERATIONS + 1):
        nxt = kernel.apply(mu)
        step = 0.5 * float(np.abs(nxt - mu).sum())
        mu = nxt
        if iteration % 1000 == 0:
            logger.debug(f"べき乗法 {iteration} 回目: 差 {step:.3e}")
        if step <= tol / 10.0:
            break
    else:
        raise NoConvergence(f"べき乗法が {MAX_POWER_ITERATIONS} 回で収束しませんでした")
    mu = mu / mu.sum()
    residual = float(np.abs(kernel.apply(mu) - mu).sum())
    if residual > tol:
        raise NoConvergence(f"定常分布の残差 {residual:.3e} が許容値 {tol} を超えます")
    return ExactDistribution(p.q, g.n, mu)


def tv_distance(a: ExactDistribution, b: ExactDistribution) -> float:
    """全変動距離 (1/2) Σ|a - b|"""
    if (a.q, a.n) != (b.q, b.n):
        raise ShapeMismatch(f"状態空間が一致しません: (q, n) = {(a.q, a.n)} と {(b.q, b.n)}")
    return float(min(1.0, 0.5 * np.abs(a.probs - b.probs).sum()))


class TVProfile(NamedTuple):
    """時刻格子上の定常分布までの全変動距離"""
    times: Tuple[float, ...]
    distances: Tuple[float, ...]


def exact_tv_profile(
    g: Graph,
    p: ModelParams,
    init: Union[ColorConfig, Initial],
    times: Sequence[float],
    stationary: Optional[ExactDistribution] = None,
    tail_tol: float = 1e-12
) -> TVProfile:
    """時刻格子上の d_tv(t)。格子点の間は差分だけ一様化で進める"""
    grid = [float(t) for t in times]
    if any(t < 0 for t in grid):
        raise NegativeTime("時刻は0以上である必要があります")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ConfigError("時刻格子は単調非減少である必要があります")
    kernel = UpdateKernel(g, p)
    target = exact_stationary(g, p) if stationary is None else stationary
    mu = _initial_vector(g, p, init, kernel.size)
    current = 0.0
    distances = []
    for t in grid:
        mu = _advance(kernel, mu, t - current, tail_tol)
        current = t
        distances.append(tv_distance(ExactDistribution(p.q, g.n, mu), target))
    return TVProfile(tuple(grid), tuple(distances))


def exact_mixing_time(profile: TVProfile, eps: float = 0.25) -> float:
    """d_tv ≤ eps となる最初の格子点"""
    for t, d in zip(profile.times, profile.distances):
        if d <= eps:
            return t
    raise GridExhausted(f"格子の範囲で d_tv ≤ {eps} に達しませんでした")


def empirical_distribution(samples: np.ndarray, q: int) -> ExactDistribution:
    """サンプル (reps, n) の経験分布"""
    samples = np.asarray(samples, dtype=np.int64)
    if samples.ndim != 2:
        raise ShapeMismatch(f"サンプルは (reps, n) 配列である必要があります: {samples.shape}")
    n = samples.shape[1]
    size = _check_state_space(n, q)
    codes = samples @ (q ** np.arange(n, dtype=np.int64))
    counts = np.bincount(codes, minlength=size).astype(float)
    return ExactDistribution(q, n, counts / max(samples.shape[0], 1))


# ---------------------------------------------------------------------------
# 判別統計量
# ---------------------------------------------------------------------------

def _colors(x, n: int) -> np.ndarray:
    arr = x.colors if isinstance(x, ColorConfig) else np.asarray(x, dtype=np.int64)
    if arr.shape[-1] != n:
        raise ShapeMismatch(f"配置の長さ {arr.shape[-1]} が n={n} と一致しません")
    return arr


def _check_marginals(marg: np.ndarray, n: int) -> np.ndarray:
    marg = np.asarray(marg, dtype=float)
    if marg.ndim != 2 or marg.shape[0] != n:
        raise ShapeMismatch(f"周辺分布の形 {marg.shape} が (n={n}, q) ではありません")
    return marg


def statistic_R_auto(marg: np.ndarray, x, g: Graph):
    """
    自己相関の判別統計量 Σ_v π(v) Σ_ω a_{v,ω}(1{x(v)=ω} - 1/q)、a = marg - 1/q

    x に (reps, n) 配列を渡すと行ごとの値を返す。
    """
    marg = _check_marginals(marg, g.n)
    colors = _colors(x, g.n)
    a = marg - 1.0 / marg.shape[1]
    picked = a[np.arange(g.n), colors] - a.sum(axis=1) / marg.shape[1]
    values = picked @ g.pi
    return float(values) if np.ndim(values) == 0 else values


def statistic_R_edge(g: Graph, marg: np.ndarray, x):
    """辺の判別統計量 Σ_{u∼v} (1{x(u)=x(v)} - P(X_t(v) = x(u)))"""
    marg = _check_marginals(marg, g.n)
    colors = _colors(x, g.n)
    us = np.array([u for u, _ in g.edges()], dtype=np.int64)
    vs = np.array([v for _, v in g.edges()], dtype=np.int64)
    cu, cv = colors[..., us], colors[..., vs]
    values = (cu == cv).sum(axis=-1) - marg[vs, cu].sum(axis=-1)
    return float(values) if np.ndim(values) == 0 else values


def statistic_R_uniform(g: Graph, x):
    """一様初期分布用の統計量 Σ_{u∼v} 1{x(u)=x(v)}"""
    colors = _colors(x, g.n)
    us = np.array([u for u, _ in g.edges()], dtype=np.int64)
    vs = np.array([v for _, v in g.edges()], dtype=np.int64)
    values = (colors[..., us] == colors[..., vs]).sum(axis=-1)
    return int(values) if np.ndim(values) == 0 else values


def mean_gap(values_mu: Sequence[float], values_t: Sequence[float]) -> Estimate:
    """E_μ[R] - E[R(X_t)] の推定（2標本は独立とみなす）"""
    a = Estimate.from_samples(values_mu)
    b = Estimate.from_samples(values_t)
    return Estimate(a.value - b.value, math.hypot(a.stderr, b.stderr), min(a.reps, b.reps))


class CovarianceGap(NamedTuple):
    """Cov_μ(Y(u)^k, Y(v)^k) - Cov(X_t(u)^k, X_t(v)^k) の実部と虚部"""
    value: float
    stderr: float
    imag: float


def _covariance(samples: np.ndarray, u: int, v: int, q: int, k: int) -> Tuple[complex, float]:
    """標本共分散と、その実部の標準誤差（中心化した積のばらつきから求める）"""
    zu = root_embedding(samples[:, u], q, k)
    zv = root_embedding(samples[:, v], q, k)
    centered = (zu - zu.mean()) * np.conj(zv - zv.mean())
    reps = samples.shape[0]
    return complex(centered.mean()), float(centered.real.std(ddof=1)) / math.sqrt(reps)


def covariance_gap(g: Graph, xs: np.ndarray, ys: np.ndarray, u: int, v: int, k: int,
                   q: int) -> CovarianceGap:
    """
    2頂点の共分散の差 Cov_μ(Y(u)^k, Y(v)^k) - Cov(X_t(u)^k, X_t(v)^k)

    xs, ys は独立な標本。各項の誤差は中心化した積の標本標準偏差で評価する
    （平均の推定誤差も1次まで含む）。
    """
    g.check_vertex(u)
    g.check_vertex(v)
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    if xs.ndim != 2 or ys.ndim != 2 or xs.shape[1] != g.n or ys.shape[1] != g.n:
        raise ShapeMismatch("サンプルは (reps, n) 配列である必要があります")
    if xs.shape[0] < 2 or ys.shape[0] < 2:
        raise ConfigError("共分散の推定には2個以上の標本が必要です")
    cov_y, se_y = _covariance(ys, u, v, q, k)
    cov_x, se_x = _covariance(xs, u, v, q, k)
    gap = cov_y - cov_x
    return CovarianceGap(gap.real, math.hypot(se_x, se_y), gap.imag)


def empirical_autocorr(
    g: Graph,
    p: ModelParams,
    x0: ColorConfig,
    t: float,
    reps: int,
    seed: int,
    threads: int = 1
) -> Estimate:
    """
    独立な2つのコピー X_t, X̃_t による A⁽²⁾_t(x0) の推定

    Σ_v π(v)(1{X_t(v) = X̃_t(v)} - 1/q) を reps 組で平均する。
    """
    if reps < 2:
        raise ConfigError(f"reps は2以上である必要があります: {reps}")
    check_compatible(g, p, x0)
    if t == 0:
        return Estimate((p.q - 1) / p.q, 0.0, reps)
    samples = run_forward_batch(g, p, x0, t, 2 * reps, seed, threads)
    first, second = samples[:reps], samples[reps:]
    values = (first == second).astype(float) @ g.pi - 1.0 / p.q
    return Estimate.from_samples(values)
