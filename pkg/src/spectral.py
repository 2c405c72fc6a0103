#!/usr/bin/env python3
"""
スペクトルモジュール

L²(π_G) でのランダムウォーク作用素の固有分解と、それを使った自己相関
A⁽¹⁾/A⁽²⁾、T_x0、混合時間の予測、格子パターンの閉じた形のスペクトル、
定常分散の恒等式を提供する。

固有値・固有ベクトルの添字 l は 0 始まり（l=0 が λ=1 の定数関数）。
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import bisect

from .dynamics import ModelParams, one_step_expectation
from .exceptions import (
    BadHG,
    ComponentOutOfRange,
    ComputationError,
    ConfigError,
    KOutOfRange,
    NegativeTime,
    NoConvergence,
    ParamMismatch,
    SizeMismatch,
    TooLarge,
)
from .graph import Graph, degree_ratio
from .patterns import ColorConfig, root_embedding
from .utils.logger import get_logger


logger = get_logger("spectral")

# 密行列での固有分解を許す頂点数の上限
MAX_DENSE_N = 4000

# Jacobi 法の最大掃引回数
MAX_SWEEPS = 100

# 減衰率を同一視する幅
RATE_MERGE_TOL = 1e-12

# 周辺分布が [0, 1] からはみ出してよい丸め誤差
MARGINAL_SLACK = 1e-9


# ---------------------------------------------------------------------------
# 固有分解
# ---------------------------------------------------------------------------

def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(off * off)))


def jacobi_eigh(matrix: np.ndarray, tol: float, max_sweeps: int = MAX_SWEEPS) -> Tuple[np.ndarray, np.ndarray]:
    """
    巡回 Jacobi 法による対称行列の固有分解

    Args:
        matrix: 実対称行列
        tol: 非対角成分のフロベニウスノルムの収束判定値
        max_sweeps: 最大掃引回数

    Returns:
        (固有値, 固有ベクトルを列に持つ直交行列)

    Raises:
        NoConvergence: max_sweeps 回で収束しない場合
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    vecs = np.eye(n)
    for sweep in range(max_sweeps):
        off = _off_norm(a)
        logger.debug(f"Jacobi 掃引 {sweep}: 非対角ノルム {off:.3e}")
        if off <= tol:
            return np.diag(a).copy(), vecs
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vec_p = vecs[:, p].copy()
                vec_q = vecs[:, q].copy()
                vecs[:, p] = c * vec_p - s * vec_q
                vecs[:, q] = s * vec_p + c * vec_q
    if _off_norm(a) <= tol:
        return np.diag(a).copy(), vecs
    raise NoConvergence(f"Jacobi 法が {max_sweeps} 回の掃引で収束しませんでした")


@dataclass(frozen=True)
class Spectrum:
    """
    ランダムウォーク作用素のスペクトル

    Attributes:
        lambdas: 降順の固有値
        psis: 列 l が固有関数 ψ_l（L²(π_G) で正規直交）
        pi: 定常分布 π_G
    """
    lambdas: np.ndarray = field(repr=False)
    psis: np.ndarray = field(repr=False)
    pi: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return int(self.lambdas.size)

    def gammas(self, theta: float) -> np.ndarray:
        """γ_l = 1 - (1 - θ) λ_l"""
        return 1.0 - (1.0 - theta) * self.lambdas

    def inner(self, f: np.ndarray, h: np.ndarray) -> complex:
        """⟨f, h⟩_π = Σ f(v) conj(h(v)) π(v)"""
        return complex(np.sum(np.asarray(f) * np.conj(h) * self.pi))

    def gram(self) -> np.ndarray:
        """固有関数のグラム行列（単位行列になるはず）"""
        return self.psis.T @ (self.pi[:, None] * self.psis)


def eigendecompose(g: Graph, tol: Optional[float] = None, solver: str = "jacobi") -> Spectrum:
    """
    P = D⁻¹A の固有分解

    正規化隣接行列 N = D^{-1/2} A D^{-1/2} を対角化し、ψ_l = φ_l / √π で戻す。

    Args:
        g: 連結グラフ
        tol: 非対角ノルムの収束判定値（既定は 1e-11·n）
        solver: "jacobi"（巡回 Jacobi 法）または "lapack"（numpy.linalg.eigh）

    Raises:
        Disconnected: 非連結の場合
        TooLarge: n > 4000 の場合
    """
    g.require_connected()
    n = g.n
    if n > MAX_DENSE_N:
        logger.warning(f"n={n} は密行列固有分解の上限 {MAX_DENSE_N} を超えます")
        raise TooLarge(f"n={n} は固有分解の上限 {MAX_DENSE_N} を超えます")
    pi = np.asarray(g.pi, dtype=float)
    if n == 1:
        return Spectrum(np.ones(1), np.ones((1, 1)), pi)

    scale = 1.0 / np.sqrt(g.degrees.astype(float))
    normalized = np.zeros((n, n))
    for u, nbrs in enumerate(g.adjacency):
        for v in nbrs:
            normalized[u, v] = scale[u] * scale[v]

    if solver == "jacobi":
        vals, vecs = jacobi_eigh(normalized, 1e-11 * n if tol is None else tol)
    elif solver == "lapack":
        vals, vecs = np.linalg.eigh(normalized)
    else:
        raise ConfigError(f"未知の固有値ソルバです: {solver}")

    order = np.argsort(-vals, kind='stable')
    lambdas = np.clip(vals[order], -1.0, 1.0)
    psis = vecs[:, order] / np.sqrt(pi)[:, None]
    if psis[:, 0].sum() < 0:
        psis[:, 0] = -psis[:, 0]
    logger.debug(f"固有分解完了: n={n}, λ_2={lambdas[1]:.6g}, λ_n={lambdas[-1]:.6g}")
    for arr in (lambdas, psis, pi):
        arr.setflags(write=False)
    return Spectrum(lambdas, psis, pi)


def _check_size(spec: Spectrum, x: ColorConfig) -> None:
    if x.n != spec.n:
        raise SizeMismatch(f"配置の頂点数 {x.n} がスペクトルの n={spec.n} と一致しません")


def projections(spec: Spectrum, x0: ColorConfig) -> np.ndarray:
    """
    Ψ_l^{(k)}(x0) = ⟨x0^k, ψ_l⟩_π

    Returns:
        (n, q-1) の複素行列。列 k-1 が k 乗に対応
    """
    _check_size(spec, x0)
    ks = np.arange(1, x0.q)
    z = root_embedding(x0.colors[:, None], x0.q, ks[None, :])
    return spec.psis.T @ (spec.pi[:, None] * z)


# ---------------------------------------------------------------------------
# 自己相関
# ---------------------------------------------------------------------------

class Flavor(Enum):
    """自己相関の種類（A2_t = A1_{2t}）"""
    A1 = "A1"
    A2 = "A2"


@dataclass(frozen=True)
class AutocorrCurve:
    """
    自己相関曲線 A⁽²⁾_t = Σ α_l e^{-2γ_l t}

    Attributes:
        rates: 減衰率 γ_l（重複を統合済み、昇順）
        weights: 非負の重み α_l
        n: グラフの頂点数
        q: 色数
        theta: ノイズ確率
    """
    rates: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    n: int
    q: int
    theta: float

    @property
    def total(self) -> float:
        """t=0 での値"""
        return float(self.weights.sum())


def _merge_rates(rates: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if rates.size == 0:
        return rates, weights
    order = np.argsort(rates, kind='stable')
    rates, weights = rates[order], weights[order]
    merged_rates = [rates[0]]
    merged_weights = [weights[0]]
    for rate, weight in zip(rates[1:], weights[1:]):
        if rate - merged_rates[-1] <= RATE_MERGE_TOL:
            merged_weights[-1] += weight
        else:
            merged_rates.append(rate)
            merged_weights.append(weight)
    return np.array(merged_rates), np.array(merged_weights)


def _make_curve(rates, weights, n: int, q: int, theta: float) -> AutocorrCurve:
    rates, weights = _merge_rates(np.asarray(rates, dtype=float), np.asarray(weights, dtype=float))
    rates.setflags(write=False)
    weights.setflags(write=False)
    return AutocorrCurve(rates, weights, n, q, theta)


def autocorr_curve(spec: Spectrum, x0: ColorConfig, p: ModelParams) -> AutocorrCurve:
    """x0 から出発したときの自己相関曲線"""
    _check_size(spec, x0)
    if x0.q != p.q:
        raise ParamMismatch(f"配置の q={x0.q} がモデルの q={p.q} と一致しません")
    proj = projections(spec, x0)
    weights = (proj.real ** 2 + proj.imag ** 2).sum(axis=1) / p.q
    weights = np.where(weights < 0.0, 0.0, weights)
    return _make_curve(spec.gammas(p.theta), weights, spec.n, p.q, p.theta)


def uniform_curve(n: int, q: int, theta: float) -> AutocorrCurve:
    """一様初期分布の曲線（恒等的に0）"""
    return _make_curve([], [], n, q, theta)


def _decay(curve: AutocorrCurve, s):
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise NegativeTime(f"時刻は0以上である必要があります: {s}")
    if curve.rates.size == 0:
        values = np.zeros_like(s_arr)
    else:
        values = np.exp(-np.multiply.outer(s_arr, curve.rates)) @ curve.weights
    return float(values) if values.ndim == 0 else values


def eval_autocorr(curve: AutocorrCurve, t, flavor: Flavor = Flavor.A2):
    """
    自己相関を評価

    A1 は Σ α e^{-γ t}、A2 は A1 を 2t で評価した値。t は配列でもよい。
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise NegativeTime(f"時刻は0以上である必要があります: {t}")
    if flavor is Flavor.A2:
        return _decay(curve, 2.0 * t_arr)
    return _decay(curve, t_arr)


def t_x0(curve: AutocorrCurve, n_threshold: float) -> float:
    """
    T_x0 = inf{t : A⁽²⁾_t < 1/n}

    A⁽²⁾ は狭義単調減少なので二分法で求める（相対許容誤差 1e-9）。
    """
    if n_threshold < 1:
        raise ConfigError(f"閾値の n は1以上である必要があります: {n_threshold}")
    level = 1.0 / n_threshold
    if eval_autocorr(curve, 0.0) <= level:
        return 0.0
    upper = math.log((curve.q - 1) * n_threshold / curve.q) / (2.0 * curve.theta) + 1.0
    return float(bisect(lambda t: eval_autocorr(curve, t) - level, 0.0, upper,
                        xtol=1e-14, rtol=1e-9, maxiter=500))


class Branch(Enum):
    """予測混合時間を決める項"""
    AUTOCORRELATION = "T_x0"
    CORRELATION = "T_corr"


class TmixPrediction(NamedTuple):
    """max{T_x0, log(n)/(4θ)} とその内訳"""
    time: float
    branch: Branch
    t_x0: float
    t_corr: float


def predicted_tmix(curve: AutocorrCurve, n: Optional[int] = None,
                   theta: Optional[float] = None) -> TmixPrediction:
    """混合時間の予測 max{T_x0, log(n)/(4θ)}"""
    n = curve.n if n is None else n
    theta = curve.theta if theta is None else theta
    tx = t_x0(curve, n)
    tc = math.log(n) / (4.0 * theta)
    if tx >= tc:
        return TmixPrediction(tx, Branch.AUTOCORRELATION, tx, tc)
    return TmixPrediction(tc, Branch.CORRELATION, tx, tc)


def bipartite_tmix_coefficient(theta: float) -> float:
    """二部グラフの交互配置での log n の係数 1/min{4-2θ, 4θ}"""
    return 1.0 / min(4.0 - 2.0 * theta, 4.0 * theta)


# ---------------------------------------------------------------------------
# 格子パターン
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LatticeSpectrum:
    """
    トーラス上の格子パターン x_v の閉じた形のスペクトル

    Attributes:
        lambda_k: k=1..q-1 の固有値 λ_{kv}
        lambda_star: max_k λ_{kv}
        theta_v: 相転移点 1 - 1/(2 - λ*)
        curve: 閉じた形の自己相関曲線
    """
    d: int
    q: int
    v: Tuple[int, ...]
    theta: float
    lambda_k: np.ndarray = field(repr=False)
    lambda_star: float
    theta_v: float
    curve: AutocorrCurve

    def tmix_coefficient(self) -> float:
        """log(一辺の長さ) の係数 d / (2 min{1-(1-θ)λ*, 2θ})"""
        slow = 1.0 - (1.0 - self.theta) * self.lambda_star
        return self.d / (2.0 * min(slow, 2.0 * self.theta))

    def tmix(self, side: int) -> float:
        """一辺 side のトーラスでの漸近的な混合時間"""
        return self.tmix_coefficient() * math.log(side)

    def t_x0_coefficient(self) -> float:
        """T_x0 の log(一辺の長さ) の係数"""
        return self.d / (2.0 * (1.0 - (1.0 - self.theta) * self.lambda_star))


def lattice_pattern_spectrum(d: int, q: int, v: Sequence[int], theta: float,
                             side: Optional[int] = None) -> LatticeSpectrum:
    """
    格子パターン x_v の固有値 λ_{kv} = (1/d) Σ_i cos(2π k v_i / q)

    Args:
        side: 曲線に記録する一辺の長さ（頂点数は side^d）
    """
    v = tuple(int(c) for c in v)
    if len(v) != d or any(not 0 <= c < q for c in v):
        raise ComponentOutOfRange(f"ベクトル {v} は d={d} 次元で各成分 [0, {q}) である必要があります")
    params = ModelParams(theta, q)
    ks = np.arange(1, q)
    lambda_k = np.cos(2.0 * np.pi * np.outer(ks, v) / q).mean(axis=1)
    lambda_star = float(lambda_k.max())
    n = side ** d if side is not None else 0
    curve = _make_curve(params.gamma(lambda_k), np.full(q - 1, 1.0 / q), n, q, theta)
    lambda_k.setflags(write=False)
    return LatticeSpectrum(
        d=d, q=q, v=v, theta=theta,
        lambda_k=lambda_k,
        lambda_star=lambda_star,
        theta_v=1.0 - 1.0 / (2.0 - lambda_star),
        curve=curve,
    )


def rainbow_lower_bound_constant(q: int) -> float:
    """c(q) = min{1/7, π²/(16q)}·e^{-4π}/q"""
    return min(1.0 / 7.0, math.pi ** 2 / (16.0 * q)) * math.exp(-4.0 * math.pi) / q


def rainbow_lower_bound(q: int, theta: float, t: float) -> float:
    """閉路上の任意の初期配置に対する A⁽²⁾_t の下界"""
    rate = 1.0 - (1.0 - theta) * math.cos(2.0 * math.pi / q)
    return rainbow_lower_bound_constant(q) * math.exp(-2.0 * rate * t)


# ---------------------------------------------------------------------------
# 周辺分布と固有関数
# ---------------------------------------------------------------------------

def marginals(spec: Spectrum, x0: ColorConfig, p: ModelParams, t: float) -> np.ndarray:
    """
    周辺分布 P_{x0}(X_t(v) = c) の (n, q) 行列

    (1 - e^{-θt})/q + e^{-θt} (H_s 1_{x0=c})(v)、s = (1-θ)t、
    H_s はレート1のランダムウォーク半群をスペクトルで作用させたもの。
    """
    _check_size(spec, x0)
    if t < 0:
        raise NegativeTime(f"時刻は0以上である必要があります: {t}")
    onehot = np.zeros((spec.n, p.q))
    onehot[np.arange(spec.n), x0.colors] = 1.0
    coef = spec.psis.T @ (spec.pi[:, None] * onehot)
    heat = np.exp(-(1.0 - p.theta) * t * (1.0 - spec.lambdas))
    spread = spec.psis @ (heat[:, None] * coef)
    survive = math.exp(-p.theta * t)
    out = (1.0 - survive) / p.q + survive * spread
    excess = max(-float(out.min()), float(out.max()) - 1.0)
    if excess > MARGINAL_SLACK:
        raise ComputationError(f"周辺分布が [0, 1] から {excess:.3e} はみ出しました")
    return np.clip(out, 0.0, 1.0)


def _check_index(spec: Spectrum, l: int) -> None:
    if not 0 <= l < spec.n:
        raise ConfigError(f"固有値の添字 l は [0, {spec.n}) の範囲である必要があります: {l}")


def eigenfunction_residual(g: Graph, p: ModelParams, spec: Spectrum, l: int, k: int,
                           x: ColorConfig) -> float:
    """
    Ψ_l^{(k)} が離散時間鎖の固有値 1 - γ_l/n の固有関数であることの残差

    |E_x[Ψ_l^{(k)}(X_1)] - (1 - γ_l/n) Ψ_l^{(k)}(x)|
    """
    _check_index(spec, l)
    _check_size(spec, x)
    weights = spec.psis[:, l] * spec.pi
    expected = one_step_expectation(g, p, x, k, weights)
    value = complex(np.sum(weights * root_embedding(x.colors, p.q, k)))
    gamma = float(p.gamma(spec.lambdas[l]))
    return abs(expected - (1.0 - gamma / g.n) * value)


class VarianceReport(NamedTuple):
    """Var_μ(Ψ_l^{(k)}) の恒等式による値と上下界"""
    value: float
    stderr: float
    lower: float
    upper: float


def stationary_variance(g: Graph, p: ModelParams, spec: Spectrum, l: int, k: int,
                        h_g, h_stderr=None) -> VarianceReport:
    """
    定常分布での Ψ_l^{(k)} の分散

    (1/γ_l) Σ_v π(v)² |ψ_l(v)|² (1 - (1-θ) h_G(v))

    Args:
        h_g: 頂点ごとの h_G（NeighborCoalescence をそのまま渡してもよい）
        h_stderr: h_G の標準誤差（省略時は0）

    Raises:
        BadHG: h_G が標準誤差の4倍を超えて [0, 1] から外れる場合
    """
    _check_index(spec, l)
    if not 1 <= k < p.q:
        raise KOutOfRange(f"k は [1, {p.q}) の範囲である必要があります: {k}")
    if hasattr(h_g, 'values') and hasattr(h_g, 'stderr'):
        h_g, h_stderr = h_g.values, h_g.stderr
    h = np.asarray(h_g, dtype=float)
    se = np.zeros(spec.n) if h_stderr is None else np.asarray(h_stderr, dtype=float)
    if h.shape != (spec.n,) or se.shape != (spec.n,):
        raise SizeMismatch(f"h_G の長さが n={spec.n} と一致しません")
    slack = 4.0 * se
    if np.any(h < -slack) or np.any(h > 1.0 + slack):
        raise BadHG("h_G の値が [0, 1] の範囲外です")

    gamma = float(p.gamma(spec.lambdas[l]))
    mass = spec.pi ** 2 * spec.psis[:, l] ** 2
    value = float(np.sum(mass * (1.0 - (1.0 - p.theta) * h))) / gamma
    stderr = (1.0 - p.theta) * float(np.sqrt(np.sum((mass * se) ** 2))) / gamma
    total = float(mass.sum())
    return VarianceReport(value, stderr, p.theta * total / gamma, total / gamma)


def variance_degree_bounds(g: Graph, p: ModelParams, spec: Spectrum, l: int) -> Tuple[float, float]:
    """n·Var_μ(Ψ_l^{(k)}) の次数比 M による上下界 (θ/(Mγ_l), M/γ_l)"""
    _check_index(spec, l)
    ratio = degree_ratio(g)
    gamma = float(p.gamma(spec.lambdas[l]))
    return p.theta / (ratio * gamma), ratio / gamma


class MagnetizationCheck(NamedTuple):
    """Σ π(u)π(v) P(u↔v) ≤ (1/θ) Σ π² の両辺"""
    lhs: float
    lhs_stderr: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 4.0 * self.lhs_stderr


def magnetization_bound(g: Graph, p: ModelParams, pmeet: np.ndarray,
                        pmeet_stderr: Optional[np.ndarray] = None) -> MagnetizationCheck:
    """合流確率行列から磁化の分散の上界を確認"""
    pi = np.asarray(g.pi, dtype=float)
    pmeet = np.asarray(pmeet, dtype=float)
    if pmeet.shape != (g.n, g.n):
        raise SizeMismatch(f"合流確率行列の形 {pmeet.shape} が ({g.n}, {g.n}) ではありません")
    lhs = float(pi @ pmeet @ pi)
    err = 0.0
    if pmeet_stderr is not None:
        err = float(np.sqrt(np.sum((np.outer(pi, pi) * np.asarray(pmeet_stderr)) ** 2)))
    return MagnetizationCheck(lhs, err, float(np.sum(pi ** 2)) / p.theta)


# ---------------------------------------------------------------------------
# 出力用の行
# ---------------------------------------------------------------------------

def curve_rows(curve: AutocorrCurve) -> List[Tuple[float, float]]:
    """(gamma, weight) の行"""
    return [(float(r), float(w)) for r, w in zip(curve.rates, curve.weights)]


def eval_rows(curve: AutocorrCurve, times: Sequence[float]) -> List[Tuple[float, float, float]]:
    """(t, A1, A2) の行"""
    times = np.asarray(times, dtype=float)
    a1 = np.atleast_1d(eval_autocorr(curve, times, Flavor.A1))
    a2 = np.atleast_1d(eval_autocorr(curve, times, Flavor.A2))
    return [(float(t), float(x), float(y)) for t, x, y in zip(np.atleast_1d(times), a1, a2)]
