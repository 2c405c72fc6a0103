#!/usr/bin/env python3
"""
スペクトルモジュールのユニットテスト
"""

import sys
from pathlib import Path

# プロジェクトルートをパスに追加
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src import spectral
from src.dual import coalescence_matrix, exact_neighbor_coalescence, neighbor_coalescence
from src.dynamics import ModelParams
from src.exceptions import (
    BadHG,
    ComponentOutOfRange,
    ComputationError,
    ConfigError,
    Disconnected,
    KOutOfRange,
    NegativeTime,
    NoConvergence,
    SizeMismatch,
    TooLarge,
)
from src.graph import build_graph, complete_graph, cycle, random_connected_graph, star, torus
from src.mixing import exact_distribution
from src.patterns import alternating, lattice_pattern, monochromatic, rainbow, knight, uniform_random
from src.spectral import (
    Branch,
    Flavor,
    autocorr_curve,
    bipartite_tmix_coefficient,
    curve_rows,
    eigendecompose,
    eigenfunction_residual,
    eval_autocorr,
    eval_rows,
    jacobi_eigh,
    lattice_pattern_spectrum,
    magnetization_bound,
    marginals,
    predicted_tmix,
    projections,
    rainbow_lower_bound,
    rainbow_lower_bound_constant,
    stationary_variance,
    t_x0,
    uniform_curve,
    variance_degree_bounds,
)


class TestEigendecompose:
    """固有分解のテスト"""

    @pytest.mark.parametrize("solver", ["jacobi", "lapack"])
    @pytest.mark.parametrize("graph", [cycle(9), star(4), torus(4, 2), random_connected_graph(15, 0.3, 2)])
    def test_residual_and_orthonormality(self, graph, solver):
        """Pψ = λψ と L²(π) 正規直交性"""
        spec = eigendecompose(graph, solver=solver)
        resid = graph.walk_matrix() @ spec.psis - spec.psis * spec.lambdas[None, :]
        assert np.abs(resid).max() <= 1e-9
        np.testing.assert_allclose(spec.gram(), np.eye(graph.n), atol=1e-9)
        assert np.all(np.diff(spec.lambdas) <= 1e-12)
        assert spec.lambdas[0] == pytest.approx(1.0, abs=1e-10)

    def test_cycle4(self):
        """閉路 C_4 の固有値"""
        np.testing.assert_allclose(eigendecompose(cycle(4)).lambdas, [1, 0, 0, -1], atol=1e-10)

    def test_constant_eigenfunction(self):
        """ψ_0 は定数1"""
        spec = eigendecompose(star(5))
        np.testing.assert_allclose(spec.psis[:, 0], np.ones(6), atol=1e-9)

    def test_solvers_agree(self):
        """Jacobi 法と LAPACK の固有値が一致"""
        g = random_connected_graph(25, 0.2, 4)
        np.testing.assert_allclose(eigendecompose(g).lambdas,
                                   eigendecompose(g, solver="lapack").lambdas, atol=1e-10)

    def test_single_vertex(self):
        """1頂点のグラフ"""
        spec = eigendecompose(build_graph(1, []))
        np.testing.assert_array_equal(spec.lambdas, [1.0])

    def test_disconnected(self):
        """非連結グラフは Disconnected"""
        with pytest.raises(Disconnected):
            eigendecompose(build_graph(4, [(0, 1), (2, 3)]))

    def test_too_large(self, monkeypatch):
        """上限を超える n は TooLarge"""
        monkeypatch.setattr(spectral, "MAX_DENSE_N", 5)
        with pytest.raises(TooLarge):
            eigendecompose(cycle(6))

    def test_unknown_solver(self):
        """未知のソルバ名は ConfigError"""
        with pytest.raises(ConfigError):
            eigendecompose(cycle(5), solver="qr")

    def test_jacobi_no_convergence(self):
        """掃引回数が足りなければ NoConvergence"""
        mat = np.array([[2.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 1.0]])
        with pytest.raises(NoConvergence):
            jacobi_eigh(mat, 1e-14, max_sweeps=0)
        vals, vecs = jacobi_eigh(mat, 1e-13)
        np.testing.assert_allclose(np.sort(vals), np.linalg.eigvalsh(mat), atol=1e-12)
        np.testing.assert_allclose(vecs.T @ vecs, np.eye(3), atol=1e-12)


class TestAutocorrelation:
    """自己相関曲線のテスト"""

    @pytest.mark.parametrize("n,q", [(12, 2), (12, 3), (24, 3), (60, 5)])
    @pytest.mark.parametrize("theta", [0.2, 0.5, 0.9])
    def test_rainbow_closed_form(self, n, q, theta):
        """閉路上のレインボーは閉じた形 (1/q) Σ_k e^{-2γ_k t} と一致"""
        p = ModelParams(theta, q)
        curve = autocorr_curve(eigendecompose(cycle(n), solver="lapack"), rainbow(n, 1, q), p)
        ts = np.array([0.1, 0.5, 1.0, 2.0, 5.0])
        gammas = 1.0 - (1.0 - theta) * np.cos(2 * np.pi * np.arange(1, q) / q)
        closed = np.exp(-2.0 * np.outer(ts, gammas)).sum(axis=1) / q
        np.testing.assert_allclose(eval_autocorr(curve, ts), closed, atol=1e-8)

    def test_monochromatic_t_x0(self):
        """単色配置 n=100, q=2, θ=0.5 で T_x0 = log 50"""
        curve = autocorr_curve(eigendecompose(cycle(100), solver="lapack"), monochromatic(100, 2),
                               ModelParams(0.5, 2))
        assert t_x0(curve, 100) == pytest.approx(math.log(50), abs=1e-6)

    def test_uniform_curve(self):
        """一様初期分布では A ≡ 0, T_x0 = 0, 予測は log(n)/(4θ)"""
        curve = uniform_curve(50, 3, 0.4)
        assert eval_autocorr(curve, 1.0) == 0.0
        assert t_x0(curve, 50) == 0.0
        pred = predicted_tmix(curve)
        assert pred.time == pytest.approx(math.log(50) / 1.6)
        assert pred.branch is Branch.CORRELATION

    def test_total_mass(self):
        """A⁽²⁾_0 = (q-1)/q"""
        spec = eigendecompose(cycle(10))
        for seed in range(3):
            curve = autocorr_curve(spec, uniform_random(10, 4, seed), ModelParams(0.3, 4))
            assert curve.total == pytest.approx(0.75, abs=1e-10)
            assert np.all(curve.weights >= 0)

    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(3, 25), seed=st.integers(0, 10_000),
           q=st.integers(2, 5), theta=st.floats(0.05, 1.0))
    def test_a2_a1_identity_and_sandwich(self, n, seed, q, theta):
        """A⁽²⁾_t = A⁽¹⁾_{2t} と e^{-(4-2θ)s} ≤ A_{t+s}/A_t ≤ e^{-2θs}"""
        g = random_connected_graph(n, 0.3, seed)
        p = ModelParams(theta, q)
        curve = autocorr_curve(eigendecompose(g, solver="lapack"), uniform_random(n, q, seed), p)
        ts = np.linspace(0.0, 3.0, 20)
        a2 = eval_autocorr(curve, ts, Flavor.A2)
        np.testing.assert_allclose(a2, eval_autocorr(curve, 2 * ts, Flavor.A1), atol=1e-12)
        s = ts[1] - ts[0]
        ratio = a2[1:] / a2[:-1]
        assert np.all(ratio <= math.exp(-2 * theta * s) + 1e-12)
        assert np.all(ratio >= math.exp(-(4 - 2 * theta) * s) - 1e-12)

    def test_monochromatic_extremal(self):
        """単色配置の自己相関が最大"""
        spec = eigendecompose(torus(4, 2))
        p = ModelParams(0.3, 3)
        ts = np.linspace(0, 4, 17)
        top = eval_autocorr(autocorr_curve(spec, monochromatic(16, 3, 2), p), ts)
        for seed in range(5):
            curve = autocorr_curve(spec, uniform_random(16, 3, seed), p)
            assert np.all(eval_autocorr(curve, ts) <= top + 1e-12)

    @pytest.mark.parametrize("graph", [cycle(10), torus(6, 2)], ids=["cycle10", "torus6"])
    def test_alternating_minimal(self, graph):
        """二部グラフ・q=2 では交互配置の自己相関と T_x0 が最小"""
        spec = eigendecompose(graph)
        p = ModelParams(0.4, 2)
        ts = np.linspace(0, 4, 17)
        alt = autocorr_curve(spec, alternating(graph), p)
        bottom = eval_autocorr(alt, ts)
        np.testing.assert_allclose(bottom, 0.5 * np.exp(-2 * (2 - p.theta) * ts), atol=1e-12)
        t_alt = t_x0(alt, graph.n)
        for seed in range(8):
            curve = autocorr_curve(spec, uniform_random(graph.n, 2, seed), p)
            assert np.all(eval_autocorr(curve, ts) >= bottom - 1e-12)
            assert t_x0(curve, graph.n) >= t_alt - 1e-9

    @pytest.mark.parametrize("graph", [cycle(10), torus(6, 2)], ids=["cycle10", "torus6"])
    def test_global_bounds(self, graph):
        """0 ≤ A⁽²⁾_t ≤ A⁽²⁾_0 かつ t について非増加"""
        spec = eigendecompose(graph)
        ts = np.linspace(0, 6, 25)
        for q, seed in ((2, 0), (3, 1), (4, 2)):
            curve = autocorr_curve(spec, uniform_random(graph.n, q, seed), ModelParams(0.3, q))
            a2 = eval_autocorr(curve, ts)
            assert np.all(a2 >= 0.0)
            assert np.all(a2 <= a2[0] + 1e-12)
            assert np.all(np.diff(a2) <= 1e-12)

    def test_negative_time(self):
        """負の時刻は NegativeTime"""
        curve = uniform_curve(5, 2, 0.5)
        with pytest.raises(NegativeTime):
            eval_autocorr(curve, -0.1)

    def test_size_mismatch(self):
        """配置とスペクトルの頂点数の不一致"""
        with pytest.raises(SizeMismatch):
            projections(eigendecompose(cycle(5)), monochromatic(6, 2))

    def test_rows(self):
        """出力用の行"""
        curve = autocorr_curve(eigendecompose(cycle(6)), rainbow(6, 1, 3), ModelParams(0.5, 3))
        rows = [row for row in curve_rows(curve) if row[1] > 1e-12]
        assert len(rows) == 1
        assert rows[0] == pytest.approx((1.25, 2.0 / 3.0))
        evaluated = eval_rows(curve, [0.0, 1.0])
        assert evaluated[0] == pytest.approx((0.0, 2.0 / 3.0, 2.0 / 3.0))
        assert evaluated[1][2] == pytest.approx((2.0 / 3.0) * math.exp(-2.5))


class TestPrediction:
    """混合時間の予測のテスト"""

    def test_branches(self):
        """T_x0 と log(n)/(4θ) の大きい方"""
        spec = eigendecompose(cycle(100), solver="lapack")
        mono = predicted_tmix(autocorr_curve(spec, monochromatic(100, 2), ModelParams(0.5, 2)))
        assert mono.branch is Branch.AUTOCORRELATION
        assert mono.time == pytest.approx(math.log(50), abs=1e-6)
        assert mono.t_corr == pytest.approx(math.log(100) / 2)

    def test_bipartite_coefficient(self):
        """二部グラフの係数 1/min{4-2θ, 4θ}"""
        assert bipartite_tmix_coefficient(0.5) == pytest.approx(1 / 2)
        assert bipartite_tmix_coefficient(0.8) == pytest.approx(1 / 2.4)
        assert bipartite_tmix_coefficient(0.2) == pytest.approx(1 / 0.8)

    def test_alternating_t_x0_rate(self):
        """交互配置の T_x0 の主要項は log n / (2(2-θ))"""
        theta = 0.7
        n = 200
        curve = autocorr_curve(eigendecompose(cycle(n), solver="lapack"), alternating(cycle(n)),
                               ModelParams(theta, 2))
        expected = math.log(n / 2) / (2 * (2 - theta))
        assert t_x0(curve, n) == pytest.approx(expected, abs=1e-6)


class TestLatticeSpectrum:
    """格子パターンの閉じた形のテスト"""

    def test_knight_and_rainbow_numbers(self):
        """λ*_knt = -1/4, θ_knt = 5/9, θ_rbw = (10-√5)/19"""
        knt = lattice_pattern_spectrum(2, 5, (1, 2), 0.5)
        rbw = lattice_pattern_spectrum(2, 5, (1, 1), 0.5)
        assert knt.lambda_star == pytest.approx(-0.25, abs=1e-12)
        assert knt.theta_v == pytest.approx(5 / 9, abs=1e-12)
        assert rbw.theta_v == pytest.approx((10 - math.sqrt(5)) / 19, abs=1e-12)

    def test_binary_cycle(self):
        """d=1, q=2 の交互パターンの相転移点 2/3"""
        assert lattice_pattern_spectrum(1, 2, (1,), 0.3).theta_v == pytest.approx(2 / 3, abs=1e-12)

    def test_tmix_coefficient(self):
        """係数 d / (2 min{1-(1-θ)λ*, 2θ})"""
        ls = lattice_pattern_spectrum(2, 2, (1, 1), 1.0)
        assert ls.tmix_coefficient() == pytest.approx(1.0)
        low = lattice_pattern_spectrum(2, 5, (1, 2), 0.1)
        assert low.tmix_coefficient() == pytest.approx(2 / (2 * 0.2))
        assert low.tmix(10) == pytest.approx(low.tmix_coefficient() * math.log(10))

    def test_matches_torus_eigendecomposition(self):
        """閉じた形の曲線がトーラスの固有分解と一致"""
        p = ModelParams(0.4, 5)
        spec = eigendecompose(torus(10, 2), solver="lapack")
        ts = np.linspace(0, 3, 7)
        for v in ((1, 1), (1, 2), (0, 3)):
            closed = lattice_pattern_spectrum(2, 5, v, 0.4, side=10).curve
            direct = autocorr_curve(spec, lattice_pattern(10, 2, 5, v), p)
            np.testing.assert_allclose(eval_autocorr(closed, ts), eval_autocorr(direct, ts), atol=1e-10)

    @pytest.mark.parametrize("theta", [0.1, 0.3, 0.5, 0.7, 0.9])
    def test_knight_faster_than_rainbow(self, theta):
        """トーラス (20,2), q=5 で T_knt < T_rbw"""
        spec = eigendecompose(torus(20, 2), solver="lapack")
        p = ModelParams(theta, 5)
        t_knt = t_x0(autocorr_curve(spec, knight(20, 5), p), 400)
        t_rbw = t_x0(autocorr_curve(spec, rainbow(20, 2, 5), p), 400)
        delta = math.sqrt(5) * (1 - theta) / (5 - theta)
        assert t_knt < t_rbw
        assert t_knt / t_rbw <= 1 - delta + 0.15

    def test_component_out_of_range(self):
        """成分や次元の不一致は ComponentOutOfRange"""
        with pytest.raises(ComponentOutOfRange):
            lattice_pattern_spectrum(2, 5, (1, 5), 0.5)
        with pytest.raises(ComponentOutOfRange):
            lattice_pattern_spectrum(2, 5, (1,), 0.5)


class TestRainbowLowerBound:
    """閉路上の自己相関の下界のテスト"""

    @pytest.mark.parametrize("q", [3, 4, 5])
    @pytest.mark.parametrize("theta", [0.2, 0.8])
    def test_bound_holds(self, q, theta):
        """A⁽²⁾_t ≥ c(q) e^{-2(1-(1-θ)cos(2π/q))t}"""
        n = 60
        spec = eigendecompose(cycle(n), solver="lapack")
        p = ModelParams(theta, q)
        ts = np.linspace(0, 2 * math.log(n), 15)
        bound = np.array([rainbow_lower_bound(q, theta, t) for t in ts])
        starts = [uniform_random(n, q, s) for s in range(20)] + [monochromatic(n, q), rainbow(n, 1, q)]
        for x0 in starts:
            assert np.all(eval_autocorr(autocorr_curve(spec, x0, p), ts) >= bound)

    def test_constant(self):
        """c(q) = min{1/7, π²/(16q)} e^{-4π} / q"""
        assert rainbow_lower_bound_constant(2) == pytest.approx(math.exp(-4 * math.pi) / 14)
        assert rainbow_lower_bound_constant(5) == pytest.approx(
            math.pi ** 2 / 80 * math.exp(-4 * math.pi) / 5)


class TestMarginals:
    """周辺分布のテスト"""

    @pytest.mark.parametrize("theta", [0.3, 0.7])
    def test_against_exact(self, theta):
        """スペクトルによる周辺分布が全状態の厳密計算と一致"""
        g = cycle(8)
        p = ModelParams(theta, 2)
        spec = eigendecompose(g)
        for x0 in (monochromatic(8, 2), alternating(g)):
            for t in (0.25, 1.0, 3.0):
                exact = exact_distribution(g, p, x0, t).marginals()
                np.testing.assert_allclose(marginals(spec, x0, p, t), exact, atol=1e-8)

    def test_rows_sum_to_one(self):
        """各頂点の周辺分布の和は1"""
        g = star(5)
        m = marginals(eigendecompose(g), uniform_random(6, 3, 0), ModelParams(0.4, 3), 0.7)
        np.testing.assert_allclose(m.sum(axis=1), np.ones(6), atol=1e-12)

    def test_out_of_range_raises(self):
        """固有関数が壊れていて [0, 1] を大きくはみ出すと ComputationError"""
        spec = eigendecompose(cycle(6))
        broken = spectral.Spectrum(spec.lambdas, 3.0 * spec.psis, spec.pi)
        x0 = monochromatic(6, 2)
        with pytest.raises(ComputationError):
            marginals(broken, x0, ModelParams(0.5, 2), 0.0)
        exact = marginals(spec, x0, ModelParams(0.5, 2), 0.0)
        assert exact.min() >= 0.0 and exact.max() <= 1.0


class TestEigenfunction:
    """離散時間鎖の固有関数のテスト"""

    @pytest.mark.parametrize("seed", range(5))
    def test_residual(self, seed):
        """全ての (l, k) で残差が 1e-9 以下"""
        g = random_connected_graph(12, 0.3, seed)
        p = ModelParams(0.35, 4)
        spec = eigendecompose(g)
        x = uniform_random(12, 4, seed)
        worst = max(eigenfunction_residual(g, p, spec, l, k, x) for l in range(12) for k in range(1, 4))
        assert worst <= 1e-9

    def test_index_range(self):
        """l の範囲チェック"""
        g = cycle(5)
        with pytest.raises(ConfigError):
            eigenfunction_residual(g, ModelParams(0.5, 2), eigendecompose(g), 5, 1, monochromatic(5, 2))


class TestStationaryVariance:
    """定常分散のテスト"""

    def test_sandwich_exact(self):
        """θ/γ Σπ²ψ² ≤ Var ≤ 1/γ Σπ²ψ²"""
        g = cycle(8)
        p = ModelParams(0.5, 3)
        spec = eigendecompose(g)
        h = exact_neighbor_coalescence(g, p)
        for l in range(8):
            report = stationary_variance(g, p, spec, l, 1, h)
            assert report.lower - 1e-12 <= report.value <= report.upper + 1e-12
            assert report.stderr == 0.0

    def test_estimated_h(self):
        """推定した h_G をそのまま渡せる"""
        g = cycle(6)
        p = ModelParams(0.5, 2)
        spec = eigendecompose(g)
        est = neighbor_coalescence(g, p, 2000, seed=0)
        report = stationary_variance(g, p, spec, 1, 1, est)
        assert report.stderr > 0
        assert report.lower - 4 * report.stderr <= report.value <= report.upper + 4 * report.stderr

    def test_bad_h(self):
        """[0, 1] から外れた h_G は BadHG"""
        g = cycle(5)
        spec = eigendecompose(g)
        with pytest.raises(BadHG):
            stationary_variance(g, ModelParams(0.5, 2), spec, 0, 1, np.full(5, 1.5))

    def test_k_range(self):
        """k の範囲チェック"""
        g = cycle(5)
        with pytest.raises(KOutOfRange):
            stationary_variance(g, ModelParams(0.5, 2), eigendecompose(g), 0, 2, np.zeros(5))

    def test_degree_bounds(self):
        """n·Var の次数比による上下界"""
        g = star(4)
        p = ModelParams(0.5, 2)
        spec = eigendecompose(g)
        lower, upper = variance_degree_bounds(g, p, spec, 1)
        gamma = 1.0 - 0.5 * spec.lambdas[1]
        assert lower == pytest.approx(0.5 / (4 * gamma))
        assert upper == pytest.approx(4 / gamma)
        report = stationary_variance(g, p, spec, 1, 1, exact_neighbor_coalescence(g, p))
        assert lower - 1e-12 <= g.n * report.value <= upper + 1e-12


class TestMagnetization:
    """磁化の分散の上界のテスト"""

    def test_bound_holds(self):
        """Σπ(u)π(v)P(u↔v) ≤ (1/θ)Σπ²"""
        g = cycle(8)
        p = ModelParams(0.5, 2)
        pm, se = coalescence_matrix(g, p, 2000, seed=1)
        check = magnetization_bound(g, p, pm, se)
        assert check.holds
        assert check.rhs == pytest.approx(2 * 8 / 64)

    def test_complete_graph_identity(self):
        """P ≡ 1 なら左辺は1"""
        g = complete_graph(4)
        check = magnetization_bound(g, ModelParams(0.5, 2), np.ones((4, 4)))
        assert check.lhs == pytest.approx(1.0)
        assert check.lhs_stderr == 0.0

    def test_shape(self):
        """行列の形のチェック"""
        with pytest.raises(SizeMismatch):
            magnetization_bound(cycle(4), ModelParams(0.5, 2), np.ones((3, 3)))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
