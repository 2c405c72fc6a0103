#!/usr/bin/env python3
"""
初期配置モジュールのユニットテスト
"""

import sys
from pathlib import Path

# プロジェクトルートをパスに追加
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.exceptions import ColorOutOfRange, ComponentOutOfRange, ConfigError, NotBipartite, NotMultiple
from src.graph import cycle, path_graph, star, torus
from src.patterns import (
    UNIFORM,
    ColorConfig,
    Initial,
    alternating,
    color_config_from_json,
    knight,
    lattice_pattern,
    monochromatic,
    permute_colors,
    rainbow,
    read_color_config,
    root_embedding,
    uniform_random,
    write_color_config,
)


class TestColorConfig:
    """色配置クラスのテスト"""

    def test_immutable(self):
        """色配列は書き換えられない"""
        x = ColorConfig(3, [0, 1, 2])
        with pytest.raises(ValueError):
            x.colors[0] = 2

    def test_color_range(self):
        """範囲外の色は ColorOutOfRange"""
        with pytest.raises(ColorOutOfRange):
            ColorConfig(2, [0, 2])

    def test_q_too_small(self):
        """q < 2 は ConfigError"""
        with pytest.raises(ConfigError):
            ColorConfig(1, [0, 0])

    def test_equality_and_hash(self):
        """値による等価性"""
        a = ColorConfig(3, [0, 1, 2])
        b = ColorConfig(3, np.array([0, 1, 2]))
        assert a == b
        assert hash(a) == hash(b)
        assert a != ColorConfig(4, [0, 1, 2])

    def test_encode_digits(self):
        """頂点0が最下位桁"""
        assert ColorConfig(3, [2, 1, 0]).encode() == 2 + 1 * 3
        assert ColorConfig.decode(5, 3, 2).as_tuple() == (1, 0, 1)

    @settings(max_examples=50, deadline=None)
    @given(q=st.integers(2, 5), colors=st.lists(st.integers(0, 4), min_size=1, max_size=8))
    def test_decode_inverts_encode(self, q, colors):
        """decode は encode の逆"""
        x = ColorConfig(q, [c % q for c in colors])
        assert ColorConfig.decode(x.encode(), x.n, q) == x

    def test_embedding(self):
        """埋め込みは1の q 乗根"""
        x = ColorConfig(4, [0, 1, 2, 3])
        np.testing.assert_allclose(x.embedding(1), [1, 1j, -1, -1j], atol=1e-15)
        np.testing.assert_allclose(x.embedding(2), [1, -1, 1, -1], atol=1e-15)
        np.testing.assert_allclose(root_embedding(np.array([[0, 2]]), 4, 1), [[1, -1]], atol=1e-15)


class TestSimplePatterns:
    """単色・交互・一様ランダムのテスト"""

    def test_monochromatic(self):
        """単色配置"""
        x = monochromatic(5, 3, 2)
        assert x.as_tuple() == (2, 2, 2, 2, 2)
        with pytest.raises(ColorOutOfRange):
            monochromatic(5, 3, 3)

    def test_alternating_cycle(self):
        """偶閉路の交互配置は頂点0側が色1"""
        x = alternating(cycle(6))
        assert x.as_tuple() == (1, 0, 1, 0, 1, 0)

    def test_alternating_star(self):
        """星グラフの交互配置"""
        x = alternating(star(3), q=3)
        assert x.as_tuple() == (1, 0, 0, 0)
        assert x.q == 3

    def test_alternating_proper(self):
        """隣接頂点の色は異なる"""
        g = torus(6, 2)
        x = alternating(g)
        assert all(x.colors[u] != x.colors[v] for u, v in g.edges())

    def test_alternating_odd_cycle(self):
        """奇閉路は NotBipartite"""
        with pytest.raises(NotBipartite):
            alternating(cycle(5))

    def test_uniform_random_seeded(self):
        """一様ランダム配置はシードで決まる"""
        assert uniform_random(20, 3, 4) == uniform_random(20, 3, 4)
        assert uniform_random(20, 3, 4) != uniform_random(20, 3, 5)

    def test_uniform_sentinel(self):
        """UNIFORM は Initial の値"""
        assert UNIFORM is Initial.UNIFORM


class TestLatticePattern:
    """格子パターンのテスト"""

    def test_one_dimensional_rainbow(self):
        """n=6, d=1, q=3 のレインボー"""
        assert lattice_pattern(6, 1, 3, [1]).as_tuple() == (0, 1, 2, 0, 1, 2)
        assert rainbow(6, 1, 3) == lattice_pattern(6, 1, 3, [1])

    def test_two_dimensional(self):
        """2次元パターンの行優先の値"""
        x = rainbow(5, 2, 5)
        assert x.colors[1 * 5 + 2] == 3
        y = knight(10, 5)
        assert y.colors[1 * 10 + 2] == 0
        assert y.colors[3 * 10 + 1] == 0
        assert y.colors[0 * 10 + 1] == 2

    def test_not_multiple(self):
        """n が q の倍数でなければ NotMultiple"""
        with pytest.raises(NotMultiple):
            lattice_pattern(7, 1, 3, [1])

    def test_component_out_of_range(self):
        """成分の範囲と次元のチェック"""
        with pytest.raises(ComponentOutOfRange):
            lattice_pattern(6, 1, 3, [3])
        with pytest.raises(ComponentOutOfRange):
            lattice_pattern(6, 2, 3, [1])

    @pytest.mark.parametrize("side,d,q", [(6, 1, 3), (4, 2, 2), (10, 2, 5), (4, 3, 4)])
    def test_zero_vector_monochromatic(self, side, d, q):
        """v = 0 は単色配置"""
        assert lattice_pattern(side, d, q, [0] * d) == monochromatic(side ** d, q)

    @pytest.mark.parametrize("side,d", [(4, 1), (6, 2), (4, 3)])
    def test_binary_rainbow_alternating(self, side, d):
        """q=2 のレインボーは色の入れ替えを除いて交互配置"""
        x = lattice_pattern(side, d, 2, [1] * d)
        alt = alternating(torus(side, d))
        assert x == alt or x == permute_colors(alt, [1, 0])

    @pytest.mark.parametrize("v", [(1, 1), (1, 2), (0, 3), (2, 4)])
    def test_eigenfunction(self, v):
        """格子パターンの埋め込みは P の固有関数"""
        q = 5
        g = torus(10, 2)
        x = lattice_pattern(10, 2, q, v)
        for k in range(1, q):
            z = x.embedding(k)
            lam = np.mean(np.cos(2 * np.pi * k * np.asarray(v) / q))
            np.testing.assert_allclose(g.walk_apply(z), lam * z, atol=1e-12)


class TestColorIO:
    """色配置の入出力と変換のテスト"""

    def test_file_round_trip(self, tmp_path):
        """ファイルへの書き出しと読み込み"""
        x = uniform_random(12, 4, 1)
        path = tmp_path / "x.txt"
        write_color_config(x, path)
        assert read_color_config(path) == x

    def test_missing_header(self, tmp_path):
        """ヘッダーがなければ ConfigError"""
        path = tmp_path / "x.txt"
        path.write_text("0\n1\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            read_color_config(path)

    def test_from_json(self):
        """JSON 文字列と配列"""
        assert color_config_from_json("[0, 2, 1]", 3).as_tuple() == (0, 2, 1)
        assert color_config_from_json([1, 1], 2).as_tuple() == (1, 1)

    def test_permute_colors(self):
        """色の付け替え"""
        x = ColorConfig(3, [0, 1, 2, 0])
        assert permute_colors(x, [2, 0, 1]).as_tuple() == (2, 0, 1, 2)
        with pytest.raises(ConfigError):
            permute_colors(x, [0, 0, 1])

    def test_path_alternating_encode(self):
        """パス上の交互配置の状態番号"""
        x = alternating(path_graph(3))
        assert x.encode() == 1 + 0 * 2 + 1 * 4


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
