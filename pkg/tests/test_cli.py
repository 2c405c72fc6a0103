#!/usr/bin/env python3
"""
コマンドラインとサブコマンドのテスト
"""

import sys
from pathlib import Path

# プロジェクトルートをパスに追加
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

import csv
import json
import math

import pytest

from src.cli.commands import cmd_autocorr, cmd_sample, cmd_tmix_table, cmd_tv_profile, graph_from_spec
from src.cli.writers import format_value, pack_colors
from src.cli.verify import (
    VerifyContext,
    check_cluster_exchangeability,
    check_coalescence_gap,
    check_forward_backward_window,
    check_p_after_monotone,
    check_permutation_equivariance,
    check_R_auto_stationary,
    suite_graph,
    suite_patterns,
)
from src.exceptions import ConfigError
from src.main import build_parser, main
from src.utils.config_loader import GraphSpec, RunConfig, VerifyThresholds


def _config(tmp_path, **data) -> RunConfig:
    data.setdefault('out', str(tmp_path / "out"))
    return RunConfig.from_dict(data)


def _read_csv(path):
    with open(path, encoding='utf-8') as f:
        lines = [line for line in f if not line.startswith('#')]
    return list(csv.reader(lines))


def _write_yaml(path, text: str) -> str:
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestWriters:
    """出力形式のテスト"""

    def test_format_value(self):
        """浮動小数点は17桁、真偽値は 0/1"""
        assert format_value(0.1) == "0.10000000000000001"
        assert format_value(True) == "1"
        assert format_value(3) == "3"
        assert format_value(None) == ""

    def test_pack_colors(self):
        """q ≤ 10 は数字の連結"""
        assert pack_colors([0, 1, 2], 3) == "012"
        assert pack_colors([10, 2], 11) == "10-2"


class TestCommands:
    """サブコマンドのテスト"""

    def test_graph_from_spec(self):
        """必須フィールドの欠落は ConfigError"""
        assert graph_from_spec(GraphSpec(kind="torus", side=4, dim=2)).n == 16
        with pytest.raises(ConfigError):
            graph_from_spec(GraphSpec(kind="star"))
        with pytest.raises(ConfigError):
            graph_from_spec(GraphSpec(kind="hypercube", n=8))

    def test_autocorr_monochromatic(self, tmp_path):
        """単色配置の summary と評価表"""
        config = _config(tmp_path, graph={'kind': 'cycle', 'n': 100},
                         model={'theta': 0.5, 'q': 2}, solver='lapack', times=[0.0, 1.0])
        files = cmd_autocorr(config)
        assert [f.name for f in files] == ["curve.csv", "eval.csv", "summary.json"]
        summary = json.loads(files[2].read_text(encoding="utf-8"))
        assert summary["T_x0"] == pytest.approx(math.log(50), abs=1e-6)
        assert summary["branch"] == "T_x0"
        assert summary["config"]["graph"]["n"] == 100
        rows = _read_csv(files[1])
        assert rows[0] == ["t", "A1", "A2"]
        assert float(rows[2][2]) == pytest.approx(0.5 * math.exp(-1.0))

    def test_autocorr_uniform(self, tmp_path):
        """一様初期分布は T_corr 側"""
        config = _config(tmp_path, graph={'kind': 'cycle', 'n': 12}, initial={'kind': 'uniform'},
                         times=[0.0])
        summary = json.loads(cmd_autocorr(config)[2].read_text(encoding="utf-8"))
        assert summary["T_x0"] == 0.0
        assert summary["branch"] == "T_corr"

    def test_autocorr_empirical_column(self, tmp_path):
        """経験的自己相関の列"""
        config = _config(tmp_path, graph={'kind': 'cycle', 'n': 6}, times=[0.0, 0.5],
                         replicates={'reps': 200, 'empirical': True})
        rows = _read_csv(cmd_autocorr(config)[1])
        assert rows[0][-2:] == ["empirical_A2", "empirical_stderr"]
        assert float(rows[1][3]) == pytest.approx(0.5)

    def test_tmix_table(self, tmp_path):
        """格子パターンの表と相転移点"""
        config = _config(tmp_path, tmix_table={'d': 2, 'q': 5, 'vectors': [[1, 1], [1, 2]],
                                               'thetas': [0.1, 0.5, 0.9]})
        files = cmd_tmix_table(config)
        rows = _read_csv(files[0])
        assert len(rows) == 1 + 6
        summary = json.loads(files[1].read_text(encoding="utf-8"))
        assert summary["theta_v"]["1;2"] == pytest.approx(5 / 9)
        assert summary["theta_v"]["1;1"] == pytest.approx((10 - math.sqrt(5)) / 19)

    def test_tv_profile(self, tmp_path):
        """小さな閉路の d_tv 表"""
        config = _config(tmp_path, graph={'kind': 'cycle', 'n': 5}, times=[0.0, 1.0, 2.0, 4.0, 8.0])
        files = cmd_tv_profile(config)
        rows = _read_csv(files[0])
        assert rows[0] == ["t", "d_tv", "predicted_tmix_marker"]
        distances = [float(r[1]) for r in rows[1:]]
        assert distances == sorted(distances, reverse=True)
        summary = json.loads(files[1].read_text(encoding="utf-8"))
        assert summary["tmix_quarter"] in (1.0, 2.0, 4.0, 8.0)

    @pytest.mark.parametrize("mode", ["forward", "backward", "cftp", "coupled"])
    def test_sample_deterministic(self, tmp_path, mode):
        """同じシードならバイト単位で同じ出力"""
        outputs = []
        for name in ("a", "b"):
            config = _config(tmp_path, out=str(tmp_path / name), graph={'kind': 'cycle', 'n': 6},
                             replicates={'reps': 20}, sample={'mode': mode, 't': 0.5}, seed=3)
            outputs.append(cmd_sample(config)[0].read_bytes())
        assert outputs[0] == outputs[1]
        assert outputs[0].startswith(f"# mode={mode} seed=3".encode("utf-8"))

    def test_forward_needs_configuration(self, tmp_path):
        """forward モードに一様初期分布は使えない"""
        config = _config(tmp_path, graph={'kind': 'cycle', 'n': 12}, initial={'kind': 'uniform'},
                         sample={'mode': 'forward'})
        with pytest.raises(ConfigError):
            cmd_sample(config)


class TestMain:
    """main() の終了コードのテスト"""

    def test_parser_requires_command(self):
        """サブコマンドなしは使い方エラー"""
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args([])
        assert exc.value.code == 2

    def test_autocorr_ok(self, tmp_path):
        """正常終了は0"""
        out = tmp_path / "run"
        assert main(["autocorr", "--out", str(out), "--seed", "1"]) == 0
        assert (out / "summary.json").exists()

    def test_bad_config(self, tmp_path):
        """未知のキーは終了コード2"""
        path = _write_yaml(tmp_path / "bad.yaml", "graph:\n  kind: cycle\n  size: 5\n")
        assert main(["autocorr", "--config", path, "--out", str(tmp_path / "o")]) == 2

    def test_missing_config_file(self, tmp_path):
        """存在しない設定ファイルは終了コード2"""
        assert main(["autocorr", "--config", str(tmp_path / "none.yaml")]) == 2

    def test_resource_cap(self, tmp_path):
        """状態空間が大きすぎると終了コード3"""
        path = _write_yaml(tmp_path / "big.yaml", "graph:\n  kind: cycle\n  n: 23\n")
        assert main(["tv-profile", "--config", path, "--out", str(tmp_path / "o")]) == 3

    def test_verify_spectral(self, capsys):
        """spectral スイートは成功"""
        assert main(["verify", "spectral"]) == 0
        assert "件成功" in capsys.readouterr().out

    def test_verify_inject_fault(self, capsys):
        """摂動を入れると失敗して終了コード1"""
        assert main(["verify", "spectral", "--inject-fault"]) == 1
        assert "[FAIL] spectral.eigen_residual" in capsys.readouterr().out

    def test_verify_unknown_suite(self):
        """未知のスイートは終了コード2"""
        assert main(["verify", "nonsense"]) == 2


class _Collector:
    def __init__(self):
        self.results = {}

    def check(self, name, passed, detail):
        self.results[name] = passed


def _context(inject_fault=False, reps=4000):
    return VerifyContext(VerifyThresholds(), reps, reps, reps, seed=0, inject_fault=inject_fault)


class TestVerifyChecks:
    """検証スイートの個別検査のテスト"""

    @pytest.mark.parametrize("suite", [suite_graph, suite_patterns])
    def test_cheap_suites_pass(self, suite):
        """摂動なしでは全て成功"""
        assert all(r.passed for r in suite(_context()))

    @pytest.mark.parametrize("suite,name", [(suite_graph, "bipartition_parts"),
                                            (suite_patterns, "lattice_zero_monochromatic")])
    def test_cheap_suites_inject_fault(self, suite, name):
        """摂動を入れると該当する検査だけが失敗"""
        failed = [r.name for r in suite(_context(inject_fault=True)) if not r.passed]
        assert failed == [name]

    @pytest.mark.parametrize("check", [check_permutation_equivariance, check_cluster_exchangeability])
    def test_fault_sensitive_checks(self, check):
        """摂動の有無で結果が反転する"""
        ok = _Collector()
        check(_context(), ok)
        bad = _Collector()
        check(_context(inject_fault=True), bad)
        assert all(ok.results.values())
        assert not all(bad.results.values())

    def test_coalescence_gap_fault(self):
        """p_after をずらすと辺ごとと総和の検査がともに失敗"""
        ok = _Collector()
        check_coalescence_gap(_context(reps=10000), ok)
        bad = _Collector()
        check_coalescence_gap(_context(inject_fault=True, reps=10000), bad)
        assert ok.results == {"covariance_gap_edges": True, "mean_gap_aggregate": True}
        assert bad.results == {"covariance_gap_edges": False, "mean_gap_aggregate": False}

    @pytest.mark.parametrize("check", [check_forward_backward_window, check_p_after_monotone,
                                       check_R_auto_stationary])
    def test_invariant_checks_pass(self, check):
        """確率的な検査も既定の幅で成功"""
        rec = _Collector()
        check(_context(reps=8000), rec)
        assert rec.results and all(rec.results.values())


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
