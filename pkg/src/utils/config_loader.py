#!/usr/bin/env python3
"""
設定ファイル読み込みユーティリティ

実行設定（グラフ・モデル・初期条件・時刻格子・レプリケート数）と
検証スイートの閾値を YAML/JSON から読み込む。

優先順位: config/settings.yaml の既定値 < ユーザー設定ファイル < コマンドライン引数
"""

import copy
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from ..exceptions import ConfigError


def _reject_unknown(cls, data: Dict[str, Any], section: str) -> None:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{section} に未知のキーがあります: {', '.join(unknown)}")


def _section(data: Dict[str, Any], key: str) -> Dict[str, Any]:
    value = data.get(key) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"{key} はマッピングである必要があります")
    return value


def expand_grid(spec) -> List[float]:
    """
    時刻や θ の格子を展開

    リストならそのまま、{start, stop, step} なら端点を含む等間隔格子。
    """
    if spec is None:
        return []
    if isinstance(spec, dict):
        _reject_unknown_keys(spec, {'start', 'stop', 'step'}, "格子")
        try:
            start, stop, step = float(spec['start']), float(spec['stop']), float(spec['step'])
        except KeyError as e:
            raise ConfigError(f"格子に {e} がありません") from e
        if step <= 0 or stop < start:
            raise ConfigError(f"格子の指定が不正です: {spec}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(count)]
    if isinstance(spec, (list, tuple)):
        return [float(t) for t in spec]
    return [float(spec)]


def _reject_unknown_keys(data: Dict[str, Any], known, section: str) -> None:
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{section} に未知のキーがあります: {', '.join(unknown)}")


@dataclass
class GraphSpec:
    """グラフ設定"""
    kind: str = "cycle"
    n: Optional[int] = None
    side: Optional[int] = None
    dim: int = 1
    leaves: Optional[int] = None
    path: Optional[str] = None
    p: Optional[float] = None
    seed: int = 0

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'GraphSpec':
        _reject_unknown(cls, data, "graph")
        return cls(**data)


@dataclass
class ModelSpec:
    """モデル設定"""
    theta: float = 0.5
    q: int = 2

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ModelSpec':
        _reject_unknown(cls, data, "model")
        return cls(theta=float(data.get('theta', 0.5)), q=int(data.get('q', 2)))


@dataclass
class InitialSpec:
    """初期条件設定"""
    kind: str = "monochromatic"
    color: int = 0
    v: Optional[List[int]] = None
    path: Optional[str] = None
    colors: Optional[List[int]] = None
    seed: int = 0

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'InitialSpec':
        _reject_unknown(cls, data, "initial")
        return cls(**data)


@dataclass
class ReplicateSpec:
    """レプリケート設定"""
    reps: int = 10000
    empirical: bool = False
    cftp_check: bool = False
    cftp_reps: int = 100000

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ReplicateSpec':
        _reject_unknown(cls, data, "replicates")
        return cls(**data)


@dataclass
class TableSpec:
    """tmix-table の設定"""
    d: int = 2
    q: int = 5
    vectors: List[List[int]] = field(default_factory=lambda: [[1, 1], [1, 2]])
    thetas: Any = field(default_factory=lambda: {'start': 0.02, 'stop': 1.0, 'step': 0.02})

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TableSpec':
        _reject_unknown(cls, data, "tmix_table")
        return cls(**data)

    @property
    def theta_grid(self) -> List[float]:
        return expand_grid(self.thetas)


@dataclass
class SampleSpec:
    """sample の設定"""
    mode: str = "forward"
    t: float = 1.0

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SampleSpec':
        _reject_unknown(cls, data, "sample")
        spec = cls(**data)
        if spec.mode not in ("forward", "backward", "cftp", "coupled"):
            raise ConfigError(f"sample.mode が不正です: {spec.mode}")
        return spec


@dataclass
class RunConfig:
    """
    1回の実行の設定

    to_dict() は解決済みの全設定を返し、summary.json に埋め込まれる。
    """
    graph: GraphSpec = field(default_factory=GraphSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    times: Any = field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0, 4.0])
    replicates: ReplicateSpec = field(default_factory=ReplicateSpec)
    tmix_table: TableSpec = field(default_factory=TableSpec)
    sample: SampleSpec = field(default_factory=SampleSpec)
    solver: str = "jacobi"
    seed: int = 0
    threads: int = 1
    out: str = "results"

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        """辞書から設定を作る（未知のキーは ConfigError）"""
        data = data or {}
        if not isinstance(data, dict):
            raise ConfigError("設定のトップレベルはマッピングである必要があります")
        _reject_unknown(cls, data, "設定")
        config = cls(
            graph=GraphSpec.from_dict(_section(data, 'graph')),
            model=ModelSpec.from_dict(_section(data, 'model')),
            initial=InitialSpec.from_dict(_section(data, 'initial')),
            replicates=ReplicateSpec.from_dict(_section(data, 'replicates')),
            tmix_table=TableSpec.from_dict(_section(data, 'tmix_table')),
            sample=SampleSpec.from_dict(_section(data, 'sample')),
            solver=str(data.get('solver', 'jacobi')),
            seed=int(data.get('seed', 0)),
            threads=int(data.get('threads', 1)),
            out=str(data.get('out', 'results')),
        )
        if 'times' in data:
            config.times = data['times']
        if config.seed < 0 or config.seed >= 2 ** 64:
            raise ConfigError(f"seed は符号なし64ビット整数である必要があります: {config.seed}")
        if config.threads < 1:
            raise ConfigError(f"threads は1以上である必要があります: {config.threads}")
        if config.solver not in ("jacobi", "lapack"):
            raise ConfigError(f"solver は jacobi か lapack です: {config.solver}")
        return config

    @property
    def time_grid(self) -> List[float]:
        return expand_grid(self.times)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def merge_dicts(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """override を base に再帰的に重ねた新しい辞書"""
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_dicts(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


@dataclass
class VerifyThresholds:
    """検証スイートの許容値とレプリケート数"""
    sigmas: float = 4.0
    eigen_tol: float = 1e-9
    identity_tol: float = 1e-12
    marginal_tol: float = 1e-8
    residual_tol: float = 1e-10
    mc_reps: int = 20000
    mc_reps_full: int = 100000
    cftp_reps: int = 20000
    cftp_reps_full: int = 1000000
    pair_reps: int = 20000
    pair_reps_full: int = 200000
    time_budget: float = 600.0

    @classmethod
    def from_yaml(cls, filepath) -> 'VerifyThresholds':
        """YAMLファイルから閾値を読み込む"""
        with open(filepath, 'r', encoding='utf-8') as f:
            config = yaml.safe_load(f) or {}

        tol = config.get('tolerance', {})
        reps = config.get('replicates', {})
        return cls(
            sigmas=tol.get('sigmas', 4.0),
            eigen_tol=tol.get('eigen', 1e-9),
            identity_tol=tol.get('identity', 1e-12),
            marginal_tol=tol.get('marginal', 1e-8),
            residual_tol=tol.get('residual', 1e-10),
            mc_reps=reps.get('monte_carlo', 20000),
            mc_reps_full=reps.get('monte_carlo_full', 100000),
            cftp_reps=reps.get('cftp', 20000),
            cftp_reps_full=reps.get('cftp_full', 1000000),
            pair_reps=reps.get('pair', 20000),
            pair_reps_full=reps.get('pair_full', 200000),
            time_budget=config.get('time_budget', 600.0),
        )

    def scaled(self, full: bool) -> Tuple[int, int, int]:
        """(モンテカルロ, CFTP, 2体) のレプリケート数"""
        if full:
            return self.mc_reps_full, self.cftp_reps_full, self.pair_reps_full
        return self.mc_reps, self.cftp_reps, self.pair_reps


class ConfigLoader:
    """設定ファイル読み込みクラス"""

    def __init__(self, config_dir: Path):
        """
        初期化

        Args:
            config_dir: 設定ファイルのディレクトリ
        """
        self.config_dir = Path(config_dir)
        self._settings: Dict[str, Any] = self._load_yaml('settings.yaml')

    def _load_yaml(self, filename: str) -> Dict[str, Any]:
        """YAMLファイルを読み込む"""
        filepath = self.config_dir / filename
        if not filepath.exists():
            return {}
        with open(filepath, 'r', encoding='utf-8') as f:
            return yaml.safe_load(f) or {}

    @property
    def defaults(self) -> Dict[str, Any]:
        """実行設定の既定値"""
        return self._settings.get('run', {})

    @property
    def thresholds(self) -> VerifyThresholds:
        """検証閾値を取得"""
        path = self.config_dir / 'thresholds.yaml'
        if path.exists():
            return VerifyThresholds.from_yaml(path)
        return VerifyThresholds()

    def load_run_config(self, path: Optional[str] = None,
                        overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
        """
        既定値・設定ファイル・上書きを重ねて RunConfig を作る

        Args:
            path: ユーザー設定ファイル（YAML または JSON）
            overrides: コマンドライン引数による上書き（None の値は無視）
        """
        data = self.defaults
        if path is not None:
            data = merge_dicts(data, load_document(path))
        data = merge_dicts(data, {k: v for k, v in (overrides or {}).items() if v is not None})
        return RunConfig.from_dict(data)


def load_document(path) -> Dict[str, Any]:
    """YAML/JSON 文書を読み込む（JSON は YAML として読める）"""
    with open(path, 'r', encoding='utf-8') as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: 設定ファイルを解析できません: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: トップレベルはマッピングである必要があります")
    return data
