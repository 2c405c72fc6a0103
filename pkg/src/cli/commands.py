#!/usr/bin/env python3
"""
サブコマンドの実装

各 cmd_* は解決済みの RunConfig を受け取り、出力ディレクトリに
CSV と summary.json を書き出して、書いたファイルのリストを返す。
"""

import math
from pathlib import Path
from typing import List, Optional, Union

from ..dual import backward_sample_batch, cftp_sample_batch, coupled_sample_batch
from ..dynamics import ModelParams, run_forward_batch
from ..exceptions import ConfigError, GridExhausted
from ..graph import (
    Graph,
    complete_graph,
    cycle,
    path_graph,
    random_connected_graph,
    read_edge_list,
    star,
    torus,
)
from ..mixing import (
    empirical_autocorr,
    empirical_distribution,
    exact_mixing_time,
    exact_stationary,
    exact_tv_profile,
    tv_distance,
)
from ..patterns import (
    UNIFORM,
    ColorConfig,
    Initial,
    alternating,
    knight,
    lattice_pattern,
    monochromatic,
    rainbow,
    read_color_config,
    uniform_random,
)
from ..spectral import (
    autocorr_curve,
    curve_rows,
    eigendecompose,
    eval_rows,
    lattice_pattern_spectrum,
    predicted_tmix,
    uniform_curve,
)
from ..utils.config_loader import GraphSpec, InitialSpec, RunConfig
from ..utils.logger import get_logger
from .writers import pack_colors, write_csv, write_json


logger = get_logger("cli.commands")


# ---------------------------------------------------------------------------
# 設定からの構築
# ---------------------------------------------------------------------------

def _require(value, name: str, kind: str):
    if value is None:
        raise ConfigError(f"graph.kind={kind} には {name} が必要です")
    return value


def graph_from_spec(spec: GraphSpec) -> Graph:
    """GraphSpec からグラフを作る"""
    kind = spec.kind
    if kind == "torus":
        return torus(_require(spec.side, "side", kind), spec.dim)
    if kind == "cycle":
        return cycle(_require(spec.n, "n", kind))
    if kind == "path":
        return path_graph(_require(spec.n, "n", kind))
    if kind == "complete":
        return complete_graph(_require(spec.n, "n", kind))
    if kind == "star":
        return star(_require(spec.leaves, "leaves", kind))
    if kind == "random":
        return random_connected_graph(_require(spec.n, "n", kind), _require(spec.p, "p", kind), spec.seed)
    if kind == "edge_list":
        return read_edge_list(_require(spec.path, "path", kind))
    raise ConfigError(f"未知のグラフ種別です: {kind}")


def _lattice_shape(graph_spec: GraphSpec) -> tuple:
    if graph_spec.kind == "torus":
        return graph_spec.side, graph_spec.dim
    if graph_spec.kind == "cycle":
        return graph_spec.n, 1
    raise ConfigError("格子パターンには torus か cycle のグラフが必要です")


def initial_from_spec(spec: InitialSpec, graph_spec: GraphSpec, g: Graph,
                      q: int) -> Union[ColorConfig, Initial]:
    """InitialSpec から初期配置を作る"""
    kind = spec.kind
    if kind == "monochromatic":
        return monochromatic(g.n, q, spec.color)
    if kind == "alternating":
        return alternating(g, q)
    if kind in ("rainbow", "knight", "lattice"):
        side, dim = _lattice_shape(graph_spec)
        if kind == "rainbow":
            return rainbow(side, dim, q)
        if kind == "knight":
            return knight(side, q, dim)
        if spec.v is None:
            raise ConfigError("initial.kind=lattice には v が必要です")
        return lattice_pattern(side, dim, q, spec.v)
    if kind == "uniform":
        return UNIFORM
    if kind == "uniform_random":
        return uniform_random(g.n, q, spec.seed)
    if kind == "file":
        if spec.path is None:
            raise ConfigError("initial.kind=file には path が必要です")
        x = read_color_config(spec.path)
        if x.q != q:
            raise ConfigError(f"色配置ファイルの q={x.q} がモデルの q={q} と一致しません")
        return x
    if kind == "colors":
        if spec.colors is None:
            raise ConfigError("initial.kind=colors には colors が必要です")
        return ColorConfig(q, spec.colors)
    raise ConfigError(f"未知の初期条件です: {kind}")


def _setup(config: RunConfig):
    g = graph_from_spec(config.graph)
    p = ModelParams(config.model.theta, config.model.q)
    x0 = initial_from_spec(config.initial, config.graph, g, p.q)
    if isinstance(x0, ColorConfig) and x0.n != g.n:
        raise ConfigError(f"初期配置の頂点数 {x0.n} がグラフの n={g.n} と一致しません")
    return g, p, x0


def _curve_for(g: Graph, p: ModelParams, x0, solver: str):
    if isinstance(x0, Initial):
        return uniform_curve(g.n, p.q, p.theta)
    spec = eigendecompose(g, solver=solver)
    return autocorr_curve(spec, x0, p)


def _summary(command: str, config: RunConfig, **values) -> dict:
    data = {"command": command, "config": config.to_dict()}
    data.update(values)
    return data


# ---------------------------------------------------------------------------
# サブコマンド
# ---------------------------------------------------------------------------

def cmd_autocorr(config: RunConfig) -> List[Path]:
    """自己相関曲線とその評価、T_x0 と混合時間の予測"""
    g, p, x0 = _setup(config)
    out = Path(config.out)
    times = config.time_grid
    logger.info(f"autocorr: n={g.n}, q={p.q}, θ={p.theta}, 初期条件={config.initial.kind}")

    curve = _curve_for(g, p, x0, config.solver)
    files = [write_csv(out / "curve.csv", ["gamma", "weight"], curve_rows(curve))]

    header = ["t", "A1", "A2"]
    rows = [list(r) for r in eval_rows(curve, times)]
    if config.replicates.empirical:
        if isinstance(x0, Initial):
            raise ConfigError("一様初期分布では経験的自己相関を計算できません")
        header += ["empirical_A2", "empirical_stderr"]
        for row, t in zip(rows, times):
            est = empirical_autocorr(g, p, x0, t, config.replicates.reps, config.seed, config.threads)
            row += [est.value, est.stderr]
    files.append(write_csv(out / "eval.csv", header, rows))

    pred = predicted_tmix(curve, g.n, p.theta)
    files.append(write_json(out / "summary.json", _summary(
        "autocorr", config,
        n=g.n,
        A2_0=curve.total,
        T_x0=pred.t_x0,
        T_corr_proxy=pred.t_corr,
        predicted_tmix=pred.time,
        branch=pred.branch.value,
    )))
    logger.info(f"T_x0={pred.t_x0:.6g}, 予測混合時間={pred.time:.6g} ({pred.branch.value})")
    return files


def cmd_tmix_table(config: RunConfig) -> List[Path]:
    """トーラス上の格子パターンについて θ ごとの混合時間係数の表"""
    table = config.tmix_table
    out = Path(config.out)
    thetas = table.theta_grid
    if not thetas:
        raise ConfigError("tmix_table.thetas が空です")

    rows = []
    crossovers = {}
    for v in table.vectors:
        label = ";".join(str(int(c)) for c in v)
        previous = None
        for theta in thetas:
            ls = lattice_pattern_spectrum(table.d, table.q, v, theta)
            slow = 1.0 - (1.0 - theta) * ls.lambda_star
            branch = "T_corr" if 2.0 * theta <= slow else "T_x0"
            if previous == "T_corr" and branch == "T_x0" and label not in crossovers:
                crossovers[label] = theta
            previous = branch
            rows.append([label, theta, ls.lambda_star, ls.theta_v, ls.tmix_coefficient(), branch])
        crossovers.setdefault(label, None)

    files = [write_csv(out / "table.csv",
                       ["v", "theta", "lambda_star", "theta_v", "tmix_coefficient", "branch"], rows)]
    theta_v = {
        ";".join(str(int(c)) for c in v): lattice_pattern_spectrum(table.d, table.q, v, thetas[0]).theta_v
        for v in table.vectors
    }
    files.append(write_json(out / "summary.json", _summary(
        "tmix-table", config, theta_v=theta_v, grid_crossover=crossovers,
    )))
    return files


def cmd_tv_profile(config: RunConfig) -> List[Path]:
    """小さな鎖の厳密な d_tv(t) の表"""
    g, p, x0 = _setup(config)
    out = Path(config.out)
    times = config.time_grid
    logger.info(f"tv-profile: 状態数 {p.q}^{g.n}")

    stationary = exact_stationary(g, p)
    profile = exact_tv_profile(g, p, x0, times, stationary=stationary)

    predicted: Optional[float] = None
    if g.connected:
        predicted = predicted_tmix(_curve_for(g, p, x0, config.solver), g.n, p.theta).time
    marked = False
    rows = []
    for t, d in zip(profile.times, profile.distances):
        marker = predicted is not None and not marked and t >= predicted
        marked = marked or marker
        rows.append([t, d, marker])
    files = [write_csv(out / "profile.csv", ["t", "d_tv", "predicted_tmix_marker"], rows)]

    try:
        measured = exact_mixing_time(profile, 0.25)
    except GridExhausted:
        measured = None

    extra = {}
    if config.replicates.cftp_check:
        reps = config.replicates.cftp_reps
        samples = cftp_sample_batch(g, p, reps, config.seed, config.threads)
        extra["cftp_tv"] = tv_distance(empirical_distribution(samples, p.q), stationary)
        extra["cftp_tolerance"] = 3.0 * math.sqrt(p.q ** g.n / (2.0 * reps))
        extra["cftp_reps"] = reps

    files.append(write_json(out / "summary.json", _summary(
        "tv-profile", config,
        n=g.n,
        predicted_tmix=predicted,
        tmix_quarter=measured,
        **extra,
    )))
    return files


def cmd_sample(config: RunConfig) -> List[Path]:
    """前向き・後ろ向き・CFTP・結合サンプルの書き出し"""
    g, p, x0 = _setup(config)
    out = Path(config.out)
    mode = config.sample.mode
    t = config.sample.t
    reps = config.replicates.reps
    comments = [f"mode={mode} seed={config.seed} t={t!r} theta={p.theta!r} q={p.q} n={g.n}"]
    logger.info(f"sample: mode={mode}, reps={reps}")

    if mode == "forward":
        if isinstance(x0, Initial):
            raise ConfigError("forward モードには決定的な初期配置が必要です")
        samples = run_forward_batch(g, p, x0, t, reps, config.seed, config.threads)
    elif mode == "backward":
        samples = backward_sample_batch(g, p, x0, t, reps, config.seed, config.threads)
    elif mode == "cftp":
        samples = cftp_sample_batch(g, p, reps, config.seed, config.threads)
    else:
        xs, ys, _ = coupled_sample_batch(g, p, x0, t, reps, config.seed, config.threads)
        rows = [
            [k, pack_colors(x, p.q), pack_colors(y, p.q), pack_colors((x == y).astype(int), 2)]
            for k, (x, y) in enumerate(zip(xs, ys))
        ]
        return [write_csv(out / "samples.csv", ["replicate", "x_t", "y", "agree"], rows, comments)]

    rows = [[k, pack_colors(row, p.q)] for k, row in enumerate(samples)]
    return [write_csv(out / "samples.csv", ["replicate", "config"], rows, comments)]
