#!/usr/bin/env python3
"""
検証スイート

モジュールごとの不変量・性質を内蔵の小さなグラフで確かめる。
モンテカルロの検査は標準誤差の sigmas 倍（既定4）の幅で判定する。
"""

import itertools
import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, NamedTuple, Sequence

import numpy as np

from .. import dual, mixing, spectral
from ..dynamics import ModelParams, apply_events, one_step_expectation, run_forward_batch, sample_events
from ..exceptions import ConfigError
from ..graph import (
    GrowthParams,
    ball,
    bipartition,
    complete_graph,
    conductance,
    cycle,
    growth_check,
    low_conductance_ball,
    outer_boundary,
    random_connected_graph,
    star,
    torus,
)
from ..patterns import (
    ColorConfig,
    alternating,
    knight,
    lattice_pattern,
    monochromatic,
    permute_colors,
    rainbow,
    uniform_random,
)
from ..utils.batch import Estimate, replicate_rng
from ..utils.config_loader import VerifyThresholds
from ..utils.logger import get_logger


logger = get_logger("cli.verify")

# --inject-fault で固有値に加える摂動
FAULT_SIZE = 1e-3


class CheckResult(NamedTuple):
    """1つの検査の結果"""
    suite: str
    name: str
    passed: bool
    detail: str

    def __str__(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.suite}.{self.name}: {self.detail}"


@dataclass(frozen=True)
class VerifyContext:
    """スイートに渡す閾値とレプリケート数"""
    thresholds: VerifyThresholds
    mc_reps: int
    cftp_reps: int
    pair_reps: int
    seed: int = 0
    threads: int = 1
    inject_fault: bool = False

    @property
    def sigmas(self) -> float:
        return self.thresholds.sigmas


class _Recorder:
    def __init__(self, suite: str):
        self.suite = suite
        self.results: List[CheckResult] = []

    def check(self, name: str, passed: bool, detail: str) -> None:
        self.results.append(CheckResult(self.suite, name, bool(passed), detail))


def _k2_exact_probs(p: ModelParams, x0: ColorConfig, t: float) -> np.ndarray:
    return mixing.exact_distribution(complete_graph(2), p, x0, t).probs


def _outcome_agreement(samples: np.ndarray, probs: np.ndarray, q: int, sigmas: float) -> float:
    """各結果の頻度と確率の差の最大値（標準誤差単位）"""
    emp = mixing.empirical_distribution(samples, q).probs
    reps = samples.shape[0]
    se = np.sqrt(np.maximum(probs * (1.0 - probs), 1e-300) / reps)
    return float(np.max(np.abs(emp - probs) / se))


def _window_codes(colors: np.ndarray, q: int, window: Sequence[int]) -> np.ndarray:
    return sum(colors[:, v] * q ** i for i, v in enumerate(window))


def _exact_window_law(dist: "mixing.ExactDistribution", window: Sequence[int]) -> np.ndarray:
    """厳密分布を頂点 window の色の組に縮約"""
    codes = np.arange(dist.size)
    digits = (codes[:, None] // dist.q ** np.arange(dist.n)) % dist.q
    key = _window_codes(digits, dist.q, window)
    return np.bincount(key, weights=dist.probs, minlength=dist.q ** len(window))


def _window_agreement(samples: np.ndarray, probs: np.ndarray, q: int, window: Sequence[int]) -> float:
    """窓の色の組の頻度と確率の差の最大値（標準誤差単位）"""
    key = _window_codes(samples, q, window)
    emp = np.bincount(key, minlength=probs.size) / samples.shape[0]
    se = np.sqrt(np.maximum(probs * (1.0 - probs), 1e-300) / samples.shape[0])
    return float(np.max(np.abs(emp - probs) / se))


# ---------------------------------------------------------------------------
# 個別の検査
# ---------------------------------------------------------------------------

def check_low_conductance_torus(ctx: VerifyContext, rec: "_Recorder") -> None:
    g = torus(30, 2)
    ok = True
    radii = []
    for r_n, alpha in ((3, 0.5), (5, 1.5)):
        r = low_conductance_ball(g, 0, r_n, alpha)
        ratio = len(outer_boundary(g, 0, r)) / len(ball(g, 0, r))
        ok &= r_n <= r <= 2 * r_n and ratio <= 8.0 / r ** alpha
        radii.append(r)
    rec.check("low_conductance_torus", ok, f"r = {radii} on torus(30,2)")


def check_bipartition_parts(ctx: VerifyContext, rec: "_Recorder") -> None:
    g = torus(6, 2)
    v1, v2 = bipartition(g)
    if ctx.inject_fault:
        v1, v2 = v1 - {0}, v2 | {0}
    inside = sum(1 for u, w in g.edges() if (u in v1) == (w in v1))
    covers = not v1 & v2 and len(v1 | v2) == g.n
    rec.check("bipartition_parts", inside == 0 and covers, f"{inside} edges inside parts of torus(6,2)")


def check_lattice_identities(ctx: VerifyContext, rec: "_Recorder") -> None:
    target = monochromatic(36, 3, 1 if ctx.inject_fault else 0)
    rec.check("lattice_zero_monochromatic", lattice_pattern(6, 2, 3, (0, 0)) == target,
              "x_0 = monochromatic on torus(6,2)")
    ok = True
    for side, d in ((6, 2), (4, 3)):
        x = lattice_pattern(side, d, 2, [1] * d)
        alt = alternating(torus(side, d))
        ok &= x == alt or x == permute_colors(alt, [1, 0])
    rec.check("binary_rainbow_alternating", ok, "x_(1,..,1) at q=2 is alternating up to swap")


def check_permutation_equivariance(ctx: VerifyContext, rec: "_Recorder") -> None:
    g = random_connected_graph(12, 0.3, 4)
    p = ModelParams(0.4, 3)
    perm = [1, 2, 0]
    noise_perm = [2, 0, 1] if ctx.inject_fault else perm
    mismatches = 0
    for s in range(10):
        x0 = uniform_random(12, 3, s)
        events = sample_events(g, p, 2.5, replicate_rng(ctx.seed, s))
        moved = apply_events(g, permute_colors(x0, perm), events.with_colors(noise_perm))
        mismatches += moved != permute_colors(apply_events(g, x0, events), perm)
    rec.check("permutation_equivariance", mismatches == 0, f"{mismatches}/10 histories differ")


def check_forward_backward_window(ctx: VerifyContext, rec: "_Recorder") -> None:
    g = cycle(6)
    p = ModelParams(0.3, 3)
    x0 = ColorConfig(3, [0, 1, 0, 1, 1, 0])
    t = 0.5
    window = (0, 1, 2)
    probs = _exact_window_law(mixing.exact_distribution(g, p, x0, t), window)
    fwd = run_forward_batch(g, p, x0, t, ctx.mc_reps, ctx.seed + 5, ctx.threads)
    back = dual.backward_sample_batch(g, p, x0, t, ctx.mc_reps, ctx.seed + 6, ctx.threads)
    z = max(_window_agreement(fwd, probs, 3, window), _window_agreement(back, probs, 3, window))
    rec.check("window_forward_backward", z <= ctx.sigmas, f"max z = {z:.2f} on C_6")


def check_cluster_exchangeability(ctx: VerifyContext, rec: "_Recorder") -> None:
    k3 = complete_graph(3)
    p = ModelParams(0.3, 3)
    exact = mixing.exact_stationary(k3, p)
    digits = (np.arange(exact.size)[:, None] // 3 ** np.arange(3)) % 3
    spread = 0.0
    for perm in itertools.permutations(range(3)):
        permuted = (np.asarray(perm)[digits] * 3 ** np.arange(3)).sum(axis=1)
        spread = max(spread, float(np.abs(exact.probs[permuted] - exact.probs).max()))
    reference = mixing.exact_stationary(k3, ModelParams(0.6, 3)) if ctx.inject_fault else exact
    ys = dual.cftp_sample_batch(k3, p, ctx.cftp_reps, ctx.seed + 11, ctx.threads)
    z = _outcome_agreement(ys, reference.probs, 3, ctx.sigmas)
    rec.check("cluster_exchangeability_K3", spread <= 1e-10 and z <= ctx.sigmas,
              f"max z = {z:.2f}, permutation spread {spread:.1e}")


def check_p_after_monotone(ctx: VerifyContext, rec: "_Recorder") -> None:
    g = cycle(8)
    p = ModelParams(0.4, 2)
    grid = [0.0, 0.5, 1.0, 2.0, 4.0]
    exact = [dual.exact_coalescence_probs(g, p, 0, 1, t)[1] for t in grid]
    curve = [e.value for e in dual.coalescence_curve(g, p, 0, 1, grid, ctx.pair_reps // 4, ctx.seed)]
    ok = all(b <= a + 1e-12 for a, b in zip(exact, exact[1:]))
    ok &= all(b <= a for a, b in zip(curve, curve[1:]))
    rec.check("p_after_monotone", ok, f"exact {exact[0]:.4f} → {exact[-1]:.4f}")


def check_alternating_minimal(ctx: VerifyContext, rec: "_Recorder") -> None:
    p = ModelParams(0.4, 2)
    ts = np.linspace(0.0, 4.0, 17)
    minimal = True
    bounded = True
    for g in (cycle(10), torus(6, 2)):
        spec = spectral.eigendecompose(g)
        alt = spectral.autocorr_curve(spec, alternating(g), p)
        bottom = spectral.eval_autocorr(alt, ts)
        t_alt = spectral.t_x0(alt, g.n)
        for s in range(8):
            curve = spectral.autocorr_curve(spec, uniform_random(g.n, 2, s), p)
            a2 = spectral.eval_autocorr(curve, ts)
            minimal &= bool(np.all(a2 >= bottom - 1e-12))
            minimal &= spectral.t_x0(curve, g.n) >= t_alt - 1e-9
            bounded &= bool(np.all(a2 >= 0.0) and np.all(a2 <= a2[0] + 1e-12)
                            and np.all(np.diff(a2) <= 1e-12))
    rec.check("alternating_minimal", minimal, "A2 and T_x0 minimized by alternating (bipartite, q=2)")
    rec.check("autocorr_bounds", bounded, "0 ≤ A2_t ≤ A2_0, nonincreasing")


def check_R_auto_stationary(ctx: VerifyContext, rec: "_Recorder") -> None:
    p = ModelParams(0.5, 3)
    g6 = cycle(6)
    mu = mixing.exact_stationary(g6, p)
    codes = np.arange(mu.size)
    states = (codes[:, None] // 3 ** np.arange(6)) % 3
    worst = 0.0
    for t in (0.5, 1.0):
        marg = spectral.marginals(spectral.eigendecompose(g6), rainbow(6, 1, 3), p, t)
        worst = max(worst, abs(float(mu.probs @ mixing.statistic_R_auto(marg, states, g6))))
    rec.check("R_auto_stationary_exact", worst <= 1e-10, f"max |E_μ R| = {worst:.1e}")

    g12 = cycle(12)
    marg = spectral.marginals(spectral.eigendecompose(g12), rainbow(12, 1, 3), p, 0.5)
    ys = dual.cftp_sample_batch(g12, p, ctx.cftp_reps // 2, ctx.seed + 13, ctx.threads)
    est = Estimate.from_samples(mixing.statistic_R_auto(marg, ys, g12))
    rec.check("R_auto_stationary_cftp", est.within(0.0, ctx.sigmas), f"{est} vs 0")


def check_coalescence_gap(ctx: VerifyContext, rec: "_Recorder") -> None:
    """共分散の差 ≥ p_after（辺・k ごと）と、辺について足し合わせた平均差の下界"""
    g = cycle(10)
    reps = max(ctx.cftp_reps // 5, 2)
    spec = spectral.eigendecompose(g)
    edge_slack = math.inf
    total_slack = math.inf
    for q in (2, 3):
        x0 = uniform_random(10, q, 3)
        for theta in (0.3, 0.7):
            p = ModelParams(theta, q)
            ys = dual.cftp_sample_batch(g, p, reps, ctx.seed + 21, ctx.threads)
            for t in (0.5, 1.0):
                xs = dual.backward_sample_batch(g, p, x0, t, reps, ctx.seed + 22, ctx.threads)
                after = {e: dual.exact_coalescence_probs(g, p, *e, t)[1] for e in g.edges()}
                if ctx.inject_fault:
                    after = {e: value + 0.5 for e, value in after.items()}
                for (u, v), value in after.items():
                    for k in range(1, q):
                        gap = mixing.covariance_gap(g, xs, ys, u, v, k, q)
                        edge_slack = min(edge_slack, gap.value - value + ctx.sigmas * gap.stderr)
                marg = spectral.marginals(spec, x0, p, t)
                total = mixing.mean_gap(mixing.statistic_R_edge(g, marg, ys),
                                        mixing.statistic_R_edge(g, marg, xs))
                bound = 0.5 * sum(after.values())
                total_slack = min(total_slack, total.value - bound + ctx.sigmas * total.stderr)
    rec.check("covariance_gap_edges", edge_slack >= 0, f"min slack {edge_slack:.4f} on C_10")
    rec.check("mean_gap_aggregate", total_slack >= 0, f"min slack {total_slack:.4f} on C_10")


# ---------------------------------------------------------------------------
# スイート
# ---------------------------------------------------------------------------

def suite_graph(ctx: VerifyContext) -> List[CheckResult]:
    rec = _Recorder("graph")
    c10 = cycle(10)
    rec.check("ball_cycle", ball(c10, 0, 2) == frozenset({8, 9, 0, 1, 2}), "B_0(2) on C_10")
    rec.check("ball_torus", len(ball(torus(5, 2), 7, 1)) == 5, "|B_v(1)| on torus(5,2)")

    report = growth_check(cycle(100), GrowthParams(3.0, 0.5), range(1, 11), exhaustive=True)
    rec.check("growth_cycle", len(report) == 0, f"{len(report)} violations")
    k20 = complete_graph(20)
    report = growth_check(k20, GrowthParams(1.0, 0.5), [1], exhaustive=True)
    rec.check("growth_complete", len(report) == 20, f"{len(report)} violations (expect 20)")

    phi = conductance(cycle(20), range(5))
    rec.check("conductance_arc", abs(phi - 0.2) < 1e-12, f"Φ = {phi}")
    rec.check("bipartition", bipartition(cycle(6)) is not None and bipartition(cycle(5)) is None,
              "C_6 bipartite, C_5 not")
    check_bipartition_parts(ctx, rec)
    check_low_conductance_torus(ctx, rec)
    return rec.results


def suite_patterns(ctx: VerifyContext) -> List[CheckResult]:
    rec = _Recorder("patterns")
    g = torus(10, 2)
    for name, x, v in (("rainbow", rainbow(10, 2, 5), (1, 1)), ("knight", knight(10, 5), (1, 2))):
        worst = 0.0
        for k in range(1, 5):
            z = x.embedding(k)
            lam = np.mean(np.cos(2 * np.pi * k * np.asarray(v) / 5))
            worst = max(worst, float(np.max(np.abs(g.walk_apply(z) - lam * z))))
        rec.check(f"{name}_eigenfunction", worst <= 1e-12, f"max |Pz - λz| = {worst:.3e}")

    alt = alternating(cycle(8))
    proper = all(alt.colors[u] != alt.colors[w] for u, w in cycle(8).edges())
    rec.check("alternating_proper", proper, "adjacent colors differ on C_8")
    check_lattice_identities(ctx, rec)
    return rec.results


def suite_dynamics(ctx: VerifyContext) -> List[CheckResult]:
    rec = _Recorder("dynamics")
    p = ModelParams(0.5, 2)
    x0 = ColorConfig(2, [0, 1])
    t = 1.0
    samples = run_forward_batch(complete_graph(2), p, x0, t, ctx.mc_reps, ctx.seed, ctx.threads)
    z = _outcome_agreement(samples, _k2_exact_probs(p, x0, t), 2, ctx.sigmas)
    rec.check("forward_vs_exact_K2", z <= ctx.sigmas, f"max z = {z:.2f}")

    g = cycle(6)
    p1 = ModelParams(1.0, 3)
    x = uniform_random(6, 3, 5)
    samples = run_forward_batch(g, p1, x, 0.7, ctx.mc_reps, ctx.seed + 1, ctx.threads)
    keep = math.exp(-0.7)
    target = (1.0 - keep) / 3 + keep
    est = Estimate.from_bernoulli(int(np.count_nonzero(samples[:, 0] == x.colors[0])), ctx.mc_reps)
    rec.check("noise_only_marginal", est.within(target, ctx.sigmas), f"{est} vs {target:.6f}")

    # 定数関数の1ステップ期待値は (1 - θ/n) 倍
    pq = ModelParams(0.3, 3)
    mono = monochromatic(6, 3, 1)
    value = one_step_expectation(g, pq, mono, 1, np.full(6, 1.0 / 6))
    expected = (1.0 - 0.3 / 6) * np.exp(2j * np.pi / 3)
    rec.check("one_step_constant", abs(value - expected) < 1e-12, f"|Δ| = {abs(value - expected):.2e}")
    check_permutation_equivariance(ctx, rec)
    return rec.results


def suite_dual(ctx: VerifyContext) -> List[CheckResult]:
    rec = _Recorder("dual")
    k2 = complete_graph(2)
    p = ModelParams(0.5, 2)
    x0 = ColorConfig(2, [0, 1])
    samples = dual.backward_sample_batch(k2, p, x0, 1.0, ctx.mc_reps, ctx.seed, ctx.threads)
    z = _outcome_agreement(samples, _k2_exact_probs(p, x0, 1.0), 2, ctx.sigmas)
    rec.check("backward_vs_exact_K2", z <= ctx.sigmas, f"max z = {z:.2f}")

    ys = dual.cftp_sample_batch(k2, p, ctx.cftp_reps, ctx.seed, ctx.threads)
    agree = Estimate.from_bernoulli(int(np.count_nonzero(ys[:, 0] == ys[:, 1])), ctx.cftp_reps)
    rec.check("cftp_K2_agreement", agree.within(0.75, ctx.sigmas), f"{agree} vs 0.75")

    g = cycle(7)
    same = all(
        dual.cftp_sample(g, p, s) == dual.cftp_sample(g, p, s, initial_horizon=64.0)
        for s in range(20)
    )
    rec.check("cftp_monotone", same, "initial epoch 1 vs 64, 20 seeds")

    p3 = ModelParams(0.3, 2)
    est = dual.coalescence_probs(k2, p3, 0, 1, 1.0, ctx.pair_reps, ctx.seed)
    rec.check("p_meet_K2", est.p_meet.within(0.7, ctx.sigmas), f"{est.p_meet} vs 0.7")
    target = 0.7 * math.exp(-2.0)
    rec.check("p_after_K2", est.p_after.within(target, ctx.sigmas), f"{est.p_after} vs {target:.6f}")

    c16 = cycle(16)
    grid = [0.25 * i for i in range(41)]
    exact = dual.exact_t_corr(c16, p, grid)
    estimate = dual.estimate_t_corr(c16, p, grid, ctx.pair_reps // 4, ctx.seed)
    rec.check("t_corr_cycle16", abs(estimate.time - exact.time) <= 0.25 + 1e-12,
              f"estimate {estimate.time} vs exact {exact.time}")

    c8 = cycle(8)
    worst = math.inf
    for t in (2.0, 4.0, 6.0):
        dead = dual.all_dead_prob(c8, p, t, ctx.pair_reps // 10, ctx.seed)
        bound = 1.0 - 8 * math.exp(-0.5 * t)
        worst = min(worst, (dead.value + ctx.sigmas * dead.stderr) - bound)
    rec.check("all_dead_bound", worst >= 0, f"min slack {worst:.4f}")
    check_forward_backward_window(ctx, rec)
    check_cluster_exchangeability(ctx, rec)
    check_p_after_monotone(ctx, rec)
    return rec.results


def suite_spectral(ctx: VerifyContext) -> List[CheckResult]:
    rec = _Recorder("spectral")
    tol = ctx.thresholds.eigen_tol

    graphs = [cycle(4), star(3), cycle(9), torus(4, 2)]
    graphs += [random_connected_graph(12, 0.3, s) for s in range(3)]
    worst_res = 0.0
    worst_orth = 0.0
    for idx, g in enumerate(graphs):
        spec = spectral.eigendecompose(g)
        if ctx.inject_fault and idx == 0:
            lambdas = spec.lambdas.copy()
            lambdas[1] += FAULT_SIZE
            spec = spectral.Spectrum(lambdas, spec.psis, spec.pi)
        resid = np.abs(g.walk_matrix() @ spec.psis - spec.psis * spec.lambdas[None, :])
        worst_res = max(worst_res, float(resid.max()))
        worst_orth = max(worst_orth, float(np.abs(spec.gram() - np.eye(g.n)).max()))
    rec.check("eigen_residual", worst_res <= tol, f"max ‖Pψ - λψ‖∞ = {worst_res:.3e}")
    rec.check("eigen_orthonormal", worst_orth <= tol, f"max |G - I| = {worst_orth:.3e}")

    lam = spectral.eigendecompose(cycle(4)).lambdas
    rec.check("cycle4_spectrum", np.allclose(lam, [1, 0, 0, -1], atol=1e-10), f"{lam.round(12)}")

    p = ModelParams(0.5, 3)
    g = cycle(12)
    spec = spectral.eigendecompose(g)
    ts = np.linspace(0.0, 5.0, 26)
    mono = spectral.autocorr_curve(spec, monochromatic(12, 3), p)
    identity = 0.0
    sub_ok = True
    extremal_ok = True
    lower_ok = True
    c_q = spectral.rainbow_lower_bound_constant(3)
    for s in range(5):
        curve = spectral.autocorr_curve(spec, uniform_random(12, 3, s), p)
        a2 = spectral.eval_autocorr(curve, ts, spectral.Flavor.A2)
        a1 = spectral.eval_autocorr(curve, 2 * ts, spectral.Flavor.A1)
        identity = max(identity, float(np.max(np.abs(a2 - a1))))
        ratio = a2[1:] / a2[:-1]
        step = ts[1] - ts[0]
        sub_ok &= bool(np.all(ratio <= math.exp(-2 * p.theta * step) + 1e-12))
        sub_ok &= bool(np.all(ratio >= math.exp(-(4 - 2 * p.theta) * step) - 1e-12))
        extremal_ok &= bool(np.all(a2 <= spectral.eval_autocorr(mono, ts) + 1e-12))
        short = ts[ts <= 2 * math.log(12)]
        bound = np.array([spectral.rainbow_lower_bound(3, p.theta, t) for t in short])
        lower_ok &= bool(np.all(spectral.eval_autocorr(curve, short) >= bound))
    rec.check("A2_A1_identity", identity <= ctx.thresholds.identity_tol, f"max |Δ| = {identity:.2e}")
    rec.check("submultiplicativity", sub_ok, "e^{-(4-2θ)s} ≤ A_{t+s}/A_t ≤ e^{-2θs}")
    rec.check("monochromatic_extremal", extremal_ok, "A2(x0) ≤ A2(mono)")
    rec.check("rainbow_lower_bound", lower_ok, f"c(3) = {c_q:.3e}")

    t_mono = spectral.t_x0(spectral.autocorr_curve(spectral.eigendecompose(cycle(100), solver="lapack"),
                                                   monochromatic(100, 2), ModelParams(0.5, 2)), 100)
    rec.check("t_x0_monochromatic", abs(t_mono - math.log(50)) <= 1e-6, f"{t_mono:.9f} vs log 50")

    knight_spec = spectral.lattice_pattern_spectrum(2, 5, (1, 2), 0.5)
    rainbow_spec = spectral.lattice_pattern_spectrum(2, 5, (1, 1), 0.5)
    binary = spectral.lattice_pattern_spectrum(1, 2, (1,), 0.5)
    ok = (abs(knight_spec.theta_v - 5 / 9) < 1e-12
          and abs(rainbow_spec.theta_v - (10 - math.sqrt(5)) / 19) < 1e-12
          and abs(binary.theta_v - 2 / 3) < 1e-12)
    rec.check("lattice_phase_transition", ok,
              f"θ_v = {knight_spec.theta_v:.6f}, {rainbow_spec.theta_v:.6f}, {binary.theta_v:.6f}")

    g8 = cycle(8)
    spec8 = spectral.eigendecompose(g8)
    worst = 0.0
    for s in range(4):
        x = uniform_random(8, 3, 100 + s)
        for l in range(8):
            for k in (1, 2):
                worst = max(worst, spectral.eigenfunction_residual(g8, p, spec8, l, k, x))
    rec.check("eigenfunction_residual", worst <= ctx.thresholds.residual_tol, f"max = {worst:.2e}")

    h = dual.exact_neighbor_coalescence(g8, p)
    sandwich = True
    for l in range(8):
        report = spectral.stationary_variance(g8, p, spec8, l, 1, h)
        sandwich &= report.lower - 1e-12 <= report.value <= report.upper + 1e-12
    rec.check("variance_sandwich", sandwich, "θ/γ Σπ²ψ² ≤ Var ≤ 1/γ Σπ²ψ²")

    pm, se = dual.coalescence_matrix(g8, p, ctx.pair_reps // 10, ctx.seed)
    mag = spectral.magnetization_bound(g8, p, pm, se)
    rec.check("magnetization_bound", mag.holds, f"{mag.lhs:.5f} ≤ {mag.rhs:.5f}")
    check_alternating_minimal(ctx, rec)
    return rec.results


def suite_mixing(ctx: VerifyContext) -> List[CheckResult]:
    rec = _Recorder("mixing")
    cases = [(cycle(6), ModelParams(0.5, 2), monochromatic(6, 2)),
             (complete_graph(3), ModelParams(0.3, 3), ColorConfig(3, [0, 1, 2])),
             (star(3), ModelParams(0.7, 3), ColorConfig(3, [2, 0, 1, 1]))]
    worst = 0.0
    for g, p, x0 in cases:
        spec = spectral.eigendecompose(g)
        for t in (0.3, 1.0, 2.5):
            exact = mixing.exact_distribution(g, p, x0, t).marginals()
            worst = max(worst, float(np.abs(exact - spectral.marginals(spec, x0, p, t)).max()))
    rec.check("marginals_oracle", worst <= ctx.thresholds.marginal_tol, f"max |Δ| = {worst:.2e}")

    g6 = cycle(6)
    p = ModelParams(0.5, 2)
    stationary = mixing.exact_stationary(g6, p)
    profile = mixing.exact_tv_profile(g6, p, monochromatic(6, 2), [0.5 * i for i in range(13)],
                                      stationary=stationary)
    d = np.array(profile.distances)
    rec.check("tv_monotone", bool(np.all(np.diff(d) <= 1e-12)), f"d_tv(6) = {d[-1]:.4e}")

    k2 = mixing.exact_stationary(complete_graph(2), p)
    rec.check("stationary_K2", abs(k2.probs[0] + k2.probs[3] - 0.75) < 1e-9,
              f"P(agree) = {k2.probs[0] + k2.probs[3]:.12f}")

    reps = ctx.cftp_reps
    ys = dual.cftp_sample_batch(g6, p, reps, ctx.seed + 7, ctx.threads)
    tv = mixing.tv_distance(mixing.empirical_distribution(ys, 2), stationary)
    tol = 3.0 * math.sqrt(2 ** 6 / (2.0 * reps))
    rec.check("cftp_vs_stationary", tv <= tol, f"TV {tv:.4f} ≤ {tol:.4f}")

    g12 = cycle(12)
    p3 = ModelParams(0.5, 3)
    est = mixing.empirical_autocorr(g12, p3, rainbow(12, 1, 3), 1.0, ctx.mc_reps // 2, ctx.seed)
    target = (2.0 / 3.0) * math.exp(-2.5)
    rec.check("empirical_autocorr_rainbow", est.within(target, ctx.sigmas), f"{est} vs {target:.6f}")

    x0 = ColorConfig(2, [0, 1, 1, 0, 1, 0])
    spec6 = spectral.eigendecompose(g6)
    marg = spectral.marginals(spec6, x0, p, 0.8)
    xs = dual.backward_sample_batch(g6, p, x0, 0.8, ctx.mc_reps, ctx.seed + 3, ctx.threads)
    stat = Estimate.from_samples(mixing.statistic_R_auto(marg, xs, g6))
    a2 = spectral.eval_autocorr(spectral.autocorr_curve(spec6, x0, p), 0.8)
    rec.check("statistic_R_auto_mean", stat.within(a2, ctx.sigmas), f"{stat} vs {a2:.6f}")
    check_R_auto_stationary(ctx, rec)
    check_coalescence_gap(ctx, rec)
    return rec.results


SUITES: Dict[str, Callable[[VerifyContext], List[CheckResult]]] = {
    "graph": suite_graph,
    "patterns": suite_patterns,
    "dynamics": suite_dynamics,
    "dual": suite_dual,
    "spectral": suite_spectral,
    "mixing": suite_mixing,
}


def run_verify(
    suites: Sequence[str],
    thresholds: VerifyThresholds,
    full: bool = False,
    inject_fault: bool = False,
    seed: int = 0,
    threads: int = 1
) -> List[CheckResult]:
    """
    検証スイートを実行

    Args:
        suites: スイート名のリスト（"all" で全スイート）
        thresholds: 許容値とレプリケート数
        full: 大きいレプリケート数で実行するか
        inject_fault: 各スイートの一部の検査に摂動を入れて失敗を確かめる自己検査
    """
    names = list(SUITES) if "all" in suites else list(suites)
    unknown = [name for name in names if name not in SUITES]
    if unknown:
        raise ConfigError(f"未知のスイートです: {', '.join(unknown)}")

    mc, cftp, pair = thresholds.scaled(full)
    ctx = VerifyContext(thresholds, mc, cftp, pair, seed, threads, inject_fault)
    started = time.monotonic()
    results: List[CheckResult] = []
    for name in names:
        suite_start = time.monotonic()
        results.extend(SUITES[name](ctx))
        logger.info(f"スイート {name}: {time.monotonic() - suite_start:.1f} 秒")
    elapsed = time.monotonic() - started
    if elapsed > thresholds.time_budget:
        logger.warning(f"検証に {elapsed:.0f} 秒かかりました（目安 {thresholds.time_budget:.0f} 秒）")
    return results
