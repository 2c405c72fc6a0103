#!/usr/bin/env python3
"""
レプリケート実行ユーティリティ

乱数シードの派生規則とワーカープールでのバッチ実行、
モンテカルロ推定値（平均と標準誤差）の入れ物を提供する。

レプリケート k の乱数は SeedSequence(seed, spawn_key=(k,)) から作るため、
実行順序や並列度に関係なく結果はビット単位で一致する。
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np


# ワーカーが一度に処理するレプリケート数の目安
DEFAULT_CHUNK_SIZE = 2048


def seed_sequence(seed: int, *keys: int) -> np.random.SeedSequence:
    """マスターシードと派生キーから SeedSequence を作る"""
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))


def replicate_rng(seed: int, *keys: int) -> np.random.Generator:
    """レプリケート用の乱数生成器"""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *keys)))


@dataclass(frozen=True)
class Estimate:
    """モンテカルロ推定値"""
    value: float
    stderr: float
    reps: int

    @classmethod
    def from_samples(cls, samples: Sequence[float]) -> 'Estimate':
        """標本から平均と標準誤差を求める"""
        arr = np.asarray(samples, dtype=float)
        reps = arr.size
        if reps == 0:
            return cls(float('nan'), float('nan'), 0)
        mean = float(arr.mean())
        if reps < 2:
            return cls(mean, float('inf'), reps)
        return cls(mean, float(arr.std(ddof=1) / math.sqrt(reps)), reps)

    @classmethod
    def from_bernoulli(cls, successes: int, reps: int) -> 'Estimate':
        """成功回数から二項標準誤差つきの頻度推定を求める"""
        if reps <= 0:
            return cls(float('nan'), float('nan'), 0)
        p = successes / reps
        return cls(p, math.sqrt(p * (1.0 - p) / reps), reps)

    def within(self, target: float, sigmas: float = 4.0, floor: float = 0.0) -> bool:
        """target が sigmas 倍の標準誤差以内か"""
        return abs(self.value - target) <= sigmas * self.stderr + floor

    def __str__(self) -> str:
        return f"{self.value:.6g} ± {self.stderr:.3g} (n={self.reps})"


def chunk_bounds(reps: int, chunk_size: int = DEFAULT_CHUNK_SIZE) -> List[Tuple[int, int]]:
    """レプリケート番号 [0, reps) を連続チャンクに分割"""
    chunk_size = max(1, int(chunk_size))
    return [(start, min(start + chunk_size, reps)) for start in range(0, reps, chunk_size)]


def map_replicates(
    worker: Callable[[int, int, int], list],
    reps: int,
    seed: int,
    threads: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE
) -> list:
    """
    レプリケートをチャンク単位で実行し、番号順に結合して返す

    Args:
        worker: worker(start, stop, seed) がレプリケート start..stop-1 の結果リストを返す
                （並列時は pickle 可能なトップレベル関数か functools.partial）
        reps: レプリケート数
        seed: マスターシード
        threads: ワーカープロセス数（1なら同一プロセスで実行）
        chunk_size: チャンクの大きさ

    Returns:
        レプリケート番号順の結果リスト
    """
    bounds = chunk_bounds(reps, chunk_size)
    results: list = []

    if threads <= 1 or len(bounds) <= 1:
        for start, stop in bounds:
            results.extend(worker(start, stop, seed))
        return results

    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(worker, start, stop, seed) for start, stop in bounds]
        for future in futures:
            results.extend(future.result())
    return results
