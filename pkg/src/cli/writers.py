#!/usr/bin/env python3
"""
結果ファイルの書き出し

CSV は小数点 '.'、浮動小数点は有効数字17桁で固定し、
同じ設定とシードなら再実行でバイト単位に一致する。
"""

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from ..utils.logger import get_logger


logger = get_logger("cli.writers")


def format_value(value: Any) -> str:
    """CSV のセル表現"""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), '.17g')
    if value is None:
        return ""
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence[Any]],
              comments: Sequence[str] = ()) -> Path:
    """
    CSV を書き出す

    Args:
        path: 出力先
        header: ヘッダ行
        rows: データ行
        comments: 先頭に '# ' 付きで書く来歴行
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        for line in comments:
            f.write(f"# {line}\n")
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        count = 0
        for row in rows:
            writer.writerow([format_value(v) for v in row])
            count += 1
    logger.info(f"書き出し: {path} ({count} 行)")
    return path


def _to_jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _to_jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def write_json(path, data: dict) -> Path:
    """JSON を書き出す（キー順固定）"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(_to_jsonable(data), f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    logger.info(f"書き出し: {path}")
    return path


def pack_colors(colors: Sequence[int], q: int) -> str:
    """配置を文字列に詰める（q ≤ 10 なら数字の連結、それ以外は '-' 区切り）"""
    if q <= 10:
        return "".join(str(int(c)) for c in colors)
    return "-".join(str(int(c)) for c in colors)
