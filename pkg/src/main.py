#!/usr/bin/env python3
"""
ノイズ付き投票者モデル解析ツール - メインエントリーポイント

サブコマンド: autocorr, tmix-table, tv-profile, verify, sample
終了コード: 0 正常, 1 検証失敗・計算失敗, 2 引数・設定エラー, 3 資源上限超過
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

# プロジェクトルートをパスに追加
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from src import __version__
from src.cli.commands import cmd_autocorr, cmd_sample, cmd_tmix_table, cmd_tv_profile
from src.cli.verify import SUITES, run_verify
from src.exceptions import NoisyVoterError, ResourceCapError
from src.utils.config_loader import ConfigLoader
from src.utils.logger import setup_logger


CONFIG_DIR = PROJECT_ROOT / "config"

COMMANDS = {
    "autocorr": cmd_autocorr,
    "tmix-table": cmd_tmix_table,
    "tv-profile": cmd_tv_profile,
    "sample": cmd_sample,
}

RESOURCE_GUIDANCE = (
    "計算資源の上限を超えました。グラフを小さくする、q を下げる、"
    "時刻格子やレプリケート数を減らすなどして再実行してください。"
)


def build_parser() -> argparse.ArgumentParser:
    """引数パーサを作る"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None,
                        help='実行設定ファイル（YAML または JSON）')
    common.add_argument('--seed', type=int, default=None, help='マスターシード（符号なし64ビット）')
    common.add_argument('--out', type=str, default=None, help='出力ディレクトリ')
    common.add_argument('--threads', type=int, default=None, help='ワーカープロセス数')
    common.add_argument('--log-file', type=str, default=None, help='ログファイルのパス')
    common.add_argument('--verbose', action='store_true', help='DEBUG レベルのログを出す')

    parser = argparse.ArgumentParser(
        prog='noisy-voter',
        description='q 状態ノイズ付き投票者モデルの混合時間解析',
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)

    sub.add_parser('autocorr', parents=[common], help='自己相関曲線と混合時間の予測')
    sub.add_parser('tmix-table', parents=[common], help='格子パターンの混合時間係数の表')
    sub.add_parser('tv-profile', parents=[common], help='小さな鎖の厳密な全変動距離')
    sub.add_parser('sample', parents=[common], help='前向き・後ろ向き・CFTP・結合サンプル')

    verify = sub.add_parser('verify', parents=[common], help='検証スイートを実行')
    verify.add_argument('suites', nargs='*', default=['all'],
                        help=f"スイート名（{', '.join(SUITES)} または all）")
    verify.add_argument('--full', action='store_true', help='大きいレプリケート数で実行')
    verify.add_argument('--inject-fault', action='store_true',
                        help='検査に摂動を入れて失敗することを確かめる')
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    return {'seed': args.seed, 'out': args.out, 'threads': args.threads}


def _run_verify(args: argparse.Namespace, loader: ConfigLoader) -> int:
    results = run_verify(
        args.suites or ['all'],
        loader.thresholds,
        full=args.full,
        inject_fault=args.inject_fault,
        seed=args.seed if args.seed is not None else 0,
        threads=args.threads if args.threads is not None else 1,
    )
    for result in results:
        print(result)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} 件成功")
    return 1 if failed else 0


def main(argv: Optional[List[str]] = None) -> int:
    """メイン関数"""
    args = build_parser().parse_args(argv)
    logger = setup_logger(
        level=logging.DEBUG if args.verbose else logging.INFO,
        log_file=args.log_file,
    )

    try:
        loader = ConfigLoader(CONFIG_DIR)
        if args.command == 'verify':
            return _run_verify(args, loader)

        config = loader.load_run_config(args.config, _overrides(args))
        logger.info(f"{args.command} を開始します（seed={config.seed}, threads={config.threads}）")
        files = COMMANDS[args.command](config)
        for path in files:
            logger.info(f"書き出しました: {path}")
        return 0
    except ResourceCapError as e:
        logger.error(f"{type(e).__name__}: {e}")
        logger.error(RESOURCE_GUIDANCE)
        return e.exit_code
    except NoisyVoterError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"入出力エラー: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
