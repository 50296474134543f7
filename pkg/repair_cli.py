#!/usr/bin/env python3
"""
靜態分析警告自動修復工具 命令列介面

子命令：
  ingest      解析工具輸出並轉成通用格式
  repair      修復（預設輸出 unified diff；--in-place 直接修改；--check 只列結果）
  recurrence  比較修復前後的警告集合
  freq        規則頻率排名
  sigloc      計算 SigLoC
  effort      稽核工作量估算
  header      輸出 acr.h
  dedupe      依 alert_key 去除重複警告

結束碼：0 成功，1 有檔案被拒絕修復，2 使用方式或 I/O 錯誤
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

from alert_model import format_generic, load_mapping
from config import Config
from errors import RepairToolError
from evaluation import (GROUPINGS, EffortParams, diff_alert_sets, estimate_effort, format_effort,
                        format_frequency, format_recurrence, format_sigloc, frequency_csv, frequency_report,
                        recurrence_csv, sigloc_report)
from repair_engine import emit_support_header, format_outcomes, format_summary, run_repair
from sa_ingest import FORMATS, dedupe_alerts, ingest_many

# 設定日誌
logging.basicConfig(level=Config.LOG_LEVEL)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DECLINED = 1
EXIT_USAGE = 2


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='key = value 設定檔')
    common.add_argument('--format', choices=FORMATS, help='警告輸入格式')
    common.add_argument('--mapping', help="checker 對照表（TSV，或 'builtin'）")
    common.add_argument('--root', help='原始碼根目錄')
    common.add_argument('--workers', type=int, help='平行處理的 worker 數')
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog='repair_cli',
        description='依靜態分析警告自動修復 C 程式碼（EXP34-C、EXP33-C、MSC12-C）',
    )
    sub = parser.add_subparsers(dest='command', required=True)

    ingest = sub.add_parser('ingest', parents=[common], help='解析並輸出通用格式')
    ingest.add_argument('inputs', nargs='*', default=['-'], help="輸入檔案（'-' 為標準輸入）")

    repair = sub.add_parser('repair', parents=[common], help='修復警告')
    repair.add_argument('inputs', nargs='+', help='警告檔案')
    repair.add_argument('--error-handler', dest='error_handler', help="自訂錯誤處理敘述，例如 'die(\"null\")'")
    repair.add_argument('--msc12', dest='msc12', action='store_const', const=True, default=None,
                        help='啟用 MSC12-C 修復')
    repair.add_argument('--no-msc12', dest='msc12', action='store_const', const=False,
                        help='停用 MSC12-C 修復（覆寫 REPAIR_MSC12）')
    repair.add_argument('--in-place', dest='output_mode', action='store_const', const='in-place', default=None,
                        help='直接修改檔案')
    repair.add_argument('--no-backup', dest='backup', action='store_const', const=False, default=None,
                        help='就地修改時不產生 .orig 備份')
    repair.add_argument('--alerts-current', dest='shift_after_include', action='store_const', const=False,
                        default=None, help='警告來自已插入 #include "acr.h" 的檔案，行號不需位移')
    repair.add_argument('--check', action='store_true', help='只列出每筆警告的結果，不寫入任何檔案')

    recurrence = sub.add_parser('recurrence', parents=[common], help='比較修復前後的警告')
    recurrence.add_argument('before')
    recurrence.add_argument('after')
    recurrence.add_argument('--csv', help='寫出 recurrence.csv（- 為標準輸出）')

    freq = sub.add_parser('freq', parents=[common], help='規則頻率排名')
    freq.add_argument('inputs', nargs='+')
    freq.add_argument('--codebase', default='', help='程式庫名稱（寫入報表）')
    freq.add_argument('--grouping', choices=GROUPINGS, default='tool')
    freq.add_argument('--csv', help='寫出 freq.csv（- 為標準輸出）')

    sigloc = sub.add_parser('sigloc', parents=[common], help='計算 SigLoC')
    sigloc.add_argument('path', nargs='?', help='目錄（預設為 --root）')
    sigloc.add_argument('--ext', action='append', help='副檔名（可重複，預設 .c 與 .h）')

    effort = sub.add_parser('effort', parents=[common], help='稽核工作量估算')
    effort.add_argument('--ksigloc', type=float, help='kSigLoC；未指定時由 --root 計算')
    effort.add_argument('--audit-seconds', type=float, default=117)
    effort.add_argument('--fix-fraction', type=float, default=0.32)
    effort.add_argument('--fix-seconds', type=float, default=117)
    effort.add_argument('--alerts-per-ksigloc', type=float, default=364.5)
    effort.add_argument('--person-year-seconds', type=float, default=31_536_000)

    sub.add_parser('header', help='輸出 acr.h')

    dedupe = sub.add_parser('dedupe', parents=[common], help='依 alert_key 去除重複')
    dedupe.add_argument('inputs', nargs='*', default=['-'])
    return parser


def load_config(args: argparse.Namespace) -> Config:
    """旗標 > 設定檔 > 環境變數 > 預設值"""
    overrides: Dict[str, Any] = {}
    if getattr(args, 'config', None):
        overrides.update(Config.from_file(args.config))
    flags = {
        'source_root': getattr(args, 'root', None),
        'mapping_path': getattr(args, 'mapping', None),
        'workers': getattr(args, 'workers', None),
        'error_handler': getattr(args, 'error_handler', None),
        'msc12_enabled': getattr(args, 'msc12', None),
        'output_mode': getattr(args, 'output_mode', None),
        'backup': getattr(args, 'backup', None),
        'shift_after_include': getattr(args, 'shift_after_include', None),
        'default_format': getattr(args, 'format', None),
    }
    overrides.update({k: v for k, v in flags.items() if v is not None})
    if getattr(args, 'check', False):
        overrides['check_only'] = True
    return Config(**overrides).validate()


def _ingest(config: Config, inputs: Sequence[str]):
    mapping = load_mapping(config.mapping_path)
    items = [(config.default_format, path) for path in inputs]
    config.alert_inputs = items
    return ingest_many(items, mapping, root=config.source_root, workers=config.workers)


def _write_csv(target: Optional[str], text: str) -> None:
    if not target:
        return
    if target == '-':
        sys.stdout.write(text)
        return
    with open(target, 'w', encoding='utf-8', newline='') as f:
        f.write(text)
    logger.info(f"已寫出 {target}")


def cmd_ingest(args: argparse.Namespace, config: Config) -> int:
    report = _ingest(config, args.inputs)
    for locus, reason in report.parse_notes:
        logger.warning(f"略過 {locus}: {reason}")
    sys.stdout.write(format_generic(report.alerts))
    return EXIT_OK


def cmd_repair(args: argparse.Namespace, config: Config) -> int:
    report = _ingest(config, args.inputs)
    result = run_repair(config.source_root, report.alerts, config)
    if config.check_only:
        sys.stdout.write(format_outcomes(result))
    elif config.output_mode == 'patch':
        sys.stdout.buffer.write(result.patch.encode('latin-1'))
        sys.stdout.flush()
    sys.stderr.write(format_summary(result))
    return EXIT_DECLINED if result.exit_code else EXIT_OK


def cmd_recurrence(args: argparse.Namespace, config: Config) -> int:
    before = _ingest(config, [args.before]).alerts
    after = _ingest(config, [args.after]).alerts
    report = diff_alert_sets(before, after)
    if args.csv != '-':
        sys.stdout.write(format_recurrence(report))
    _write_csv(args.csv, recurrence_csv(report))
    sys.stderr.write(f"resolved {len(report.resolved)}, persisting {len(report.persisting)}, "
                     f"new {len(report.new)}\n")
    return EXIT_OK


def cmd_freq(args: argparse.Namespace, config: Config) -> int:
    alerts = _ingest(config, args.inputs).alerts
    report = frequency_report(alerts, grouping=args.grouping, codebase=args.codebase)
    if args.csv != '-':
        sys.stdout.write(format_frequency(report))
    _write_csv(args.csv, frequency_csv(report))
    return EXIT_OK


def cmd_sigloc(args: argparse.Namespace, config: Config) -> int:
    extensions = tuple(args.ext) if args.ext else ('.c', '.h')
    report = sigloc_report(args.path or config.source_root, extensions)
    sys.stdout.write(format_sigloc(report))
    return EXIT_OK


def cmd_effort(args: argparse.Namespace, config: Config) -> int:
    params = EffortParams(
        audit_seconds_per_alert=args.audit_seconds,
        fix_fraction=args.fix_fraction,
        fix_seconds_per_alert=args.fix_seconds,
        alerts_per_ksigloc=args.alerts_per_ksigloc,
        person_year_seconds=args.person_year_seconds,
    )
    ksigloc = args.ksigloc
    if ksigloc is None:
        ksigloc = sigloc_report(config.source_root).ksigloc
    sys.stdout.write(format_effort(estimate_effort(params, ksigloc)))
    return EXIT_OK


def cmd_header(args: argparse.Namespace, config: Config) -> int:
    sys.stdout.write(emit_support_header())
    return EXIT_OK


def cmd_dedupe(args: argparse.Namespace, config: Config) -> int:
    alerts = _ingest(config, args.inputs).alerts
    kept = dedupe_alerts(alerts)
    sys.stdout.write(format_generic(kept))
    logger.info(f"去除 {len(alerts) - len(kept)} 筆重複警告")
    return EXIT_OK


COMMANDS = {
    'ingest': cmd_ingest,
    'repair': cmd_repair,
    'recurrence': cmd_recurrence,
    'freq': cmd_freq,
    'sigloc': cmd_sigloc,
    'effort': cmd_effort,
    'header': cmd_header,
    'dedupe': cmd_dedupe,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    try:
        config = load_config(args)
        return COMMANDS[args.command](args, config)
    except (RepairToolError, ValueError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"❌ I/O 錯誤: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())
