"""
靜態分析工具輸出解析
支援 Cppcheck XML、clang-tidy 文字輸出與通用管線分隔格式
"""

import logging
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from lxml import etree
from pydantic import BaseModel, Field, ValidationError

from alert_model import TOOLS, Alert, CheckerMapping, alert_key, map_alerts
from config import Config
from errors import IngestError

# 設定日誌
logging.basicConfig(level=Config.LOG_LEVEL)
logger = logging.getLogger(__name__)

FORMATS = ('cppcheck-xml', 'clang-tidy', 'generic')

# FILE:LINE:COL: warning|error: MESSAGE [CHECK-NAME]
_CLANG_TIDY_LINE = re.compile(
    r'^(?P<file>.+?):(?P<line>\d+):(?P<col>\d+):\s+(?P<level>warning|error):\s+(?P<msg>.*?)'
    r'(?:\s+\[(?P<check>[^\[\]]+)\])?\s*$'
)


class IngestReport(BaseModel):
    """一次解析的結果"""

    alerts: List[Alert] = Field(default_factory=list)
    skipped_lines: int = 0
    parse_notes: List[Tuple[str, str]] = Field(default_factory=list)

    def extend(self, other: 'IngestReport') -> None:
        self.alerts.extend(other.alerts)
        self.skipped_lines += other.skipped_lines
        self.parse_notes.extend(other.parse_notes)


def _relativize(path: str, root: Optional[str]) -> str:
    """工具輸出的絕對路徑轉為相對 root 的路徑"""
    if root and os.path.isabs(path):
        abs_root = os.path.abspath(root)
        abs_path = os.path.normpath(path)
        if abs_path == abs_root or abs_path.startswith(abs_root.rstrip(os.sep) + os.sep):
            return os.path.relpath(abs_path, abs_root)
    return path


def _decode(data: Union[bytes, str]) -> str:
    if isinstance(data, bytes):
        return data.decode('utf-8', errors='replace')
    return data


def _byte_offset(data: bytes, line: int, column: int) -> int:
    """把 (行, 欄) 轉換為位元組位移"""
    offset = 0
    for _ in range(max(line - 1, 0)):
        nl = data.find(b'\n', offset)
        if nl < 0:
            break
        offset = nl + 1
    return offset + max(column - 1, 0)


def parse_cppcheck_xml(data: Union[bytes, str], root: Optional[str] = None) -> IngestReport:
    """解析 Cppcheck --xml（version 2）輸出"""
    if isinstance(data, str):
        data = data.encode('utf-8')
    report = IngestReport()
    if not data.strip():
        return report

    parser = etree.XMLParser(resolve_entities=False, no_network=True, huge_tree=True)
    try:
        tree = etree.fromstring(data, parser)
    except etree.XMLSyntaxError as e:
        line, column = e.position if e.position else (1, 1)
        raise IngestError(f"Cppcheck XML 格式錯誤: {e.msg}", _byte_offset(data, line, column))

    for index, error in enumerate(tree.iter('error')):
        checker = error.get('id', 'unknown')
        locus = f"error[{index}] id={checker}"
        location = error.find('location')
        if location is not None:
            attrs = location
        elif error.get('file') is not None:
            # version 1 格式把位置放在 <error> 屬性上
            attrs = error
        else:
            report.parse_notes.append((locus, 'no <location> element'))
            report.skipped_lines += 1
            continue

        column_text = attrs.get('column')
        cwe_text = error.get('cwe')
        try:
            alert = Alert(
                tool='cppcheck',
                checker_id=checker,
                file=_relativize(attrs.get('file', ''), root),
                line=int(attrs.get('line', '0')),
                column=int(column_text) if column_text and int(column_text) > 0 else None,
                message=error.get('msg', ''),
                cwe=int(cwe_text) if cwe_text else None,
                severity=error.get('severity'),
            )
        except (ValueError, ValidationError) as e:
            report.parse_notes.append((locus, f"invalid location: {e.__class__.__name__}"))
            report.skipped_lines += 1
            continue
        report.alerts.append(alert)

    logger.debug(f"Cppcheck XML 解析完成: {len(report.alerts)} 筆警告")
    return report


def parse_clang_tidy(data: Union[bytes, str], root: Optional[str] = None) -> IngestReport:
    """解析 clang-tidy 文字診斷輸出"""
    report = IngestReport()
    text = _decode(data)
    for lineno, line in enumerate(text.splitlines(), 1):
        match = _CLANG_TIDY_LINE.match(line.rstrip('\r'))
        if not match:
            report.skipped_lines += 1
            continue

        checks = [c.strip() for c in (match.group('check') or '').split(',')]
        checks = [c for c in checks if c and not c.startswith('-')]
        try:
            alert = Alert(
                tool='clang-tidy',
                checker_id=checks[0] if checks else 'unknown',
                file=_relativize(match.group('file'), root),
                line=int(match.group('line')),
                column=int(match.group('col')) or None,
                message=match.group('msg'),
                severity=match.group('level'),
            )
        except ValidationError as e:
            report.parse_notes.append((f"line {lineno}", f"invalid diagnostic: {e.error_count()} errors"))
            report.skipped_lines += 1
            continue
        report.alerts.append(alert)
    return report


def parse_generic(data: Union[bytes, str], root: Optional[str] = None) -> IngestReport:
    """解析通用格式 tool|checker|file|line|col|message"""
    report = IngestReport()
    text = _decode(data)
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.rstrip('\r')
        if not line.strip():
            continue
        fields = line.split('|', 5)
        if len(fields) != 6:
            report.parse_notes.append((f"line {lineno}", f"expected 6 fields, got {len(fields)}"))
            report.skipped_lines += 1
            continue

        tool, checker, path, line_text, col_text, message = fields
        if tool not in TOOLS:
            report.parse_notes.append((f"line {lineno}", f"unknown tool: {tool}"))
            report.skipped_lines += 1
            continue
        try:
            alert = Alert(
                tool=tool,
                checker_id=checker,
                file=_relativize(path, root),
                line=int(line_text),
                column=int(col_text) if col_text.strip() else None,
                message=message,
            )
        except (ValueError, ValidationError) as e:
            report.parse_notes.append((f"line {lineno}", f"invalid record: {e.__class__.__name__}"))
            report.skipped_lines += 1
            continue
        report.alerts.append(alert)
    return report


_PARSERS = {
    'cppcheck-xml': parse_cppcheck_xml,
    'clang-tidy': parse_clang_tidy,
    'generic': parse_generic,
}


def parse_alerts(data: Union[bytes, str], fmt: str, root: Optional[str] = None) -> IngestReport:
    """依格式解析記憶體中的工具輸出"""
    parser = _PARSERS.get(fmt)
    if parser is None:
        raise IngestError(f"未知的輸入格式: {fmt}（可用: {', '.join(FORMATS)}）")
    return parser(data, root)


def ingest_file(path: str, fmt: str, root: Optional[str] = None) -> IngestReport:
    """依格式讀取並解析一個檔案；'-' 代表標準輸入"""
    if fmt not in _PARSERS:
        raise IngestError(f"未知的輸入格式: {fmt}（可用: {', '.join(FORMATS)}）")
    try:
        if path == '-':
            data = sys.stdin.buffer.read()
        else:
            with open(path, 'rb') as f:
                data = f.read()
    except OSError as e:
        raise IngestError(f"無法讀取 {path}: {e}")

    report = parse_alerts(data, fmt, root)
    report.parse_notes = [(f"{path}: {locus}", reason) for locus, reason in report.parse_notes]
    logger.info(f"{path} ({fmt}): {len(report.alerts)} 筆警告，略過 {report.skipped_lines} 筆")
    return report


def ingest_many(inputs: Sequence[Tuple[str, str]], mapping: Optional[CheckerMapping] = None,
                root: Optional[str] = None, workers: int = 1) -> IngestReport:
    """並行解析多個輸入，依參數順序合併並套用對照表"""
    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        reports = list(pool.map(lambda item: ingest_file(item[1], item[0], root), inputs))

    merged = IngestReport()
    for report in reports:
        merged.extend(report)
    if mapping is not None:
        merged.alerts = map_alerts(merged.alerts, mapping)
    return merged


def dedupe_alerts(alerts: Iterable[Alert]) -> List[Alert]:
    """依 alert_key 去除重複警告，保留第一筆（只在評估時使用）"""
    seen = set()
    kept = []
    for alert in alerts:
        key = alert_key(alert)
        if key in seen:
            continue
        seen.add(key)
        kept.append(alert)
    return kept
