import logging
import posixpath
import re
from types import MappingProxyType
from typing import Dict, Iterable, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from config import Config
from errors import MappingError

# 設定日誌
logging.basicConfig(level=Config.LOG_LEVEL)
logger = logging.getLogger(__name__)

ToolName = Literal['cppcheck', 'clang-tidy', 'rosecheckers', 'generic']
TOOLS: Tuple[str, ...] = ('cppcheck', 'clang-tidy', 'rosecheckers', 'generic')

GUIDELINE_PATTERN = re.compile(r'^[A-Z]{3}\d{2}-C$')

# 本工具可以修復的三條規則
REPAIRABLE_GUIDELINES = frozenset({'EXP34-C', 'EXP33-C', 'MSC12-C'})


class Alert(BaseModel):
    """正規化後的靜態分析警告"""

    model_config = ConfigDict(frozen=True)

    tool: ToolName
    checker_id: str
    file: str
    line: int = Field(..., ge=1)
    column: Optional[int] = Field(None, ge=1)
    message: str = ''
    guideline: Optional[str] = None
    cwe: Optional[int] = None
    severity: Optional[str] = None

    @field_validator('file')
    @classmethod
    def _normalize_file(cls, value: str) -> str:
        path = value.strip().replace('\\', '/')
        if not path:
            raise ValueError('file 不可為空')
        path = posixpath.normpath(path)
        if path == '..' or path.startswith('../'):
            raise ValueError(f'file 不可跳出根目錄: {value}')
        return path

    @field_validator('guideline')
    @classmethod
    def _check_guideline(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and not GUIDELINE_PATTERN.match(value):
            raise ValueError(f'規則編號格式錯誤: {value}')
        return value

    @property
    def sort_key(self) -> Tuple[str, int, int, str, str]:
        """相依警告判定用的固定排序"""
        return (self.file, self.line, self.column or 0, self.tool, self.checker_id)


class GuidelineId(BaseModel):
    """CERT C 規則資訊"""

    model_config = ConfigDict(frozen=True)

    id: str
    title: str
    priority: int = Field(..., ge=1, le=27)
    repairable: bool = False
    cwe: Tuple[int, ...] = ()

    @field_validator('id')
    @classmethod
    def _check_id(cls, value: str) -> str:
        if not GUIDELINE_PATTERN.match(value):
            raise ValueError(f'規則編號格式錯誤: {value}')
        return value


def _guideline(gid: str, title: str, priority: int, *cwe: int) -> GuidelineId:
    return GuidelineId(id=gid, title=title, priority=priority,
                       repairable=gid in REPAIRABLE_GUIDELINES, cwe=cwe)


# 內建規則表（優先度取自 CERT C 標準，CWE 為最接近的對應）
BUILTIN_GUIDELINES: Dict[str, GuidelineId] = {g.id: g for g in [
    _guideline('EXP34-C', 'Do not dereference null pointers', 18, 476),
    _guideline('EXP33-C', 'Do not read uninitialized memory', 12, 457, 908),
    _guideline('MSC12-C', 'Detect and remove code that has no effect or is never executed', 2, 561, 1164),
    _guideline('MSC13-C', 'Detect and remove unused values', 2, 563),
    _guideline('DCL19-C', 'Minimize the scope of variables and functions', 2),
    _guideline('DCL01-C', 'Do not reuse variable names in subscopes', 2),
    _guideline('DCL00-C', 'Const-qualify immutable objects', 1),
    _guideline('INT31-C', 'Ensure that integer conversions do not result in lost or misinterpreted data', 6, 192, 197),
    _guideline('INT13-C', 'Use bitwise operators only on unsigned operands', 6),
    _guideline('EXP00-C', 'Use parentheses for precedence of operation', 4, 783),
    _guideline('PRE03-C', 'Prefer typedefs to defines for encoding non-pointer types', 2),
    _guideline('EXP12-C', 'Do not ignore values returned by functions', 4, 252),
    _guideline('EXP19-C', 'Use braces for the body of an if, for, or while statement', 2, 483),
    _guideline('INT32-C', 'Ensure that operations on signed integers do not result in overflow', 9, 190),
    _guideline('INT33-C', 'Ensure that division and remainder operations do not result in divide-by-zero errors', 8, 369),
    _guideline('MEM30-C', 'Do not access freed memory', 18, 416),
    _guideline('MEM31-C', 'Free dynamically allocated memory when no longer needed', 8, 401),
    _guideline('MEM34-C', 'Only free memory allocated dynamically', 18, 590),
    _guideline('FIO42-C', 'Close files when they are no longer needed', 4, 404),
    _guideline('FIO47-C', 'Use valid format strings', 6, 686),
    _guideline('ARR30-C', 'Do not form or use out-of-bounds pointers or array subscripts', 18, 119),
    _guideline('ARR36-C', 'Do not subtract or compare two pointers that do not refer to the same array', 4, 469),
    _guideline('STR31-C', 'Guarantee that storage for strings has sufficient space for character data and the null terminator', 18, 120),
    _guideline('STR32-C', 'Do not pass a non-null-terminated character sequence to a library function that expects a string', 18, 170),
    _guideline('STR34-C', 'Cast characters to unsigned char before converting to larger integer sizes', 8, 704),
    _guideline('MSC30-C', 'Do not use the rand() function for generating pseudorandom numbers', 6, 338),
    _guideline('MSC32-C', 'Properly seed pseudorandom number generators', 18, 337),
    _guideline('MSC37-C', 'Ensure that control never reaches the end of a non-void function', 9),
    _guideline('ERR33-C', 'Detect and handle standard library errors', 18, 252),
    _guideline('ERR34-C', 'Detect errors when converting a string to a number', 4, 676),
    _guideline('ENV33-C', 'Do not call system()', 12, 78),
    _guideline('FLP30-C', 'Do not use floating-point variables as loop counters', 4),
    _guideline('DCL16-C', "Use 'L,' not 'l,' to indicate a long value", 2),
    _guideline('DCL37-C', 'Do not declare or define a reserved identifier', 1),
    _guideline('PRE01-C', 'Use parentheses within macros around parameter names', 3),
    _guideline('SIG30-C', 'Call only asynchronous-safe functions within signal handlers', 18, 479),
]}

# (tool, checker) -> (guideline, cwe)
_BUILTIN_ROWS: List[Tuple[str, str, str, Optional[int]]] = [
    # clang-tidy / clang static analyzer
    ('clang-tidy', 'clang-analyzer-core.NullDereference', 'EXP34-C', 476),
    ('clang-tidy', 'clang-analyzer-core.NonNullParamChecker', 'EXP34-C', 476),
    ('clang-tidy', 'clang-analyzer-core.uninitialized.Assign', 'EXP33-C', 457),
    ('clang-tidy', 'clang-analyzer-core.uninitialized.Branch', 'EXP33-C', 457),
    ('clang-tidy', 'clang-analyzer-core.uninitialized.UndefReturn', 'EXP33-C', 457),
    ('clang-tidy', 'clang-analyzer-core.uninitialized.ArraySubscript', 'EXP33-C', 457),
    ('clang-tidy', 'clang-analyzer-core.UndefinedBinaryOperatorResult', 'EXP33-C', 457),
    ('clang-tidy', 'clang-analyzer-deadcode.DeadStores', 'MSC12-C', 563),
    ('clang-tidy', 'clang-analyzer-core.DivideZero', 'INT33-C', 369),
    ('clang-tidy', 'clang-analyzer-unix.Malloc', 'MEM31-C', 401),
    ('clang-tidy', 'clang-analyzer-security.insecureAPI.strcpy', 'STR31-C', 120),
    ('clang-tidy', 'bugprone-narrowing-conversions', 'INT31-C', 197),
    ('clang-tidy', 'cppcoreguidelines-narrowing-conversions', 'INT31-C', 197),
    ('clang-tidy', 'hicpp-signed-bitwise', 'INT13-C', None),
    ('clang-tidy', 'readability-braces-around-statements', 'EXP19-C', 483),
    ('clang-tidy', 'bugprone-macro-parentheses', 'PRE01-C', None),
    ('clang-tidy', 'bugprone-reserved-identifier', 'DCL37-C', None),
    ('clang-tidy', 'misc-unused-parameters', 'MSC13-C', 563),
    ('clang-tidy', 'cert-err33-c', 'ERR33-C', 252),
    ('clang-tidy', 'cert-err34-c', 'ERR34-C', 676),
    ('clang-tidy', 'cert-env33-c', 'ENV33-C', 78),
    ('clang-tidy', 'cert-flp30-c', 'FLP30-C', None),
    ('clang-tidy', 'cert-msc30-c', 'MSC30-C', 338),
    ('clang-tidy', 'cert-msc32-c', 'MSC32-C', 337),
    ('clang-tidy', 'cert-sig30-c', 'SIG30-C', 479),
    ('clang-tidy', 'cert-dcl16-c', 'DCL16-C', None),
    ('clang-tidy', 'cert-str34-c', 'STR34-C', 704),
    # Cppcheck
    ('cppcheck', 'nullPointer', 'EXP34-C', 476),
    ('cppcheck', 'nullPointerRedundantCheck', 'EXP34-C', 476),
    ('cppcheck', 'nullPointerArithmetic', 'EXP34-C', 476),
    ('cppcheck', 'nullPointerDefaultArg', 'EXP34-C', 476),
    ('cppcheck', 'ctunullpointer', 'EXP34-C', 476),
    ('cppcheck', 'uninitvar', 'EXP33-C', 457),
    ('cppcheck', 'uninitdata', 'EXP33-C', 457),
    ('cppcheck', 'uninitStructMember', 'EXP33-C', 457),
    ('cppcheck', 'legacyUninitvar', 'EXP33-C', 457),
    ('cppcheck', 'ctuuninitvar', 'EXP33-C', 457),
    ('cppcheck', 'unreadVariable', 'MSC12-C', 563),
    ('cppcheck', 'redundantAssignment', 'MSC12-C', 563),
    ('cppcheck', 'redundantInitialization', 'MSC12-C', 563),
    ('cppcheck', 'unusedLabel', 'MSC12-C', 561),
    ('cppcheck', 'unusedLabelConfiguration', 'MSC12-C', 561),
    ('cppcheck', 'unsignedLessThanZero', 'MSC12-C', 570),
    ('cppcheck', 'unsignedPositive', 'MSC12-C', 571),
    ('cppcheck', 'constStatement', 'MSC12-C', 1164),
    ('cppcheck', 'duplicateBreak', 'MSC12-C', 561),
    ('cppcheck', 'unusedVariable', 'MSC13-C', 563),
    ('cppcheck', 'unusedStructMember', 'MSC13-C', 563),
    ('cppcheck', 'unusedAllocatedMemory', 'MSC13-C', 563),
    ('cppcheck', 'variableScope', 'DCL19-C', None),
    ('cppcheck', 'shadowVariable', 'DCL01-C', None),
    ('cppcheck', 'shadowArgument', 'DCL01-C', None),
    ('cppcheck', 'shadowFunction', 'DCL01-C', None),
    ('cppcheck', 'constVariable', 'DCL00-C', None),
    ('cppcheck', 'constVariablePointer', 'DCL00-C', None),
    ('cppcheck', 'constParameter', 'DCL00-C', None),
    ('cppcheck', 'constParameterPointer', 'DCL00-C', None),
    ('cppcheck', 'signConversion', 'INT31-C', 192),
    ('cppcheck', 'integerOverflow', 'INT32-C', 190),
    ('cppcheck', 'zerodiv', 'INT33-C', 369),
    ('cppcheck', 'resourceLeak', 'FIO42-C', 404),
    ('cppcheck', 'memleak', 'MEM31-C', 401),
    ('cppcheck', 'memleakOnRealloc', 'MEM31-C', 401),
    ('cppcheck', 'doubleFree', 'MEM30-C', 415),
    ('cppcheck', 'deallocuse', 'MEM30-C', 416),
    ('cppcheck', 'autovarInvalidDeallocation', 'MEM34-C', 590),
    ('cppcheck', 'mismatchAllocDealloc', 'MEM34-C', 762),
    ('cppcheck', 'terminateStrncpy', 'STR32-C', 170),
    ('cppcheck', 'arrayIndexOutOfBounds', 'ARR30-C', 119),
    ('cppcheck', 'bufferAccessOutOfBounds', 'ARR30-C', 119),
    ('cppcheck', 'comparePointers', 'ARR36-C', 469),
    ('cppcheck', 'wrongPrintfScanfArgNum', 'FIO47-C', 685),
    ('cppcheck', 'invalidPrintfArgType_sint', 'FIO47-C', 686),
    ('cppcheck', 'invalidPrintfArgType_uint', 'FIO47-C', 686),
    ('cppcheck', 'invalidPrintfArgType_s', 'FIO47-C', 686),
    ('cppcheck', 'missingReturn', 'MSC37-C', None),
]


class CheckerMapping:
    """(tool, checker_id) -> (guideline, cwe) 對照表；載入後不可變"""

    def __init__(self, entries: Dict[Tuple[str, str], Tuple[str, Optional[int]]],
                 guidelines: Dict[str, GuidelineId]):
        self.entries = MappingProxyType(dict(entries))
        self.guidelines = MappingProxyType(dict(guidelines))

    def lookup(self, tool: str, checker_id: str) -> Optional[Tuple[str, Optional[int]]]:
        """查詢對照；找不到時回傳 None（視為 unmapped，不是錯誤）"""
        return self.entries.get((tool, checker_id))

    def guideline(self, gid: str) -> Optional[GuidelineId]:
        return self.guidelines.get(gid)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CheckerMapping):
            return NotImplemented
        return dict(self.entries) == dict(other.entries) and dict(self.guidelines) == dict(other.guidelines)

    def __len__(self) -> int:
        return len(self.entries)


def _builtin_entries() -> Dict[Tuple[str, str], Tuple[str, Optional[int]]]:
    entries: Dict[Tuple[str, str], Tuple[str, Optional[int]]] = {}
    for tool, checker, gid, cwe in _BUILTIN_ROWS:
        entries[(tool, checker)] = (gid, cwe)
    # Rosecheckers 與通用格式直接以規則編號作為 checker
    for gid, info in BUILTIN_GUIDELINES.items():
        cwe = info.cwe[0] if info.cwe else None
        entries[('rosecheckers', gid)] = (gid, cwe)
        entries[('generic', gid)] = (gid, cwe)
    return entries


def builtin_mapping() -> CheckerMapping:
    return CheckerMapping(_builtin_entries(), BUILTIN_GUIDELINES)


def load_mapping(path: str = 'builtin') -> CheckerMapping:
    """載入對照表；使用者檔案覆寫內建項目"""
    entries = _builtin_entries()
    guidelines = dict(BUILTIN_GUIDELINES)
    if path == 'builtin':
        return CheckerMapping(entries, guidelines)

    try:
        with open(path, 'r', encoding='utf-8', errors='replace') as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise MappingError(f"無法讀取對照表 {path}: {e}")

    overrides = 0
    for lineno, raw in enumerate(lines, 1):
        if not raw.strip() or raw.lstrip().startswith('#'):
            continue
        fields = raw.split('\t')
        if len(fields) not in (3, 4):
            raise MappingError(f"欄位數量錯誤（需要 3 或 4 個 tab 分隔欄位）: {raw!r}", lineno)
        tool, checker, gid = (field.strip() for field in fields[:3])
        cwe_text = fields[3].strip() if len(fields) == 4 else ''
        if tool not in TOOLS:
            raise MappingError(f"未知的工具名稱: {tool}", lineno)
        if not checker:
            raise MappingError("checker_id 不可為空", lineno)
        if not GUIDELINE_PATTERN.match(gid):
            raise MappingError(f"規則編號格式錯誤: {gid}", lineno)
        cwe: Optional[int] = None
        if cwe_text:
            try:
                cwe = int(cwe_text.upper().replace('CWE-', ''))
            except ValueError:
                raise MappingError(f"CWE 編號格式錯誤: {cwe_text}", lineno)
        if gid not in guidelines:
            guidelines[gid] = _guideline(gid, gid, 1)
        entries[(tool, checker)] = (gid, cwe)
        overrides += 1

    logger.info(f"載入對照表 {path}，使用者項目 {overrides} 筆")
    return CheckerMapping(entries, guidelines)


def map_alert(alert: Alert, mapping: CheckerMapping) -> Alert:
    """依對照表補上 guideline/cwe；找不到時原樣保留"""
    hit = mapping.lookup(alert.tool, alert.checker_id)
    if hit is None:
        return alert
    gid, cwe = hit
    return alert.model_copy(update={
        'guideline': gid,
        'cwe': cwe if cwe is not None else alert.cwe,
    })


def map_alerts(alerts: Iterable[Alert], mapping: CheckerMapping) -> List[Alert]:
    return [map_alert(alert, mapping) for alert in alerts]


def alert_key(alert: Alert) -> str:
    """(file, line, guideline-or-checker) 的標準鍵；不含欄位"""
    return f"{alert.file}|{alert.line}|{alert.guideline or alert.checker_id}"


_QUOTED_NAME = re.compile(r"(?<!field )'([A-Za-z_][A-Za-z0-9_]*)'")
_TRAILING_NAME = re.compile(r'(?:variable|dereference|pointer):\s*([A-Za-z_][A-Za-z0-9_]*)\s*\.?\s*$', re.IGNORECASE)


def variable_hint(alert: Alert) -> Optional[str]:
    """從工具訊息取出變數或標籤名稱

    "field 'x'" 指的是成員而不是被解參考的指標，不當作提示。
    """
    match = _QUOTED_NAME.search(alert.message)
    if match:
        return match.group(1)
    match = _TRAILING_NAME.search(alert.message)
    if match:
        return match.group(1)
    return None


def format_generic(alerts: Iterable[Alert]) -> str:
    """輸出通用格式 tool|checker|file|line|col|message（parse_generic 的反函數）"""
    lines = []
    for alert in alerts:
        column = '' if alert.column is None else str(alert.column)
        message = alert.message.replace('\r', ' ').replace('\n', ' ')
        lines.append(f"{alert.tool}|{alert.checker_id}|{alert.file}|{alert.line}|{column}|{message}")
    return ''.join(line + '\n' for line in lines)
