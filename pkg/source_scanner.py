"""
C 原始碼詞法層
負責 token 切分、條件式前置處理指令配對、SigLoC 計數，
以及位元組範圍的 Independent / Embedded / Mixed 分類
"""

import bisect
import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

from config import Config
from errors import DirectiveError, ScanError

# 設定日誌
logging.basicConfig(level=Config.LOG_LEVEL)
logger = logging.getLogger(__name__)

IDENTIFIER = 'identifier'
NUMBER = 'number'
STRING = 'string'
CHAR = 'char-literal'
PUNCTUATOR = 'punctuator'
COMMENT = 'comment'
WHITESPACE = 'whitespace'
DIRECTIVE = 'directive-line'

CONDITIONAL_OPENERS = ('if', 'ifdef', 'ifndef')
CONDITIONAL_KINDS = ('if', 'ifdef', 'ifndef', 'elif', 'else', 'endif')

_PUNCTUATORS = [
    '...', '<<=', '>>=',
    '->', '++', '--', '<<', '>>', '<=', '>=', '==', '!=', '&&', '||',
    '*=', '/=', '%=', '+=', '-=', '&=', '^=', '|=', '##',
]
_PUNCT = re.compile('|'.join(re.escape(p) for p in _PUNCTUATORS))
_IDENT = re.compile(r'[A-Za-z_$\x80-\xff][A-Za-z0-9_$\x80-\xff]*')
_NUMBER = re.compile(r'\.?[0-9](?:[eEpP][+-]|[0-9A-Za-z_.])*')
_SPACE = re.compile(r'(?:[ \t\f\v\r\n]|\\\r?\n)+')
_SPLICE = re.compile(r'\\\r?\n')
_DIRECTIVE_NAME = re.compile(r'#\s*([A-Za-z_]+)')

Source = Union[bytes, str]


@dataclass(frozen=True)
class Token:
    kind: str
    start: int
    end: int
    line: int
    text: str


@dataclass(frozen=True)
class DirectiveRegion:
    kind: str
    start: int
    end: int
    group_id: int
    depth: int
    line: int


class RangeClass(str, Enum):
    INDEPENDENT = 'Independent'
    EMBEDDED = 'Embedded'
    MIXED = 'Mixed'


def as_text(source: Source) -> str:
    """位元組以 latin-1 解碼，確保字元位移等於位元組位移"""
    if isinstance(source, bytes):
        return source.decode('latin-1')
    return source


def _is_splice(text: str, pos: int) -> bool:
    return text.startswith('\\\n', pos) or text.startswith('\\\r\n', pos)


def _newline_continued(text: str, nl: int) -> bool:
    """換行前是否緊接反斜線（行接續）"""
    if nl > 0 and text[nl - 1] == '\\':
        return True
    return nl > 1 and text[nl - 1] == '\r' and text[nl - 2] == '\\'


def _line_comment_end(text: str, pos: int) -> int:
    p = pos
    while True:
        nl = text.find('\n', p)
        if nl < 0:
            return len(text)
        if _newline_continued(text, nl):
            p = nl + 1
            continue
        return nl


def _quoted_end(text: str, pos: int, line: int) -> int:
    quote = text[pos]
    p = pos + 1
    n = len(text)
    while p < n:
        c = text[p]
        if c == '\\':
            p += 3 if text.startswith('\r\n', p + 1) else 2
            continue
        if c == quote:
            return p + 1
        if c == '\n':
            break
        p += 1
    what = 'string literal' if quote == '"' else 'character literal'
    raise ScanError(f"unterminated {what}", line)


def _directive_end(text: str, pos: int, line: int) -> int:
    """指令行結尾（含反斜線接續與其中的註解），不含換行"""
    p = pos
    n = len(text)
    while p < n:
        c = text[p]
        if c == '\n':
            if _newline_continued(text, p):
                p += 1
                continue
            return p
        if text.startswith('/*', p):
            close = text.find('*/', p + 2)
            if close < 0:
                raise ScanError('unterminated block comment', line + text.count('\n', pos, p))
            p = close + 2
            continue
        if text.startswith('//', p):
            p = _line_comment_end(text, p)
            continue
        if c in '"\'':
            # 指令行內的引號寬鬆處理（例如 #error don't）
            q = p + 1
            while q < n and text[q] != c and text[q] != '\n':
                q += 2 if text[q] == '\\' and not _is_splice(text, q) else 1
            p = q + 1 if q < n and text[q] == c else q
            continue
        p += 1
    return n


def scan_tokens(source: Source) -> List[Token]:
    """切分 token；所有 token 依序拼接即為原檔"""
    text = as_text(source)
    tokens: List[Token] = []
    n = len(text)
    pos = 0
    line = 1
    at_bol = True

    while pos < n:
        c = text[pos]
        if c in ' \t\f\v\r\n' or _is_splice(text, pos):
            end = _SPACE.match(text, pos).end()
            kind = WHITESPACE
            if '\n' in _SPLICE.sub('', text[pos:end]):
                at_bol = True
        elif c == '#' and at_bol:
            end = _directive_end(text, pos, line)
            kind = DIRECTIVE
            at_bol = False
        elif text.startswith('/*', pos):
            close = text.find('*/', pos + 2)
            if close < 0:
                raise ScanError('unterminated block comment', line)
            end = close + 2
            kind = COMMENT
        elif text.startswith('//', pos):
            end = _line_comment_end(text, pos)
            kind = COMMENT
        elif c == '"' or c == "'":
            end = _quoted_end(text, pos, line)
            kind = STRING if c == '"' else CHAR
            at_bol = False
        else:
            at_bol = False
            match = _IDENT.match(text, pos)
            if match:
                end, kind = match.end(), IDENTIFIER
            else:
                match = _NUMBER.match(text, pos)
                if match:
                    end, kind = match.end(), NUMBER
                else:
                    match = _PUNCT.match(text, pos)
                    end = match.end() if match else pos + 1
                    kind = PUNCTUATOR

        tokens.append(Token(kind, pos, end, line, text[pos:end]))
        line += text.count('\n', pos, end)
        pos = end

    return tokens


def directive_name(token: Token) -> str:
    match = _DIRECTIVE_NAME.match(_SPLICE.sub('', token.text))
    return match.group(1) if match else ''


def scan_directives(source: Source, tokens: Optional[Sequence[Token]] = None) -> List[DirectiveRegion]:
    """找出所有條件式指令並配對 if...endif 群組"""
    if tokens is None:
        tokens = scan_tokens(source)

    regions: List[DirectiveRegion] = []
    stack: List[Tuple[int, int, int]] = []  # (group_id, depth, 開頭行號)
    next_group = 0
    for token in tokens:
        if token.kind != DIRECTIVE:
            continue
        name = directive_name(token)
        if name in CONDITIONAL_OPENERS:
            group_id, depth = next_group, len(stack) + 1
            next_group += 1
            stack.append((group_id, depth, token.line))
            kind = name
        elif name in ('elif', 'elifdef', 'elifndef', 'else', 'endif'):
            if not stack:
                raise DirectiveError(f"#{name} without matching #if", token.line)
            group_id, depth, _ = stack[-1]
            kind = 'elif' if name.startswith('elif') else name
            if name == 'endif':
                stack.pop()
        else:
            continue
        regions.append(DirectiveRegion(kind, token.start, token.end, group_id, depth, token.line))

    if stack:
        raise DirectiveError('unterminated conditional group', stack[-1][2])
    return regions


def _overlaps(unit_start: int, unit_end: int, start: int, end: int) -> bool:
    if start == end:
        # 零寬度插入點落在指令行內（含行首）也算重疊
        return unit_start <= start < unit_end
    return unit_start < end and start < unit_end


def classify_range(source: Source, byte_range: Tuple[int, int],
                   tokens: Optional[Sequence[Token]] = None,
                   regions: Optional[Sequence[DirectiveRegion]] = None) -> RangeClass:
    """判定範圍與前置處理指令的關係"""
    start, end = byte_range
    if start > end:
        raise ValueError(f"範圍起點大於終點: {byte_range}")
    if tokens is None:
        tokens = scan_tokens(source)
    if regions is None:
        regions = scan_directives(source, tokens)

    overlapping = [t for t in tokens if t.kind == DIRECTIVE and _overlaps(t.start, t.end, start, end)]
    if not overlapping:
        return RangeClass.INDEPENDENT

    region_at: Dict[int, DirectiveRegion] = {r.start: r for r in regions}
    group_span: Dict[int, Tuple[int, int]] = {}
    for region in regions:
        lo, hi = group_span.get(region.group_id, (region.start, region.end))
        group_span[region.group_id] = (min(lo, region.start), max(hi, region.end))

    for token in overlapping:
        region = region_at.get(token.start)
        unit_start, unit_end = group_span[region.group_id] if region else (token.start, token.end)
        if not (start <= unit_start and unit_end <= end):
            return RangeClass.MIXED
    return RangeClass.EMBEDDED


def is_independent(source: Source, byte_range: Tuple[int, int],
                   tokens: Optional[Sequence[Token]] = None,
                   regions: Optional[Sequence[DirectiveRegion]] = None) -> bool:
    return classify_range(source, byte_range, tokens, regions) is RangeClass.INDEPENDENT


def count_sigloc(source: Source, tokens: Optional[Sequence[Token]] = None) -> int:
    """計算非空白、非純註解的行數"""
    if tokens is None:
        tokens = scan_tokens(source)
    lines = set()
    for token in tokens:
        if token.kind in (COMMENT, WHITESPACE):
            continue
        lines.update(range(token.line, token.line + token.text.count('\n') + 1))
    return len(lines)


class SourceFile:
    """一個已掃描的 C 檔案（token、指令群組、行首位移）"""

    def __init__(self, source: Source, path: str = '<memory>'):
        self.path = path
        self.text = as_text(source)
        self.tokens = scan_tokens(self.text)
        self.regions = scan_directives(self.text, self.tokens)
        # 程式碼 token：去掉空白、註解與指令行
        self.code = [t for t in self.tokens if t.kind not in (COMMENT, WHITESPACE, DIRECTIVE)]
        self._code_starts = [t.start for t in self.code]
        self.line_starts = [0] + [m.end() for m in re.finditer('\n', self.text)]

    def classify(self, byte_range: Tuple[int, int]) -> RangeClass:
        return classify_range(self.text, byte_range, self.tokens, self.regions)

    def is_independent(self, byte_range: Tuple[int, int]) -> bool:
        return self.classify(byte_range) is RangeClass.INDEPENDENT

    def line_span(self, line: int) -> Optional[Tuple[int, int]]:
        """第 line 行的位元組範圍（不含換行）"""
        if line < 1 or line > len(self.line_starts):
            return None
        start = self.line_starts[line - 1]
        end = self.text.find('\n', start)
        return start, (len(self.text) if end < 0 else end)

    def line_of(self, offset: int) -> int:
        return bisect.bisect_right(self.line_starts, offset)

    def code_index_at(self, offset: int) -> int:
        """offset 所在或之後的第一個程式碼 token 索引"""
        index = bisect.bisect_right(self._code_starts, offset) - 1
        if index >= 0 and self.code[index].end > offset:
            return index
        return index + 1

    def directive_at(self, offset: int) -> Optional[Token]:
        for token in self.tokens:
            if token.kind == DIRECTIVE and token.start <= offset < token.end:
                return token
            if token.start > offset:
                break
        return None
