"""
修復位置分析
把一筆警告轉換成具體的 RepairSite：所在敘述、目標運算式、值類別，
並推導所在函式的錯誤處理策略
"""

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from alert_model import Alert, variable_hint
from config import Config
from errors import SiteError
from source_scanner import CHAR, IDENTIFIER, NUMBER, STRING, Source, SourceFile

# 設定日誌
logging.basicConfig(level=Config.LOG_LEVEL)
logger = logging.getLogger(__name__)

ByteRange = Tuple[int, int]

TYPE_KEYWORDS = {'void', 'char', 'short', 'int', 'long', 'float', 'double', 'signed', 'unsigned',
                 '_Bool', 'bool', '_Complex'}
QUALIFIERS = {'const', 'volatile', 'restrict', '__restrict', '__restrict__', '_Atomic'}
STORAGE = {'static', 'extern', 'auto', 'register', 'typedef', 'inline', '__inline', '__inline__',
           '_Thread_local'}
TAGS = {'struct', 'union', 'enum'}
KEYWORDS = TYPE_KEYWORDS | QUALIFIERS | STORAGE | TAGS | {
    'if', 'else', 'for', 'while', 'do', 'switch', 'case', 'default', 'return', 'goto', 'break',
    'continue', 'sizeof', '_Alignof', 'typeof', '__typeof__', '_Generic', '_Static_assert',
}
INTEGER_TYPES = {'char', 'short', 'int', 'long', 'signed', 'unsigned', '_Bool', 'bool'}
_INTEGER_TYPEDEF = re.compile(
    r'^(?:u?int(?:8|16|32|64|max|ptr)_t|u?int_(?:fast|least)(?:8|16|32|64)_t|s?size_t|ptrdiff_t|off_t|pid_t|uid_t|gid_t|mode_t|wchar_t)$'
)
ASSIGN_OPS = {'=', '+=', '-=', '*=', '/=', '%=', '&=', '|=', '^=', '<<=', '>>='}
PREFIX_OPS = {'*', '&', '++', '--', '!', '~', '-', '+'}
NULL_TOKENS = {'NULL', '0'}
LABEL_CHECKERS = re.compile(r'label', re.IGNORECASE)
_ALL_CAPS = re.compile(r'^[A-Z][A-Z0-9_]*$')

_OPEN = {')': '(', ']': '[', '}': '{'}


class ValueCategory(str, Enum):
    RVALUE = 'rvalue'
    ADDRESSABLE = 'addressable-lvalue'
    NON_ADDRESSABLE = 'non-addressable-lvalue'


class ReturnClass(str, Enum):
    INTEGER = 'integer'
    POINTER = 'pointer'
    ENUM_LIKE = 'enum-like'
    VOID = 'void'
    OTHER = 'other'


@dataclass
class ReturnRecord:
    byte_range: ByteRange
    value: str  # 單一 token 的文字、'complex'，或空字串（return;）
    is_final: bool = False

    @property
    def simple(self) -> bool:
        return self.value not in ('', 'complex')


@dataclass
class FunctionContext:
    name: str
    return_class: ReturnClass
    body_range: ByteRange
    returns: List[ReturnRecord] = field(default_factory=list)

    @property
    def final_return(self) -> Optional[ReturnRecord]:
        return self.returns[-1] if self.returns else None


@dataclass(frozen=True)
class ErrorStrategy:
    kind: str  # ReturnValue | ReturnNull | ReturnVoid | Abort | Custom
    text: str = ''

    def render(self) -> str:
        """轉成放進 null_check 第二個參數的 C 敘述"""
        if self.kind == 'ReturnValue':
            return f"return {self.text}"
        if self.kind == 'ReturnNull':
            return 'return NULL'
        if self.kind == 'ReturnVoid':
            return 'return'
        if self.kind == 'Custom':
            # 修復必須維持單行
            return self.text.replace('\r', ' ').replace('\n', ' ').strip().rstrip(';').strip()
        return 'abort()'


@dataclass
class RepairSite:
    alert: Alert
    guideline: str
    stmt_range: ByteRange
    expr_range: ByteRange
    value_category: ValueCategory = ValueCategory.RVALUE
    decl_range: Optional[ByteRange] = None
    variable: Optional[str] = None
    # MSC12-C：assignment / label / void-cast / label-removed
    subcategory: Optional[str] = None
    # 可證明非 NULL 的形式（address-of、string literal、array name、function name）
    dismissal: Optional[str] = None
    # 實際要改動的範圍（EXP33-C 的 insertion point 或 MSC12-C 刪除的部分）
    edit_range: Optional[ByteRange] = None

    @property
    def overlap_range(self) -> ByteRange:
        """判斷相依警告時使用的範圍"""
        if self.guideline == 'EXP33-C' and self.decl_range is not None:
            return self.decl_range
        return self.edit_range or self.expr_range


def ranges_overlap(a: ByteRange, b: ByteRange) -> bool:
    """半開區間重疊；相同的零寬度插入點也視為重疊"""
    if a == b:
        return True
    return a[0] < b[1] and b[0] < a[1]


class SiteAnalyzer:
    """單一檔案的位置分析器；同一檔案的所有警告共用一份掃描結果"""

    def __init__(self, source_file: SourceFile):
        self.sf = source_file
        self.text = source_file.text
        self.code = source_file.code
        self.match: Dict[int, int] = {}
        self.paren_depth: List[int] = []
        self.brace_depth: List[int] = []
        self._functions: Optional[List[Tuple[int, int, int, bool]]] = None
        self._index_match()

    # ------------------------------------------------------------------
    # 基礎結構
    # ------------------------------------------------------------------

    def _index_match(self) -> None:
        stack: List[int] = []
        paren = brace = 0
        for i, token in enumerate(self.code):
            self.paren_depth.append(paren)
            self.brace_depth.append(brace)
            text = token.text
            if text in ('(', '[', '{'):
                stack.append(i)
                if text == '{':
                    brace += 1
                else:
                    paren += 1
            elif text in (')', ']', '}'):
                if stack and self.code[stack[-1]].text == _OPEN[text]:
                    j = stack.pop()
                    self.match[i] = j
                    self.match[j] = i
                if text == '}':
                    brace = max(brace - 1, 0)
                else:
                    paren = max(paren - 1, 0)

    def _byte_range(self, a: int, b: int) -> ByteRange:
        return self.code[a].start, self.code[b - 1].end

    def _slice(self, a: int, b: int) -> str:
        start, end = self._byte_range(a, b)
        return self.text[start:end]

    def _is_name(self, i: int) -> bool:
        token = self.code[i]
        return token.kind == IDENTIFIER and token.text not in KEYWORDS

    def _ends_operand(self, i: int) -> bool:
        token = self.code[i]
        if token.kind in (NUMBER, STRING, CHAR) or self._is_name(i):
            return True
        if token.text == ')':
            open_ = self.match.get(i)
            if open_ is not None and open_ > 0 and self.code[open_ - 1].text in ('if', 'while', 'for', 'switch'):
                return False
            return not self._is_cast(i)
        return token.text in (']', '++', '--')

    def _is_type_token(self, i: int) -> bool:
        token = self.code[i]
        if token.text in TYPE_KEYWORDS or token.text in QUALIFIERS:
            return True
        return token.kind == IDENTIFIER and i > 0 and self.code[i - 1].text in TAGS

    def _is_cast(self, close: int) -> bool:
        """`( 型別 )` 形式的括號"""
        open_ = self.match.get(close)
        if open_ is None or self.code[open_].text != '(' or close - open_ < 2:
            return False
        if open_ > 0 and (self._is_name(open_ - 1) or self.code[open_ - 1].text in ('sizeof', ')', ']')):
            return False
        inner = self.code[open_ + 1:close]
        if not all(t.kind == IDENTIFIER or t.text == '*' for t in inner):
            return False
        first = inner[0].text
        if first in TYPE_KEYWORDS or first in QUALIFIERS or first in TAGS:
            return True
        if inner[-1].text == '*':
            return True
        return len(inner) == 1 and bool(_INTEGER_TYPEDEF.match(first) or first.endswith('_t'))

    def _declarator_star(self, k: int) -> bool:
        """宣告子中的 `*`（int *p、char **argv、(char *)）"""
        if k == 0:
            return False
        prev = k - 1
        if self._is_type_token(prev):
            return True
        return self.code[prev].text == '*' and self._declarator_star(prev)

    def _is_unary_star(self, k: int) -> bool:
        if self.code[k].text != '*' or self._declarator_star(k):
            return False
        return k == 0 or not self._ends_operand(k - 1)

    def line_indices(self, line: int) -> List[int]:
        span = self.sf.line_span(line)
        if span is None:
            return []
        start, end = span
        first = self.sf.code_index_at(start)
        indices = []
        for i in range(first, len(self.code)):
            if self.code[i].start > end:
                break
            indices.append(i)
        return indices

    def statement_bounds(self, idx: int) -> Tuple[int, int]:
        """以同層的 ; { } 為界的最小敘述（token 索引 [s, e)）"""
        depth = self.paren_depth[idx]
        s = idx
        while s > 0:
            prev = self.code[s - 1]
            if prev.text in (';', '{', '}') and self.paren_depth[s - 1] <= depth:
                break
            s -= 1
        e = idx
        n = len(self.code)
        while e < n:
            token = self.code[e]
            if token.text in ('{', '}') and self.paren_depth[e] <= depth:
                break
            e += 1
            if token.text == ';' and self.paren_depth[e - 1] <= depth:
                break
        return s, max(e, s + 1)

    # ------------------------------------------------------------------
    # 錨點
    # ------------------------------------------------------------------

    def _anchor(self, alert: Alert) -> Tuple[Optional[int], List[int]]:
        """回傳 (錨點位移, 該行的程式碼 token)；沒有欄位時位移為 None"""
        span = self.sf.line_span(alert.line)
        if span is None:
            raise SiteError('unresolvable site')
        line_start, line_end = span
        indices = self.line_indices(alert.line)

        if alert.column is None:
            if not indices:
                if self.sf.directive_at(line_start) or self.sf.directive_at(max(line_end - 1, line_start)):
                    raise SiteError('macro-obscured site')
                raise SiteError('unresolvable site')
            return None, indices

        offset = min(line_start + alert.column - 1, line_end)
        if self.sf.directive_at(offset):
            raise SiteError('macro-obscured site')
        if not indices:
            raise SiteError('unresolvable site')
        for i in indices:
            if self.code[i].start <= offset < self.code[i].end:
                return offset, indices
        # 欄位落在空白：改用同一行最近的 token
        nearest = min(indices, key=lambda i: (min(abs(self.code[i].start - offset), abs(self.code[i].end - offset)), i))
        logger.debug(f"{alert.file}:{alert.line} 欄位 {alert.column} 落在空白，改錨定 {self.code[nearest].text!r}")
        return self.code[nearest].start, indices

    def _in_macro_call(self, indices: List[int]) -> bool:
        for i in indices:
            if self._is_name(i) and _ALL_CAPS.match(self.code[i].text) and i + 1 < len(self.code) \
                    and self.code[i + 1].text == '(':
                return True
        return False

    # ------------------------------------------------------------------
    # 運算式解析
    # ------------------------------------------------------------------

    def _operand_end(self, k: int, hi: int) -> Optional[int]:
        """從 k 開始解析一元運算式，回傳結尾索引（不含尾端的 ++/--）"""
        i = k
        while i < hi:
            token = self.code[i]
            if token.text == '(' and i in self.match and self._is_cast(self.match[i]):
                i = self.match[i] + 1
                continue
            if token.text in PREFIX_OPS:
                i += 1
                continue
            break
        if i >= hi:
            return None
        token = self.code[i]
        if token.text == '(':
            close = self.match.get(i)
            if close is None or close >= hi:
                return None
            i = close + 1
        elif token.kind in (NUMBER, CHAR) or self._is_name(i):
            i += 1
        elif token.kind == STRING:
            while i < hi and self.code[i].kind == STRING:
                i += 1
        else:
            return None
        while i < hi:
            text = self.code[i].text
            if text in ('(', '['):
                close = self.match.get(i)
                if close is None or close >= hi:
                    return None
                i = close + 1
            elif text in ('.', '->') and i + 1 < hi and self.code[i + 1].kind == IDENTIFIER:
                i += 2
            else:
                break
        return i

    def _chain_start(self, j: int, lo: int) -> Optional[int]:
        """由後往前找出以 j 結尾的後綴運算式起點"""
        i = j
        while i >= lo:
            token = self.code[i]
            if token.text in (')', ']'):
                open_ = self.match.get(i)
                if open_ is None or open_ < lo:
                    return None
                if open_ - 1 >= lo and (self._is_name(open_ - 1) or self.code[open_ - 1].text in (')', ']')):
                    i = open_ - 1
                    continue
                if token.text == ']':
                    return None
                return open_
            if token.kind in (NUMBER, STRING, CHAR) or self._is_name(i):
                if i - 1 >= lo and self.code[i - 1].text in ('.', '->'):
                    i -= 2
                    continue
                return i
            return None
        return None

    def _deref_candidates(self, s: int, e: int) -> List[Tuple[int, int]]:
        """敘述中所有被解參考的指標運算式 (token 索引 [a, b))"""
        found = set()
        for k in range(s, e):
            text = self.code[k].text
            if text == '*' and self._is_unary_star(k):
                end = self._operand_end(k + 1, e)
                if end is not None and end > k + 1:
                    found.add((k + 1, end))
            elif text in ('->', '[') and k > s:
                start = self._chain_start(k - 1, s)
                if start is not None:
                    found.add((start, k))
        return sorted(found)

    def _names_in(self, a: int, b: int) -> List[str]:
        return [self.code[i].text for i in range(a, b) if self._is_name(i)]

    def _pick(self, candidates: List[Tuple[int, int]], offset: Optional[int], hint: Optional[str]) -> Tuple[int, int]:
        pool = candidates
        if hint:
            exact = [c for c in pool if self._slice(*c) == hint]
            if exact:
                pool = exact
            else:
                pool = [c for c in pool if hint in self._names_in(*c)]
                if not pool:
                    # 提示的名稱不在任何解參考中：不猜
                    raise SiteError('unresolvable site')
        if offset is None:
            texts = {self._slice(*c) for c in pool}
            if len(texts) > 1:
                raise SiteError('ambiguous site')
            return pool[0]

        def distance(c: Tuple[int, int]) -> Tuple[int, int, int]:
            start, end = self._byte_range(*c)
            if start <= offset < end:
                return 0, end - start, start
            return 1, min(abs(start - offset), abs(end - offset)), start

        return min(pool, key=distance)

    # ------------------------------------------------------------------
    # 宣告搜尋
    # ------------------------------------------------------------------

    def _decl_statement_start(self, i: int) -> Tuple[int, Optional[int]]:
        """回傳 (敘述起點, 包住它的未配對 '(' 索引)"""
        depth = 0
        j = i - 1
        while j >= 0:
            text = self.code[j].text
            if text in (')', ']'):
                depth += 1
            elif text in ('(', '['):
                if depth == 0:
                    return j + 1, j
                depth -= 1
            elif text in (';', '{', '}') and depth == 0:
                return j + 1, None
            j -= 1
        return 0, None

    def _starts_declaration(self, st: int, name_idx: int) -> bool:
        first = self.code[st]
        if first.text in TYPE_KEYWORDS or first.text in QUALIFIERS or first.text in STORAGE \
                or first.text in TAGS:
            return True
        if self._is_name(st) and st + 1 <= name_idx:
            nxt = self.code[st + 1]
            return nxt.kind == IDENTIFIER or nxt.text == '*'
        return False

    def _declaration_at(self, i: int) -> Optional[int]:
        """若索引 i 的識別字是宣告子名稱，回傳宣告敘述起點"""
        st, paren = self._decl_statement_start(i)
        if paren is not None:
            opener = self.code[paren - 1].text if paren > 0 else ''
            if opener != 'for':
                return None
        if st >= i or not self._starts_declaration(st, i):
            return None
        p = i - 1
        while p >= st and (self.code[p].text == '*' or self.code[p].text in QUALIFIERS):
            p -= 1
        if p < st:
            return None
        prev = self.code[p]
        if prev.text == ',':
            # 逗號必須是宣告列表的分隔，而不是初始值裡的逗號
            depth = 0
            for q in range(st, p):
                t = self.code[q].text
                if t in ('(', '[', '{'):
                    depth += 1
                elif t in (')', ']', '}'):
                    depth -= 1
            return st if depth == 0 else None
        if prev.kind == IDENTIFIER or prev.text == '}':
            return st
        return None

    def _find_declaration(self, use: int, name: str) -> Tuple[int, int]:
        """由使用處往外層作用域找宣告；回傳 (名稱索引, 敘述起點)"""
        i = use - 1
        while i >= 0:
            token = self.code[i]
            if token.text == '}' and i in self.match and self.match[i] < i:
                i = self.match[i] - 1
                continue
            if token.text == '{' and self.brace_depth[i] == 0:
                header = self._function_header(i)
                if header is not None:
                    open_, close, _ = header
                    for q in range(open_ + 1, close):
                        if self.code[q].text == name and self._is_name(q):
                            raise SiteError('parameter declaration')
                    i = open_ - 1
                    break
            if token.kind == IDENTIFIER and token.text == name:
                st = self._declaration_at(i)
                if st is not None:
                    return i, st
            i -= 1

        # 檔案層級
        while i >= 0:
            token = self.code[i]
            if token.text == '}' and i in self.match and self.match[i] < i:
                i = self.match[i] - 1
                continue
            if token.kind == IDENTIFIER and token.text == name and self._declaration_at(i) is not None:
                raise SiteError('file-scope declaration')
            i -= 1
        raise SiteError('no declaration')

    def _declared_array(self, use: int, name: str) -> bool:
        try:
            idx, _ = self._find_declaration(use, name)
        except SiteError:
            return False
        return idx + 1 < len(self.code) and self.code[idx + 1].text == '['

    def _declared_register(self, use: int, name: str) -> bool:
        try:
            idx, st = self._find_declaration(use, name)
        except SiteError:
            return False
        return any(self.code[q].text == 'register' for q in range(st, idx))

    def _is_bitfield(self, member: str) -> bool:
        for i in range(1, len(self.code) - 2):
            if self.code[i].text == member and self.code[i + 1].text == ':' \
                    and self.code[i + 2].kind == NUMBER and self.code[i - 1].kind == IDENTIFIER \
                    and self.brace_depth[i] > 0:
                return True
        return False

    def _is_function_name(self, name: str) -> bool:
        for i, token in enumerate(self.code[:-1]):
            if token.text == name and self.brace_depth[i] == 0 and self.code[i + 1].text == '(':
                return True
        return False

    # ------------------------------------------------------------------
    # 函式
    # ------------------------------------------------------------------

    def _function_header(self, body: int) -> Optional[Tuple[int, int, bool]]:
        """若 body 是函式本體的 '{'，回傳參數列 (open, close, 是否 K&R)"""
        if body == 0:
            return None
        prev = body - 1
        if self.code[prev].text == ')':
            open_ = self.match.get(prev)
            if open_ is None or open_ == 0 or self._is_cast(prev):
                return None
            if not (self._is_name(open_ - 1) or self.code[open_ - 1].text == ')'):
                return None
            return open_, prev, False
        if self.code[prev].text == ';':
            j = prev
            while j > 0:
                j -= 1
                text = self.code[j].text
                if text in ('{', '}', '='):
                    return None
                if text == ')' and self.paren_depth[j] == 0 and j + 1 < body \
                        and self.code[j + 1].kind == IDENTIFIER:
                    open_ = self.match.get(j)
                    if open_ is None or open_ == 0 or not self._is_name(open_ - 1):
                        return None
                    return open_, j, True
        return None

    def _function_spans(self) -> List[Tuple[int, int, int, bool]]:
        """(header 起點, body '{', body '}', 是否 K&R)"""
        if self._functions is None:
            spans = []
            for i, token in enumerate(self.code):
                if token.text != '{' or self.brace_depth[i] != 0 or i not in self.match:
                    continue
                header = self._function_header(i)
                if header is None:
                    continue
                open_, _, knr = header
                hs = open_
                while hs > 0 and self.code[hs - 1].text not in (';', '}') and self.brace_depth[hs - 1] == 0:
                    hs -= 1
                spans.append((hs, i, self.match[i], knr))
            self._functions = spans
        return self._functions

    def _return_class(self, hs: int, body: int, knr: bool) -> Tuple[str, ReturnClass]:
        name_idx = None
        for q in range(hs, body):
            if self._is_name(q) and q + 1 < body and self.code[q + 1].text == '(' \
                    and self.paren_depth[q] == 0:
                name_idx = q
                break
        if name_idx is None:
            return '', ReturnClass.OTHER
        name = self.code[name_idx].text
        if knr or _ALL_CAPS.match(name):
            return name, ReturnClass.OTHER

        leading = [t.text for t in self.code[hs:name_idx]]
        close = self.match.get(name_idx + 1)
        if '*' in leading or (close is not None and close + 1 < body and self.code[close + 1].text == '('):
            return name, ReturnClass.POINTER
        if 'enum' in leading:
            return name, ReturnClass.ENUM_LIKE
        core = [t for t in leading if t not in STORAGE and t not in QUALIFIERS]
        if core == ['void']:
            return name, ReturnClass.VOID
        if core and all(t in INTEGER_TYPES or _INTEGER_TYPEDEF.match(t) for t in core):
            return name, ReturnClass.INTEGER
        return name, ReturnClass.OTHER

    def _return_value(self, r: int, semi: int) -> str:
        value = self.code[r + 1:semi]
        texts = [t.text for t in value]
        if not value:
            return ''
        if len(value) == 1 and (value[0].kind in (IDENTIFIER, NUMBER, CHAR)):
            return texts[0]
        if len(value) == 2 and texts[0] == '-' and value[1].kind == NUMBER:
            return '-' + texts[1]
        if len(value) == 3 and texts[0] == '(' and texts[2] == ')' and value[1].kind in (IDENTIFIER, NUMBER):
            return texts[1]
        return 'complex'

    def function_at(self, offset: int) -> Optional[FunctionContext]:
        for hs, body, end, knr in self._function_spans():
            if not (self.code[body].start <= offset < self.code[end].end):
                continue
            name, return_class = self._return_class(hs, body, knr)
            returns: List[ReturnRecord] = []
            for r in range(body + 1, end):
                if self.code[r].text != 'return':
                    continue
                semi = r + 1
                while semi < end and not (self.code[semi].text == ';'
                                          and self.paren_depth[semi] == self.paren_depth[r]):
                    semi += 1
                returns.append(ReturnRecord(
                    byte_range=(self.code[r].start, self.code[min(semi, end)].end),
                    value=self._return_value(r, semi),
                ))
            if returns:
                returns[-1].is_final = True
            return FunctionContext(
                name=name,
                return_class=return_class,
                body_range=(self.code[body].start, self.code[end].end),
                returns=returns,
            )
        return None

    # ------------------------------------------------------------------
    # 值類別
    # ------------------------------------------------------------------

    def value_category(self, a: int, b: int) -> ValueCategory:
        """判斷 token 範圍 [a, b) 是否被當作左值使用"""
        nxt = self.code[b].text if b < len(self.code) else ''
        prev = self.code[a - 1].text if a > 0 else ''
        prev_unary = a > 0 and (a == 1 or not self._ends_operand(a - 2))
        if nxt in ('++', '--'):
            lvalue_use = True
        elif prev in ('&', '++', '--') and prev_unary:
            lvalue_use = True
        else:
            # *p = x 的指派對象是 *p，不是 p
            lvalue_use = nxt in ASSIGN_OPS and not (prev == '*' and prev_unary) and prev not in ('.', '->')
        if not lvalue_use:
            return ValueCategory.RVALUE

        if b - a == 1 and self._is_name(a) and self._declared_register(a, self.code[a].text):
            return ValueCategory.NON_ADDRESSABLE
        if b - a >= 3 and self.code[b - 2].text in ('.', '->') and self._is_bitfield(self.code[b - 1].text):
            return ValueCategory.NON_ADDRESSABLE
        first = self.code[a]
        if self._is_name(a) or first.text == '(':
            return ValueCategory.ADDRESSABLE
        return ValueCategory.NON_ADDRESSABLE

    def token_range(self, byte_range: ByteRange) -> Tuple[int, int]:
        start, end = byte_range
        a = self.sf.code_index_at(start)
        b = a
        while b < len(self.code) and self.code[b].end <= end:
            b += 1
        return a, b

    # ------------------------------------------------------------------
    # 各規則的定位
    # ------------------------------------------------------------------

    def locate(self, alert: Alert) -> RepairSite:
        guideline = alert.guideline
        if guideline == 'EXP34-C':
            return self._locate_null_deref(alert)
        if guideline == 'EXP33-C':
            return self._locate_uninit(alert)
        if guideline == 'MSC12-C':
            return self._locate_dead_code(alert)
        raise SiteError('unsupported guideline')

    def _locate_null_deref(self, alert: Alert) -> RepairSite:
        offset, indices = self._anchor(alert)
        hint = variable_hint(alert)
        line_span = self.sf.line_span(alert.line)

        statements = []
        for i in indices:
            bounds = self.statement_bounds(i)
            if bounds not in statements:
                statements.append(bounds)
        candidates = []
        owner = {}
        for s, e in statements:
            for c in self._deref_candidates(s, e):
                if c not in owner:
                    owner[c] = (s, e)
                    candidates.append(c)
        on_line = [c for c in candidates if line_span[0] <= self.code[c[0]].start <= line_span[1]]
        candidates = on_line or candidates
        if not candidates:
            if self._in_macro_call(indices):
                raise SiteError('macro-obscured site')
            raise SiteError('unresolvable site')

        a, b = self._pick(candidates, offset, hint)
        s, e = owner[(a, b)]
        target = self._slice(a, b)
        site = RepairSite(
            alert=alert,
            guideline='EXP34-C',
            stmt_range=self._byte_range(s, e),
            expr_range=self._byte_range(a, b),
            variable=hint or target,
        )

        first = self.code[a]
        if first.text == '&' and b - a > 1:
            site.dismissal = 'address-of'
        elif all(t.kind == STRING for t in self.code[a:b]):
            site.dismissal = 'string literal'
        elif b - a == 1 and self._is_name(a):
            if self._declared_array(a, first.text):
                site.dismissal = 'array name'
            elif self._is_function_name(first.text) and not self._declared_local(a, first.text):
                site.dismissal = 'function name'
        site.value_category = self.value_category(a, b)
        return site

    def _declared_local(self, use: int, name: str) -> bool:
        try:
            self._find_declaration(use, name)
        except SiteError as e:
            return e.reason == 'parameter declaration'
        return True

    def _locate_uninit(self, alert: Alert) -> RepairSite:
        offset, indices = self._anchor(alert)
        hint = variable_hint(alert)

        use = None
        if hint:
            named = [i for i in indices if self.code[i].text == hint and self._is_name(i)]
            if named:
                if offset is None:
                    use = named[0]
                else:
                    use = min(named, key=lambda i: (abs(self.code[i].start - offset), i))
        if use is None and offset is not None:
            i = self.sf.code_index_at(offset)
            if i < len(self.code) and self._is_name(i):
                use = i
        if use is None:
            raise SiteError('unresolvable site')

        name = self.code[use].text
        st = self._declaration_at(use)
        if st is not None:
            # 警告直接指向宣告子
            if self.brace_depth[use] == 0:
                raise SiteError('file-scope declaration')
            name_idx = use
        else:
            name_idx, st = self._find_declaration(use, name)
        specifiers = [self.code[q].text for q in range(st, name_idx)]
        if 'extern' in specifiers:
            raise SiteError('extern declaration')
        if 'typedef' in specifiers:
            raise SiteError('no declaration')

        end = name_idx + 1
        if end < len(self.code) and self.code[end].text in ('(', ')'):
            raise SiteError('function declarator')
        while end < len(self.code) and self.code[end].text == '[' and end in self.match:
            end = self.match[end] + 1

        s, e = self.statement_bounds(use)
        decl_range = (self.code[name_idx].start, self.code[end - 1].end)
        return RepairSite(
            alert=alert,
            guideline='EXP33-C',
            stmt_range=self._byte_range(s, e),
            expr_range=(self.code[use].start, self.code[use].end),
            decl_range=decl_range,
            variable=name,
            edit_range=(decl_range[1], decl_range[1]),
        )

    def zero_value(self, decl_range: ByteRange) -> str:
        """宣告子對應型別的零值"""
        a, b = self.token_range(decl_range)
        if b > a + 1 and self.code[a + 1].text == '[':
            return '{0}'
        q = a - 1
        while q >= 0 and self.code[q].text in QUALIFIERS:
            q -= 1
        if q >= 0 and self.code[q].text == '*':
            return '0'

        # 宣告開頭的型別指定詞；多宣告子時去掉第一個宣告子名稱
        st, _ = self._decl_statement_start(a)
        run = []
        q = st
        while q < a and self.code[q].kind == IDENTIFIER:
            run.append(self.code[q].text)
            q += 1
        if q < a and self.code[q].text != '*' and len(run) > 1:
            run = run[:-1]
        core = [t for t in run if t not in STORAGE and t not in QUALIFIERS]
        if any(t in TAGS for t in core):
            return '0' if 'enum' in core else '{0}'
        if 'float' in core:
            return '0.0f'
        if 'double' in core:
            return '0.0'
        if core and all(t in INTEGER_TYPES or _INTEGER_TYPEDEF.match(t) for t in core):
            return '0'
        return '{0}'

    def _locate_dead_code(self, alert: Alert) -> RepairSite:
        hint = variable_hint(alert)
        label_alert = bool(LABEL_CHECKERS.search(alert.checker_id) or LABEL_CHECKERS.search(alert.message))
        try:
            _, indices = self._anchor(alert)
        except SiteError as e:
            # 刪掉標籤後整行可能只剩空白
            if not (label_alert and e.reason == 'unresolvable site' and self.sf.line_span(alert.line)):
                raise
            indices = []

        # (b) 未使用的標籤：刪除「名稱 :」與同一行後面的空白
        for i in indices:
            if not self._is_name(i) or i + 1 >= len(self.code) or self.code[i + 1].text != ':':
                continue
            if hint and self.code[i].text != hint:
                continue
            if i > 0 and self.code[i - 1].text not in (';', '{', '}', ':'):
                continue
            colon_end = self.code[i + 1].end
            end = colon_end
            while end < len(self.text) and self.text[end] in ' \t':
                end += 1
            stmt_end = colon_end
            if i + 2 < len(self.code):
                stmt_end = max(stmt_end, self._byte_range(*self.statement_bounds(i + 2))[1])
            return RepairSite(
                alert=alert,
                guideline='MSC12-C',
                stmt_range=(self.code[i].start, stmt_end),
                expr_range=(self.code[i].start, colon_end),
                variable=self.code[i].text,
                subcategory='label',
                edit_range=(self.code[i].start, end),
            )
        if label_alert:
            # 已刪除的標籤只會留下空行或空敘述
            line_start, line_end = self.sf.line_span(alert.line)
            if not hint or any(self.code[i].text != ';' for i in indices) \
                    or self._label_defined(line_start, hint):
                raise SiteError('unresolvable site')
            return RepairSite(alert=alert, guideline='MSC12-C', stmt_range=(line_start, line_end),
                              expr_range=(line_start, line_start), variable=hint,
                              subcategory='label-removed')

        # (a) x = CALL;
        for i in indices:
            if not self._is_name(i) or i + 2 >= len(self.code) or self.code[i + 1].text != '=':
                continue
            if hint and self.code[i].text != hint:
                continue
            if not self._statement_start(i):
                continue
            rhs = i + 2
            if self.code[rhs].text in PREFIX_OPS or self.code[rhs].text == '(':
                continue
            end = self._operand_end(rhs, len(self.code))
            if end is None or end >= len(self.code) or self.code[end].text != ';':
                continue
            callee = self.match.get(end - 1, end) - 1
            if self.code[end - 1].text != ')' or not self._is_name(callee):
                continue
            return RepairSite(
                alert=alert,
                guideline='MSC12-C',
                stmt_range=self._byte_range(i, end + 1),
                expr_range=self._byte_range(i, end),
                variable=self.code[i].text,
                subcategory='assignment',
                edit_range=(self.code[i].start, self.code[rhs].start),
            )

        # 已經是 (void) 形式
        for i in indices:
            if [t.text for t in self.code[i:i + 3]] != ['(', 'void', ')'] or not self._statement_start(i):
                continue
            s, e = self.statement_bounds(i)
            return RepairSite(alert=alert, guideline='MSC12-C', stmt_range=self._byte_range(s, e),
                              expr_range=self._byte_range(i, e), variable=hint,
                              subcategory='void-cast')

        raise SiteError('unsupported MSC12 subcategory')

    def _label_defined(self, offset: int, name: str) -> bool:
        """offset 所在函式中是否仍有「name :」標籤；不在函式內時視為有"""
        for _, body, end, _ in self._function_spans():
            if not (self.code[body].start <= offset < self.code[end].end):
                continue
            for i in range(body + 1, end - 1):
                if self.code[i].text == name and self.code[i + 1].text == ':' \
                        and self.code[i - 1].text in (';', '{', '}', ':'):
                    return True
            return False
        return True

    def _statement_start(self, i: int) -> bool:
        """索引 i 是否位於一個運算式敘述的開頭（包含 if/else 之後）"""
        if i == 0:
            return True
        prev = self.code[i - 1].text
        if prev in (';', '{', '}', 'else', ':'):
            return True
        return prev == ')' and not self._ends_operand(i - 1)


def locate_site(source: Source, alert: Alert) -> RepairSite:
    return SiteAnalyzer(SourceFile(source)).locate(alert)


def enclosing_function(source: Source, offset: int) -> Optional[FunctionContext]:
    """offset 所在的頂層函式；位於檔案層級時回傳 None"""
    return SiteAnalyzer(SourceFile(source)).function_at(offset)


def value_category(source: Source, expr_range: ByteRange) -> ValueCategory:
    analyzer = SiteAnalyzer(SourceFile(source))
    a, b = analyzer.token_range(expr_range)
    return analyzer.value_category(a, b)


def infer_error_strategy(f: Optional[FunctionContext], config: Optional[Config] = None) -> ErrorStrategy:
    """依序套用規則 1–6，第一個符合者勝出"""
    if config is not None and config.error_handler and config.error_handler.strip():
        return ErrorStrategy('Custom', config.error_handler)
    if f is None:
        return ErrorStrategy('Abort')

    final = f.final_return
    earlier = [r for r in f.returns if not r.is_final]
    if f.return_class is ReturnClass.INTEGER and final is not None:
        for record in earlier:
            if record.simple and record.value != final.value:
                return ErrorStrategy('ReturnValue', record.value)
    if f.return_class is ReturnClass.POINTER and final is not None and final.value not in NULL_TOKENS:
        if any(r.value in NULL_TOKENS for r in earlier):
            return ErrorStrategy('ReturnNull')
    if f.return_class is ReturnClass.VOID:
        return ErrorStrategy('ReturnVoid')
    return ErrorStrategy('Abort')
