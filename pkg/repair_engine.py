"""
修復引擎
對 EXP34-C、EXP33-C、MSC12-C 產生單行修復，保證：
只改 Independent 範圍、重複執行不會再改、不拆開原本的敘述
"""

import difflib
import logging
import os
import re
import shutil
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from alert_model import REPAIRABLE_GUIDELINES, Alert, alert_key
from config import Config
from errors import DirectiveError, EditConflictError, RepairToolError, ScanError, SiteError
from site_analyzer import (ErrorStrategy, RepairSite, SiteAnalyzer, ValueCategory, infer_error_strategy,
                           ranges_overlap)
from source_scanner import (COMMENT, CONDITIONAL_OPENERS, DIRECTIVE, WHITESPACE, Source, SourceFile, as_text,
                            directive_name)

# 設定日誌
logging.basicConfig(level=Config.LOG_LEVEL)
logger = logging.getLogger(__name__)

REPAIRED = 'Repaired'
DISMISSED = 'DismissedFalsePositive'
ALREADY_REPAIRED = 'SkippedAlreadyRepaired'
DEPENDENT = 'SkippedDependent'
NOT_INDEPENDENT = 'SkippedNotIndependent'
UNSUPPORTED = 'SkippedUnsupported'
STATUSES = (REPAIRED, DISMISSED, ALREADY_REPAIRED, DEPENDENT, NOT_INDEPENDENT, UNSUPPORTED)

ACR_HEADER = (
    "#ifndef ACR_H\n"
    "#define ACR_H\n"
    "#include <stdlib.h>\n"
    "#define null_check(e, handler) (__extension__({ \\\n"
    "    __typeof__(e) acr_v_ = (e); \\\n"
    "    if (!acr_v_) { handler; abort(); } \\\n"
    "    acr_v_; }))\n"
    "#define null_check_lv(e, handler) (*(__extension__({ \\\n"
    "    __typeof__(&(e)) acr_p_ = &(e); \\\n"
    "    if (!*acr_p_) { handler; abort(); } \\\n"
    "    acr_p_; })))\n"
    "#endif\n"
)

_NULL_CHECK_CALL = re.compile(r'^null_check(?:_lv)?\s*\(')
_VOID_CAST = re.compile(r'^\(\s*void\s*\)')
_LINES = re.compile(r'[^\n]*\n|[^\n]+$')

# 可以留在 include 之前的指令
PROLOGUE_DIRECTIVES = ('include', 'define', 'undef', 'pragma')


class Edit(BaseModel):
    """單一檔案上的一段替換"""

    model_config = ConfigDict(frozen=True)

    file: str
    byte_range: Tuple[int, int]
    replacement: str
    reason: str


class RepairOutcome(BaseModel):
    alert_key: str
    alert: Alert
    status: str
    reason: Optional[str] = None
    edit: Optional[Edit] = None

    @property
    def label(self) -> str:
        return f"{self.status} ({self.reason})" if self.reason else self.status


class RepairReport(BaseModel):
    outcomes: List[RepairOutcome] = Field(default_factory=list)
    edits: Dict[str, List[Edit]] = Field(default_factory=dict)
    counts: Dict[str, Dict[str, int]] = Field(default_factory=dict)
    header_emitted: bool = False
    declined_files: List[str] = Field(default_factory=list)
    patch: str = ''
    written_files: List[str] = Field(default_factory=list)

    @property
    def repaired(self) -> int:
        return sum(1 for o in self.outcomes if o.status == REPAIRED)

    @property
    def exit_code(self) -> int:
        return 1 if self.declined_files else 0


def emit_support_header() -> str:
    """acr.h 的標準內容"""
    return ACR_HEADER


def _include_pattern(header_name: str) -> 're.Pattern':
    return re.compile(rf'^[ \t]*#[ \t]*include[ \t]*"{re.escape(header_name)}"', re.MULTILINE)


def include_line(source: Source, header_name: str = Config.HEADER_NAME) -> Optional[int]:
    """既有 #include "acr.h" 的行號（1 起算）；沒有時回傳 None"""
    text = as_text(source)
    match = _include_pattern(header_name).search(text)
    if match is None:
        return None
    return text.count('\n', 0, match.start()) + 1


def shift_past_include(alerts: Sequence[Alert], source: Source,
                       header_name: str = Config.HEADER_NAME) -> List[Alert]:
    """
    同一批警告重跑已修復的檔案時，插入的 include 讓後面的行往下移一行；
    把位於該行（含）之後的警告行號加一
    """
    line = include_line(source, header_name)
    if line is None:
        return list(alerts)
    return [a.model_copy(update={'line': a.line + 1}) if a.line >= line else a for a in alerts]


def ensure_include(source: Source, header_name: str = Config.HEADER_NAME) -> str:
    """
    在檔案開頭的前置區塊之後插入一次 #include "acr.h"
    前置區塊：註解、#include、#define / #undef / #pragma，以及只含指令的 #if...#endif 群組；
    插入點永遠在條件群組之外
    """
    text = as_text(source)
    include = f'#include "{header_name}"'
    if _include_pattern(header_name).search(text):
        return text

    position = 0
    depth = 0
    for token in SourceFile(text).tokens:
        if token.kind == WHITESPACE:
            continue
        if token.kind == COMMENT:
            if depth == 0:
                position = token.end
            continue
        if token.kind != DIRECTIVE:
            break
        name = directive_name(token)
        if name in CONDITIONAL_OPENERS:
            depth += 1
        elif name == 'endif':
            if depth == 0:
                break
            depth -= 1
            if depth == 0:
                position = token.end
        elif name in ('elif', 'else'):
            continue
        elif name in PROLOGUE_DIRECTIVES:
            if depth == 0:
                position = token.end
        else:
            break
    if position == 0:
        return f"{include}\n{text}"
    newline = text.find('\n', position)
    if newline < 0:
        return f"{text}\n{include}\n"
    return f"{text[:newline + 1]}{include}\n{text[newline + 1:]}"


def apply_edits(source: Source, edits: Iterable[Edit]) -> str:
    """由後往前套用，前面的位移保持有效"""
    text = as_text(source)
    ordered = sorted(edits, key=lambda e: (e.byte_range[0], e.byte_range[1]))
    for prev, cur in zip(ordered, ordered[1:]):
        if prev.byte_range[1] > cur.byte_range[0] or prev.byte_range == cur.byte_range:
            raise EditConflictError(f"編輯範圍重疊: {prev.byte_range} 與 {cur.byte_range} ({cur.file})")
    for edit in reversed(ordered):
        start, end = edit.byte_range
        if not 0 <= start <= end <= len(text):
            raise EditConflictError(f"編輯範圍超出檔案: {edit.byte_range} ({edit.file})")
        text = text[:start] + edit.replacement + text[end:]
    return text


def already_repaired(source: Source, site: RepairSite, analyzer: Optional[SiteAnalyzer] = None) -> bool:
    """site 是否已經修復過（重跑時不可再加一層修復）"""
    analyzer = analyzer or SiteAnalyzer(SourceFile(source))
    text = analyzer.text
    code = analyzer.code

    if site.guideline == 'EXP34-C':
        if _NULL_CHECK_CALL.match(text[site.expr_range[0]:site.expr_range[1]]):
            return True
        a, b = analyzer.token_range(site.expr_range)
        return (a >= 2 and code[a - 1].text == '(' and code[a - 2].text in ('null_check', 'null_check_lv')
                and b < len(code) and code[b].text == ',')
    if site.guideline == 'EXP33-C':
        if site.decl_range is None:
            return False
        _, b = analyzer.token_range(site.decl_range)
        return b < len(code) and code[b].text == '='
    if site.guideline == 'MSC12-C':
        if site.subcategory in ('void-cast', 'label-removed'):
            return True
        return bool(_VOID_CAST.match(text[site.stmt_range[0]:site.stmt_range[1]]))
    return False


def suppress_dependents(sites: Sequence[RepairSite]) -> Tuple[List[RepairSite], List[RepairSite]]:
    """同檔案中修復範圍重疊的警告只保留排序最前的一筆"""
    kept: List[RepairSite] = []
    suppressed: List[RepairSite] = []
    for site in sorted(sites, key=lambda s: s.alert.sort_key):
        if any(k.alert.file == site.alert.file and ranges_overlap(k.overlap_range, site.overlap_range)
               for k in kept):
            suppressed.append(site)
        else:
            kept.append(site)
    return kept, suppressed


def repair_null_deref(site: RepairSite, strategy: ErrorStrategy, text: str) -> Edit:
    start, end = site.expr_range
    macro = 'null_check_lv' if site.value_category is ValueCategory.ADDRESSABLE else 'null_check'
    return Edit(
        file=site.alert.file,
        byte_range=(start, end),
        replacement=f"{macro}({text[start:end]}, {strategy.render()})",
        reason='EXP34-C',
    )


def repair_uninit(site: RepairSite, analyzer: SiteAnalyzer) -> Edit:
    point = site.decl_range[1]
    return Edit(
        file=site.alert.file,
        byte_range=(point, point),
        replacement=f" = {analyzer.zero_value(site.decl_range)}",
        reason='EXP33-C',
    )


def repair_dead_code(site: RepairSite, config: Config) -> Edit:
    if not config.msc12_enabled:
        raise SiteError('MSC12 disabled')
    if site.subcategory == 'assignment':
        replacement = '(void) '
    elif site.subcategory == 'label':
        replacement = ''
    else:
        raise SiteError('unsupported MSC12 subcategory')
    return Edit(file=site.alert.file, byte_range=site.edit_range, replacement=replacement, reason='MSC12-C')


def _outcome(alert: Alert, status: str, reason: Optional[str] = None, edit: Optional[Edit] = None) -> RepairOutcome:
    return RepairOutcome(alert_key=alert_key(alert), alert=alert, status=status, reason=reason, edit=edit)


def repair_source(path: str, source: Source, alerts: Sequence[Alert],
                  config: Optional[Config] = None) -> Tuple[List[RepairOutcome], List[Edit], str, bool]:
    """
    修復單一檔案
    回傳 (依輸入順序的結果, 套用的編輯, 新的原始碼, 是否拒絕整個檔案)
    """
    config = config or Config()
    text = as_text(source)
    outcomes: Dict[int, RepairOutcome] = {}
    original = list(alerts)

    try:
        analyzer = SiteAnalyzer(SourceFile(text, path))
    except (ScanError, DirectiveError) as e:
        logger.warning(f"{path} 無法掃描，略過所有警告: {e}")
        return [_outcome(a, UNSUPPORTED, f"scan error: {e}") for a in alerts], [], text, True

    if config.shift_after_include:
        alerts = shift_past_include(alerts, text)
    order = sorted(range(len(alerts)), key=lambda i: alerts[i].sort_key)
    located: List[Tuple[int, RepairSite]] = []
    for i in order:
        alert = alerts[i]
        guideline = alert.guideline
        if guideline is None:
            outcomes[i] = _outcome(alert, UNSUPPORTED, 'unmapped alert')
        elif guideline not in REPAIRABLE_GUIDELINES:
            outcomes[i] = _outcome(alert, UNSUPPORTED, f"no repair template for {guideline}")
        elif guideline == 'MSC12-C' and not config.msc12_enabled:
            outcomes[i] = _outcome(alert, UNSUPPORTED, 'MSC12 disabled')
        else:
            try:
                located.append((i, analyzer.locate(alert)))
            except SiteError as e:
                outcomes[i] = _outcome(alert, UNSUPPORTED, e.reason)

    candidates: List[RepairSite] = []
    index_of: Dict[int, int] = {}
    for i, site in located:
        if already_repaired(text, site, analyzer):
            outcomes[i] = _outcome(site.alert, ALREADY_REPAIRED)
        elif site.dismissal:
            outcomes[i] = _outcome(site.alert, DISMISSED, site.dismissal)
        else:
            index_of[id(site)] = i
            candidates.append(site)

    kept, suppressed = suppress_dependents(candidates)
    for site in suppressed:
        outcomes[index_of[id(site)]] = _outcome(site.alert, DEPENDENT)

    edits: List[Edit] = []
    for site in kept:
        i = index_of[id(site)]
        if site.guideline == 'EXP33-C':
            checked = site.decl_range
        elif site.guideline == 'MSC12-C':
            checked = site.edit_range
        else:
            checked = site.expr_range
        if not analyzer.sf.is_independent(checked):
            outcomes[i] = _outcome(site.alert, NOT_INDEPENDENT)
            continue
        if site.guideline == 'EXP34-C' and site.value_category is ValueCategory.NON_ADDRESSABLE:
            outcomes[i] = _outcome(site.alert, UNSUPPORTED, 'non-addressable lvalue')
            continue
        try:
            if site.guideline == 'EXP34-C':
                strategy = infer_error_strategy(analyzer.function_at(site.expr_range[0]), config)
                edit = repair_null_deref(site, strategy, text)
            elif site.guideline == 'EXP33-C':
                edit = repair_uninit(site, analyzer)
            else:
                edit = repair_dead_code(site, config)
        except SiteError as e:
            outcomes[i] = _outcome(site.alert, UNSUPPORTED, e.reason)
            continue
        edits.append(edit)
        outcomes[i] = _outcome(site.alert, REPAIRED, edit=edit)
        logger.debug(f"{path}:{site.alert.line} {site.guideline} -> {edit.replacement!r}")

    new_text = text
    if edits:
        new_text = ensure_include(apply_edits(text, edits), Config.HEADER_NAME)
    # 結果一律回報輸入的行號
    result = [outcomes[i] if alerts[i] is original[i]
              else outcomes[i].model_copy(update={'alert': original[i], 'alert_key': alert_key(original[i])})
              for i in range(len(alerts))]
    return result, edits, new_text, False


def _split_lines(text: str) -> List[str]:
    return _LINES.findall(text)


def render_patch(path: str, old: Optional[str], new: str) -> str:
    """unified diff；old 為 None 時產生新檔案的 diff"""
    if old == new:
        return ''
    fromfile = '/dev/null' if old is None else f"a/{path}"
    lines = []
    for line in difflib.unified_diff(_split_lines(old or ''), _split_lines(new), fromfile=fromfile,
                                     tofile=f"b/{path}"):
        if line.endswith('\n'):
            lines.append(line)
        else:
            lines.append(line + '\n\\ No newline at end of file\n')
    return ''.join(lines)


def remap_alert_lines(alerts: Iterable[Alert], old: str, new: str) -> List[Alert]:
    """把舊檔案上的警告行號對應到修改後的檔案（插入 #include 會讓後面的行往下移）"""
    a, b = _split_lines(old), _split_lines(new)
    mapping: Dict[int, int] = {}
    matcher = difflib.SequenceMatcher(None, a, b, autojunk=False)
    for tag, i1, i2, j1, j2 in matcher.get_opcodes():
        for i in range(i1, i2):
            if tag in ('equal', 'replace'):
                mapping[i + 1] = j1 + min(i - i1, max(j2 - j1 - 1, 0)) + 1
            else:
                mapping[i + 1] = min(j1 + 1, max(len(b), 1))
    return [alert.model_copy(update={'line': mapping.get(alert.line, alert.line)}) for alert in alerts]


def _read(path: str) -> str:
    with open(path, 'rb') as f:
        return f.read().decode('latin-1')


def _write(path: str, text: str) -> None:
    with open(path, 'wb') as f:
        f.write(text.encode('latin-1'))


def _repair_batch(alerts: Sequence[Alert], load: Callable[[str], str], workers: int,
                  config: Config, existing_header: Optional[str]) -> Tuple[RepairReport, Dict[str, str]]:
    """依檔案分組、平行處理、依路徑順序合併；回傳報告與有變動的新原始碼"""
    by_file: Dict[str, List[int]] = defaultdict(list)
    for i, alert in enumerate(alerts):
        by_file[alert.file].append(i)
    paths = sorted(by_file)

    def work(path: str):
        file_alerts = [alerts[i] for i in by_file[path]]
        try:
            old = load(path)
        except OSError as e:
            logger.warning(f"無法讀取 {path}: {e}")
            return path, None, [_outcome(a, UNSUPPORTED, 'unreadable file') for a in file_alerts], [], None, True
        outcomes, edits, new, declined = repair_source(path, old, file_alerts, config)
        return path, old, outcomes, edits, new, declined

    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        results = list(pool.map(work, paths))

    report = RepairReport()
    merged: Dict[int, RepairOutcome] = {}
    patches: List[str] = []
    changed: Dict[str, str] = {}
    for path, old, outcomes, edits, new, declined in results:
        for i, outcome in zip(by_file[path], outcomes):
            merged[i] = outcome
        if declined:
            report.declined_files.append(path)
        if edits:
            report.edits[path] = edits
        if old is not None and new is not None and new != old:
            changed[path] = new
            patches.append(render_patch(path, old, new))

    report.outcomes = [merged[i] for i in range(len(alerts))]
    for outcome in report.outcomes:
        row = report.counts.setdefault(outcome.alert.guideline or 'unmapped', {s: 0 for s in STATUSES})
        row[outcome.status] += 1
    report.header_emitted = report.repaired > 0

    if changed and existing_header != ACR_HEADER:
        patches.append(render_patch(Config.HEADER_NAME, existing_header, ACR_HEADER))
        changed[Config.HEADER_NAME] = ACR_HEADER
    report.patch = ''.join(patches)
    return report, changed


def repair_sources(sources: Dict[str, str], alerts: Sequence[Alert],
                   config: Optional[Config] = None) -> Tuple[RepairReport, Dict[str, str]]:
    """記憶體內的修復（不碰檔案系統）；找不到的檔案視為無法讀取"""
    config = config or Config()

    def load(path: str) -> str:
        if path not in sources:
            raise FileNotFoundError(path)
        return as_text(sources[path])

    header = sources.get(Config.HEADER_NAME)
    return _repair_batch(alerts, load, config.workers, config, as_text(header) if header is not None else None)


def run_repair(root: str, alerts: Sequence[Alert], config: Optional[Config] = None) -> RepairReport:
    """整批修復 root 底下的檔案；依設定輸出 patch 或就地修改"""
    config = config or Config()
    if not os.path.isdir(root):
        raise RepairToolError(f"無法讀取根目錄: {root}")

    header_path = os.path.join(root, Config.HEADER_NAME)
    existing_header = _read(header_path) if os.path.exists(header_path) else None
    report, changed = _repair_batch(alerts, lambda path: _read(os.path.join(root, path)),
                                    config.workers, config, existing_header)

    if config.output_mode == 'in-place' and not config.check_only:
        for path, new in changed.items():
            full = os.path.join(root, path)
            if config.backup and os.path.exists(full):
                shutil.copy2(full, full + '.orig')
            _write(full, new)
            report.written_files.append(path)
        logger.info(f"已就地修改 {len(report.written_files)} 個檔案")

    logger.info(f"修復完成: {report.repaired}/{len(report.outcomes)} 筆警告已修復，"
                f"{len(report.declined_files)} 個檔案被拒絕")
    return report


def format_summary(report: RepairReport) -> str:
    """依規則列出各狀態數量，另列 SkippedUnsupported 的原因"""
    if not report.outcomes:
        return 'Repaired: 0 / 0\n'

    rows = []
    for guideline in sorted(report.counts):
        rows.append({'Guideline': guideline, **report.counts[guideline]})
    table = pd.DataFrame(rows, columns=['Guideline', *STATUSES])
    total = table[list(STATUSES)].sum()
    table = pd.concat([table, pd.DataFrame([{'Guideline': 'All Guidelines', **total.to_dict()}])],
                      ignore_index=True)
    table['Total'] = table[list(STATUSES)].sum(axis=1)

    lines = [table.to_string(index=False), '']
    for guideline in sorted(report.counts):
        row = report.counts[guideline]
        n = sum(row.values())
        lines.append(f"{guideline}: Repaired: {row[REPAIRED]} / {n} ({100.0 * row[REPAIRED] / n:.1f}%)")

    reasons: Dict[str, int] = defaultdict(int)
    for outcome in report.outcomes:
        if outcome.status == UNSUPPORTED:
            reasons[outcome.label] += 1
    for label in sorted(reasons):
        lines.append(f"{label}: {reasons[label]}")
    lines.append(f"Repaired: {report.repaired}")
    if report.declined_files:
        lines.append(f"Declined files: {', '.join(report.declined_files)}")
    return '\n'.join(lines) + '\n'


def format_outcomes(report: RepairReport) -> str:
    """--check 用：每筆警告一行"""
    return ''.join(
        f"{o.alert.file}:{o.alert.line}: {o.alert.guideline or o.alert.checker_id}: {o.label}\n"
        for o in report.outcomes
    )
