"""
評估工具
複現測試（修復前後警告集合比較）、規則頻率排名、稽核工作量估算與 SigLoC 統計
"""

import logging
import os
from collections import defaultdict
from decimal import Decimal
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import pandas as pd
from pydantic import BaseModel, Field

from alert_model import REPAIRABLE_GUIDELINES, Alert, alert_key
from config import Config
from errors import RepairToolError
from source_scanner import count_sigloc

# 設定日誌
logging.basicConfig(level=Config.LOG_LEVEL)
logger = logging.getLogger(__name__)

ALL_REPAIRABLE = 'All Our 3'
ALL_GUIDELINES = 'All Guidelines'
RECURRENCE_COLUMNS = ['guideline', 'before', 'after', 'resolved', 'persisting', 'new']
FREQUENCY_COLUMNS = ['tool', 'codebase', 'guideline', 'count', 'rank']
GROUPINGS = ('tool', 'all')


class RecurrenceReport(BaseModel):
    resolved: List[Alert] = Field(default_factory=list)
    persisting: List[Alert] = Field(default_factory=list)
    new: List[Alert] = Field(default_factory=list)
    before_total: int = 0
    after_total: int = 0
    # guideline -> {before, after, resolved, persisting, new}
    by_guideline: Dict[str, Dict[str, int]] = Field(default_factory=dict)

    def table(self) -> pd.DataFrame:
        rows = [{'guideline': g, **counts} for g, counts in self.by_guideline.items()]
        return pd.DataFrame(rows, columns=RECURRENCE_COLUMNS)


def _group_by_key(alerts: Iterable[Alert]) -> Dict[str, List[Alert]]:
    groups: Dict[str, List[Alert]] = defaultdict(list)
    for alert in alerts:
        groups[alert_key(alert)].append(alert)
    return groups


def diff_alert_sets(before: Sequence[Alert], after: Sequence[Alert]) -> RecurrenceReport:
    """以 alert_key 做多重集合比對"""
    before_groups = _group_by_key(before)
    after_groups = _group_by_key(after)

    report = RecurrenceReport(before_total=len(before), after_total=len(after))
    for key, items in before_groups.items():
        matched = min(len(items), len(after_groups.get(key, ())))
        report.persisting.extend(items[:matched])
        report.resolved.extend(items[matched:])
    for key, items in after_groups.items():
        matched = min(len(before_groups.get(key, ())), len(items))
        report.new.extend(items[matched:])

    def rollup(pick) -> Dict[str, int]:
        return {
            'before': sum(1 for a in before if pick(a)),
            'after': sum(1 for a in after if pick(a)),
            'resolved': sum(1 for a in report.resolved if pick(a)),
            'persisting': sum(1 for a in report.persisting if pick(a)),
            'new': sum(1 for a in report.new if pick(a)),
        }

    guidelines = sorted({a.guideline for a in list(before) + list(after) if a.guideline})
    for guideline in guidelines:
        report.by_guideline[guideline] = rollup(lambda a, g=guideline: a.guideline == g)
    report.by_guideline[ALL_REPAIRABLE] = rollup(lambda a: a.guideline in REPAIRABLE_GUIDELINES)
    # All Guidelines 也包含未對應的警告
    report.by_guideline[ALL_GUIDELINES] = rollup(lambda a: True)
    return report


def recurrence_csv(report: RecurrenceReport) -> str:
    return report.table().to_csv(index=False, lineterminator='\n')


def format_recurrence(report: RecurrenceReport) -> str:
    table = report.table()
    if table.empty:
        return 'No alerts.\n'
    return table.to_string(index=False) + '\n'


def repair_rate_table(report: RecurrenceReport) -> pd.DataFrame:
    """每條規則「解決數 / 修復前數量 (百分比)」"""
    rows = []
    for guideline, counts in report.by_guideline.items():
        before = counts['before']
        pct = 100.0 * counts['resolved'] / before if before else 0.0
        rows.append({
            'guideline': guideline,
            'resolved': counts['resolved'],
            'before': before,
            'rate': f"{counts['resolved']} / {before} ({pct:.1f}%)",
        })
    return pd.DataFrame(rows, columns=['guideline', 'resolved', 'before', 'rate'])


def unexplained_delta(report: RecurrenceReport, repaired: int) -> int:
    """消失但沒有被明確修復的警告數（解決數減去 Repaired 數）"""
    return len(report.resolved) - repaired


class FrequencyRow(BaseModel):
    tool: str
    codebase: str
    guideline: str
    count: int
    rank: int


class FrequencyReport(BaseModel):
    rows: List[FrequencyRow] = Field(default_factory=list)
    # 依 (tool, codebase) 分組的統計
    totals: Dict[str, int] = Field(default_factory=dict)
    distinct: Dict[str, int] = Field(default_factory=dict)
    unmapped: Dict[str, int] = Field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.totals.values())

    def ranking(self, tool: Optional[str] = None) -> List[FrequencyRow]:
        return [r for r in self.rows if tool is None or r.tool == tool]

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.model_dump() for r in self.rows], columns=FREQUENCY_COLUMNS)


def frequency_report(alerts: Sequence[Alert], grouping: str = 'tool', codebase: str = '') -> FrequencyReport:
    """依規則計數並排名：數量遞減，同數量依規則編號字母順序"""
    if grouping not in GROUPINGS:
        raise RepairToolError(f"未知的分組方式: {grouping}（可用: {', '.join(GROUPINGS)}）")

    report = FrequencyReport()
    if not alerts:
        return report

    df = pd.DataFrame(
        [{'tool': a.tool if grouping == 'tool' else 'all', 'guideline': a.guideline} for a in alerts],
        columns=['tool', 'guideline'],
    )
    for tool, group in df.groupby('tool', sort=True):
        mapped = group.dropna(subset=['guideline'])
        counts = mapped.groupby('guideline').size().reset_index(name='count')
        counts = counts.sort_values(['count', 'guideline'], ascending=[False, True], kind='mergesort')
        for rank, row in enumerate(counts.to_dict('records'), 1):
            report.rows.append(FrequencyRow(tool=tool, codebase=codebase, guideline=row['guideline'],
                                            count=int(row['count']), rank=rank))
        label = f"{tool}/{codebase}" if codebase else tool
        report.totals[label] = len(group)
        report.distinct[label] = len(counts)
        report.unmapped[label] = len(group) - len(mapped)
    return report


def frequency_csv(report: FrequencyReport) -> str:
    return report.frame().to_csv(index=False, lineterminator='\n')


def format_frequency(report: FrequencyReport) -> str:
    if not report.rows and not report.totals:
        return 'Total: 0\n'
    lines = []
    frame = report.frame()
    for tool, group in frame.groupby('tool', sort=True):
        lines.append(f"== {tool} ==")
        lines.append(group[['rank', 'guideline', 'count']].to_string(index=False))
    for label in report.totals:
        lines.append(f"{label}: Total {report.totals[label]}, distinct guidelines {report.distinct[label]}, "
                     f"unmapped {report.unmapped[label]}")
    return '\n'.join(lines) + '\n'


def coverage_projection(counts: Dict[str, int], guidelines: Iterable[str], repair_rate: float = 0.8,
                        total: Optional[int] = None) -> float:
    """若 guidelines 的警告有 repair_rate 比例被修復，佔全部警告的比例"""
    total = sum(counts.values()) if total is None else total
    if total <= 0:
        return 0.0
    covered = sum(counts.get(g, 0) for g in set(guidelines))
    return covered * repair_rate / total


class EffortParams(BaseModel):
    """稽核與修正的工作量參數（秒）"""

    audit_seconds_per_alert: float = Field(117, gt=0)
    fix_fraction: float = Field(0.32, ge=0, le=1)
    fix_seconds_per_alert: float = Field(117, gt=0)
    alerts_per_ksigloc: float = Field(364.5, gt=0)
    person_year_seconds: float = Field(31_536_000, gt=0)


class EffortEstimate(BaseModel):
    sec_per_alert: float
    sec_per_ksigloc: float
    person_years: float
    ksigloc: float


def estimate_effort(p: Optional[EffortParams] = None, ksigloc: float = 0.0) -> EffortEstimate:
    """以十進位運算避免 154.44 之類的值出現浮點誤差"""
    p = p or EffortParams()
    if ksigloc < 0:
        raise ValueError(f"ksigloc 不可為負數: {ksigloc}")

    def d(value: float) -> Decimal:
        return Decimal(str(value))

    sec_per_alert = d(p.audit_seconds_per_alert) + d(p.fix_fraction) * d(p.fix_seconds_per_alert)
    sec_per_ksigloc = sec_per_alert * d(p.alerts_per_ksigloc)
    person_years = d(ksigloc) * sec_per_ksigloc / d(p.person_year_seconds)
    return EffortEstimate(
        sec_per_alert=float(sec_per_alert),
        sec_per_ksigloc=float(sec_per_ksigloc),
        person_years=float(person_years),
        ksigloc=ksigloc,
    )


def format_effort(estimate: EffortEstimate) -> str:
    return (
        f"sec/alert:    {estimate.sec_per_alert:.2f}\n"
        f"sec/kSigLoC:  {estimate.sec_per_ksigloc:,.2f} (~{round(estimate.sec_per_ksigloc):,})\n"
        f"kSigLoC:      {estimate.ksigloc:,.3f}\n"
        f"person-years: {estimate.person_years:.2f}\n"
    )


class SigLocReport(BaseModel):
    files: Dict[str, int] = Field(default_factory=dict)
    skipped: List[Tuple[str, str]] = Field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(self.files.values())

    @property
    def ksigloc(self) -> float:
        return self.total / 1000.0


def sigloc_report(root: str, extensions: Sequence[str] = ('.c', '.h')) -> SigLocReport:
    """加總 root 底下符合副檔名的檔案 SigLoC"""
    if not os.path.isdir(root):
        raise RepairToolError(f"無法讀取根目錄: {root}")

    report = SigLocReport()
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in sorted(filenames):
            if not name.endswith(tuple(extensions)):
                continue
            full = os.path.join(dirpath, name)
            rel = os.path.relpath(full, root).replace(os.sep, '/')
            try:
                with open(full, 'rb') as f:
                    report.files[rel] = count_sigloc(f.read())
            except OSError as e:
                logger.warning(f"無法讀取 {rel}: {e}")
                report.skipped.append((rel, str(e)))
            except RepairToolError as e:
                logger.warning(f"無法掃描 {rel}: {e}")
                report.skipped.append((rel, str(e)))
    logger.info(f"SigLoC: {len(report.files)} 個檔案，共 {report.total} 行")
    return report


def format_sigloc(report: SigLocReport) -> str:
    lines = [f"{count:8d}  {path}" for path, count in report.files.items()]
    lines.append(f"{report.total:8d}  total")
    for path, reason in report.skipped:
        lines.append(f"skipped {path}: {reason}")
    return '\n'.join(lines) + '\n'
