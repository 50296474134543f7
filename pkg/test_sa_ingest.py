#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
測試靜態分析工具輸出解析
"""

import os
import random
import string

import pytest

from alert_model import TOOLS, Alert, builtin_mapping, format_generic
from errors import IngestError
from sa_ingest import (dedupe_alerts, ingest_file, ingest_many, parse_alerts, parse_clang_tidy,
                       parse_cppcheck_xml, parse_generic)

FIXTURES = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'fixtures')


def _read(name: str) -> bytes:
    with open(os.path.join(FIXTURES, name), 'rb') as f:
        return f.read()


def test_cppcheck_xml_golden():
    """Cppcheck XML 範例逐欄位比對"""
    report = parse_cppcheck_xml(_read('cppcheck_sample.xml'), root='/work/proj')
    assert report.alerts == [
        Alert(tool='cppcheck', checker_id='nullPointer', file='src/list.c', line=42, column=12,
              message='Null pointer dereference: node', cwe=476, severity='error'),
        Alert(tool='cppcheck', checker_id='uninitvar', file='src/util.c', line=17, column=9,
              message='Uninitialized variable: count', cwe=457, severity='error'),
        Alert(tool='cppcheck', checker_id='unreadVariable', file='src/main.c', line=8, column=7,
              message="Variable 'rc' is assigned a value that is never used.", cwe=563, severity='style'),
        Alert(tool='cppcheck', checker_id='unusedLabel', file='src/main.c', line=30, column=None,
              message="Label 'done' is not used.", cwe=398, severity='style'),
    ]
    # 沒有 <location> 的 missingIncludeSystem 被略過並記錄
    assert report.skipped_lines == 1
    assert len(report.parse_notes) == 1
    assert 'missingIncludeSystem' in report.parse_notes[0][0]


def test_cppcheck_xml_version1_and_errors():
    v1 = b'<results><error file="a.c" line="4" id="uninitvar" severity="error" msg="Uninitialized variable: x"/></results>'
    report = parse_cppcheck_xml(v1)
    assert [(a.file, a.line, a.checker_id) for a in report.alerts] == [('a.c', 4, 'uninitvar')]

    assert parse_cppcheck_xml(b'').alerts == []

    with pytest.raises(IngestError) as info:
        parse_cppcheck_xml(b'<results><errors><error id="x">')
    assert info.value.offset is not None


def test_clang_tidy_golden():
    """clang-tidy 輸出：說明行、插入符號行與 note 都被略過"""
    report = parse_clang_tidy(_read('clang_tidy_sample.log'), root='/work/proj')
    assert report.alerts == [
        Alert(tool='clang-tidy', checker_id='clang-analyzer-core.NullDereference', file='src/x.c', line=12,
              column=9, message='Dereference of null pointer', severity='warning'),
        Alert(tool='clang-tidy', checker_id='clang-analyzer-deadcode.DeadStores', file='src/y.c', line=30,
              column=15, message="Value stored to 'rc' is never read", severity='warning'),
        Alert(tool='clang-tidy', checker_id='clang-diagnostic-error', file='src/y.c', line=41, column=3,
              message="use of undeclared identifier 'foo'", severity='error'),
    ]
    assert report.skipped_lines == 6


def test_clang_tidy_check_names():
    """多個 check 時取第一個非停用的；沒有 check 時為 unknown"""
    text = ('a.c:1:2: warning: first [-Wunused,bugprone-foo]\n'
            'a.c:3:4: warning: no bracket here\n')
    report = parse_clang_tidy(text)
    assert [a.checker_id for a in report.alerts] == ['bugprone-foo', 'unknown']
    assert report.alerts[1].message == 'no bracket here'


def test_generic_format():
    text = (
        'cppcheck|nullPointer|src/a.c|3|5|msg with | pipe\n'
        '\n'
        'generic|EXP34-C|src/b.c|9||no column\n'
        'splint|x|src/c.c|1|1|unknown tool\n'
        'cppcheck|x|src/c.c|zero|1|bad line\n'
        'too|few|fields\n'
    )
    report = parse_generic(text)
    assert [(a.tool, a.file, a.line, a.column, a.message) for a in report.alerts] == [
        ('cppcheck', 'src/a.c', 3, 5, 'msg with | pipe'),
        ('generic', 'src/b.c', 9, None, 'no column'),
    ]
    assert report.skipped_lines == 3
    assert [locus for locus, _ in report.parse_notes] == ['line 4', 'line 5', 'line 6']


def test_generic_round_trip():
    """1000 筆隨機警告經 format_generic / parse_generic 不失真"""
    rng = random.Random(20240501)
    name_chars = string.ascii_letters + string.digits + '_-.'
    message_chars = string.ascii_letters + string.digits + " |:'()[]*&-_.,;=<>!?"

    def word(chars: str, low: int, high: int) -> str:
        return ''.join(rng.choice(chars) for _ in range(rng.randint(low, high)))

    alerts = []
    for _ in range(1000):
        parts = [word(string.ascii_lowercase, 1, 8) for _ in range(rng.randint(1, 3))]
        alerts.append(Alert(
            tool=rng.choice(TOOLS),
            checker_id=word(name_chars, 1, 30),
            file='/'.join(parts) + rng.choice(['.c', '.h']),
            line=rng.randint(1, 100000),
            column=rng.choice([None, rng.randint(1, 300)]),
            message=word(message_chars, 0, 80),
        ))
    report = parse_generic(format_generic(alerts))
    assert report.skipped_lines == 0
    assert report.alerts == alerts


def test_parse_alerts_dispatch():
    assert len(parse_alerts(_read('clang_tidy_sample.log'), 'clang-tidy').alerts) == 3
    with pytest.raises(IngestError):
        parse_alerts(b'', 'sarif')


def test_ingest_file_and_many():
    """多個輸入依參數順序合併並套用對照表"""
    xml = os.path.join(FIXTURES, 'cppcheck_sample.xml')
    log = os.path.join(FIXTURES, 'clang_tidy_sample.log')
    report = ingest_many([('clang-tidy', log), ('cppcheck-xml', xml)], builtin_mapping(),
                         root='/work/proj', workers=4)
    assert [a.tool for a in report.alerts] == ['clang-tidy'] * 3 + ['cppcheck'] * 4
    assert [a.guideline for a in report.alerts] == [
        'EXP34-C', 'MSC12-C', None, 'EXP34-C', 'EXP33-C', 'MSC12-C', 'MSC12-C',
    ]
    assert report.skipped_lines == 7
    assert report.parse_notes[0][0].startswith(xml)

    with pytest.raises(IngestError):
        ingest_file(os.path.join(FIXTURES, 'missing.xml'), 'cppcheck-xml')
    with pytest.raises(IngestError):
        ingest_file(xml, 'pdf')


def test_dedupe_alerts():
    """相同 alert_key 只保留第一筆"""
    report = parse_generic(
        'cppcheck|nullPointer|a.c|3|5|first\n'
        'clang-tidy|clang-analyzer-core.NullDereference|a.c|3|9|second\n'
        'cppcheck|nullPointer|a.c|4|5|third\n'
    )
    alerts = [a.model_copy(update={'guideline': 'EXP34-C'}) for a in report.alerts]
    assert [a.message for a in dedupe_alerts(alerts)] == ['first', 'third']
    # 未對應時 checker 不同就不算重複
    assert len(dedupe_alerts(report.alerts)) == 3


def main():
    """主測試函數"""
    print("開始測試工具輸出解析...\n")
    test_cppcheck_xml_golden()
    test_cppcheck_xml_version1_and_errors()
    test_clang_tidy_golden()
    test_clang_tidy_check_names()
    test_generic_format()
    test_generic_round_trip()
    test_parse_alerts_dispatch()
    test_ingest_file_and_many()
    test_dedupe_alerts()
    print("✅ 所有測試完成！")


if __name__ == "__main__":
    main()
