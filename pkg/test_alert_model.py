#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
測試警告資料模型與 checker 對照表
"""

import os

import pytest
from pydantic import ValidationError

from alert_model import (BUILTIN_GUIDELINES, REPAIRABLE_GUIDELINES, Alert, alert_key, builtin_mapping,
                         format_generic, load_mapping, map_alert, map_alerts, variable_hint)
from errors import MappingError

FIXTURES = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'fixtures')


def _alert(**kwargs) -> Alert:
    values = dict(tool='cppcheck', checker_id='nullPointer', file='src/a.c', line=3, column=5)
    values.update(kwargs)
    return Alert(**values)


def test_builtin_mapping():
    """內建對照表涵蓋三條可修復規則"""
    mapping = builtin_mapping()
    assert mapping.lookup('cppcheck', 'nullPointer') == ('EXP34-C', 476)
    assert mapping.lookup('cppcheck', 'uninitvar') == ('EXP33-C', 457)
    assert mapping.lookup('clang-tidy', 'clang-analyzer-deadcode.DeadStores')[0] == 'MSC12-C'
    assert mapping.lookup('rosecheckers', 'EXP34-C') == ('EXP34-C', 476)
    assert mapping.lookup('cppcheck', 'noSuchChecker') is None
    assert len(mapping) > 0
    assert load_mapping('builtin') == mapping


def test_guideline_table():
    """只有 EXP34-C、EXP33-C、MSC12-C 標記為可修復"""
    repairable = {gid for gid, info in BUILTIN_GUIDELINES.items() if info.repairable}
    assert repairable == REPAIRABLE_GUIDELINES
    for gid in ('INT31-C', 'INT13-C', 'EXP00-C', 'PRE03-C', 'DCL00-C', 'EXP12-C', 'MSC13-C', 'DCL19-C'):
        assert gid in BUILTIN_GUIDELINES
    # 對照表會產生的規則都要有資訊
    for gid, _ in builtin_mapping().entries.values():
        assert builtin_mapping().guideline(gid) is not None


def test_load_mapping_overrides():
    """使用者 TSV 覆寫並擴充內建項目"""
    mapping = load_mapping(os.path.join(FIXTURES, 'mapping_sample.tsv'))
    assert mapping.lookup('cppcheck', 'uninitvar') == ('EXP33-C', 457)
    assert mapping.lookup('cppcheck', 'myNullCheck') == ('EXP34-C', 476)
    assert mapping.lookup('generic', 'LEGACY-NULL') == ('EXP34-C', None)
    # 內建項目仍然存在
    assert mapping.lookup('cppcheck', 'nullPointer') == ('EXP34-C', 476)
    assert len(mapping) == len(builtin_mapping()) + 2


def test_load_mapping_errors():
    """格式錯誤的對照表回報行號"""
    with pytest.raises(MappingError) as info:
        load_mapping(os.path.join(FIXTURES, 'mapping_bad.tsv'))
    assert info.value.line == 2

    with pytest.raises(MappingError):
        load_mapping(os.path.join(FIXTURES, 'no_such_mapping.tsv'))


def test_load_mapping_rejects_bad_fields(tmp_path):
    cases = [
        'lint\tfoo\tEXP34-C\n',
        'cppcheck\t\tEXP34-C\n',
        'cppcheck\tfoo\tEXP34\n',
        'cppcheck\tfoo\tEXP34-C\tCWE-x\n',
    ]
    for i, content in enumerate(cases):
        path = tmp_path / f"bad{i}.tsv"
        path.write_text(content, encoding='utf-8')
        with pytest.raises(MappingError) as info:
            load_mapping(str(path))
        assert info.value.line == 1


def test_map_alert():
    """對照表補上 guideline；找不到時維持 unmapped"""
    mapping = builtin_mapping()
    mapped = map_alert(_alert(cwe=123), mapping)
    assert mapped.guideline == 'EXP34-C'
    assert mapped.cwe == 476

    unknown = map_alert(_alert(checker_id='fancyChecker', cwe=9), mapping)
    assert unknown.guideline is None
    assert unknown.cwe == 9

    assert [a.guideline for a in map_alerts([_alert(), _alert(checker_id='x')], mapping)] == ['EXP34-C', None]


def test_alert_validation():
    """路徑正規化、行號與規則編號檢查"""
    assert _alert(file='./src//a.c').file == 'src/a.c'
    assert _alert(file='src\\win\\b.c').file == 'src/win/b.c'
    with pytest.raises(ValidationError):
        _alert(file='../outside.c')
    with pytest.raises(ValidationError):
        _alert(line=0)
    with pytest.raises(ValidationError):
        _alert(column=0)
    with pytest.raises(ValidationError):
        _alert(tool='splint')
    with pytest.raises(ValidationError):
        _alert(guideline='EXP34')


def test_alert_key():
    """alert_key 不含欄位；未對應時使用 checker"""
    a = _alert(column=5, guideline='EXP34-C')
    b = _alert(column=17, guideline='EXP34-C', tool='clang-tidy', checker_id='clang-analyzer-core.NullDereference')
    assert alert_key(a) == alert_key(b) == 'src/a.c|3|EXP34-C'
    assert alert_key(_alert(checker_id='oddOne')) == 'src/a.c|3|oddOne'


def test_variable_hint():
    assert variable_hint(_alert(message="Possible null pointer dereference: out")) == 'out'
    assert variable_hint(_alert(message="Uninitialized variable: flag")) == 'flag'
    assert variable_hint(_alert(message="Label 'done' is not used.")) == 'done'
    assert variable_hint(_alert(message="Dereference of null pointer (loaded from variable 'counter')")) == 'counter'
    assert variable_hint(_alert(message="Array access results in a null pointer dereference")) is None
    # 成員名稱不是被解參考的指標
    assert variable_hint(_alert(message="Access to field 'name' results in a dereference of a null pointer")) is None
    assert variable_hint(_alert(message="Null pointer passed to 1st parameter expecting 'nonnull'")) == 'nonnull'


def test_format_generic():
    """換行變成空白，管線符號保留在最後一欄"""
    text = format_generic([
        _alert(message='a | b'),
        _alert(column=None, message='line one\nline two'),
    ])
    assert text == (
        'cppcheck|nullPointer|src/a.c|3|5|a | b\n'
        'cppcheck|nullPointer|src/a.c|3||line one line two\n'
    )
    assert format_generic([]) == ''


def main():
    """主測試函數"""
    print("開始測試警告資料模型...\n")
    test_builtin_mapping()
    test_guideline_table()
    test_load_mapping_overrides()
    test_load_mapping_errors()
    test_map_alert()
    test_alert_validation()
    test_alert_key()
    test_variable_hint()
    test_format_generic()
    print("✅ 所有測試完成！（需要 tmp_path 的測試請用 pytest 執行）")


if __name__ == "__main__":
    main()
