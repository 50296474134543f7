#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
API測試腳本 - 以 TestClient 測試各端點與錯誤格式
"""

import os

import pytest
from fastapi.testclient import TestClient

from api_server import app
from repair_engine import emit_support_header

FIXTURES = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'fixtures')
CORPUS = os.path.join(FIXTURES, 'corpus')


def _read(*parts: str) -> str:
    with open(os.path.join(FIXTURES, *parts), 'rb') as f:
        return f.read().decode('latin-1')


@pytest.fixture(scope='module')
def client():
    # with 區塊內才會執行 lifespan（載入對照表）
    with TestClient(app) as c:
        yield c


def _assert_envelope(response, status_code: int):
    assert response.status_code == status_code
    body = response.json()
    assert set(body) == {'error', 'status_code', 'timestamp'}
    assert body['status_code'] == status_code


def test_root_and_health(client):
    response = client.get('/')
    assert response.status_code == 200
    assert response.json()['formats'] == ['cppcheck-xml', 'clang-tidy', 'generic']

    health = client.get('/health').json()
    assert health['status'] == 'healthy'
    assert health['mapping_rows'] > 0


def test_header(client):
    response = client.get('/header')
    assert response.status_code == 200
    assert response.text == emit_support_header()


def test_ingest(client):
    response = client.post('/ingest', json={'format': 'clang-tidy', 'data': _read('clang_tidy_sample.log'),
                                            'root': '/work/proj'})
    assert response.status_code == 200
    body = response.json()
    assert [a['guideline'] for a in body['alerts']] == ['EXP34-C', 'MSC12-C', None]
    assert body['skipped_lines'] == 6
    assert body['generic'].splitlines()[0].startswith('clang-tidy|clang-analyzer-core.NullDereference|src/x.c|12|9|')


def test_repair_single_file(client):
    """只回傳 patch，不寫入任何檔案"""
    alerts = ''.join(line for line in _read('corpus', 'alerts.txt').splitlines(keepends=True)
                     if '|e34_scale.c|' in line)
    response = client.post('/repair', json={
        'data': alerts,
        'sources': {'e34_scale.c': _read('corpus', 'e34_scale.c')},
    })
    assert response.status_code == 200
    body = response.json()
    assert [(o['status'], o['replacement']) for o in body['outcomes']] == [('Repaired', 'null_check(b, abort())')]
    assert body['repaired'] == 1
    assert body['header_emitted']
    assert '--- /dev/null\n+++ b/acr.h\n' in body['patch']
    assert 'EXP34-C: Repaired: 1 / 1 (100.0%)' in body['summary']
    assert not os.path.exists(os.path.join(CORPUS, 'acr.h'))


def test_repair_custom_handler_and_msc12(client, monkeypatch):
    monkeypatch.delenv('REPAIR_MSC12', raising=False)
    source = 'int compute(int);\nint f(int n)\n{\n    int rc;\n    rc = compute(n);\n    return n;\n}\n'
    data = "cppcheck|unreadVariable|d.c|5|5|Variable 'rc' is assigned a value that is never used.\n"
    off = client.post('/repair', json={'data': data, 'sources': {'d.c': source}}).json()
    assert [(o['status'], o['reason']) for o in off['outcomes']] == [('SkippedUnsupported', 'MSC12 disabled')]
    assert off['patch'] == ''

    on = client.post('/repair', json={'data': data, 'sources': {'d.c': source}, 'msc12': True}).json()
    assert on['repaired'] == 1
    assert '-    rc = compute(n);\n+    (void) compute(n);\n' in on['patch']

    response = client.post('/repair', json={'data': data, 'sources': {'d.c': source}, 'error_handler': '  '})
    _assert_envelope(response, 400)


def test_repair_options_fall_back_to_environment(client, monkeypatch):
    """請求沒有帶 msc12 / error_handler 時沿用環境變數"""
    source = 'int compute(int);\nint f(int n)\n{\n    int rc;\n    rc = compute(n);\n    return n;\n}\n'
    data = "cppcheck|unreadVariable|d.c|5|5|Variable 'rc' is assigned a value that is never used.\n"
    monkeypatch.setenv('REPAIR_MSC12', '1')
    body = client.post('/repair', json={'data': data, 'sources': {'d.c': source}}).json()
    assert [o['status'] for o in body['outcomes']] == ['Repaired']

    # 明確的 false 仍然優先
    body = client.post('/repair', json={'data': data, 'sources': {'d.c': source}, 'msc12': False}).json()
    assert [(o['status'], o['reason']) for o in body['outcomes']] == [('SkippedUnsupported', 'MSC12 disabled')]

    monkeypatch.setenv('ACR_ERROR_HANDLER', 'exit(3);')
    body = client.post('/repair', json={
        'data': 'cppcheck|nullPointer|e34_scale.c|6|17|Possible null pointer dereference: b\n',
        'sources': {'e34_scale.c': _read('corpus', 'e34_scale.c')},
    }).json()
    assert body['outcomes'][0]['replacement'] == 'null_check(b, exit(3))'


def test_recurrence(client):
    response = client.post('/recurrence?repaired=8718', json={
        'before': _read('recurrence', 'before.txt'),
        'after': _read('recurrence', 'after.txt'),
    })
    assert response.status_code == 200
    body = response.json()
    assert (body['resolved'], body['persisting'], body['new']) == (8718, 526, 0)
    assert body['unexplained'] == 0
    assert body['by_guideline']['All Guidelines']['before'] == 9244
    rates = {row['guideline']: row['rate'] for row in body['rates']}
    assert rates['EXP34-C'] == '61 / 77 (79.2%)'
    assert body['by_guideline']['All Our 3']['persisting'] == 516


def test_frequency(client):
    response = client.post('/frequency', json={'data': _read('frequency', 'git_cppcheck.txt'), 'codebase': 'git'})
    assert response.status_code == 200
    body = response.json()
    assert body['rows'][0] == {'tool': 'cppcheck', 'codebase': 'git', 'guideline': 'MSC13-C', 'count': 228,
                               'rank': 1}
    assert body['total'] == 420
    assert body['distinct'] == {'cppcheck/git': 13}

    response = client.post('/frequency', json={'data': '', 'grouping': 'codebase'})
    _assert_envelope(response, 400)


def test_effort_and_sigloc(client):
    body = client.post('/effort', json={'ksigloc': 1957}).json()
    assert body['sec_per_alert'] == 154.44
    assert body['person_years'] == pytest.approx(3.49, abs=0.02)
    assert client.post('/effort', json={'ksigloc': 1, 'fix_fraction': 1.5}).status_code == 422

    body = client.post('/sigloc', json={'files': {
        'main.c': _read('sigloc', 'main.c'),
        'broken.c': '/* open\n',
    }}).json()
    assert body['files'] == {'main.c': 7}
    assert list(body['skipped']) == ['broken.c']
    assert body['total'] == 7


def test_error_envelopes(client):
    _assert_envelope(client.post('/ingest', json={'format': 'sarif', 'data': ''}), 400)
    _assert_envelope(client.get('/no-such-endpoint'), 404)
    assert client.post('/ingest', json={'format': 'generic'}).status_code == 422


def main():
    """主測試函數"""
    print("🧪 開始API測試...")
    with TestClient(app) as c:
        test_root_and_health(c)
        test_header(c)
        test_ingest(c)
        test_repair_single_file(c)
        with pytest.MonkeyPatch.context() as mp:
            test_repair_custom_handler_and_msc12(c, mp)
            test_repair_options_fall_back_to_environment(c, mp)
        test_recurrence(c)
        test_frequency(c)
        test_effort_and_sigloc(c)
        test_error_envelopes(c)
    print("✅ 所有測試完成！")


if __name__ == "__main__":
    main()
