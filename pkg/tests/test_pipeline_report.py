import collections

import numpy as np
import pytest

from unitnorm.core.exceptions import CorpusError
from unitnorm.pipeline.report import (
    REPORT_FIELDS, MetricsReport, read_rows, read_units, write_rows,
    write_units)


def make_report():
    report = MetricsReport()
    report.add(system='cmlm', split='test', iterations=15, omega=0.0,
               unit_bleu=12.3456789, phone_bleu=20.0, fingerprint='f1')
    report.add(system='ar', split='test', unit_bleu=10.0,
               units_per_second=123.456, fingerprint='f2')
    return report


def test_report_add():
    report = make_report()
    assert len(report) == 2
    assert list(report.rows[0]) == list(REPORT_FIELDS)
    assert report.rows[0]['acc_rec'] is None
    assert report.systems() == ['ar', 'cmlm']
    assert report.select(system='ar')[0]['fingerprint'] == 'f2'


@pytest.mark.parametrize('values, message', [
    ({'system': 'cmlm', 'split': 'test', 'fingerprint': 'f', 'bleu': 1.0},
     'Unknown report field(s) bleu'),
    ({'system': 'cmlm', 'split': 'test'}, "needs 'fingerprint'"),
    ({'split': 'test', 'fingerprint': 'f'}, "needs 'system'"),
])
def test_report_add_fail(values, message):
    with pytest.raises(ValueError) as e:
        MetricsReport().add(**values)
    assert message in str(e.value)


def test_report_csv(tmpdir):
    path = str(tmpdir.join('out', 'report.csv'))
    make_report().write_csv(path)
    lines = tmpdir.join('out', 'report.csv').read().splitlines()
    assert lines[0] == ','.join(REPORT_FIELDS)
    assert lines[1] == 'cmlm,test,15,0.0000,,,12.3457,,20.0000,,,f1'

    report = MetricsReport.read_csv(path)
    assert report.rows[1]['units_per_second'] == '123.4560'
    assert report.rows[1]['iterations'] is None


def test_report_deterministic_rows_skip_wall_clock():
    first = make_report()
    second = make_report()
    second.rows[1]['units_per_second'] = 99.0
    assert first.deterministic_rows() == second.deterministic_rows()
    assert len(first.deterministic_rows()[0]) == len(REPORT_FIELDS) - 1


def test_write_rows_sequences_and_mappings(tmpdir):
    path = str(tmpdir.join('rows.csv'))
    write_rows(path, ('a', 'b'), [(1, 0.5), {'b': None, 'a': 'x'}])
    assert read_rows(path) == [{'a': '1', 'b': '0.5000'},
                               {'a': 'x', 'b': ''}]


def test_units_file(tmpdir):
    path = str(tmpdir.join('test.units'))
    units = collections.OrderedDict([
        ('test-00001', np.array([3, 1, 4])),
        ('test-00000', np.array([], dtype=np.int64)),
    ])
    write_units(path, units)
    assert tmpdir.join('test.units').read() == 'test-00001 3 1 4\ntest-00000\n'
    restored = read_units(path)
    assert list(restored) == ['test-00001', 'test-00000']
    assert restored['test-00001'].tolist() == [3, 1, 4]
    assert restored['test-00000'].tolist() == []


def test_read_units_fail_when_malformed(tmpdir):
    path = tmpdir.join('bad.units')
    path.write('test-00000 1 2\n\ntest-00001 1 x\n')
    with pytest.raises(CorpusError) as e:
        read_units(str(path))
    assert 'line 3' in str(e.value)
