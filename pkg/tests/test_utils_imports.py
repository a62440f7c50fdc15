import datetime as dt

import pytest

from unitnorm.commands.gendata import GenData
from unitnorm.utils.imports import import_object


def test_import_object():
    assert dt.timedelta == import_object('datetime.timedelta')


def test_import_object_command():
    assert GenData is import_object('unitnorm.commands.gendata.GenData')


@pytest.mark.parametrize('name', ['', 'datetime', 'datetime.'])
def test_import_object_fail_when_no_object(name):
    with pytest.raises(ValueError) as e:
        import_object(name)
    assert "Invalid name" in str(e.value)


def test_import_object_fail_when_object_missing():
    with pytest.raises(ImportError) as e:
        import_object('unitnorm.commands.gendata.Missing')
    assert "has no object 'Missing'" in str(e.value)


def test_import_object_fail_when_module_missing():
    with pytest.raises(ImportError):
        import_object('unitnorm.commands.nonexistent.Command')
