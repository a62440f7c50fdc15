"""
Module :module:`unitnorm.pipeline.report` holds experiment results:
the metrics report, plain CSV tables and decoded units files.
"""

import collections
import collections.abc
import csv
import os

import numpy as np

from unitnorm.core.exceptions import CorpusError

__all__ = [
    'REPORT_FIELDS', 'WALL_CLOCK_FIELDS', 'MetricsReport', 'write_rows',
    'read_rows', 'write_units', 'read_units',
]

REPORT_FIELDS = (
    'system', 'split', 'iterations', 'omega', 't_start', 'acc_rec',
    'unit_bleu', 'normalized_unit_bleu', 'phone_bleu', 'unit_consistency',
    'units_per_second', 'fingerprint',
)

WALL_CLOCK_FIELDS = ('units_per_second',)


def _format(value):
    if value is None:
        return ''
    if isinstance(value, (float, np.floating)):
        return '%.4f' % value
    return str(value)


def write_rows(path, fields, rows):
    """
    Write *rows* (mappings or sequences) as CSV with header *fields*.
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(fields)
        for row in rows:
            if isinstance(row, collections.abc.Mapping):
                row = [row.get(name) for name in fields]
            writer.writerow([_format(value) for value in row])


def read_rows(path):
    """
    Return rows of CSV *path* as list of :class:`dict` of strings.
    """
    with open(path, newline='') as f:
        return list(csv.DictReader(f))


class MetricsReport(object):
    """
    Rows of experiment results. Every row names the system, the data
    split and the fingerprint of the checkpoint or corpus it was
    computed from; metrics which do not apply stay empty.
    """

    def __init__(self, rows=None):
        self.rows = []
        for row in rows or ():
            self.add(**row)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def add(self, **values):
        unknown = set(values) - set(REPORT_FIELDS)
        if unknown:
            raise ValueError("Unknown report field(s) %s"
                             % ', '.join(sorted(unknown)))
        for required in ('system', 'split', 'fingerprint'):
            if not values.get(required):
                raise ValueError("Report row needs '%s'" % required)
        row = collections.OrderedDict(
            (name, values.get(name)) for name in REPORT_FIELDS)
        self.rows.append(row)
        return row

    def extend(self, other):
        for row in other:
            self.add(**row)

    def systems(self):
        return sorted(set(row['system'] for row in self.rows))

    def select(self, **conditions):
        return [row for row in self.rows
                if all(row[k] == v for k, v in conditions.items())]

    def deterministic_rows(self):
        """
        Rows as formatted strings without wall-clock columns.
        """
        fields = [f for f in REPORT_FIELDS if f not in WALL_CLOCK_FIELDS]
        return [tuple(_format(row[f]) for f in fields) for row in self.rows]

    def write_csv(self, path):
        write_rows(path, REPORT_FIELDS, self.rows)

    @classmethod
    def read_csv(cls, path):
        report = cls()
        for row in read_rows(path):
            report.rows.append(collections.OrderedDict(
                (name, row.get(name) or None) for name in REPORT_FIELDS))
        return report


def write_units(path, units):
    """
    Write units file: one utterance per line, utterance id followed by
    space separated unit ids. *units* maps ids to unit sequences.
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w') as f:
        for uid, sequence in units.items():
            f.write(' '.join([uid] + [str(int(u)) for u in sequence]))
            f.write('\n')


def read_units(path):
    """
    Read units file written by :func:`write_units` into ordered mapping.
    """
    units = collections.OrderedDict()
    with open(path) as f:
        for number, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            try:
                units[parts[0]] = np.array([int(u) for u in parts[1:]],
                                           dtype=np.int64)
            except ValueError:
                raise CorpusError("Malformed line %d of units file '%s'"
                                  % (number, path))
    return units
