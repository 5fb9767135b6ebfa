import os
import time

from terrain_negotiator.backup import INTERVALS, backup_file


def test_missing_file_is_skipped(tmp_path):
    assert backup_file(str(tmp_path / 'none.json')) == {}
    assert not os.path.exists(tmp_path / 'backups')


def test_first_backup_fills_every_category(tmp_path):
    path = tmp_path / 'max_speed.json'
    path.write_text('v1')
    created = backup_file(str(path))
    assert sorted(created) == sorted(INTERVALS)
    for category, target in created.items():
        assert target == str(tmp_path / 'backups' / category / 'max_speed.json')
        with open(target) as f:
            assert f.read() == 'v1'


def test_only_stale_categories_are_refreshed(tmp_path):
    path = tmp_path / 'dataset.npz'
    path.write_text('v1')
    backup_file(str(path))
    path.write_text('v2')
    assert list(backup_file(str(path))) == ['latest']
    assert (tmp_path / 'backups' / 'latest' / 'dataset.npz').read_text() == 'v2'
    assert (tmp_path / 'backups' / '5min' / 'dataset.npz').read_text() == 'v1'

    stale = time.time() - 400
    os.utime(tmp_path / 'backups' / '5min' / 'dataset.npz', (stale, stale))
    path.write_text('v3')
    assert sorted(backup_file(str(path))) == ['5min', 'latest']
    assert (tmp_path / 'backups' / '5min' / 'dataset.npz').read_text() == 'v3'
    assert (tmp_path / 'backups' / '10min' / 'dataset.npz').read_text() == 'v1'


def test_custom_backup_base(tmp_path):
    path = tmp_path / 'table.csv'
    path.write_text('x')
    created = backup_file(str(path), str(tmp_path / 'elsewhere'))
    assert created['hourly'] == str(tmp_path / 'elsewhere' / 'hourly' / 'table.csv')
