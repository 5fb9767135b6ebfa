"""
Interval backups of output files (models, datasets, metric tables) before they are overwritten.
"""

import datetime
import logging
import os
import shutil
from typing import Dict, Optional

logger = logging.getLogger(__name__)

INTERVALS = {
    'latest': 0,
    '5min': 300,
    '10min': 600,
    '30min': 1800,
    'hourly': 3600,
}


def backup_file(path: str, backup_base: Optional[str] = None) -> Dict[str, str]:
    """
    Keep one copy of a file per time-interval category.

    A category is refreshed when its copy of this file is older than the
    category's interval ('latest' is always refreshed). Missing files are
    skipped, so callers can back up unconditionally before writing.

    Args:
        path (str): File about to be overwritten
        backup_base (str): Backup root (default: a 'backups' directory next to the file)

    Returns:
        dict: Category name -> backup path, for the copies made

    Directory structure:
        <dir>/backups/
        ├── latest/
        ├── 5min/
        ├── 10min/
        ├── 30min/
        └── hourly/

    Example:
        >>> backup_file('out/models/max_speed.json')
        {'latest': 'out/models/backups/latest/max_speed.json', ...}
    """
    if not os.path.isfile(path):
        return {}
    if backup_base is None:
        backup_base = os.path.join(os.path.dirname(os.path.abspath(path)), 'backups')

    created = {}
    now = datetime.datetime.now()
    filename = os.path.basename(path)
    for category, threshold in INTERVALS.items():
        category_dir = os.path.join(backup_base, category)
        os.makedirs(category_dir, exist_ok=True)
        target = os.path.join(category_dir, filename)

        if threshold > 0 and os.path.exists(target):
            age = (now - datetime.datetime.fromtimestamp(os.path.getmtime(target))).total_seconds()
            if age < threshold:
                continue

        shutil.copy2(path, target)
        # copy2 keeps the source mtime; the category clock starts now
        os.utime(target)
        created[category] = target

    if created:
        logger.debug(f"Backed up {path} to {sorted(created)}")
    return created
