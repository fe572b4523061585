"""
CSV / Excel export for result tables.
"""

import os
from pathlib import Path
from typing import List

import pandas as pd

from utils.errors import ConfigError

OUTPUT_FORMATS = ('csv', 'xlsx', 'both')


def save_table(df: pd.DataFrame, path, output_format: str = 'csv') -> List[Path]:
    """
    Save a result table.

    Args:
        df: Table to save (written without the index)
        path: Target path; the suffix is replaced per format
        output_format: 'csv', 'xlsx' or 'both'

    Returns:
        Paths written
    """
    if output_format not in OUTPUT_FORMATS:
        raise ConfigError(f"unsupported output format '{output_format}', expected one of {OUTPUT_FORMATS}")
    path = Path(path)
    os.makedirs(path.parent, exist_ok=True)
    written = []
    if output_format in ('csv', 'both'):
        target = path.with_suffix('.csv')
        df.to_csv(target, index=False)
        written.append(target)
    if output_format in ('xlsx', 'both'):
        target = path.with_suffix('.xlsx')
        df.to_excel(target, index=False)
        written.append(target)
    for target in written:
        print(f"Table saved to {target}")
    return written
