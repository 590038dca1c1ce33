from contextlib import contextmanager
import json
import os
import tempfile

import pandas as pd

from src.errors import DataFormatError

FLOAT_FORMAT = '%.17g'


def save_txt(data_to_save, filepath, mode='a'):
    """
    Save text to a file.
    """
    with open(filepath, mode) as text_file:
        text_file.write(data_to_save + '\n')


def get_last_checkpoint(logdir='.'):
    """
    Fetch path of last checkpoint available in `logdir`, based on the date in the filename.
    """
    logfiles = sorted([f for f in os.listdir(logdir) if f.startswith('checkpoint') and f.endswith('.pkl')])
    if not logfiles:
        raise DataFormatError(f'No checkpoint file in {logdir}.')
    return os.path.join(logdir, logfiles[-1])


@contextmanager
def atomic_write(filepath, mode='w'):
    """
    Write to a temporary file next to `filepath`, then rename it over the target.
    """
    folder = os.path.dirname(os.path.abspath(filepath))
    os.makedirs(folder, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=folder, prefix='.tmp-', suffix=os.path.basename(filepath))
    try:
        with os.fdopen(fd, mode) as handle:
            yield handle
        os.replace(tmp_path, filepath)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def write_csv(df: pd.DataFrame, filepath, comments=(), header=True):
    """
    Atomically write a dataframe with floats at 17 significant digits, preceded by '# ' comment lines.
    """
    with atomic_write(filepath) as handle:
        for line in comments:
            handle.write(f'# {line}\n')
        df.to_csv(handle, index=False, header=header, float_format=FLOAT_FORMAT, lineterminator='\n')


def write_json(obj, filepath):
    with atomic_write(filepath) as handle:
        json.dump(obj, handle, indent=2, sort_keys=True)
        handle.write('\n')


def read_data(file_path, header='infer'):
    """
    Generic function to read the files the package writes. Extensions supported: '.csv', '.json'

    CSV comment lines starting with '#' are skipped and floats are parsed back exactly.
    """
    if not os.path.exists(file_path):
        raise DataFormatError(f'File {file_path} does not exist.')
    if file_path.endswith('.csv'):
        try:
            obj = pd.read_csv(file_path, comment='#', header=header, float_precision='round_trip')
        except (pd.errors.EmptyDataError, pd.errors.ParserError, ValueError) as exc:
            raise DataFormatError(f'Could not parse {file_path}: {exc}') from exc
    elif file_path.endswith('.json'):
        try:
            with open(file_path) as handle:
                obj = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f'Could not parse {file_path}: {exc}') from exc
    else:
        raise KeyError('File extension of {} not recognized.'.format(file_path))
    return obj
