import os
import json
import tempfile
import logging

logger = logging.getLogger(__name__)


def _atomic_write(path, write_fn, mode="w"):
    # temp file in the same directory so os.replace stays on one filesystem
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp_", dir=directory)
    try:
        if "b" in mode:
            with os.fdopen(fd, mode) as f:
                write_fn(f)
        else:
            with os.fdopen(fd, mode, encoding="utf-8", newline="") as f:
                write_fn(f)
        os.replace(tmp_path, path)
    except BaseException:
        try:
            os.remove(tmp_path)
        except OSError:
            pass
        raise
    logger.debug(f"Wrote {path}")


def write_csv_atomic(df, path):
    _atomic_write(path, lambda f: df.to_csv(f, index=False, lineterminator="\n"))


def write_json_atomic(obj, path):
    def _dump(f):
        json.dump(obj, f, indent=4, ensure_ascii=False)
        f.write("\n")

    _atomic_write(path, _dump)


def write_text_atomic(text, path):
    _atomic_write(path, lambda f: f.write(text))


def read_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
