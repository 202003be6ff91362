import contextlib
import hashlib
import os


def get_md5(filename, chunk_size=1 << 20):
    hash_obj = hashlib.md5()
    with open(filename, 'rb') as f:
        for chunk in iter(lambda: f.read(chunk_size), b''):
            hash_obj.update(chunk)
    return hash_obj.hexdigest()


@contextlib.contextmanager
def atomic_open(path, mode='w'):
    """Write to ``<path>.tmp`` and move it over ``path`` on success.

    Readers never see a partially written file; on error the temporary file
    is removed and ``path`` is left untouched.
    """
    tmp_path = path + '.tmp'
    f = open(tmp_path, mode)
    try:
        yield f
    except BaseException:
        f.close()
        os.remove(tmp_path)
        raise
    f.close()
    os.replace(tmp_path, path)
