import struct

import numpy as np
import pytest


def write_idx(path, magic, dims, payload):
    """Write an IDX file: big-endian magic, big-endian dims, unsigned bytes."""
    header = struct.pack(">I", magic) + struct.pack(f">{len(dims)}I", *dims)
    path.write_bytes(header + bytes(payload))
    return path


@pytest.fixture
def idx_pair(tmp_path):
    """Two 2x2 images with pixels 0..7 and labels (1, 6)."""
    images = write_idx(tmp_path / "img", 0x00000803, (2, 2, 2), range(8))
    labels = write_idx(tmp_path / "lab", 0x00000801, (2,), [1, 6])
    return images, labels


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)
