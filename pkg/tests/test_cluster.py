import os

import pytest

from core.cluster import ReplicationCluster, chunk_ranges
from core.errors import InvalidParameter


def _square(x):
    return x * x


class TestChunkRanges:
    def test_covers_total(self):
        assert chunk_ranges(1000, 250) == [(0, 250), (250, 500), (500, 750), (750, 1000)]

    def test_ragged_tail(self):
        assert chunk_ranges(7, 3) == [(0, 3), (3, 6), (6, 7)]

    def test_empty(self):
        assert chunk_ranges(0) == []


class TestReplicationCluster:
    def test_default_is_inline(self):
        cluster = ReplicationCluster()
        assert cluster.workers == 1
        assert cluster.map(_square, [1, 2, 3]) == [1, 4, 9]
        assert not cluster.is_running()

    def test_zero_means_all_cpus(self):
        cluster = ReplicationCluster(threads=0)
        assert cluster.workers == max(1, os.cpu_count() or 1)

    def test_negative_rejected(self):
        cluster = ReplicationCluster()
        with pytest.raises(InvalidParameter):
            cluster.resize(-1)
        assert "Invalid worker count" in cluster.last_error

    def test_unknown_backend(self):
        with pytest.raises(InvalidParameter):
            ReplicationCluster(threads=2, backend="mpi")

    @pytest.mark.parametrize("backend", ["thread", "process"])
    def test_map_keeps_order(self, backend):
        with ReplicationCluster(threads=3, backend=backend) as cluster:
            assert cluster.map(_square, range(20)) == [x * x for x in range(20)]
            assert cluster.is_running()
        assert not cluster.is_running()

    def test_resize_restarts_executor(self):
        cluster = ReplicationCluster(threads=2, backend="thread")
        cluster.map(_square, [1, 2])
        assert cluster.is_running()
        cluster.resize(3)
        assert not cluster.is_running()
        assert cluster.workers == 3
        cluster.stop()
