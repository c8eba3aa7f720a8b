import numpy as np

# filled by the acceptance tests, printed by conftest.pytest_terminal_summary
ACCEPTANCE_LINES: list[str] = []
TRACES_CHECKED = {"count": 0}


def assert_conserved(trace):
    """Count conservation and path consistency of one trace."""
    n = trace.n
    assert trace.path.shape[0] == n
    for d, m in enumerate(trace.pair_counts):
        assert m.sum() == n
        # each selector at depth d acts exactly as often as it was chosen above
        if d == 0:
            assert m.shape[0] == 1
        else:
            np.testing.assert_array_equal(m.sum(axis=1), trace.pair_counts[d - 1].sum(axis=0))
        np.testing.assert_array_equal(np.bincount(trace.path[:, d], minlength=m.shape[1]), m.sum(axis=0))
    assert trace.arm_counts.sum() == n
