import numpy as np
import pytest

from arwsim import core, stacks


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once so timed tests measure runtime only."""
    st = stacks.InstructionStacks(seed=0, lam=1.0)
    cfg = core.sample_bernoulli_config(0.3, (-10, 10), 0)
    for policy in core.POLICIES:
        core.stabilize(cfg.copy(), (-9, 9), st, policy=policy, cap=10**6)
    from arwsim import _fast

    ts, tl = stacks.law_thresholds(1.0)
    _fast.minimal_trace(
        np.uint64(0), np.uint64(0), np.uint64(ts), np.uint64(tl), np.uint64(0), 50, 0, 10, 10**5
    )
    _fast.greedy_trace(np.uint64(0), np.uint64(ts), np.uint64(tl), 10, 50, 0, 64, 10**5)
    _fast.dd_chain(np.uint64(0), np.uint64(1), np.uint64(ts), np.uint64(tl), 20, 10, 10**6)
