import numpy as np
import pytest
import torch

from tempotrack import TrackerNet

SLIM_WIDTHS = (8, 12, 16, 16, 12)


def seeded(seed):
    return torch.Generator().manual_seed(seed)


def rand(*shape, seed=0, dtype=torch.float32):
    return torch.randn(*shape, dtype=dtype, generator=seeded(seed))


def slim_model(seed=0, **overrides):
    """Small end-to-end model for tests that run the full pipeline."""
    kwargs = dict(widths=SLIM_WIDTHS, refine_channels=12, heads=6,
                  head_hidden=8, pool_size=4)
    kwargs.update(overrides)
    torch.manual_seed(seed)
    return TrackerNet(**kwargs)


@pytest.fixture(autouse=True)
def _fixed_seeds():
    torch.manual_seed(1234)
    np.random.seed(1234)
