"""Shared fixtures: seeded generators, small synthetic tongues and a finite-difference checker."""

import numpy as np
import pytest
import torch

from TA_Synthetic import SynthConfig, synth_generate


@pytest.fixture
def rng():
    """Deterministic numpy generator (seed=42)."""
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def upright_tongues():
    """Eight unrotated 128 x 128 tongues with random attributes."""
    return synth_generate(SynthConfig(count=8, side=128, rotation_range=(0.0, 0.0), seed=11))


@pytest.fixture(scope="session")
def plain_tongue():
    """One noiseless 256 x 256 tongue without attributes."""
    cfg = SynthConfig.uniform(0.0, count=1, side=256, rotation_range=(0.0, 0.0), noise=0.0, seed=3)
    return synth_generate(cfg)[0]


def _close(analytic: float, numeric: float) -> bool:
    return abs(analytic - numeric) <= 1e-7 + 1e-4 * abs(numeric)


@pytest.fixture
def fd_check():
    """
    Compares autograd against central differences on sampled coordinates of each tensor.

    loss_fn() must rebuild the scalar loss from the current tensor values.
    """

    def check(loss_fn, tensors, samples_per_tensor=3, h=1e-6, seed=0):
        gen = np.random.default_rng(seed)
        for t in tensors:
            t.grad = None
        loss_fn().backward()
        analytic = [t.grad.detach().clone() for t in tensors]
        mismatches = []
        with torch.no_grad():
            for t, grad in zip(tensors, analytic):
                flat = t.view(-1)
                for idx in gen.choice(flat.numel(), size=min(samples_per_tensor, flat.numel()), replace=False):
                    original = flat[idx].item()
                    flat[idx] = original + h
                    up = loss_fn().item()
                    flat[idx] = original - h
                    down = loss_fn().item()
                    flat[idx] = original
                    numeric = (up - down) / (2 * h)
                    if not _close(grad.view(-1)[idx].item(), numeric):
                        mismatches.append((tuple(t.shape), int(idx), grad.view(-1)[idx].item(), numeric))
        return mismatches

    return check
