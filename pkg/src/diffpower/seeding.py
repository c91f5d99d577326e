"""Named random substreams derived from one master seed.

Every consumer owns a fixed counter, so adding a consumer never perturbs the
draws of another and any reported number is reproducible from the master
seed alone.
"""
from __future__ import annotations

import numpy as np

STREAMS = {
    "model_init": 0,
    "policy_init": 1,
    "data_t1": 2,
    "gdm_train_t1": 3,
    "drl_t1": 4,
    "eval_t1": 5,
    "data_t2": 6,
    "eval_t2": 7,
    "gdm_train_t3": 8,
    "drl_t3": 9,
    "eval_t3": 10,
    "model_init_t3": 11,
    "collect": 12,
    "train": 13,
    "eval": 14,
    "drl": 15,
}


def substream(master_seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named consumer."""
    try:
        counter = STREAMS[name]
    except KeyError:
        raise KeyError(f"unknown random stream {name!r}; add it to STREAMS") from None
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(counter,))
    return np.random.default_rng(seq)
