"""Named random substreams derived from one master seed.

Every source of randomness in a run (traffic arrivals, weight draws, network
initialisation, exploration, replay sampling) pulls from its own generator so
that toggling one consumer, such as the attacker, never perturbs the draws
seen by the others. Substreams are keyed by name, not by creation order, so
adding a new stream later does not reshuffle existing ones.
"""

from __future__ import annotations

import zlib

import numpy as np

# Canonical stream names used by the experiment harness.
ARRIVALS = "arrivals"
WEIGHTS = "weights"
VICTIM_INIT = "victim-init"
VICTIM_EXPLORE = "victim-explore"
REPLAY_SAMPLING = "replay-sampling"
ATTACKER_INIT = "attacker-init"
ATTACKER_EXPLORE = "attacker-explore"
ATTACKER_REPLAY = "attacker-replay"
PREP_ARRIVALS = "prep-arrivals"
PREP_WEIGHTS = "prep-weights"
PREP_ATTACKER_EXPLORE = "prep-attacker-explore"

ALL_STREAMS = (
    ARRIVALS,
    WEIGHTS,
    VICTIM_INIT,
    VICTIM_EXPLORE,
    REPLAY_SAMPLING,
    ATTACKER_INIT,
    ATTACKER_EXPLORE,
    ATTACKER_REPLAY,
    PREP_ARRIVALS,
    PREP_WEIGHTS,
    PREP_ATTACKER_EXPLORE,
)


def substream(seed: int, name: str) -> np.random.Generator:
    """Return the generator for the named substream of a master seed.

    The stream key is a CRC32 of the name, so the mapping is stable across
    runs and platforms and independent of how many streams a run uses.
    """
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(key,)))
