import pytest

from urex.corpus import bijective_synth_config, synth_corpus

# Planted corpus shared by the recovery and oracle-signal tests: 10,000
# instances over 4 entity types, 10 relations in bijection with type pairs,
# no label noise, per-relation entity affinity on (12 preferred entities per
# relation and position, disjoint within a type), seed 13.
PLANTED_CONFIG = bijective_synth_config(
    n_instances=10_000,
    entity_types=("PERSON", "ORG", "LOCATION", "DATE"),
    n_relation_types=10,
    entities_per_type=100,
    relation_skew=0.0,
    entity_affinity=0.12,
    noise_rate=0.0,
    seed=13,
)


@pytest.fixture(scope="session")
def planted_corpus():
    return synth_corpus(PLANTED_CONFIG)


@pytest.fixture(scope="session")
def small_corpus():
    cfg = bijective_synth_config(
        n_instances=600, entities_per_type=20, entity_affinity=0.3, seed=5
    )
    return synth_corpus(cfg)
