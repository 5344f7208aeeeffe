import pytest

from rock.backend.client import BackendClient
from rock.backend.stub import StubBackend, stub_client
from rock.events import Event
from rock.scores import Orientation
from rock.world import PrecedenceUniverse

E1 = Event("Alice walked into a restaurant.")
E2 = Event("Alice ordered a pizza.")
X1 = Event("Alice was hungry.")
A1 = Event("Alice walked into a bar.")
A2 = Event("Bob walked into a restaurant.")


def example_universe() -> PrecedenceUniverse:
    """The hand-evaluated scenario: one covariate, two interventions, one of
    which is comparable; the balanced score comes out at 0.6."""
    events = (E1, E2, X1, A1, A2)
    law = {
        (X1.id, E1.id): 0.5,
        (X1.id, A1.id): 0.5,
        (X1.id, A2.id): 0.25,
        (E1.id, E2.id): 0.8,
        (A1.id, E2.id): 0.2,
        (A2.id, E2.id): 0.6,
        (X1.id, E2.id): 0.4,
    }
    return PrecedenceUniverse(
        seed=7,
        events={e.id: e for e in events},
        law=law,
        default_covariates=(X1.text,),
        covariates_for={},
        perturbations={E1.id: ((A1, "lexical"), (A2, "negation"))},
        null_score=0.05,
    )


def four_covariate_universe() -> PrecedenceUniverse:
    covs = tuple(Event(f"Preceding event number {i}.") for i in range(4))
    others = (E1, E2)
    law = {}
    for x in covs:
        law[(x.id, E1.id)] = 0.4
        law[(x.id, E2.id)] = 0.3
    law[(E1.id, E2.id)] = 0.7
    return PrecedenceUniverse(
        seed=3,
        events={e.id: e for e in covs + others},
        law=law,
        default_covariates=tuple(x.text for x in covs),
        covariates_for={},
        perturbations={},
        null_score=0.05,
    )


def make_stub_client(
    universe: PrecedenceUniverse,
    cache_dir=None,
    orientation: Orientation = Orientation.AS_WRITTEN,
    **kwargs,
) -> BackendClient:
    stub = StubBackend(universe, orientation=orientation)
    return BackendClient(
        stub_client(stub), cache_dir=cache_dir, backend_id=stub.backend_id, **kwargs
    )


@pytest.fixture
def hand_universe() -> PrecedenceUniverse:
    return example_universe()


@pytest.fixture
def hand_client(hand_universe) -> BackendClient:
    return make_stub_client(hand_universe)
