import pytest
from fastapi.testclient import TestClient

from rock_sidecar.app import create_app
from rock_sidecar.config import SidecarConfig
from rock_sidecar.models import build_tiny_models, load_bundle


@pytest.fixture(scope="session")
def tiny_paths(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny-models")
    return build_tiny_models(out, seed=0)


@pytest.fixture(scope="session")
def tiny_config(tiny_paths) -> SidecarConfig:
    return SidecarConfig(
        generation_model=tiny_paths["generation_model"],
        masked_model=tiny_paths["masked_model"],
    )


@pytest.fixture(scope="session")
def tiny_bundle(tiny_config):
    return load_bundle(tiny_config)


@pytest.fixture(scope="session")
def client(tiny_bundle, tiny_config) -> TestClient:
    return TestClient(create_app(tiny_bundle, tiny_config))
