import numpy as np
import pytest

from creepdb import corpus, fixtures
from creepdb.backends import ScriptedBackend
from creepdb.kernels import get_backend


@pytest.fixture(scope="session")
def fixture_paths(tmp_path_factory):
    outdir = tmp_path_factory.mktemp("fixture_corpus")
    return fixtures.write_corpus(outdir)


@pytest.fixture(scope="session")
def fixture_index(fixture_paths):
    return corpus.ingest_manifest(fixture_paths["manifest"])


@pytest.fixture()
def scripted_backend(fixture_paths):
    return ScriptedBackend.from_file(fixture_paths["replies"])


def _available_backends():
    names = ["pure-python"]
    try:
        get_backend("compiled")
        names.insert(0, "compiled")
    except ImportError:
        pass
    return names


@pytest.fixture(params=_available_backends())
def kernel_impl(request):
    return get_backend(request.param)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
