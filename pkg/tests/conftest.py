import pytest

import corpusfix


@pytest.fixture(scope="session")
def fixture_corpus_dir(tmp_path_factory):
    """Fixtures directory with every scripted mock response."""
    directory = tmp_path_factory.mktemp("chat-fixtures")
    corpusfix.write_chat_fixtures(directory)
    return directory


@pytest.fixture(scope="session")
def fixture_bundle(fixture_corpus_dir):
    """The built 12-section bundle plus its strict gateway."""
    gateway = corpusfix.make_fixture_gateway(fixture_corpus_dir)
    from regqa.build import build_bundle
    bundle, report = build_bundle(corpusfix.make_corpus(), gateway)
    return bundle, report, gateway


@pytest.fixture(scope="session")
def fixture_engine(fixture_bundle):
    from regqa.retrieval import RetrievalEngine
    bundle, _report, gateway = fixture_bundle
    return RetrievalEngine(bundle, gateway)
