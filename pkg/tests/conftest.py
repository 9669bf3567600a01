import pytest

from reviewscope.config import RunConfig
from reviewscope.corpus import load_corpus
from reviewscope.gateway import Gateway, TranscriptStore
from reviewscope.pipeline import run_analysis, run_shuffle

from corpus_fixture import FIXTURE_CORPUS_PATH, build_fixture_manifest
from fake_llm import ScriptedModel


@pytest.fixture
def store(tmp_path):
    return TranscriptStore(tmp_path / "transcripts")


@pytest.fixture
def record_gateway(store):
    return Gateway(mode="record", store=store, transport=ScriptedModel(), sleep=lambda s: None)


@pytest.fixture(scope="session")
def fixture_manifest():
    manifest = load_corpus(FIXTURE_CORPUS_PATH)
    built = build_fixture_manifest()
    assert (manifest.papers, manifest.reviews) == (built.papers, built.reviews), (
        "tests/fixtures/corpus.jsonl is stale; regenerate with tests/corpus_fixture.py"
    )
    return manifest


@pytest.fixture(scope="session")
def e2e_env(tmp_path_factory, fixture_manifest):
    """Records every transcript the fixture corpus needs (analysis and
    shuffle) through the scripted model, once per session. Replay-mode tests
    run offline against this store."""
    base = tmp_path_factory.mktemp("e2e")
    transcripts = base / "transcripts"
    config = RunConfig(
        mode="record",
        seed=11,
        corpus_path=str(FIXTURE_CORPUS_PATH),
        transcripts_dir=str(transcripts),
        out_dir=str(base / "record-runs"),
        parallelism=2,
    )
    gateway = Gateway(mode="record", store=TranscriptStore(transcripts),
                      transport=ScriptedModel(), sleep=lambda s: None)
    report, analyze_dir, analyze_code = run_analysis(config, fixture_manifest, gateway)
    shuffle_cmp, shuffle_dir, shuffle_code = run_shuffle(config, fixture_manifest, gateway)
    return {
        "base": base,
        "transcripts": transcripts,
        "corpus": FIXTURE_CORPUS_PATH,
        "record_report": report,
        "record_analyze_dir": analyze_dir,
        "record_analyze_code": analyze_code,
        "record_shuffle": shuffle_cmp,
        "record_shuffle_code": shuffle_code,
        "seed": 11,
    }
