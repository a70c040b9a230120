import numpy as np
import pytest

from addpipe.backends import make_stub_backends
from addpipe.config import PipelineConfig
from addpipe.records import EmbeddingVector


@pytest.fixture(scope="session")
def stub_backends():
    return make_stub_backends(seed=0)


@pytest.fixture()
def config():
    return PipelineConfig()


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """40-record synthetic corpus shared by pipeline-level tests."""
    from addpipe.synthetic import make_synthetic_corpus

    root = tmp_path_factory.mktemp("corpus")
    return make_synthetic_corpus(root, n=40, seed=7)


def stub_pipeline_config(reference_file=None) -> PipelineConfig:
    """Config tuned for stub backends: the abnormality gate is backend-relative,
    so disable it (stub embeddings carry no class signal)."""
    config = PipelineConfig()
    config.pre_removal.abnormality_threshold = -1.0
    if reference_file:
        config.instructions.reference_file = str(reference_file)
    return config


@pytest.fixture(scope="session")
def pipeline_workspace(tmp_path_factory, small_corpus):
    """Full stub pipeline run over the 40-record corpus; shared read-only."""
    from addpipe.pipeline import Workspace, run_all

    config = stub_pipeline_config(small_corpus["reference_file"])
    workspace = Workspace(tmp_path_factory.mktemp("ws"))
    run_all(
        workspace, config, make_stub_backends(config.seed),
        small_corpus["annotation_file"], small_corpus["image_dir"],
    )
    return workspace, config


class FixtureEmbedder:
    """Embedder returning preset vectors: images keyed by their top-left pixel value."""

    def __init__(self, image_vectors: dict, text_vectors: dict, dimension: int):
        self.name = "fixture-embedder"
        self.dimension = dimension
        self._images = image_vectors
        self._texts = text_vectors

    def _key(self, raster: np.ndarray) -> int:
        flat = np.asarray(raster).reshape(-1)
        return int(round(float(flat[0])))

    def embed_image(self, raster) -> EmbeddingVector:
        return EmbeddingVector(np.asarray(self._images[self._key(raster)], dtype=np.float64))

    def embed_text(self, text) -> EmbeddingVector:
        return EmbeddingVector(np.asarray(self._texts[text], dtype=np.float64))


@pytest.fixture()
def fixture_embedder_factory():
    return FixtureEmbedder
