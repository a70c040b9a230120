"""Build a small scored workspace for frontend integration tests."""

import sys

from addpipe.backends import make_stub_backends
from addpipe.config import PipelineConfig
from addpipe.pipeline import Workspace, run_all
from addpipe.synthetic import make_synthetic_corpus


def main(root: str) -> None:
    corpus = make_synthetic_corpus(f"{root}/corpus", n=30, seed=11)
    config = PipelineConfig()
    config.pre_removal.abnormality_threshold = -1.0
    run_all(
        Workspace(f"{root}/ws"), config, make_stub_backends(config.seed),
        corpus["annotation_file"], corpus["image_dir"],
    )
    print(f"{root}/ws")


if __name__ == "__main__":
    main(sys.argv[1])
