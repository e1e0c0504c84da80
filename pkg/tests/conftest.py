from pathlib import Path

import numpy as np
from pytest import fixture

from neste.graph_data import load_graph
from neste.hypercomplex import Algebra
from neste.scoring import init_store

TOY_FILES: dict[str, list[str]] = {
    "atomic_train": [
        "alice\tknows\tbob",
        "bob\tworks_at\tacme",
        "carol\tknows\tdave",
        "dave\tworks_at\tinitech",
        "erin\tknows\tfrank",
        "alice\tworks_at\tacme",
        "frank\tworks_at\tinitech",
    ],
    "atomic_valid": ["bob\tknows\tcarol"],
    "atomic_test": ["carol\tworks_at\tacme"],
    "nested_train": [
        "alice\tknows\tbob\timplies\tbob\tworks_at\tacme",
        "carol\tknows\tdave\timplies\tdave\tworks_at\tinitech",
    ],
    "nested_valid": ["erin\tknows\tfrank\timplies\tfrank\tworks_at\tinitech"],
    "nested_test": ["alice\tknows\tbob\tbefore\talice\tworks_at\tacme"],
}


def write_toy_files(directory: Path) -> dict[str, Path]:
    """Write the toy graph as six split files and return their paths."""
    paths = {}
    for key, lines in TOY_FILES.items():
        path = directory / f"{key}.txt"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        paths[key] = path
    return paths


def graph_from(paths: dict[str, Path], **kwargs):
    return load_graph(
        [paths["atomic_train"], paths["atomic_valid"], paths["atomic_test"]],
        [paths["nested_train"], paths["nested_valid"], paths["nested_test"]],
        **kwargs,
    )


@fixture
def toy_paths(tmp_path):
    """Paths of the toy graph files."""
    return write_toy_files(tmp_path)


@fixture
def toy_graph(toy_paths):
    """Eight entities, two atomic and two nested relations."""
    return graph_from(toy_paths)


@fixture
def toy_store(toy_graph):
    """A small float64 store over the toy graph."""
    return init_store(toy_graph, dim=3, algebra=Algebra.Q, seed=7)


@fixture
def rng():
    return np.random.default_rng(1234)
