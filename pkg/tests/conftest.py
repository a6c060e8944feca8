import numpy as np
import pytest

from metalex.embedstore import EmbeddingStore
from metalex.lexicon import DefinitionRecord, lexicon_from_records
from metalex.synthetic import make_world

# one definition (d2) is shared by two wordforms, bank has a sense chain
TINY_RECORDS = [
    DefinitionRecord("d0", "a financial institution", "n", ("bank",), ()),
    DefinitionRecord("d1", "sloping land beside water", "n", ("bank",), ("d0",)),
    DefinitionRecord("d2", "to rely on", "v", ("bank", "count"), ()),
    DefinitionRecord("d3", "to enumerate", "v", ("count",), ()),
    DefinitionRecord("d4", "a nobleman", "n", ("count",), ("d3",)),
    DefinitionRecord("d5", "move quickly", "v", ("run",), ()),
]


@pytest.fixture
def tiny_lexicon():
    return lexicon_from_records(TINY_RECORDS)


@pytest.fixture
def tiny_store(tiny_lexicon):
    store = EmbeddingStore(4)
    gen = np.random.default_rng(0)
    for wordform in sorted(tiny_lexicon.wordform_index):
        store.put("TYPE", wordform, gen.standard_normal(4))
    for definition_id in tiny_lexicon.definition_order:
        store.put("SYNSET", definition_id, gen.standard_normal(4))
    return store


@pytest.fixture(scope="session")
def small_world():
    """A compact planted world shared by the slower integration tests."""
    return make_world(11, k=6, n_wordforms=8, n_smd=160, n_wsd=160)


@pytest.fixture(scope="session")
def micro_world():
    """The smallest world that still has multi-sense wordforms."""
    return make_world(5, k=4, n_wordforms=5, n_smd=48, n_wsd=48)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Replay the acceptance verdict lines after the normal output."""
    try:
        import test_acceptance
    except ImportError:
        return
    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, title, note in sorted(test_acceptance.RESULTS):
        line = f"criterion {number}: {status} - {title}"
        if note:
            line += f" ({note})"
        terminalreporter.write_line(line)
