"""Shared fixtures: the campus scenario and a one-call secure-query driver."""

from pathlib import Path

import numpy as np
import pytest

from oblivgm.engine import EngineConfig, open_results, sec_match
from oblivgm.graphs import encrypt_graph, parse_graph_text
from oblivgm.net import local_runtimes, make_session_configs, run_trio
from oblivgm.query import gen_token, load_query

DATA = Path(__file__).resolve().parent.parent / "demos" / "data"

CAMPUS_GRAPH = (DATA / "campus.graph").read_text()
TWO_PERSON_QUERY = (DATA / "two-person.query").read_text()

def pytest_terminal_summary(terminalreporter, exitstatus, config):
    from tests._acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def campus():
    return parse_graph_text(CAMPUS_GRAPH)


def run_secure_query(graph_text: str, query_text: str, *, k: int = 2,
                     seed: int = 1, master: bytes = b"\x11" * 16,
                     any_mode: str = "or", graph=None):
    """Encrypt, tokenize and run one query in-process; returns all artifacts."""
    if graph is None:
        graph = parse_graph_text(graph_text)
    rng = np.random.default_rng(seed)
    schema, shares = encrypt_graph(graph, k, rng)
    query = load_query(query_text, schema)
    tokens = gen_token(query, schema, rng)
    runtimes = local_runtimes(make_session_configs(master))

    def worker(rt):
        return sec_match(rt, tokens[rt.index - 1], shares[rt.index - 1],
                         EngineConfig(any_mode=any_mode))

    results = run_trio(worker, runtimes)
    matches, details = open_results(results[:2], schema)
    return {
        "graph": graph,
        "schema": schema,
        "shares": shares,
        "query": query,
        "tokens": tokens,
        "runtimes": runtimes,
        "results": results,
        "matches": set(matches),
        "details": details,
    }
