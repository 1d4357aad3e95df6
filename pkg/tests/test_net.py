"""Transport layer: framing, round discipline, setup, and both transports."""

import threading

import numpy as np
import pytest

from oblivgm import rss
from oblivgm.bits import BitVector
from oblivgm.net import (OP_OPEN, OP_RESHARE, Frame, PartyConfig, ProtocolError,
                         local_runtimes, make_session_configs, parse_peers,
                         run_trio, tcp_runtime)


def test_frame_round_trip():
    f = Frame(session=3, round=9, op=OP_OPEN, payload=b"hello world")
    assert Frame.decode(f.encode()) == f


def test_frame_decode_errors():
    with pytest.raises(ProtocolError, match="short"):
        Frame.decode(b"OGMF")
    good = Frame(1, 0, OP_OPEN, b"x").encode()
    with pytest.raises(ProtocolError, match="magic"):
        Frame.decode(b"XXXX" + good[4:])
    with pytest.raises(ProtocolError, match="length"):
        Frame.decode(good + b"junk")


def test_setup_validation():
    configs = make_session_configs(b"\x01" * 16)
    configs[1] = PartyConfig(1, configs[1].session, *(b"\x00" * 16,) * 4)
    with pytest.raises(ValueError, match="indices"):
        local_runtimes(configs)


def test_fresh_session_zero_shares_cancel_immediately():
    runtimes = local_runtimes(make_session_configs(b"\x07" * 16))
    outs = run_trio(lambda rt: rt.zero_share(96), runtimes)
    assert (outs[0] ^ outs[1] ^ outs[2]).is_zero()


def test_round_skew_detected():
    runtimes = local_runtimes(make_session_configs(b"\x02" * 16))

    def worker(rt):
        if rt.index == 1:
            # send two frames; the peer consumes them expecting rounds 0 then 0 again
            rt.send_next(OP_RESHARE, b"a")
            rt.send_next(OP_RESHARE, b"b")
        elif rt.index == 2:
            rt.recv_prev(OP_RESHARE)
            link = rt.links[1]
            link._rx_rounds[OP_RESHARE] = 0  # simulate a desynchronized party
            link.recv(OP_RESHARE, rt.recv_timeout)
        return None

    with pytest.raises(ProtocolError, match="round skew"):
        run_trio(worker, runtimes)


def test_unexpected_op_detected():
    runtimes = local_runtimes(make_session_configs(b"\x03" * 16))

    def worker(rt):
        if rt.index == 1:
            rt.send_next(OP_RESHARE, b"x")
        elif rt.index == 2:
            rt.recv_prev(OP_OPEN)
        return None

    with pytest.raises(ProtocolError, match="expected op"):
        run_trio(worker, runtimes)


def test_large_payload_echo_and_order():
    runtimes = local_runtimes(make_session_configs(b"\x04" * 16))
    blob = bytes(range(256)) * 4096  # 1 MiB

    def worker(rt):
        if rt.index == 1:
            rt.send_next(OP_RESHARE, blob)
            for i in range(10_000):
                rt.send_next(OP_OPEN, i.to_bytes(4, "little"))
            return None
        if rt.index == 2:
            got = rt.recv_prev(OP_RESHARE)
            seq = [int.from_bytes(rt.recv_prev(OP_OPEN), "little") for _ in range(10_000)]
            return got == blob, seq == list(range(10_000))
        return None

    results = run_trio(worker, runtimes)
    assert results[1] == (True, True)


def test_parse_peers():
    assert parse_peers("1=127.0.0.1:9001, 2=host:9002") == {
        1: "127.0.0.1:9001", 2: "host:9002"}


def _free_ports(n):
    import socket

    socks = [socket.socket() for _ in range(n)]
    for s in socks:
        s.bind(("127.0.0.1", 0))
    ports = [s.getsockname()[1] for s in socks]
    for s in socks:
        s.close()
    return ports


def _tcp_trio(master: bytes, worker):
    ports = _free_ports(3)
    peers = {i + 1: f"127.0.0.1:{ports[i]}" for i in range(3)}
    base = make_session_configs(master)
    results = [None, None, None]
    errors = [None, None, None]

    def run(i):
        cfg = base[i]
        cfg.bind = peers[i + 1]
        cfg.peers = peers
        try:
            rt = tcp_runtime(cfg, recv_timeout=30, connect_timeout=15)
            results[i] = worker(rt)
        except BaseException as exc:  # noqa: BLE001
            errors[i] = exc

    threads = [threading.Thread(target=run, args=(i,)) for i in range(3)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for e in errors:
        if e is not None:
            raise e
    return results


def test_tcp_trio_matches_in_process_transcript():
    master = b"\x05" * 16
    rng = np.random.default_rng(0)
    x, y = BitVector.random(128, rng), BitVector.random(128, rng)
    sx, sy = rss.share(x, rng), rss.share(y, rng)

    def worker(rt):
        z = rss.and_gate(rt, sx[rt.index - 1], sy[rt.index - 1])
        opened = rss.open_shared(rt, z, label=1)
        return opened, rt.transcript_digest()

    local = run_trio(worker, local_runtimes(make_session_configs(master)))
    remote = _tcp_trio(master, worker)
    assert all(l[0] == (x & y) for l in local)
    assert [l[0] for l in local] == [r[0] for r in remote]
    assert [l[1] for l in local] == [r[1] for r in remote]  # byte-identical transcripts


def test_full_query_transcript_identical_across_transports():
    from oblivgm.engine import EngineConfig, sec_match
    from oblivgm.graphs import encrypt_graph, parse_graph_text
    from oblivgm.query import gen_token, load_query
    from tests.conftest import CAMPUS_GRAPH, TWO_PERSON_QUERY

    rng = np.random.default_rng(4)
    graph = parse_graph_text(CAMPUS_GRAPH)
    schema, shares = encrypt_graph(graph, 2, rng)
    tokens = gen_token(load_query(TWO_PERSON_QUERY, schema), schema, rng)
    master = b"\x0a" * 16

    def worker(rt):
        sec_match(rt, tokens[rt.index - 1], shares[rt.index - 1], EngineConfig())
        return rt.transcript_digest()

    local = run_trio(worker, local_runtimes(make_session_configs(master)))
    remote = _tcp_trio(master, worker)
    assert local == remote


def test_tcp_unreachable_peer():
    base = make_session_configs(b"\x06" * 16)
    cfg = base[2]  # party 3 dials parties 1 and 2
    cfg.bind = "127.0.0.1:0"
    cfg.peers = {1: "127.0.0.1:9", 2: "127.0.0.1:9"}  # discard port, nothing listens
    with pytest.raises(ProtocolError, match="unreachable"):
        tcp_runtime(cfg, connect_timeout=0.3)
