from __future__ import annotations

import logging
import math
from pathlib import Path

import numpy as np
import pytest

from scvfp.utils.log_decorator import log_process
from scvfp.utils.logging_setup import configure_logging
from scvfp.utils.prng import PrngState, Xoshiro256pp, splitmix64


def test_splitmix64_reference_stream() -> None:
    state, out = splitmix64(0)
    assert out == 0xE220A8397B1DCDAF
    _, out = splitmix64(state)
    assert out == 0x6E789E6AA1B965F4


def test_streams_are_seeded() -> None:
    a, b = Xoshiro256pp(2023), Xoshiro256pp(2023)
    assert [a.next_u64() for _ in range(5)] == [b.next_u64() for _ in range(5)]
    assert Xoshiro256pp(1).next_u64() != Xoshiro256pp(2).next_u64()


def test_state_round_trip_includes_the_cached_gaussian() -> None:
    rng = Xoshiro256pp(9)
    rng.gaussian()
    state = rng.get_state()
    assert state.cached_gaussian is not None
    clone = Xoshiro256pp.from_state(state)
    assert [clone.gaussian() for _ in range(3)] == [rng.gaussian() for _ in range(3)]
    with pytest.raises(ValueError):
        Xoshiro256pp.from_state(PrngState((0, 0, 0, 0)))


def test_uniform_ranges_and_moments() -> None:
    rng = Xoshiro256pp(3)
    u = rng.uniforms(4000, -2.0, 2.0)
    assert u.min() >= -2.0 and u.max() < 2.0
    assert abs(u.mean()) < 0.1
    g = rng.gaussians(4000)
    assert abs(g.mean()) < 0.1 and abs(g.std() - 1.0) < 0.1
    assert all(0 <= rng.below(7) < 7 for _ in range(200))
    with pytest.raises(ValueError):
        rng.below(0)


def test_permutation_is_a_shuffle() -> None:
    order = Xoshiro256pp(5).permutation(50)
    assert sorted(order) == list(range(50))
    assert order != list(range(50))
    assert Xoshiro256pp(5).permutation(50) == order
    assert Xoshiro256pp(5).permutation(0) == []


def test_log_process_reports_start_finish_and_failure(caplog: pytest.LogCaptureFixture) -> None:
    @log_process("double")
    def double(x: int) -> int:
        return 2 * x

    @log_process()
    def explode() -> None:
        raise RuntimeError("boom")

    with caplog.at_level(logging.INFO):
        assert double(4) == 8
        with pytest.raises(RuntimeError):
            explode()
    messages = [r.getMessage() for r in caplog.records]
    assert "double started" in messages
    assert any(m.startswith("double finished in") for m in messages)
    assert any("explode failed after" in m for m in messages)


def test_configure_logging_writes_debug_to_file(tmp_path: Path) -> None:
    log_file = tmp_path / "logs" / "run.log"
    configure_logging("WARNING", log_file=log_file)
    try:
        logging.getLogger("scvfp.test").debug("fine detail %d", 42)
        for handler in logging.getLogger().handlers:
            handler.flush()
        assert "fine detail 42" in log_file.read_text(encoding="utf-8")
    finally:
        configure_logging("INFO")


def test_gaussian_pairs_share_a_radius() -> None:
    rng = Xoshiro256pp(11)
    state = rng.get_state()
    first, second = rng.gaussian(), rng.gaussian()
    replay = Xoshiro256pp.from_state(state)
    u1 = 1.0 - replay.uniform()
    r = math.sqrt(-2.0 * math.log(u1))
    assert math.hypot(first, second) == pytest.approx(r)
    assert np.isfinite([first, second]).all()
