import numpy as np
import pytest

from strataflow.errors import InvalidFraction
from strataflow.model import Item
from strataflow.reservoir import Reservoir, srs_pass


def _items(n, sub=1):
    return [Item(substream=sub, value=float(i), source_seq=i)
            for i in range(n)]


class TestReservoirBasics:
    def test_capacity_validation(self):
        with pytest.raises(ValueError):
            Reservoir(0)

    def test_fill_phase_keeps_everything_in_order(self, rng):
        res = Reservoir(10)
        items = _items(7)
        res.offer_many(items, rng)
        sampled, seen = res.drain()
        assert sampled == items
        assert seen == 7

    def test_never_exceeds_capacity(self, rng):
        res = Reservoir(5)
        res.offer_many(_items(200), rng)
        sampled, seen = res.drain()
        assert len(sampled) == 5
        assert seen == 200

    def test_drain_resets(self, rng):
        res = Reservoir(3)
        res.offer_many(_items(10), rng)
        res.drain()
        assert res.seen == 0 and res.slots == []
        res.offer_many(_items(2), rng)
        sampled, seen = res.drain()
        assert len(sampled) == 2 and seen == 2

    def test_sample_is_subset_of_offers(self, rng):
        items = _items(500)
        res = Reservoir(20)
        res.offer_many(items, rng)
        sampled, _ = res.drain()
        offered = {it.source_seq for it in items}
        assert all(it.source_seq in offered for it in sampled)
        assert len({it.source_seq for it in sampled}) == 20


class TestStreamEquivalence:
    def test_scalar_and_batched_offers_match(self):
        # One uniform double per post-fill item: offering items one at a
        # time and all at once must walk the same random stream.
        items = _items(300)
        rng_a = np.random.Generator(np.random.PCG64(7))
        rng_b = np.random.Generator(np.random.PCG64(7))
        res_a, res_b = Reservoir(16), Reservoir(16)
        for it in items:
            res_a.offer(it, rng_a)
        res_b.offer_many(items, rng_b)
        assert res_a.drain() == res_b.drain()

    def test_chunked_offers_match(self):
        items = _items(250)
        rng_a = np.random.Generator(np.random.PCG64(11))
        rng_b = np.random.Generator(np.random.PCG64(11))
        res_a, res_b = Reservoir(10), Reservoir(10)
        res_a.offer_many(items, rng_a)
        for lo in range(0, 250, 37):
            res_b.offer_many(items[lo:lo + 37], rng_b)
        assert res_a.drain() == res_b.drain()

    def test_determinism(self):
        out = []
        for _ in range(2):
            rng = np.random.Generator(np.random.PCG64(99))
            res = Reservoir(8)
            res.offer_many(_items(100), rng)
            out.append(res.drain())
        assert out[0] == out[1]


class TestUniformity:
    def test_retention_probability_uniform(self):
        # Each of n=60 offered items must be retained with probability
        # R/n = 1/6; checked against a 4-sigma binomial tolerance.
        n, cap, trials = 60, 10, 6000
        counts = np.zeros(n)
        items = _items(n)
        rng = np.random.Generator(np.random.PCG64(4321))
        for _ in range(trials):
            res = Reservoir(cap)
            res.offer_many(items, rng)
            sampled, _ = res.drain()
            for it in sampled:
                counts[it.source_seq] += 1
        p = cap / n
        tol = 4 * np.sqrt(p * (1 - p) / trials)
        freq = counts / trials
        assert np.all(np.abs(freq - p) < tol), freq


class TestSrsPass:
    @pytest.mark.parametrize("bad", [0.0, -0.1, 1.5])
    def test_invalid_fraction(self, bad, rng):
        with pytest.raises(InvalidFraction):
            srs_pass(_items(3), bad, rng)

    def test_fraction_one_passthrough(self, rng):
        items = _items(10)
        kept, weight = srs_pass(items, 1.0, rng)
        assert kept == items and weight == 1.0

    def test_empty_input(self, rng):
        kept, weight = srs_pass([], 0.25, rng)
        assert kept == [] and weight == 4.0

    def test_keep_count_binomial(self, rng):
        # 20000 coin flips at p=0.25: expect 5000 +- 4*sqrt(n p (1-p)).
        items = _items(20000)
        kept, weight = srs_pass(items, 0.25, rng)
        assert weight == 4.0
        sd = np.sqrt(20000 * 0.25 * 0.75)
        assert abs(len(kept) - 5000) < 4 * sd

    def test_preserves_order(self, rng):
        kept, _ = srs_pass(_items(1000), 0.5, rng)
        seqs = [it.source_seq for it in kept]
        assert seqs == sorted(seqs)
