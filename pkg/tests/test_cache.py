from cache import StageValueCache, get_cache


def test_get_or_compute_counts_hits():
    cache = StageValueCache()
    calls = []

    def compute():
        calls.append(1)
        return 42

    assert cache.get_or_compute(("k", 1), compute) == 42
    assert cache.get_or_compute(("k", 1), compute) == 42
    assert len(calls) == 1
    stats = cache.get_stats()
    assert stats["hits"] == 1
    assert stats["misses"] == 1
    assert stats["cached_items"] == 1


def test_max_items_refuses_new_keys():
    cache = StageValueCache(max_items=1)
    cache.set("a", 1)
    cache.set("b", 2)
    assert cache.get("a") == 1
    assert cache.get("b") is None


def test_clear():
    cache = StageValueCache()
    cache.set("a", 1)
    cache.clear()
    assert cache.get("a") is None
    assert cache.get_stats()["cached_items"] == 0


def test_singleton():
    assert get_cache() is get_cache()


def test_none_result_is_cached():
    cache = StageValueCache()
    calls = []

    def compute():
        calls.append(1)
        return None

    assert cache.get_or_compute("empty", compute) is None
    assert cache.get_or_compute("empty", compute) is None
    assert len(calls) == 1
    assert cache.get_stats()["hits"] == 1
