"""Small shared helpers."""

from concurrent.futures import ThreadPoolExecutor


def parallel_map(fn, items, threads):
    """Map preserving order; uses a thread pool when ``threads`` > 1.

    Tasks must be independent; results are assembled in input order, so the
    output is identical for any thread count.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
