"""Order-preserving parallel map shared by the Monte Carlo and quadrature code."""
import logging
from concurrent.futures import ThreadPoolExecutor

from tqdm import tqdm

logger = logging.getLogger(__name__)


def ordered_map(func, items, workers=1, progress=None):
    """
    Apply func to every item and return the results in input order.

    numpy releases the GIL in the heavy kernels used here, so threads are
    enough; results never depend on the worker count. A non-empty `progress`
    label shows a tqdm bar on stderr.
    """
    items = list(items)
    with tqdm(total=len(items), desc=progress, disable=not progress, leave=False) as bar:
        if workers is None or workers <= 1 or len(items) <= 1:
            results = []
            for item in items:
                results.append(func(item))
                bar.update()
            return results
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = []
            for result in executor.map(func, items):
                results.append(result)
                bar.update()
            return results


def chunked(sequence, size):
    """Split a sequence into consecutive chunks of at most `size` items."""
    size = max(1, int(size))
    return [sequence[start:start + size] for start in range(0, len(sequence), size)]
