import os
import time
from threading import Thread

import numpy as np

from . import logging

DEBUG = os.environ.get('SURFACEPAULI_DEBUG', '').lower() in ['1', 'true', 'yes']

_threads_override = None

def set_number_of_threads(threads):
    """Override the number of worker threads (as given by the --threads flag of the command line interface).
    Passing None restores the default behaviour."""
    global _threads_override
    assert threads is None or (isinstance(threads, int) and threads > 0), "Number of threads should be a positive integer"
    _threads_override = threads

def get_number_of_threads():
    
    if _threads_override is not None:
        return _threads_override
    
    threads = os.environ.get('SURFACEPAULI_THREADS')
     
    if threads is None:
        cpu_count = len(os.sched_getaffinity(0)) if hasattr(os, 'sched_getaffinity') else os.cpu_count()
        threads = cpu_count // 2
    else:
        threads = int(threads)
    
    return max(threads, 1)

def split_collect(f, array):
    """Apply `f` to consecutive chunks of `array` on separate threads and return the
    list of results, in order. The chunks are produced by `np.array_split`."""
    
    if DEBUG or get_number_of_threads() == 1 or len(array) < 2:
        logging.log_debug(f'Running function \'{f.__name__}\' on a single thread')
        return [f(array)]
    
    args = [a for a in np.array_split(array, min(get_number_of_threads(), len(array))) if len(a)]
     
    results = [None]*len(args)
    
    def set_result(index):
        results[index] = f(args[index])
    
    threads = [Thread(target=set_result, args=(i,)) for i in range(len(args))]
     
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    
    assert all(r is not None for r in results), f"Worker thread running '{f.__name__}' did not produce a result"
    return results

class Timer:
    """Context manager logging the wall time of a stage as 'Time for <stage>: <ms> ms'."""
    
    def __init__(self, stage):
        self.stage = stage
    
    def __enter__(self):
        self.start = time.time()
        return self
    
    def __exit__(self, *_):
        self.duration = (time.time() - self.start)*1000
        logging.log_info(f'Time for {self.stage}: {self.duration:.0f} ms')
