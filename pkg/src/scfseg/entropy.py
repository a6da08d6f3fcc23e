"""Adaptive multi-symbol range coder.

A 32-bit range coder with byte-wise renormalisation and carry propagation
(the low/cache scheme used by LZMA). Interval subdivision multiplies before
it divides, so a symbol of frequency ``f`` out of ``total`` costs almost
exactly ``-log2(f / total)`` bits; there is no truncation loss from a
pre-divided range.

Models expose ``total``, ``span(sym) -> (low, freq)`` and
``locate(target) -> (sym, low, freq)``. Callers that build distributions on
the fly (the pixel stages) use the raw ``encode``/``decode_target``/``consume``
triple directly instead.
"""

from bisect import bisect_right
from itertools import accumulate

TOP = 1 << 32
BOTTOM = 1 << 24
MAX_TOTAL = 1 << 24
_MASK32 = TOP - 1


class TruncatedStreamError(EOFError):
    pass


class Fenwick:
    """Binary indexed tree over non-negative counts."""

    def __init__(self, size, fill=0):
        cap = 1
        while cap < max(size, 1):
            cap <<= 1
        self.capacity = cap
        self.counts = [fill] * size + [0] * (cap - size)
        self.total = fill * size
        self._rebuild()

    def _rebuild(self):
        n = self.capacity
        tree = [0] + list(self.counts)
        for i in range(1, n + 1):
            j = i + (i & -i)
            if j <= n:
                tree[j] += tree[i]
        self.tree = tree
        self.total = sum(self.counts)

    def grow(self, size):
        if size <= self.capacity:
            return
        cap = self.capacity
        while cap < size:
            cap <<= 1
        self.counts.extend([0] * (cap - self.capacity))
        self.capacity = cap
        self._rebuild()

    def set_all(self, counts):
        self.counts[: len(counts)] = counts
        self._rebuild()

    def add(self, i, delta):
        self.counts[i] += delta
        self.total += delta
        tree = self.tree
        n = self.capacity
        i += 1
        while i <= n:
            tree[i] += delta
            i += i & -i

    def prefix(self, i):
        """Sum of counts[0:i]."""
        tree = self.tree
        s = 0
        while i > 0:
            s += tree[i]
            i &= i - 1
        return s

    def find(self, target):
        """Index ``i`` with ``prefix(i) <= target < prefix(i + 1)``."""
        tree = self.tree
        pos = 0
        rem = target
        step = self.capacity
        while step:
            nxt = pos + step
            if nxt <= self.capacity and tree[nxt] <= rem:
                pos = nxt
                rem -= tree[nxt]
            step >>= 1
        return pos, target - rem


class FrequencyTable:
    """Static model over a fixed list of counts."""

    def __init__(self, counts):
        if any(c < 1 for c in counts):
            raise ValueError("every count must be >= 1")
        self.counts = list(counts)
        self.cum = list(accumulate(self.counts, initial=0))
        self.total = self.cum[-1]
        if self.total >= MAX_TOTAL:
            raise ValueError("model total exceeds coder bound")

    def span(self, sym):
        return self.cum[sym], self.counts[sym]

    def locate(self, target):
        if not 0 <= target < self.total:
            raise ValueError("target outside model")
        sym = bisect_right(self.cum, target) - 1
        return sym, self.cum[sym], self.counts[sym]


class AdaptiveModel:
    """Fenwick-backed adaptive model: all-ones start, fixed increment.

    When the total reaches ``limit`` every count is halved (floor at 1).
    """

    def __init__(self, nsymbols, increment=32, limit=MAX_TOTAL):
        self.nsymbols = nsymbols
        self.increment = increment
        self.limit = limit
        self.freqs = Fenwick(nsymbols, fill=1)

    @property
    def total(self):
        return self.freqs.total

    @property
    def counts(self):
        return self.freqs.counts[: self.nsymbols]

    def span(self, sym):
        return self.freqs.prefix(sym), self.freqs.counts[sym]

    def locate(self, target):
        sym, lo = self.freqs.find(target)
        return sym, lo, self.freqs.counts[sym]

    def update(self, sym):
        self.freqs.add(sym, self.increment)
        if self.freqs.total >= self.limit:
            self.freqs.set_all([max(1, c >> 1) for c in self.counts])


class RangeEncoder:
    def __init__(self):
        self.low = 0
        self.range = _MASK32
        self._cache = 0
        self._pending = 1
        self._out = bytearray()
        self._done = False

    def _shift_low(self):
        low = self.low
        if low < 0xFF000000 or low >= TOP:
            carry = low >> 32
            out = self._out
            out.append((self._cache + carry) & 0xFF)
            for _ in range(self._pending - 1):
                out.append((0xFF + carry) & 0xFF)
            self._pending = 0
            self._cache = (low >> 24) & 0xFF
        self._pending += 1
        self.low = (low << 8) & _MASK32

    def encode(self, lo, freq, total):
        r = self.range
        a = r * lo // total
        self.low += a
        r = r * (lo + freq) // total - a
        while r < BOTTOM:
            r <<= 8
            self._shift_low()
        self.range = r

    def encode_symbol(self, model, sym):
        lo, freq = model.span(sym)
        self.encode(lo, freq, model.total)

    def flush(self):
        """Terminate the stream and return the payload bytes."""
        if not self._done:
            # shortest value inside [low, low + range)
            hi = self.low + self.range
            for k in range(32, -1, -1):
                m = (1 << k) - 1
                v = (self.low + m) & ~m
                if v < hi:
                    break
            self.low = v
            while self.low:
                self._shift_low()
            self._shift_low()
            self._done = True
        # the first emitted byte is the always-zero initial cache
        return bytes(self._out[1:])


class RangeDecoder:
    def __init__(self, data):
        self.data = data
        self.pos = 0
        self.overrun = 0
        self.range = _MASK32
        code = 0
        for _ in range(4):
            code = (code << 8) | self._next_byte()
        self.code = code

    def _next_byte(self):
        pos = self.pos
        if pos < len(self.data):
            self.pos = pos + 1
            return self.data[pos]
        self.overrun += 1
        if self.overrun > 4:
            raise TruncatedStreamError("range coder stream is truncated")
        return 0

    def decode_target(self, total):
        return ((self.code + 1) * total - 1) // self.range

    def consume(self, lo, freq, total):
        r = self.range
        a = r * lo // total
        code = self.code - a
        r = r * (lo + freq) // total - a
        while r < BOTTOM:
            r <<= 8
            code = (code << 8) | self._next_byte()
        self.code = code
        self.range = r

    def decode_symbol(self, model):
        total = model.total
        target = self.decode_target(total)
        if target >= total:
            raise ValueError("corrupt stream: symbol outside model")
        sym, lo, freq = model.locate(target)
        self.consume(lo, freq, total)
        return sym

    def exhausted(self):
        """True if every payload byte has been consumed."""
        return self.pos >= len(self.data)
