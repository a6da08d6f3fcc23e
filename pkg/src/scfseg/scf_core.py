"""Per-pixel probability modelling and three-stage coding.

Each pixel is coded in the first stage able to represent it:

1. pattern stage: colours previously seen under the same (or a similar)
   causal six-neighbour template, plus an escape symbol;
2. palette stage: every colour seen so far in the pass, minus those already
   ruled out by the stage-1 escape, plus an escape symbol;
3. residual stage: each channel predicted by the median edge detector and the
   prediction error coded with an adaptive 256-symbol model.

Colours are packed ``0xRRGGBB`` ints throughout. Encoder and decoder run the
exact same model updates, so their states stay identical pixel by pixel.
"""

import hashlib
import pickle
from collections import OrderedDict
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .entropy import MAX_TOTAL, AdaptiveModel, Fenwick

DEFAULT_CAPACITY = 1 << 20
RESIDUAL_INCREMENT = 32
# palette counts are halved here so count sum + escape stays below MAX_TOTAL
PALETTE_LIMIT = MAX_TOTAL >> 1


class ResetPolicy(Enum):
    KEEP = "keep"
    RESET_COUNTS = "resetcounts"
    REMOVE = "remove"


ALL_POLICIES = [(p, q) for p in ResetPolicy for q in ResetPolicy]
DEFAULT_POLICY = (ResetPolicy.KEEP, ResetPolicy.REMOVE)


@dataclass
class StageStats:
    stage1: int = 0
    stage2: int = 0
    stage3: int = 0
    escapes: int = 0

    @property
    def pixels(self):
        return self.stage1 + self.stage2 + self.stage3

    def __add__(self, other):
        return StageStats(
            self.stage1 + other.stage1,
            self.stage2 + other.stage2,
            self.stage3 + other.stage3,
            self.escapes + other.escapes,
        )

    def as_dict(self):
        return asdict(self)


def template_channels(t):
    out = []
    for c in t:
        out += ((c >> 16) & 0xFF, (c >> 8) & 0xFF, c & 0xFF)
    return out


def pattern_distance(t, u):
    """Sum over the six neighbours of the largest per-channel difference."""
    d = 0
    for a, b in zip(t, u):
        d += max(
            abs(((a >> 16) & 0xFF) - ((b >> 16) & 0xFF)),
            abs(((a >> 8) & 0xFF) - ((b >> 8) & 0xFF)),
            abs((a & 0xFF) - (b & 0xFF)),
        )
    return d


class _Cell:
    """Templates sharing one soft-index grid cell, as a growable int16 array."""

    __slots__ = ("arr", "rows", "keys", "seqs", "n")

    def __init__(self):
        self.arr = np.zeros((8, 18), dtype=np.int16)
        self.rows = []
        self.keys = []
        self.seqs = []
        self.n = 0

    def add(self, t, ch, seq):
        if self.n == len(self.arr):
            self.arr = np.concatenate([self.arr, np.zeros_like(self.arr)])
        self.arr[self.n] = ch
        self.rows.append(ch)
        self.keys.append(t)
        self.seqs.append(seq)
        self.n += 1

    def remove(self, t):
        # swap-remove; merge order comes from seqs, not position
        i = self.keys.index(t)
        last = self.n - 1
        if i != last:
            self.arr[i] = self.arr[last]
            self.rows[i] = self.rows[last]
            self.keys[i] = self.keys[last]
            self.seqs[i] = self.seqs[last]
        self.rows.pop()
        self.keys.pop()
        self.seqs.pop()
        self.n = last


# below this many entries a pure-Python distance scan beats numpy call overhead
_SMALL_CELL = 6


class PatternStore:
    """Templates -> colour histograms, LRU-bounded.

    With ``soft_radius > 0`` every stored template within that distance of the
    query contributes, merged in insertion order. Candidates are bucketed on a
    grid over the per-channel sums of the six neighbours, cell side ``r + 1``:
    within distance ``r`` each channel sum moves by at most ``r``, so only the
    27 surrounding cells need an exact check.
    """

    def __init__(self, capacity=DEFAULT_CAPACITY, soft_radius=0):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.soft_radius = soft_radius
        self.patterns = OrderedDict()
        if soft_radius:
            self._side = soft_radius + 1
            self._near = [
                (dr << 24) + (dg << 12) + db for dr in (-1, 0, 1) for dg in (-1, 0, 1) for db in (-1, 0, 1)
            ]
            self._clear_index()

    def _clear_index(self):
        self._cells = {}
        self._where = {}
        self._seq = 0

    def __len__(self):
        return len(self.patterns)

    def __contains__(self, t):
        return t in self.patterns

    def histogram(self, t):
        return self.patterns.get(t)

    def _cell_key(self, ch):
        q = self._side
        r = (ch[0] + ch[3] + ch[6] + ch[9] + ch[12] + ch[15]) // q + 1
        g = (ch[1] + ch[4] + ch[7] + ch[10] + ch[13] + ch[16]) // q + 1
        b = (ch[2] + ch[5] + ch[8] + ch[11] + ch[14] + ch[17]) // q + 1
        return (r << 24) + (g << 12) + b

    def lookup(self, t):
        """Merged histogram of all templates within the radius, or None.

        The returned dict may be live store data; do not modify it.
        """
        if not self.soft_radius:
            return self.patterns.get(t)
        if not self.patterns:
            return None
        ch = template_channels(t)
        key = self._cell_key(ch)
        radius = self.soft_radius
        get = self._cells.get
        hits = []
        query = None
        for off in self._near:
            cell = get(key + off)
            if cell is None or not cell.n:
                continue
            if cell.n <= _SMALL_CELL:
                for row, u, seq in zip(cell.rows, cell.keys, cell.seqs):
                    d = 0
                    for j in range(0, 18, 3):
                        d += max(abs(row[j] - ch[j]), abs(row[j + 1] - ch[j + 1]), abs(row[j + 2] - ch[j + 2]))
                        if d > radius:
                            break
                    else:
                        hits.append((seq, u))
            else:
                if query is None:
                    query = np.array(ch, dtype=np.int16)
                n = cell.n
                d = np.abs(cell.arr[:n] - query).reshape(n, 6, 3).max(axis=2).sum(axis=1)
                for i in np.flatnonzero(d <= radius).tolist():
                    hits.append((cell.seqs[i], cell.keys[i]))
        if not hits:
            return None
        patterns = self.patterns
        if len(hits) == 1:
            return patterns[hits[0][1]]
        hits.sort()
        merged = {}
        for _, u in hits:
            for c, k in patterns[u].items():
                merged[c] = merged.get(c, 0) + k
        return merged

    def update(self, t, x):
        patterns = self.patterns
        hist = patterns.get(t)
        if hist is None:
            if len(patterns) >= self.capacity:
                old, _ = patterns.popitem(last=False)
                if self.soft_radius:
                    self._cells[self._where.pop(old)].remove(old)
            patterns[t] = {x: 1}
            if self.soft_radius:
                ch = template_channels(t)
                key = self._cell_key(ch)
                cell = self._cells.get(key)
                if cell is None:
                    cell = self._cells[key] = _Cell()
                cell.add(t, ch, self._seq)
                self._seq += 1
                self._where[t] = key
        else:
            hist[x] = hist.get(x, 0) + 1
            patterns.move_to_end(t)

    def reset_counts(self):
        for hist in self.patterns.values():
            for c in hist:
                hist[c] = 1

    def clear(self):
        self.patterns.clear()
        if self.soft_radius:
            self._clear_index()


class ColourPalette:
    """Global colour histogram with cumulative counts (Fenwick tree)."""

    def __init__(self):
        self.clear()

    def clear(self):
        self.index = {}
        self.colours = []
        self.freqs = Fenwick(64)

    def __len__(self):
        return len(self.colours)

    def __contains__(self, c):
        return c in self.index

    @property
    def total(self):
        return self.freqs.total

    def count(self, c):
        i = self.index.get(c)
        return 0 if i is None else self.freqs.counts[i]

    def items(self):
        counts = self.freqs.counts
        return [(c, counts[i]) for i, c in enumerate(self.colours)]

    def add(self, c):
        i = self.index.get(c)
        if i is None:
            i = len(self.colours)
            self.index[c] = i
            self.colours.append(c)
            self.freqs.grow(i + 1)
        self.freqs.add(i, 1)
        if self.freqs.total >= PALETTE_LIMIT:
            n = len(self.colours)
            self.freqs.set_all([max(1, k >> 1) for k in self.freqs.counts[:n]])

    def reset_counts(self):
        self.freqs.set_all([1] * len(self.colours))


def _scaled(hist):
    """Copy of ``hist`` with counts shrunk until count sum + escape fits the coder."""
    shift = 0
    while True:
        shift += 1
        out = {c: max(1, k >> shift) for c, k in hist.items()}
        if sum(out.values()) + len(out) < MAX_TOTAL:
            return out


def med_predict(a, b, c):
    """Median edge detector for one channel: a=W, b=N, c=NW."""
    if c >= a and c >= b:
        return a if a < b else b
    if c <= a and c <= b:
        return a if a > b else b
    return a + b - c


class ScfModel:
    """Model state for one coding pass: pattern store, palette, residual models."""

    def __init__(self, soft_radius=0, capacity=DEFAULT_CAPACITY):
        self.store = PatternStore(capacity, soft_radius)
        self.palette = ColourPalette()
        self.residuals = [AdaptiveModel(256, RESIDUAL_INCREMENT) for _ in range(3)]
        self.stats = StageStats()

    # -- distributions -------------------------------------------------

    def stage1_distribution(self, t):
        """``(colours, counts)`` with the escape count last, or None."""
        hist = self.store.lookup(t)
        if hist is None:
            return None
        return list(hist), list(hist.values()) + [len(hist)]

    def stage2_distribution(self, exclude=()):
        """``(colours, counts)`` with the escape count last; escape-only when empty."""
        ex = set(exclude)
        items = [(c, k) for c, k in self.palette.items() if c not in ex]
        return [c for c, _ in items], [k for _, k in items] + [len(items) + 1]

    # -- coding --------------------------------------------------------

    def encode_pixel(self, enc, t, x):
        hist = self.store.lookup(t)
        stats = self.stats
        if hist is not None:
            n = len(hist)
            tot = sum(hist.values()) + n
            if tot >= MAX_TOTAL:
                hist = _scaled(hist)
                tot = sum(hist.values()) + n
            cnt = hist.get(x)
            if cnt:
                lo = 0
                for c, k in hist.items():
                    if c == x:
                        break
                    lo += k
                enc.encode(lo, cnt, tot)
                stats.stage1 += 1
                self.update_statistics(t, x)
                return
            enc.encode(tot - n, n, tot)
            stats.escapes += 1

        pal = self.palette
        fen = pal.freqs
        excl = self._exclude(hist)
        ncol = len(pal.colours) - len(excl)
        coded = False
        if ncol:
            ptot = fen.total
            tot = ptot + ncol + 1
            i = pal.index.get(x)
            if i is not None:
                enc.encode(fen.prefix(i), fen.counts[i], tot)
                coded = True
            else:
                enc.encode(ptot, ncol + 1, tot)
                stats.escapes += 1
        for i, k in excl:
            fen.add(i, k)
        if coded:
            stats.stage2 += 1
        else:
            self._encode_residual(enc, t, x)
            stats.stage3 += 1
        self.update_statistics(t, x)

    def decode_pixel(self, dec, t):
        hist = self.store.lookup(t)
        stats = self.stats
        if hist is not None:
            n = len(hist)
            tot = sum(hist.values()) + n
            if tot >= MAX_TOTAL:
                hist = _scaled(hist)
                tot = sum(hist.values()) + n
            target = dec.decode_target(tot)
            if target >= tot:
                raise ValueError("corrupt stream: symbol outside stage-1 model")
            if target < tot - n:
                lo = 0
                for c, k in hist.items():
                    if target < lo + k:
                        dec.consume(lo, k, tot)
                        stats.stage1 += 1
                        self.update_statistics(t, c)
                        return c
                    lo += k
            dec.consume(tot - n, n, tot)
            stats.escapes += 1

        pal = self.palette
        fen = pal.freqs
        excl = self._exclude(hist)
        ncol = len(pal.colours) - len(excl)
        x = None
        if ncol:
            ptot = fen.total
            tot = ptot + ncol + 1
            target = dec.decode_target(tot)
            if target >= tot:
                raise ValueError("corrupt stream: symbol outside stage-2 model")
            if target < ptot:
                i, lo = fen.find(target)
                dec.consume(lo, fen.counts[i], tot)
                x = pal.colours[i]
            else:
                dec.consume(ptot, ncol + 1, tot)
                stats.escapes += 1
        for i, k in excl:
            fen.add(i, k)
        if x is not None:
            stats.stage2 += 1
        else:
            x = self._decode_residual(dec, t)
            stats.stage3 += 1
        self.update_statistics(t, x)
        return x

    def _exclude(self, hist):
        """Zero the palette counts of colours the stage-1 escape ruled out."""
        if hist is None:
            return []
        index = self.palette.index
        fen = self.palette.freqs
        excl = []
        for c in hist:
            i = index.get(c)
            if i is not None:
                k = fen.counts[i]
                excl.append((i, k))
                fen.add(i, -k)
        return excl

    def _encode_residual(self, enc, t, x):
        w, n, nw = t[0], t[1], t[2]
        for shift, m in zip((16, 8, 0), self.residuals):
            p = med_predict((w >> shift) & 0xFF, (n >> shift) & 0xFF, (nw >> shift) & 0xFF)
            r = (((x >> shift) & 0xFF) - p) & 0xFF
            lo, f = m.span(r)
            enc.encode(lo, f, m.total)
            m.update(r)

    def _decode_residual(self, dec, t):
        w, n, nw = t[0], t[1], t[2]
        x = 0
        for shift, m in zip((16, 8, 0), self.residuals):
            p = med_predict((w >> shift) & 0xFF, (n >> shift) & 0xFF, (nw >> shift) & 0xFF)
            r = dec.decode_symbol(m)
            m.update(r)
            x |= ((p + r) & 0xFF) << shift
        return x

    def update_statistics(self, t, x):
        self.store.update(t, x)
        self.palette.add(x)

    # -- between passes ------------------------------------------------

    def apply_reset_policy(self, policy=DEFAULT_POLICY):
        """Apply ``(pattern_list, palette)`` policies; residual models are kept."""
        pattern_policy, palette_policy = policy
        if pattern_policy is ResetPolicy.RESET_COUNTS:
            self.store.reset_counts()
        elif pattern_policy is ResetPolicy.REMOVE:
            self.store.clear()
        if palette_policy is ResetPolicy.RESET_COUNTS:
            self.palette.reset_counts()
        elif palette_policy is ResetPolicy.REMOVE:
            self.palette.clear()

    def state_digest(self):
        """Hash of the complete model state, for encoder/decoder lockstep checks."""
        state = (
            list(self.store.patterns.items()),
            self.palette.items(),
            [m.counts for m in self.residuals],
            self.stats.as_dict(),
        )
        return hashlib.blake2b(pickle.dumps(state, protocol=4), digest_size=16).hexdigest()


def _padded(width, height, fill):
    stride = width + 3
    return [fill] * (stride * (height + 2)), stride


def encode_region(model, enc, rows, fill, observer=None):
    """Code a rectangle of packed colours (list of rows) in raster order.

    Template neighbours outside the rectangle read as ``fill``.
    """
    height = len(rows)
    width = len(rows[0])
    buf, P = _padded(width, height, fill)
    P2 = 2 * P
    code = model.encode_pixel
    for y, row in enumerate(rows):
        i = (y + 2) * P + 2
        for x in row:
            t = (buf[i - 1], buf[i - P], buf[i - P - 1], buf[i - P + 1], buf[i - 2], buf[i - P2])
            code(enc, t, x)
            buf[i] = x
            if observer is not None:
                observer(model)
            i += 1


def decode_region(model, dec, width, height, fill, observer=None):
    """Inverse of :func:`encode_region`; returns the list of decoded rows."""
    buf, P = _padded(width, height, fill)
    P2 = 2 * P
    code = model.decode_pixel
    rows = []
    for y in range(height):
        i = (y + 2) * P + 2
        for _ in range(width):
            t = (buf[i - 1], buf[i - P], buf[i - P - 1], buf[i - P + 1], buf[i - 2], buf[i - P2])
            buf[i] = code(dec, t)
            if observer is not None:
                observer(model)
            i += 1
        start = (y + 2) * P + 2
        rows.append(buf[start : start + width])
    return rows
