"""Counter-based Gaussian streams (Philox4x64-10 + ziggurat).

Every Gaussian draw is a pure function of a 128-bit key and a counter, so any
element of any stream can be produced on its own.  The noisy-weight sampler
relies on this to make results independent of batch boundaries, sharding and
thread count.

Counter layout::

    c0 = (tag << 40) | (element_index >> 2)   lane = element_index & 3
    c1 = stream id        (tensor slot, < 2**40)
    c2 = pass index       (image index when noise is drawn per pass)
    c3 = trial index

``tag`` is 0 for the primary word of an element.  The rare ziggurat
rejections consume further words with tag 1, 2, ... so each element owns a
private sequential sub-stream.

Normals come from a 256-layer ziggurat over the 64-bit words: 8 bits pick
the layer, 1 bit the sign and the top 53 bits the abscissa.
"""
from __future__ import annotations

import math

import numpy as np

from ._backend import USE_NUMBA

MASK64 = (1 << 64) - 1
MAX_ELEMENTS = 1 << 42
MAX_STREAM = 1 << 40

PHILOX_M0 = np.uint64(0xD2E7470EE14C6C93)
PHILOX_M1 = np.uint64(0xCA5A826395121157)
PHILOX_W0 = np.uint64(0x9E3779B97F4A7C15)
PHILOX_W1 = np.uint64(0xBB67AE8584CAA73B)
ROUNDS = 10

_U32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_INV53 = 1.0 / 9007199254740992.0


def seed_to_key(seed: int) -> tuple[int, int]:
    """Map a non-negative integer seed (up to 128 bits) to a Philox key."""
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return seed & MASK64, (seed >> 64) & MASK64


def _ziggurat_tables(layers: int = 256, r: float = 3.6541528853610088,
                     v: float = 0.00492867323399):
    f = lambda t: math.exp(-0.5 * t * t)  # noqa: E731
    xs = np.zeros(layers + 1)
    xs[0] = v / f(r)
    xs[1] = r
    for i in range(2, layers):
        xs[i] = math.sqrt(-2.0 * math.log(v / xs[i - 1] + f(xs[i - 1])))
    xs[layers] = 0.0
    fs = np.exp(-0.5 * xs * xs)
    return xs, fs


ZIG_X, ZIG_F = _ziggurat_tables()
ZIG_R = float(ZIG_X[1])


# --------------------------------------------------------------------------
# pure numpy path
# --------------------------------------------------------------------------


def _mulhilo_np(a, b):
    a_lo = a & _U32
    a_hi = a >> _S32
    b_lo = b & _U32
    b_hi = b >> _S32
    lo_lo = a_lo * b_lo
    hi_lo = a_hi * b_lo
    lo_hi = a_lo * b_hi
    cross = (lo_lo >> _S32) + (hi_lo & _U32) + lo_hi
    hi = a_hi * b_hi + (hi_lo >> _S32) + (cross >> _S32)
    return hi, a * b


def philox4x64_np(counters: np.ndarray, key0: int, key1: int) -> np.ndarray:
    """Philox4x64-10 bijection applied row-wise to an ``(n, 4)`` uint64 array."""
    c = np.asarray(counters, dtype=np.uint64).reshape(-1, 4)
    c0, c1, c2, c3 = (c[:, i].copy() for i in range(4))
    k0 = np.uint64(key0)
    k1 = np.uint64(key1)
    with np.errstate(over="ignore"):
        for r in range(ROUNDS):
            if r:
                k0 = k0 + PHILOX_W0
                k1 = k1 + PHILOX_W1
            hi0, lo0 = _mulhilo_np(PHILOX_M0, c0)
            hi1, lo1 = _mulhilo_np(PHILOX_M1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return np.stack([c0, c1, c2, c3], axis=1)


def _words_np(key, stream, passes, trial, elems, tags):
    """One 64-bit word per (pass, element, tag) triple; all arrays flat."""
    ctr = np.empty((elems.size, 4), dtype=np.uint64)
    ctr[:, 0] = (tags.astype(np.uint64) << np.uint64(40)) | (elems.astype(np.uint64) >> np.uint64(2))
    ctr[:, 1] = np.uint64(stream)
    ctr[:, 2] = passes
    ctr[:, 3] = np.uint64(trial)
    out = philox4x64_np(ctr, key[0], key[1])
    return out[np.arange(elems.size), (elems & 3).astype(np.intp)]


def _unit_np(w):
    return (w >> np.uint64(11)).astype(np.float64) * _INV53


def _ziggurat_np(words, key, stream, passes, trial, elems):
    """Vectorised ziggurat; rejected elements draw from their own sub-stream."""
    n = words.size
    out = np.empty(n, dtype=np.float64)
    pending = np.arange(n)
    tags = np.zeros(n, dtype=np.int64)
    w = words
    while pending.size:
        layer = (w & np.uint64(0xFF)).astype(np.intp)
        neg = ((w >> np.uint64(8)) & np.uint64(1)).astype(bool)
        x = _unit_np(w) * ZIG_X[layer]
        ok = x < ZIG_X[layer + 1]
        rest = ~ok
        if rest.any():
            idx = np.nonzero(rest)[0]
            gi = pending[idx]
            tags[gi] += 1
            u2 = _unit_np(_words_np(key, stream, passes[gi], trial, elems[gi], tags[gi]))
            lay = layer[idx]
            tail = lay == 0
            # wedge test for layers 1..255
            wedge = ~tail
            y = ZIG_F[lay[wedge]] + u2[wedge] * (ZIG_F[lay[wedge] + 1] - ZIG_F[lay[wedge]])
            ok[idx[wedge]] = y < np.exp(-0.5 * x[idx[wedge]] ** 2)
            # tail beyond r: Marsaglia's method, looped per element
            for j in np.nonzero(tail)[0]:
                g = gi[j]
                a_u = u2[j]
                while True:
                    tags[g] += 1
                    b_u = _unit_np(_words_np(key, stream, passes[g:g + 1], trial,
                                             elems[g:g + 1], tags[g:g + 1]))[0]
                    a = -math.log1p(-a_u) / ZIG_R
                    b = -math.log1p(-b_u)
                    if 2.0 * b > a * a:
                        x[idx[j]] = ZIG_R + a
                        ok[idx[j]] = True
                        break
                    tags[g] += 1
                    a_u = _unit_np(_words_np(key, stream, passes[g:g + 1], trial,
                                             elems[g:g + 1], tags[g:g + 1]))[0]
        val = np.where(neg, -x, x)
        out[pending[ok]] = val[ok]
        pending = pending[~ok]
        if pending.size:
            tags[pending] += 1
            w = _words_np(key, stream, passes[pending], trial, elems[pending], tags[pending])
    return out


def _normals_np(key, stream, passes, trial, start, count):
    n_pass = passes.size
    if count == 0 or n_pass == 0:
        return np.empty((n_pass, count), dtype=np.float64)
    first = start >> 2
    last = (start + count - 1) >> 2
    blocks = np.arange(first, last + 1, dtype=np.uint64)
    nb_ = blocks.size
    ctr = np.empty((n_pass * nb_, 4), dtype=np.uint64)
    ctr[:, 0] = np.tile(blocks, n_pass)
    ctr[:, 1] = np.uint64(stream)
    ctr[:, 2] = np.repeat(passes, nb_)
    ctr[:, 3] = np.uint64(trial)
    off = start - first * 4
    words = philox4x64_np(ctr, key[0], key[1]).reshape(n_pass, nb_ * 4)[:, off:off + count]
    elems = np.broadcast_to(np.arange(start, start + count, dtype=np.int64), (n_pass, count))
    pp = np.broadcast_to(passes[:, None], (n_pass, count))
    z = _ziggurat_np(words.ravel(), key, stream, pp.ravel(), trial, elems.ravel())
    return z.reshape(n_pass, count)


# --------------------------------------------------------------------------
# numba path
# --------------------------------------------------------------------------

if USE_NUMBA:
    import numba as nb
    from llvmlite import ir
    from numba import types
    from numba.extending import intrinsic

    @intrinsic
    def _mulhilo_i128(typingctx, a, b):
        sig = types.UniTuple(types.uint64, 2)(types.uint64, types.uint64)

        def codegen(context, builder, signature, args):
            i128 = ir.IntType(128)
            p = builder.mul(builder.zext(args[0], i128), builder.zext(args[1], i128))
            hi = builder.trunc(builder.lshr(p, ir.Constant(i128, 64)), ir.IntType(64))
            lo = builder.trunc(p, ir.IntType(64))
            return context.make_tuple(builder, signature.return_type, [hi, lo])

        return sig, codegen

    @nb.njit(inline="always")
    def philox_block(c0, c1, c2, c3, k0, k1):
        m0 = np.uint64(0xD2E7470EE14C6C93)
        m1 = np.uint64(0xCA5A826395121157)
        w0 = np.uint64(0x9E3779B97F4A7C15)
        w1 = np.uint64(0xBB67AE8584CAA73B)
        for r in range(10):
            if r > 0:
                k0 = k0 + w0
                k1 = k1 + w1
            hi0, lo0 = _mulhilo_i128(m0, c0)
            hi1, lo1 = _mulhilo_i128(m1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        return c0, c1, c2, c3

    @nb.njit(cache=True)
    def philox4x64_nb(counters, key0, key1):
        n = counters.shape[0]
        out = np.empty((n, 4), dtype=np.uint64)
        for i in range(n):
            a, b, c, d = philox_block(
                counters[i, 0], counters[i, 1], counters[i, 2], counters[i, 3], key0, key1
            )
            out[i, 0] = a
            out[i, 1] = b
            out[i, 2] = c
            out[i, 3] = d
        return out

    @nb.njit(inline="always")
    def _unit(w):
        return np.float64(w >> np.uint64(11)) * 1.1102230246251565e-16

    @nb.njit
    def _word(k0, k1, stream, c2, trial, elem, tag):
        c0 = (np.uint64(tag) << np.uint64(40)) | (np.uint64(elem) >> np.uint64(2))
        a, b, c, d = philox_block(c0, stream, c2, trial, k0, k1)
        lane = elem & 3
        if lane == 0:
            return a
        if lane == 1:
            return b
        if lane == 2:
            return c
        return d

    @nb.njit
    def _zig_slow(w, k0, k1, stream, c2, trial, elem, zx, zf, r):
        # called only when the primary word fell outside its core rectangle
        tag = 0
        while True:
            layer = np.int64(w & np.uint64(0xFF))
            neg = (w >> np.uint64(8)) & np.uint64(1)
            x = _unit(w) * zx[layer]
            if x < zx[layer + 1]:
                return -x if neg else x
            tag += 1
            u2 = _unit(_word(k0, k1, stream, c2, trial, elem, tag))
            if layer == 0:
                a_u = u2
                while True:
                    tag += 1
                    b_u = _unit(_word(k0, k1, stream, c2, trial, elem, tag))
                    a = -np.log1p(-a_u) / r
                    b = -np.log1p(-b_u)
                    if 2.0 * b > a * a:
                        x = r + a
                        return -x if neg else x
                    tag += 1
                    a_u = _unit(_word(k0, k1, stream, c2, trial, elem, tag))
            else:
                y = zf[layer] + u2 * (zf[layer + 1] - zf[layer])
                if y < np.exp(-0.5 * x * x):
                    return -x if neg else x
            tag += 1
            w = _word(k0, k1, stream, c2, trial, elem, tag)

    @nb.njit(inline="always")
    def zig_normal(w, k0, k1, stream, c2, trial, elem, zx, zf, r):
        layer = np.int64(w & np.uint64(0xFF))
        x = _unit(w) * zx[layer]
        if x < zx[layer + 1]:
            if (w >> np.uint64(8)) & np.uint64(1):
                return -x
            return x
        return _zig_slow(w, k0, k1, stream, c2, trial, elem, zx, zf, r)

    @nb.njit(cache=True, parallel=True)
    def _normals_nb(k0, k1, stream, passes, trial, start, count, zx, zf, r):
        n_pass = passes.shape[0]
        out = np.empty((n_pass, count), dtype=np.float64)
        if count == 0:
            return out
        first = start >> 2
        last = (start + count - 1) >> 2
        for p in nb.prange(n_pass):
            c2 = passes[p]
            for blk in range(first, last + 1):
                ws = philox_block(np.uint64(blk), stream, c2, trial, k0, k1)
                for lane in range(4):
                    e = blk * 4 + lane
                    if start <= e < start + count:
                        out[p, e - start] = zig_normal(
                            ws[lane], k0, k1, stream, c2, trial, e, zx, zf, r
                        )
        return out


def philox4x64(counters: np.ndarray, key0: int, key1: int) -> np.ndarray:
    counters = np.ascontiguousarray(counters, dtype=np.uint64).reshape(-1, 4)
    if USE_NUMBA:
        return philox4x64_nb(counters, np.uint64(key0), np.uint64(key1))
    return philox4x64_np(counters, key0, key1)


def _check_stream(stream: int, start: int, count: int) -> None:
    if count < 0 or start < 0:
        raise ValueError("start and count must be non-negative")
    if not 0 <= stream < MAX_STREAM:
        raise ValueError(f"stream id out of range: {stream}")
    if start + count > MAX_ELEMENTS:
        raise ValueError("element index exceeds counter capacity")


def normal_block(
    seed: int,
    stream: int,
    passes,
    trial: int,
    count: int,
    start: int = 0,
    backend: str | None = None,
) -> np.ndarray:
    """Standard normals for elements ``start .. start+count-1`` of each pass.

    Returns an array of shape ``(len(passes), count)``.  Row ``i`` depends only
    on ``(seed, stream, passes[i], trial)`` and the element indices, never on
    which other passes were requested alongside it.
    """
    _check_stream(stream, start, count)
    key = seed_to_key(seed)
    passes = np.ascontiguousarray(np.atleast_1d(np.asarray(passes)).astype(np.uint64))
    backend = backend or ("numba" if USE_NUMBA else "numpy")
    if backend == "numba":
        if not USE_NUMBA:
            raise RuntimeError("numba backend requested but disabled")
        return _normals_nb(
            np.uint64(key[0]), np.uint64(key[1]), np.uint64(stream), passes,
            np.uint64(trial), int(start), int(count), ZIG_X, ZIG_F, ZIG_R,
        )
    return _normals_np(key, stream, passes, trial, start, count)


def normal_stream(seed: int, count: int, stream: int = 0, pass_index: int = 0,
                  trial: int = 0, start: int = 0) -> np.ndarray:
    """One-dimensional convenience wrapper around :func:`normal_block`."""
    return normal_block(seed, stream, [pass_index], trial, count, start)[0]
