# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of tonsim.sim.run_simulation_pure.

Every RNG draw, floating-point expression, and event ordering here mirrors
the pure-Python reference engine; the two must return bit-identical stats.
Compiled with -ffp-contract=off so no multiply-add fusion sneaks in.
"""

from libc.math cimport exp, log, log1p, floor, pow
from libc.stdint cimport int32_t, int64_t, uint8_t, uint32_t, uint64_t
from libc.stdlib cimport free, malloc, realloc

cdef extern from *:
    """
    #include <stdint.h>
    static inline uint64_t tonsim_mulhi64(uint64_t a, uint64_t b) {
        return (uint64_t)(((__uint128_t)a * (__uint128_t)b) >> 64);
    }
    """
    uint64_t tonsim_mulhi64(uint64_t a, uint64_t b) nogil


cdef uint64_t GOLDEN = <uint64_t>0x9E3779B97F4A7C15
cdef double INV_2_53 = 1.0 / 9007199254740992.0


# ---------------------------------------------------------------- RNG twin

cdef struct Rng:
    uint64_t s0
    uint64_t s1
    uint64_t s2
    uint64_t s3

cdef inline uint64_t _rotl(uint64_t x, int k) noexcept nogil:
    return (x << k) | (x >> (64 - k))

cdef inline uint64_t _mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)

cdef inline void rng_init(Rng* r, uint64_t seed) noexcept nogil:
    cdef uint64_t st = seed
    st = st + GOLDEN
    r.s0 = _mix64(st)
    st = st + GOLDEN
    r.s1 = _mix64(st)
    st = st + GOLDEN
    r.s2 = _mix64(st)
    st = st + GOLDEN
    r.s3 = _mix64(st)
    if r.s0 == 0 and r.s1 == 0 and r.s2 == 0 and r.s3 == 0:
        r.s0 = 1

cdef inline uint64_t rng_next(Rng* r) noexcept nogil:
    cdef uint64_t t0 = r.s0 + r.s3
    cdef uint64_t result = _rotl(t0, 23) + r.s0
    cdef uint64_t t = r.s1 << 17
    r.s2 = r.s2 ^ r.s0
    r.s3 = r.s3 ^ r.s1
    r.s1 = r.s1 ^ r.s2
    r.s0 = r.s0 ^ r.s3
    r.s2 = r.s2 ^ t
    r.s3 = _rotl(r.s3, 45)
    return result

cdef inline double rng_open01(Rng* r) noexcept nogil:
    return (<double>(rng_next(r) >> 11) + 0.5) * INV_2_53

cdef inline uint64_t rng_bounded(Rng* r, uint64_t n) noexcept nogil:
    return tonsim_mulhi64(rng_next(r), n)

cdef inline double rng_exp_rate(Rng* r, double rate) noexcept nogil:
    return -log(rng_open01(r)) / rate

cdef inline double rng_exp_mean(Rng* r, double mean) noexcept nogil:
    return -log(rng_open01(r)) * mean


def rng_sample_u64(seed, count):
    """Raw xoshiro256++ outputs for cross-checking against the Python twin."""
    cdef Rng rng
    rng_init(&rng, <uint64_t>seed)
    return [rng_next(&rng) for _ in range(count)]


def rng_sample_open01(seed, count):
    """Unit-interval doubles for cross-checking against the Python twin."""
    cdef Rng rng
    rng_init(&rng, <uint64_t>seed)
    return [rng_open01(&rng) for _ in range(count)]


# ------------------------------------------------------------- event heap

cdef enum:
    EV_INJECT = 0
    EV_COMPLETE = 1
    EV_FAULT = 2
    EV_END = 3
    NIL = -1

cdef struct Ev:
    double t
    uint64_t seq
    int32_t kind
    int64_t a
    int64_t b

cdef inline bint ev_less(Ev* x, Ev* y) noexcept nogil:
    if x.t != y.t:
        return x.t < y.t
    return x.seq < y.seq


cdef struct Heap:
    Ev* data
    int64_t size
    int64_t cap

cdef inline int heap_push(Heap* h, double t, uint64_t seq, int32_t kind,
                          int64_t a, int64_t b) noexcept nogil:
    cdef int64_t i, parent
    cdef Ev e
    cdef Ev* nd
    if h.size == h.cap:
        nd = <Ev*>realloc(h.data, 2 * h.cap * sizeof(Ev))
        if nd == NULL:
            return -1
        h.data = nd
        h.cap = 2 * h.cap
    e.t = t
    e.seq = seq
    e.kind = kind
    e.a = a
    e.b = b
    i = h.size
    h.size += 1
    while i > 0:
        parent = (i - 1) >> 1
        if ev_less(&e, &h.data[parent]):
            h.data[i] = h.data[parent]
            i = parent
        else:
            break
    h.data[i] = e
    return 0

cdef inline Ev heap_pop(Heap* h) noexcept nogil:
    cdef Ev top = h.data[0]
    cdef Ev last
    cdef int64_t i = 0, child
    h.size -= 1
    if h.size > 0:
        last = h.data[h.size]
        while True:
            child = 2 * i + 1
            if child >= h.size:
                break
            if child + 1 < h.size and ev_less(&h.data[child + 1], &h.data[child]):
                child += 1
            if ev_less(&h.data[child], &last):
                h.data[i] = h.data[child]
                i = child
            else:
                break
        h.data[i] = last
    return top


# -------------------------------------------------------------- simulation

cdef struct Sim:
    # graph
    int64_t n
    int64_t* offsets
    int32_t* neighbors
    uint8_t* alive
    int64_t alive_count
    # dense alive-node ids for O(1) source sampling (swap-remove on death)
    int32_t* alive_list
    int32_t* alive_pos
    # ledger
    double* xi
    double* last_decay
    double* costs
    # transaction slots (parallel arrays, one shared capacity)
    int32_t* s_node
    int32_t* s_index
    int64_t* s_window
    uint32_t* s_gen
    uint8_t* s_inflight
    int32_t* s_next
    int32_t* s_prev
    int64_t slot_len
    int64_t slot_cap
    int32_t* free_list
    int64_t free_len
    int32_t* host_head
    int32_t* host_tail
    int64_t in_flight
    # window accounting (shared capacity)
    int32_t* win_resolved
    int32_t* win_committed
    int64_t win_len
    int64_t win_cap
    # scored-window records (shared capacity)
    double* rec_t
    double* rec_frac
    int32_t* rec_disabled
    int64_t rec_len
    int64_t rec_cap
    # events
    Heap heap
    uint64_t seq
    # parameters
    double capacity
    double decay_h
    double tau0
    double floor_frac
    int64_t window
    int32_t length
    # stats
    int64_t injected
    int64_t committed
    int64_t aborted
    int64_t aborted_no_route
    int64_t aborted_host_died
    int64_t nodes_overload
    int64_t nodes_fault
    int64_t events
    bint choked
    double choke_time
    double choke_disabled_frac
    bint all_dead
    double all_dead_time
    int oom


cdef inline int sim_push(Sim* s, double t, int32_t kind, int64_t a, int64_t b) noexcept nogil:
    if heap_push(&s.heap, t, s.seq, kind, a, b) < 0:
        s.oom = 1
        return -1
    s.seq += 1
    return 0


cdef int sim_grow_slots(Sim* s) noexcept nogil:
    cdef int64_t nc = s.slot_cap * 2
    cdef void* p
    p = realloc(s.s_node, nc * sizeof(int32_t))
    if p == NULL:
        return -1
    s.s_node = <int32_t*>p
    p = realloc(s.s_index, nc * sizeof(int32_t))
    if p == NULL:
        return -1
    s.s_index = <int32_t*>p
    p = realloc(s.s_window, nc * sizeof(int64_t))
    if p == NULL:
        return -1
    s.s_window = <int64_t*>p
    p = realloc(s.s_gen, nc * sizeof(uint32_t))
    if p == NULL:
        return -1
    s.s_gen = <uint32_t*>p
    p = realloc(s.s_inflight, nc * sizeof(uint8_t))
    if p == NULL:
        return -1
    s.s_inflight = <uint8_t*>p
    p = realloc(s.s_next, nc * sizeof(int32_t))
    if p == NULL:
        return -1
    s.s_next = <int32_t*>p
    p = realloc(s.s_prev, nc * sizeof(int32_t))
    if p == NULL:
        return -1
    s.s_prev = <int32_t*>p
    p = realloc(s.free_list, nc * sizeof(int32_t))
    if p == NULL:
        return -1
    s.free_list = <int32_t*>p
    s.slot_cap = nc
    return 0


cdef int sim_resolve(Sim* s, int64_t w, bint committed, double t) noexcept nogil:
    """Window bookkeeping for one resolved master transaction."""
    cdef int64_t nc
    cdef void* p
    cdef double frac
    if w >= s.win_cap:
        nc = s.win_cap
        while nc <= w:
            nc *= 2
        p = realloc(s.win_resolved, nc * sizeof(int32_t))
        if p == NULL:
            s.oom = 1
            return -1
        s.win_resolved = <int32_t*>p
        p = realloc(s.win_committed, nc * sizeof(int32_t))
        if p == NULL:
            s.oom = 1
            return -1
        s.win_committed = <int32_t*>p
        s.win_cap = nc
    while s.win_len <= w:
        s.win_resolved[s.win_len] = 0
        s.win_committed[s.win_len] = 0
        s.win_len += 1
    s.win_resolved[w] += 1
    if committed:
        s.win_committed[w] += 1
    if s.win_resolved[w] == s.window:
        frac = <double>s.win_committed[w] / <double>s.window
        if s.rec_len == s.rec_cap:
            nc = s.rec_cap * 2
            p = realloc(s.rec_t, nc * sizeof(double))
            if p == NULL:
                s.oom = 1
                return -1
            s.rec_t = <double*>p
            p = realloc(s.rec_frac, nc * sizeof(double))
            if p == NULL:
                s.oom = 1
                return -1
            s.rec_frac = <double*>p
            p = realloc(s.rec_disabled, nc * sizeof(int32_t))
            if p == NULL:
                s.oom = 1
                return -1
            s.rec_disabled = <int32_t*>p
            s.rec_cap = nc
        s.rec_t[s.rec_len] = t
        s.rec_frac[s.rec_len] = frac
        s.rec_disabled[s.rec_len] = <int32_t>(s.n - s.alive_count)
        s.rec_len += 1
        if (not s.choked) and frac <= s.floor_frac:
            s.choked = True
            s.choke_time = t
            s.choke_disabled_frac = <double>(s.n - s.alive_count) / <double>s.n
    return 0


cdef inline int64_t sim_alloc_slot(Sim* s, int32_t node, int32_t idx, int64_t w) noexcept nogil:
    cdef int64_t slot
    s.in_flight += 1
    if s.free_len > 0:
        s.free_len -= 1
        slot = s.free_list[s.free_len]
    else:
        if s.slot_len == s.slot_cap:
            if sim_grow_slots(s) < 0:
                s.oom = 1
                return -1
        slot = s.slot_len
        s.slot_len += 1
        s.s_gen[slot] = 0
    s.s_node[slot] = node
    s.s_index[slot] = idx
    s.s_window[slot] = w
    s.s_inflight[slot] = 1
    s.s_next[slot] = NIL
    s.s_prev[slot] = NIL
    return slot


cdef inline void sim_free_slot(Sim* s, int64_t slot) noexcept nogil:
    s.in_flight -= 1
    s.s_inflight[slot] = 0
    s.s_gen[slot] += 1
    s.free_list[s.free_len] = <int32_t>slot
    s.free_len += 1


cdef inline void sim_host_append(Sim* s, int64_t v, int64_t slot) noexcept nogil:
    cdef int32_t tail = s.host_tail[v]
    s.s_prev[slot] = tail
    s.s_next[slot] = NIL
    if tail == NIL:
        s.host_head[v] = <int32_t>slot
    else:
        s.s_next[tail] = <int32_t>slot
    s.host_tail[v] = <int32_t>slot


cdef inline void sim_host_remove(Sim* s, int64_t v, int64_t slot) noexcept nogil:
    cdef int32_t p = s.s_prev[slot]
    cdef int32_t q = s.s_next[slot]
    if p == NIL:
        s.host_head[v] = q
    else:
        s.s_next[p] = q
    if q == NIL:
        s.host_tail[v] = p
    else:
        s.s_prev[q] = p
    s.s_prev[slot] = NIL
    s.s_next[slot] = NIL


cdef int sim_kill(Sim* s, int64_t v, bint by_fault, double t) noexcept nogil:
    cdef int32_t cur, nxt
    cdef int32_t last_id, pos
    s.alive[v] = 0
    s.alive_count -= 1
    last_id = s.alive_list[s.alive_count]
    pos = s.alive_pos[v]
    s.alive_list[pos] = last_id
    s.alive_pos[last_id] = pos
    if by_fault:
        s.nodes_fault += 1
    else:
        s.nodes_overload += 1
    cur = s.host_head[v]
    while cur != NIL:
        nxt = s.s_next[cur]
        s.aborted += 1
        s.aborted_host_died += 1
        if sim_resolve(s, s.s_window[cur], False, t) < 0:
            return -1
        sim_free_slot(s, cur)
        cur = nxt
    s.host_head[v] = NIL
    s.host_tail[v] = NIL
    if s.alive_count == 0 and not s.all_dead:
        s.all_dead = True
        s.all_dead_time = t
        if not s.choked:
            s.choked = True
            s.choke_time = t
            s.choke_disabled_frac = 1.0
    return 0


cdef int sim_start_subtxn(Sim* s, int64_t slot, int64_t v, double t) noexcept nogil:
    """Charge the slot's subtransaction at alive node v; may kill v."""
    s.xi[v] = s.xi[v] * exp(-(t - s.last_decay[v]) / s.decay_h)
    s.last_decay[v] = t
    s.xi[v] += s.costs[s.s_index[slot]]
    if s.xi[v] >= s.capacity:
        return sim_kill(s, v, False, t)
    return sim_push(s, t + s.tau0, EV_COMPLETE, slot, <int64_t>s.s_gen[slot])


cdef int sim_generate_graph(Sim* s, Rng* rng, double p) noexcept nogil:
    """G(n, p) via geometric skipping; CSR fill in edge insertion order.

    Matches tonsim.network.sample_edges draw-for-draw.
    """
    cdef int64_t n = s.n
    cdef int64_t cap = 64
    cdef int64_t m = 0
    cdef int32_t* eu = NULL
    cdef int32_t* ev_ = NULL
    cdef int64_t v, w, i
    cdef int64_t* cursor = NULL
    cdef double log_q, u
    cdef void* tmp

    if p > 0.0 and n >= 2:
        eu = <int32_t*>malloc(cap * sizeof(int32_t))
        ev_ = <int32_t*>malloc(cap * sizeof(int32_t))
        if eu == NULL or ev_ == NULL:
            free(eu)
            free(ev_)
            return -1
        if p >= 1.0:
            for v in range(1, n):
                for w in range(v):
                    if m == cap:
                        cap *= 2
                        tmp = realloc(eu, cap * sizeof(int32_t))
                        if tmp == NULL:
                            free(eu)
                            free(ev_)
                            return -1
                        eu = <int32_t*>tmp
                        tmp = realloc(ev_, cap * sizeof(int32_t))
                        if tmp == NULL:
                            free(eu)
                            free(ev_)
                            return -1
                        ev_ = <int32_t*>tmp
                    eu[m] = <int32_t>v
                    ev_[m] = <int32_t>w
                    m += 1
        else:
            log_q = log1p(-p)
            v = 1
            w = -1
            while v < n:
                u = rng_open01(rng)
                w = w + 1 + <int64_t>floor(log(u) / log_q)
                while w >= v and v < n:
                    w -= v
                    v += 1
                if v < n:
                    if m == cap:
                        cap *= 2
                        tmp = realloc(eu, cap * sizeof(int32_t))
                        if tmp == NULL:
                            free(eu)
                            free(ev_)
                            return -1
                        eu = <int32_t*>tmp
                        tmp = realloc(ev_, cap * sizeof(int32_t))
                        if tmp == NULL:
                            free(eu)
                            free(ev_)
                            return -1
                        ev_ = <int32_t*>tmp
                    eu[m] = <int32_t>v
                    ev_[m] = <int32_t>w
                    m += 1

    s.offsets = <int64_t*>malloc((n + 1) * sizeof(int64_t))
    s.neighbors = <int32_t*>malloc((2 * m if m > 0 else 1) * sizeof(int32_t))
    cursor = <int64_t*>malloc(n * sizeof(int64_t))
    if s.offsets == NULL or s.neighbors == NULL or cursor == NULL:
        free(eu)
        free(ev_)
        free(cursor)
        return -1
    for i in range(n + 1):
        s.offsets[i] = 0
    for i in range(m):
        s.offsets[eu[i] + 1] += 1
        s.offsets[ev_[i] + 1] += 1
    for i in range(n):
        s.offsets[i + 1] += s.offsets[i]
    for i in range(n):
        cursor[i] = s.offsets[i]
    for i in range(m):
        v = eu[i]
        w = ev_[i]
        s.neighbors[cursor[v]] = <int32_t>w
        cursor[v] += 1
        s.neighbors[cursor[w]] = <int32_t>v
        cursor[w] += 1
    free(cursor)
    free(eu)
    free(ev_)
    return 0


cdef int sim_run(Sim* s, Rng* rng, double rate, double fault_mean,
                 bint faults_enabled, double horizon) noexcept nogil:
    cdef Ev e
    cdef int64_t v, w, slot, ordinal, src, idx
    cdef int64_t k, alive_nbrs, pick, nxt_node
    cdef double t

    if sim_push(s, horizon, EV_END, 0, 0) < 0:
        return -1
    if faults_enabled:
        for v in range(s.n):
            if sim_push(s, rng_exp_mean(rng, fault_mean), EV_FAULT, v, 0) < 0:
                return -1
    if rate > 0.0:
        if sim_push(s, rng_exp_rate(rng, rate), EV_INJECT, 0, 0) < 0:
            return -1

    while s.heap.size > 0:
        e = heap_pop(&s.heap)
        t = e.t
        if e.kind == EV_END:
            break
        s.events += 1
        if e.kind == EV_INJECT:
            ordinal = s.injected
            s.injected += 1
            w = ordinal // s.window
            if s.alive_count > 0:
                src = s.alive_list[rng_bounded(rng, <uint64_t>s.alive_count)]
            else:
                src = NIL
            if sim_push(s, t + rng_exp_rate(rng, rate), EV_INJECT, 0, 0) < 0:
                return -1
            if src != NIL:
                slot = sim_alloc_slot(s, <int32_t>src, 0, w)
                if slot < 0:
                    return -1
                sim_host_append(s, src, slot)
                if sim_start_subtxn(s, slot, src, t) < 0:
                    return -1
            else:
                # no alive node can source the transaction
                s.aborted += 1
                s.aborted_host_died += 1
                if sim_resolve(s, w, False, t) < 0:
                    return -1
        elif e.kind == EV_COMPLETE:
            slot = e.a
            if <int64_t>s.s_gen[slot] != e.b:
                continue
            v = s.s_node[slot]
            idx = s.s_index[slot]
            if idx + 1 == s.length:
                s.committed += 1
                if sim_resolve(s, s.s_window[slot], True, t) < 0:
                    return -1
                sim_host_remove(s, v, slot)
                sim_free_slot(s, slot)
            else:
                alive_nbrs = 0
                for k in range(s.offsets[v], s.offsets[v + 1]):
                    if s.alive[s.neighbors[k]]:
                        alive_nbrs += 1
                if alive_nbrs == 0:
                    s.aborted += 1
                    s.aborted_no_route += 1
                    if sim_resolve(s, s.s_window[slot], False, t) < 0:
                        return -1
                    sim_host_remove(s, v, slot)
                    sim_free_slot(s, slot)
                else:
                    pick = <int64_t>rng_bounded(rng, <uint64_t>alive_nbrs)
                    nxt_node = NIL
                    for k in range(s.offsets[v], s.offsets[v + 1]):
                        if s.alive[s.neighbors[k]]:
                            if pick == 0:
                                nxt_node = s.neighbors[k]
                                break
                            pick -= 1
                    sim_host_remove(s, v, slot)
                    s.s_node[slot] = <int32_t>nxt_node
                    s.s_index[slot] = <int32_t>(idx + 1)
                    sim_host_append(s, nxt_node, slot)
                    if sim_start_subtxn(s, slot, nxt_node, t) < 0:
                        return -1
        else:  # EV_FAULT
            v = e.a
            if s.alive[v]:
                if sim_kill(s, v, True, t) < 0:
                    return -1
    return 0


def run_kernel(int64_t n_nodes, double density, double capacity,
               int32_t txn_length, double subtxn_time, double sim_duration,
               double decay_time, double psi0, double alpha,
               double injection_rate, fault_mean_delay, uint64_t seed,
               int64_t choke_window, double choke_commit_floor):
    """Run one simulation; returns a dict of raw stats (see tonsim.kernel).

    `fault_mean_delay` may be None for a disabled fault injector.
    """
    cdef Sim s
    cdef Rng rng
    cdef int64_t n = n_nodes
    cdef double p = density
    cdef double rate = injection_rate
    cdef bint faults_enabled = fault_mean_delay is not None
    cdef double fault_mean = <double>fault_mean_delay if faults_enabled else 0.0
    cdef double horizon = sim_duration
    cdef int rc
    cdef int64_t i

    s.n = n
    s.offsets = NULL
    s.neighbors = NULL
    s.alive = NULL
    s.alive_list = NULL
    s.alive_pos = NULL
    s.xi = NULL
    s.last_decay = NULL
    s.costs = NULL
    s.s_node = NULL
    s.s_index = NULL
    s.s_window = NULL
    s.s_gen = NULL
    s.s_inflight = NULL
    s.s_next = NULL
    s.s_prev = NULL
    s.free_list = NULL
    s.host_head = NULL
    s.host_tail = NULL
    s.win_resolved = NULL
    s.win_committed = NULL
    s.rec_t = NULL
    s.rec_frac = NULL
    s.rec_disabled = NULL
    s.heap.data = NULL
    s.oom = 0

    try:
        rng_init(&rng, <uint64_t>seed)

        s.alive_count = n
        s.in_flight = 0
        s.slot_len = 0
        s.slot_cap = 256
        s.free_len = 0
        s.win_len = 0
        s.win_cap = 64
        s.rec_len = 0
        s.rec_cap = 64
        s.seq = 0
        s.capacity = capacity
        s.decay_h = decay_time
        s.tau0 = subtxn_time
        s.floor_frac = choke_commit_floor
        s.window = choke_window
        s.length = <int32_t>txn_length
        s.injected = 0
        s.committed = 0
        s.aborted = 0
        s.aborted_no_route = 0
        s.aborted_host_died = 0
        s.nodes_overload = 0
        s.nodes_fault = 0
        s.events = 0
        s.choked = False
        s.choke_time = 0.0
        s.choke_disabled_frac = 0.0
        s.all_dead = False
        s.all_dead_time = 0.0

        s.alive = <uint8_t*>malloc(n * sizeof(uint8_t))
        s.alive_list = <int32_t*>malloc(n * sizeof(int32_t))
        s.alive_pos = <int32_t*>malloc(n * sizeof(int32_t))
        s.xi = <double*>malloc(n * sizeof(double))
        s.last_decay = <double*>malloc(n * sizeof(double))
        s.costs = <double*>malloc(txn_length * sizeof(double))
        s.host_head = <int32_t*>malloc(n * sizeof(int32_t))
        s.host_tail = <int32_t*>malloc(n * sizeof(int32_t))
        s.s_node = <int32_t*>malloc(s.slot_cap * sizeof(int32_t))
        s.s_index = <int32_t*>malloc(s.slot_cap * sizeof(int32_t))
        s.s_window = <int64_t*>malloc(s.slot_cap * sizeof(int64_t))
        s.s_gen = <uint32_t*>malloc(s.slot_cap * sizeof(uint32_t))
        s.s_inflight = <uint8_t*>malloc(s.slot_cap * sizeof(uint8_t))
        s.s_next = <int32_t*>malloc(s.slot_cap * sizeof(int32_t))
        s.s_prev = <int32_t*>malloc(s.slot_cap * sizeof(int32_t))
        s.free_list = <int32_t*>malloc(s.slot_cap * sizeof(int32_t))
        s.win_resolved = <int32_t*>malloc(s.win_cap * sizeof(int32_t))
        s.win_committed = <int32_t*>malloc(s.win_cap * sizeof(int32_t))
        s.rec_t = <double*>malloc(s.rec_cap * sizeof(double))
        s.rec_frac = <double*>malloc(s.rec_cap * sizeof(double))
        s.rec_disabled = <int32_t*>malloc(s.rec_cap * sizeof(int32_t))
        s.heap.cap = n + 64
        s.heap.size = 0
        s.heap.data = <Ev*>malloc(s.heap.cap * sizeof(Ev))
        if (s.alive == NULL or s.xi == NULL or s.last_decay == NULL
                or s.costs == NULL or s.host_head == NULL or s.host_tail == NULL
                or s.s_node == NULL or s.s_index == NULL or s.s_window == NULL
                or s.s_gen == NULL or s.s_inflight == NULL or s.s_next == NULL
                or s.s_prev == NULL or s.free_list == NULL
                or s.win_resolved == NULL or s.win_committed == NULL
                or s.rec_t == NULL or s.rec_frac == NULL
                or s.rec_disabled == NULL or s.heap.data == NULL):
            raise MemoryError

        for i in range(n):
            s.alive[i] = 1
            s.xi[i] = 0.0
            s.last_decay[i] = 0.0
            s.host_head[i] = NIL
            s.host_tail[i] = NIL
        for i in range(txn_length):
            s.costs[i] = psi0 * pow(alpha, <double>i)

        with nogil:
            rc = sim_generate_graph(&s, &rng, p)
            if rc == 0:
                rc = sim_run(&s, &rng, rate, fault_mean, faults_enabled, horizon)
        if rc < 0 or s.oom:
            raise MemoryError("simulation kernel ran out of memory")

        records = [
            (s.rec_t[i], s.rec_frac[i], <int64_t>s.rec_disabled[i])
            for i in range(s.rec_len)
        ]
        return {
            "injected": s.injected,
            "committed": s.committed,
            "aborted": s.aborted,
            "aborted_no_route": s.aborted_no_route,
            "aborted_host_died": s.aborted_host_died,
            "in_flight_at_end": s.in_flight,
            "nodes_disabled_overload": s.nodes_overload,
            "nodes_disabled_fault": s.nodes_fault,
            "events_processed": s.events,
            "window_records": records,
            "choke_time": s.choke_time if s.choked else None,
            "disabled_fraction_at_choke": (
                s.choke_disabled_frac if s.choked else None
            ),
            "all_dead_time": s.all_dead_time if s.all_dead else None,
        }
    finally:
        free(s.offsets)
        free(s.neighbors)
        free(s.alive)
        free(s.xi)
        free(s.last_decay)
        free(s.costs)
        free(s.s_node)
        free(s.s_index)
        free(s.s_window)
        free(s.s_gen)
        free(s.s_inflight)
        free(s.s_next)
        free(s.s_prev)
        free(s.free_list)
        free(s.host_head)
        free(s.host_tail)
        free(s.win_resolved)
        free(s.win_committed)
        free(s.rec_t)
        free(s.rec_frac)
        free(s.rec_disabled)
        free(s.heap.data)
