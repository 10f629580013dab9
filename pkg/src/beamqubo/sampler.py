"""QUBO solvers: exhaustive oracle, simulated annealing, remote HTTP adapter.

All backends report energies recomputed through :func:`beamqubo.qubo.energy`
on the returned bit vectors, so a result can never disagree with the matrix
it came from.  Ties between equal-energy samples break toward the
lexicographically smallest bit vector, which keeps every backend
deterministic regardless of execution order.
"""
from __future__ import annotations

import os
import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import CapacityError, ProtocolError, TransportError, ValidationError
from .qubo import QuboMatrix, energy

DEFAULT_EXACT_CAP = 24


@dataclass(frozen=True)
class Sample:
    """One distinct bit vector with its energy and how often it was returned."""

    bits: np.ndarray
    energy: float
    occurrences: int


@dataclass(frozen=True)
class SampleResult:
    """Samples sorted by (energy, bits); ``best`` is the first entry."""

    samples: tuple[Sample, ...]
    backend: str
    wall_time: float

    @property
    def best(self) -> Sample:
        return self.samples[0]


def _aggregate(bit_vectors: list[np.ndarray], q: QuboMatrix, backend: str,
               wall_time: float) -> SampleResult:
    counts: dict[bytes, int] = {}
    keep: dict[bytes, np.ndarray] = {}
    for bits in bit_vectors:
        key = bits.tobytes()
        counts[key] = counts.get(key, 0) + 1
        keep.setdefault(key, bits)
    samples = [Sample(bits=keep[k], energy=energy(q, keep[k]), occurrences=c)
               for k, c in counts.items()]
    samples.sort(key=lambda s: (s.energy, s.bits.tobytes()))
    return SampleResult(tuple(samples), backend, wall_time)


def solve_exact(q: QuboMatrix, max_size: int = DEFAULT_EXACT_CAP) -> SampleResult:
    """Enumerate every bit vector and return the true minimizer.

    Energies for all 2^S vectors are accumulated in one array (variable i on
    tensor axis i), so the first argmin is also the lexicographically
    smallest minimizer.  Refuses sizes above ``max_size``.
    """
    S = q.size
    if S > max_size:
        raise CapacityError(f"exact enumeration of {S} variables exceeds cap {max_size}")
    started = time.perf_counter()
    if S == 0:
        return SampleResult((Sample(np.zeros(0, dtype=np.int8), q.offset, 1),),
                            "exact", time.perf_counter() - started)
    energies = np.full((2,) * S, q.offset)
    for (r, c), v in q.items():
        slicer: list = [slice(None)] * S
        slicer[r] = 1
        slicer[c] = 1
        energies[tuple(slicer)] += v
    flat = energies.reshape(-1)
    idx = int(np.argmin(flat))
    bits = ((idx >> (S - 1 - np.arange(S))) & 1).astype(np.int8)
    best = Sample(bits=bits, energy=energy(q, bits), occurrences=1)
    return SampleResult((best,), "exact", time.perf_counter() - started)


@dataclass(frozen=True)
class AnnealSchedule:
    """Single-flip Metropolis settings: geometric beta ramp, seeded restarts."""

    sweeps: int = 1000
    beta_initial: float = 0.1
    beta_final: float = 10.0
    reads: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValidationError("sweeps must be >= 1")
        if self.reads < 1:
            raise ValidationError("reads must be >= 1")
        if not (0.0 < self.beta_initial <= self.beta_final):
            raise ValidationError("need 0 < beta_initial <= beta_final")


def default_schedule(q: QuboMatrix, sweeps: int = 1000, reads: int = 100,
                     seed: int = 0) -> AnnealSchedule:
    """Schedule whose final inverse temperature freezes the largest coefficient."""
    scale = max(q.max_abs_coefficient(), 1.0)
    return AnnealSchedule(sweeps=sweeps, beta_initial=0.1, beta_final=10.0 * scale,
                          reads=reads, seed=seed)


@njit(cache=True, nogil=True)
def _anneal_read(diag, indptr, indices, weights, bits, betas, uniforms, offset):
    n = bits.shape[0]
    # local fields: h[i] = sum_j w_ij x_j over off-diagonal couplings
    h = np.zeros(n)
    for i in range(n):
        if bits[i] == 1:
            for t in range(indptr[i], indptr[i + 1]):
                h[indices[t]] += weights[t]
    e = offset
    for i in range(n):
        if bits[i] == 1:
            e += diag[i]
    for i in range(n):
        if bits[i] == 1:
            for t in range(indptr[i], indptr[i + 1]):
                j = indices[t]
                if j > i and bits[j] == 1:
                    e += weights[t]

    best_e = e
    best_bits = bits.copy()
    n_sweeps = betas.shape[0]
    for s in range(n_sweeps):
        beta = betas[s]
        for i in range(n):
            delta = (1.0 - 2.0 * bits[i]) * (diag[i] + h[i])
            if delta <= 0.0 or uniforms[s, i] < np.exp(-beta * delta):
                step = 1.0 - 2.0 * bits[i]
                bits[i] = 1 - bits[i]
                e += delta
                for t in range(indptr[i], indptr[i + 1]):
                    h[indices[t]] += step * weights[t]
                if e < best_e - 1e-12:
                    best_e = e
                    best_bits = bits.copy()
    return best_bits, best_e


def _symmetric_csr(q: QuboMatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    diag = np.zeros(q.size)
    diag_mask = q.rows == q.cols
    diag[q.rows[diag_mask]] = q.vals[diag_mask]
    r = q.rows[~diag_mask]
    c = q.cols[~diag_mask]
    v = q.vals[~diag_mask]
    src = np.concatenate([r, c])
    dst = np.concatenate([c, r])
    val = np.concatenate([v, v])
    order = np.lexsort((dst, src))
    src, dst, val = src[order], dst[order], val[order]
    indptr = np.zeros(q.size + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    indptr = np.cumsum(indptr)
    return diag, indptr, dst.astype(np.int64), val


def simulated_annealing(q: QuboMatrix, sched: AnnealSchedule) -> SampleResult:
    """Seeded single-flip Metropolis restarts over a geometric beta ramp.

    Each read draws its own stream from the schedule seed, starts from a
    random bit vector, and sweeps all variables in index order with
    incrementally maintained flip costs.  Bit-identical results for identical
    inputs.
    """
    started = time.perf_counter()
    S = q.size
    if S == 0:
        return SampleResult((Sample(np.zeros(0, dtype=np.int8), q.offset, sched.reads),),
                            "sa", time.perf_counter() - started)
    diag, indptr, indices, weights = _symmetric_csr(q)
    betas = np.geomspace(sched.beta_initial, sched.beta_final, sched.sweeps)
    streams = np.random.SeedSequence(sched.seed).spawn(sched.reads)
    found: list[np.ndarray] = []
    for child in streams:
        rng = np.random.default_rng(child)
        bits = rng.integers(0, 2, size=S).astype(np.int8)
        uniforms = rng.random((sched.sweeps, S))
        best_bits, _ = _anneal_read(diag, indptr, indices, weights, bits, betas,
                                    uniforms, q.offset)
        found.append(np.asarray(best_bits, dtype=np.int8))
    return _aggregate(found, q, "sa", time.perf_counter() - started)


REMOTE_URL_ENV = "BEAMQUBO_REMOTE_URL"
REMOTE_TOKEN_ENV = "BEAMQUBO_REMOTE_TOKEN"


@dataclass(frozen=True)
class RemoteEndpoint:
    """Where to POST reduced Hamiltonians; token is sent as a bearer header."""

    url: str
    token: str | None = None
    timeout: float = 60.0

    @classmethod
    def from_env(cls) -> "RemoteEndpoint":
        url = os.environ.get(REMOTE_URL_ENV)
        if not url:
            raise ValidationError(f"{REMOTE_URL_ENV} is not set")
        return cls(url=url, token=os.environ.get(REMOTE_TOKEN_ENV))


def remote_submit(q: QuboMatrix, endpoint: RemoteEndpoint,
                  num_reads: int = 100) -> SampleResult:
    """Send a QUBO to a remote annealing service and parse its samples.

    Speaks a minimal JSON protocol: the request carries the coefficient
    triples, offset and read count; the response must contain a ``samples``
    list of bit vectors of the right length.  Reported energies are always
    recomputed locally.
    """
    import requests

    started = time.perf_counter()
    payload = {
        "size": q.size,
        "offset": q.offset,
        "qubo": [[int(r), int(c), float(v)] for (r, c), v in q.items()],
        "num_reads": int(num_reads),
    }
    headers = {"Content-Type": "application/json"}
    if endpoint.token:
        headers["Authorization"] = f"Bearer {endpoint.token}"
    try:
        resp = requests.post(endpoint.url, json=payload, headers=headers,
                             timeout=endpoint.timeout)
    except requests.RequestException as exc:
        raise TransportError(f"remote submission failed: {exc}") from exc
    if resp.status_code != 200:
        raise TransportError(f"remote solver returned HTTP {resp.status_code}")
    try:
        body = resp.json()
    except ValueError as exc:
        raise ProtocolError("remote solver returned non-JSON body") from exc
    if not isinstance(body, dict) or "samples" not in body:
        raise ProtocolError("response is missing the 'samples' field")
    raw = body["samples"]
    if not isinstance(raw, list) or not raw:
        raise ProtocolError("'samples' must be a non-empty list")
    found: list[np.ndarray] = []
    for entry in raw:
        bits = np.asarray(entry, dtype=np.int8)
        if bits.shape != (q.size,) or not np.all((bits == 0) | (bits == 1)):
            raise ProtocolError(
                f"sample of length {bits.shape} does not match {q.size} variables")
        found.append(bits)
    return _aggregate(found, q, "remote", time.perf_counter() - started)
