"""Product-Haar Monte Carlo for string integrals.

Configurations are arrays ``U[sample, edge, N, N]`` indexed by the sorted
positive edges of the lattice.  Estimates are plain averages of
W_s(U) * prod_p rho_p(2 beta Re Tr U_p) over independent Haar samples, so
they are unbiased and their errors come from batch means.

Randomness: batch b of a run with seed s draws from a Philox generator keyed
by SeedSequence(s, spawn_key=(stream, b)).  Batches are evaluated in any
order, on any number of threads, and combined in batch order, so results do
not depend on the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .lattice import Lattice
from .strings import LatticeString
from .truncexp import exp_trunc_array

N_BATCHES = 100
CHUNK = 20_000
FULL_ACTION = "full"


def sample_haar_unitary(N: int, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Haar unitary (or a stack of them): QR of a complex Ginibre matrix with
    the phases of R's diagonal moved into Q."""
    if N < 1:
        raise ValueError("N must be positive")
    shape = (N, N) if size is None else (size, N, N)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    ph = diag / np.abs(diag)
    return q * ph[..., None, :]


def stream_rng(seed: int, stream: int, batch: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(batch)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class McEstimate:
    mean: complex
    standard_error: float
    samples: int
    se_re: float = 0.0
    se_im: float = 0.0


@dataclass
class GaugeConfig:
    """One configuration: positive edge -> unitary, with U(e^-1) = U(e)^*."""

    lat: Lattice
    U: np.ndarray  # (n_edges, N, N)

    @property
    def assignment(self) -> dict:
        return {e: self.U[i] for i, e in enumerate(self.lat.edges)}

    def matrix(self, e) -> np.ndarray:
        m = self.U[edge_index(self.lat)[e.positive()]]
        return m if e.sign > 0 else m.conj().T


def edge_index(lat: Lattice) -> dict:
    return {e: i for i, e in enumerate(lat.edges)}


def random_config(lat: Lattice, N: int, rng: np.random.Generator) -> GaugeConfig:
    return GaugeConfig(lat, sample_haar_unitary(N, rng, len(lat.edges)))


def sample_configs(lat: Lattice, N: int, n: int, rng: np.random.Generator) -> np.ndarray:
    E = len(lat.edges)
    if N == 1:
        th = rng.uniform(0.0, 2 * math.pi, size=(n, E))
        return np.exp(1j * th)[..., None, None]
    return sample_haar_unitary(N, rng, n * E).reshape(n, E, N, N)


def _dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def loop_matrix(U: np.ndarray, loop, index: dict) -> np.ndarray:
    """Ordered product of edge matrices along ``loop`` for a batch U[n, E, N, N]."""
    out = None
    for e in loop:
        m = U[:, index[e.positive()]]
        if e.sign < 0:
            m = _dagger(m)
        out = m if out is None else out @ m
    return out


def normalized_trace(m: np.ndarray) -> np.ndarray:
    return np.trace(m, axis1=-2, axis2=-1) / m.shape[-1]


def wilson_values(U: np.ndarray, s: LatticeString, lat: Lattice, index: Optional[dict] = None) -> np.ndarray:
    """W_s for each configuration of a batch; null strings give 1."""
    index = edge_index(lat) if index is None else index
    val = np.ones(U.shape[0], dtype=complex)
    for l in s.loops:
        val = val * normalized_trace(loop_matrix(U, l, index))
    return val


def wilson_string_value(U, s: LatticeString, lat: Optional[Lattice] = None) -> complex:
    """W_s for a single configuration (GaugeConfig or array [E, N, N])."""
    if isinstance(U, GaugeConfig):
        lat, U = U.lat, U.U
    return complex(wilson_values(U[None], s, lat)[0])


def plaquette_traces(U: np.ndarray, lat: Lattice, index: Optional[dict] = None) -> np.ndarray:
    """Tr U_p for every positive plaquette: array [n, n_plaquettes]."""
    index = edge_index(lat) if index is None else index
    cols = [np.trace(loop_matrix(U, p.edges(), index), axis1=-2, axis2=-1) for p in lat.plaquettes]
    return np.stack(cols, axis=1)


def action_weights(U: np.ndarray, lat: Lattice, beta: float, K, index=None) -> np.ndarray:
    """prod_p rho_p(2 beta Re Tr U_p) with rho_p = exp_{K(p)}, or exp when
    ``K`` is FULL_ACTION."""
    tr = plaquette_traces(U, lat, index)
    x = 2.0 * beta * tr.real
    if K == FULL_ACTION:
        return np.exp(x.sum(axis=1))
    k = np.array([K.get(p, 0) for p in lat.plaquettes])
    return np.prod(exp_trunc_array(k, x), axis=1)


def run_batches(integrand: Callable[[np.ndarray], np.ndarray], lat: Lattice, N: int,
                n_samples: int, seed: int, stream: int = 0, workers: int = 1,
                batches: int = N_BATCHES) -> tuple:
    """Evaluate ``integrand`` (batch of configs -> array [n, n_obs]) over
    ``batches`` independent streams.  Returns (batch means [batches, n_obs],
    samples per batch)."""
    per = max(1, -(-int(n_samples) // batches))

    def one(b: int) -> np.ndarray:
        rng = stream_rng(seed, stream, b)
        acc = None
        done = 0
        while done < per:
            m = min(CHUNK, per - done)
            U = sample_configs(lat, N, m, rng)
            vals = np.asarray(integrand(U))
            if vals.ndim == 1:
                vals = vals[:, None]
            s = vals.sum(axis=0)
            acc = s if acc is None else acc + s
            done += m
        return acc / per

    if workers <= 1:
        means = [one(b) for b in range(batches)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            means = list(ex.map(one, range(batches)))
    return np.array(means), per


def estimate_from_batches(bm: np.ndarray, per: int) -> McEstimate:
    """Mean and standard error of a single observable from its batch means."""
    nb = len(bm)
    mean = complex(bm.mean())
    se_re = float(np.std(bm.real, ddof=1) / math.sqrt(nb)) if nb > 1 else 0.0
    se_im = float(np.std(bm.imag, ddof=1) / math.sqrt(nb)) if nb > 1 else 0.0
    return McEstimate(mean, math.hypot(se_re, se_im), nb * per, se_re, se_im)


def ratio_from_batches(num: np.ndarray, den: np.ndarray, per: int) -> McEstimate:
    """Ratio of means with a delete-one-batch jackknife error."""
    nb = len(num)
    r = num.mean() / den.mean()
    tot_n, tot_d = num.sum(), den.sum()
    jk = np.array([(tot_n - num[b]) / (tot_d - den[b]) for b in range(nb)])
    jm = jk.mean()
    se_re = float(math.sqrt((nb - 1) / nb * np.sum((jk.real - jm.real) ** 2)))
    se_im = float(math.sqrt((nb - 1) / nb * np.sum((jk.imag - jm.imag) ** 2)))
    return McEstimate(complex(r), math.hypot(se_re, se_im), nb * per, se_re, se_im)


def mc_phi(s: LatticeString, K, lat: Lattice, N: int, beta: float, n_samples: int,
           seed: int, stream: int = 0, workers: int = 1) -> McEstimate:
    """phi(s, K) = E[W_s prod_p rho_p(2 beta Re Tr U_p)] under product Haar."""
    index = edge_index(lat)

    def f(U):
        return wilson_values(U, s, lat, index) * action_weights(U, lat, beta, K, index)

    bm, per = run_batches(f, lat, N, n_samples, seed, stream, workers)
    return estimate_from_batches(bm[:, 0], per)


def mc_wilson_expectation(loop, lat: Lattice, N: int, beta: float, n_samples: int,
                          seed: int, stream: int = 0, workers: int = 1) -> McEstimate:
    """<W_loop> as the ratio phi(loop, full) / phi(null, full)."""
    from .strings import make_string
    s = loop if isinstance(loop, LatticeString) else make_string([loop])
    index = edge_index(lat)

    def f(U):
        w = action_weights(U, lat, beta, FULL_ACTION, index)
        return np.stack([wilson_values(U, s, lat, index) * w, w.astype(complex)], axis=1)

    bm, per = run_batches(f, lat, N, n_samples, seed, stream, workers)
    return ratio_from_batches(bm[:, 0], bm[:, 1], per)


def mc_monomial(s: LatticeString, J: Mapping, lat: Lattice, N: int, n_samples: int,
                seed: int, stream: int = 0, workers: int = 1) -> McEstimate:
    """E[W_s prod_p Tr(U_p)^J(p)] over oriented plaquettes p."""
    index = edge_index(lat)
    items = [(p, m) for p, m in sorted(J.items()) if m]

    def f(U):
        v = wilson_values(U, s, lat, index)
        for p, m in items:
            v = v * np.trace(loop_matrix(U, p.edges(), index), axis1=-2, axis2=-1) ** m
        return v

    bm, per = run_batches(f, lat, N, n_samples, seed, stream, workers)
    return estimate_from_batches(bm[:, 0], per)


def mc_linear_combination(terms: Sequence, K, lat: Lattice, N: int, beta: float,
                          n_samples: int, seed: int, stream: int = 0, workers: int = 1) -> list:
    """Estimates of phi for several strings on shared samples.  ``terms`` is a
    list of (coefficient, string, K or None); None uses ``K``.  Returns the
    estimates of each phi followed by that of sum coefficient * phi, whose
    error accounts for the correlations between terms."""
    index = edge_index(lat)
    coefs = np.array([c for c, _, _ in terms], dtype=complex)

    def f(U):
        cols = []
        cache = {}
        for _, st, Kt in terms:
            Kt = K if Kt is None else Kt
            kk = id(Kt)
            if kk not in cache:
                cache[kk] = action_weights(U, lat, beta, Kt, index)
            cols.append(wilson_values(U, st, lat, index) * cache[kk])
        vals = np.stack(cols, axis=1)
        return np.concatenate([vals, (vals @ coefs)[:, None]], axis=1)

    bm, per = run_batches(f, lat, N, n_samples, seed, stream, workers)
    return [estimate_from_batches(bm[:, j], per) for j in range(bm.shape[1])]
