"""Echo-state reservoir: construction, ridge training and closed-loop runs.

The recursion is the leaky tanh map

    r <- (1 - alpha) r + alpha tanh(A r + W_in u),    u_next = W_out r

with ``u = (x(t), x(t - delta_tau))``. Data enter the model through a
per-component affine map onto [0, 1] fitted on the training series; outputs
are mapped back, so every public function speaks the data's own units.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import BundleError, ModelDivergenceError, RankDeficiencyError
from .timeseries import TimeSeries

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
DEFAULT_WARMUP = 1000
DIVERGENCE_FACTOR = 1e3
_CHUNK = 4096


@dataclass(frozen=True)
class ReservoirConfig:
    N: int = 2000
    M: int = 6
    alpha: float = 0.3
    dt: float = 0.01
    rho: float = 0.99
    beta: float = 0.002
    delta_tau: float = 0.11
    a_density: float = 0.015
    w_in_scale: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.N < 1 or self.M < 2 or self.M % 2:
            raise ValueError(f"need N >= 1 and even M >= 2, got N={self.N}, M={self.M}")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not abs(self.rho) < 1:
            raise ValueError(f"|rho| must be < 1, got {self.rho}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.delta_tau < 0:
            raise ValueError(f"delta_tau must be >= 0, got {self.delta_tau}")
        if not 0 < self.a_density <= 1:
            raise ValueError(f"a_density must lie in (0, 1], got {self.a_density}")
        if not self.w_in_scale > 0:
            raise ValueError(f"w_in_scale must be positive, got {self.w_in_scale}")
        delay_steps(self.delta_tau, self.dt)

    @property
    def delay(self) -> int:
        return delay_steps(self.delta_tau, self.dt)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> ReservoirConfig:
        expected = {f.name for f in fields(cls)}
        got = set(data)
        if got != expected:
            missing, extra = sorted(expected - got), sorted(got - expected)
            raise ValueError(f"config keys mismatch: missing {missing}, unexpected {extra}")
        kw = {}
        for f in fields(cls):
            kw[f.name] = int(data[f.name]) if f.type == "int" else float(data[f.name])
        return cls(**kw)

    @classmethod
    def load(cls, path) -> ReservoirConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def replace(self, **changes) -> ReservoirConfig:
        return ReservoirConfig(**{**self.to_dict(), **changes})


def delay_steps(delta_tau, dt) -> int:
    """Number of samples in ``delta_tau``; rejects non-integer multiples."""
    k = round(delta_tau / dt)
    remainder = delta_tau - k * dt
    if abs(remainder) > 1e-9 * max(dt, abs(delta_tau)):
        raise ValueError(f"delta_tau={delta_tau} is not a multiple of dt={dt} "
                         f"(remainder {remainder:.3g})")
    return int(k)


# Table I values verbatim; density and input scale are not given there.
TABLE1_LORENZ28 = ReservoirConfig(alpha=0.3, beta=0.002, delta_tau=0.11)
TABLE1_LORENZ60 = ReservoirConfig(alpha=0.4, beta=0.001, delta_tau=0.07)

_PRESET_DIR = Path(__file__).parent / "data"
PRESETS = ("lorenz28", "lorenz60", "rossler")


def load_preset(name: str) -> ReservoirConfig:
    """Configuration shipped for reproduction runs (``lorenz28``, ``lorenz60``, ``rossler``)."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return ReservoirConfig.load(_PRESET_DIR / f"{name}.json")


def spectral_radius(A) -> float:
    """Largest eigenvalue modulus (dense LAPACK below 400 rows, ARPACK above)."""
    n = A.shape[0]
    if n == 0:
        return 0.0
    if n < 400:
        dense = A.toarray() if sp.issparse(A) else np.asarray(A)
        return float(np.max(np.abs(np.linalg.eigvals(dense))))
    v0 = np.ones(n) / math.sqrt(n)
    vals = spla.eigs(A, k=1, which="LM", return_eigenvectors=False, tol=1e-12, v0=v0,
                     maxiter=n * 50)
    return float(np.abs(vals[0]))


def build_reservoir(config: ReservoirConfig, max_attempts=20):
    """Random sparse A rescaled to spectral radius ``rho``, and uniform W_in.

    A draw with zero spectral radius cannot be rescaled; it is rebuilt from
    the next seed and reported.
    """
    n, m = config.N, config.M
    for attempt in range(max_attempts):
        seed = config.seed + attempt
        rng = np.random.default_rng(seed)
        A = sp.random(n, n, density=config.a_density, format="csr", random_state=rng,
                      data_rvs=lambda k: rng.uniform(-1.0, 1.0, k))
        w_in = rng.uniform(-config.w_in_scale, config.w_in_scale, (n, m))
        radius = spectral_radius(A)
        if radius > 1e-12:
            break
        log.warning("reservoir draw with seed %d has zero spectral radius; retrying with %d",
                    seed, seed + 1)
    else:
        raise RankDeficiencyError(f"no usable reservoir after {max_attempts} draws")
    A = (A * (config.rho / radius)).tocsr()
    A.sort_indices()
    return A, w_in


def embed_delay(series: TimeSeries, delta_tau: float) -> TimeSeries:
    """Concatenate each sample with the one ``delta_tau`` earlier.

    The first ``delta_tau / dt`` samples have no history and are dropped.
    """
    k = delay_steps(delta_tau, series.dt)
    if len(series) <= k:
        raise ValueError(f"series of {len(series)} samples is shorter than the delay ({k})")
    x = series.samples
    out = np.hstack([x[k:], x[:len(x) - k]])
    return TimeSeries(series.dt, out, series.t0 + k * series.dt)


def _csr_parts(A):
    A = sp.csr_matrix(A)
    return (A.indptr.astype(np.int32), A.indices.astype(np.int32),
            np.ascontiguousarray(A.data, dtype=float))


def drive(A, W_in, alpha, inputs, r0, backend=None) -> np.ndarray:
    """Open-loop reservoir states, one per input sample (state after that input)."""
    u = inputs.samples if isinstance(inputs, TimeSeries) else np.asarray(inputs, dtype=float)
    u = np.ascontiguousarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] != W_in.shape[1]:
        raise ValueError(f"inputs must have {W_in.shape[1]} columns, got shape {u.shape}")
    r = np.array(r0, dtype=float, copy=True)
    impl = kernels.get_backend(backend)
    return impl.reservoir_drive(*_csr_parts(A), np.ascontiguousarray(W_in, dtype=float),
                                float(alpha), u, r)


class RidgeAccumulator:
    """Running sums ``R R^T`` and ``U R^T`` over (state, target) pairs."""

    def __init__(self, n, m):
        self.gram = np.zeros((n, n))
        self.cross = np.zeros((m, n))
        self.count = 0

    def update(self, states, targets):
        states = np.asarray(states, dtype=float)
        targets = np.asarray(targets, dtype=float)
        if len(states) != len(targets):
            raise ValueError("states and targets must have the same length")
        self.gram += states.T @ states
        self.cross += targets.T @ states
        self.count += len(states)
        return self

    def merge(self, other: RidgeAccumulator) -> RidgeAccumulator:
        self.gram += other.gram
        self.cross += other.cross
        self.count += other.count
        return self

    def solve(self, beta) -> np.ndarray:
        if self.count < 1:
            raise ValueError("no training pairs accumulated")
        n = self.gram.shape[0]
        normal = self.gram + beta * np.eye(n)
        try:
            factor = scipy.linalg.cho_factor(normal, lower=False, check_finite=True)
        except np.linalg.LinAlgError:
            raise RankDeficiencyError(
                f"normal matrix not positive definite (beta={beta}); "
                f"{self.count} samples for {n} reservoir nodes") from None
        if beta == 0:
            diag = np.abs(np.diag(factor[0]))
            # pivot ratio 1e-6 is a Gram condition number of about 1e12
            if diag.min() <= 1e-6 * diag.max():
                raise RankDeficiencyError("state matrix is rank deficient and beta = 0")
        return scipy.linalg.cho_solve(factor, self.cross.T).T


def train_ridge(states, targets, beta) -> np.ndarray:
    """Tikhonov readout ``dU dR^T (dR dR^T + beta I)^-1`` via Cholesky.

    Rows of ``states`` pair with rows of ``targets`` (the next input).
    """
    tgt = targets.samples if isinstance(targets, TimeSeries) else targets
    states = np.asarray(states, dtype=float)
    acc = RidgeAccumulator(states.shape[1], np.shape(tgt)[1])
    return acc.update(states, tgt).solve(beta)


@dataclass(frozen=True, eq=False)
class ReservoirModel:
    config: ReservoirConfig
    A: sp.csr_matrix
    W_in: np.ndarray
    W_out: np.ndarray
    shift: np.ndarray = None
    scale: np.ndarray = None
    train_radius: float = 1.0
    feedback: str = "delay"
    _csr: tuple = field(default=None, repr=False)

    def __post_init__(self):
        d = self.config.M // 2
        if self.shift is None:
            object.__setattr__(self, "shift", np.zeros(d))
        if self.scale is None:
            object.__setattr__(self, "scale", np.ones(d))
        if self.feedback not in ("delay", "readout"):
            raise ValueError(f"feedback must be 'delay' or 'readout', got {self.feedback!r}")
        object.__setattr__(self, "A", sp.csr_matrix(self.A))
        object.__setattr__(self, "_csr", _csr_parts(self.A))

    @property
    def dim(self) -> int:
        """Dimension of the observed state (half the model input)."""
        return self.config.M // 2

    def normalize(self, x):
        return (np.asarray(x, dtype=float) - self.shift) / self.scale

    def denormalize(self, y):
        return np.asarray(y, dtype=float) * self.scale + self.shift

    def __eq__(self, other):
        if not isinstance(other, ReservoirModel):
            return NotImplemented
        return (self.config == other.config and self.feedback == other.feedback
                and self.train_radius == other.train_radius
                and np.array_equal(self.shift, other.shift)
                and np.array_equal(self.scale, other.scale)
                and np.array_equal(self.A.toarray(), other.A.toarray())
                and np.array_equal(self.W_in, other.W_in)
                and np.array_equal(self.W_out, other.W_out))


def fit_normalization(samples):
    """Per-component affine map of the data onto [0, 1]."""
    lo = samples.min(axis=0)
    hi = samples.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return lo, span


def train(config: ReservoirConfig, training: TimeSeries, L0: int = DEFAULT_WARMUP,
          noise_amplitude=0.0, normalize=True, feedback="delay") -> ReservoirModel:
    """Noise -> delay embedding -> drive from r=0 (drop L0 states) -> ridge readout.

    ``noise_amplitude`` (scalar or per component, data units) adds i.i.d.
    uniform noise on [-a, a] to the inputs only; targets stay clean.
    """
    if abs(training.dt - config.dt) > 1e-12 * config.dt:
        raise ValueError(f"training dt {training.dt} differs from model dt {config.dt}")
    d = config.M // 2
    if training.dim != d:
        raise ValueError(f"training series has dimension {training.dim}, model expects {d}")
    k = config.delay
    if len(training) < L0 + k + 2:
        raise ValueError(f"training series too short: {len(training)} samples for "
                         f"L0={L0} and delay {k}")
    A, w_in = build_reservoir(config)
    clean = training.samples
    if normalize:
        shift, scale = fit_normalization(clean)
    else:
        shift, scale = np.zeros(d), np.ones(d)
    xn = (clean - shift) / scale
    noise = np.broadcast_to(np.asarray(noise_amplitude, dtype=float), (d,))
    if np.any(noise > 0):
        rng = np.random.default_rng(config.seed + 7919)
        noisy = clean + rng.uniform(-1.0, 1.0, clean.shape) * noise
        xin = (noisy - shift) / scale
    else:
        xin = xn
    dt = training.dt
    inputs = embed_delay(TimeSeries(dt, xin), config.delta_tau).samples
    targets = embed_delay(TimeSeries(dt, xn), config.delta_tau).samples

    impl = kernels.backend
    csr = _csr_parts(A)
    r = np.zeros(config.N)
    n_pairs = len(inputs) - 1
    acc = RidgeAccumulator(config.N, config.M)
    start = 0
    if L0 > 0:
        impl.reservoir_drive(*csr, w_in, float(config.alpha), np.ascontiguousarray(inputs[:L0]), r)
        start = L0
    for s in range(start, n_pairs, _CHUNK):
        e = min(s + _CHUNK, n_pairs)
        states = impl.reservoir_drive(*csr, w_in, float(config.alpha),
                                      np.ascontiguousarray(inputs[s:e]), r)
        acc.update(states, targets[s + 1:e + 1])
    w_out = acc.solve(config.beta)
    radius = float(np.max(np.linalg.norm(xn, axis=1)))
    return ReservoirModel(config, A, w_in, w_out, shift, scale, radius, feedback)


@dataclass
class ReservoirState:
    """Reservoir vector plus the ring buffer of the last ``delay`` outputs (normalized)."""

    r: np.ndarray
    ring: np.ndarray
    head: int = 0

    def copy(self) -> ReservoirState:
        return ReservoirState(self.r.copy(), self.ring.copy(), self.head)

    def history(self):
        """Buffered outputs, oldest first."""
        return np.roll(self.ring, -self.head, axis=0)


def _as_array(observed):
    if isinstance(observed, TimeSeries):
        return observed.samples
    arr = np.asarray(observed, dtype=float)
    return arr[None, :] if arr.ndim == 1 else arr


def synchronize(model: ReservoirModel, observed, warmup: int = DEFAULT_WARMUP,
                r0=None) -> ReservoirState:
    """Warm the reservoir up on observed data, starting from ``r0`` (default 0).

    Uses the last ``warmup + delay`` samples; shorter inputs are extended
    backwards with copies of their first sample. By the echo state property
    the returned state depends on the data, not on ``r0``.
    """
    x = model.normalize(_as_array(observed))
    k = model.config.delay
    need = warmup + k
    if len(x) < need:
        x = np.vstack([np.repeat(x[:1], need - len(x), axis=0), x])
    x = x[len(x) - need:]
    u = np.hstack([x[k:], x[:len(x) - k]]) if k else np.hstack([x, x])
    r = np.zeros(model.config.N) if r0 is None else np.array(r0, dtype=float)
    kernels.backend.reservoir_drive(*model._csr, model.W_in, float(model.config.alpha),
                                    np.ascontiguousarray(u), r)
    ring = np.ascontiguousarray(x[len(x) - k:]) if k else np.zeros((0, model.dim))
    return ReservoirState(r, ring, 0)


def synchronize_constant(model: ReservoirModel, point, tol=1e-13, max_steps=200_000,
                         block=500) -> ReservoirState:
    """Warm-up on the constant series ``point``, iterated until r is stationary."""
    xn = model.normalize(np.asarray(point, dtype=float))
    u = np.tile(np.concatenate([xn, xn]), (block, 1))
    r = np.zeros(model.config.N)
    done = 0
    while done < max_steps:
        prev = r.copy()
        kernels.backend.reservoir_drive(*model._csr, model.W_in, float(model.config.alpha), u, r)
        done += block
        if np.max(np.abs(r - prev)) < tol:
            break
    k = model.config.delay
    return ReservoirState(r, np.tile(xn, (k, 1)) if k else np.zeros((0, model.dim)), 0)


def predict_autonomous(model: ReservoirModel, state: ReservoirState, n_steps: int,
                       t0: float = 0.0, backend=None, return_state=False):
    """Closed-loop run: read out, feed the output (and its delayed copy) back.

    Returns ``n_steps`` outputs in data units; the first is the readout of
    ``state``. The input state is not modified.
    """
    st = state.copy()
    limit = DIVERGENCE_FACTOR * model.train_radius
    impl = kernels.get_backend(backend)
    out, head, bad = impl.reservoir_autonomous(
        *model._csr, model.W_in, np.ascontiguousarray(model.W_out), float(model.config.alpha),
        st.r, np.ascontiguousarray(st.ring), int(st.head), int(n_steps),
        model.feedback == "readout", float(limit))
    if bad >= 0:
        raise ModelDivergenceError(int(bad), limit)
    st.head = int(head)
    series = TimeSeries(model.config.dt, model.denormalize(out), t0) if n_steps else None
    return (series, st) if return_state else series


def free_run(model: ReservoirModel, observed, n_steps: int, warmup=DEFAULT_WARMUP,
             chunk=None, return_state=False):
    """Synchronize on ``observed`` then run closed loop for ``n_steps`` samples."""
    state = synchronize(model, observed, warmup)
    return predict_autonomous(model, state, n_steps, return_state=return_state)


def iter_free_run(model: ReservoirModel, state: ReservoirState, n_steps: int,
                  chunk=1_000_000):
    """Closed-loop run yielded in chunks (for statistics over very long runs)."""
    done = 0
    while done < n_steps:
        m = min(chunk, n_steps - done)
        series, state = predict_autonomous(model, state, m, t0=done * model.config.dt,
                                           return_state=True)
        done += m
        yield series


# --- bundle I/O --------------------------------------------------------------

_MATRICES = ("A", "Win", "Wout")


def _write_bin(path: Path, arr) -> str:
    data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    path.write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def save_model(model: ReservoirModel, path) -> Path:
    """Directory bundle: meta.json plus little-endian float64 A.bin, Win.bin, Wout.bin."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    arrays = {"A": model.A.toarray(), "Win": model.W_in, "Wout": model.W_out}
    meta = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "seed": model.config.seed,
        "feedback": model.feedback,
        "shift": [float(v) for v in model.shift],
        "scale": [float(v) for v in model.scale],
        "train_radius": model.train_radius,
        "shapes": {},
        "checksums": {},
    }
    for name in _MATRICES:
        meta["shapes"][name] = list(arrays[name].shape)
        meta["checksums"][name] = _write_bin(path / f"{name}.bin", arrays[name])
    # repr round-trips floats exactly
    (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def load_model(path) -> ReservoirModel:
    path = Path(path)
    try:
        meta = json.loads((path / "meta.json").read_text())
    except FileNotFoundError:
        raise
    except (OSError, ValueError) as exc:
        raise BundleError(f"{path}: unreadable meta.json ({exc})") from None
    if meta.get("format_version") != FORMAT_VERSION:
        raise BundleError(f"{path}: unsupported format version {meta.get('format_version')}")
    arrays = {}
    for name in _MATRICES:
        raw = (path / f"{name}.bin").read_bytes()
        if hashlib.sha256(raw).hexdigest() != meta["checksums"][name]:
            raise BundleError(f"{path}: checksum mismatch for {name}.bin")
        shape = tuple(meta["shapes"][name])
        if len(raw) != 8 * int(np.prod(shape)):
            raise BundleError(f"{path}: {name}.bin has wrong size")
        arrays[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(float)
    config = ReservoirConfig.from_dict(meta["config"])
    return ReservoirModel(config, sp.csr_matrix(arrays["A"]), arrays["Win"], arrays["Wout"],
                          np.array(meta["shift"]), np.array(meta["scale"]),
                          float(meta["train_radius"]), meta.get("feedback", "delay"))
