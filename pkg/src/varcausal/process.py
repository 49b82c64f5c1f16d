"""VAR(p) models: stability, simulation, and exact/empirical autocovariance.

The model is ``x_t = A_1 x_{t-1} + ... + A_p x_{t-p} + eps_t`` with isotropic
Gaussian innovations of variance ``noise_variance``.  Processes are mean-zero
throughout; there is no intercept.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .companion import CompanionMatrix, Spectrum, build_companion, spectrum
from .errors import BadInputError, NumericalError
from .seeding import as_rng

#: Transient threshold used by the default burn-in rule.
BURN_IN_DECAY = 1e-9

#: Fewest sliding windows accepted when estimating an autocovariance block.
MIN_ESTIMATION_WINDOWS = 10

#: Switch point between the exact Kronecker solve and fixed-point iteration.
MAX_KRON_STATE_DIM = 40


@dataclass(frozen=True)
class VarModel:
    """A VAR(p) model of dimension ``d`` with isotropic noise.

    ``coeffs`` holds the lag matrices ``A_1 .. A_p`` as (d, d) arrays; for
    scalar processes each entry is a 1x1 array (scalars are accepted by the
    constructor helpers).
    """

    d: int
    p: int
    coeffs: tuple[np.ndarray, ...]
    noise_variance: float

    def __post_init__(self):
        if self.d < 1 or self.p < 1:
            raise BadInputError("d and p must be positive")
        if len(self.coeffs) != self.p:
            raise BadInputError(f"expected {self.p} coefficient blocks, got {len(self.coeffs)}")
        for i, b in enumerate(self.coeffs):
            if b.shape != (self.d, self.d):
                raise BadInputError(
                    f"block {i + 1} has shape {b.shape}, expected ({self.d}, {self.d})"
                )
            if not np.all(np.isfinite(b)):
                raise BadInputError(f"block {i + 1} contains non-finite entries")
        if not (self.noise_variance > 0 and math.isfinite(self.noise_variance)):
            raise BadInputError("noise_variance must be positive and finite")

    @staticmethod
    def from_coeffs(coeffs, noise_variance: float = 1.0) -> "VarModel":
        """Build a model from scalars (AR) or a sequence of (d, d) arrays (VAR)."""
        blocks = tuple(np.atleast_2d(np.asarray(b, dtype=float)) for b in coeffs)
        if not blocks:
            raise BadInputError("at least one coefficient is required")
        return VarModel(
            d=blocks[0].shape[0], p=len(blocks), coeffs=blocks, noise_variance=float(noise_variance)
        )

    @property
    def scalar_coeffs(self) -> np.ndarray:
        """Lag coefficients as a flat vector (scalar models only)."""
        if self.d != 1:
            raise BadInputError("scalar_coeffs is defined for d = 1 models only")
        return np.array([b[0, 0] for b in self.coeffs])

    def companion(self, order: int | None = None) -> CompanionMatrix:
        return build_companion(self.coeffs, order=order)

    def to_json(self) -> str:
        payload = {
            "d": self.d,
            "p": self.p,
            "coeffs": [[float(v) for v in b.ravel()] for b in self.coeffs],
            "noise_variance": float(self.noise_variance),
        }
        return json.dumps(payload)

    @staticmethod
    def from_json(text: str) -> "VarModel":
        try:
            payload = json.loads(text)
            d = int(payload["d"])
            p = int(payload["p"])
            coeffs = tuple(
                np.asarray(block, dtype=float).reshape(d, d) for block in payload["coeffs"]
            )
            noise_variance = float(payload["noise_variance"])
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise BadInputError(f"invalid model JSON: {exc}") from exc
        if len(coeffs) != p:
            raise BadInputError(f"model JSON lists {len(coeffs)} blocks but p = {p}")
        return VarModel(d=d, p=p, coeffs=coeffs, noise_variance=noise_variance)


@dataclass(frozen=True)
class SamplePath:
    """A simulated trajectory: ``values`` has shape (n, d)."""

    values: np.ndarray
    seed: int
    burn_in: int

    def __post_init__(self):
        if self.values.ndim != 2 or len(self.values) == 0:
            raise BadInputError("path values must be a non-empty (n, d) array")
        if not np.all(np.isfinite(self.values)):
            raise BadInputError("path contains non-finite values (model likely unstable)")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def scalar(self) -> np.ndarray:
        if self.d != 1:
            raise BadInputError("scalar view is defined for d = 1 paths only")
        return self.values[:, 0]

    def to_csv(self) -> str:
        return values_to_csv(self.values)

    @staticmethod
    def from_csv(text: str, seed: int = 0, burn_in: int = 0) -> "SamplePath":
        values = values_from_csv(text)
        return SamplePath(values=values, seed=seed, burn_in=burn_in)


def values_to_csv(values: np.ndarray) -> str:
    """Serialize an (n, d) array as ``t,x_1,...,x_d`` rows."""
    buf = io.StringIO()
    d = values.shape[1]
    buf.write("t," + ",".join(f"x_{i + 1}" for i in range(d)) + "\n")
    for t, row in enumerate(values):
        buf.write(str(t) + "," + ",".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()


def values_from_csv(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("t,"):
        raise BadInputError("path CSV must start with a 't,x_1,...' header")
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        rows.append([float(c) for c in cells[1:]])
    return np.asarray(rows, dtype=float)


@dataclass(frozen=True)
class AutocovMatrix:
    """Block-Toeplitz autocovariance of ``n`` stacked observations.

    Block ``(i, j)`` is the lag ``j - i`` autocovariance of the process, with
    the most recent observation first, so the dense matrix is the second
    moment of the window ``(x_t, x_{t-1}, ..., x_{t-n+1})``.
    """

    n: int
    d: int
    dense: np.ndarray = field(repr=False)

    @property
    def variance_scale(self) -> float:
        """Largest marginal variance; reference scale for tolerances."""
        return float(np.max(np.diag(self.dense)))

    def block(self, i: int, j: int) -> np.ndarray:
        d = self.d
        return self.dense[i * d : (i + 1) * d, j * d : (j + 1) * d]


def is_stationary(model: VarModel, margin: float = 0.0) -> tuple[bool, Spectrum]:
    """Whether all companion eigenvalues satisfy ``|lam| < 1 - margin``.

    Returns the spectrum alongside the flag so callers can reuse it.
    """
    spec = spectrum(model.companion())
    return bool(spec.max_modulus < 1.0 - margin), spec


def default_burn_in(max_modulus: float) -> int:
    """Steps until a zero-start transient decays below ``BURN_IN_DECAY``."""
    if not 0.0 <= max_modulus < 1.0:
        raise BadInputError("burn-in rule needs a stable max modulus in [0, 1)")
    if max_modulus == 0.0:
        return 1000
    return max(1000, math.ceil(math.log(BURN_IN_DECAY) / math.log(max_modulus)))


def simulate(
    model: VarModel,
    n: int,
    seed: int | np.random.Generator,
    burn_in: int | None = None,
    init: str = "zero",
) -> SamplePath:
    """Simulate ``n`` steps of the process with Gaussian innovations.

    Parameters
    ----------
    model : VarModel
        Must be stable; simulation of an unstable model is refused.
    n : int
        Returned path length.
    seed : int or Generator
        Fully determines the path.
    burn_in : int, optional
        Discarded prefix when starting from the zero state.  Defaults to
        ``max(1000, ceil(log(1e-9) / log(delta)))`` so the transient is
        negligible relative to the stationary scale.
    init : {"zero", "stationary"}
        "zero" starts from the origin and discards ``burn_in`` steps;
        "stationary" draws the initial lag window from the exact stationary
        Gaussian law and needs no burn-in (used by the experiment harness,
        where near-unit-root draws would make the burn-in rule very long).
    """
    if n < 1:
        raise BadInputError("n must be positive")
    ok, spec = is_stationary(model)
    if not ok:
        raise NumericalError(
            f"model is not stable: max eigenvalue modulus {spec.max_modulus:.6f} >= 1"
        )
    if init not in ("zero", "stationary"):
        raise BadInputError(f"unknown init mode {init!r}")
    rng = as_rng(seed)
    seed_label = seed if isinstance(seed, int) else -1
    sigma = math.sqrt(model.noise_variance)
    d, p = model.d, model.p

    if init == "stationary":
        window = stationary_window(model, p, rng)  # (p, d), most recent first
        history = window[::-1]  # chronological
        burn = 0
    else:
        history = np.zeros((p, d))
        burn = default_burn_in(spec.max_modulus) if burn_in is None else int(burn_in)
        if burn < 0:
            raise BadInputError("burn_in must be non-negative")

    total = n + burn
    eps = rng.standard_normal((total, d)) * sigma

    if d == 1:
        # AR recursion as an IIR filter; lfiltic seeds the exact lag window.
        a_poly = np.concatenate(([1.0], -model.scalar_coeffs))
        zi = signal.lfiltic([1.0], a_poly, history[::-1, 0])
        out, _ = signal.lfilter([1.0], a_poly, eps[:, 0], zi=zi)
        values = out[burn:, None]
    else:
        buf = np.concatenate([history, np.zeros((total, d))], axis=0)
        for t in range(total):
            acc = eps[t].copy()
            for l, block in enumerate(model.coeffs, start=1):
                acc += block @ buf[p + t - l]
            buf[p + t] = acc
        values = buf[p + burn :].copy()

    return SamplePath(values=values, seed=seed_label, burn_in=burn)


def stationary_window(model: VarModel, length: int, rng: np.random.Generator) -> np.ndarray:
    """Draw one exact stationary window, shape (length, d), most recent first."""
    cov = exact_autocov(model, length).dense
    root = _psd_sqrt(cov)
    flat = root @ rng.standard_normal(length * model.d)
    return flat.reshape(length, model.d)


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Symmetric square root with tiny negative eigenvalues clipped to zero."""
    w, v = np.linalg.eigh(matrix)
    w = np.clip(w, 0.0, None)
    return v * np.sqrt(w) @ v.T


def _lyapunov_state_cov(model: VarModel) -> np.ndarray:
    """Stationary covariance of the stacked state: solves S = C S C' + S_e."""
    comp = model.companion().dense
    size = comp.shape[0]
    se = np.zeros((size, size))
    se[: model.d, : model.d] = model.noise_variance * np.eye(model.d)
    if size <= MAX_KRON_STATE_DIM:
        lhs = np.eye(size * size) - np.kron(comp, comp)
        try:
            sol = np.linalg.solve(lhs, se.ravel())
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"stationary covariance solve failed: {exc}") from exc
        state = sol.reshape(size, size)
    else:
        state = se.copy()
        for _ in range(200_000):
            nxt = comp @ state @ comp.T + se
            delta = float(np.abs(nxt - state).max())
            state = nxt
            if delta <= 1e-12 * max(1.0, float(np.abs(state).max())):
                break
        else:
            raise NumericalError("stationary covariance iteration did not converge")
    return 0.5 * (state + state.T)


def autocov_blocks(model: VarModel, max_lag: int) -> np.ndarray:
    """Exact lag autocovariances ``Gamma(0..max_lag)`` as a (max_lag+1, d, d) array.

    ``Gamma(h) = E[x_{t+h} x_t^T]``.  Lags beyond the order follow the
    recursion ``Gamma(h) = sum_l A_l Gamma(h - l)``.
    """
    ok, spec = is_stationary(model)
    if not ok:
        raise NumericalError(
            f"autocovariance requires a stable model (max modulus {spec.max_modulus:.6f})"
        )
    d, p = model.d, model.p
    state = _lyapunov_state_cov(model)
    blocks = [state[0:d, j * d : (j + 1) * d].copy() for j in range(min(p, max_lag + 1))]
    # E[x_t x_{t-j}^T] read off the first block row equals Gamma(j).
    while len(blocks) <= max_lag:
        h = len(blocks)
        acc = np.zeros((d, d))
        for l, block in enumerate(model.coeffs, start=1):
            lag = h - l
            acc += block @ (blocks[lag] if lag >= 0 else blocks[-lag].T)
        blocks.append(acc)
    out = np.stack(blocks[: max_lag + 1])
    out[0] = 0.5 * (out[0] + out[0].T)
    return out


def _assemble_toeplitz(gammas: np.ndarray, n: int, d: int) -> np.ndarray:
    dense = np.zeros((n * d, n * d))
    for i in range(n):
        for j in range(n):
            g = gammas[j - i] if j >= i else gammas[i - j].T
            dense[i * d : (i + 1) * d, j * d : (j + 1) * d] = g
    return 0.5 * (dense + dense.T)


def exact_autocov(model: VarModel, n: int) -> AutocovMatrix:
    """Exact autocovariance of ``n`` stacked observations (block-Toeplitz)."""
    if n < 1:
        raise BadInputError("n must be positive")
    gam = autocov_blocks(model, n - 1)
    return AutocovMatrix(n=n, d=model.d, dense=_assemble_toeplitz(gam, n, model.d))


def empirical_autocov(
    path: SamplePath, n: int, min_windows: int = MIN_ESTIMATION_WINDOWS
) -> AutocovMatrix:
    """Sample autocovariance with biased (1/T) normalization, block-Toeplitz.

    Biased normalization keeps the assembled matrix positive semidefinite.
    Requires at least ``n + min_windows`` observations.
    """
    if n < 1:
        raise BadInputError("n must be positive")
    x = path.values
    t_len = x.shape[0]
    if t_len < n + min_windows:
        raise BadInputError(
            f"path of length {t_len} too short for {n} lags (need >= {n + min_windows})"
        )
    d = path.d
    gam = np.zeros((n, d, d))
    for h in range(n):
        gam[h] = x[h:].T @ x[: t_len - h] / t_len
    return AutocovMatrix(n=n, d=d, dense=_assemble_toeplitz(gam, n, d))


def rejection_sample_stable(
    p: int,
    d: int,
    lo: float,
    hi: float,
    seed: int | np.random.Generator,
    max_tries: int = 100_000,
    noise_variance: float = 1.0,
) -> VarModel:
    """Draw coefficients i.i.d. uniform on [lo, hi] until the process is stable.

    Stability is strict (every eigenvalue modulus below one).  Candidates are
    evaluated in draw order, so the result is a deterministic function of the
    seed; internally the stability checks run on batches of candidates for
    speed, which does not change which candidate is accepted.
    """
    if not lo < hi:
        raise BadInputError("need lo < hi for the coefficient range")
    if p < 1 or d < 1:
        raise BadInputError("p and d must be positive")
    rng = as_rng(seed)
    size = p * d
    tried = 0
    batch = 128
    while tried < max_tries:
        count = min(batch, max_tries - tried)
        cand = rng.uniform(lo, hi, size=(count, p, d, d))
        comps = np.zeros((count, size, size))
        for l in range(p):
            comps[:, :d, l * d : (l + 1) * d] = cand[:, l]
        if p > 1:
            comps[:, d:, : d * (p - 1)] = np.eye(d * (p - 1))
        moduli = np.abs(np.linalg.eigvals(comps)).max(axis=1)
        stable = np.flatnonzero(moduli < 1.0)
        if stable.size:
            pick = cand[stable[0]]
            return VarModel(
                d=d,
                p=p,
                coeffs=tuple(pick[l].copy() for l in range(p)),
                noise_variance=float(noise_variance),
            )
        tried += count
        batch = min(4096, batch * 2)
    raise NumericalError(f"no stable draw within {max_tries} tries (order {p}, dim {d})")
