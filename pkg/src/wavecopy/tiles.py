"""Metasurface tile model: quantized unit cells, codebooks and callbacks.

Phasor convention is e^{-jkr}: a cell that applies reflection phase phi
multiplies the incident complex amplitude by |Gamma| * e^{j*phi}.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BacksideIncidenceError, ConfigUnresolvedError, UnsupportedCallbackError
from .scene import Rectangle

TWO_PI = 2.0 * np.pi

CALLBACK_KINDS = ("STEER", "SPLIT", "ABSORB", "PHASE_ALTER", "FOCUS")


@dataclass(eq=False)
class Codebook:
    """state index -> complex reflection coefficient; one zero state absorbs."""

    states: dict

    def __post_init__(self):
        self.states = {int(k): complex(v) for k, v in self.states.items()}
        if any(abs(g) > 1.0 + 1e-12 for g in self.states.values()):
            raise ValueError("codebook contains |Gamma| > 1")

    @property
    def phase_states(self):
        """(index, phase) of the nonzero states, ascending index."""
        return [(i, float(np.angle(g))) for i, g in sorted(self.states.items()) if abs(g) > 0]

    @property
    def absorb_state(self) -> int:
        for i, g in sorted(self.states.items()):
            if abs(g) == 0:
                return i
        raise ValueError("codebook has no absorb state")

    @property
    def phase_magnitude(self) -> float:
        mags = {abs(g) for g in self.states.values() if abs(g) > 0}
        return max(mags)

    def gamma(self, idx):
        return self.states[int(idx)]


def default_codebook() -> Codebook:
    """2-bit phase book: 0.9 * e^{j*m*pi/2} for m in 0..3, plus absorb state 4."""
    states = {m: 0.9 * np.exp(1j * m * np.pi / 2.0) for m in range(4)}
    states[4] = 0.0 + 0.0j
    return Codebook(states)


def load_codebook(path) -> Codebook:
    """JSON codebook: {"states": {"0": {"magnitude": 0.9, "phase_deg": 0}, ...}}."""
    with open(path) as f:
        data = json.load(f)
    states = {
        int(k): d["magnitude"] * np.exp(1j * np.deg2rad(d["phase_deg"]))
        for k, d in data["states"].items()
    }
    return Codebook(states)


def save_codebook(book: Codebook, path):
    data = {
        "states": {
            str(i): {"magnitude": abs(g), "phase_deg": float(np.rad2deg(np.angle(g)))}
            for i, g in sorted(book.states.items())
        }
    }
    with open(path, "w") as f:
        json.dump(data, f, indent=1)


_CODEBOOKS = {"default": default_codebook()}


def get_codebook(name: str) -> Codebook:
    return _CODEBOOKS[name]


@dataclass(eq=False)
class SdmTile:
    """Grid of unit cells on a placement rectangle; states set at deploy time."""

    ident: str
    rect: Rectangle
    rows: int = 16
    cols: int = 16
    pitch: float = 299792458.0 / 5e9 / 2.0  # lambda/2 at 5 GHz
    codebook_id: str = "default"
    states: np.ndarray | None = None  # int state indices, (rows, cols)
    gamma: np.ndarray | None = None  # continuous complex override, (rows, cols)

    def __post_init__(self):
        if self.rect.ident != self.ident:
            raise ValueError("tile id and placement rectangle id must match")
        if self.pitch * self.cols > 2.0 * self.rect.hu + 1e-9:
            raise ValueError(f"tile {self.ident}: cells exceed rectangle u extent")
        if self.pitch * self.rows > 2.0 * self.rect.hv + 1e-9:
            raise ValueError(f"tile {self.ident}: cells exceed rectangle v extent")

    @property
    def center(self):
        return self.rect.center

    @property
    def normal(self):
        return self.rect.normal

    def cell_positions(self) -> np.ndarray:
        """(rows*cols, 3) world positions, row-major over (row, col)."""
        j = np.arange(self.cols) - (self.cols - 1) / 2.0
        i = np.arange(self.rows) - (self.rows - 1) / 2.0
        du, dv = np.meshgrid(j * self.pitch, i * self.pitch)  # (rows, cols)
        pos = (
            self.rect.center[None, None, :]
            + du[..., None] * self.rect.u[None, None, :]
            + dv[..., None] * self.rect.v[None, None, :]
        )
        return pos.reshape(-1, 3)

    def cell_offsets(self) -> np.ndarray:
        """(rows*cols, 3) in-plane offsets from the tile center."""
        return self.cell_positions() - self.rect.center[None, :]

    @property
    def deployed(self) -> bool:
        return self.states is not None or self.gamma is not None

    def gamma_matrix(self) -> np.ndarray:
        """Per-cell complex reflection coefficients of the deployed tile."""
        if self.gamma is not None:
            return np.asarray(self.gamma, dtype=complex).reshape(self.rows, self.cols)
        if self.states is None:
            raise ConfigUnresolvedError(f"tile {self.ident} has no deployed state")
        book = get_codebook(self.codebook_id)
        lut = np.zeros(max(book.states) + 1, dtype=complex)
        for i, g in book.states.items():
            lut[i] = g
        return lut[np.asarray(self.states, dtype=int)]

    def with_states(self, states) -> "SdmTile":
        states = np.asarray(states, dtype=int).reshape(self.rows, self.cols)
        return replace(self, states=states, gamma=None)

    def with_gamma(self, gamma) -> "SdmTile":
        gamma = np.asarray(gamma, dtype=complex).reshape(self.rows, self.cols)
        return replace(self, states=None, gamma=gamma)


def make_tile(ident, center, normal, u_axis, rows=16, cols=16, pitch=None, codebook_id="default"):
    if pitch is None:
        pitch = 299792458.0 / 5e9 / 2.0
    from .scene import make_rectangle

    hu = pitch * cols / 2.0
    hv = pitch * rows / 2.0
    rect = make_rectangle(ident, center, normal, u_axis, hu, hv, material="sdm")
    return SdmTile(ident, rect, rows, cols, pitch, codebook_id)


@dataclass(eq=False)
class Callback:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in CALLBACK_KINDS:
            raise UnsupportedCallbackError(f"unknown callback kind {self.kind!r}")


def steer_callback(incident, target):
    return Callback("STEER", {"incident": np.asarray(incident, float), "target": np.asarray(target, float)})


def focus_callback(source_point, focal_point):
    return Callback(
        "FOCUS", {"source": np.asarray(source_point, float), "focal": np.asarray(focal_point, float)}
    )


def split_callback(incident, target_a, target_b):
    return Callback(
        "SPLIT",
        {
            "incident": np.asarray(incident, float),
            "targets": [np.asarray(target_a, float), np.asarray(target_b, float)],
        },
    )


def absorb_callback():
    return Callback("ABSORB")


def phase_alter_callback(offset, base: Callback | None = None):
    return Callback("PHASE_ALTER", {"offset": float(offset), "base": base})


def callback_to_dict(cb: Callback) -> dict:
    """JSON descriptor {kind, params}; vectors become lists, bases nest."""
    params = {}
    for key, val in cb.params.items():
        if isinstance(val, Callback):
            params[key] = callback_to_dict(val)
        elif isinstance(val, np.ndarray):
            params[key] = val.tolist()
        elif isinstance(val, (list, tuple)) and val and isinstance(val[0], np.ndarray):
            params[key] = [np.asarray(x).tolist() for x in val]
        else:
            params[key] = val
    return {"kind": cb.kind, "params": params}


def callback_from_dict(data: dict) -> Callback:
    kind = data["kind"]
    params = dict(data.get("params", {}))
    if kind == "STEER":
        return steer_callback(params["incident"], params["target"])
    if kind == "FOCUS":
        return focus_callback(params["source"], params["focal"])
    if kind == "SPLIT":
        return split_callback(params["incident"], params["targets"][0], params["targets"][1])
    if kind == "ABSORB":
        return absorb_callback()
    if kind == "PHASE_ALTER":
        base = params.get("base")
        return phase_alter_callback(
            params["offset"], callback_from_dict(base) if base else None
        )
    raise UnsupportedCallbackError(f"unknown callback kind {kind!r}")


# ---------------- continuous phase profiles ----------------


def steer_profile(tile: SdmTile, d_inc, d_out, k: float) -> np.ndarray:
    """Linear phase ramp redirecting a wave arriving along d_inc toward d_out.

    Directions are propagation unit vectors: d_inc points into the tile face,
    d_out away from it. phi = k * (d_inc - d_out) . r_cell, reduced mod 2pi.
    """
    d_inc = np.asarray(d_inc, float)
    d_out = np.asarray(d_out, float)
    n = tile.normal
    if np.dot(d_inc, n) >= 0 or np.dot(d_out, n) <= 0:
        raise BacksideIncidenceError("steer directions must hit and leave the tile face")
    offsets = tile.cell_offsets()
    phi = k * offsets @ (d_inc - d_out)
    return np.mod(phi, TWO_PI).reshape(tile.rows, tile.cols)


def focus_profile(tile: SdmTile, source_point, focal_point, k: float) -> np.ndarray:
    """Phase conjugation: every cell's source->cell->focus phase is 0 mod 2pi."""
    s = np.asarray(source_point, float)
    f = np.asarray(focal_point, float)
    n = tile.normal
    if np.dot(s - tile.center, n) <= 0 or np.dot(f - tile.center, n) <= 0:
        raise BacksideIncidenceError("focus endpoints must lie in front of the tile")
    cells = tile.cell_positions()
    d = np.linalg.norm(cells - s[None, :], axis=1) + np.linalg.norm(cells - f[None, :], axis=1)
    return np.mod(k * d, TWO_PI).reshape(tile.rows, tile.cols)


def split_profile(tile: SdmTile, d_inc, targets, k: float) -> np.ndarray:
    """Phase-only equal-weight superposition of two steer profiles."""
    p1 = steer_profile(tile, d_inc, targets[0], k)
    p2 = steer_profile(tile, d_inc, targets[1], k)
    phi = np.angle(np.exp(1j * p1) + np.exp(1j * p2))
    return np.mod(phi, TWO_PI)


def quantize_profile(profile: np.ndarray, book: Codebook) -> np.ndarray:
    """Nearest-phase-state assignment; ties go to the lower state index.

    Ties are detected with a 1e-12 rad tolerance so that profiles landing
    exactly between two states (up to float rounding) quantize the same
    way on every cell.
    """
    phase_states = book.phase_states
    if len(phase_states) < 2:
        raise ValueError("quantization needs at least two phase states")
    phi = np.asarray(profile, dtype=float)[..., None]
    idxs = np.array([i for i, _ in phase_states])
    phases = np.array([p for _, p in phase_states])
    diff = phi - phases[None, :]
    wrapped = diff - TWO_PI * np.round(diff / TWO_PI)
    dist = np.abs(wrapped)
    dmin = dist.min(axis=-1, keepdims=True)
    return idxs[np.argmax(dist <= dmin + 1e-12, axis=-1)]


def _profile_for(cb: Callback, tile: SdmTile, k: float) -> np.ndarray:
    if cb.kind == "STEER":
        return steer_profile(tile, cb.params["incident"], cb.params["target"], k)
    if cb.kind == "FOCUS":
        return focus_profile(tile, cb.params["source"], cb.params["focal"], k)
    if cb.kind == "SPLIT":
        return split_profile(tile, cb.params["incident"], cb.params["targets"], k)
    if cb.kind == "PHASE_ALTER":
        base = cb.params.get("base")
        base_prof = (
            _profile_for(base, tile, k) if base is not None else np.zeros((tile.rows, tile.cols))
        )
        return np.mod(base_prof + cb.params["offset"], TWO_PI)
    raise UnsupportedCallbackError(f"no phase profile for callback {cb.kind!r}")


def codebook_lookup(cb: Callback, tile: SdmTile, k: float) -> np.ndarray:
    """Compile a callback into the tile's quantized cell-state matrix."""
    book = get_codebook(tile.codebook_id)
    if cb.kind == "ABSORB":
        return np.full((tile.rows, tile.cols), book.absorb_state, dtype=int)
    return quantize_profile(_profile_for(cb, tile, k), book)


def continuous_gamma(cb: Callback, tile: SdmTile, k: float) -> np.ndarray:
    """Ideal (unquantized) per-cell reflection coefficients for a callback."""
    book = get_codebook(tile.codebook_id)
    if cb.kind == "ABSORB":
        return np.zeros((tile.rows, tile.cols), dtype=complex)
    phi = _profile_for(cb, tile, k)
    return book.phase_magnitude * np.exp(1j * phi)


def reflect(tile: SdmTile, incident) -> list:
    """Per-cell re-emission patches: amplitude = Gamma(state) * incident."""
    from .propagation import PatchSource  # deferred: propagation imports tiles

    gam = tile.gamma_matrix().reshape(-1)
    inc = np.asarray(incident, dtype=complex).reshape(-1)
    if inc.shape != gam.shape:
        raise ValueError("incident field shape does not match the cell grid")
    area = tile.pitch**2
    return [
        PatchSource(pos, tile.normal, area, g * e)
        for pos, g, e in zip(tile.cell_positions(), gam, inc)
    ]


# ---------------- configuration scrambling ----------------

_MASK64 = (1 << 64) - 1


def _splitmix64_stream(seed: int, count: int) -> np.ndarray:
    """splitmix64 outputs; fixed here so other implementations can match it."""
    state = seed & _MASK64
    out = np.empty(count, dtype=np.uint64)
    for i in range(count):
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        out[i] = (z ^ (z >> 31)) & _MASK64
    return out


def _state_offsets(key: int, shape, book: Codebook) -> tuple[np.ndarray, np.ndarray, int]:
    n_phase = len(book.phase_states)
    count = int(np.prod(shape))
    offsets = (_splitmix64_stream(key, count) % np.uint64(n_phase)).astype(int).reshape(shape)
    phase_idxs = np.array([i for i, _ in book.phase_states])
    return offsets, phase_idxs, n_phase


def _shift_states(states, key, book, sign):
    states = np.asarray(states, dtype=int)
    offsets, phase_idxs, n_phase = _state_offsets(key, states.shape, book)
    rank_lut = np.full(int(phase_idxs.max()) + 1, -1)
    rank_lut[phase_idxs] = np.arange(n_phase)
    out = states.copy()
    mask = np.isin(states, phase_idxs)
    if mask.any():
        ranks = rank_lut[states[mask]]
        out[mask] = phase_idxs[(ranks + sign * offsets[mask]) % n_phase]
    return out


def scramble_config(states: np.ndarray, key: int, book: Codebook | None = None) -> np.ndarray:
    """Add a keyed pseudorandom phase-state offset per cell (absorb cells pass)."""
    return _shift_states(states, key, book or default_codebook(), +1)


def descramble_config(states: np.ndarray, key: int, book: Codebook | None = None) -> np.ndarray:
    """Inverse of scramble_config under the same key; wrong keys yield noise."""
    return _shift_states(states, key, book or default_codebook(), -1)
