"""Two-layer uplink interference handling.

Each mobile station (MS) is demodulated either at its own BS (layer 1) or
forwarded raw to the shared backhaul processing unit (layer 2), where
interference among layer-2 users is cancelled jointly.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _accel
from ._accel import kernel

D_MIN = 1.0  # metres; distances are clamped here to keep path loss finite


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


class Layer(enum.IntEnum):
    LAYER1 = 1
    LAYER2 = 2


class Mode(enum.Enum):
    GEOMETRIC = "geometric"
    CQI = "cqi"


@dataclass(frozen=True)
class CellLayout:
    bs_positions: np.ndarray
    cell_radius: float
    interference_radius: float

    def __post_init__(self):
        pos = np.asarray(self.bs_positions, dtype=np.float64).reshape(-1, 2)
        object.__setattr__(self, "bs_positions", pos)
        if self.interference_radius < 0 or not self.cell_radius > 0:
            raise ValueError("radii must be positive")

    @property
    def n_cells(self) -> int:
        return len(self.bs_positions)

    def nearest_bs(self, point) -> int:
        d = np.hypot(*(self.bs_positions - np.asarray(point, float)).T)
        return int(np.argmin(d))  # argmin returns the lowest index on ties


def hex_layout(n_rings: int = 1, cell_radius: float = 100.0, radius_fraction: float = 0.8) -> CellLayout:
    """BSs on a hexagonal grid: the centre cell plus ``n_rings`` rings around it."""
    isd = math.sqrt(3.0) * cell_radius
    cells = []
    for q in range(-n_rings, n_rings + 1):
        for r in range(max(-n_rings, -q - n_rings), min(n_rings, -q + n_rings) + 1):
            ring = max(abs(q), abs(r), abs(q + r))
            cells.append((ring, q, r))
    cells.sort()
    pos = [(isd * (q + r / 2.0), isd * math.sqrt(3.0) / 2.0 * r) for _, q, r in cells]
    return CellLayout(np.array(pos), cell_radius, radius_fraction * cell_radius)


@dataclass(frozen=True)
class MobileStation:
    position: tuple[float, float]
    serving_bs: int
    tx_power: float = 0.2  # watts (23 dBm)


def station(layout: CellLayout, position, tx_power: float = 0.2) -> MobileStation:
    """MS attached to its nearest BS."""
    pos = (float(position[0]), float(position[1]))
    return MobileStation(pos, layout.nearest_bs(pos), tx_power)


@dataclass(frozen=True)
class ChannelModel:
    pathloss_exponent: float = 3.5
    noise_power: float = dbm_to_watts(-100.0)
    cqi_threshold: float = 3.0  # dB
    residual: float = 0.0  # fraction of layer-2 interference left after joint cancellation

    def __post_init__(self):
        if not self.pathloss_exponent > 2:
            raise ValueError("path-loss exponent must exceed 2")
        if not self.noise_power > 0:
            raise ValueError("noise power must be positive")
        if not 0.0 <= self.residual <= 1.0:
            raise ValueError("residual must be in [0, 1]")


@dataclass(frozen=True)
class LayerAssignment:
    layers: tuple[Layer, ...]
    pre_sinr: np.ndarray  # dB
    post_sinr: np.ndarray  # dB

    @property
    def layer2_count(self) -> int:
        return sum(1 for x in self.layers if x is Layer.LAYER2)

    @property
    def layer2_fraction(self) -> float:
        return self.layer2_count / len(self.layers) if self.layers else 0.0


def _gain(ms: MobileStation, bs_xy, exponent: float) -> float:
    d = max(math.dist(ms.position, bs_xy), D_MIN)
    return ms.tx_power * d ** (-exponent)


def _sinr_linear(ms: MobileStation, all_ms: Sequence[MobileStation], layout: CellLayout,
                 channel: ChannelModel, weight=None) -> float:
    bs_xy = layout.bs_positions[ms.serving_bs]
    signal = _gain(ms, bs_xy, channel.pathloss_exponent)
    interference = 0.0
    for other in all_ms:
        if other.serving_bs == ms.serving_bs:
            continue
        w = 1.0 if weight is None else weight(other)
        if w:
            interference += w * _gain(other, bs_xy, channel.pathloss_exponent)
    return signal / (interference + channel.noise_power)


def uplink_sinr(ms: MobileStation, all_ms: Sequence[MobileStation], layout: CellLayout,
                channel: ChannelModel) -> float:
    """Uplink SINR in dB at the MS's serving BS; every MS of another cell interferes."""
    return float(to_db(_sinr_linear(ms, all_ms, layout, channel)))


def classify(ms: MobileStation, layout: CellLayout, channel: ChannelModel, mode: Mode | str,
             all_ms: Sequence[MobileStation] = ()) -> Layer:
    """Geometric: layer 2 iff inside another BS's interference radius. CQI: layer 2 iff SINR below threshold."""
    mode = Mode(mode)
    if mode is Mode.GEOMETRIC:
        for j, bs_xy in enumerate(layout.bs_positions):
            if j != ms.serving_bs and math.dist(ms.position, bs_xy) < layout.interference_radius:
                return Layer.LAYER2
        return Layer.LAYER1
    return Layer.LAYER2 if uplink_sinr(ms, all_ms, layout, channel) < channel.cqi_threshold else Layer.LAYER1


def assign_layers(stations: Sequence[MobileStation], layout: CellLayout, channel: ChannelModel,
                  mode: Mode | str) -> LayerAssignment:
    layers = tuple(classify(ms, layout, channel, mode, stations) for ms in stations)
    pre = np.array([uplink_sinr(ms, stations, layout, channel) for ms in stations])
    return LayerAssignment(layers, pre, pre.copy())


def cancel_intra_cluster(assignment: LayerAssignment, stations: Sequence[MobileStation],
                         layout: CellLayout, channel: ChannelModel) -> LayerAssignment:
    """Recompute layer-2 SINRs with other layer-2 users' interference cancelled at the BPU."""
    layer_of = {id(ms): layer for ms, layer in zip(stations, assignment.layers)}

    def weight(other: MobileStation) -> float:
        return channel.residual if layer_of[id(other)] is Layer.LAYER2 else 1.0

    post = assignment.pre_sinr.copy()
    for i, (ms, layer) in enumerate(zip(stations, assignment.layers)):
        if layer is Layer.LAYER2:
            post[i] = to_db(_sinr_linear(ms, stations, layout, channel, weight))
    return LayerAssignment(assignment.layers, assignment.pre_sinr, post)


@dataclass(frozen=True)
class FronthaulReport:
    bpu_load: float  # Mbps
    savings_vs_cran: float
    cran_load: float


def fronthaul_report(assignment: LayerAssignment, raw_rate_per_ms: float) -> FronthaulReport:
    """Only layer-2 users ship raw samples to the BPU; centralized RAN ships everyone's."""
    if not raw_rate_per_ms > 0:
        raise ValueError("raw rate must be positive")
    n = len(assignment.layers)
    n2 = assignment.layer2_count
    return FronthaulReport(raw_rate_per_ms * n2, 1.0 - n2 / n if n else 0.0, raw_rate_per_ms * n)


# ---------------------------------------------------------------------------
# Monte Carlo over snapshots: one co-channel MS per cell, uniform in its cell.

@kernel
def _snapshot_sinr_loops(ms_xy, bs_xy, tx_power, exponent, noise, layer2, residual, pre, post):
    n_snap = ms_xy.shape[0]
    n_cell = ms_xy.shape[1]
    for s in range(n_snap):
        for i in range(n_cell):
            dx = ms_xy[s, i, 0] - bs_xy[i, 0]
            dy = ms_xy[s, i, 1] - bs_xy[i, 1]
            d = max(math.sqrt(dx * dx + dy * dy), 1.0)
            signal = tx_power * d ** (-exponent)
            interf = 0.0
            kept = 0.0
            for k in range(n_cell):
                if k == i:
                    continue
                dx = ms_xy[s, k, 0] - bs_xy[i, 0]
                dy = ms_xy[s, k, 1] - bs_xy[i, 1]
                d = max(math.sqrt(dx * dx + dy * dy), 1.0)
                g = tx_power * d ** (-exponent)
                interf += g
                if layer2[s, k]:
                    kept += residual * g
                else:
                    kept += g
            pre[s, i] = signal / (interf + noise)
            post[s, i] = signal / (kept + noise) if layer2[s, i] else pre[s, i]


def _snapshot_sinr_numpy(ms_xy, bs_xy, tx_power, exponent, noise, layer2, residual, pre, post):
    diff = ms_xy[:, :, None, :] - bs_xy[None, None, :, :]  # [snap, ms, bs, xy]
    d = np.maximum(np.sqrt(np.sum(diff * diff, axis=-1)), D_MIN)
    g = tx_power * d ** (-exponent)
    n = ms_xy.shape[1]
    own = np.eye(n, dtype=bool)
    signal = g[:, own]  # g[s, i, i]
    cross = np.where(own[None], 0.0, g)  # cross[s, k, i]: MS k heard at BS i
    weights = np.where(layer2, residual, 1.0)[:, :, None]
    pre[:] = signal / (cross.sum(axis=1) + noise)
    kept = (cross * weights).sum(axis=1)
    post[:] = np.where(layer2, signal / (kept + noise), pre)


def snapshot_sinr(ms_xy, bs_xy, tx_power, exponent, noise, layer2, residual, use_numba=None):
    """Linear pre/post-cancellation SINR for every MS of every snapshot.

    ``ms_xy[s, i]`` is the MS served by BS ``i`` in snapshot ``s``.
    """
    ms_xy = np.ascontiguousarray(ms_xy, dtype=np.float64)
    layer2 = np.ascontiguousarray(layer2, dtype=np.bool_)
    pre = np.empty(ms_xy.shape[:2])
    post = np.empty(ms_xy.shape[:2])
    fast = _accel.USE_NUMBA if use_numba is None else use_numba
    fn = _snapshot_sinr_loops if fast else _snapshot_sinr_numpy
    fn(ms_xy, np.asarray(bs_xy, np.float64), float(tx_power), float(exponent), float(noise),
       layer2, float(residual), pre, post)
    return pre, post


def sample_positions(layout: CellLayout, n_snapshots: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform MS positions, one per cell, restricted to points nearest their own BS within ``cell_radius``."""
    out = np.empty((n_snapshots, layout.n_cells, 2))
    for i, bs_xy in enumerate(layout.bs_positions):
        filled = 0
        while filled < n_snapshots:
            m = 2 * (n_snapshots - filled) + 8
            r = layout.cell_radius * np.sqrt(rng.random(m))
            th = 2.0 * np.pi * rng.random(m)
            pts = bs_xy + np.column_stack([r * np.cos(th), r * np.sin(th)])
            d = np.hypot(pts[:, None, 0] - layout.bs_positions[None, :, 0],
                         pts[:, None, 1] - layout.bs_positions[None, :, 1])
            ok = pts[np.argmin(d, axis=1) == i]
            take = min(len(ok), n_snapshots - filled)
            out[filled:filled + take, i] = ok[:take]
            filled += take
    return out


def geometric_layer2(ms_xy: np.ndarray, layout: CellLayout) -> np.ndarray:
    d = np.hypot(ms_xy[:, :, None, 0] - layout.bs_positions[None, None, :, 0],
                 ms_xy[:, :, None, 1] - layout.bs_positions[None, None, :, 1])
    np.einsum("sii->si", d)[...] = np.inf  # ignore the serving BS
    return (d < layout.interference_radius).any(axis=2)


@dataclass(frozen=True)
class SnapshotStats:
    layer2_fraction: np.ndarray
    mean_pre_sinr_db: np.ndarray
    mean_post_sinr_db: np.ndarray
    bpu_load: np.ndarray
    savings: np.ndarray


def monte_carlo(layout: CellLayout, channel: ChannelModel, mode: Mode | str, n_snapshots: int,
                seed: int, tx_power: float = 0.2, raw_rate: float = 30.0,
                positions: np.ndarray | None = None) -> SnapshotStats:
    mode = Mode(mode)
    ms_xy = sample_positions(layout, n_snapshots, np.random.default_rng(seed)) if positions is None else positions
    no_l2 = np.zeros(ms_xy.shape[:2], dtype=bool)
    pre, _ = snapshot_sinr(ms_xy, layout.bs_positions, tx_power, channel.pathloss_exponent,
                           channel.noise_power, no_l2, channel.residual)
    if mode is Mode.GEOMETRIC:
        layer2 = geometric_layer2(ms_xy, layout)
    else:
        layer2 = to_db(pre) < channel.cqi_threshold
    _, post = snapshot_sinr(ms_xy, layout.bs_positions, tx_power, channel.pathloss_exponent,
                            channel.noise_power, layer2, channel.residual)
    n = layout.n_cells
    n2 = layer2.sum(axis=1)
    return SnapshotStats(
        layer2_fraction=n2 / n,
        mean_pre_sinr_db=to_db(pre).mean(axis=1),
        mean_post_sinr_db=to_db(post).mean(axis=1),
        bpu_load=raw_rate * n2,
        savings=1.0 - n2 / n,
    )


def triangle_fixture():
    """Three BSs on a triangle; MS #1 sits by BS #1, MS #2 near the BS #1/BS #2
    border inside the interference circles of BS #2 and BS #3.

    Each MS shares its resource block with one edge user in each of the other
    two cells. Returns ``(layout, channel, center_snapshot, edge_snapshot)``;
    the snapshots list MS #1 (resp. MS #2) first.
    """
    side = 120.0
    h = side * math.sqrt(3.0) / 2.0
    layout = CellLayout(np.array([[0.0, 0.0], [side, 0.0], [side / 2.0, h]]), 100.0, 80.0)
    centroid = np.array([side / 2.0, h / 3.0])

    def toward(bs: int, step: float) -> np.ndarray:
        u = layout.bs_positions[bs] - centroid
        return centroid + step * u / np.linalg.norm(u)

    ms1 = station(layout, (10.0, 5.0))
    ms2 = station(layout, centroid + np.array([-1.0, 0.0]))
    u2 = station(layout, toward(1, 2.0))
    u3 = station(layout, toward(2, 2.0))
    return layout, ChannelModel(), [ms1, u2, u3], [ms2, u2, u3]
