"""Hot numeric kernels with numba and pure-numpy backends.

The active backend is chosen at import time from the ``MINDSWARM_NUMBA``
environment variable ("0"/"false"/"off" selects the numpy fallback) and can
be switched at runtime with :func:`set_backend`, which is what the benchmark
in ``benchmarks/bench_kernels.py`` does to time both paths in one process.

Both backends evaluate the same recurrences with the same per-element
operation order, so the IIR kernel is bit-identical across backends; the
swarm kernel differs only in summation order (parity within ~1e-12).
"""

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


def _env_backend() -> str:
    val = os.environ.get("MINDSWARM_NUMBA", "1").strip().lower()
    if val in ("0", "false", "off", "no") or not HAVE_NUMBA:
        return "numpy"
    return "numba"


_ACTIVE = _env_backend()


def active_backend() -> str:
    return _ACTIVE


def set_backend(name: str) -> None:
    global _ACTIVE
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown kernel backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    _ACTIVE = name


# ---------------------------------------------------------------------------
# IIR second-order-section cascade, direct form II transposed.
# x is (channels, time) and is filtered along the last axis; zi is the
# (sections, channels, 2) initial state and is updated in place.
# ---------------------------------------------------------------------------


def _sosfilt_numpy(sos, x, zi):
    n_sections = sos.shape[0]
    n_time = x.shape[1]
    for s in range(n_sections):
        b0, b1, b2 = sos[s, 0], sos[s, 1], sos[s, 2]
        a1, a2 = sos[s, 4], sos[s, 5]
        z0 = zi[s, :, 0].copy()
        z1 = zi[s, :, 1].copy()
        for t in range(n_time):
            xn = x[:, t]
            yn = b0 * xn + z0
            z0 = b1 * xn - a1 * yn + z1
            z1 = b2 * xn - a2 * yn
            x[:, t] = yn
        zi[s, :, 0] = z0
        zi[s, :, 1] = z1
    return x


@njit(cache=True)
def _sosfilt_numba(sos, x, zi):  # pragma: no cover - exercised via dispatch
    n_sections = sos.shape[0]
    n_channels = x.shape[0]
    n_time = x.shape[1]
    for s in range(n_sections):
        b0, b1, b2 = sos[s, 0], sos[s, 1], sos[s, 2]
        a1, a2 = sos[s, 4], sos[s, 5]
        for c in range(n_channels):
            z0 = zi[s, c, 0]
            z1 = zi[s, c, 1]
            for t in range(n_time):
                xn = x[c, t]
                yn = b0 * xn + z0
                z0 = b1 * xn - a1 * yn + z1
                z1 = b2 * xn - a2 * yn
                x[c, t] = yn
            zi[s, c, 0] = z0
            zi[s, c, 1] = z1
    return x


def sosfilt_inplace(sos, x, zi, backend=None):
    """Run the SOS cascade over ``x`` (channels x time), modifying it in place.

    ``zi`` holds per-section, per-channel state and is consumed/updated so
    forward and backward passes can be chained.
    """
    which = backend or _ACTIVE
    if which == "numba":
        return _sosfilt_numba(sos, x, zi)
    return _sosfilt_numpy(sos, x, zi)


# ---------------------------------------------------------------------------
# Swarm per-agent steering accelerations.
#
# Terms (all dimensionless gains applied by the caller's params):
#   cohesion   spring toward the (group-local when split) centroid with rest
#              length rest_radius
#   separation pairwise repulsion, magnitude (range/d - 1) inside `range`;
#              range is r_sep for same-group pairs and cross_range for
#              cross-group pairs (cross_range > r_sep while split keeps the
#              two groups spatially apart)
#   alignment  relax toward the group mean velocity
#   command    relax toward the commanded velocity setpoint
#   goal       relax toward v_cmd directed at the goal point (RETURN/FOLLOW)
# ---------------------------------------------------------------------------

_EPS_DIST = 1e-9


def _swarm_accel_numpy(pos, vel, groups, split_active, rest_radius, cross_range,
                       w_coh, w_sep, w_align, w_cmd, w_goal, r_sep, v_cmd,
                       setpoint, goal, goal_active):
    n = pos.shape[0]

    if split_active:
        same = groups[:, None] == groups[None, :]
    else:
        same = np.ones((n, n), dtype=np.bool_)

    counts = same.sum(axis=1).astype(np.float64)
    centroids = (same.astype(np.float64) @ pos) / counts[:, None]
    mean_vel = (same.astype(np.float64) @ vel) / counts[:, None]

    # cohesion: spring toward group centroid, rest length rest_radius
    to_c = centroids - pos
    dist_c = np.sqrt((to_c * to_c).sum(axis=1))
    safe = np.maximum(dist_c, _EPS_DIST)
    coh = to_c / safe[:, None] * (dist_c - rest_radius)[:, None]
    coh[dist_c < _EPS_DIST] = 0.0

    # separation: all pairs; cross-group pairs use the extended range
    diff = pos[:, None, :] - pos[None, :, :]
    d = np.sqrt((diff * diff).sum(axis=2))
    np.fill_diagonal(d, np.inf)
    rng = np.where(same, r_sep, cross_range)
    inside = d < rng
    mag = np.where(inside, rng / np.maximum(d, _EPS_DIST) - 1.0, 0.0)
    sep = (diff / np.maximum(d, _EPS_DIST)[:, :, None] * mag[:, :, None]).sum(axis=1)

    align = mean_vel - vel
    cmd = setpoint[None, :] - vel

    acc = w_coh * coh + w_sep * sep + w_align * align + w_cmd * cmd
    if goal_active:
        to_g = goal[None, :] - pos
        dist_g = np.sqrt((to_g * to_g).sum(axis=1))
        safe_g = np.maximum(dist_g, _EPS_DIST)
        desired = to_g / safe_g[:, None] * v_cmd
        desired[dist_g < _EPS_DIST] = 0.0
        acc += w_goal * (desired - vel)
    return acc


@njit(cache=True)
def _swarm_accel_numba(pos, vel, groups, split_active, rest_radius, cross_range,
                       w_coh, w_sep, w_align, w_cmd, w_goal, r_sep, v_cmd,
                       setpoint, goal, goal_active):  # pragma: no cover
    n = pos.shape[0]
    acc = np.zeros_like(pos)
    for i in range(n):
        cx = cy = cz = 0.0
        vx = vy = vz = 0.0
        count = 0.0
        for j in range(n):
            if split_active and groups[j] != groups[i]:
                continue
            cx += pos[j, 0]
            cy += pos[j, 1]
            cz += pos[j, 2]
            vx += vel[j, 0]
            vy += vel[j, 1]
            vz += vel[j, 2]
            count += 1.0
        cx /= count
        cy /= count
        cz /= count
        vx /= count
        vy /= count
        vz /= count

        tx = cx - pos[i, 0]
        ty = cy - pos[i, 1]
        tz = cz - pos[i, 2]
        dist_c = np.sqrt(tx * tx + ty * ty + tz * tz)
        if dist_c >= _EPS_DIST:
            k = (dist_c - rest_radius) / dist_c
            acc[i, 0] += w_coh * tx * k
            acc[i, 1] += w_coh * ty * k
            acc[i, 2] += w_coh * tz * k

        sx = sy = sz = 0.0
        for j in range(n):
            if j == i:
                continue
            if split_active and groups[j] != groups[i]:
                rng = cross_range
            else:
                rng = r_sep
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            d = np.sqrt(dx * dx + dy * dy + dz * dz)
            if d < rng:
                dd = d if d > _EPS_DIST else _EPS_DIST
                m = (rng / dd - 1.0) / dd
                sx += dx * m
                sy += dy * m
                sz += dz * m
        acc[i, 0] += w_sep * sx
        acc[i, 1] += w_sep * sy
        acc[i, 2] += w_sep * sz

        acc[i, 0] += w_align * (vx - vel[i, 0])
        acc[i, 1] += w_align * (vy - vel[i, 1])
        acc[i, 2] += w_align * (vz - vel[i, 2])

        acc[i, 0] += w_cmd * (setpoint[0] - vel[i, 0])
        acc[i, 1] += w_cmd * (setpoint[1] - vel[i, 1])
        acc[i, 2] += w_cmd * (setpoint[2] - vel[i, 2])

        if goal_active:
            gx = goal[0] - pos[i, 0]
            gy = goal[1] - pos[i, 1]
            gz = goal[2] - pos[i, 2]
            dist_g = np.sqrt(gx * gx + gy * gy + gz * gz)
            if dist_g >= _EPS_DIST:
                acc[i, 0] += w_goal * (gx / dist_g * v_cmd - vel[i, 0])
                acc[i, 1] += w_goal * (gy / dist_g * v_cmd - vel[i, 1])
                acc[i, 2] += w_goal * (gz / dist_g * v_cmd - vel[i, 2])
            else:
                acc[i, 0] += w_goal * (0.0 - vel[i, 0])
                acc[i, 1] += w_goal * (0.0 - vel[i, 1])
                acc[i, 2] += w_goal * (0.0 - vel[i, 2])
    return acc


def swarm_accel(pos, vel, groups, split_active, rest_radius, cross_range,
                w_coh, w_sep, w_align, w_cmd, w_goal, r_sep, v_cmd,
                setpoint, goal, goal_active, backend=None):
    """Per-agent steering acceleration for one tick. Pure, allocates output."""
    which = backend or _ACTIVE
    if which == "numba":
        return _swarm_accel_numba(pos, vel, groups, split_active, rest_radius,
                                  cross_range, w_coh, w_sep, w_align, w_cmd,
                                  w_goal, r_sep, v_cmd, setpoint, goal,
                                  goal_active)
    return _swarm_accel_numpy(pos, vel, groups, split_active, rest_radius,
                              cross_range, w_coh, w_sep, w_align, w_cmd,
                              w_goal, r_sep, v_cmd, setpoint, goal,
                              goal_active)
