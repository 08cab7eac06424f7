"""Independently written brute-force oracles.

Everything here is deliberately implemented with plain Python loops (and the
opposite loop nesting where the library vectorizes), so agreement with the
library is evidence, not tautology. Sums use math.fsum, which is exactly
rounded and therefore independent of summation order.
"""

from __future__ import annotations

import math
import statistics


# --- overlap and surface metrics ---------------------------------------------


def dice_oracle(t, p) -> float:
    nt = np_ = inter = 0
    t_flat = t.ravel()
    p_flat = p.ravel()
    for a, b in zip(t_flat, p_flat):
        nt += bool(a)
        np_ += bool(b)
        inter += bool(a) and bool(b)
    if nt + np_ == 0:
        return 1.0
    return 2.0 * inter / (nt + np_)


def surface_oracle(mask) -> list[tuple[int, ...]]:
    """Foreground cells with a background neighbor; border = background."""
    shape = mask.shape
    points = []
    if mask.ndim == 3:
        nx, ny, nz = shape
        for x in range(nx):
            for y in range(ny):
                for z in range(nz):
                    if not mask[x, y, z]:
                        continue
                    on_surface = False
                    for dx, dy, dz in (
                        (-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1),
                    ):
                        px, py, pz = x + dx, y + dy, z + dz
                        if not (0 <= px < nx and 0 <= py < ny and 0 <= pz < nz):
                            on_surface = True
                            break
                        if not mask[px, py, pz]:
                            on_surface = True
                            break
                    if on_surface:
                        points.append((x, y, z))
    else:
        nx, ny = shape
        for x in range(nx):
            for y in range(ny):
                if not mask[x, y]:
                    continue
                for dx, dy in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                    px, py = x + dx, y + dy
                    if not (0 <= px < nx and 0 <= py < ny) or not mask[px, py]:
                        points.append((x, y))
                        break
    return points


def directed_min_distances_oracle(src, dst) -> list[float]:
    """Min distance from each src point to dst; inner loop runs over src
    (reversed nesting relative to the library's vectorization)."""
    mins = [math.inf] * len(src)
    for d in dst:
        for i, s in enumerate(src):
            acc = 0.0
            for a, b in zip(s, d):
                diff = a - b
                acc = acc + diff * diff
            dist = math.sqrt(acc)
            if dist < mins[i]:
                mins[i] = dist
    return mins


def asd_oracle(t_points, p_points) -> float:
    fwd = directed_min_distances_oracle(t_points, p_points)
    bwd = directed_min_distances_oracle(p_points, t_points)
    return (math.fsum(fwd) + math.fsum(bwd)) / (len(t_points) + len(p_points))


def hausdorff_oracle(t_points, p_points, percentile: int) -> float:
    fwd = sorted(directed_min_distances_oracle(t_points, p_points))
    bwd = sorted(directed_min_distances_oracle(p_points, t_points))

    def pick(values):
        k = math.ceil(percentile / 100.0 * len(values))
        return values[k - 1]

    return max(pick(fwd), pick(bwd))


# --- wall thickness -----------------------------------------------------------


def contours_oracle(labels, myo_code=2, lv_code=3):
    """Inner/outer contour pixel sets by per-pixel adjacency walks."""
    nx, ny = labels.shape
    inner, outer = set(), set()
    for x in range(nx):
        for y in range(ny):
            if labels[x, y] != myo_code:
                continue
            touches_lv = touches_ext = False
            for dx, dy in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                px, py = x + dx, y + dy
                if not (0 <= px < nx and 0 <= py < ny):
                    touches_ext = True
                elif labels[px, py] == lv_code:
                    touches_lv = True
                elif labels[px, py] != myo_code:
                    touches_ext = True
            if touches_lv:
                inner.add((x, y))
            elif touches_ext:
                outer.add((x, y))
    return inner, outer


def slice_mwt_oracle(inner, outer, spacing=(1.0, 1.0)):
    """Thickness per inner pixel via explicit double loop over sorted sets."""
    dx, dy = spacing
    distances = []
    for ix, iy in sorted(inner):
        best = math.inf
        for ox, oy in sorted(outer):
            ddx = (ix - ox) * dx
            ddy = (iy - oy) * dy
            d = math.sqrt(ddx * ddx + ddy * ddy)
            if d < best:
                best = d
        distances.append(best)
    mean = statistics.fmean(distances)
    stdev = statistics.stdev(distances) if len(distances) > 1 else 0.0
    return distances, mean, stdev


def mwt_aggregates_oracle(means, stdevs):
    """Spreadsheet-style recomputation of the four long-axis statistics."""
    def sd(xs):
        return statistics.stdev(xs) if len(xs) > 1 else 0.0

    return (max(means), sd(means), statistics.fmean(stdevs), sd(stdevs))


# --- volumes ------------------------------------------------------------------


def volume_oracle(data, code, spacing) -> float:
    """Per-slice voxel-count sum times voxel size, in mL."""
    nx, ny, nz = data.shape
    voxel_mm3 = spacing[0] * spacing[1] * spacing[2]
    total = 0.0
    for k in range(nz):
        n = 0
        for i in range(nx):
            for j in range(ny):
                if data[i, j, k] == code:
                    n += 1
        total += n * voxel_mm3
    return total / 1000.0


# --- agreement statistics -----------------------------------------------------


def bland_altman_oracle(auto, ref):
    """Two-pass statistics using the statistics module where possible."""
    n = len(auto)
    diffs = [a - r for a, r in zip(auto, ref)]
    bias = statistics.fmean(diffs)
    sd = statistics.stdev(diffs)
    loa_low = bias - 1.96 * sd
    loa_high = bias + 1.96 * sd

    mean_a = statistics.fmean(auto)
    mean_r = statistics.fmean(ref)
    sxx = math.fsum((r - mean_r) ** 2 for r in ref)
    syy = math.fsum((a - mean_a) ** 2 for a in auto)
    sxy = math.fsum((r - mean_r) * (a - mean_a) for r, a in zip(ref, auto))
    r_val = sxy / math.sqrt(sxx * syy)
    slope = sxy / sxx
    intercept = mean_a - slope * mean_r
    return {
        "bias": bias,
        "sd_diff": sd,
        "loa_low": loa_low,
        "loa_high": loa_high,
        "pearson_r": r_val,
        "slope": slope,
        "intercept": intercept,
        "n": n,
    }


# --- learners -----------------------------------------------------------------


def finite_difference_gradients(loss_fn, weights, biases, h=1e-6):
    """Central finite differences of a scalar loss in every parameter."""
    grads_w = []
    for li, w in enumerate(weights):
        g = [[0.0] * w.shape[1] for _ in range(w.shape[0])]
        for i in range(w.shape[0]):
            for j in range(w.shape[1]):
                orig = w[i, j]
                w[i, j] = orig + h
                up = loss_fn()
                w[i, j] = orig - h
                down = loss_fn()
                w[i, j] = orig
                g[i][j] = (up - down) / (2 * h)
        grads_w.append(g)
    grads_b = []
    for b in biases:
        g = [0.0] * len(b)
        for i in range(len(b)):
            orig = b[i]
            b[i] = orig + h
            up = loss_fn()
            b[i] = orig - h
            down = loss_fn()
            b[i] = orig
            g[i] = (up - down) / (2 * h)
        grads_b.append(g)
    return grads_w, grads_b


def mse_oracle(a, b) -> float:
    """Two-pass mean of squared differences over flat iterables."""
    flat_a = list(a.ravel())
    flat_b = list(b.ravel())
    total = math.fsum((x - y) ** 2 for x, y in zip(flat_a, flat_b))
    return total / len(flat_a)
