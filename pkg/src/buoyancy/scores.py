"""Per-resource scores computed from one telemetry window.

Three scores are implemented:

* CPU: user-space CPU time over allocated CPU time. Kernel time is
  deliberately excluded; waiting on other resources inflates kernel time
  and would masquerade as CPU pressure.
* LLC: the miss-ratio curve is approximated as ``f(x) = a * x**b`` by an
  ordinary least squares fit in log-log space over the (cache size, miss
  ratio) points of the available cache levels. The score is the predicted
  change in miss ratio for a one-way change in allocation, relative to the
  measured LLC miss ratio: ``min(-f'(s) * way_size / m_llc, 1)``.
* MBW: current memory bandwidth over allocated bandwidth, falling back to
  the node's theoretical peak when no explicit allocation exists.

All scores are clamped to [0, 1]; counter jitter and overcommit can push
the raw ratios past 1. Everything here is a pure function of one window,
so a node agent can smooth or aggregate on top without surprises.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import NoMemoryTraffic, ZeroAllocation
from .model import CacheTopology, ResourceScores, TelemetrySample, llc_way_size, theoretical_max_mbw


@dataclass(frozen=True, slots=True)
class MrcFit:
    """Power-law miss-ratio curve ``f(x) = coeff_a * x**exponent_b``.

    ``degenerate`` is set when the inputs cannot produce a decreasing
    curve (any non-positive or non-finite miss ratio, or a fitted
    exponent >= 0). Degenerate fits always carry exponent_b == 0 so the
    LLC score collapses to 0 instead of raising; scoring has to keep
    working online even when counters misbehave for a window.
    """

    coeff_a: float
    exponent_b: float
    degenerate: bool = False

    def __call__(self, x: float) -> float:
        """Evaluate the fitted miss ratio at cache size ``x`` KiB."""
        return self.coeff_a * x ** self.exponent_b

    def derivative(self, x: float) -> float:
        """Slope of the fitted curve at cache size ``x`` KiB."""
        return self.coeff_a * self.exponent_b * x ** (self.exponent_b - 1.0)


def cpu_score(sample: TelemetrySample) -> float:
    """CPU score: user CPU seconds over allocated core-seconds, clamped to 1."""
    window = sample.window_s
    if sample.cpu_alloc_cores <= 0 or window <= 0:
        raise ZeroAllocation(
            f"cpu_alloc_cores={sample.cpu_alloc_cores}, window={window}s"
        )
    t_alloc = sample.cpu_alloc_cores * window
    return min(sample.cpu_user_time_s / t_alloc, 1.0)


def miss_ratios(sample: TelemetrySample) -> tuple[float, float, float]:
    """Per-level cache miss ratios (L1, L2, L3) of one window."""
    if sample.mem_refs <= 0:
        raise NoMemoryTraffic(f"workload {sample.workload_id}: mem_refs=0")
    n = sample.mem_refs
    return (sample.l1_miss / n, sample.l2_miss / n, sample.l3_miss / n)


def fit_power_law(sizes_kib: Sequence[float], ratios: Sequence[float]) -> MrcFit:
    """OLS fit of ``ln M = b0 + b1 ln x`` over n >= 2 points.

    Returns MrcFit(a=e**b0, b=b1). Any non-positive or non-finite ratio,
    or a non-negative fitted slope, yields a degenerate fit instead of an
    error (a is kept from b0 when computable so callers can still inspect
    the level).
    """
    if len(sizes_kib) != len(ratios) or len(sizes_kib) < 2:
        raise ValueError("need n >= 2 matched (size, ratio) points")
    if any(not (m > 0) or not math.isfinite(m) for m in ratios):
        return MrcFit(coeff_a=1.0, exponent_b=0.0, degenerate=True)

    log_x = [math.log(x) for x in sizes_kib]
    log_m = [math.log(m) for m in ratios]
    n = len(log_x)
    mean_x = math.fsum(log_x) / n
    mean_m = math.fsum(log_m) / n
    sxx = math.fsum((lx - mean_x) ** 2 for lx in log_x)
    sxm = math.fsum((lx - mean_x) * (lm - mean_m) for lx, lm in zip(log_x, log_m))
    if sxx == 0.0:
        return MrcFit(coeff_a=1.0, exponent_b=0.0, degenerate=True)

    beta1 = sxm / sxx
    beta0 = mean_m - beta1 * mean_x
    if beta1 >= 0.0:
        return MrcFit(coeff_a=math.exp(beta0), exponent_b=0.0, degenerate=True)
    return MrcFit(coeff_a=math.exp(beta0), exponent_b=beta1)


def fit_mrc(
    topology: CacheTopology,
    ratios: tuple[float, float, float],
    llc_alloc_kib: Optional[float] = None,
) -> MrcFit:
    """Fit the miss-ratio curve from the three cache-level points.

    The x coordinates are the L1 and L2 sizes plus the effective LLC
    size: the current allocation when one is set, the full L3 otherwise.
    """
    s_eff = llc_alloc_kib if llc_alloc_kib is not None else topology.l3_size_kib
    return fit_power_law(
        (topology.l1_size_kib, topology.l2_size_kib, s_eff), ratios
    )


def llc_score(fit: MrcFit, topology: CacheTopology, s_llc: float, m_llc: float) -> float:
    """LLC sensitivity score at allocation ``s_llc`` KiB.

    ``m_llc`` is the measured L3 miss ratio, not the fitted value; the fit
    only supplies the local slope. Degenerate fits and non-positive
    denominators score 0 by definition rather than raising.
    """
    if fit.degenerate or m_llc <= 0 or s_llc <= 0:
        return 0.0
    predicted_delta = -fit.derivative(s_llc) * llc_way_size(topology)
    return min(predicted_delta / m_llc, 1.0)


def mbw_score(sample: TelemetrySample, topology: CacheTopology) -> float:
    """Memory bandwidth score: current over allocated bytes/s, clamped."""
    alloc = sample.mbw_alloc_bytes_per_s
    if alloc is None:
        alloc = theoretical_max_mbw(topology)
    elif alloc <= 0:
        raise ZeroAllocation(f"mbw_alloc_bytes_per_s={alloc}")
    current = sample.mbw_bytes / sample.window_s
    return min(current / alloc, 1.0)


def score_workload(sample: TelemetrySample, topology: CacheTopology) -> ResourceScores:
    """Assemble the CPU, LLC and MBW scores of one workload-window.

    A window with no memory references scores 0 on LLC while CPU and MBW
    are computed as usual.
    """
    cpu = cpu_score(sample)
    mbw = mbw_score(sample, topology)
    if sample.mem_refs <= 0:
        return ResourceScores(cpu=cpu, llc=0.0, mbw=mbw)
    ratios = miss_ratios(sample)
    fit = fit_mrc(topology, ratios, sample.llc_alloc_kib)
    s_llc = sample.llc_alloc_kib if sample.llc_alloc_kib is not None else topology.l3_size_kib
    llc = llc_score(fit, topology, s_llc, ratios[2])
    return ResourceScores(cpu=cpu, llc=llc, mbw=mbw)
