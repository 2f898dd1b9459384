"""SINR with intra/inter-cell interference, achievable rates, the three
delay components, and the multi-attribute utility.

Effective gain tables are indexed [rx_user, ap, precoder_owner, subcarrier]
for DL and [user, ap, subcarrier] for UL. A gain entry of NaN marks a
missing interferer channel and is reported as an error, never silently
zeroed.
"""

import math
from dataclasses import dataclass

import numpy as np

from irslink.scenario import Assignment, Scenario


@dataclass(frozen=True)
class SinrBreakdown:
    signal: float  # Watts
    intra_interference: float
    inter_interference: float
    noise: float

    @property
    def sinr(self) -> float:
        return self.signal / (self.noise + self.intra_interference + self.inter_interference)


@dataclass(frozen=True)
class DelayBreakdown:
    transmission: float  # seconds
    processing: float
    queuing: float

    @property
    def total(self) -> float:
        return self.transmission + self.processing + self.queuing

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.total)


@dataclass(frozen=True)
class UtilityRow:
    user: int
    ap: int
    subcarrier: int
    rate_dl: float
    rate_ul: float
    delay: DelayBreakdown
    conditional_utility: float
    routing_utility: float
    feasible: bool

    @property
    def total_utility(self) -> float:
        return self.conditional_utility * self.routing_utility


@dataclass(frozen=True)
class UtilityReport:
    rows: tuple[UtilityRow, ...]

    @property
    def sum_utility(self) -> float:
        return sum(r.total_utility for r in self.rows)

    def rows_for(self, user: int) -> list[UtilityRow]:
        return [r for r in self.rows if r.user == user]

    def export(self, path) -> None:
        """Delimited text dump, one row per (user, ap, subcarrier)."""
        with open(path, "w") as fh:
            fh.write(
                "user,ap,subcarrier,rate_dl,rate_ul,d_t,d_p,d_q,"
                "u_cond,u_route,u_total,feasible\n"
            )
            for r in self.rows:
                fh.write(
                    f"{r.user},{r.ap},{r.subcarrier},{r.rate_dl:.12g},{r.rate_ul:.12g},"
                    f"{r.delay.transmission:.12g},{r.delay.processing:.12g},"
                    f"{r.delay.queuing:.12g},{r.conditional_utility:.12g},"
                    f"{r.routing_utility:.12g},{r.total_utility:.12g},{int(r.feasible)}\n"
                )


def _used_gain(gains: np.ndarray, index: tuple, label: str) -> np.ndarray:
    values = gains[index]
    if np.any(np.isnan(values)):
        raise ValueError(f"missing interferer channel in {label} gain table at {index}")
    return values


def sinr_dl(
    scenario: Scenario,
    assignment: Assignment,
    eff_gains: np.ndarray,
    signal_aggregate: str = "mean",
) -> dict[tuple[int, int], SinrBreakdown]:
    """Per served (user, AP) DL SINR breakdown.

    eff_gains[i, b, l, n] is the effective channel power gain at user i
    from AP b transmitting user l's stream on subcarrier n (unit-power
    precoders; AP power is applied here). The serving-link gain is
    aggregated over subcarriers by mean or min per ``signal_aggregate``;
    interference always uses the mean.
    """
    if signal_aggregate not in ("mean", "min"):
        raise ValueError("signal_aggregate must be 'mean' or 'min'")
    p = scenario.params
    agg = np.mean if signal_aggregate == "mean" else np.min
    out = {}
    for i, j in enumerate(assignment.user_to_ap):
        if j < 0:
            continue
        signal = p.p_ap * float(agg(_used_gain(eff_gains, (i, j, i), "DL")))
        intra = sum(
            p.p_ap * float(np.mean(_used_gain(eff_gains, (i, j, l), "DL")))
            for l in assignment.users_of_ap(j)
            if l != i
        )
        inter = sum(
            p.p_ap * float(np.mean(_used_gain(eff_gains, (i, b, l), "DL")))
            for b in range(scenario.n_aps)
            if b != j
            for l in assignment.users_of_ap(b)
        )
        out[(i, j)] = SinrBreakdown(signal, intra, inter, p.sigma2)
    return out


@dataclass(frozen=True)
class UlSinrBreakdown:
    """Per-subcarrier UL signal/interference decomposition for one (user, AP)."""

    signal: np.ndarray  # Watts, (n_sc,)
    intra_interference: np.ndarray
    inter_interference: np.ndarray
    noise: float

    @property
    def sinr(self) -> np.ndarray:
        return self.signal / (self.noise + self.intra_interference + self.inter_interference)


def sinr_ul(
    scenario: Scenario,
    assignment: Assignment,
    ul_gains: np.ndarray,
) -> dict[tuple[int, int], UlSinrBreakdown]:
    """Per served (user, AP) per-subcarrier UL SINR breakdown.

    ul_gains[i, j, n] is the composite channel power gain from user i to
    AP j on subcarrier n. All other active users interfere at the
    receiving AP: same-cell users count as intra, other cells as inter.
    """
    p = scenario.params
    out = {}
    for i, j in enumerate(assignment.user_to_ap):
        if j < 0:
            continue
        signal = p.p_user * _used_gain(ul_gains, (i, j), "UL")
        intra = np.zeros(p.n_sc)
        inter = np.zeros(p.n_sc)
        for l, b in enumerate(assignment.user_to_ap):
            if l == i or b < 0:
                continue
            if b == j:
                intra += p.p_user * _used_gain(ul_gains, (l, j), "UL")
            else:
                inter += p.p_user * _used_gain(ul_gains, (l, j), "UL")
        out[(i, j)] = UlSinrBreakdown(signal, intra, inter, p.sigma2)
    return out


def rate(sinr, bandwidth: float):
    """Achievable rate BW * log2(1 + sinr), elementwise."""
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0):
        raise ValueError("sinr must be non-negative")
    out = bandwidth * np.log2(1.0 + sinr)
    return float(out) if out.ndim == 0 else out


def transmission_delay(s_i: float, a_i: float, rate_dl: float, rate_ul: float) -> float:
    """S_i / c_DL + A_i / c_UL; infinite (infeasible) when a needed rate is zero."""
    dl_part = s_i / rate_dl if rate_dl > 0 else (math.inf if s_i > 0 else 0.0)
    ul_part = a_i / rate_ul if rate_ul > 0 else (math.inf if a_i > 0 else 0.0)
    return dl_part + ul_part


def processing_delay(tracking_error: float, params, users_served: int = 1) -> float:
    """Payload v*error clamped to [0, S_i], over the per-user share of the
    AP's processing capacity."""
    if params.m_proc <= 0:
        raise ValueError("processing capacity must be positive")
    if tracking_error < 0:
        raise ValueError("tracking error must be non-negative")
    payload = min(max(params.v_bits * tracking_error, 0.0), params.s_i)
    share = params.m_proc / max(users_served, 1)
    return payload / share


def queuing_delay(mu: float, lam: float) -> float:
    """M/M/1 waiting time 1/(mu - lambda); requires stability mu > lambda."""
    if mu <= lam:
        raise ValueError("queuing stability violated (mu <= lambda)")
    return 1.0 / (mu - lam)


def total_delay(transmission: float, processing: float, queuing: float) -> DelayBreakdown:
    return DelayBreakdown(transmission, processing, queuing)


def conditional_utility(d: float, d_max: float, gamma: float) -> float:
    """Piecewise-linear delay satisfaction: 1 below gamma, 0 at d_max."""
    if d < gamma:
        return 1.0
    if d_max <= gamma:
        # degenerate denominator: step at gamma
        return 1.0 if d <= gamma else 0.0
    return float(np.clip((d_max - d) / (d_max - gamma), 0.0, 1.0))


def routing_utility(tracking_errors: np.ndarray) -> np.ndarray:
    """Per-subcarrier 1 - err_n / max_n err_n; all ones when errors vanish.

    Note the normalization pins the worst subcarrier to exactly 0, and
    all-equal errors give 0 everywhere.
    """
    err = np.asarray(tracking_errors, dtype=float)
    peak = err.max() if err.size else 0.0
    if peak <= 0:
        return np.ones_like(err)
    return 1.0 - err / peak


def tracking_error_model(sinr_ul_values, e0: float = 1.0, model=None):
    """Tracking error versus UL SINR; default e0/(1+sinr), strictly decreasing."""
    s = np.asarray(sinr_ul_values, dtype=float)
    if np.any(s < 0):
        raise ValueError("sinr must be non-negative")
    if model is not None:
        return model(s)
    return e0 / (1.0 + s)


def utility_report(
    scenario: Scenario,
    assignment: Assignment,
    dl_sinr: dict[tuple[int, int], SinrBreakdown],
    ul_sinr: dict[tuple[int, int], np.ndarray],
    error_model=None,
) -> UtilityReport:
    """Full delay/utility evaluation for every served (user, AP, subcarrier)."""
    p = scenario.params
    rows = []
    for (i, j), breakdown in sorted(dl_sinr.items()):
        rate_dl = rate(breakdown.sinr, p.bandwidth)
        ul_values = ul_sinr[(i, j)].sinr
        rates_ul = rate(ul_values, p.bandwidth)
        errors = tracking_error_model(ul_values, e0=p.tracking_e0, model=error_model)
        served = len(assignment.users_of_ap(j))
        d_q = queuing_delay(p.mu_j, p.lambda_i)
        delays = []
        for n in range(p.n_sc):
            d_t = transmission_delay(p.s_i, p.a_i, rate_dl, rates_ul[n])
            d_p = processing_delay(errors[n], p, users_served=served)
            delays.append(total_delay(d_t, d_p, d_q))
        totals = np.array([d.total for d in delays])
        finite = totals[np.isfinite(totals)]
        d_max = float(finite.max()) if finite.size else math.inf
        u_route = routing_utility(errors)
        for n in range(p.n_sc):
            d = delays[n]
            feasible = d.feasible and not assignment.infeasible[i]
            u_cond = conditional_utility(d.total, d_max, p.gamma_d) if d.feasible else 0.0
            rows.append(
                UtilityRow(
                    user=i,
                    ap=j,
                    subcarrier=n,
                    rate_dl=rate_dl,
                    rate_ul=float(rates_ul[n]),
                    delay=d,
                    conditional_utility=u_cond if feasible else 0.0,
                    routing_utility=float(u_route[n]) if feasible else 0.0,
                    feasible=feasible,
                )
            )
    return UtilityReport(tuple(rows))
