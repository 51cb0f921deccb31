"""Discrepancy report: quoted closed forms versus definitional/oracle values.

Each entry compares a commonly quoted formula for this problem family against
the value obtained from the defining equations (or from an independent exact
oracle), on fixed benchmarks, and renders a verdict.  Benchmarks are the
harmonic case m = omega = 1, q_a = 0, q_b = 1, and a linear velocity coupling
u0 = 0.3 q on top of the same oscillator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import classical, exact
from .catalog import MagneticTerm, Potential

AGREE_TOL = 1e-8


@dataclass
class Entry:
    key: str
    description: str
    printed_value: float
    derived_value: float
    extra: dict = field(default_factory=dict)

    @property
    def abs_dev(self) -> float:
        return abs(self.printed_value - self.derived_value)

    @property
    def rel_dev(self) -> float:
        scale = max(abs(self.printed_value), abs(self.derived_value), 1e-300)
        return self.abs_dev / scale

    @property
    def verdict(self) -> str:
        return "agrees" if self.abs_dev <= AGREE_TOL else "disagrees"

    def to_dict(self) -> dict:
        return {"key": self.key, "description": self.description,
                "printed_value": self.printed_value,
                "derived_value": self.derived_value,
                "abs_dev": self.abs_dev, "rel_dev": self.rel_dev,
                "verdict": self.verdict, **self.extra}


@dataclass
class DiscrepancyReport:
    entries: list

    def entry(self, key: str) -> Entry:
        for e in self.entries:
            if e.key == key:
                return e
        raise KeyError(key)

    def to_json(self) -> str:
        return json.dumps([e.to_dict() for e in self.entries], indent=2)

    def to_markdown(self) -> str:
        lines = ["# Closed-form audit", "",
                 "| key | printed | derived | abs dev | verdict |",
                 "|---|---|---|---|---|"]
        for e in self.entries:
            lines.append(f"| {e.key} | {e.printed_value:.10g} | "
                         f"{e.derived_value:.10g} | {e.abs_dev:.3g} | {e.verdict} |")
        lines.append("")
        for e in self.entries:
            lines.append(f"- **{e.key}**: {e.description}")
            for k, v in e.extra.items():
                lines.append(f"    - {k}: {v}")
        return "\n".join(lines) + "\n"


def build_report(run_fit: bool = True) -> DiscrepancyReport:
    entries = []
    m, omega, qa, qb = 1.0, 1.0, 0.0, 1.0
    H = classical.HamiltonianSpec(m, Potential.harmonic(omega, m))
    prof = classical.secular_profiles(H, qa, qb)

    # 1. pi3: quoted -(V'(q_seg) - avg)/dq vs the defining ODE solution.
    printed = classical.pi3_closed_form(H, qa, qb, prof.tau)
    dev = float(np.max(np.abs(printed - prof.pi3)))
    entries.append(Entry(
        "pi3-closed-form",
        "quoted pi3 = -(V'(q_seg) - avg V')/dq vs the ODE "
        "d(pi3)/dtau = -V''(q_seg) chi2 with zero mean; max pointwise deviation "
        "on the oscillator benchmark",
        printed_value=float(np.max(np.abs(printed))),
        derived_value=float(np.max(np.abs(prof.pi3))),
        extra={"max_pointwise_dev": dev}))

    # 2. chi2 for the oscillator: quoted vs eps^2 expansion of the exact path.
    quoted = classical.chi2_harmonic_quoted(omega, qa, qb, prof.tau)
    derived = classical.chi2_harmonic_derived(omega, qa, qb, prof.tau)
    entries.append(Entry(
        "chi2-oscillator",
        "quoted oscillator chi2 vs the eps^2 Taylor coefficient of the exact "
        "two-point solution; the ODE-integrated profile sides with the latter",
        printed_value=float(np.max(np.abs(quoted - derived))),
        derived_value=float(np.max(np.abs(prof.chi2 - derived))),
        extra={"note": "values shown are max deviations from the exact-solution "
                       "expansion for the quoted form (printed) and the ODE "
                       "profile (derived)"}))

    # 3. eps^5 coefficient: three candidate routes vs the exact-series oracle.
    cands = classical.c5_candidates(H, qa, qb)
    oracle = classical.harmonic_series_oracle(m, omega, qa, qb)[5]
    match = {k: abs(cands[k] - oracle) <= 1e-6 * abs(oracle) for k in "abc"}
    entries.append(Entry(
        "c5-candidates",
        "eps^5 action coefficient: (a) quoted covariance form, (b) quoted "
        "+(1/m) int pi1 pi3, (c) -(1/2m) int pi1 pi3 from the completed "
        "potential-Taylor terms; oracle is the exact oscillator series",
        printed_value=cands["a"], derived_value=oracle,
        extra={"candidate_a": cands["a"], "candidate_b": cands["b"],
               "candidate_c": cands["c"], "oracle": oracle,
               "matches_oracle": match, "designated": "c"}))

    # 4. q-sandwich monomial form vs the tau-integral uniform rule.
    sandwich_dev = 0
    for n in range(0, 7):
        for r in range(0, 7):
            lhs = exact.bj_sandwich(n, r)
            rhs = exact.quantize_monomial(n, r, exact.BORN_JORDAN)
            if lhs != rhs:
                sandwich_dev += 1
    entries.append(Entry(
        "bj-q-sandwich",
        "uniform-rule monomials: q-sandwich form sum_k q^k p^r q^(n-k)/(n+1) "
        "vs the tau-integral definition, compared exactly for 0<=n,r<=6; "
        "value is the count of disagreeing (n, r) pairs",
        printed_value=float(sandwich_dev), derived_value=0.0))

    # 5. bracket characterization (exact; deviation is a disagreement count).
    bracket_dev = 0
    for n in range(0, 7):
        for r in range(0, 7):
            if exact.bj_product_rule(n, r) != exact.quantize_monomial(
                    n, r, exact.BORN_JORDAN):
                bracket_dev += 1
    entries.append(Entry(
        "bj-bracket-identity",
        "commutator-of-antiderivatives rule vs uniform tau-average, exact "
        "comparison for 0<=n,r<=6; value is the count of disagreeing pairs",
        printed_value=float(bracket_dev), derived_value=0.0))

    # Magnetic benchmark: u0 = 0.3 q over the oscillator.
    gamma = 0.3
    Hm = classical.HamiltonianSpec(m, Potential.harmonic(omega, m),
                                   MagneticTerm.linear(gamma))
    profm = classical.secular_profiles(Hm, qa, qb)

    # 6. magnetic pi1: quoted m u0^2 (no 1/2) vs the integrated equation.
    printed_pi1 = classical.magnetic_pi1_closed_form(Hm, qa, qb, profm.tau)
    entries.append(Entry(
        "magnetic-pi1",
        "quoted magnetic pi1 with coefficient m on u0^2 vs the integrated "
        "momentum equation (coefficient m/2); max pointwise values, deviation "
        "in extra",
        printed_value=float(np.max(np.abs(printed_pi1))),
        derived_value=float(np.max(np.abs(profm.pi1))),
        extra={"max_pointwise_dev": float(np.max(np.abs(printed_pi1 - profm.pi1)))}))

    # 7. magnetic pi2: quoted -m u0'(q_seg) vs -m u0'(q_seg) chi2.
    printed_pi2 = classical.pi2_closed_form(Hm, qa, qb, profm.tau)
    entries.append(Entry(
        "magnetic-pi2",
        "quoted magnetic pi2 = -m u0'(q_seg) (nonzero mean, nonzero at the "
        "endpoints) vs the defining equation's solution -m u0'(q_seg) chi2",
        printed_value=float(np.max(np.abs(printed_pi2))),
        derived_value=float(np.max(np.abs(profm.pi2))),
        extra={"max_pointwise_dev": float(np.max(np.abs(printed_pi2 - profm.pi2)))}))

    # 8. magnetic eps^2 coefficient: quoted average combination vs fit.
    printed_c2 = classical.magnetic_c2_closed_form(Hm, qa, qb)
    if run_fit:
        fit = classical.fit_series_numeric(Hm, qa, qb)
        fitted_c2 = fit.coefficients[2]
    else:
        fitted_c2 = classical.action_series(Hm, qa, qb).c2
    entries.append(Entry(
        "magnetic-c2",
        "quoted eps^2 magnetic coefficient vs the numerically fitted one; in "
        "one dimension the u0 p coupling is a total derivative plus a "
        "potential shift, so the true coefficient vanishes",
        printed_value=printed_c2, derived_value=fitted_c2,
        extra={"gauge_argument": "S_u0(eps) = S_{V - m u0^2/2}(eps) "
                                 "- m (W(q_b) - W(q_a)), W' = u0"}))

    # 9. cutoff geometry for the bounded-symbol operator (interpretation).
    entries.append(Entry(
        "cutoff-indicator",
        "the energy truncation of the averaged-symbol operator is realized "
        "as multiplication by the indicator of {|Hbar| <= E}; this is an "
        "implementation interpretation (monotone in E), not a derived fact",
        printed_value=0.0, derived_value=0.0,
        extra={"status": "interpretation"}))
    return DiscrepancyReport(entries)
